"""Damped Newton solver for ``Laplace(u) = rho e^{2u}`` on an annulus with Dirichlet data.

The equation is solved in its log-polar form
``u_tt + u_thth - r^2 rho e^{2u} = 0``, whose Jacobian
``D_tt + D_thth - diag(2 r^2 rho e^{2u})`` is symmetric negative definite on
the interior unknowns.  Convergence is judged on this scaled residual: its
size does not blow up like ``r^-2`` near a small inner radius, so the same
tolerance is reachable on every grid.  The Cartesian residual is reported
alongside.

Linear systems are solved with SuperLU (``scipy.sparse.linalg.splu``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels
from .catalog import HarmonicSpec, rho as rho_field
from .errors import ExponentConstraintError, NegativeDensityError
from .field_core import AnnulusGrid, ScalarField, laplacian, linf

log = logging.getLogger(__name__)

MAX_HALVINGS = 40


@dataclass(frozen=True, eq=False)
class KwProblem:
    grid: AnnulusGrid
    rho: ScalarField
    bc_inner: np.ndarray
    bc_outer: np.ndarray
    initial_guess: ScalarField | None = None

    def __post_init__(self):
        g = self.grid
        if self.rho.grid != g:
            raise ValueError("rho lives on a different grid")
        if np.any(~np.isfinite(self.rho.values)):
            raise ValueError("rho must be finite")
        if np.any(self.rho.values < 0):
            raise NegativeDensityError("rho must be >= 0 at every node (it is a squared norm)")
        for name in ("bc_inner", "bc_outer"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (g.n_angular,)).copy()
            if np.any(~np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            v.setflags(write=False)
            object.__setattr__(self, name, v)


@dataclass(frozen=True, eq=False)
class KwSolution:
    u: ScalarField
    residual_norm: float
    newton_iterations: int
    converged: bool
    tol: float
    cartesian_residual_norm: float
    history: tuple = ()

    def summary(self):
        return {
            "converged": self.converged,
            "newton_iterations": self.newton_iterations,
            "residual_norm": self.residual_norm,
            "cartesian_residual_norm": self.cartesian_residual_norm,
            "tol": self.tol,
            "residual_history": list(self.history),
        }


def _laplace_matrix(grid: AnnulusGrid):
    """``D_tt + D_thth`` on interior rows, unknowns ordered row-major."""
    m, na = grid.n_radial - 2, grid.n_angular
    d_tt = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m, m)) / grid.ht**2
    e = np.ones(na)
    d_aa = sp.diags([e[:-1], -2.0 * e, e[:-1]], [-1, 0, 1], shape=(na, na)).tolil()
    d_aa[0, na - 1] = 1.0
    d_aa[na - 1, 0] = 1.0
    d_aa = d_aa.tocsr() / grid.htheta**2
    return (sp.kron(d_tt, sp.identity(na)) + sp.kron(sp.identity(m), d_aa)).tocsc()


def _with_bc(interior, problem):
    g = problem.grid
    u = np.empty(g.shape)
    u[0] = problem.bc_inner
    u[-1] = problem.bc_outer
    u[1:-1] = interior
    return u


def harmonic_extension(problem: KwProblem) -> ScalarField:
    """Discrete harmonic function with the problem's boundary values."""
    g = problem.grid
    rhs = np.zeros((g.n_radial - 2, g.n_angular))
    rhs[0] -= problem.bc_inner / g.ht**2
    rhs[-1] -= problem.bc_outer / g.ht**2
    sol = splu(_laplace_matrix(g)).solve(rhs.ravel())
    return ScalarField(g, _with_bc(sol.reshape(rhs.shape), problem))


def scaled_residual(u: np.ndarray, r2rho: np.ndarray, grid: AnnulusGrid) -> np.ndarray:
    """Interior ``u_tt + u_thth - r^2 rho e^{2u}`` (boundary rows dropped)."""
    lp = _kernels.logpolar_laplacian(np.ascontiguousarray(u), grid.ht, grid.htheta, 2)
    with np.errstate(over="ignore", invalid="ignore"):
        return (lp - r2rho * np.exp(2.0 * u))[1:-1]


def _norm(a):
    m = np.max(np.abs(a))
    return float(m) if np.isfinite(m) else np.inf


def solve(problem: KwProblem, tol: float = 1e-9, max_iter: int = 30) -> KwSolution:
    """Damped Newton iteration; steps are halved until the residual norm decreases.

    Returns the best iterate with ``converged=False`` if ``max_iter`` is hit or
    no damped step reduces the residual.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    g = problem.grid
    r2rho = np.ascontiguousarray((g.r**2)[:, None] * problem.rho.values)
    u = (problem.initial_guess or harmonic_extension(problem)).values.copy()
    u[0], u[-1] = problem.bc_inner, problem.bc_outer
    L = _laplace_matrix(g)

    F = scaled_residual(u, r2rho, g)
    norm = _norm(F)
    history = [norm]
    its = 0
    while norm > tol and its < max_iter:
        J = L - sp.diags((2.0 * r2rho[1:-1] * np.exp(2.0 * u[1:-1])).ravel(), format="csc")
        delta = splu(J.tocsc()).solve(-F.ravel()).reshape(F.shape)
        step = 1.0
        for _ in range(MAX_HALVINGS):
            cand = u.copy()
            cand[1:-1] += step * delta
            Fc = scaled_residual(cand, r2rho, g)
            nc = _norm(Fc)
            if nc < norm:
                break
            step *= 0.5
        else:
            log.warning("damping failed to reduce the residual (%.3e); stopping", norm)
            break
        u, F, norm = cand, Fc, nc
        its += 1
        history.append(norm)
        log.debug("newton %d: step %.3g residual %.3e", its, step, norm)

    uf = ScalarField(g, u)
    cart = linf(laplacian(uf) - problem.rho.values * np.exp(2.0 * u))
    return KwSolution(uf, norm, its, bool(norm <= tol), tol, cart, tuple(history))


def dirichlet_problem(grid: AnnulusGrid, rho: ScalarField, u_exact) -> KwProblem:
    """Problem whose boundary traces are sampled from ``u_exact(z)``."""
    z = grid.z
    return KwProblem(grid, rho, u_exact(z[0]), u_exact(z[-1]))


def solve_with_exponent(h_spec: HarmonicSpec, beta: float, grid: AnnulusGrid,
                        tol: float = 1e-9, max_iter: int = 30) -> KwSolution:
    """Solve with the trace ``u = -beta log r`` on both circles.

    This models the power branch ``w = |z|^beta (C + o(1))``.  Requires
    ``beta < n+1`` with n the order of the cubic form of ``h_spec``.
    """
    n = h_spec.order
    if n is not None and not beta < n + 1:
        raise ExponentConstraintError(
            f"beta = {beta:g} violates the constraint β < n+1 = {n + 1} "
            f"(order n = {n} of the cubic form)")
    bc = lambda z: -beta * np.log(np.abs(z))  # noqa: E731
    return solve(dirichlet_problem(grid, rho_field(h_spec, grid), bc), tol=tol, max_iter=max_iter)
