"""Assemble the special Kähler connection from (h, u, a) and check its identities.

``dh + a*phi`` is always exact; ``du`` comes from finite differences, so all
residuals measure discretization error in u.  Norms are L-infinity over the
nodes where every stencil involved is valid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import ClosedFormMetric, HarmonicSpec, dh_components, phi, sample_dh
from .errors import ModelOnlyError, OrderMismatchError
from .field_core import (AnnulusGrid, ComplexField, OneForm, ScalarField, codifferential,
                         exterior_derivative, gradient, hodge_star, laplacian, linf, norm_sq,
                         wedge)


@dataclass(frozen=True, eq=False)
class ConnectionForms:
    """Connection matrix ``[[om11, om12], [om21, om22]]``.

    ``om12`` and ``om21`` default to ``-*om11`` and ``*om22``; passing them
    explicitly lets external connections be checked.
    """

    om11: OneForm
    om22: OneForm
    om12: OneForm | None = None
    om21: OneForm | None = None

    def __post_init__(self):
        if self.om12 is None:
            object.__setattr__(self, "om12", -hodge_star(self.om11))
        if self.om21 is None:
            object.__setattr__(self, "om21", hodge_star(self.om22))

    @property
    def grid(self):
        return self.om11.grid

    def trace(self):
        return self.om11 + self.om22


@dataclass(frozen=True, eq=False)
class CubicFormField:
    xi0: ComplexField
    order_estimate: int | None
    h_spec: HarmonicSpec | None = None


def build_connection(h_spec: HarmonicSpec, u: ScalarField) -> ConnectionForms:
    dh = sample_dh(h_spec, u.grid)
    half_e = 0.5 * np.exp(u.values)
    du = gradient(u)
    om11 = OneForm(u.grid, half_e * dh.p - 0.5 * du.p, half_e * dh.q - 0.5 * du.q)
    om22 = OneForm(u.grid, -half_e * dh.p - 0.5 * du.p, -half_e * dh.q - 0.5 * du.q)
    return ConnectionForms(om11, om22)


def flatness_residuals(conn: ConnectionForms) -> dict:
    """Residuals of the four first-order equations equivalent to flatness."""
    a, b = conn.om11, conn.om22
    out = {}
    for name, x, y in (("om11", a, b), ("om22", b, a)):
        out[f"d_{name}"] = linf(exterior_derivative(x) - wedge(x, y))
        rhs = -wedge(hodge_star(x), y).values - norm_sq(x).values
        out[f"d_star_{name}"] = linf(exterior_derivative(hodge_star(x)) - rhs)
    return out


def flatness_residual(conn: ConnectionForms) -> float:
    return max(flatness_residuals(conn).values())


def symmetry_residuals(conn: ConnectionForms):
    """Pointwise residuals of the two scalar equations for (nabla_X I)Y = (nabla_Y I)X."""
    o11, o12, o21, o22 = conn.om11, conn.om12, conn.om21, conn.om22
    e1 = (o11.p - o22.p) + (o12.q + o21.q)
    e2 = (o12.p + o21.p) - (o11.q - o22.q)
    g = conn.grid
    return ScalarField(g, e1), ScalarField(g, e2)


def symmetry_residual(conn: ConnectionForms) -> float:
    return max(linf(e) for e in symmetry_residuals(conn))


def _resolve(source, u):
    if isinstance(source, ClosedFormMetric):
        if source.model_only:
            raise ModelOnlyError(
                f"{source.name} is a model-only asymptotic profile; PDE residual checks do not apply")
        spec = source.h_spec
        if isinstance(u, AnnulusGrid):
            u = source.sample_u(u)
    else:
        spec = source
    if not isinstance(u, ScalarField):
        raise TypeError("u must be a ScalarField (or a grid when checking a catalog metric)")
    if not np.all(np.isfinite(u.values)):
        raise ValueError("u must be finite on the grid")
    return spec, u


def check_eta_system(source, u) -> dict:
    """Residuals of the (u, eta) system with ``eta = (dh - e^{-u} du)/2 + (a/2) phi``.

    ``source`` is a HarmonicSpec or a catalog metric; for a metric, ``u`` may
    be a grid on which the exact u is sampled.  Model-only metrics raise
    ModelOnlyError.
    """
    spec, u = _resolve(source, u)
    g = u.grid
    du = gradient(u)
    em = np.exp(-u.values)
    dh_p, dh_q = dh_components(spec, g.z, include_phi=False)
    a = spec.total_a
    ph = phi(g)
    eta = OneForm(g, 0.5 * (dh_p - em * du.p) + 0.5 * a * ph.p,
                  0.5 * (dh_q - em * du.q) + 0.5 * a * ph.q)
    lap = laplacian(u)
    eu = np.exp(u.values)

    codiff_rhs = 2.0 * wedge(hodge_star(eta), du).values - 2.0 * eu * norm_sq(eta).values
    v = OneForm(g, 2.0 * eta.p + em * du.p, 2.0 * eta.q + em * du.q)
    rho = norm_sq(sample_dh(spec, g)).values
    return {
        "d_eta": linf(exterior_derivative(eta)),
        "codiff_eta": linf(codifferential(eta) - codiff_rhs),
        "laplace_u": linf(lap - norm_sq(v).values * eu**2),
        "kazdan_warner": linf(lap - rho * eu**2),
    }


def residual_report(source, u) -> dict:
    """Every structural residual for one (h, u) pair on one grid."""
    spec, u = _resolve(source, u)
    conn = build_connection(spec, u)
    out = check_eta_system(spec, u)
    fl = flatness_residuals(conn)
    out.update(fl)
    out["flatness"] = max(fl.values())
    out["symmetry"] = symmetry_residual(conn)
    out["trace"] = linf(conn.trace() + gradient(u))
    return out


def cubic_form(h_spec: HarmonicSpec, grid: AnnulusGrid) -> CubicFormField:
    """Exact ``Xi_0 = (a/(2z) - i dh/dz)/2`` at the nodes."""
    return CubicFormField(ComplexField.from_complex(grid, h_spec.xi0(grid.z)), h_spec.order, h_spec)


def curvature(u: ScalarField, sign: int = 1, order: int = 2) -> ScalarField:
    """Gaussian curvature of ``e^{2u}|dz|^2`` (sign=+1) or ``e^{-u}|dz|^2`` (sign=-1)."""
    lap = laplacian(u, order=order).values
    if sign == 1:
        return ScalarField(u.grid, -np.exp(-2.0 * u.values) * lap)
    if sign == -1:
        return ScalarField(u.grid, 0.5 * np.exp(u.values) * lap)
    raise ValueError("sign must be +1 or -1")


def curvature_rounding_bound(u: ScalarField) -> ScalarField:
    """Floating-point resolution of ``curvature(u)`` at each interior node.

    The 5-point stencil applied to values of size ``|u|`` carries an absolute
    rounding error of about ``8 eps |u| (2/h_t^2 + 2/h_theta^2)``; scaled by
    ``e^{-2u}/r^2`` this bounds the error of the computed curvature.  Where the
    true curvature is smaller than this bound its sign is not determined by
    the data.
    """
    g, v = u.grid, np.abs(u.values)
    near = np.maximum.reduce([np.roll(v, k, axis=1) for k in (-1, 0, 1)])
    out = np.full(g.shape, np.nan)
    out[1:-1] = np.maximum.reduce([near[:-2], near[1:-1], near[2:]])
    eps = np.finfo(float).eps
    stencil = 2.0 / g.ht**2 + 2.0 / g.htheta**2
    with np.errstate(over="ignore"):
        return ScalarField(g, 8.0 * eps * out * stencil * np.exp(-2.0 * u.values) / (g.r**2)[:, None])


SANDWICH_SLOPE_TOL = 0.5


def curvature_sandwich(h_spec: HarmonicSpec, n: int, grid: AnnulusGrid):
    """Empirical constants with ``c2 |z|^{2n} <= 16|Xi_0|^2 <= c1 |z|^{2n}`` on the grid.

    Raises OrderMismatchError when ``c2`` vanishes or, on a grid centred at the
    puncture, when the normalized ring extremes still scale with a power of r
    over the innermost decade (the declared n is then not the order).
    """
    z = grid.z
    val = 16.0 * np.abs(h_spec.xi0(z)) ** 2 * np.abs(z) ** (-2.0 * n)
    c1, c2 = float(val.max()), float(val.min())
    if not np.isfinite(c1) or c2 <= 1e-14 * max(c1, 1e-300):
        raise OrderMismatchError(f"curvature sandwich fails for declared order n={n}: c2 = {c2:g}")
    if grid.center == 0:
        r = grid.r
        sel = r <= r[0] * 10.0 * (1 + 1e-12)
        if sel.sum() < 2:
            sel[:2] = True
        for ring in (val.min(axis=1), val.max(axis=1)):
            slope = np.polyfit(np.log(r[sel]), np.log(ring[sel]), 1)[0]
            if abs(slope) > SANDWICH_SLOPE_TOL:
                raise OrderMismatchError(
                    f"16|Xi_0|^2 |z|^(-2n) scales like r^{slope:.2f} near 0; declared n={n} "
                    "is not the order of the cubic form")
    return c1, c2


ROUNDING_FLOOR = 1e-9


def is_rounding_level(errors, floor=ROUNDING_FLOOR):
    e = np.asarray(errors, dtype=float)
    return bool(np.all(np.isfinite(e)) and np.all(e <= floor))


def fit_order(spacings, errors):
    """Least-squares slope of log(error) against log(spacing).

    None when the errors sit at rounding level (the discrete identity holds
    exactly and there is no decay to measure).
    """
    e = np.asarray(errors, dtype=float)
    if is_rounding_level(e) or np.any(e <= 0):
        return None
    if np.any(~np.isfinite(e)):
        return float("nan")
    return float(np.polyfit(np.log(spacings), np.log(e), 1)[0])


def refinement_study(metric: ClosedFormMetric, levels: int = 3, base_n: int = 64) -> dict:
    """Residuals of every identity under dyadic refinement, with fitted orders."""
    if metric.model_only:
        raise ModelOnlyError(f"{metric.name} is model-only; nothing to verify")
    rows = []
    grid = metric.grid(base_n)
    for _ in range(levels):
        res = residual_report(metric, grid)
        rows.append({"n_radial": grid.n_radial, "n_angular": grid.n_angular, "h_t": grid.ht,
                     "residuals": res})
        grid = grid.refine()
    names = list(rows[0]["residuals"])
    hs = [r["h_t"] for r in rows]
    orders, exact = {}, []
    for k in names:
        errs = [r["residuals"][k] for r in rows]
        if is_rounding_level(errs):
            exact.append(k)
        orders[k] = fit_order(hs, errs) if levels >= 2 else None
    return {"metric": metric.name, "levels": rows, "orders": orders, "rounding_level": exact}
