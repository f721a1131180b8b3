"""Log-polar annulus grids, node-collocated fields and discrete calculus.

Orientation is dx^dy > 0 and the Hodge star on 1-forms is ``*dx = dy``,
``*dy = -dx``.  A 1-form ``p dx + q dy`` is stored by its Cartesian
components at every node.

Derivatives are taken in ``t = log r`` and ``theta`` with centered
differences and mapped to Cartesian components by the chain rule.  Rows that a
stencil cannot reach are NaN; norms skip them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import GridError, GridMismatchError

MIN_NODES = 8


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AnnulusGrid:
    """Tensor grid on ``r_in <= |z - center| <= r_out``, uniform in log r and theta.

    Radial nodes include both boundary circles; angular nodes are
    ``2*pi*j/n_angular`` for ``j < n_angular``.
    """

    r_in: float
    r_out: float
    n_radial: int
    n_angular: int
    center: complex = 0j

    def __post_init__(self):
        if not (0 < self.r_in < self.r_out) or not np.isfinite(self.r_out):
            raise GridError(f"need 0 < r_in < r_out, got r_in={self.r_in}, r_out={self.r_out}")
        if int(self.n_radial) != self.n_radial or int(self.n_angular) != self.n_angular:
            raise GridError("node counts must be integers")
        if self.n_radial < MIN_NODES or self.n_angular < MIN_NODES:
            raise GridError(f"need at least {MIN_NODES} nodes per direction")
        object.__setattr__(self, "r_in", float(self.r_in))
        object.__setattr__(self, "r_out", float(self.r_out))
        object.__setattr__(self, "n_radial", int(self.n_radial))
        object.__setattr__(self, "n_angular", int(self.n_angular))
        object.__setattr__(self, "center", complex(self.center))

    @property
    def shape(self):
        return (self.n_radial, self.n_angular)

    @cached_property
    def t(self):
        return _frozen(np.linspace(np.log(self.r_in), np.log(self.r_out), self.n_radial))

    @cached_property
    def theta(self):
        return _frozen(2.0 * np.pi * np.arange(self.n_angular) / self.n_angular)

    @property
    def ht(self):
        return (np.log(self.r_out) - np.log(self.r_in)) / (self.n_radial - 1)

    @property
    def htheta(self):
        return 2.0 * np.pi / self.n_angular

    @cached_property
    def r(self):
        # exact end values so Dirichlet traces sit on the requested circles
        r = np.exp(self.t.copy())
        r[0], r[-1] = self.r_in, self.r_out
        return _frozen(r)

    @cached_property
    def R(self):
        return _frozen(np.broadcast_to(self.r[:, None], self.shape))

    @cached_property
    def TH(self):
        return _frozen(np.broadcast_to(self.theta[None, :], self.shape))

    @cached_property
    def z(self):
        z = self.center + self.R * np.exp(1j * self.TH)
        z.setflags(write=False)
        return z

    @property
    def x(self):
        return self.z.real

    @property
    def y(self):
        return self.z.imag

    @cached_property
    def _trig(self):
        return (
            np.ascontiguousarray(np.cos(self.theta)),
            np.ascontiguousarray(np.sin(self.theta)),
            np.ascontiguousarray(1.0 / self.r),
        )

    def refine(self, factor=2):
        return AnnulusGrid(self.r_in, self.r_out, self.n_radial * factor,
                           self.n_angular * factor, self.center)

    def to_dict(self):
        return {
            "r_in": self.r_in,
            "r_out": self.r_out,
            "n_radial": self.n_radial,
            "n_angular": self.n_angular,
            "center": [self.center.real, self.center.imag],
        }

    @classmethod
    def from_dict(cls, d):
        c = d.get("center", [0.0, 0.0])
        return cls(d["r_in"], d["r_out"], d["n_radial"], d["n_angular"], complex(c[0], c[1]))


def _check_values(grid, *arrays):
    out = []
    for a in arrays:
        a = _frozen(np.broadcast_to(np.asarray(a, dtype=float), grid.shape))
        out.append(a)
    return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: AnnulusGrid
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.values) not in (self.grid.shape, ()):
            raise GridError(f"values of shape {np.shape(self.values)} do not match grid {self.grid.shape}")
        (v,) = _check_values(self.grid, self.values)
        object.__setattr__(self, "values", v)

    def map(self, fn):
        return ScalarField(self.grid, fn(self.values))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(self.grid, other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(self.grid, other))

    def __rsub__(self, other):
        return ScalarField(self.grid, _vals(self.grid, other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _vals(self.grid, other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class OneForm:
    """``p dx + q dy`` sampled at the nodes."""

    grid: AnnulusGrid
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        for a in (self.p, self.q):
            if np.shape(a) not in (self.grid.shape, ()):
                raise GridError(f"component of shape {np.shape(a)} does not match grid {self.grid.shape}")
        p, q = _check_values(self.grid, self.p, self.q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def __add__(self, other):
        _same_grid(self, other)
        return OneForm(self.grid, self.p + other.p, self.q + other.q)

    def __sub__(self, other):
        _same_grid(self, other)
        return OneForm(self.grid, self.p - other.p, self.q - other.q)

    def __neg__(self):
        return OneForm(self.grid, -self.p, -self.q)

    def __mul__(self, s):
        s = _vals(self.grid, s)
        return OneForm(self.grid, s * self.p, s * self.q)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: AnnulusGrid
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re, im = _check_values(self.grid, self.re, self.im)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, grid, values):
        values = np.asarray(values)
        return cls(grid, values.real, values.imag)

    @property
    def values(self):
        return self.re + 1j * self.im

    def abs_sq(self):
        return ScalarField(self.grid, self.re**2 + self.im**2)


def _vals(grid, other):
    if isinstance(other, ScalarField):
        if other.grid != grid:
            raise GridMismatchError("fields live on different grids")
        return other.values
    return other


def _same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


# -- operators ---------------------------------------------------------------

def laplacian(f: ScalarField, order: int = 2) -> ScalarField:
    """Cartesian Laplacian via ``e^{-2t} (d_tt + d_thth)``.

    ``order=2`` uses 3-point stencils and leaves the two boundary rows NaN;
    ``order=4`` uses 5-point stencils and leaves two rows NaN at each end.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    g = f.grid
    if g.n_radial < 1 + order:
        raise GridError("grid too small for the Laplacian stencil")
    lp = _kernels.logpolar_laplacian(np.ascontiguousarray(f.values), g.ht, g.htheta, order)
    return ScalarField(g, lp / (g.r**2)[:, None])


def gradient(f: ScalarField) -> OneForm:
    g = f.grid
    cos_th, sin_th, inv_r = g._trig
    p, q = _kernels.gradient(np.ascontiguousarray(f.values), g.ht, g.htheta, inv_r, cos_th, sin_th)
    return OneForm(g, p, q)


def hodge_star(a: OneForm) -> OneForm:
    return OneForm(a.grid, -a.q, a.p)


def wedge(a: OneForm, b: OneForm) -> ScalarField:
    """Coefficient of dx^dy in ``a ^ b``."""
    _same_grid(a, b)
    return ScalarField(a.grid, a.p * b.q - a.q * b.p)


def exterior_derivative(a: OneForm) -> ScalarField:
    g = a.grid
    cos_th, sin_th, inv_r = g._trig
    return ScalarField(g, _kernels.curl(np.ascontiguousarray(a.p), np.ascontiguousarray(a.q),
                                        g.ht, g.htheta, inv_r, cos_th, sin_th))


def codifferential(a: OneForm) -> ScalarField:
    """``*d*a``, which is the divergence ``dp/dx + dq/dy``."""
    return exterior_derivative(hodge_star(a))


def norm_sq(a: OneForm) -> ScalarField:
    return ScalarField(a.grid, a.p**2 + a.q**2)


def linf(f) -> float:
    """Max |value| over valid (non-NaN) nodes; both components for a 1-form."""
    if isinstance(f, OneForm):
        return max(linf(f.p), linf(f.q))
    v = f.values if isinstance(f, ScalarField) else np.asarray(f)
    v = np.abs(v[np.isfinite(v)])
    if v.size == 0:
        raise GridError("no valid nodes to take a norm over")
    return float(v.max())


def sample(grid: AnnulusGrid, fn) -> ScalarField:
    """Evaluate ``fn(z)`` (complex array in, real array out) at every node."""
    return ScalarField(grid, fn(grid.z))
