"""Closed-form special Kähler metrics and the harmonic data that drives them.

A harmonic function is described by a :class:`HarmonicSpec`.  Every spec
knows ``dh/dz`` exactly as a Laurent polynomial, which gives ``dh`` (via
``h_x = 2 Re dh/dz``, ``h_y = -2 Im dh/dz``) and the cubic-form
coefficient without finite differences.

The puncture is always at the origin, also for metrics sampled on grids
centred elsewhere.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .field_core import AnnulusGrid, OneForm, ScalarField
from .singularity import Classification

HARMONIC_KINDS = ("monomial", "log_abs", "coordinate_x", "constant", "linear_combination")


@dataclass(frozen=True)
class HarmonicSpec:
    """A harmonic function h on the punctured plane plus the coefficient ``a`` of phi.

    ``monomial`` with exponent ``n`` is ``Re z^(n+1)`` (``n != -1``);
    ``log_abs`` is ``log|z|``.  ``linear_combination`` holds
    ``(weight, spec)`` pairs; the ``a`` of nested specs is weighted and added.
    """

    kind: str
    n: int | None = None
    c: float = 0.0
    terms: tuple = ()
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in HARMONIC_KINDS:
            raise ValueError(f"unknown harmonic kind {self.kind!r}")
        if self.kind == "monomial":
            if self.n is None or int(self.n) != self.n:
                raise ValueError("monomial needs an integer n")
            if self.n == -1:
                raise ValueError("monomial(-1) is degenerate; use log_abs for the n = -1 case")
        if self.kind == "linear_combination":
            terms = tuple((float(w), s) for w, s in self.terms)
            object.__setattr__(self, "terms", terms)

    # constructors
    @classmethod
    def monomial(cls, n, a=0.0):
        return cls("monomial", n=int(n), a=float(a))

    @classmethod
    def log_abs(cls, a=0.0):
        return cls("log_abs", a=float(a))

    @classmethod
    def coordinate_x(cls, a=0.0):
        return cls("coordinate_x", a=float(a))

    @classmethod
    def constant(cls, c, a=0.0):
        return cls("constant", c=float(c), a=float(a))

    @classmethod
    def combination(cls, terms, a=0.0):
        return cls("linear_combination", terms=tuple(terms), a=float(a))

    @property
    def total_a(self):
        return self.a + sum(w * s.total_a for w, s in self.terms)

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "monomial":
            return (z ** (self.n + 1)).real
        if self.kind == "log_abs":
            return np.log(np.abs(z))
        if self.kind == "coordinate_x":
            return z.real.copy()
        if self.kind == "constant":
            return np.full(z.shape, self.c)
        return sum((w * s.value(z) for w, s in self.terms), np.zeros(z.shape))

    def dz_laurent(self):
        """``dh/dz`` as ``{power: coefficient}``; zero coefficients dropped."""
        if self.kind == "monomial":
            out = {self.n: (self.n + 1) / 2.0}
        elif self.kind == "log_abs":
            out = {-1: 0.5}
        elif self.kind == "coordinate_x":
            out = {0: 0.5}
        elif self.kind == "constant":
            out = {}
        else:
            out = {}
            for w, s in self.terms:
                for k, v in s.dz_laurent().items():
                    out[k] = out.get(k, 0.0) + w * v
        return {k: complex(v) for k, v in out.items() if v != 0}

    def dh_dz(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for k, v in self.dz_laurent().items():
            out = out + v * z**k
        return out

    def xi0_laurent(self):
        """Laurent coefficients of ``Xi_0 = (a/(2z) - i dh/dz) / 2``."""
        out = {k: -0.5j * v for k, v in self.dz_laurent().items()}
        a = self.total_a
        if a != 0:
            out[-1] = out.get(-1, 0.0) + a / 4.0
        return {k: v for k, v in out.items() if v != 0}

    def xi0(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for k, v in self.xi0_laurent().items():
            out = out + v * z**k
        return out

    @property
    def order(self):
        """Order of the cubic form at 0, or None when it vanishes identically."""
        lau = self.xi0_laurent()
        return min(lau) if lau else None

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "monomial":
            d["n"] = self.n
        elif self.kind == "constant":
            d["c"] = self.c
        elif self.kind == "linear_combination":
            d["terms"] = [{"weight": w, "spec": s.to_dict()} for w, s in self.terms]
        if self.a:
            d["a"] = self.a
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        a = float(d.get("a", 0.0))
        if kind == "monomial":
            return cls.monomial(d["n"], a)
        if kind == "constant":
            return cls.constant(d["c"], a)
        if kind == "linear_combination":
            return cls.combination([(t["weight"], cls.from_dict(t["spec"])) for t in d["terms"]], a)
        if kind not in HARMONIC_KINDS:
            raise ValueError(f"unknown harmonic kind {kind!r}")
        return cls(kind, a=a)


def phi_components(z):
    """Components of ``(y dx - x dy)/|z|^2``."""
    z = np.asarray(z, dtype=complex)
    r2 = np.abs(z) ** 2
    return z.imag / r2, -z.real / r2


def dh_components(spec: HarmonicSpec, z, include_phi=True):
    dz = spec.dh_dz(z)
    p, q = 2.0 * dz.real, -2.0 * dz.imag
    a = spec.total_a
    if include_phi and a != 0:
        fp, fq = phi_components(z)
        p, q = p + a * fp, q + a * fq
    return p, q


def phi(grid: AnnulusGrid) -> OneForm:
    return OneForm(grid, *phi_components(grid.z))


def sample_h(spec: HarmonicSpec, grid: AnnulusGrid) -> ScalarField:
    return ScalarField(grid, spec.value(grid.z))


def sample_dh(spec: HarmonicSpec, grid: AnnulusGrid) -> OneForm:
    """Exact ``dh + a*phi`` at the nodes."""
    return OneForm(grid, *dh_components(spec, grid.z))


def rho(spec: HarmonicSpec, grid: AnnulusGrid) -> ScalarField:
    """``|dh + a phi|^2``, the density in the Kazdan-Warner equation."""
    p, q = dh_components(spec, grid.z)
    return ScalarField(grid, p**2 + q**2)


# -- closed-form metrics -------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Sampling annulus of a catalog entry.

    Kept well inside |z| < 1 for metrics whose u blows up on the unit circle,
    so that refinement studies on 64..256 nodes are in the asymptotic regime.
    """

    r_in: float
    r_out: float
    center: complex = 0j

    def grid(self, n_radial, n_angular=None):
        return AnnulusGrid(self.r_in, self.r_out, n_radial, n_angular or n_radial, self.center)


@dataclass(frozen=True)
class ClosedFormMetric:
    """``g = w |dz|^2`` together with the data ``(h, a)`` that produces it.

    ``model_only`` entries are asymptotic reference profiles, not solutions;
    the PDE checks refuse them.
    """

    name: str
    w: Callable
    h_spec: HarmonicSpec | None
    domain: Domain
    expected_classification: Classification
    description: str = ""
    model_only: bool = False
    curvature_tilde: float | None = None  # Gaussian curvature of e^{2u}|dz|^2 when constant
    profile_range: tuple = (1e-6, 1e-2)
    params: dict = field(default_factory=dict)

    def u(self, z):
        return -np.log(self.w(z))

    @property
    def order(self):
        return None if self.h_spec is None else self.h_spec.order

    def grid(self, n_radial, n_angular=None):
        return self.domain.grid(n_radial, n_angular)

    def sample_w(self, grid):
        return ScalarField(grid, self.w(grid.z))

    def sample_u(self, grid):
        return ScalarField(grid, self.u(grid.z))

    def summary(self):
        d = {
            "name": self.name,
            "description": self.description,
            "model_only": self.model_only,
            "domain": {"r_in": self.domain.r_in, "r_out": self.domain.r_out,
                       "center": [self.domain.center.real, self.domain.center.imag]},
            "h_spec": None if self.h_spec is None else self.h_spec.to_dict(),
            "order": self.order,
            "expected_classification": self.expected_classification.as_dict(),
        }
        if self.curvature_tilde is not None:
            d["curvature_tilde"] = self.curvature_tilde
        return d


def _abs(z):
    return np.abs(np.asarray(z, dtype=complex))


def poincare_family(name: str) -> ClosedFormMetric:
    """Special Kähler metrics ``e^{-u}|dz|^2`` from the three Poincaré models, with h = x."""
    hx = HarmonicSpec.coordinate_x()
    if name == "half_plane":
        # centred inside the upper half plane so the annulus stays in the domain
        return ClosedFormMetric(
            "half_plane", lambda z: np.asarray(z, dtype=complex).imag, hx,
            Domain(0.1, 1.0, 2j), Classification.power(0.0, 2.0),
            "w = Im z on the upper half plane", curvature_tilde=-1.0,
            profile_range=(1e-6, 1e-2))
    if name == "disc":
        return ClosedFormMetric(
            "disc", lambda z: 0.5 * (1.0 - _abs(z) ** 2), hx,
            Domain(0.05, 0.5), Classification.power(0.0, 0.5),
            "w = (1 - |z|^2)/2 on the unit disc", curvature_tilde=-1.0)
    if name == "punctured_disc":
        return ClosedFormMetric(
            "punctured_disc", lambda z: -_abs(z) * np.log(_abs(z)), hx,
            Domain(0.05, 0.5), Classification.logarithmic(1),
            "w = -|z| log|z| on the punctured unit disc", curvature_tilde=-1.0)
    raise KeyError(f"unknown Poincaré model {name!r}")


def log_metric() -> ClosedFormMetric:
    """``w = -log|z|`` from the positive harmonic function ``-log|z|``."""
    return ClosedFormMetric(
        "log_metric", lambda z: -np.log(_abs(z)),
        HarmonicSpec.combination([(-1.0, HarmonicSpec.log_abs())]),
        Domain(0.05, 0.5), Classification.logarithmic(0),
        "w = -log|z| on the punctured unit disc")


def conical_metric(alpha: float) -> ClosedFormMetric:
    """``w = |z|^alpha (1 - |z|^(2(1-alpha))) / (1 - alpha)``.

    The source metric ``e^{2u}|dz|^2`` has curvature -4 for every alpha, so
    h = 2x makes ``(h, u)`` an exact Kazdan-Warner pair.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"conical metric needs 0 < alpha < 1, got {alpha}")
    s = 1.0 - alpha

    def w(z):
        r = _abs(z)
        return r**alpha * (1.0 - r ** (2.0 * s)) / s

    return ClosedFormMetric(
        f"conical({alpha:g})", w,
        HarmonicSpec.combination([(2.0, HarmonicSpec.coordinate_x())]),
        Domain(0.05, 0.5), Classification.power(alpha, 1.0 / s),
        "conical singularity from a constant-curvature cone metric",
        curvature_tilde=-4.0, params={"alpha": alpha})


def picard_local_model(alpha_j: float, c: float = 1.0) -> ClosedFormMetric:
    """Leading-order local model ``c |z|^alpha_j`` near one Picard puncture."""
    alpha_j = float(alpha_j)
    if not 0.0 < alpha_j < 1.0:
        raise ValueError(f"Picard local model needs 0 < alpha_j < 1, got {alpha_j}")
    return ClosedFormMetric(
        f"picard_local({alpha_j:g})", lambda z: c * _abs(z) ** alpha_j, None,
        Domain(1e-3, 0.5), Classification.power(alpha_j, c),
        "leading-order model of a Picard metric near one puncture (not a solution)",
        model_only=True, params={"alpha": alpha_j, "c": c})


def flat_metric() -> ClosedFormMetric:
    """Constant h: the equation reduces to Laplace(u) = 0; here u = 0, w = 1."""
    return ClosedFormMetric(
        "flat", lambda z: np.ones(np.shape(z)), HarmonicSpec.constant(1.0),
        Domain(0.05, 0.5), Classification.power(0.0, 1.0),
        "flat metric from a constant harmonic function")


CATALOG_NAMES = ("half_plane", "disc", "punctured_disc", "log_metric", "conical", "picard_local",
                 "flat")
_DEFAULT_ALPHA = 0.5
_ID = re.compile(r"^([a-z_]+)(?:\(([^)]*)\))?$")


def get_metric(ident: str) -> ClosedFormMetric:
    """Resolve ``name`` or ``name(param)``, e.g. ``conical(0.5)``."""
    m = _ID.match(ident.strip())
    if not m:
        raise KeyError(f"unknown catalog entry {ident!r}")
    name, arg = m.group(1), m.group(2)
    if name in ("half_plane", "disc", "punctured_disc") and arg is None:
        return poincare_family(name)
    if name == "log_metric" and arg is None:
        return log_metric()
    if name == "flat" and arg is None:
        return flat_metric()
    if name in ("conical", "picard_local"):
        try:
            alpha = _DEFAULT_ALPHA if arg in (None, "") else float(arg)
        except ValueError:
            raise KeyError(f"bad parameter in {ident!r}") from None
        return conical_metric(alpha) if name == "conical" else picard_local_model(alpha)
    raise KeyError(f"unknown catalog entry {ident!r}")


def list_metrics():
    return [get_metric(n) for n in CATALOG_NAMES]


def harmonic_catalog():
    """Named harmonic specs used across the test and acceptance suites."""
    H = HarmonicSpec
    specs = {
        "x": H.coordinate_x(),
        "two_x": H.combination([(2.0, H.coordinate_x())]),
        "log_abs": H.log_abs(),
        "neg_log_abs": H.combination([(-1.0, H.log_abs())]),
        "phi_only": H.constant(0.0, a=1.0),
        "x_plus_phi": H.coordinate_x(a=1.0),
        "z2_plus_half_phi": H.monomial(1, a=0.5),
        "log_abs_plus_phi": H.log_abs(a=-0.75),
        "z_inv2_plus_phi": H.monomial(-3, a=2.0),
    }
    for n in (-3, -2, 0, 1, 2, 3):
        specs[f"monomial({n})"] = H.monomial(n)
    return specs
