"""Radial profiles of conformal factors near the puncture, and their classification.

Two asymptotic models are fitted to ``s = log w`` against ``x = log r``:

* power:        ``s = beta*x + log C``
* logarithmic:  ``s = (n+1)*x + log(-x) + const``

The logarithmic branch only pins w down up to a bounded factor, so when the
order n of the cubic form is supplied its max deviation is discounted by
``log_factor_allowance`` before the two models are compared.  A classifier
can therefore confirm consistency with a branch; it cannot recover the
bounded factor itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, InconclusiveClassification, OrderMismatchError

WINDOW_FRACTION = 1.0 / 3.0  # innermost share of the decades spanned by a profile
MIN_WINDOW_DECADES = 3.0  # grown to this width when the profile is long enough
MIN_WINDOW_POINTS = 4
FIT_THRESHOLD = 0.1  # max log-space deviation for an acceptable fit
TOL_BETA = 0.05
LOG_FACTOR_ALLOWANCE = math.log(2.0)
FIT_EPS = 1e-9
N_PROFILE_ANGLES = 64

LIMITATION = ("logarithmic branch holds only up to a bounded factor e^{O(1)}; "
              "the classification confirms consistency with the branch, not the exact profile")


@dataclass(frozen=True)
class Classification:
    branch: str  # "power" or "logarithmic"
    beta: float | None = None
    c: float | None = None
    n_plus_1: int | None = None
    fit_quality: float = 0.0
    details: dict = field(default_factory=dict, compare=False)

    @classmethod
    def power(cls, beta, c, fit_quality=0.0, **details):
        return cls("power", beta=float(beta), c=float(c), fit_quality=fit_quality, details=details)

    @classmethod
    def logarithmic(cls, n_plus_1, fit_quality=0.0, **details):
        return cls("logarithmic", n_plus_1=int(n_plus_1), fit_quality=fit_quality, details=details)

    def as_dict(self):
        d = {"branch": self.branch, "fit_quality": self.fit_quality}
        if self.branch == "power":
            d["beta"] = self.beta
            d["C"] = self.c
        else:
            d["n_plus_1"] = self.n_plus_1
        d.update(self.details)
        return d


@dataclass(frozen=True, eq=False)
class RadialProfile:
    radii: np.ndarray
    w_values: np.ndarray
    w_spread: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        w = np.asarray(self.w_values, dtype=float)
        s = np.asarray(self.w_spread, dtype=float)
        if not (r.ndim == 1 and r.shape == w.shape == s.shape):
            raise ValueError("radii, w_values and w_spread must be 1-d of equal length")
        if r.size and (np.any(r <= 0) or np.any(np.diff(r) >= 0)):
            raise ValueError("radii must be positive and strictly decreasing")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("w_values must be finite and positive")
        for name, a in (("radii", r), ("w_values", w), ("w_spread", s)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def scaled(self, factor):
        return RadialProfile(self.radii, self.w_values * factor, self.w_spread)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["r", "w_mean", "w_spread"])
            for row in zip(self.radii, self.w_values, self.w_spread):
                wr.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["r", "w_mean", "w_spread"]:
            raise ValueError("profile CSV must start with header r,w_mean,w_spread")
        try:
            data = np.array([[float(c) for c in row] for row in rows[1:] if row], dtype=float)
        except ValueError as exc:
            raise ValueError(f"malformed profile CSV: {exc}") from None
        if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] < 3:
            raise ValueError("profile CSV needs at least 3 rows of 3 columns")
        return cls(data[:, 0], data[:, 1], data[:, 2])


def dyadic_radii(r_min, r_max):
    """``r_max, r_max/2, ...`` down to ``r_min`` (appended if not hit)."""
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    k = int(math.floor(math.log2(r_max / r_min) + 1e-9))
    radii = r_max * 2.0 ** -np.arange(k + 1)
    if radii[-1] / r_min > 1 + 1e-9:
        radii = np.append(radii, r_min)
    return radii


def extract_profile(source, radii=None, n_angles=N_PROFILE_ANGLES) -> RadialProfile:
    """Angular geometric mean and max/min spread of w on circles about the centre.

    ``source`` is a ScalarField holding w, or a closed-form metric (anything
    with ``w(z)`` and ``domain``).  Field values are interpolated linearly in
    t = log r between grid rows, in log space.
    """
    if hasattr(source, "grid") and hasattr(source, "values"):
        return _profile_from_field(source, radii)
    if radii is None:
        radii = dyadic_radii(*source.profile_range)
    radii = np.asarray(radii, dtype=float)
    th = 2.0 * np.pi * np.arange(n_angles) / n_angles
    z = source.domain.center + radii[:, None] * np.exp(1j * th)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.asarray(source.w(z), dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("radius out of range: metric is not positive on a requested circle")
    logw = np.log(w)
    return RadialProfile(radii, np.exp(logw.mean(axis=1)), w.max(axis=1) / w.min(axis=1))


def _profile_from_field(w_field, radii):
    g = w_field.grid
    if radii is None:
        radii = dyadic_radii(g.r_in, g.r_out)
    radii = np.asarray(radii, dtype=float)
    t = np.log(radii)
    lo, hi = g.t[0], g.t[-1]
    eps = 1e-12 * max(1.0, abs(lo), abs(hi))
    if np.any(t < lo - eps) or np.any(t > hi + eps):
        raise GridError("radius out of range of the grid")
    w = w_field.values
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("w must be finite and positive on the whole grid")
    logw = np.log(w)
    pos = np.clip((t - lo) / g.ht, 0.0, g.n_radial - 1)
    i0 = np.minimum(np.floor(pos).astype(int), g.n_radial - 2)
    frac = (pos - i0)[:, None]
    rows = (1.0 - frac) * logw[i0] + frac * logw[i0 + 1]
    wv = np.exp(rows)
    return RadialProfile(radii, np.exp(rows.mean(axis=1)), wv.max(axis=1) / wv.min(axis=1))


def fitting_window(radii):
    """Indices of the innermost window of ``radii``.

    The window is the innermost third of the decades spanned, grown to
    MIN_WINDOW_DECADES (or the whole profile, if shorter).  Below about three
    decades a log(-log r) correction cannot be told apart from a bounded
    factor, so narrower windows would make the logarithmic branch swallow
    genuine power laws.
    """
    r = np.asarray(radii)
    logs = np.log10(r)
    span = logs.max() - logs.min()
    width = max(WINDOW_FRACTION * span, min(MIN_WINDOW_DECADES, span))
    idx = np.flatnonzero(logs <= logs.min() + width + 1e-12)
    if idx.size < MIN_WINDOW_POINTS:
        idx = np.argsort(r)[:MIN_WINDOW_POINTS]
    return np.sort(idx)


def _fit_power(x, s):
    beta, b = np.polyfit(x, s, 1)
    dev = float(np.max(np.abs(s - (beta * x + b))))
    return float(beta), float(b), dev


def _fit_log_fixed(x, s, m):
    y = s - m * x - np.log(-x)
    b = 0.5 * (y.max() + y.min())  # minimax constant
    return float(b), float(np.max(np.abs(y - b)))


def classify(profile: RadialProfile, n: int | None = None, tol_beta: float = TOL_BETA,
             fit_threshold: float = FIT_THRESHOLD,
             log_factor_allowance: float = LOG_FACTOR_ALLOWANCE) -> Classification:
    """Sort a profile into the power or logarithmic branch.

    With ``n`` given the logarithmic exponent is fixed to ``n+1``, power fits
    with ``beta >= n+1 - tol_beta`` are rejected, and ties go to the
    logarithmic branch.  Raises InconclusiveClassification when neither model
    fits within ``fit_threshold``.
    """
    if len(profile.radii) < 3:
        raise ValueError("need at least 3 profile points")
    idx = fitting_window(profile.radii)
    x = np.log(profile.radii[idx])
    s = np.log(profile.w_values[idx])
    window = [float(profile.radii[idx].max()), float(profile.radii[idx].min())]

    beta, b, dev_p = _fit_power(x, s)
    power_ok = n is None or beta < (n + 1) - tol_beta

    log_ok = bool(np.all(x < 0))
    m = None
    dev_l = math.inf
    b_l = None
    if log_ok:
        if n is not None:
            m = n + 1
            b_l, dev_l = _fit_log_fixed(x, s, m)
        else:
            slope = np.polyfit(x, s - np.log(-x), 1)[0]
            for cand in {math.floor(slope), math.ceil(slope)}:
                bc, dc = _fit_log_fixed(x, s, cand)
                if dc < dev_l:
                    m, b_l, dev_l = cand, bc, dc

    eff_l = max(0.0, dev_l - log_factor_allowance) if n is not None else dev_l
    report = {
        "window": window,
        "power_fit": {"beta": beta, "C": math.exp(b), "max_deviation": dev_p, "admissible": power_ok},
        "log_fit": None if m is None else {"n_plus_1": m, "max_deviation": dev_l,
                                           "effective_deviation": eff_l},
        "note": LIMITATION,
    }

    if n is not None:
        pick_log = log_ok and (not power_ok or eff_l <= dev_p)
    else:
        pick_log = log_ok and eff_l + FIT_EPS < dev_p

    if pick_log and eff_l <= fit_threshold:
        return Classification.logarithmic(m, fit_quality=dev_l, window=window, note=LIMITATION)
    if not pick_log and power_ok and dev_p <= fit_threshold:
        return Classification.power(beta, math.exp(b), fit_quality=dev_p, window=window)
    raise InconclusiveClassification(
        "neither the power nor the logarithmic model fits the innermost window", report)


def estimate_order(source, radii=None, tol: float = 0.2) -> int:
    """Order of the cubic form at 0 from the slope of log max|Xi_0| against log r.

    ``source`` is a CubicFormField (uses its grid rows) or a harmonic spec
    (evaluated exactly on ``radii``, default one decade below 1e-3).  The
    rounded order is then checked with the curvature sandwich.
    """
    from .sk_verify import curvature_sandwich  # local: sk_verify imports this module

    if hasattr(source, "xi0") and hasattr(source.xi0, "grid"):
        g = source.xi0.grid
        mag = np.abs(source.xi0.values).max(axis=1)
        r = g.r
        spec = getattr(source, "h_spec", None)
    else:
        spec = source
        r = dyadic_radii(1e-4, 1e-3) if radii is None else np.asarray(radii, dtype=float)
        th = 2.0 * np.pi * np.arange(256) / 256
        mag = np.abs(spec.xi0(r[:, None] * np.exp(1j * th)[None, :])).max(axis=1)
        g = None
    sel = r <= r.min() * 10.0 * (1 + 1e-12)
    if sel.sum() < 2:
        sel = np.argsort(r)[:2]
    if np.any(mag[sel] <= 0) or np.any(~np.isfinite(mag[sel])):
        raise OrderMismatchError("Xi_0 vanishes on the innermost decade; order undefined")
    slope = np.polyfit(np.log(r[sel]), np.log(mag[sel]), 1)[0]
    n = int(round(slope))
    if abs(slope - n) > tol:
        raise OrderMismatchError(
            f"slope {slope:.3f} of log|Xi_0| is not near an integer; data may have an "
            "essential singularity or be contaminated")
    if spec is not None:
        if g is None:
            from .field_core import AnnulusGrid
            g = AnnulusGrid(float(np.min(r)), float(np.max(r)), 16, 64)
        curvature_sandwich(spec, n, g)
    return n
