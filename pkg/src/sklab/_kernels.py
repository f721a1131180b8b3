"""Stencil kernels on (t, theta) tensor grids, with a numba and a numpy path.

Arrays are indexed ``[i_radial, i_angular]``; the angular axis is periodic.
Rows whose stencil would leave the grid are filled with NaN so that invalid
values cannot silently enter a residual norm.

The backend is chosen once at import time from ``SKLAB_BACKEND``
(``numba`` or ``numpy``, default ``numba``).  If numba cannot be imported the
numpy path is used regardless.
"""

import os

import numpy as np

_requested = os.environ.get("SKLAB_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"SKLAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

BACKEND = "numba" if (_requested == "numba" and HAS_NUMBA) else "numpy"


# --------------------------------------------------------------------------
# numpy path
# --------------------------------------------------------------------------

def _d_theta_np(f, hth):
    return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * hth)


def _d_t_np(f, ht):
    out = np.full_like(f, np.nan)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * ht)
    return out


def logpolar_laplacian_np(f, ht, hth, order):
    """u_tt + u_thth; multiply by r**-2 for the Cartesian Laplacian."""
    out = np.full_like(f, np.nan)
    if order == 2:
        f_tt = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / ht**2
        g = f[1:-1]
        f_aa = (np.roll(g, -1, axis=1) - 2.0 * g + np.roll(g, 1, axis=1)) / hth**2
        out[1:-1] = f_tt + f_aa
    elif order == 4:
        f_tt = (-f[4:] + 16.0 * f[3:-1] - 30.0 * f[2:-2] + 16.0 * f[1:-3] - f[:-4]) / (12.0 * ht**2)
        g = f[2:-2]
        f_aa = (
            -np.roll(g, -2, axis=1) + 16.0 * np.roll(g, -1, axis=1) - 30.0 * g
            + 16.0 * np.roll(g, 1, axis=1) - np.roll(g, 2, axis=1)
        ) / (12.0 * hth**2)
        out[2:-2] = f_tt + f_aa
    else:
        raise ValueError("order must be 2 or 4")
    return out


def gradient_np(f, ht, hth, inv_r, cos_th, sin_th):
    f_t = _d_t_np(f, ht)
    f_a = _d_theta_np(f, hth)
    ir = inv_r[:, None]
    p = ir * (cos_th[None, :] * f_t - sin_th[None, :] * f_a)
    q = ir * (sin_th[None, :] * f_t + cos_th[None, :] * f_a)
    return p, q


def curl_np(p, q, ht, hth, inv_r, cos_th, sin_th):
    """Coefficient of d(p dx + q dy), i.e. dq/dx - dp/dy."""
    c = cos_th[None, :]
    s = sin_th[None, :]
    q_t, q_a = _d_t_np(q, ht), _d_theta_np(q, hth)
    p_t, p_a = _d_t_np(p, ht), _d_theta_np(p, hth)
    return inv_r[:, None] * (c * q_t - s * q_a - s * p_t - c * p_a)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def logpolar_laplacian_nb(f, ht, hth, order):
        nr, na = f.shape
        out = np.empty_like(f)
        out[:, :] = np.nan
        it2 = 1.0 / (ht * ht)
        ia2 = 1.0 / (hth * hth)
        if order == 2:
            for i in range(1, nr - 1):
                for j in range(na):
                    jm = (j - 1) % na
                    jp = (j + 1) % na
                    out[i, j] = (f[i + 1, j] - 2.0 * f[i, j] + f[i - 1, j]) * it2 + (
                        f[i, jp] - 2.0 * f[i, j] + f[i, jm]
                    ) * ia2
        else:
            it2 /= 12.0
            ia2 /= 12.0
            for i in range(2, nr - 2):
                for j in range(na):
                    jm = (j - 1) % na
                    jp = (j + 1) % na
                    jmm = (j - 2) % na
                    jpp = (j + 2) % na
                    out[i, j] = (
                        -f[i + 2, j] + 16.0 * f[i + 1, j] - 30.0 * f[i, j]
                        + 16.0 * f[i - 1, j] - f[i - 2, j]
                    ) * it2 + (
                        -f[i, jpp] + 16.0 * f[i, jp] - 30.0 * f[i, j]
                        + 16.0 * f[i, jm] - f[i, jmm]
                    ) * ia2
        return out

    @njit(cache=True)
    def gradient_nb(f, ht, hth, inv_r, cos_th, sin_th):
        nr, na = f.shape
        p = np.empty_like(f)
        q = np.empty_like(f)
        p[:, :] = np.nan
        q[:, :] = np.nan
        for i in range(1, nr - 1):
            for j in range(na):
                f_t = (f[i + 1, j] - f[i - 1, j]) / (2.0 * ht)
                f_a = (f[i, (j + 1) % na] - f[i, (j - 1) % na]) / (2.0 * hth)
                p[i, j] = inv_r[i] * (cos_th[j] * f_t - sin_th[j] * f_a)
                q[i, j] = inv_r[i] * (sin_th[j] * f_t + cos_th[j] * f_a)
        return p, q

    @njit(cache=True)
    def curl_nb(p, q, ht, hth, inv_r, cos_th, sin_th):
        nr, na = p.shape
        out = np.empty_like(p)
        out[:, :] = np.nan
        for i in range(1, nr - 1):
            for j in range(na):
                jp = (j + 1) % na
                jm = (j - 1) % na
                q_t = (q[i + 1, j] - q[i - 1, j]) / (2.0 * ht)
                p_t = (p[i + 1, j] - p[i - 1, j]) / (2.0 * ht)
                q_a = (q[i, jp] - q[i, jm]) / (2.0 * hth)
                p_a = (p[i, jp] - p[i, jm]) / (2.0 * hth)
                c = cos_th[j]
                s = sin_th[j]
                out[i, j] = inv_r[i] * (c * q_t - s * q_a - s * p_t - c * p_a)
        return out


def _pick(name):
    if BACKEND == "numba":
        return globals()[name + "_nb"]
    return globals()[name + "_np"]


logpolar_laplacian = _pick("logpolar_laplacian")
gradient = _pick("gradient")
curl = _pick("curl")
