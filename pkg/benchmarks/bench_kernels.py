"""Compare the numba and numpy stencil kernels.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256 512] [--repeat 20] [--json out.json]

Both backends are imported from the same module (``*_nb`` and ``*_np``), so
one process times both; results are checked for agreement before timing.
"""

import argparse
import json
import platform
import timeit

import numpy as np

from sklab import _kernels


def _inputs(n):
    rng = np.random.default_rng(n)
    f, q = rng.standard_normal((2, n, n))
    th = 2 * np.pi * np.arange(n) / n
    ht, hth = np.log(10.0) / (n - 1), 2 * np.pi / n
    inv_r = np.exp(-np.linspace(np.log(0.05), np.log(0.5), n))
    return f, q, (ht, hth, inv_r, np.cos(th), np.sin(th))


def _kernels_for(suffix, f, q, args):
    ht, hth = args[:2]
    return {
        "laplacian_o2": lambda: getattr(_kernels, "logpolar_laplacian" + suffix)(f, ht, hth, 2),
        "laplacian_o4": lambda: getattr(_kernels, "logpolar_laplacian" + suffix)(f, ht, hth, 4),
        "gradient": lambda: getattr(_kernels, "gradient" + suffix)(f, *args),
        "curl": lambda: getattr(_kernels, "curl" + suffix)(f, q, *args),
    }


def _agree(a, b):
    a, b = np.atleast_3d(np.asarray(a)), np.atleast_3d(np.asarray(b))
    ok = np.isfinite(a)
    scale = np.abs(a[ok]).max()
    return np.array_equal(ok, np.isfinite(b)) and np.allclose(a[ok], b[ok], rtol=0, atol=1e-13 * scale)


def run(sizes, repeat):
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = []
    for n in sizes:
        f, q, args = _inputs(n)
        fast, slow = _kernels_for("_nb", f, q, args), _kernels_for("_np", f, q, args)
        for name in fast:
            fast[name]()  # compile outside the timed region
            if not _agree(fast[name](), slow[name]()):
                raise SystemExit(f"backends disagree on {name} at n={n}")
            t_nb = min(timeit.repeat(fast[name], number=1, repeat=repeat))
            t_np = min(timeit.repeat(slow[name], number=1, repeat=repeat))
            rows.append({"kernel": name, "n": n, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json")
    args = ap.parse_args()
    rows = run(args.sizes, args.repeat)
    print(f"{'kernel':<14}{'n':>6}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<14}{r['n']:>6}{1e3 * r['numba_s']:>12.3f}{1e3 * r['numpy_s']:>12.3f}{r['speedup']:>10.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"python": platform.python_version(), "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
