"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--rows 200000] [--repeat 5]

Both backends run on the same data; the script also reports the largest
absolute difference between their outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from nldid import _kernels


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _data(rows, seed):
    rng = np.random.default_rng(seed)
    q = 7
    x = np.column_stack([np.ones(rows), rng.integers(0, 2, (rows, q - 1)).astype(float)])
    xw = x * rng.integers(0, 2, rows)[:, None]
    g = rng.integers(0, 2, rows).astype(float)
    t = rng.integers(0, 2, rows).astype(float)
    X = np.column_stack([g, t, xw * (g * t)[:, None], x])
    kappa = rng.normal(0.0, 0.3, X.shape[1])
    y = (X @ kappa + rng.normal(size=rows) > 0).astype(float)
    a = rng.normal(size=(X.shape[1], X.shape[1]))
    V = a @ a.T / X.shape[1]
    return X, y, kappa, x, xw, V


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    X, y, kappa, x, xw, V = _data(args.rows, args.seed)

    # warm-up compiles the jitted kernels
    _kernels._probit_nb(X[:10], y[:10], kappa, _kernels.BLOCK)
    _kernels._effects_nb(kappa, x[:10], xw[:10], V)

    cases = [
        (
            "probit score/information",
            lambda: _kernels._probit_nb(X, y, kappa, _kernels.BLOCK),
            lambda: _kernels.probit_numpy(X, y, kappa),
        ),
        (
            "effects + delta se",
            lambda: _kernels._effects_nb(kappa, x, xw, V),
            lambda: _kernels.effects_numpy(kappa, x, xw, V),
        ),
    ]
    print(f"rows={args.rows} repeat={args.repeat} (best of)")
    print(f"{'kernel':<26}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'max |diff|':>12}")
    for name, nb, npf in cases:
        t_nb, out_nb = _best(nb, args.repeat)
        t_np, out_np = _best(npf, args.repeat)
        diff = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in zip(out_nb, out_np))
        print(f"{name:<26}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>9.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
