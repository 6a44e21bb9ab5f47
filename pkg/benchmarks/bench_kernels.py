"""Compare the compiled and pure-Python numerical kernels.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  Each kernel
is timed on inputs of the size used by the dominance and CDF code, and the
two backends are checked to agree.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from mdwelfare import kernels
from mdwelfare.dominance import ModelGrid, build_default_grid
from mdwelfare.harness import make_scenario


def _cases():
    rng = np.random.default_rng(0)
    h, k = rng.normal(size=(2, 99 * 99))
    yield "bvn_cdf (9801 points)", lambda be: be.bvn_cdf(h, k, 0.45)

    g = np.array(make_scenario("identical").model_a.correlation.matrix)
    chol = np.linalg.cholesky(g)
    b = np.array([0.3, -0.2, 0.8, 0.1])
    shifts = rng.random((10, 3))
    alpha = np.sqrt(np.array([2.0, 3.0, 5.0])) % 1.0
    yield "mvn_qmc (d=4, 2^12 points x 10 shifts)", lambda be: be.mvn_qmc(b, chol, 4096, shifts, alpha)

    mg = ModelGrid(make_scenario("identical").model_a, build_default_grid())
    fin1, fin2, n1, cell1, n2, cell2, weights, (coef, s3, s4, rho), _ = mg._layout()
    k1, k2 = int(fin1.sum()), int(fin2.sum())
    c3, c4 = coef[0].copy(), coef[1].copy()
    t3, t4 = 0.2, -0.4
    yield (f"grid_cell_integrals ({n1.size}x{n2.size} nodes)",
           lambda be: be.grid_cell_integrals(n1, cell1, n2, cell2, weights, k1, k2,
                                             c3, c4, s3, s4, rho, t3, t4))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    py = kernels.python_backend
    cy = kernels.compiled_backend
    if cy is None:
        print("compiled kernels not available; timing the Python backend only")
    print(f"{'kernel':48s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, fn in _cases():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:48s} {t_py:12.2f}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        diff = float(np.max(np.abs(np.asarray(fn(py)) - np.asarray(fn(cy)))))
        print(f"{name:48s} {t_py:12.2f} {t_cy:12.2f} {t_py / t_cy:9.1f} {diff:11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
