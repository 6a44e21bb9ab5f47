"""C-vine partial-correlation parameterisation of correlation matrices.

A ``d x d`` correlation matrix corresponds one-to-one to ``d(d-1)/2``
partial correlations in (-1, 1); any such vector maps to a valid
positive-definite matrix, so random-walk proposals on ``atanh`` of the
partials never leave the space of correlation matrices.
"""
from __future__ import annotations

import numpy as np

__all__ = ["vine_pairs", "partials_to_corr", "corr_to_partials", "log_lkj_prior"]


def vine_pairs(d: int) -> list[tuple[int, int]]:
    """Order of the free parameters: level ``k`` pairs ``(k, i)`` for ``i > k``."""
    return [(k, i) for k in range(d - 1) for i in range(k + 1, d)]


def partials_to_corr(p, d: int) -> np.ndarray:
    pc = np.zeros((d, d))
    for (k, i), v in zip(vine_pairs(d), np.asarray(p, dtype=float)):
        pc[k, i] = v
    g = np.eye(d)
    for k in range(d - 1):
        for i in range(k + 1, d):
            r = pc[k, i]
            for m in range(k - 1, -1, -1):
                r = r * np.sqrt((1.0 - pc[m, i] ** 2) * (1.0 - pc[m, k] ** 2)) + pc[m, i] * pc[m, k]
            g[k, i] = g[i, k] = r
    return g


def corr_to_partials(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    out = []
    for k, i in vine_pairs(d):
        idx = list(range(k)) + [k, i]
        prec = np.linalg.inv(g[np.ix_(idx, idx)])
        out.append(-prec[-2, -1] / np.sqrt(prec[-2, -2] * prec[-1, -1]))
    return np.array(out)


def log_lkj_prior(p, d: int, eta: float = 1.0) -> float:
    """LKJ(eta) log density expressed in the partial correlations (up to a constant).

    Level-``k`` partials are independent Beta(b_k, b_k) on (-1, 1) with
    ``b_k = eta + (d - 2 - k) / 2``.
    """
    p = np.asarray(p, dtype=float)
    levels = np.array([k for k, _ in vine_pairs(d)])
    expo = eta - 1.0 + (d - 2 - levels) / 2.0
    return float(np.sum(expo * np.log1p(-p * p)))
