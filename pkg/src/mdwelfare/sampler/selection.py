"""Hold-out selection of the number of mixture components.

Each continuous margin is fitted on its own (the copula term is left out)
for K = 1..max_k on a training split.  The posterior-mean CDF is compared
with the weighted empirical CDF of the hold-out records by mean absolute
error.  The records are cut into ``round(1 / holdout_fraction)`` folds and
every fold serves once as the hold-out set.  By default the smallest K whose
mean error is within one standard error of the best K is chosen.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .types import ChainConfig, PriorConfig, WeightedSample
from .updates import (
    ChainState,
    _beta_comp_cdf,
    _gamma_comp_cdf,
    _initial_mixture,
    _update_mixture,
    bootstrap_indices,
)

__all__ = ["SelectionResult", "fit_margin", "holdout_mae", "select_num_components"]

MIN_SPLIT = 50
SELECTION_CHAIN = ChainConfig(iterations=800, burn_in=300, thin=5, seed=0)
RULES = ("one_se", "argmin")


@dataclass(frozen=True)
class SelectionResult:
    """Chosen counts and, per K, the fold-averaged hold-out MAE and its standard error."""

    k_g: int
    k_b: int
    mae_income: tuple
    mae_health: tuple
    se_income: tuple = ()
    se_health: tuple = ()


def fit_margin(values, weights, k: int, kind: str, config: ChainConfig,
               priors: PriorConfig | None = None) -> np.ndarray:
    """Posterior draws ``(M, 3k)`` of a single mixture margin.

    Columns are weights, then means (gamma) or precisions (beta), then
    shapes (gamma) or means (beta), matching the margin constructors.
    """
    if kind not in ("gamma", "beta"):
        raise ParameterError(f"unknown margin kind {kind!r}")
    priors = priors or PriorConfig()
    y = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    rng = np.random.default_rng(config.seed)
    w0, loc, spread = _initial_mixture(y, k, kind, w)
    if kind == "gamma":
        st = ChainState(w0, loc, spread, np.ones(1), np.ones(1) * 2, np.full(1, 0.5),
                        [np.zeros(1), np.zeros(1)], np.eye(4), priors, np.zeros((y.size, 2)))
        which = "income"
    else:
        st = ChainState(np.ones(1), np.ones(1), np.ones(1), w0, spread, loc,
                        [np.zeros(1), np.zeros(1)], np.eye(4), priors, np.zeros((y.size, 2)))
        which = "health"
    zero = np.zeros((4, 4))
    out = []
    all_idx = np.arange(y.size)
    for t in range(config.iterations):
        st.adapting = t < config.adapt_until
        idx = bootstrap_indices(w, rng) if config.bootstrap else all_idx
        uniq, st.inv = np.unique(idx, return_inverse=True)
        yy = y[idx]
        st.z = np.zeros((idx.size, 4))
        if kind == "gamma":
            st.y1, st.logy1, st.y1u = yy, np.log(yy), y[uniq]
            st.cdf1 = _gamma_comp_cdf(st.y1u, st.inc_mu, st.inc_nu)[st.inv]
        else:
            st.y2, st.y2u = yy, y[uniq]
            st.y1 = yy
            st.cdf2 = _beta_comp_cdf(st.y2u, st.hl_s, st.hl_m)[st.inv]
        _update_mixture(st, which, zero, rng)
        if t >= config.burn_in and (t - config.burn_in) % config.thin == 0:
            if kind == "gamma":
                out.append(np.concatenate((st.inc_w, st.inc_mu, st.inc_nu)))
            else:
                out.append(np.concatenate((st.hl_w, st.hl_s, st.hl_m)))
    return np.array(out)


def _posterior_mean_cdf(draws: np.ndarray, k: int, kind: str, y: np.ndarray) -> np.ndarray:
    total = np.zeros(y.size)
    for row in draws:
        w, p1, p2 = row[:k], row[k:2 * k], row[2 * k:]
        comp = _gamma_comp_cdf(y, p1, p2) if kind == "gamma" else _beta_comp_cdf(y, p1, p2)
        total += comp @ w
    return total / len(draws)


def _weighted_ecdf(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    order = np.argsort(y, kind="stable")
    ys = y[order]
    cw = np.cumsum(w[order]) / w.sum()
    pos = np.searchsorted(ys, y, side="right") - 1
    return cw[pos]


def holdout_mae(model_cdf: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Weighted mean absolute gap between a model CDF and the empirical CDF."""
    ecdf = _weighted_ecdf(y, w)
    return float(np.average(np.abs(model_cdf - ecdf), weights=w))


def _choose(mae, se, rule: str, tie_tol: float) -> int:
    mae = np.asarray(mae, dtype=float)
    best = int(np.argmin(mae))
    if rule == "one_se":
        limit = mae[best] + se[best]
    else:
        limit = mae[best] * (1.0 + tie_tol)
    return int(np.flatnonzero(mae <= limit)[0]) + 1


def select_num_components(sample: WeightedSample, max_k: int = 4, holdout_fraction: float = 0.2,
                          seed: int = 0, config: ChainConfig | None = None,
                          priors: PriorConfig | None = None, tie_tol: float = 0.0,
                          margins: tuple = ("income", "health"), rule: str = "one_se") -> SelectionResult:
    """Choose ``(K_G, K_B)`` by cross-validated hold-out mean absolute CDF error.

    ``rule="one_se"`` picks the smallest K whose mean error is within one
    standard error (across folds) of the minimum.  ``rule="argmin"`` picks
    the minimum, with ``tie_tol`` a relative tolerance under which the
    smaller K wins.  Margins not listed in ``margins`` are reported as
    K = 1 without fitting.
    """
    if max_k < 1:
        raise ParameterError("max_k must be at least 1")
    if not 0 < holdout_fraction < 1:
        raise ParameterError("hold-out fraction must lie in (0, 1)")
    if rule not in RULES:
        raise ParameterError(f"selection rule must be one of {RULES}")
    n = len(sample)
    n_folds = max(2, int(round(1.0 / holdout_fraction)))
    rng = np.random.default_rng(seed)
    folds = np.array_split(rng.permutation(n), n_folds)
    if min(len(f) for f in folds) < MIN_SPLIT:
        raise ParameterError(f"a fold holds fewer than {MIN_SPLIT} records")
    splits = []
    for f in range(n_folds):
        hold = folds[f]
        train = np.concatenate([folds[g] for g in range(n_folds) if g != f])
        if sample.weights[train].sum() <= 0 or sample.weights[hold].sum() <= 0:
            raise ParameterError("a split has zero total weight")
        splits.append((train, hold))
    base = config or SELECTION_CHAIN
    chosen, maes, ses = {}, {}, {}
    for name, kind, col in (("income", "gamma", sample.income), ("health", "beta", sample.health)):
        if name not in margins:
            chosen[name], maes[name], ses[name] = 1, (), ()
            continue
        errs = np.empty((n_folds, max_k))
        for f, (train, hold) in enumerate(splits):
            w_tr, w_ho = sample.weights[train], sample.weights[hold]
            for k in range(1, max_k + 1):
                cfg = ChainConfig(base.iterations, base.burn_in, base.thin, base.adaptation_window,
                                  seed=int(rng.integers(2**32)), bootstrap=base.bootstrap)
                draws = fit_margin(col[train], w_tr, k, kind, cfg, priors)
                errs[f, k - 1] = holdout_mae(_posterior_mean_cdf(draws, k, kind, col[hold]), col[hold], w_ho)
        mean = errs.mean(axis=0)
        se = errs.std(axis=0, ddof=1) / np.sqrt(n_folds)
        chosen[name] = _choose(mean, se, rule, tie_tol)
        maes[name], ses[name] = tuple(mean.tolist()), tuple(se.tolist())
    return SelectionResult(chosen["income"], chosen["health"], maes["income"], maes["health"],
                           ses["income"], ses["health"])
