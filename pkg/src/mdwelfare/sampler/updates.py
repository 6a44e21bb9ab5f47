"""Metropolis-within-Gibbs updates for the copula model.

The chain state keeps the raw parameter arrays together with the latent
normal scores of the current pseudo-sample.  Continuous scores are
deterministic functions of the data and the margin parameters; ordinal
scores are augmented latents drawn from truncated normal conditionals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..copula import LATENT_CLAMP, CorrelationMatrix, JointModel
from ..errors import NumericError, ParameterError
from ..margins import BetaMixture, GammaMixture, OrdinalModel
from .types import PriorConfig, WeightedSample
from .vine import corr_to_partials, log_lkj_prior, partials_to_corr

__all__ = [
    "ChainState",
    "bootstrap_indices",
    "bootstrap_pseudo_sample",
    "initial_state",
    "load_pseudo_sample",
    "update_margins",
    "update_latents",
    "update_correlation",
    "conditional_moments",
    "truncated_normal",
    "log_posterior",
]

TARGET_BLOCK = 0.234
TARGET_SCALAR = 0.44
_MIN_EIG = 1e-8
_MIN_HISTORY = 100


def bootstrap_indices(weights, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Indices drawn with probabilities proportional to ``w_i * g_i``, ``g_i ~ Exp(1)``."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        return np.zeros(0, dtype=np.int64)
    if np.any(w < 0) or not np.any(w > 0):
        raise ParameterError("bootstrap needs nonnegative weights with a positive total")
    g = w * rng.standard_exponential(w.size)
    p = g / g.sum()
    # inverse-CDF sampling keeps zero-probability records out exactly
    cum = np.cumsum(p)
    cum[-1] = 1.0
    u = rng.random(w.size if size is None else size)
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, w.size - 1)


def bootstrap_pseudo_sample(sample: WeightedSample, rng: np.random.Generator) -> WeightedSample:
    """Weighted Bayesian-bootstrap resample of size n with unit weights."""
    idx = bootstrap_indices(sample.weights, rng)
    return sample.subset(idx).with_unit_weights()


def truncated_normal(mean, sd, lower, upper, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from ``N(mean, sd^2)`` truncated to ``[lower, upper]``.

    Works in log space and reflects intervals lying in the upper tail so
    that far-tail intervals stay accurate.
    """
    mean = np.asarray(mean, dtype=float)
    a = (np.asarray(lower, dtype=float) - mean) / sd
    b = (np.asarray(upper, dtype=float) - mean) / sd
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    la = special.log_ndtr(lo)
    lb = special.log_ndtr(hi)
    u = rng.random(np.shape(mean))
    with np.errstate(divide="ignore"):
        logu = np.logaddexp(la + np.log1p(-u), lb + np.log(u))
    x = special.ndtri_exp(np.minimum(logu, 0.0))
    x = np.clip(x, lo, hi)
    x = np.where(flip, -x, x)
    return mean + sd * x


def _log_interval(a, b):
    """``log(Phi(b) - Phi(a))`` for ``a < b``, stable in both tails."""
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    la = special.log_ndtr(lo)
    lb = special.log_ndtr(hi)
    with np.errstate(divide="ignore"):
        return lb + np.log(-np.expm1(la - lb))


def conditional_moments(z: np.ndarray, prec: np.ndarray, j: int):
    """Mean and sd of coordinate ``j`` given the others under ``N(0, prec^-1)``."""
    pjj = prec[j, j]
    others = np.delete(np.arange(prec.shape[0]), j)
    mean = -(z[:, others] @ prec[others, j]) / pjj
    return mean, 1.0 / np.sqrt(pjj)


def _scores(u: np.ndarray) -> tuple[np.ndarray, int]:
    z = special.ndtri(u)
    hit = ~(np.abs(z) <= LATENT_CLAMP)
    if np.any(hit):
        z = np.clip(np.nan_to_num(z, nan=0.0, posinf=LATENT_CLAMP, neginf=-LATENT_CLAMP),
                    -LATENT_CLAMP, LATENT_CLAMP)
    return z, int(np.count_nonzero(hit))


@dataclass
class _Adapt:
    """Robbins-Monro adaptation of a log proposal scale."""

    log_scale: float
    target: float
    n_prop: int = 0
    n_acc: int = 0
    n_prop_kept: int = 0
    n_acc_kept: int = 0

    @property
    def scale(self) -> float:
        return float(np.exp(self.log_scale))

    def record(self, accept_prob: float, accepted: bool, adapting: bool) -> None:
        self.n_prop += 1
        self.n_acc += int(accepted)
        if adapting:
            self.log_scale += (accept_prob - self.target) / (self.n_prop ** 0.6)
        else:
            self.n_prop_kept += 1
            self.n_acc_kept += int(accepted)

    def rate(self) -> float:
        if self.n_prop_kept:
            return self.n_acc_kept / self.n_prop_kept
        return self.n_acc / self.n_prop if self.n_prop else float("nan")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class _Moments:
    """Running mean and covariance (Welford) of a block's transformed parameters."""

    n: int = 0
    mean: list = None
    m2: list = None

    def add(self, x: np.ndarray) -> None:
        if self.mean is None:
            self.mean = np.zeros(x.size).tolist()
            self.m2 = np.zeros((x.size, x.size)).tolist()
        mean, m2 = np.asarray(self.mean), np.asarray(self.m2)
        self.n += 1
        d = x - mean
        mean = mean + d / self.n
        m2 = m2 + np.outer(d, x - mean)
        self.mean, self.m2 = mean.tolist(), m2.tolist()

    def chol(self, dim: int) -> np.ndarray:
        """Cholesky factor of the proposal shape; a small identity until enough history."""
        base = 0.01 * np.eye(dim)
        if self.n < _MIN_HISTORY or self.mean is None or len(self.mean) != dim:
            return np.linalg.cholesky(base)
        cov = np.asarray(self.m2) / (self.n - 1)
        return np.linalg.cholesky((2.38 ** 2 / dim) * cov + 1e-6 * base)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ChainState:
    """Mutable sampler state.  Attribute order: income, health, education, happiness."""

    inc_w: np.ndarray
    inc_mu: np.ndarray
    inc_nu: np.ndarray
    hl_w: np.ndarray
    hl_s: np.ndarray
    hl_m: np.ndarray
    tau: list
    gamma: np.ndarray
    priors: PriorConfig
    # latent ordinal scores for every source record, carried across resamples
    source_latent: np.ndarray
    adapt: dict = field(default_factory=dict)
    moments: dict = field(default_factory=dict)
    adapting: bool = True
    clamps: int = 0
    # current pseudo-sample
    idx: np.ndarray = None
    y1: np.ndarray = None
    logy1: np.ndarray = None
    y2: np.ndarray = None
    c: list = None
    z: np.ndarray = None
    cdf1: np.ndarray = None
    cdf2: np.ndarray = None
    lab1: np.ndarray = None
    lab2: np.ndarray = None
    # distinct source records of the pseudo-sample and the expansion map
    y1u: np.ndarray = None
    y2u: np.ndarray = None
    inv: np.ndarray = None

    @property
    def k_g(self) -> int:
        return self.inc_w.size

    @property
    def k_b(self) -> int:
        return self.hl_w.size

    @property
    def n(self) -> int:
        return 0 if self.y1 is None else self.y1.size

    def scaler(self, name: str, init: float, target: float) -> _Adapt:
        if name not in self.adapt:
            self.adapt[name] = _Adapt(np.log(init), target)
        return self.adapt[name]

    def model(self) -> JointModel:
        return JointModel(
            GammaMixture(self.inc_w, self.inc_mu, self.inc_nu),
            BetaMixture(self.hl_w, self.hl_s, self.hl_m),
            OrdinalModel(self.tau[0]),
            OrdinalModel(self.tau[1]),
            CorrelationMatrix(self.gamma),
        )

    def flat(self) -> np.ndarray:
        g = self.gamma
        return np.concatenate((
            self.inc_w, self.inc_mu, self.inc_nu, self.hl_w, self.hl_s, self.hl_m,
            self.tau[0], self.tau[1], [g[i, j] for i in range(4) for j in range(i + 1, 4)],
        ))


def _gamma_comp_logpdf(logy, y, mu, nu):
    rate = nu / mu
    return nu * np.log(rate) - special.gammaln(nu) + (nu - 1.0) * logy[..., None] - rate * y[..., None]


def _beta_comp_logpdf(y, s, m):
    a, b = s * m, s * (1.0 - m)
    return (special.gammaln(s) - special.gammaln(a) - special.gammaln(b)
            + (a - 1.0) * np.log(y)[..., None] + (b - 1.0) * np.log1p(-y)[..., None])


def _gamma_comp_cdf(y, mu, nu):
    return special.gammainc(nu, (nu / mu) * y[..., None])


def _beta_comp_cdf(y, s, m):
    return special.betainc(s * m, s * (1.0 - m), y[..., None])


def _ordinal_bounds(tau, c):
    ext = np.concatenate(([-np.inf], tau, [np.inf]))
    return ext[c - 1], ext[c]


def _initial_mixture(x, k, kind, w):
    order = np.argsort(x, kind="stable")
    groups = np.array_split(order, k)
    mean, spread, wts = [], [], []
    for g in groups:
        v = x[g]
        m = float(np.average(v, weights=w[g])) if w[g].sum() > 0 else float(v.mean())
        var = float(np.average((v - m) ** 2, weights=w[g])) if w[g].sum() > 0 else float(v.var())
        var = max(var, 1e-6 * m * m if kind == "gamma" else 1e-6)
        mean.append(m)
        if kind == "gamma":
            spread.append(min(max(m * m / var, 0.1), 1e4))
        else:
            spread.append(min(max(m * (1 - m) / var - 1.0, 0.5), 1e4))
        wts.append(1.0 / k)
    mean = np.array(mean)
    if kind == "beta":
        mean = np.clip(mean, 1e-3, 1 - 1e-3)
    # separate tied starting means so the ordering is strict
    mean = mean * (1.0 + 1e-6 * np.arange(k))
    return np.array(wts), mean, np.array(spread)


def initial_state(sample: WeightedSample, k_g: int, k_b: int, priors: PriorConfig,
                  rng: np.random.Generator) -> ChainState:
    """Moment-based starting values and latent scores drawn under independence."""
    w = sample.weights
    n = len(sample)
    if n:
        inc = _initial_mixture(sample.income, k_g, "gamma", w)
        hl = _initial_mixture(sample.health, k_b, "beta", w)
    else:
        inc = (np.full(k_g, 1.0 / k_g), np.arange(1.0, k_g + 1), np.ones(k_g))
        hl = (np.full(k_b, 1.0 / k_b), np.arange(1.0, k_b + 1) / (k_b + 1), np.full(k_b, 2.0))
    tlo, thi = priors.threshold_bounds
    taus = []
    for col, l in ((sample.education, sample.n_categories[0]), (sample.happiness, sample.n_categories[1])):
        if n and w.sum() > 0:
            freq = np.bincount(col, weights=w, minlength=l + 1)[1:]
        else:
            freq = np.ones(l)
        freq = freq + 0.5
        cum = np.cumsum(freq)[:-1] / freq.sum()
        tau = np.clip(special.ndtri(cum), tlo + 0.01, thi - 0.01)
        tau = tau + 1e-6 * np.arange(tau.size)
        taus.append(tau)
    lat = np.zeros((n, 2))
    for j, col in enumerate((sample.education, sample.happiness)):
        lo, hi = _ordinal_bounds(taus[j], col)
        lat[:, j] = truncated_normal(np.zeros(n), 1.0, lo, hi, rng)
    w_g, mu, nu = inc
    w_b, m_start, s_start = hl
    return ChainState(w_g, mu, nu, w_b, s_start, m_start, taus, np.eye(4), priors, lat)


def state_from_model(model: JointModel, sample: WeightedSample, priors: PriorConfig,
                     rng: np.random.Generator) -> ChainState:
    """Chain state at a given model, with latent scores drawn given the model."""
    st = ChainState(
        np.array(model.income.weights), np.array(model.income.means), np.array(model.income.shapes),
        np.array(model.health.weights), np.array(model.health.precisions), np.array(model.health.means),
        [np.array(model.education.thresholds), np.array(model.happiness.thresholds)],
        np.array(model.correlation.matrix), priors, np.zeros((len(sample), 2)),
    )
    lat = np.zeros((len(sample), 2))
    for j, col in enumerate((sample.education, sample.happiness)):
        lo, hi = _ordinal_bounds(st.tau[j], col)
        lat[:, j] = truncated_normal(np.zeros(len(sample)), 1.0, lo, hi, rng)
    st.source_latent = lat
    return st


def load_pseudo_sample(state: ChainState, sample: WeightedSample, idx: np.ndarray | None = None) -> ChainState:
    """Point the state at the records ``sample[idx]`` (all records if ``idx`` is None).

    Ordinal latent scores are taken from the carried per-record values.
    """
    if idx is None:
        idx = np.arange(len(sample))
    state.idx = np.asarray(idx, dtype=np.int64)
    state.y1 = sample.income[state.idx]
    state.logy1 = np.log(state.y1)
    state.y2 = sample.health[state.idx]
    state.c = [sample.education[state.idx], sample.happiness[state.idx]]
    n = state.idx.size
    state.z = np.zeros((n, 4))
    state.z[:, 2:] = state.source_latent[state.idx]
    uniq, state.inv = np.unique(state.idx, return_inverse=True)
    state.y1u = sample.income[uniq]
    state.y2u = sample.health[uniq]
    state.cdf1 = _gamma_comp_cdf(state.y1u, state.inc_mu, state.inc_nu)[state.inv]
    state.cdf2 = _beta_comp_cdf(state.y2u, state.hl_s, state.hl_m)[state.inv]
    state.z[:, 0], k1 = _scores(state.cdf1 @ state.inc_w)
    state.z[:, 1], k2 = _scores(state.cdf2 @ state.hl_w)
    state.clamps += k1 + k2
    return state


def store_latents(state: ChainState) -> None:
    """Write the ordinal latents of the pseudo-sample back to their source records."""
    if state.n:
        state.source_latent[state.idx] = state.z[:, 2:]


# -- copula helpers ----------------------------------------------------------

def _copula_delta(state: ChainState, j: int, znew: np.ndarray, a: np.ndarray) -> float:
    """Change of the summed copula log density when column ``j`` becomes ``znew``."""
    z = state.z
    zj = z[:, j]
    r = z @ a[:, j] - a[j, j] * zj
    return float(-0.5 * np.sum(a[j, j] * (znew * znew - zj * zj) + 2.0 * (znew - zj) * r))


def _a_matrix(state: ChainState) -> np.ndarray:
    return np.linalg.inv(state.gamma) - np.eye(4)


# -- margin updates ----------------------------------------------------------

def _draw_labels(logp: np.ndarray, rng) -> np.ndarray:
    p = np.exp(logp - logp.max(axis=1, keepdims=True))
    cum = np.cumsum(p, axis=1)
    u = rng.random(p.shape[0]) * cum[:, -1]
    return np.minimum((cum < u[:, None]).sum(axis=1), p.shape[1] - 1)


def _mh(logr: float, rng) -> tuple[bool, float]:
    prob = 1.0 if logr >= 0 else float(np.exp(logr))
    return bool(rng.random() < prob), prob


def _joint_transform(which, w, p1, p2):
    t_w = np.log(w[:-1]) - np.log(w[-1])
    if which == "income":
        return np.concatenate((t_w, np.log(p1), np.log(p2)))
    return np.concatenate((t_w, np.log(p1), special.logit(p2)))


def _joint_untransform(which, t, k):
    tw = np.concatenate((t[: k - 1], [0.0]))
    w = np.exp(tw - special.logsumexp(tw))
    if which == "income":
        return w, np.exp(t[k - 1: 2 * k - 1]), np.exp(t[2 * k - 1:])
    return w, np.exp(t[k - 1: 2 * k - 1]), special.expit(t[2 * k - 1:])


def _joint_log_prior(which, t, k, pr) -> float:
    w, _, _ = _joint_untransform(which, t, k)
    # Dirichlet density on w with the additive-logratio Jacobian prod(w)
    lp = pr.dirichlet_concentration * float(np.sum(np.log(w)))
    a1, a2 = t[k - 1: 2 * k - 1], t[2 * k - 1:]
    if which == "income":
        lp += -0.5 * float(np.sum((a1 - pr.log_param_mean) ** 2) / pr.log_mean_var
                           + np.sum((a2 - pr.log_param_mean) ** 2) / pr.log_shape_var)
    else:
        ba, bb = pr.health_mean_beta
        lp += -0.5 * float(np.sum((a1 - pr.log_param_mean) ** 2)) / pr.log_precision_var
        lp += float(np.sum(ba * special.log_expit(a2) + bb * special.log_expit(-a2)))
    return lp


def _joint_move(state: ChainState, which: str, a: np.ndarray, w, p1, p2, comp_logpdf, comp_cdf,
                cdf, j: int, n: int, rng) -> None:
    """Adaptive-Metropolis move of a whole mixture with the labels summed out.

    Overlapping components leave a long ridge in (weights, locations,
    spreads) that label-conditional updates cross only slowly; a joint step
    shaped by the burn-in covariance follows it.
    """
    k = w.size
    t_old = _joint_transform(which, w, p1, p2)
    mom = state.moments.setdefault(which, _Moments())
    ad = state.scaler(f"{which}_joint", 1.0, TARGET_BLOCK)
    t_new = t_old + ad.scale * (mom.chol(t_old.size) @ rng.standard_normal(t_old.size))
    with np.errstate(over="ignore"):
        wn, q1, q2 = _joint_untransform(which, t_new, k)
    ok_vals = (np.all(np.isfinite(np.concatenate((wn, q1, q2))))
               and np.all(wn > 0) and np.all(q1 > 0) and np.all(q2 > 0))
    if which == "health":
        ok_vals = ok_vals and np.all(q2 < 1)
    if not ok_vals:
        ad.record(0.0, False, state.adapting)
        return
    logr = _joint_log_prior(which, t_new, k, state.priors) - _joint_log_prior(which, t_old, k, state.priors)
    if n:
        with np.errstate(divide="ignore"):
            ll_new = special.logsumexp(comp_logpdf(q1, q2) + np.log(wn), axis=1).sum()
            ll_old = special.logsumexp(comp_logpdf(p1, p2) + np.log(w), axis=1).sum()
        logr += ll_new - ll_old
        cols = comp_cdf(q1, q2)
        znew, nclamp = _scores(np.clip(cols @ wn, 0.0, 1.0))
        logr += _copula_delta(state, j, znew, a)
    if not np.isfinite(logr):
        ad.record(0.0, False, state.adapting)
        return
    ok, prob = _mh(logr, rng)
    ad.record(prob, ok, state.adapting)
    if ok:
        w[:], p1[:], p2[:] = wn, q1, q2
        if n:
            cdf[:] = cols
            state.z[:, j] = znew
            state.clamps += nclamp


def _update_mixture(state: ChainState, which: str, a: np.ndarray, rng) -> None:
    pr = state.priors
    if which == "income":
        j, w = 0, state.inc_w
        p1, p2 = state.inc_mu, state.inc_nu
        y = state.y1
        comp_logpdf = lambda q1, q2: _gamma_comp_logpdf(state.logy1, y, q1, q2)
        comp_cdf = lambda q1, q2: _gamma_comp_cdf(state.y1u, q1, q2)[state.inv]
    else:
        j, w = 1, state.hl_w
        p1, p2 = state.hl_s, state.hl_m
        y = state.y2
        comp_logpdf = lambda q1, q2: _beta_comp_logpdf(y, q1, q2)
        comp_cdf = lambda q1, q2: _beta_comp_cdf(state.y2u, q1, q2)[state.inv]
    cdf = state.cdf1 if j == 0 else state.cdf2
    k = w.size
    n = y.size

    if k > 1:
        _joint_move(state, which, a, w, p1, p2, comp_logpdf, comp_cdf, cdf, j, n, rng)

    # (a) labels from their exact multinomial conditionals
    with np.errstate(divide="ignore"):
        logp = comp_logpdf(p1, p2) + np.log(w)
    lab = _draw_labels(logp, rng) if n else np.zeros(0, dtype=np.int64)
    counts = np.bincount(lab, minlength=k)

    # (b) weights: Dirichlet full conditional as an independence proposal,
    # corrected by the copula term
    if k > 1:
        alpha = pr.dirichlet_concentration + counts
        wnew = rng.dirichlet(alpha)
        ad = state.scaler(f"{which}_weights", 1.0, 0.0)
        if n:
            znew, nclamp = _scores(cdf @ wnew)
            logr = _copula_delta(state, j, znew, a)
        else:
            znew, nclamp, logr = None, 0, 0.0
        ok, prob = _mh(logr, rng)
        ad.record(prob, ok, False)
        if ok and np.all(wnew > 0):
            w[:] = wnew
            if n:
                state.z[:, j] = znew
                state.clamps += nclamp
    else:
        w[:] = 1.0

    # (c) random walk on transformed component parameters
    for c in range(k):
        ad = state.scaler(f"{which}_comp{c + 1}", 0.1, TARGET_BLOCK)
        step = ad.scale * rng.standard_normal(2)
        if which == "income":
            t_old = np.log([p1[c], p2[c]])
            t_new = t_old + step
            q1, q2 = np.exp(t_new)
            v1, v2 = pr.log_mean_var, pr.log_shape_var
            logprior = lambda t: -0.5 * ((t[0] - pr.log_param_mean) ** 2 / v1 + (t[1] - pr.log_param_mean) ** 2 / v2)
        else:
            t_old = np.array([np.log(p1[c]), special.logit(p2[c])])
            t_new = t_old + step
            q1, q2 = np.exp(t_new[0]), special.expit(t_new[1])
            ba, bb = pr.health_mean_beta
            logprior = lambda t: (
                -0.5 * (t[0] - pr.log_param_mean) ** 2 / pr.log_precision_var
                # Beta(ba, bb) prior on m plus the logit Jacobian m(1-m)
                + ba * special.log_expit(t[1]) + bb * special.log_expit(-t[1])
            )
        if not (np.isfinite(q1) and np.isfinite(q2) and q1 > 0 and q2 > 0 and (which == "income" or 0 < q2 < 1)):
            ad.record(0.0, False, state.adapting)
            continue
        logr = logprior(t_new) - logprior(t_old)
        if n:
            mine = lab == c
            if np.any(mine):
                if which == "income":
                    ll_new = _gamma_comp_logpdf(state.logy1[mine], y[mine], q1, q2).sum()
                    ll_old = _gamma_comp_logpdf(state.logy1[mine], y[mine], p1[c], p2[c]).sum()
                else:
                    ll_new = _beta_comp_logpdf(y[mine], q1, q2).sum()
                    ll_old = _beta_comp_logpdf(y[mine], p1[c], p2[c]).sum()
                logr += ll_new - ll_old
            col = comp_cdf(np.array([q1]), np.array([q2]))[:, 0]
            total = cdf @ w + w[c] * (col - cdf[:, c])
            znew, nclamp = _scores(np.clip(total, 0.0, 1.0))
            logr += _copula_delta(state, j, znew, a)
        if not np.isfinite(logr):
            ad.record(0.0, False, state.adapting)
            continue
        ok, prob = _mh(logr, rng)
        ad.record(prob, ok, state.adapting)
        if ok:
            p1[c], p2[c] = q1, q2
            if n:
                cdf[:, c] = col
                state.z[:, j] = znew
                state.clamps += nclamp

    # (d) identifiability ordering by component mean
    key = p1 if which == "income" else p2
    order = np.argsort(key, kind="stable")
    if np.any(order != np.arange(k)):
        w[:] = w[order]
        p1[:] = p1[order]
        p2[:] = p2[order]
        cdf[:] = cdf[:, order]
        inv = np.empty(k, dtype=np.int64)
        inv[order] = np.arange(k)
        lab = inv[lab]
    if which == "income":
        state.lab1 = lab
    else:
        state.lab2 = lab
    if k > 1 and state.adapting:
        state.moments.setdefault(which, _Moments()).add(_joint_transform(which, w, p1, p2))


def _draw_ordinal(state: ChainState, j: int, prec: np.ndarray, rng) -> None:
    if not state.n:
        return
    mean, sd = conditional_moments(state.z, prec, j + 2)
    lo, hi = _ordinal_bounds(state.tau[j], state.c[j])
    state.z[:, j + 2] = truncated_normal(mean, sd, lo, hi, rng)


def _update_thresholds(state: ChainState, j: int, prec: np.ndarray, rng) -> None:
    """Random-walk updates of each threshold with the own latent integrated out."""
    tau = state.tau[j]
    tlo, thi = state.priors.threshold_bounds
    col = state.c[j]
    if state.n:
        mean, sd = conditional_moments(state.z, prec, j + 2)
    for s in range(tau.size):
        ad = state.scaler(f"tau{j + 3}_{s + 1}", 0.05, TARGET_SCALAR)
        new = tau[s] + ad.scale * rng.standard_normal()
        left = tau[s - 1] if s > 0 else tlo
        right = tau[s + 1] if s + 1 < tau.size else thi
        if not (left < new < right and tlo <= new <= thi):
            ad.record(0.0, False, state.adapting)
            continue
        logr = 0.0
        if state.n:
            ext_old = np.concatenate(([-np.inf], tau, [np.inf]))
            ext_new = ext_old.copy()
            ext_new[s + 1] = new
            # categories s+1 and s+2 (1-based) have tau[s] as a bound
            sel = (col == s + 1) | (col == s + 2)
            if np.any(sel):
                cs, ms = col[sel], mean[sel]
                l_new = _log_interval((ext_new[cs - 1] - ms) / sd, (ext_new[cs] - ms) / sd)
                l_old = _log_interval((ext_old[cs - 1] - ms) / sd, (ext_old[cs] - ms) / sd)
                logr = float(np.sum(l_new - l_old))
        if not np.isfinite(logr):
            ad.record(0.0, False, state.adapting)
            continue
        ok, prob = _mh(logr, rng)
        ad.record(prob, ok, state.adapting)
        if ok:
            tau[s] = new
    # redraw the integrated-out latent so the (tau, z) block is exact
    _draw_ordinal(state, j, prec, rng)


def update_margins(state: ChainState, pseudo_sample: WeightedSample | None, rng) -> ChainState:
    """One sweep over both mixtures and both threshold sets.

    If ``pseudo_sample`` is given it is loaded first; pass ``None`` to keep
    the currently loaded records.
    """
    if pseudo_sample is not None:
        load_pseudo_sample(state, pseudo_sample)
    a = _a_matrix(state)
    _update_mixture(state, "income", a, rng)
    _update_mixture(state, "health", a, rng)
    prec = a + np.eye(4)
    for j in range(2):
        _update_thresholds(state, j, prec, rng)
    return state


def update_latents(state: ChainState, pseudo_sample: WeightedSample | None, rng) -> ChainState:
    """Recompute continuous scores and redraw the ordinal latents."""
    if pseudo_sample is not None:
        load_pseudo_sample(state, pseudo_sample)
    if state.n:
        state.z[:, 0], k1 = _scores(state.cdf1 @ state.inc_w)
        state.z[:, 1], k2 = _scores(state.cdf2 @ state.hl_w)
        state.clamps += k1 + k2
        prec = np.linalg.inv(state.gamma)
        for j in range(2):
            _draw_ordinal(state, j, prec, rng)
    return state


def _corr_loglik(g: np.ndarray, s: np.ndarray, n: int) -> float:
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= _MIN_EIG:
        return -np.inf
    chol = np.linalg.cholesky(g)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    inv = np.linalg.inv(g)
    return float(-0.5 * n * logdet - 0.5 * np.sum((inv - np.eye(g.shape[0])) * s))


def correlation_step(gamma: np.ndarray, s: np.ndarray, n: int, state_adapt: dict, adapting: bool,
                     eta: float, rng) -> np.ndarray:
    """Componentwise random walk on ``atanh`` of the C-vine partial correlations.

    ``s`` is the cross-product matrix of the latent scores.  Returns the new
    matrix; ``state_adapt`` holds the per-coordinate adaptation records.
    """
    d = gamma.shape[0]
    p = corr_to_partials(gamma)
    x = np.arctanh(np.clip(p, -1 + 1e-15, 1 - 1e-15))

    def target(xv):
        pv = np.tanh(xv)
        g = partials_to_corr(pv, d)
        ll = _corr_loglik(g, s, n)
        # LKJ prior on the partials plus the tanh Jacobian
        return ll + log_lkj_prior(pv, d, eta) + float(np.sum(np.log1p(-pv * pv))), g

    cur, g_cur = target(x)
    for i in range(x.size):
        name = f"corr{i + 1}"
        if name not in state_adapt:
            state_adapt[name] = _Adapt(np.log(0.1), TARGET_SCALAR)
        ad = state_adapt[name]
        xn = x.copy()
        xn[i] += ad.scale * rng.standard_normal()
        new, g_new = target(xn)
        logr = new - cur
        if not np.isfinite(logr):
            ad.record(0.0, False, adapting)
            continue
        ok, prob = _mh(logr, rng)
        ad.record(prob, ok, adapting)
        if ok:
            x, cur, g_cur = xn, new, g_new
    g_cur = 0.5 * (g_cur + g_cur.T)
    np.fill_diagonal(g_cur, 1.0)
    return g_cur


def update_correlation(state: ChainState, rng) -> ChainState:
    """Metropolis update of the copula correlation given all latent scores."""
    s = state.z.T @ state.z if state.n else np.zeros((4, 4))
    state.gamma = correlation_step(state.gamma, s, state.n, state.adapt, state.adapting,
                                   state.priors.correlation_eta, rng)
    return state


def log_posterior(state: ChainState) -> float:
    """Augmented log posterior (up to a constant) on the loaded pseudo-sample."""
    pr = state.priors
    lp = 0.0
    lm, ls = np.log(state.inc_mu), np.log(state.inc_nu)
    lp += -0.5 * np.sum((lm - pr.log_param_mean) ** 2) / pr.log_mean_var
    lp += -0.5 * np.sum((ls - pr.log_param_mean) ** 2) / pr.log_shape_var
    lp += -0.5 * np.sum((np.log(state.hl_s) - pr.log_param_mean) ** 2) / pr.log_precision_var
    ba, bb = pr.health_mean_beta
    lp += np.sum((ba - 1) * np.log(state.hl_m) + (bb - 1) * np.log1p(-state.hl_m))
    alpha = pr.dirichlet_concentration
    lp += np.sum((alpha - 1) * np.log(state.inc_w)) + np.sum((alpha - 1) * np.log(state.hl_w))
    p = corr_to_partials(state.gamma)
    lp += log_lkj_prior(p, 4, pr.correlation_eta)
    if state.n:
        f1 = _gamma_comp_logpdf(state.logy1, state.y1, state.inc_mu, state.inc_nu) + np.log(state.inc_w)
        f2 = _beta_comp_logpdf(state.y2, state.hl_s, state.hl_m) + np.log(state.hl_w)
        lp += special.logsumexp(f1, axis=1).sum() + special.logsumexp(f2, axis=1).sum()
        lp += _corr_loglik(state.gamma, state.z.T @ state.z, state.n)
    if not np.isfinite(lp):
        raise NumericError("log posterior is not finite")
    return float(lp)
