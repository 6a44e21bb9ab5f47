"""Single-index welfare and poverty measures.

Indices are computed from weighted samples, either observed or simulated
from the fitted model (posterior predictive).  Weights are always
renormalised to sum to one.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .copula import JointModel, sample_joint
from .dominance import ATTR_NAMES, PovertyLines
from .errors import DomainError, NumericError, ParameterError
from .margins import marginal_mean
from .sampler.types import PosteriorDraws, WeightedSample

__all__ = [
    "NormalizationBenchmarks",
    "DeprivationRule",
    "IndexReport",
    "AFResult",
    "NormalizationWarning",
    "normalize_attribute",
    "mwi",
    "deprivations",
    "headcount",
    "af_counting",
    "attribute_means",
    "weighted_sample_mean",
    "posterior_mean_difference",
    "predictive_samples",
]

J = 4
AF_UNDEFINED = None


class NormalizationWarning(UserWarning):
    """Raised when normalised values fall outside [0, 1] and are clamped."""


@dataclass(frozen=True)
class NormalizationBenchmarks:
    """Minimum and maximum benchmarks per attribute.

    Income benchmarks act on the log scale.  Health needs no benchmarks
    since scores already lie in (0, 1).
    """

    income: tuple = (5495.0, 150000.0)
    education: tuple = (1.0, 5.0)
    happiness: tuple = (1.0, 5.0)

    def __post_init__(self):
        for name in ("income", "education", "happiness"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ParameterError(f"{name} benchmarks need minimum < maximum")
        if self.income[0] <= 0:
            raise ParameterError("income benchmarks must be positive")


@dataclass(frozen=True)
class DeprivationRule:
    """Whether deprivation means strictly below (``<``) or at-or-below (``<=``) the line."""

    continuous_strict: bool = True
    ordinal_strict: bool = False


@dataclass(frozen=True)
class IndexReport:
    """One index value, plus posterior summaries when computed over draws."""

    name: str
    attributes: tuple
    value: float
    source: str = "sample"
    posterior_mean: float | None = None
    interval: tuple | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "attributes": list(self.attributes),
            "value": self.value,
            "source": self.source,
            "posterior_mean": self.posterior_mean,
            "interval": list(self.interval) if self.interval is not None else None,
            **({"extra": self.extra} if self.extra else {}),
        }


@dataclass(frozen=True)
class AFResult:
    cutoff: int
    mh: float
    a: float | None
    mha: float


def _attr_index(attribute) -> int:
    if isinstance(attribute, (int, np.integer)):
        if not 0 <= attribute < J:
            raise ParameterError(f"attribute index {attribute} out of range")
        return int(attribute)
    try:
        return ATTR_NAMES.index(attribute)
    except ValueError:
        raise ParameterError(f"unknown attribute {attribute!r}") from None


def normalize_attribute(y, attribute, benchmarks: NormalizationBenchmarks | None = None, *,
                        warn: bool = True) -> np.ndarray:
    """Map attribute values onto [0, 1] using the benchmarks.

    Income uses ``(log y - log m) / (log M - log m)``, the ordinal
    attributes ``(y - m) / (M - m)``; health is returned unchanged.  Values
    outside [0, 1] are clamped and counted in a :class:`NormalizationWarning`.
    """
    b = benchmarks or NormalizationBenchmarks()
    j = _attr_index(attribute)
    y = np.asarray(y, dtype=float)
    if j == 1:
        return y.copy()
    if j == 0:
        if np.any(y <= 0):
            raise DomainError("income must be positive to normalise")
        lo, hi = np.log(b.income[0]), np.log(b.income[1])
        v = (np.log(y) - lo) / (hi - lo)
    else:
        lo, hi = (b.education, b.happiness)[j - 2]
        v = (y - lo) / (hi - lo)
    outside = int(np.count_nonzero((v < 0) | (v > 1)))
    if outside and warn:
        warnings.warn(f"{outside} normalised {ATTR_NAMES[j]} values clamped to [0, 1]",
                      NormalizationWarning, stacklevel=2)
    return np.clip(v, 0.0, 1.0)


def _columns(sample: WeightedSample):
    return (sample.income, sample.health, sample.education.astype(float), sample.happiness.astype(float))


def _norm_weights(sample: WeightedSample) -> np.ndarray:
    if len(sample) == 0:
        raise ParameterError("empty sample")
    w = np.asarray(sample.weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise ParameterError("sample weights sum to zero")
    return w / total


def _subset(attributes) -> tuple[int, ...]:
    idx = tuple(_attr_index(a) for a in attributes)
    if not idx:
        raise ParameterError("attribute subset is empty")
    if len(set(idx)) != len(idx):
        raise ParameterError("attribute subset has duplicates")
    return idx


def _sample_mwi(sample: WeightedSample, b, idx, warn) -> float:
    w = _norm_weights(sample)
    cols = _columns(sample)
    per = np.mean([normalize_attribute(cols[j], j, b, warn=warn) for j in idx], axis=0)
    return float(np.dot(w, per))


def predictive_samples(draws, n: int, seed=0, max_draws: int | None = None):
    """Yield one simulated unit-weight sample per posterior draw.

    Each draw gets its own child seed, so the predictive samples are
    reproducible and independent of how many draws are consumed.
    """
    models = draws.draws if isinstance(draws, PosteriorDraws) else list(draws)
    if max_draws is not None:
        models = models[:max_draws]
    seeds = np.random.SeedSequence(seed).spawn(len(models))
    for model, ss in zip(models, seeds):
        yield WeightedSample.from_array(sample_joint(model, n, np.random.default_rng(ss)))


def _summarise(name, attrs, values, extra=None) -> IndexReport:
    v = np.asarray(values, dtype=float)
    lo, hi = np.quantile(v, [0.025, 0.975])
    mean = float(v.mean())
    return IndexReport(name, attrs, mean, "predictive", mean, (float(lo), float(hi)), extra or {})


def _is_draws(data) -> bool:
    return isinstance(data, PosteriorDraws) or (isinstance(data, (list, tuple)) and data
                                                and isinstance(data[0], JointModel))


def mwi(data, benchmarks: NormalizationBenchmarks | None = None, attributes=ATTR_NAMES, *,
        n_predictive: int = 2000, seed=0, max_draws: int | None = None, warn: bool = True) -> IndexReport:
    """Multidimensional welfare index: weighted mean of each record's
    average normalised attribute over ``attributes``.

    ``data`` is a :class:`WeightedSample` or posterior draws; with draws the
    index is computed on one predictive sample of size ``n_predictive`` per
    draw and summarised by its posterior mean and 95% interval.
    """
    b = benchmarks or NormalizationBenchmarks()
    idx = _subset(attributes)
    attrs = tuple(ATTR_NAMES[j] for j in idx)
    if _is_draws(data):
        vals = [_sample_mwi(s, b, idx, False) for s in predictive_samples(data, n_predictive, seed, max_draws)]
        return _summarise("MWI", attrs, vals)
    return IndexReport("MWI", attrs, _sample_mwi(data, b, idx, warn))


def deprivations(sample: WeightedSample, lines: PovertyLines, rule: DeprivationRule | None = None) -> np.ndarray:
    """Boolean ``(n, 4)`` matrix of deprivation in each attribute."""
    rule = rule or DeprivationRule()
    out = np.empty((len(sample), J), dtype=bool)
    for j, (col, line) in enumerate(zip(_columns(sample), lines.as_tuple())):
        strict = rule.continuous_strict if j < 2 else rule.ordinal_strict
        out[:, j] = col < line if strict else col <= line
    return out


def _sample_headcount(sample, lines, idx, rule) -> float:
    w = _norm_weights(sample)
    dep = deprivations(sample, lines, rule)[:, list(idx)].all(axis=1)
    return float(np.dot(w, dep))


def headcount(data, lines: PovertyLines, attributes, rule: DeprivationRule | None = None, *,
              n_predictive: int = 2000, seed=0, max_draws: int | None = None) -> IndexReport:
    """Weighted share deprived in one attribute (HC1) or in both of two (HC2)."""
    if isinstance(attributes, (str, int, np.integer)):
        attributes = (attributes,)
    idx = _subset(attributes)
    if len(idx) > 2:
        raise ParameterError("headcounts take one or two attributes")
    name = f"HC{len(idx)}"
    attrs = tuple(ATTR_NAMES[j] for j in idx)
    if _is_draws(data):
        vals = [_sample_headcount(s, lines, idx, rule)
                for s in predictive_samples(data, n_predictive, seed, max_draws)]
        return _summarise(name, attrs, vals)
    return IndexReport(name, attrs, _sample_headcount(data, lines, idx, rule))


def af_counting(data: WeightedSample, lines: PovertyLines, cutoff: int,
                rule: DeprivationRule | None = None) -> AFResult:
    """Counting measures with a dimension cut-off ``cutoff`` in 1..4.

    ``mh`` is the weighted share poor (deprived in at least ``cutoff``
    attributes), ``a`` the average deprivation share among the poor and
    ``mha = mh * a``.  With nobody poor, ``mh = mha = 0`` and ``a`` is
    ``None``.
    """
    if cutoff not in range(1, J + 1):
        raise ParameterError(f"cutoff must be in 1..{J}")
    _norm_weights(data)
    # shares as ratios of sums over the same array keep mh exactly within [0, 1]
    w = np.asarray(data.weights, dtype=float)
    total = np.sum(w)
    counts = deprivations(data, lines, rule).sum(axis=1)
    poor = counts >= cutoff
    mh = float(np.sum(w * poor) / total)
    if mh == 0.0:
        return AFResult(cutoff, 0.0, AF_UNDEFINED, 0.0)
    total_poor = float(np.sum(w * (counts * poor)) / total)
    a = total_poor / (J * mh)
    mha = mh * a
    direct = total_poor / J
    if abs(mha - direct) > 1e-14:
        raise NumericError(f"MHA identity failed: {mha!r} vs {direct!r}")
    return AFResult(cutoff, mh, a, direct)


def attribute_means(model: JointModel) -> np.ndarray:
    """Model-implied means of the four attributes."""
    return np.array([marginal_mean(m) for m in model.margins])


def weighted_sample_mean(sample: WeightedSample, attribute) -> float:
    j = _attr_index(attribute)
    return float(np.dot(_norm_weights(sample), _columns(sample)[j]))


def posterior_mean_difference(draws_a, draws_b, attribute) -> float:
    """Posterior mean of the attribute mean in B minus that in A."""
    j = _attr_index(attribute)
    ma = draws_a.draws if isinstance(draws_a, PosteriorDraws) else list(draws_a)
    mb = draws_b.draws if isinstance(draws_b, PosteriorDraws) else list(draws_b)
    if not ma or not mb:
        raise ParameterError("no draws")
    mean_a = np.mean([marginal_mean(m.margins[j]) for m in ma])
    mean_b = np.mean([marginal_mean(m.margins[j]) for m in mb])
    return float(mean_b - mean_a)
