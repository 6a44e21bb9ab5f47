"""Synthetic populations with known dominance relations."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import scenarios as S
from .copula import CorrelationMatrix, JointModel, sample_joint
from .errors import ParameterError
from .margins import BetaMixture, GammaMixture, OrdinalModel, mixture_cdf
from .sampler.types import WeightedSample, flatten_model

__all__ = ["Scenario", "make_scenario", "generate", "population_seed", "write_csv", "CSV_COLUMNS"]

CSV_COLUMNS = ("id", "income", "mental_health", "education", "happiness", "weight")
WEIGHT_SCHEMES = ("uniform", "skewed")


@dataclass(frozen=True)
class Scenario:
    name: str
    model_a: JointModel
    model_b: JointModel
    n: int = S.DEFAULT_N
    weights: str = "uniform"
    seed: int = S.DEFAULT_SEED

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("scenario sample size must be at least 1")
        if self.weights not in WEIGHT_SCHEMES:
            raise ParameterError(f"weight scheme must be one of {WEIGHT_SCHEMES}")

    @property
    def components(self) -> tuple[int, int]:
        """True ``(K_G, K_B)``; both populations use the same counts."""
        return self.model_a.income.n_components, self.model_a.health.n_components


def _income(spec, factor=1.0) -> GammaMixture:
    return GammaMixture(spec["weights"], np.array(spec["means"]) * factor, spec["shapes"])


def _health(spec, delta=0.0) -> BetaMixture:
    return BetaMixture(spec["weights"], spec["precisions"], np.array(spec["means"]) + delta)


def _ordinal(thresholds, delta=0.0) -> OrdinalModel:
    return OrdinalModel(np.array(thresholds) + delta)


def _base(**changes) -> JointModel:
    parts = {
        "income": _income(S.BASE_INCOME),
        "health": _health(S.BASE_HEALTH),
        "education": _ordinal(S.BASE_EDUCATION),
        "happiness": _ordinal(S.BASE_HAPPINESS),
        "correlation": CorrelationMatrix(S.BASE_CORRELATION),
    }
    parts.update(changes)
    return JointModel(**parts)


def make_scenario(name: str, n: int = S.DEFAULT_N, weights: str = "uniform",
                  seed: int = S.DEFAULT_SEED) -> Scenario:
    """Build one of the named scenarios (see :mod:`mdwelfare.scenarios`)."""
    a = _base()
    if name == "identical":
        b = a
    elif name == "income_shift":
        b = a.replace(income=_income(S.BASE_INCOME, S.INCOME_SHIFT_FACTOR))
    elif name == "all_shift":
        b = a.replace(
            income=_income(S.BASE_INCOME, S.ALL_SHIFT_INCOME_FACTOR),
            health=_health(S.BASE_HEALTH, S.ALL_SHIFT_HEALTH_DELTA),
            education=_ordinal(S.BASE_EDUCATION, S.ALL_SHIFT_THRESHOLD_DELTA),
            happiness=_ordinal(S.BASE_HAPPINESS, S.ALL_SHIFT_THRESHOLD_DELTA),
        )
    elif name == "mixed_signs":
        b = a.replace(
            income=_income(S.BASE_INCOME, S.MIXED_INCOME_FACTOR),
            health=_health(S.BASE_HEALTH, S.MIXED_HEALTH_DELTA),
        )
    elif name == "u3_only":
        a = _base(income=_income(S.U3_INCOME_A))
        b = a.replace(
            income=_income(S.U3_INCOME_B),
            health=_health(S.BASE_HEALTH, S.U3_HEALTH_DELTA),
            education=_ordinal(S.BASE_EDUCATION, S.U3_THRESHOLD_DELTA),
            happiness=_ordinal(S.BASE_HAPPINESS, S.U3_THRESHOLD_DELTA),
        )
    else:
        raise ParameterError(f"unknown scenario {name!r}; choose from {S.SCENARIO_NAMES}")
    return Scenario(name, a, b, n, weights, seed)


def population_seed(root_seed: int, model: JointModel) -> np.random.SeedSequence:
    """Seed derived from the root seed and the model parameters.

    Equal models get equal seeds, so identical populations produce
    identical samples.
    """
    digest = hashlib.sha256(np.ascontiguousarray(flatten_model(model)).tobytes()).digest()
    return np.random.SeedSequence([root_seed, int.from_bytes(digest[:8], "little")])


def _draw(model: JointModel, n: int, scheme: str, ss: np.random.SeedSequence) -> WeightedSample:
    rng = np.random.default_rng(ss)
    if scheme == "uniform":
        return WeightedSample.from_array(sample_joint(model, n, rng))
    kept, wts, have = [], [], 0
    while have < n:
        batch = sample_joint(model, max(2 * (n - have), 64), rng)
        p = S.SKEW_FLOOR + (1.0 - S.SKEW_FLOOR) * mixture_cdf(batch[:, 0], model.income)
        keep = rng.random(batch.shape[0]) < p
        kept.append(batch[keep])
        wts.append(1.0 / p[keep])
        have += int(keep.sum())
    records = np.concatenate(kept)[:n]
    return WeightedSample.from_array(records, np.concatenate(wts)[:n])


def generate(scenario: Scenario) -> tuple[WeightedSample, WeightedSample]:
    """Seeded samples of both populations under the scenario's weight scheme.

    Under the skewed scheme high incomes are over-sampled and carry
    inverse-probability weights, so the weighted CDF estimates the model
    CDF while the unweighted empirical CDF is shifted upwards.
    """
    out = []
    for model in (scenario.model_a, scenario.model_b):
        out.append(_draw(model, scenario.n, scenario.weights, population_seed(scenario.seed, model)))
    return out[0], out[1]


def write_csv(sample: WeightedSample, path) -> Path:
    """Write a sample in the ingestion format."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(len(sample)):
            w.writerow([i + 1, repr(float(sample.income[i])), repr(float(sample.health[i])),
                        int(sample.education[i]), int(sample.happiness[i]), repr(float(sample.weights[i]))])
    return path
