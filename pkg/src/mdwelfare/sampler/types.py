"""Data containers for the posterior sampler."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..copula import CorrelationMatrix, JointModel
from ..errors import ParameterError
from ..margins import BetaMixture, GammaMixture, OrdinalModel

__all__ = [
    "WeightedSample",
    "PriorConfig",
    "ChainConfig",
    "PosteriorDraws",
    "flatten_model",
    "unflatten_model",
    "draw_columns",
    "DRAWS_CSV_VERSION",
]

DRAWS_CSV_VERSION = 1
_PAIRS = [(i, j) for i in range(4) for j in range(i + 1, 4)]


def _ro(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, ndmin=1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """Survey records with one weight per record.

    Categories are 1-based codes; ``n_categories`` gives the number of
    levels for education and happiness.
    """

    income: np.ndarray
    health: np.ndarray
    education: np.ndarray
    happiness: np.ndarray
    weights: np.ndarray
    n_categories: tuple = (5, 5)

    def __post_init__(self):
        inc, hl = _ro(self.income), _ro(self.health)
        ed, hp = _ro(self.education, np.int64), _ro(self.happiness, np.int64)
        w = _ro(self.weights)
        for name, arr in (("income", inc), ("health", hl), ("education", ed), ("happiness", hp), ("weights", w)):
            object.__setattr__(self, name, arr)
        n = inc.size
        if not all(a.shape == (n,) for a in (hl, ed, hp, w)):
            raise ParameterError("all sample columns must be 1-d with equal length")
        if np.any(~np.isfinite(inc)) or np.any(inc <= 0):
            raise ParameterError("incomes must be positive and finite")
        if np.any(~np.isfinite(hl)) or np.any((hl <= 0) | (hl >= 1)):
            raise ParameterError("health scores must lie strictly inside (0, 1)")
        l3, l4 = (int(c) for c in self.n_categories)
        object.__setattr__(self, "n_categories", (l3, l4))
        if np.any((ed < 1) | (ed > l3)) or np.any((hp < 1) | (hp > l4)):
            raise ParameterError("category codes out of range")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ParameterError("weights must be nonnegative and finite")
        if n > 0 and not np.any(w > 0):
            raise ParameterError("at least one weight must be positive")

    @classmethod
    def from_array(cls, records, weights=None, n_categories=(5, 5)) -> "WeightedSample":
        """Build from an ``(n, 4)`` array such as the output of ``sample_joint``."""
        r = np.asarray(records, dtype=float)
        if weights is None:
            weights = np.ones(r.shape[0])
        return cls(r[:, 0], r[:, 1], np.rint(r[:, 2]), np.rint(r[:, 3]), weights, n_categories)

    @classmethod
    def empty(cls, n_categories=(5, 5)) -> "WeightedSample":
        return cls([], [], [], [], [], n_categories)

    def __len__(self) -> int:
        return self.income.size

    def as_array(self) -> np.ndarray:
        return np.column_stack((self.income, self.health, self.education, self.happiness)).astype(float)

    def subset(self, idx) -> "WeightedSample":
        idx = np.asarray(idx)
        return WeightedSample(
            self.income[idx], self.health[idx], self.education[idx],
            self.happiness[idx], self.weights[idx], self.n_categories,
        )

    def with_unit_weights(self) -> "WeightedSample":
        return WeightedSample(self.income, self.health, self.education, self.happiness,
                              np.ones(len(self)), self.n_categories)

    def __eq__(self, other):
        if not isinstance(other, WeightedSample):
            return NotImplemented
        return self.n_categories == other.n_categories and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("income", "health", "education", "happiness", "weights")
        )

    __hash__ = None


@dataclass(frozen=True)
class PriorConfig:
    """Prior hyperparameters.

    Log means, log shapes and log precisions get independent normal priors;
    beta component means get a Beta(a, b) prior; thresholds are uniform on
    ``threshold_bounds`` subject to ordering; the correlation matrix gets an
    LKJ prior with parameter ``correlation_eta`` (1 is uniform).
    """

    dirichlet_concentration: float = 1.0
    log_param_mean: float = 0.0
    log_mean_var: float = 100.0
    log_shape_var: float = 100.0
    log_precision_var: float = 100.0
    health_mean_beta: tuple = (1.0, 1.0)
    threshold_bounds: tuple = (-6.0, 6.0)
    correlation_eta: float = 1.0

    def __post_init__(self):
        if self.dirichlet_concentration <= 0:
            raise ParameterError("Dirichlet concentration must be positive")
        if min(self.log_mean_var, self.log_shape_var, self.log_precision_var) <= 0:
            raise ParameterError("prior variances must be positive")
        if min(self.health_mean_beta) <= 0:
            raise ParameterError("beta prior parameters must be positive")
        lo, hi = self.threshold_bounds
        if not lo < hi:
            raise ParameterError("threshold bounds must be increasing")
        if self.correlation_eta <= 0:
            raise ParameterError("LKJ parameter must be positive")


@dataclass(frozen=True)
class ChainConfig:
    """MCMC run length and seeding.

    Draws are retained from iteration ``burn_in`` onwards, every ``thin``-th
    iteration.  Proposal scales adapt during the first
    ``adaptation_window`` iterations (default: the whole burn-in) and are
    frozen afterwards.
    """

    iterations: int = 12_000
    burn_in: int = 2_000
    thin: int = 1
    adaptation_window: int | None = None
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ParameterError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ParameterError("burn-in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ParameterError("thinning must be at least 1")
        if self.adaptation_window is not None and not 0 <= self.adaptation_window <= self.burn_in:
            raise ParameterError("adaptation window must lie within the burn-in")

    @property
    def adapt_until(self) -> int:
        return self.burn_in if self.adaptation_window is None else self.adaptation_window

    @property
    def n_retained(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thin)


def draw_columns(k_g: int, k_b: int, l3: int = 5, l4: int = 5) -> list[str]:
    """Column names of the flattened parameter vector, in storage order."""
    cols = []
    for prefix, names, k in (("income", ("w", "mu", "nu"), k_g), ("health", ("w", "s", "m"), k_b)):
        for name in names:
            cols += [f"{prefix}_{name}{c + 1}" for c in range(k)]
    cols += [f"education_tau{s + 1}" for s in range(l3 - 1)]
    cols += [f"happiness_tau{s + 1}" for s in range(l4 - 1)]
    cols += [f"rho{i + 1}{j + 1}" for i, j in _PAIRS]
    return cols


def flatten_model(model: JointModel) -> np.ndarray:
    g = model.correlation.matrix
    return np.concatenate((
        model.income.weights, model.income.means, model.income.shapes,
        model.health.weights, model.health.precisions, model.health.means,
        model.education.thresholds, model.happiness.thresholds,
        [g[i, j] for i, j in _PAIRS],
    ))


def unflatten_model(vec, k_g: int, k_b: int, l3: int = 5, l4: int = 5) -> JointModel:
    v = np.asarray(vec, dtype=float)
    if v.size != len(draw_columns(k_g, k_b, l3, l4)):
        raise ParameterError("parameter vector has the wrong length")
    pos = 0

    def take(n):
        nonlocal pos
        out = v[pos:pos + n]
        pos += n
        return out

    inc = GammaMixture(take(k_g), take(k_g), take(k_g))
    hl = BetaMixture(take(k_b), take(k_b), take(k_b))
    ed = OrdinalModel(take(l3 - 1))
    hp = OrdinalModel(take(l4 - 1))
    g = np.eye(4)
    for (i, j), r in zip(_PAIRS, take(6)):
        g[i, j] = g[j, i] = r
    return JointModel(inc, hl, ed, hp, CorrelationMatrix(g))


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """Retained MCMC draws stored as a matrix of flattened parameters."""

    params: np.ndarray
    log_posterior: np.ndarray
    acceptance: dict
    config: ChainConfig
    k_g: int
    k_b: int
    n_categories: tuple = (5, 5)
    _models: list = field(default=None, init=False, repr=False)

    def __post_init__(self):
        p = np.array(self.params, dtype=float, ndmin=2)
        p.setflags(write=False)
        object.__setattr__(self, "params", p)
        lp = np.array(self.log_posterior, dtype=float)
        lp.setflags(write=False)
        object.__setattr__(self, "log_posterior", lp)
        if p.shape[1] != len(self.columns):
            raise ParameterError("parameter matrix does not match the component counts")
        if lp.shape != (p.shape[0],):
            raise ParameterError("one log-posterior value per draw is required")

    @property
    def columns(self) -> list[str]:
        return draw_columns(self.k_g, self.k_b, *self.n_categories)

    def __len__(self) -> int:
        return self.params.shape[0]

    @property
    def draws(self) -> list[JointModel]:
        if self._models is None:
            models = [unflatten_model(row, self.k_g, self.k_b, *self.n_categories) for row in self.params]
            object.__setattr__(self, "_models", models)
        return self._models

    def __getitem__(self, m) -> JointModel:
        if self._models is not None:
            return self._models[m]
        return unflatten_model(self.params[m], self.k_g, self.k_b, *self.n_categories)

    def column(self, name: str) -> np.ndarray:
        return self.params[:, self.columns.index(name)]

    def posterior_mean(self) -> dict:
        return dict(zip(self.columns, self.params.mean(axis=0)))

    def posterior_sd(self) -> dict:
        return dict(zip(self.columns, self.params.std(axis=0, ddof=1)))

    def __eq__(self, other):
        if not isinstance(other, PosteriorDraws):
            return NotImplemented
        return (
            self.k_g == other.k_g and self.k_b == other.k_b
            and np.array_equal(self.params, other.params)
            and np.array_equal(self.log_posterior, other.log_posterior)
        )

    __hash__ = None

    def to_csv(self, path=None) -> str:
        """Write one row per draw.  The first line documents the layout.

        Header line: ``# mdwelfare-draws v1 k_g=.. k_b=.. l3=.. l4=..``,
        then the column names, then ``log_posterior`` last.
        """
        buf = io.StringIO()
        l3, l4 = self.n_categories
        buf.write(f"# mdwelfare-draws v{DRAWS_CSV_VERSION} k_g={self.k_g} k_b={self.k_b} l3={l3} l4={l4}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns + ["log_posterior"])
        for row, lp in zip(self.params, self.log_posterior):
            writer.writerow([repr(float(x)) for x in row] + [repr(float(lp))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text, config: ChainConfig | None = None) -> "PosteriorDraws":
        text = str(path_or_text)
        if "\n" not in text:
            text = Path(text).read_text()
        lines = text.splitlines()
        head = lines[0].split()
        if head[:2] != ["#", "mdwelfare-draws"] or head[2] != f"v{DRAWS_CSV_VERSION}":
            raise ParameterError("not a posterior draws file of a supported version")
        meta = dict(item.split("=") for item in head[3:])
        k_g, k_b, l3, l4 = (int(meta[k]) for k in ("k_g", "k_b", "l3", "l4"))
        rows = list(csv.reader(lines[1:]))
        expected = draw_columns(k_g, k_b, l3, l4) + ["log_posterior"]
        if rows[0] != expected:
            raise ParameterError("draws file columns do not match its header")
        data = np.array(rows[1:], dtype=float).reshape(-1, len(expected))
        return cls(data[:, :-1], data[:, -1], {}, config or ChainConfig(), k_g, k_b, (l3, l4))
