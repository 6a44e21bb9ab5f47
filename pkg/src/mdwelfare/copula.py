"""Gaussian copula joining the four attribute margins.

Attribute order is fixed throughout the package: income (gamma mixture),
mental health (beta mixture), education and happiness (ordinal).  Index
arguments such as ``pair`` are 0-based in that order.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import kernels
from .errors import NumericError, ParameterError, LatentClampWarning
from .margins import (
    BetaMixture,
    GammaMixture,
    Margin,
    OrdinalModel,
    marginal_quantile,
    mixture_cdf,
)

__all__ = [
    "ATTRIBUTES",
    "LATENT_CLAMP",
    "CorrelationMatrix",
    "JointModel",
    "LatentBounds",
    "MvnResult",
    "continuous_to_latent",
    "ordinal_latent_bounds",
    "latent_upper",
    "copula_log_density",
    "mvn_cdf",
    "joint_cdf",
    "bivariate_cdf",
    "sample_joint",
]

ATTRIBUTES = ("income", "mental_health", "education", "happiness")
LATENT_CLAMP = 8.0
PD_EIG_MIN = 1e-10
COND_MAX = 1e12
TOL_LOW_DIM = 1e-7
TOL_HIGH_DIM = 1e-5

# Richtmyer generators frac(sqrt(p)) for the lattice rule
_PRIMES = (2.0, 3.0, 5.0, 7.0)
_QMC_SHIFTS = 10
_QMC_N0 = 1000
_QMC_NMAX = 1 << 20
_QMC_ERR_FACTOR = 3.0


def _as_matrix(corr) -> np.ndarray:
    if isinstance(corr, CorrelationMatrix):
        return corr.matrix
    return np.asarray(corr, dtype=float)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric positive-definite matrix with unit diagonal."""

    matrix: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.array(self.matrix, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ParameterError(f"correlation matrix must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ParameterError("correlation matrix has non-finite entries")
        if np.max(np.abs(g - g.T)) > 1e-12:
            raise ParameterError("correlation matrix must be symmetric")
        if np.max(np.abs(np.diag(g) - 1.0)) > 1e-12:
            raise ParameterError("correlation matrix must have a unit diagonal")
        g = 0.5 * (g + g.T)
        np.fill_diagonal(g, 1.0)
        off = g[~np.eye(g.shape[0], dtype=bool)]
        if np.any(np.abs(off) >= 1.0):
            raise ParameterError("off-diagonal correlations must lie strictly inside (-1, 1)")
        eig = np.linalg.eigvalsh(g)
        if eig[0] <= PD_EIG_MIN:
            raise ParameterError(
                f"correlation matrix is not positive definite (smallest eigenvalue {eig[0]:.3e})"
            )
        g.setflags(write=False)
        object.__setattr__(self, "matrix", g)
        chol = np.linalg.cholesky(g)
        chol.setflags(write=False)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def identity(cls, d: int = 4) -> "CorrelationMatrix":
        return cls(np.eye(d))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def cholesky(self) -> np.ndarray:
        return self._chol

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self._chol))))

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def condition_number(self) -> float:
        eig = np.linalg.eigvalsh(self.matrix)
        return float(eig[-1] / eig[0])

    def __getitem__(self, idx):
        return self.matrix[idx]

    def __eq__(self, other):
        if not isinstance(other, CorrelationMatrix):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True)
class JointModel:
    """Full parameter set: four margins plus the copula correlation."""

    income: GammaMixture
    health: BetaMixture
    education: OrdinalModel
    happiness: OrdinalModel
    correlation: CorrelationMatrix

    def __post_init__(self):
        if not isinstance(self.income, GammaMixture):
            raise ParameterError("income margin must be a GammaMixture")
        if not isinstance(self.health, BetaMixture):
            raise ParameterError("health margin must be a BetaMixture")
        if not isinstance(self.education, OrdinalModel) or not isinstance(self.happiness, OrdinalModel):
            raise ParameterError("education and happiness margins must be OrdinalModels")
        corr = self.correlation
        if not isinstance(corr, CorrelationMatrix):
            corr = CorrelationMatrix(corr)
            object.__setattr__(self, "correlation", corr)
        if corr.dim != 4:
            raise ParameterError(f"joint model needs a 4x4 correlation matrix, got {corr.dim}x{corr.dim}")

    @property
    def margins(self) -> tuple:
        return (self.income, self.health, self.education, self.happiness)

    def upper_supports(self) -> tuple:
        """Upper support points ``(inf, 1, L_3, L_4)``."""
        return (np.inf, 1.0, self.education.n_categories, self.happiness.n_categories)

    def replace(self, **changes) -> "JointModel":
        kw = {name: getattr(self, name) for name in ("income", "health", "education", "happiness", "correlation")}
        kw.update(changes)
        return JointModel(**kw)


@dataclass(frozen=True)
class LatentBounds:
    """Half-open latent interval ``[lower, upper)``."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ParameterError(f"latent bounds need lower < upper, got ({self.lower}, {self.upper})")

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return (z >= self.lower) & (z < self.upper)


def _clamp_scores(u, *, warn: bool = True) -> np.ndarray:
    z = special.ndtri(np.asarray(u, dtype=float))
    hit = np.abs(z) > LATENT_CLAMP
    if np.any(hit):
        if warn:
            warnings.warn(
                f"{int(np.count_nonzero(hit))} normal score(s) clamped to +-{LATENT_CLAMP}",
                LatentClampWarning,
                stacklevel=3,
            )
        z = np.clip(z, -LATENT_CLAMP, LATENT_CLAMP)
    return z


def continuous_to_latent(y, margin: GammaMixture | BetaMixture, *, warn: bool = True):
    """Normal score ``Phi^-1(F(y))`` of a continuous attribute value.

    Scores beyond +-8 (CDF values within about 1e-15 of 0 or 1) are clamped
    and a :class:`LatentClampWarning` is issued unless ``warn`` is False.
    """
    if not isinstance(margin, (GammaMixture, BetaMixture)):
        raise ParameterError("continuous_to_latent needs a gamma or beta mixture")
    y = np.asarray(y, dtype=float)
    margin._check_domain(y, closed=False)
    z = _clamp_scores(mixture_cdf(y, margin), warn=warn)
    return z if z.ndim else float(z)


def ordinal_latent_bounds(category: int, model: OrdinalModel) -> LatentBounds:
    """Latent interval that produces ``category`` (1-based)."""
    c = int(category)
    if not 1 <= c <= model.n_categories:
        raise ParameterError(f"category must lie in 1..{model.n_categories}, got {category}")
    return LatentBounds(float(model.lower_latent(c)), float(model.upper_latent(c)))


def latent_upper(y, margin: Margin, *, warn: bool = False) -> np.ndarray:
    """Latent value at which the copula CDF is evaluated for attribute ``y``.

    Points at or beyond the ends of the support map to -inf/+inf exactly so
    that the corresponding coordinate drops out of the normal CDF.  Ordinal
    values use the upper threshold of their category.
    """
    y = np.asarray(y, dtype=float)
    if isinstance(margin, OrdinalModel):
        idx = np.clip(np.floor(y), 0, margin.n_categories).astype(int)
        ext = np.concatenate(([-np.inf], margin.thresholds, [np.inf]))
        return ext[idx]
    u = np.asarray(mixture_cdf(y, margin), dtype=float)
    z = _clamp_scores(u, warn=warn)
    z = np.where(u >= 1.0, np.inf, z)
    return np.where(u <= 0.0, -np.inf, z)


def copula_log_density(y_star, corr) -> np.ndarray | float:
    """Gaussian copula log density ``-log|G|/2 - z'(G^-1 - I)z/2``.

    ``y_star`` may hold several latent vectors along leading axes.
    """
    g = _as_matrix(corr)
    z = np.asarray(y_star, dtype=float)
    if z.shape[-1] != g.shape[0]:
        raise ParameterError(f"latent vectors have length {z.shape[-1]}, matrix is {g.shape[0]}x{g.shape[0]}")
    if not np.all(np.isfinite(z)):
        raise ParameterError("latent vector must be finite")
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= 0 or eig[-1] / eig[0] > COND_MAX:
        raise NumericError(f"correlation matrix is ill-conditioned (eigenvalues {eig[0]:.3e}..{eig[-1]:.3e})")
    chol = np.linalg.cholesky(g)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    w = np.linalg.solve(chol, np.moveaxis(z[..., None], -2, 0).reshape(g.shape[0], -1))
    quad = np.sum(w * w, axis=0).reshape(z.shape[:-1]) - np.sum(z * z, axis=-1)
    out = -0.5 * logdet - 0.5 * quad
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class MvnResult:
    """Normal orthant probability with its error estimate."""

    value: float
    error: float
    n_points: int


def _check_pd(g: np.ndarray) -> None:
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ParameterError("covariance argument must be a square matrix")
    if not np.allclose(g, g.T, atol=1e-12):
        raise ParameterError("correlation matrix must be symmetric")
    if g.shape[0] and np.linalg.eigvalsh(g)[0] <= PD_EIG_MIN:
        raise ParameterError("correlation matrix is not positive definite")


def _mvn_qmc(b: np.ndarray, g: np.ndarray, tol: float, seed) -> MvnResult:
    d = b.size
    # integrate the tightest limits first; that reduces the variance
    order = np.argsort(b, kind="stable")
    b = b[order]
    g = g[np.ix_(order, order)]
    chol = np.linalg.cholesky(g)
    rng = np.random.default_rng(seed)
    shifts = rng.random((_QMC_SHIFTS, d - 1))
    alpha = np.sqrt(np.array(_PRIMES[: d - 1])) % 1.0
    n = _QMC_N0
    while True:
        est = kernels.mvn_qmc(b, chol, n, shifts, alpha)
        err = _QMC_ERR_FACTOR * est.std(ddof=1) / np.sqrt(_QMC_SHIFTS)
        if err <= tol or n >= _QMC_NMAX:
            return MvnResult(float(np.clip(est.mean(), 0.0, 1.0)), float(err), 2 * n * _QMC_SHIFTS)
        n *= 2


def mvn_cdf(x, corr, tol: float | None = None, seed=0, *, full_output: bool = False):
    """``P(Z <= x)`` for ``Z ~ N(0, corr)`` in up to four dimensions.

    Entries of ``x`` may be infinite.  Dimensions one and two use a
    deterministic quadrature accurate to about 1e-15.  Dimensions three and
    four use a randomised lattice rule whose sample size doubles until three
    standard errors fall below ``tol``; ``seed`` makes the result
    reproducible.  With ``full_output`` a :class:`MvnResult` is returned.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = _as_matrix(corr)
    if x.ndim != 1 or g.shape != (x.size, x.size):
        raise ParameterError(f"limits of length {x.size} do not match a {g.shape} matrix")
    if x.size > 4:
        raise ParameterError("mvn_cdf supports at most four dimensions")
    if np.any(np.isnan(x)):
        raise ParameterError("limits must not be NaN")
    _check_pd(g)
    if tol is None:
        tol = TOL_HIGH_DIM if x.size >= 3 else TOL_LOW_DIM
    if np.any(x == -np.inf):
        res = MvnResult(0.0, 0.0, 0)
    else:
        keep = np.flatnonzero(x < np.inf)
        b = x[keep]
        sub = g[np.ix_(keep, keep)]
        if b.size == 0:
            res = MvnResult(1.0, 0.0, 0)
        elif b.size == 1:
            res = MvnResult(float(special.ndtr(b[0])), 0.0, 0)
        elif b.size == 2:
            res = MvnResult(float(kernels.bvn_cdf(b[0], b[1], float(sub[0, 1]))), 1e-15, 0)
        else:
            res = _mvn_qmc(b, sub, tol, seed)
    return res if full_output else res.value


def _latent_point(y, model: JointModel) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (4,):
        raise ParameterError("joint_cdf needs one value per attribute")
    return np.array([float(latent_upper(v, m)) for v, m in zip(y, model.margins)])


def joint_cdf(y, model: JointModel, tol: float | None = None, seed=0) -> float:
    """``F(y1, y2, y3, y4)`` under the copula model."""
    return mvn_cdf(_latent_point(y, model), model.correlation, tol=tol, seed=seed)


def bivariate_cdf(y_i, y_j, pair: tuple[int, int], model: JointModel):
    """Two-attribute marginal CDF, vectorised over ``y_i`` and ``y_j``."""
    i, j = (int(p) for p in pair)
    if i == j or not (0 <= i < 4 and 0 <= j < 4):
        raise ParameterError(f"pair must name two distinct attributes in 0..3, got {pair}")
    zi = latent_upper(y_i, model.margins[i])
    zj = latent_upper(y_j, model.margins[j])
    out = kernels.bvn_cdf(zi, zj, float(model.correlation[i, j]))
    return out if out.ndim else float(out)


def sample_joint(model: JointModel, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` records by inverse transform of correlated normal scores.

    Returns an ``(n, 4)`` float array; the ordinal columns hold integer
    category codes.
    """
    if n < 1:
        raise ParameterError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 4)) @ model.correlation.cholesky.T
    u = special.ndtr(z)
    # keep u strictly inside (0, 1) so the quantile is defined
    tiny = np.finfo(float).tiny
    u = np.clip(u, tiny, 1.0 - np.finfo(float).epsneg)
    out = np.empty((n, 4))
    for j, margin in enumerate(model.margins):
        out[:, j] = marginal_quantile(u[:, j], margin)
    return out
