"""Marginal model families: gamma mixture (income), beta mixture (health)
and latent-threshold ordinal models (education, happiness).

All parameter containers are immutable.  Array arguments are accepted
everywhere and evaluated elementwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, NumericError, ParameterError

__all__ = [
    "GammaMixture",
    "BetaMixture",
    "OrdinalModel",
    "mixture_pdf",
    "mixture_logpdf",
    "mixture_cdf",
    "ordinal_category_probs",
    "marginal_quantile",
    "marginal_mean",
]

_SIMPLEX_TOL = 1e-12
QUANTILE_TOL = 1e-10
QUANTILE_MAXITER = 200


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=1)
    arr.setflags(write=False)
    return arr


def _check_simplex(w: np.ndarray) -> None:
    if w.ndim != 1 or w.size == 0:
        raise ParameterError("mixture weights must be a non-empty vector")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ParameterError(f"mixture weights must be nonnegative, got {w}")
    if abs(w.sum() - 1.0) > _SIMPLEX_TOL:
        raise ParameterError(f"mixture weights must sum to 1, got sum {w.sum()!r}")


class _Mixture:
    weights: np.ndarray

    @property
    def n_components(self) -> int:
        return self.weights.size

    def _sort(self, key: np.ndarray, *others: str) -> None:
        order = np.argsort(key, kind="stable")
        if np.any(order != np.arange(order.size)):
            object.__setattr__(self, "weights", _frozen(self.weights[order]))
            for name in others:
                object.__setattr__(self, name, _frozen(getattr(self, name)[order]))

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in self.__dataclass_fields__
        )

    def __hash__(self):
        return hash(tuple(getattr(self, f).tobytes() for f in self.__dataclass_fields__))


@dataclass(frozen=True, eq=False)
class GammaMixture(_Mixture):
    """Finite mixture of gamma densities parameterised by mean and shape.

    Component ``k`` has density
    ``(nu/mu)^nu / Gamma(nu) * y^(nu-1) * exp(-nu*y/mu)``.  Components are
    kept sorted by increasing mean.
    """

    weights: np.ndarray
    means: np.ndarray
    shapes: np.ndarray

    def __post_init__(self):
        w, mu, nu = _frozen(self.weights), _frozen(self.means), _frozen(self.shapes)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "shapes", nu)
        _check_simplex(w)
        if not (mu.shape == nu.shape == w.shape):
            raise ParameterError("weights, means and shapes must have equal length")
        if np.any(~np.isfinite(mu)) or np.any(mu <= 0):
            raise ParameterError(f"gamma means must be positive, got {mu}")
        if np.any(~np.isfinite(nu)) or np.any(nu <= 0):
            raise ParameterError(f"gamma shapes must be positive, got {nu}")
        self._sort(mu, "means", "shapes")

    @property
    def rates(self) -> np.ndarray:
        return self.shapes / self.means

    def component_logpdf(self, y: np.ndarray) -> np.ndarray:
        """Log densities with shape ``y.shape + (K,)``."""
        y = np.asarray(y, dtype=float)[..., None]
        nu, rate = self.shapes, self.rates
        return nu * np.log(rate) - special.gammaln(nu) + (nu - 1.0) * np.log(y) - rate * y

    def component_cdf(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)[..., None]
        return special.gammainc(self.shapes, self.rates * y)

    def component_quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)[..., None]
        return special.gammaincinv(self.shapes, u) / self.rates

    def partial_mean(self, y: np.ndarray) -> np.ndarray:
        """``E[Y; Y <= y]`` in closed form."""
        y = np.asarray(y, dtype=float)[..., None]
        parts = self.means * special.gammainc(self.shapes + 1.0, self.rates * y)
        return parts @ self.weights

    def mean(self) -> float:
        return float(self.weights @ self.means)

    def _check_domain(self, y: np.ndarray, *, closed: bool) -> None:
        bad = ~np.isfinite(y) | ((y < 0) if closed else (y <= 0))
        if closed:
            bad &= ~np.isposinf(y)
        if np.any(bad):
            raise DomainError(
                f"gamma mixture support is {'[0, inf]' if closed else '(0, inf)'}; "
                f"got {np.asarray(y)[bad][:5]}"
            )


@dataclass(frozen=True, eq=False)
class BetaMixture(_Mixture):
    """Finite mixture of beta densities parameterised by precision ``s``
    and mean ``m`` (``alpha = s*m``, ``beta = s*(1-m)``).  Components are
    kept sorted by increasing mean.
    """

    weights: np.ndarray
    precisions: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        w, s, m = _frozen(self.weights), _frozen(self.precisions), _frozen(self.means)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "precisions", s)
        object.__setattr__(self, "means", m)
        _check_simplex(w)
        if not (s.shape == m.shape == w.shape):
            raise ParameterError("weights, precisions and means must have equal length")
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise ParameterError(f"beta precisions must be positive, got {s}")
        if np.any(~np.isfinite(m)) or np.any((m <= 0) | (m >= 1)):
            raise ParameterError(f"beta means must lie in (0, 1), got {m}")
        self._sort(m, "precisions", "means")

    @property
    def alphas(self) -> np.ndarray:
        return self.precisions * self.means

    @property
    def betas(self) -> np.ndarray:
        return self.precisions * (1.0 - self.means)

    def component_logpdf(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)[..., None]
        a, b = self.alphas, self.betas
        return (
            special.gammaln(self.precisions)
            - special.gammaln(a)
            - special.gammaln(b)
            + (a - 1.0) * np.log(y)
            + (b - 1.0) * np.log1p(-y)
        )

    def component_cdf(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)[..., None]
        return special.betainc(self.alphas, self.betas, y)

    def component_quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)[..., None]
        return special.betaincinv(self.alphas, self.betas, u)

    def partial_mean(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)[..., None]
        parts = self.means * special.betainc(self.alphas + 1.0, self.betas, y)
        return parts @ self.weights

    def mean(self) -> float:
        return float(self.weights @ self.means)

    def _check_domain(self, y: np.ndarray, *, closed: bool) -> None:
        if closed:
            bad = ~(np.isfinite(y) & (y >= 0) & (y <= 1))
        else:
            bad = ~(np.isfinite(y) & (y > 0) & (y < 1))
        if np.any(bad):
            raise DomainError(
                f"beta mixture support is {'[0, 1]' if closed else '(0, 1)'}; "
                f"got {np.asarray(y)[bad][:5]}"
            )


@dataclass(frozen=True, eq=False)
class OrdinalModel:
    """Ordinal variable generated by thresholding a standard normal latent.

    Category ``s`` (1-based) is observed when ``tau[s-1] < Y* <= tau[s]``
    with ``tau[0] = -inf`` and ``tau[L] = +inf``.
    """

    thresholds: np.ndarray
    _probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        tau = _frozen(self.thresholds)
        object.__setattr__(self, "thresholds", tau)
        if tau.ndim != 1 or tau.size == 0:
            raise ParameterError("an ordinal model needs at least one threshold")
        if np.any(~np.isfinite(tau)):
            raise ParameterError(f"thresholds must be finite, got {tau}")
        if np.any(np.diff(tau) <= 0):
            raise ParameterError(f"thresholds must be strictly increasing, got {tau}")
        cum = np.concatenate(([0.0], special.ndtr(tau), [1.0]))
        probs = np.diff(cum)
        if np.any(probs <= 0) or np.any(probs >= 1):
            raise ParameterError(f"category probabilities must lie in (0, 1), got {probs}")
        object.__setattr__(self, "_probs", _frozen(probs))

    @property
    def n_categories(self) -> int:
        return self.thresholds.size + 1

    def category_probs(self) -> np.ndarray:
        return self._probs

    def cdf(self, category) -> np.ndarray:
        """``P(Y <= category)``; categories below 1 give 0, at or above L give 1."""
        c = np.asarray(category)
        cum = np.concatenate(([0.0], np.cumsum(self._probs[:-1]), [1.0]))
        idx = np.clip(np.floor(c).astype(int), 0, self.n_categories)
        return cum[idx]

    def upper_latent(self, category) -> np.ndarray:
        """Latent upper bound ``tau[category]`` (``+inf`` for the top category)."""
        ext = np.concatenate(([-np.inf], self.thresholds, [np.inf]))
        return ext[np.asarray(category, dtype=int)]

    def lower_latent(self, category) -> np.ndarray:
        ext = np.concatenate(([-np.inf], self.thresholds, [np.inf]))
        return ext[np.asarray(category, dtype=int) - 1]

    def quantile(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        cum = np.cumsum(self._probs)
        cum[-1] = 1.0
        return np.searchsorted(cum, u, side="left") + 1

    def mean(self) -> float:
        return float(np.arange(1, self.n_categories + 1) @ self._probs)

    def __eq__(self, other):
        if not isinstance(other, OrdinalModel):
            return NotImplemented
        return np.array_equal(self.thresholds, other.thresholds)

    def __hash__(self):
        return hash(self.thresholds.tobytes())


Mixture = GammaMixture | BetaMixture
Margin = GammaMixture | BetaMixture | OrdinalModel


def mixture_logpdf(y, params: Mixture) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    params._check_domain(y, closed=False)
    comp = params.component_logpdf(y)
    with np.errstate(divide="ignore"):
        logw = np.log(params.weights)
    return special.logsumexp(comp + logw, axis=-1)


def mixture_pdf(y, params: Mixture):
    """Mixture density; raises :class:`DomainError` outside the open support."""
    out = np.exp(mixture_logpdf(y, params))
    return out if out.ndim else float(out)


def mixture_cdf(y, params: Mixture):
    """Mixture distribution function on the closed support."""
    if not isinstance(params, (GammaMixture, BetaMixture)):
        raise ParameterError(f"expected a gamma or beta mixture, got {type(params).__name__}")
    y = np.asarray(y, dtype=float)
    params._check_domain(y, closed=True)
    out = params.component_cdf(y) @ params.weights
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def ordinal_category_probs(model: OrdinalModel) -> np.ndarray:
    return model.category_probs().copy()


def _mixture_quantile(u: np.ndarray, params: Mixture) -> np.ndarray:
    comp_q = params.component_quantile(u)
    lo = comp_q.min(axis=-1)
    hi = comp_q.max(axis=-1)
    if params.n_components == 1:
        return hi
    x = 0.5 * (lo + hi)
    done = np.zeros(u.shape, dtype=bool)
    for _ in range(QUANTILE_MAXITER):
        f = params.component_cdf(x) @ params.weights
        err = f - u
        done |= np.abs(err) <= QUANTILE_TOL
        # the bracket cannot shrink further in floating point
        done |= (hi - lo) <= 4 * np.spacing(np.maximum(np.abs(hi), 1e-300))
        if np.all(done):
            return x
        lo = np.where(err < 0, x, lo)
        hi = np.where(err > 0, x, hi)
        dens = np.exp(params.component_logpdf(x)) @ params.weights
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - err / dens
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        x = np.where(done, x, np.where(ok, newton, 0.5 * (lo + hi)))
    raise NumericError(
        f"quantile solver did not converge in {QUANTILE_MAXITER} iterations; "
        f"max |F(y)-u| = {np.max(np.abs(err[~done])):.3e}"
    )


def marginal_quantile(u, params: Margin):
    """Inverse distribution function.  Ordinal margins return the smallest
    category whose cumulative probability reaches ``u``."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("quantile levels must lie strictly inside (0, 1)")
    if isinstance(params, OrdinalModel):
        out = params.quantile(u)
        return out if out.ndim else int(out)
    out = _mixture_quantile(u, params)
    return out if out.ndim else float(out)


def marginal_mean(params: Margin) -> float:
    return params.mean()
