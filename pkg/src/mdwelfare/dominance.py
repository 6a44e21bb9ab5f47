"""Stochastic-dominance conditions on finite evaluation grids.

All comparisons are made on ``Delta = (A) - (B)`` for CDF values (FSD-type
conditions) or integrated CDFs ``H`` (SSD-type conditions).  ``A``
dominates when ``Delta <= eps`` at every point and ``Delta < -eps`` at
least once; ``B`` dominates in the mirrored case.

Per-model grid quantities (latent grid transforms, marginal and bivariate
CDF surfaces, four-variate CDF slices) are computed once per model and
cached in a :class:`ModelGrid`, so a draw pair can be checked against many
criteria without recomputation.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from . import kernels
from .copula import JointModel, latent_upper
from .errors import ParameterError
from .margins import mixture_cdf

__all__ = [
    "EPS",
    "Outcome",
    "DominanceVerdict",
    "DominanceReport",
    "EvaluationGrid",
    "PovertyLines",
    "ModelGrid",
    "CRITERIA",
    "build_default_grid",
    "restrict",
    "decide",
    "fsd_univariate",
    "ssd_univariate",
    "fsd_bivariate",
    "ssd_bivariate",
    "u3_bivariate",
    "u1_fourvariate",
    "u2_condition",
    "u3_condition",
    "h_income",
    "h_curve",
    "evaluate_pair",
    "posterior_dominance_probability",
]

EPS = 1e-10
INCOME_RANGE = (5495.0, 150000.0)
N_GRID = 99
ATTR_NAMES = ("income", "health", "education", "happiness")

# quadrature layout for the four-variate CDF slices
_GL_ORDER = 3
_MAX_CELL = 0.5
_TAIL = 8.5


class Outcome(str, Enum):
    A_DOMINATES = "A_dominates"
    B_DOMINATES = "B_dominates"
    NEITHER = "neither"


@dataclass(frozen=True)
class DominanceVerdict:
    """Verdict plus the extreme differences seen while deciding it."""

    outcome: Outcome
    max_delta: float = float("nan")
    min_delta: float = float("nan")
    n_points: int = 0
    scan_skipped: bool = False

    def __eq__(self, other):
        if isinstance(other, DominanceVerdict):
            return self.outcome == other.outcome
        if isinstance(other, (Outcome, str)):
            return self.outcome == Outcome(other)
        return NotImplemented

    def __hash__(self):
        return hash(self.outcome)


# -- grids ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EvaluationGrid:
    """Points at which dominance conditions are checked.

    With ``augment=True`` the continuous axes are extended by their upper
    supports (income +inf, health 1) so that bivariate and four-variate
    surfaces contain the lower-dimensional margins.  Restricted grids are
    never augmented.
    """

    income: np.ndarray
    health: np.ndarray
    education: np.ndarray
    happiness: np.ndarray
    supports: tuple = (np.inf, 1.0, 5, 5)
    augment: bool = True

    def __post_init__(self):
        for name, dt in (("income", float), ("health", float), ("education", np.int64), ("happiness", np.int64)):
            arr = np.array(getattr(self, name), dtype=dt, ndmin=1)
            if arr.size == 0:
                raise ParameterError(f"{name} axis is empty")
            if np.any(np.diff(arr) <= 0):
                raise ParameterError(f"{name} axis must be strictly increasing")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.income <= 0) or not np.all(np.isfinite(self.income)):
            raise ParameterError("income grid must be positive and finite")
        if np.any((self.health <= 0) | (self.health >= 1)):
            raise ParameterError("health grid must lie inside (0, 1)")
        l3, l4 = int(self.supports[2]), int(self.supports[3])
        if self.education[0] < 1 or self.education[-1] > l3 or self.happiness[0] < 1 or self.happiness[-1] > l4:
            raise ParameterError("category grid outside 1..L")

    def axis(self, j: int) -> np.ndarray:
        """Evaluation points of attribute ``j`` (0-based), including the
        upper support when the grid is augmented."""
        base = (self.income, self.health, self.education, self.happiness)[j]
        if self.augment and j < 2:
            return np.append(base.astype(float), self.supports[j])
        return base.astype(float)

    def h_axis(self, j: int) -> np.ndarray:
        """Points at which integrated CDFs are evaluated (finite only)."""
        ax = self.axis(j)
        return ax[np.isfinite(ax)]

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.income, self.health, self.education, self.happiness):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        h.update(json.dumps([float(s) if np.isfinite(s) else "inf" for s in self.supports]).encode())
        h.update(b"augment" if self.augment else b"plain")
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "income": self.income.tolist(),
            "health": self.health.tolist(),
            "education": self.education.tolist(),
            "happiness": self.happiness.tolist(),
            "augment": self.augment,
        }


def build_default_grid() -> EvaluationGrid:
    """99 log-spaced incomes on [5495, 150000], health 0.01..0.99, categories 1..5."""
    income = np.geomspace(*INCOME_RANGE, N_GRID)
    income[0], income[-1] = INCOME_RANGE
    health = np.arange(1, 100) / 100.0
    cats = np.arange(1, 6)
    return EvaluationGrid(income, health, cats, cats.copy())


@dataclass(frozen=True)
class PovertyLines:
    """Poverty lines: income, health score and the two category cut-offs."""

    income: float
    health: float = 0.5
    education: int = 2
    happiness: int = 2

    @classmethod
    def default(cls, grid: EvaluationGrid | None = None, income_target: float = 20000.0) -> "PovertyLines":
        """Income line at the grid point nearest ``income_target``."""
        grid = grid or build_default_grid()
        z1 = float(grid.income[np.argmin(np.abs(grid.income - income_target))])
        return cls(z1)

    def as_tuple(self) -> tuple:
        return (self.income, self.health, self.education, self.happiness)


def _on_axis(value, axis, name) -> int:
    hits = np.flatnonzero(np.isclose(axis, value, rtol=1e-12, atol=0.0))
    if hits.size == 0:
        raise ParameterError(f"{name} line {value} is not a grid point")
    return int(hits[0])


def restrict(grid: EvaluationGrid, lines: PovertyLines) -> EvaluationGrid:
    """Truncate every axis to the points at or below its poverty line.

    Lines at or beyond every upper support leave the grid unchanged.
    """
    if all(line >= sup for line, sup in zip(lines.as_tuple(), grid.supports)):
        return grid
    idx = []
    for j, (name, line) in enumerate(zip(ATTR_NAMES, lines.as_tuple())):
        base = (grid.income, grid.health, grid.education, grid.happiness)[j]
        if j >= 2 and line >= grid.supports[j]:
            idx.append(base.size - 1)
        elif j == 0 and np.isinf(line):
            idx.append(base.size - 1)
        elif j == 1 and line >= 1.0:
            idx.append(base.size - 1)
        else:
            idx.append(_on_axis(line, base, name))
    return EvaluationGrid(
        grid.income[: idx[0] + 1], grid.health[: idx[1] + 1],
        grid.education[: idx[2] + 1], grid.happiness[: idx[3] + 1],
        grid.supports, augment=False,
    )


# -- decision rules ---------------------------------------------------------

def decide(delta, tol=EPS) -> DominanceVerdict:
    """Dominance verdict from differences ``A - B`` with a (per-point) tolerance."""
    d = np.asarray(delta, dtype=float)
    if np.any(np.isnan(d)):
        raise ParameterError("differences contain NaN")
    return _Cond.of(d, tol).verdict()


@dataclass(frozen=True)
class _Cond:
    """Weak/strict flags of one condition set in both directions."""

    weak_a: bool
    strict_a: bool
    weak_b: bool
    strict_b: bool
    max_delta: float
    min_delta: float
    n_points: int

    @classmethod
    def of(cls, delta, tol=EPS) -> "_Cond":
        d = np.asarray(delta, dtype=float).ravel()
        t = np.broadcast_to(np.asarray(tol, dtype=float), np.shape(delta)).ravel() if np.ndim(tol) else tol
        if d.size == 0:
            return cls(True, False, True, False, float("-inf"), float("inf"), 0)
        return cls(bool(np.all(d <= t)), bool(np.any(d < -t)), bool(np.all(d >= -t)), bool(np.any(d > t)),
                   float(d.max()), float(d.min()), d.size)

    def verdict(self) -> DominanceVerdict:
        return _verdict_of([self])


def _verdict_of(conds: list[_Cond], scan_skipped: bool = False) -> DominanceVerdict:
    n = sum(c.n_points for c in conds)
    mx = max((c.max_delta for c in conds), default=float("nan"))
    mn = min((c.min_delta for c in conds), default=float("nan"))
    if all(c.weak_a for c in conds) and any(c.strict_a for c in conds):
        out = Outcome.A_DOMINATES
    elif all(c.weak_b for c in conds) and any(c.strict_b for c in conds):
        out = Outcome.B_DOMINATES
    else:
        out = Outcome.NEITHER
    return DominanceVerdict(out, mx, mn, n, scan_skipped)


def _check_same(f_a, f_b):
    a, b = np.asarray(f_a, dtype=float), np.asarray(f_b, dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"CDF arrays differ in shape: {a.shape} vs {b.shape}")
    return a, b


def h_curve(f, x, kind: str = "continuous") -> np.ndarray:
    """Integrated CDF at each point of ``x``.

    Continuous axes use the trapezoid rule on the raw scale with ``F(0) = 0``
    prepended; ordinal axes sum the CDF over categories (unit spacing).
    The last axis of ``f`` runs along ``x``.
    """
    f = np.asarray(f, dtype=float)
    if kind == "ordinal":
        return np.cumsum(f, axis=-1)
    x = np.asarray(x, dtype=float)
    xs = np.concatenate(([0.0], x))
    fs = np.concatenate((np.zeros(f.shape[:-1] + (1,)), f), axis=-1)
    pieces = 0.5 * (fs[..., 1:] + fs[..., :-1]) * np.diff(xs)
    return np.cumsum(pieces, axis=-1)


def _h_tol(x, kind: str) -> np.ndarray:
    # a pointwise CDF slack of EPS integrates to at most EPS * x
    x = np.asarray(x, dtype=float)
    return EPS * np.maximum(1.0, x)


def fsd_univariate(f_a, f_b) -> DominanceVerdict:
    a, b = _check_same(f_a, f_b)
    return _Cond.of(a - b).verdict()


def ssd_univariate(f_a, f_b, x, kind: str = "continuous") -> DominanceVerdict:
    """SSD from CDF values on the axis ``x`` (``kind`` is "continuous" or "ordinal")."""
    a, b = _check_same(f_a, f_b)
    x = np.asarray(x, dtype=float)
    if x.shape != a.shape[-1:]:
        raise ParameterError("axis length does not match the CDF arrays")
    return _Cond.of(h_curve(a, x, kind) - h_curve(b, x, kind), _h_tol(x, kind)).verdict()


# -- per-model grid cache and four-variate quadrature ---------------------------------------------------

def _gl_nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _axis_nodes(z: np.ndarray):
    """Quadrature nodes on ``(-TAIL, z_k]`` cells for cumulative integration.

    ``z`` holds finite, nondecreasing latent values (clipped to +-TAIL).
    Returns nodes, weights and the index of the grid point closing the cell
    that holds each node; empty cells (tied values) get no nodes.
    """
    edges = np.concatenate(([-_TAIL], np.clip(z, -_TAIL, _TAIL)))
    width = np.maximum(np.diff(edges), 0.0)
    m = np.where(width > 0, np.ceil(width / _MAX_CELL), 0).astype(np.int64)
    h = np.repeat(width / np.maximum(m, 1), m)
    first = np.repeat(np.cumsum(m) - m, m)
    starts = np.repeat(edges[:-1], m) + h * (np.arange(m.sum()) - first)
    u, w = _gl_nodes(_GL_ORDER)
    nodes = (starts[:, None] + h[:, None] * u[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    cells = np.repeat(np.repeat(np.arange(z.size), m), u.size)
    return nodes, weights, cells


class ModelGrid:
    """Cached CDF quantities of one model on one evaluation grid."""

    def __init__(self, model: JointModel, grid: EvaluationGrid):
        self.model = model
        self.grid = grid
        self.gamma = model.correlation.matrix
        # latent transforms of every grid point, computed once
        self.z = [np.asarray(latent_upper(grid.axis(j), m), dtype=float) for j, m in enumerate(model.margins)]
        self._marg = {}
        self._biv = {}
        self._four = {}
        self._geom = None

    # marginals
    def marginal(self, j: int) -> np.ndarray:
        if j not in self._marg:
            m = self.model.margins[j]
            ax = self.grid.axis(j)
            if j < 2:
                f = np.asarray(mixture_cdf(ax, m), dtype=float)
            else:
                f = np.asarray(m.cdf(ax.astype(int)), dtype=float)
            self._marg[j] = f
        return self._marg[j]

    def h_marginal(self, j: int) -> np.ndarray:
        x = self.grid.h_axis(j)
        f = self.marginal(j)[: x.size]
        return h_curve(f, x, "continuous" if j < 2 else "ordinal")

    # bivariate surfaces F(y1, yj)
    def bivariate(self, j: int) -> np.ndarray:
        if j not in self._biv:
            self._biv[j] = kernels.bvn_cdf(self.z[0][:, None], self.z[j][None, :], float(self.gamma[0, j]))
        return self._biv[j]

    def h_bivariate(self, j: int) -> np.ndarray:
        """``H_1(y1; yj)`` by trapezoid over the finite income points, shape (n1, nj)."""
        x = self.grid.h_axis(0)
        f = self.bivariate(j)[: x.size, :]
        return h_curve(f.T, x, "continuous").T

    # four-variate slices F(y1, y2, c3, c4)
    def _layout(self):
        if self._geom is None:
            g = self.gamma
            fin1, fin2 = self.z[0] < np.inf, self.z[1] < np.inf
            n1, w1, cell1 = _axis_nodes(self.z[0][fin1])
            n2, w2, cell2 = _axis_nodes(self.z[1][fin2])
            r12 = g[0, 1]
            q = 1.0 - r12 * r12
            dens = np.exp(-(n1[:, None] ** 2 - 2 * r12 * n1[:, None] * n2[None, :] + n2[None, :] ** 2)
                          / (2 * q)) / (2 * np.pi * np.sqrt(q))
            weights = np.ascontiguousarray(dens * w1[:, None] * w2[None, :])
            inv_sqrt = 1.0 / np.sqrt(2 * np.pi)
            edge = {
                # (Z3, Z4) given one continuous latent, for the rows/columns at +inf
                0: (n1, w1 * inv_sqrt * np.exp(-0.5 * n1 ** 2), cell1, _conditional(g, [0])),
                1: (n2, w2 * inv_sqrt * np.exp(-0.5 * n2 ** 2), cell2, _conditional(g, [1])),
            }
            self._geom = (fin1, fin2, n1, cell1, n2, cell2, weights, _conditional(g, [0, 1]), edge)
        return self._geom

    def fourvariate(self, c3_index: int, c4_index: int) -> np.ndarray:
        """CDF over the (income, health) axes at the given category-axis positions.

        Finite grid points use cumulative cell quadrature over (z1, z2).  Rows
        and columns whose latent value is +inf (the augmented supports) are
        lower-dimensional CDFs and are integrated over the remaining
        continuous latent only, so models that agree on those sub-margins get
        identical values there.
        """
        key = (c3_index, c4_index)
        if key in self._four:
            return self._four[key]
        t3, t4 = float(self.z[2][c3_index]), float(self.z[3][c4_index])
        n1z, n2z = self.z[0].size, self.z[1].size
        if t3 == np.inf and t4 == np.inf:
            out = self.bivariate(1)
        elif t3 == -np.inf or t4 == -np.inf:
            out = np.zeros((n1z, n2z))
        else:
            fin1, fin2, n1, cell1, n2, cell2, weights, (coef, s3, s4, rho), edge = self._layout()
            k1, k2 = int(fin1.sum()), int(fin2.sum())
            out = np.empty((n1z, n2z))
            cells = kernels.grid_cell_integrals(n1, cell1, n2, cell2, weights, k1, k2,
                                                coef[0].copy(), coef[1].copy(), s3, s4, rho, t3, t4) \
                if k1 and k2 else np.zeros((k1, k2))
            out[:k1, :k2] = np.cumsum(np.cumsum(cells, axis=0), axis=1)
            for axis, k in ((1, k2), (0, k1)):
                nodes, w, cell, (c, a3, a4, r) = edge[axis]
                h = kernels.bvn_cdf((t3 - c[0, 0] * nodes) / a3, (t4 - c[1, 0] * nodes) / a4, r)
                line = np.cumsum(np.bincount(cell, weights=w * h, minlength=k))[:k]
                if axis == 1:
                    out[k1:, :k2] = line[None, :]
                else:
                    out[:k1, k2:] = line[:, None]
            out[k1:, k2:] = kernels.bvn_cdf(t3, t4, float(self.gamma[2, 3]))
            np.clip(out, 0.0, 1.0, out=out)
        self._four[key] = out
        return out


def _conditional(g: np.ndarray, given: list[int]):
    """Law of (Z3, Z4) given the latents in ``given``.

    Returns the ``(2, len(given))`` mean coefficients, the two conditional
    standard deviations and the conditional correlation.
    """
    cross = g[np.ix_([2, 3], given)]
    coef = np.linalg.solve(g[np.ix_(given, given)], cross.T).T
    cond = g[2:, 2:] - coef @ cross.T
    s3, s4 = np.sqrt(cond[0, 0]), np.sqrt(cond[1, 1])
    rho = float(np.clip(cond[0, 1] / (s3 * s4), -1.0, 1.0))
    return coef, s3, s4, rho


def _as_grid(model_or_grid, grid: EvaluationGrid) -> ModelGrid:
    if isinstance(model_or_grid, ModelGrid):
        if model_or_grid.grid is not grid and model_or_grid.grid.digest() != grid.digest():
            raise ParameterError("cached model grid belongs to a different evaluation grid")
        return model_or_grid
    return ModelGrid(model_or_grid, grid)


# -- multivariate conditions -----------------------------------------------

def _pair_j(pair) -> int:
    i, j = pair
    if i != 0 or j not in (1, 2, 3):
        raise ParameterError(f"pairs must be (0, j) with j in 1..3 (income first), got {pair}")
    return j


def _fsd_biv_cond(ga: ModelGrid, gb: ModelGrid, j: int) -> _Cond:
    return _Cond.of(ga.bivariate(j) - gb.bivariate(j))


def _ssd_biv_cond(ga: ModelGrid, gb: ModelGrid, j: int) -> _Cond:
    x = ga.grid.h_axis(0)
    return _Cond.of(ga.h_bivariate(j) - gb.h_bivariate(j), _h_tol(x, "continuous")[:, None])


def _ssd_marg_cond(ga: ModelGrid, gb: ModelGrid, j: int) -> _Cond:
    x = ga.grid.h_axis(j)
    return _Cond.of(ga.h_marginal(j) - gb.h_marginal(j), _h_tol(x, "continuous" if j < 2 else "ordinal"))


def fsd_bivariate(model_a, model_b, pair, grid: EvaluationGrid) -> DominanceVerdict:
    """Bivariate FSD of (income, attribute j) over the 2-d grid."""
    j = _pair_j(pair)
    ga, gb = _as_grid(model_a, grid), _as_grid(model_b, grid)
    return _fsd_biv_cond(ga, gb, j).verdict()


def ssd_bivariate(model_a, model_b, pair, grid: EvaluationGrid) -> DominanceVerdict:
    """Income poverty-gap condition ``Delta H_1(y1; yj) <= 0`` alone."""
    j = _pair_j(pair)
    ga, gb = _as_grid(model_a, grid), _as_grid(model_b, grid)
    return _ssd_biv_cond(ga, gb, j).verdict()


def u3_bivariate(model_a, model_b, pair, grid: EvaluationGrid) -> DominanceVerdict:
    """``Delta H_1(y1; yj) <= 0`` together with ``Delta H_j(yj) <= 0``."""
    j = _pair_j(pair)
    ga, gb = _as_grid(model_a, grid), _as_grid(model_b, grid)
    return _verdict_of([_ssd_biv_cond(ga, gb, j), _ssd_marg_cond(ga, gb, j)])


def u2_condition(model_a, model_b, grid: EvaluationGrid) -> DominanceVerdict:
    """Conjunction of the three bivariate FSD conditions with income."""
    ga, gb = _as_grid(model_a, grid), _as_grid(model_b, grid)
    return _verdict_of([_fsd_biv_cond(ga, gb, j) for j in (1, 2, 3)])


def u3_condition(model_a, model_b, grid: EvaluationGrid) -> DominanceVerdict:
    """Marginal SSD of health, education and happiness plus the three
    income poverty-gap conditions."""
    ga, gb = _as_grid(model_a, grid), _as_grid(model_b, grid)
    conds = [_ssd_marg_cond(ga, gb, j) for j in (1, 2, 3)]
    conds += [_ssd_biv_cond(ga, gb, j) for j in (1, 2, 3)]
    return _verdict_of(conds)


def u1_fourvariate(model_a, model_b, grid: EvaluationGrid, *, exhaustive: bool = False) -> DominanceVerdict:
    """Four-variate FSD over all grid points.

    The four marginal conditions are necessary (on an augmented grid they
    are part of the four-variate one) and are checked first: a direction
    survives only if every marginal difference is weakly one-signed that
    way.  The four-variate scan runs only for surviving directions and
    stops once all of them are violated, unless ``exhaustive`` is set.
    The verdict is the same either way.
    """
    ga, gb = _as_grid(model_a, grid), _as_grid(model_b, grid)
    conds = [_Cond.of(ga.marginal(j) - gb.marginal(j)) for j in range(4)]
    live_a = all(c.weak_a for c in conds)
    live_b = all(c.weak_b for c in conds)
    if not (live_a or live_b) and not exhaustive:
        return _verdict_of(conds, scan_skipped=True)
    for a in range(grid.axis(2).size):
        for b in range(grid.axis(3).size):
            c = _Cond.of(ga.fourvariate(a, b) - gb.fourvariate(a, b))
            conds.append(c)
            live_a, live_b = live_a and c.weak_a, live_b and c.weak_b
            if not (live_a or live_b) and not exhaustive:
                return _verdict_of(conds)
    return _verdict_of(conds)


# -- income poverty gap -----------------------------------------------------

def h_income(model: JointModel, y1: float, y_j, pair, grid: EvaluationGrid | None = None,
             method: str = "trapezoid") -> float:
    """``H_1(y1; yj) = int_0^y1 F(r, yj) dr``, the income poverty gap below ``y1``
    among people with attribute ``j`` at or below ``yj``.

    ``method="trapezoid"`` integrates over the income grid points up to
    ``y1`` (which must be a grid point) with ``F(0, yj) = 0`` prepended; this
    is the form used by the dominance checks.  ``method="quadrature"``
    integrates the CDF accurately in ``log r`` and accepts any ``y1 > 0``.
    """
    j = _pair_j(pair)
    margin_j = model.margins[j]
    zj = float(latent_upper(y_j, margin_j))
    rho = float(model.correlation[0, j])
    if method == "trapezoid":
        grid = grid or build_default_grid()
        k = _on_axis(y1, grid.income, "income")
        x = grid.income[: k + 1]
        z1 = np.asarray(latent_upper(x, model.income), dtype=float)
        f = kernels.bvn_cdf(z1, zj, rho)
        return float(h_curve(f, x)[-1])
    if method != "quadrature":
        raise ParameterError(f"unknown method {method!r}")
    if y1 <= 0:
        return 0.0
    # r = y1 * exp(-t), t in [0, 60]; panels fine near t = 0 where the integrand is largest
    edges = np.concatenate(([0.0], np.geomspace(1e-3, 60.0, 48)))
    u, w = np.polynomial.legendre.leggauss(20)
    a, b = edges[:-1, None], edges[1:, None]
    t = (0.5 * (b - a) * u[None, :] + 0.5 * (a + b)).ravel()
    wt = (0.5 * (b - a) * w[None, :]).ravel()
    r = y1 * np.exp(-t)
    z1 = np.asarray(latent_upper(r, model.income), dtype=float)
    f = kernels.bvn_cdf(z1, zj, rho)
    return float(np.sum(wt * r * f))


# -- criteria and aggregation ----------------------------------------------

CRITERIA = ("fsd_uni", "ssd_uni", "fsd_biv", "ssd_biv", "u3_biv", "u1", "u2", "u3")


def _labels(criterion: str) -> list[tuple[str, int | None]]:
    if criterion in ("fsd_uni", "ssd_uni"):
        return [(f"{criterion}[{ATTR_NAMES[j]}]", j) for j in range(4)]
    if criterion in ("fsd_biv", "ssd_biv", "u3_biv"):
        return [(f"{criterion}[income,{ATTR_NAMES[j]}]", j) for j in (1, 2, 3)]
    if criterion in ("u1", "u2", "u3"):
        return [(criterion, None)]
    raise ParameterError(f"unknown criterion {criterion!r}; choose from {CRITERIA}")


def criterion_labels(criteria) -> list[str]:
    return [lab for c in criteria for lab, _ in _labels(c)]


def evaluate_pair(model_a, model_b, grid: EvaluationGrid, criteria=CRITERIA) -> dict[str, Outcome]:
    """Verdicts for one draw pair under every requested criterion."""
    if isinstance(model_a, JointModel) and model_a == model_b:
        # equal distributions: every difference is exactly zero
        return {lab: Outcome.NEITHER for lab in criterion_labels(criteria)}
    ga, gb = _as_grid(model_a, grid), _as_grid(model_b, grid)
    out = {}
    for crit in criteria:
        for label, j in _labels(crit):
            if crit == "fsd_uni":
                v = fsd_univariate(ga.marginal(j), gb.marginal(j))
            elif crit == "ssd_uni":
                v = _ssd_marg_cond(ga, gb, j).verdict()
            elif crit == "fsd_biv":
                v = _fsd_biv_cond(ga, gb, j).verdict()
            elif crit == "ssd_biv":
                v = _ssd_biv_cond(ga, gb, j).verdict()
            elif crit == "u3_biv":
                v = _verdict_of([_ssd_biv_cond(ga, gb, j), _ssd_marg_cond(ga, gb, j)])
            elif crit == "u1":
                v = u1_fourvariate(ga, gb, grid)
            elif crit == "u2":
                v = u2_condition(ga, gb, grid)
            else:
                v = u3_condition(ga, gb, grid)
            out[label] = v.outcome
    return out


@dataclass(frozen=True)
class DominanceReport:
    """Posterior dominance probabilities for one criterion."""

    criterion: str
    restricted: bool
    n_a: int
    n_b: int
    n_none: int
    grid_digest: str
    seeds: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.n_a, self.n_b, self.n_none) < 0 or self.m == 0:
            raise ParameterError("dominance counts must be nonnegative with a positive total")

    @property
    def m(self) -> int:
        return self.n_a + self.n_b + self.n_none

    @property
    def p_a(self) -> float:
        return self.n_a / self.m

    @property
    def p_b(self) -> float:
        return self.n_b / self.m

    @property
    def p_none(self) -> float:
        return self.n_none / self.m

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "restricted": self.restricted,
            "pA": self.p_a,
            "pB": self.p_b,
            "pNone": self.p_none,
            "M": self.m,
            "counts": {"A": self.n_a, "B": self.n_b, "none": self.n_none},
            "grid_digest": self.grid_digest,
            "seeds": dict(self.seeds),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _models(draws):
    if hasattr(draws, "draws"):
        return draws.draws
    return list(draws)


def posterior_dominance_probability(draws_a, draws_b, criterion, grid: EvaluationGrid,
                                    restricted: bool = False, lines: PovertyLines | None = None,
                                    seeds: dict | None = None, workers: int | None = None):
    """Share of paired draws under which each dominance outcome holds.

    Draw ``m`` of A is paired with draw ``m`` of B.  ``criterion`` may be a
    single name from :data:`CRITERIA` or a list of them; a dict of reports
    keyed by label is returned (a single report when exactly one label
    results).  With ``restricted=True`` the grid is first truncated at
    ``lines``.
    """
    models_a, models_b = _models(draws_a), _models(draws_b)
    if len(models_a) != len(models_b):
        raise ParameterError(f"draw counts differ: {len(models_a)} vs {len(models_b)}")
    if not models_a:
        raise ParameterError("no draws to evaluate")
    crits = [criterion] if isinstance(criterion, str) else list(criterion)
    if restricted:
        grid = restrict(grid, lines or PovertyLines.default(grid))
    labels = criterion_labels(crits)

    def job(m):
        return evaluate_pair(models_a[m], models_b[m], grid, crits)

    workers = workers if workers is not None else min(4, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(len(models_a))))
    else:
        results = [job(m) for m in range(len(models_a))]
    digest = grid.digest()
    reports = {}
    for lab in labels:
        outs = [r[lab] for r in results]
        reports[lab] = DominanceReport(
            lab, restricted,
            sum(o == Outcome.A_DOMINATES for o in outs),
            sum(o == Outcome.B_DOMINATES for o in outs),
            sum(o == Outcome.NEITHER for o in outs),
            digest, seeds or {},
        )
    if len(reports) == 1:
        return next(iter(reports.values()))
    return reports
