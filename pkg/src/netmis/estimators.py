"""Inverse-probability estimators of level means and contrasts, with conservative variances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exposure import agreement_levels
from .prob import PositivityError, ProbTables

HT = "HT"
HAJEK = "Hajek"
OK = "ok"
UNDEFINED = "undefined"


def estimator_tag(name: str) -> str:
    key = str(name).lower()
    if key in ("ht", "horvitz-thompson"):
        return HT
    if key in ("hajek", "h"):
        return HAJEK
    raise ValueError(f"unknown estimator {name!r}; expected 'HT' or 'Hajek'")


@dataclass(frozen=True, eq=False)
class ObservedData:
    z: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z)
        y = np.asarray(self.y, dtype=float)
        if z.ndim != 1 or y.ndim != 1:
            raise ValueError("z and y must be vectors")
        if z.shape != y.shape:
            raise ValueError(f"z has {z.size} entries but y has {y.size}")
        if not np.isin(z, (0, 1)).all():
            raise ValueError("z must be binary")
        if not np.all(np.isfinite(y)):
            raise ValueError("outcomes must be finite")
        object.__setattr__(self, "z", z.astype(np.uint8))
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.z.size


@dataclass(frozen=True)
class EstimateResult:
    point: float
    se: float | None
    n_effective: int
    estimator: str
    levels: tuple
    status: str = OK

    @property
    def defined(self) -> bool:
        return self.status == OK


def observed_levels(tables: ProbTables, z) -> np.ndarray:
    """Agreement level of each unit under the tables' network collection."""
    if not tables.nets or tables.mapping is None:
        raise ValueError("tables carry no networks; pass observed levels explicitly")
    return agreement_levels(tables.nets, tables.mapping, np.asarray(z)[None, :])[0]


def _check(data, tables):
    if data.n != tables.n:
        raise ValueError(f"data has {data.n} units but tables have {tables.n}")


def _weights(tables, k, sel):
    p = tables.individual[k]
    bad = sel & (p <= 0)
    if bad.any():
        raise PositivityError(int(np.flatnonzero(bad)[0]), tables.levels[k])
    w = np.zeros(p.shape)
    w[sel] = 1.0 / p[sel]
    return w


def ht_mean(data: ObservedData, tables: ProbTables, level, obs=None) -> EstimateResult:
    """Inverse-probability weighted mean over units selected at ``level``."""
    _check(data, tables)
    k = tables.level_index(level)
    obs = observed_levels(tables, data.z) if obs is None else obs
    sel = obs == k
    w = _weights(tables, k, sel)
    point = float(w @ data.y) / data.n
    return EstimateResult(point, None, int(sel.sum()), HT, (tables.levels[k],))


def hajek_mean(data: ObservedData, tables: ProbTables, level, obs=None) -> EstimateResult:
    """Ratio version of :func:`ht_mean`; undefined when no unit is selected."""
    _check(data, tables)
    k = tables.level_index(level)
    obs = observed_levels(tables, data.z) if obs is None else obs
    sel = obs == k
    w = _weights(tables, k, sel)
    total = w.sum()
    if total == 0:
        return EstimateResult(math.nan, None, 0, HAJEK, (tables.levels[k],), UNDEFINED)
    return EstimateResult(float(w @ data.y) / total, None, int(sel.sum()), HAJEK, (tables.levels[k],))


def _mean(tag):
    return ht_mean if tag == HT else hajek_mean


def effect(data: ObservedData, tables: ProbTables, l, k, estimator="HT", variance=False,
           obs=None) -> EstimateResult:
    """Contrast ``mu(l) - mu(k)``, optionally with a conservative standard error."""
    tag = estimator_tag(estimator)
    li, ki = tables.level_index(l), tables.level_index(k)
    names = (tables.levels[li], tables.levels[ki])
    obs = observed_levels(tables, data.z) if obs is None else obs
    a = _mean(tag)(data, tables, li, obs)
    if li == ki:
        return EstimateResult(0.0, 0.0 if variance else None, a.n_effective, tag, names, a.status)
    b = _mean(tag)(data, tables, ki, obs)
    n_eff = a.n_effective + b.n_effective
    if not (a.defined and b.defined):
        return EstimateResult(math.nan, None, n_eff, tag, names, UNDEFINED)
    se = None
    if variance:
        v = conservative_variance(data, tables, li, ki, tag, obs=obs)
        se = math.sqrt(v)
    return EstimateResult(a.point - b.point, se, n_eff, tag, names)


class VarianceParts:
    """Probability-only pieces of the variance estimator for a level pair.

    For each same-level table ``W[i, j] = (p_ij - p_i p_j) / p_ij`` off the
    diagonal where ``p_ij > 0`` (zero elsewhere), and zero-pair counts per row
    feed the inequality-based surrogate for never co-observed pairs.
    """

    def __init__(self, tables: ProbTables, l, k=None):
        self.l = tables.level_index(l)
        self.k = None if k is None else tables.level_index(k)
        if self.k == self.l:
            self.k = None
        self.n = tables.n
        self.p_l = tables.individual[self.l]
        self.W_l, self.zc_l = self._same(tables, self.l)
        if self.k is not None:
            self.p_k = tables.individual[self.k]
            self.W_k, self.zc_k = self._same(tables, self.k)
            self.W_lk, self.rz, self.cz = self._cross(tables, self.l, self.k)

    @staticmethod
    def _same(t, l):
        p = t.individual[l]
        pij = t.pairwise(l)
        zero = t.zero_mask(l)
        np.fill_diagonal(zero, False)
        W = np.zeros_like(pij)
        nz = ~zero
        np.fill_diagonal(nz, False)
        W[nz] = (pij[nz] - np.outer(p, p)[nz]) / pij[nz]
        return W, zero.sum(axis=1)

    @staticmethod
    def _cross(t, l, k):
        pl, pk = t.individual[l], t.individual[k]
        pij = t.pairwise(l, k)
        zero = t.zero_mask(l, k)
        W = np.zeros_like(pij)
        nz = ~zero
        np.fill_diagonal(nz, False)
        W[nz] = (pij[nz] - np.outer(pl, pk)[nz]) / pij[nz]
        return W, zero.sum(axis=1), zero.sum(axis=0)

    def _var_terms(self, p, W, zc, x, a):
        # x, a: (n, B)
        return ((1 - p)[:, None] * x * x).sum(0) + (x * (W @ x)).sum(0) + (zc[:, None] * a).sum(0)

    def evaluate(self, sel_l, y_l, sel_k=None, y_k=None) -> np.ndarray:
        """Variance estimates for a batch.

        ``sel_*`` are 0/1 selections and ``y_*`` the outcomes (or residuals),
        each of shape ``(n, B)``. Returns ``(B,)`` values clamped at zero.
        """
        x_l = sel_l * y_l / self.p_l[:, None]
        a_l = sel_l * y_l * y_l / self.p_l[:, None]
        total = self._var_terms(self.p_l, self.W_l, self.zc_l, x_l, a_l)
        if self.k is not None:
            x_k = sel_k * y_k / self.p_k[:, None]
            a_k = sel_k * y_k * y_k / self.p_k[:, None]
            total = total + self._var_terms(self.p_k, self.W_k, self.zc_k, x_k, a_k)
            cov = (x_l * (self.W_lk @ x_k)).sum(0)
            cov -= 0.5 * (self.rz[:, None] * a_l).sum(0) + 0.5 * (self.cz[:, None] * a_k).sum(0)
            total = total - 2 * cov
        return np.maximum(total / self.n ** 2, 0.0)


def variance_parts(tables: ProbTables, l, k=None) -> VarianceParts:
    cache = tables.__dict__.setdefault("_variance_cache", {})
    key = (tables.level_index(l), None if k is None else tables.level_index(k))
    if key not in cache:
        cache[key] = VarianceParts(tables, *key)
    return cache[key]


def conservative_variance(data: ObservedData, tables: ProbTables, l, k=None, estimator="HT",
                          obs=None) -> float:
    """Conservative variance of the contrast estimator (of a single mean when ``k`` is None).

    The Hajek version linearises by replacing outcomes with residuals from
    the Hajek mean of each unit's observed level.
    """
    _check(data, tables)
    tag = estimator_tag(estimator)
    parts = variance_parts(tables, l, k)
    obs = observed_levels(tables, data.z) if obs is None else obs
    sel_l = (obs == parts.l).astype(float)
    y_l = data.y
    if tag == HAJEK:
        m = hajek_mean(data, tables, parts.l, obs)
        y_l = data.y - (m.point if m.defined else 0.0)
    if parts.k is None:
        return float(parts.evaluate(sel_l[:, None], y_l[:, None])[0])
    sel_k = (obs == parts.k).astype(float)
    y_k = data.y
    if tag == HAJEK:
        m = hajek_mean(data, tables, parts.k, obs)
        y_k = data.y - (m.point if m.defined else 0.0)
    return float(parts.evaluate(sel_l[:, None], y_l[:, None], sel_k[:, None], y_k[:, None])[0])


def interpolate(omega: float, nmr: EstimateResult, singles) -> EstimateResult:
    """Convex combination of the collection estimate and the average single-network estimate."""
    singles = list(singles)
    if not singles:
        raise ValueError("need at least one single-network estimate")
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must lie in [0, 1], got {omega}")
    avg = sum(s.point for s in singles) / len(singles)
    status = OK if nmr.defined and all(s.defined for s in singles) else UNDEFINED
    return EstimateResult(omega * nmr.point + (1 - omega) * avg, None, nmr.n_effective,
                          nmr.estimator, nmr.levels, status)


# batched helpers for simulations ---------------------------------------------------

def batch_means(obs: np.ndarray, y: np.ndarray, p: np.ndarray, level: int, n: int):
    """HT and Hajek means for many replicates at once.

    ``obs`` and ``y`` have shape ``(B, n)``; ``p`` is the level's probability
    vector. Returns ``(ht, hajek, n_selected)`` arrays; Hajek is NaN when empty.
    """
    sel = obs == level
    w = np.where(sel, 1.0 / p[None, :], 0.0)
    num = (w * y).sum(1)
    den = w.sum(1)
    with np.errstate(invalid="ignore", divide="ignore"):
        hajek = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return num / n, hajek, sel.sum(1)


def batch_effect_variance(parts: VarianceParts, obs, y, hajek_l=None, hajek_k=None):
    """Variance estimates of the contrast for ``(B, n)`` replicates.

    Passing the per-replicate Hajek means switches to residual outcomes.
    """
    sel_l = (obs == parts.l).T.astype(float)
    sel_k = (obs == parts.k).T.astype(float)
    Y = y.T
    y_l = Y if hajek_l is None else Y - np.nan_to_num(hajek_l)[None, :]
    y_k = Y if hajek_k is None else Y - np.nan_to_num(hajek_k)[None, :]
    return parts.evaluate(sel_l, y_l, sel_k, y_k)
