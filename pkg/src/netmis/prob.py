"""Exposure probabilities: Monte Carlo with additive smoothing, or exact enumeration."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .design import Design
from .exposure import DISAGREE, ExposureMapping, _as_collection, agreement_levels
from .graph import Network

# replicate rows per GEMM chunk; float32 partial sums stay exact below 2**24
_GEMM_ROWS = 8192


class PositivityError(ValueError):
    """A probability needed as a denominator is zero."""

    def __init__(self, unit, level, msg=None):
        self.unit = unit
        self.level = level
        super().__init__(msg or f"zero exposure probability for unit {unit} at level {level!r}")


def replicate_levels(nets, m: ExposureMapping, d: Design, R: int, seed=0, threads=1) -> np.ndarray:
    """Agreement level codes for ``R`` seeded draws from ``d``, shape ``(R, n)``.

    Draws come in fixed blocks, each with its own seed stream, so the matrix
    does not depend on ``threads``.
    """
    nets = _as_collection(nets)
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if d.n != nets[0].n:
        raise ValueError(f"design has {d.n} units, networks have {nets[0].n}")
    out = np.empty((R, d.n), dtype=np.int8)

    def work(blk):
        b, lo, hi = blk
        Z = d.sample_many(_rng.stream(seed, _rng.TABLES, b), hi - lo)
        out[lo:hi] = agreement_levels(nets, m, Z)

    jobs = list(_rng.blocks(R))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, jobs))
    else:
        for j in jobs:
            work(j)
    return out


def combine_levels(mats) -> np.ndarray:
    """Agreement of several per-network level matrices (-1 where any differ)."""
    mats = list(mats)
    out = mats[0].copy()
    for x in mats[1:]:
        out[out != x] = DISAGREE
    return out


def _cooccurrence(A: np.ndarray, B: np.ndarray, weights=None) -> np.ndarray:
    """``A^T diag(w) B`` for 0/1 row-replicate matrices, chunked over rows."""
    n1, n2 = A.shape[1], B.shape[1]
    out = np.zeros((n1, n2), dtype=np.float64)
    exact_int = weights is None
    for lo in range(0, A.shape[0], _GEMM_ROWS):
        hi = lo + _GEMM_ROWS
        if exact_int:
            a = A[lo:hi].astype(np.float32)
            b = B[lo:hi].astype(np.float32)
        else:
            a = A[lo:hi] * weights[lo:hi, None]
            b = B[lo:hi].astype(np.float64)
        out += a.T @ b
    return out


@dataclass(eq=False)
class ProbTables:
    """Individual and pairwise exposure probabilities for a network collection.

    Monte Carlo tables (``R`` set) smooth as ``P = (I I^T + I_n) / (R + 1)``:
    individual entries are ``(count + 1) / (R + 1)``, off-diagonal same-level
    entries and cross-level entries are ``count / (R + 1)``. Exact tables
    (``R is None``) are plain expectations over the enumerated support.
    """

    levels: tuple[str, ...]
    level_matrix: np.ndarray = field(repr=False)
    R: int | None = None
    weights: np.ndarray | None = field(default=None, repr=False)
    nets: tuple = field(default=(), repr=False)
    mapping: ExposureMapping | None = field(default=None, repr=False)
    design: Design | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.R is None and self.weights is None:
            raise ValueError("exact tables need enumeration weights")
        L = len(self.levels)
        S, n = self.level_matrix.shape
        if self.weights is None:
            counts = np.zeros((L, n), dtype=np.int64)
            for k in range(L):
                counts[k] = np.count_nonzero(self.level_matrix == k, axis=0)
            self.counts = counts
            self.individual = (counts + 1.0) / (self.R + 1.0)
        else:
            w = np.asarray(self.weights, dtype=float)
            self.weights = w
            ind = np.zeros((L, n))
            for k in range(L):
                ind[k] = w @ (self.level_matrix == k)
            self.counts = None
            self.individual = ind
        self._pair_cache = {}

    @classmethod
    def from_levels(cls, level_matrix, levels, R=None, weights=None, **kw):
        return cls(tuple(levels), level_matrix, R=R, weights=weights, **kw)

    @property
    def n(self) -> int:
        return self.level_matrix.shape[1]

    @property
    def L(self) -> int:
        return len(self.levels)

    @property
    def exact(self) -> bool:
        return self.R is None

    def level_index(self, level) -> int:
        if isinstance(level, (int, np.integer)):
            if not 0 <= level < self.L:
                raise ValueError(f"level index {level} out of range")
            return int(level)
        if level not in self.levels:
            raise ValueError(f"unknown level {level!r}; expected one of {self.levels}")
        return self.levels.index(level)

    def raw_individual(self) -> np.ndarray:
        """Unsmoothed probabilities (count / R, or exact)."""
        if self.exact:
            return self.individual
        return self.counts / float(self.R)

    def _indicator(self, k):
        return self.level_matrix == k

    def pair_counts(self, l, k=None) -> np.ndarray:
        """Raw co-occurrence counts (or exact joint probabilities) of levels ``l`` at i and ``k`` at j."""
        l = self.level_index(l)
        k = l if k is None else self.level_index(k)
        key = (min(l, k), max(l, k))
        if key not in self._pair_cache:
            a = self._indicator(key[0])
            b = a if key[0] == key[1] else self._indicator(key[1])
            self._pair_cache[key] = _cooccurrence(a, b, self.weights)
        out = self._pair_cache[key]
        return out if (l, k) == key else out.T

    def pairwise(self, l, k=None) -> np.ndarray:
        """Joint probability matrix ``p_ij(c_l, c_k)`` (same level when ``k`` is None)."""
        l = self.level_index(l)
        k = l if k is None else self.level_index(k)
        c = self.pair_counts(l, k)
        if self.exact:
            return c.copy()
        p = c / (self.R + 1.0)
        if l == k:
            np.fill_diagonal(p, self.individual[l])
        return p

    def zero_mask(self, l, k=None) -> np.ndarray:
        """Pairs never observed together (raw count zero); diagonal included."""
        l = self.level_index(l)
        k = l if k is None else self.level_index(k)
        return self.pair_counts(l, k) == 0

    def drop_pairwise(self):
        self._pair_cache.clear()

    def to_rows(self):
        """(unit, level, p) rows for export."""
        for i in range(self.n):
            for k, name in enumerate(self.levels):
                yield i, name, float(self.individual[k, i])


def estimate_tables(nets, m: ExposureMapping, d: Design, R: int = 10_000, seed=0,
                    pairwise=(), threads=1) -> ProbTables:
    """Monte Carlo probability tables for the collection ``nets``.

    ``pairwise`` lists level pairs whose joint tables should be computed
    eagerly; any pair can still be requested later.
    """
    nets = _as_collection(nets)
    levels = replicate_levels(nets, m, d, R, seed, threads)
    t = ProbTables(tuple(m.levels), levels, R=int(R), nets=tuple(nets), mapping=m, design=d)
    for pair in pairwise:
        t.pair_counts(*pair) if isinstance(pair, tuple) else t.pair_counts(pair)
    return t


def exact_tables(nets, m: ExposureMapping, d: Design, limit: int = 20) -> ProbTables:
    """Exact probabilities by weighted enumeration of the design's support."""
    nets = _as_collection(nets)
    if d.n != nets[0].n:
        raise ValueError(f"design has {d.n} units, networks have {nets[0].n}")
    size = d.support_size()
    if size > 2 ** limit:
        raise ValueError(f"assignment space has {size} points, above the 2**{limit} limit")
    Z, w = d.enumerate()
    levels = agreement_levels(nets, m, Z)
    return ProbTables(tuple(m.levels), levels, R=None, weights=w, nets=tuple(nets), mapping=m, design=d)


@dataclass(eq=False)
class CrossTable:
    """Joint exposure probabilities under two specifications.

    ``joint[i, a, b]`` is the probability that unit ``i`` has level ``a``
    under the first network and level ``b`` under the second (collection).
    Monte Carlo entries are ``count / (R + 1)``.
    """

    levels: tuple[str, ...]
    joint: np.ndarray
    R: int | None = None

    @property
    def n(self) -> int:
        return self.joint.shape[0]

    @property
    def exact(self) -> bool:
        return self.R is None


def _cross_from_levels(la, lb, L, weights=None):
    S, n = la.shape
    base = (np.arange(n, dtype=np.int64) * L)[None, :]
    flat = np.zeros(n * L * L)
    for lo in range(0, S, 1024):
        a, b = la[lo:lo + 1024], lb[lo:lo + 1024]
        ok = b >= 0
        code = (base + a) * L + b
        w = None if weights is None else np.broadcast_to(weights[lo:lo + 1024, None], a.shape)[ok]
        flat += np.bincount(code[ok], weights=w, minlength=n * L * L)
    return flat.reshape(n, L, L)


def estimate_cross(a: Network, b, m: ExposureMapping, d: Design, R: int = 10_000, seed=0,
                   threads=1) -> CrossTable:
    """Monte Carlo cross table between ``a`` and the network (or collection) ``b``.

    Uses the same assignment stream as :func:`estimate_tables` for equal
    ``(R, seed)``, so cross and marginal tables are built from the same draws.
    """
    if isinstance(a, (list, tuple)):
        raise TypeError("the first argument must be a single network")
    nets_b = _as_collection(b)
    if a.n != nets_b[0].n:
        raise ValueError("networks differ in size")
    la = replicate_levels([a], m, d, R, seed, threads)
    lb = replicate_levels(nets_b, m, d, R, seed, threads)
    counts = _cross_from_levels(la, lb, m.L)
    return CrossTable(tuple(m.levels), counts / (R + 1.0), R=int(R))


def cross_from_level_matrices(la, lb, levels, R) -> CrossTable:
    """Cross table from precomputed replicate level matrices."""
    counts = _cross_from_levels(la, lb, len(levels))
    return CrossTable(tuple(levels), counts / (R + 1.0), R=int(R))


def exact_cross(a: Network, b, m: ExposureMapping, d: Design, limit: int = 20) -> CrossTable:
    nets_b = _as_collection(b)
    size = d.support_size()
    if size > 2 ** limit:
        raise ValueError(f"assignment space has {size} points, above the 2**{limit} limit")
    Z, w = d.enumerate()
    la = agreement_levels([a], m, Z)
    lb = agreement_levels(nets_b, m, Z)
    return CrossTable(tuple(m.levels), _cross_from_levels(la, lb, m.L, w), R=None)


@dataclass
class PositivityReport:
    violations: list  # (unit, level) pairs
    threshold: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_level(self) -> dict:
        out = {}
        for _, lvl in self.violations:
            out[lvl] = out.get(lvl, 0) + 1
        return out


def check_positivity(t: ProbTables, threshold: int = 1) -> PositivityReport:
    """Units whose raw count at a level is below ``threshold``.

    For exact tables a unit is flagged when its exact probability is zero.
    """
    if t.exact:
        bad = t.individual <= 0
    else:
        bad = t.counts < threshold
    lv, units = np.nonzero(bad)
    order = np.lexsort((lv, units))
    return PositivityReport([(int(units[o]), t.levels[lv[o]]) for o in order], threshold)
