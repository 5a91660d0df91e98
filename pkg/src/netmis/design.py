"""Treatment assignment mechanisms."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import as_rng

KINDS = ("bernoulli", "complete", "cluster", "cluster_bernoulli", "two_stage")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True, eq=False)
class Design:
    """A known distribution over binary treatment vectors of length ``n``.

    kinds:
      bernoulli(p)             i.i.d. unit coins
      complete(m)              exactly m treated, uniform over subsets
      cluster(U)               exactly U whole clusters treated
      cluster_bernoulli(p)     each cluster treated independently w.p. p
      two_stage(cluster_frac, within_frac)
                               round(cluster_frac V) clusters, then
                               round(within_frac size) units in each
    """

    kind: str
    n: int
    p: float | None = None
    m: int | None = None
    U: int | None = None
    cluster_frac: float | None = None
    within_frac: float | None = None
    clusters: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.clusters is not None:
            c = np.asarray(self.clusters, dtype=np.int64)
            if c.shape != (self.n,):
                raise ValueError("cluster map must have one entry per unit")
            if c.size and c.min() < 0:
                raise ValueError("cluster ids must be non-negative")
            object.__setattr__(self, "clusters", c)
        if self.kind in ("cluster", "cluster_bernoulli", "two_stage") and self.clusters is None:
            raise ValueError(f"{self.kind} design requires a cluster map")
        if self.kind in ("bernoulli", "cluster_bernoulli"):
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError(f"p must lie in [0, 1], got {self.p}")
        elif self.kind == "complete":
            if self.m is None or not 0 <= self.m <= self.n:
                raise ValueError(f"m must lie in [0, {self.n}], got {self.m}")
        elif self.kind == "cluster":
            if self.U is None or not 0 <= self.U <= self.V:
                raise ValueError(f"U must lie in [0, {self.V}], got {self.U}")
        elif self.kind == "two_stage":
            for name in ("cluster_frac", "within_frac"):
                v = getattr(self, name)
                if v is None or not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name} must lie in [0, 1], got {v}")

    # constructors -------------------------------------------------------
    @classmethod
    def bernoulli(cls, n, p=0.5):
        return cls("bernoulli", n, p=float(p))

    @classmethod
    def complete(cls, n, m):
        return cls("complete", n, m=int(m))

    @classmethod
    def cluster(cls, clusters, U):
        clusters = np.asarray(clusters)
        return cls("cluster", clusters.size, U=int(U), clusters=clusters)

    @classmethod
    def cluster_bernoulli(cls, clusters, p=0.5):
        clusters = np.asarray(clusters)
        return cls("cluster_bernoulli", clusters.size, p=float(p), clusters=clusters)

    @classmethod
    def two_stage(cls, clusters, cluster_frac=0.5, within_frac=0.5):
        clusters = np.asarray(clusters)
        return cls("two_stage", clusters.size, cluster_frac=float(cluster_frac),
                   within_frac=float(within_frac), clusters=clusters)

    @property
    def V(self) -> int:
        if self.clusters is None or self.clusters.size == 0:
            return 0
        return int(self.clusters.max()) + 1

    # sampling -----------------------------------------------------------
    def sample(self, rng) -> np.ndarray:
        return self.sample_many(rng, 1)[0]

    def sample_many(self, rng, B: int) -> np.ndarray:
        """Draw ``B`` independent assignments as a ``(B, n)`` uint8 array."""
        rng = as_rng(rng)
        n = self.n
        if self.kind == "bernoulli":
            return (rng.random((B, n)) < self.p).astype(np.uint8)
        if self.kind == "complete":
            return _first_m_of_permutation(rng, B, n, self.m)
        if self.kind == "cluster":
            treated = _first_m_of_permutation(rng, B, self.V, self.U)
            return treated[:, self.clusters]
        if self.kind == "cluster_bernoulli":
            treated = (rng.random((B, self.V)) < self.p).astype(np.uint8)
            return treated[:, self.clusters]
        return self._sample_two_stage(rng, B)

    def _sample_two_stage(self, rng, B):
        V = self.V
        n_sel = round_half_up(self.cluster_frac * V)
        sizes = np.bincount(self.clusters, minlength=V)
        quota = np.array([round_half_up(self.within_frac * s) for s in sizes])
        out = np.zeros((B, self.n), dtype=np.uint8)
        order = np.argsort(self.clusters, kind="stable")
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        for b in range(B):
            for v in rng.permutation(V)[:n_sel]:
                units = order[starts[v]:starts[v] + sizes[v]]
                out[b, rng.permutation(units)[:quota[v]]] = 1
        return out

    # enumeration --------------------------------------------------------
    def support_size(self) -> int:
        if self.kind == "bernoulli":
            return 2 ** self.n
        if self.kind == "complete":
            return math.comb(self.n, self.m)
        if self.kind == "cluster":
            return math.comb(self.V, self.U)
        if self.kind == "cluster_bernoulli":
            return 2 ** self.V
        raise ValueError("two_stage designs are not enumerable")

    def enumerate(self):
        """Full support as ``(Z, weights)`` with ``Z`` of shape ``(S, n)``."""
        if self.kind == "bernoulli":
            Z = _all_binary(self.n)
            k = Z.sum(axis=1)
            w = self.p ** k * (1 - self.p) ** (self.n - k)
            return Z, w
        if self.kind == "complete":
            Z = _all_subsets(self.n, self.m)
            return Z, np.full(Z.shape[0], 1.0 / Z.shape[0])
        if self.kind == "cluster":
            T = _all_subsets(self.V, self.U)
            return T[:, self.clusters], np.full(T.shape[0], 1.0 / T.shape[0])
        if self.kind == "cluster_bernoulli":
            T = _all_binary(self.V)
            k = T.sum(axis=1)
            w = self.p ** k * (1 - self.p) ** (self.V - k)
            return T[:, self.clusters], w
        raise ValueError("two_stage designs are not enumerable")

    # serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in ("p", "m", "U", "cluster_frac", "within_frac"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out

    @classmethod
    def from_dict(cls, spec: dict, n: int | None = None, clusters=None) -> "Design":
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind is None:
            raise ValueError("design spec needs a 'kind'")
        if clusters is not None:
            clusters = np.asarray(clusters)
            n = clusters.size
        if n is None:
            raise ValueError("design spec needs n or a cluster map")
        unknown = set(spec) - {"p", "m", "U", "cluster_frac", "within_frac"}
        if unknown:
            raise ValueError(f"unknown design fields: {sorted(unknown)}")
        if "m" in spec:
            spec["m"] = int(spec["m"])
        if "U" in spec:
            spec["U"] = int(spec["U"])
        return cls(kind, int(n), clusters=clusters, **spec)


def sample_assignment(d: Design, seed=0) -> np.ndarray:
    """One assignment vector drawn from ``d``."""
    return d.sample(as_rng(seed))


def _first_m_of_permutation(rng, B, n, m):
    # argsort of uniform keys gives B independent uniform permutations
    out = np.zeros((B, n), dtype=np.uint8)
    if m == 0 or n == 0:
        return out
    idx = np.argpartition(rng.random((B, n)), m - 1, axis=1)[:, :m] if m < n else None
    if idx is None:
        out[:] = 1
    else:
        np.put_along_axis(out, idx, 1, axis=1)
    return out


def _all_binary(n):
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.uint8)


def _all_subsets(n, m):
    combos = list(itertools.combinations(range(n), m))
    Z = np.zeros((len(combos), n), dtype=np.uint8)
    for r, c in enumerate(combos):
        Z[r, list(c)] = 1
    return Z
