"""Undirected simple networks stored as sorted neighbour lists (CSR)."""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ._rng import as_rng


class EdgeListError(ValueError):
    pass


def pair_keys(edges: np.ndarray, n: int) -> np.ndarray:
    """Encode unordered pairs as ``min * n + max`` (int64)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    return lo * n + hi


def keys_to_pairs(keys: np.ndarray, n: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    return np.column_stack([keys // n, keys % n])


class Network:
    """Immutable undirected, unweighted simple graph on units ``0..n-1``.

    Adjacency is held as CSR arrays (``indptr``, ``indices``) whose rows are
    the sorted neighbour lists N_i(A). No dense n x n matrix is ever built.
    """

    __slots__ = ("n", "indptr", "indices", "__dict__")

    def __init__(self, n: int, edges=()):
        n = int(n)
        if n < 0:
            raise ValueError("n must be non-negative")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ValueError(f"edge endpoint out of range [0, {n})")
            if np.any(e[:, 0] == e[:, 1]):
                i = int(e[e[:, 0] == e[:, 1]][0, 0])
                raise ValueError(f"self-loop at unit {i}")
        keys = np.unique(pair_keys(e, n)) if e.size else np.empty(0, np.int64)
        lo, hi = keys // max(n, 1), keys % max(n, 1)
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        self.n = n
        self.indptr = indptr
        self.indices = cols.astype(np.int64)
        self._keys = keys
        for arr in (self.indptr, self.indices, self._keys):
            arr.flags.writeable = False

    @classmethod
    def empty(cls, n: int) -> "Network":
        return cls(n)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @cached_property
    def degree(self) -> np.ndarray:
        d = np.diff(self.indptr)
        d.flags.writeable = False
        return d

    @property
    def num_edges(self) -> int:
        return int(self._keys.size)

    def edge_keys(self) -> np.ndarray:
        """Sorted int64 keys ``i * n + j`` (i < j), one per edge."""
        return self._keys

    def edges(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` array with ``i < j``, lexicographically sorted."""
        return keys_to_pairs(self._keys, max(self.n, 1))

    def has_edge(self, i: int, j: int) -> bool:
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < nb.size and nb[k] == j)

    def contains_pairs(self, keys: np.ndarray) -> np.ndarray:
        """Vectorised edge membership for pair keys."""
        keys = np.asarray(keys, dtype=np.int64)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, max(self._keys.size - 1, 0))
        if self._keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        return self._keys[pos] == keys

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Sparse 0/1 adjacency (float32) for batched neighbour sums."""
        data = np.ones(self.indices.size, dtype=np.float32)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def with_edges(self, extra) -> "Network":
        """Union with additional edges."""
        extra = np.asarray(extra, dtype=np.int64).reshape(-1, 2)
        if extra.size == 0:
            return self
        return Network(self.n, np.vstack([self.edges(), extra]))

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.n == other.n and np.array_equal(self._keys, other._keys)

    __hash__ = None

    def __repr__(self):
        return f"Network(n={self.n}, edges={self.num_edges})"


@dataclass(frozen=True, eq=False)
class ClusteredNetwork:
    """A network whose units are partitioned into ``V`` clusters."""

    base: Network
    cluster_of: np.ndarray
    coords: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.cluster_of, dtype=np.int64)
        if c.shape != (self.base.n,):
            raise ValueError("cluster_of must assign every unit exactly one cluster")
        if c.size and c.min() < 0:
            raise ValueError("cluster ids must be non-negative")
        object.__setattr__(self, "cluster_of", c)
        if self.coords is not None:
            xy = np.asarray(self.coords, dtype=float)
            if xy.ndim != 2 or xy.shape[1] != 2 or xy.shape[0] < self.V:
                raise ValueError("coords must be a (V, 2) array")
            object.__setattr__(self, "coords", xy)

    @property
    def V(self) -> int:
        return int(self.cluster_of.max()) + 1 if self.cluster_of.size else 0

    @property
    def n(self) -> int:
        return self.base.n

    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_of, minlength=self.V)

    def members(self) -> list[np.ndarray]:
        order = np.argsort(self.cluster_of, kind="stable")
        bounds = np.cumsum(self.sizes())[:-1]
        return np.split(order, bounds)


def complete_cluster_edges(cluster_of: np.ndarray) -> np.ndarray:
    """All within-cluster pairs for the given membership vector."""
    cluster_of = np.asarray(cluster_of, dtype=np.int64)
    order = np.argsort(cluster_of, kind="stable")
    sizes = np.bincount(cluster_of)
    out = []
    start = 0
    for s in sizes:
        if s > 1:
            units = order[start:start + s]
            iu, ju = np.triu_indices(s, k=1)
            out.append(np.column_stack([units[iu], units[ju]]))
        start += s
    return np.vstack(out) if out else np.empty((0, 2), dtype=np.int64)


_SPLIT = re.compile(r"[,\s]+")


def _text_lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return io.StringIO(data).read().splitlines()


def load_edge_list(source, n: int, one_based: bool = False) -> Network:
    """Parse ``"i j"`` or ``"i,j"`` records into a :class:`Network`.

    ``source`` may be a path, raw bytes, or a binary/text stream. Blank lines
    and ``#`` comments are skipped; duplicate and reversed records collapse.
    """
    shift = 1 if one_based else 0
    pairs = []
    for lineno, raw in enumerate(_text_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in _SPLIT.split(line) if p]
        if len(parts) != 2:
            raise EdgeListError(f"line {lineno}: expected two unit ids, got {raw!r}")
        try:
            i, j = int(parts[0]) - shift, int(parts[1]) - shift
        except ValueError:
            raise EdgeListError(f"line {lineno}: non-integer unit id in {raw!r}") from None
        if i < 0 or j < 0 or i >= n or j >= n:
            raise EdgeListError(f"line {lineno}: unit index out of range [0, {n}) in {raw!r}")
        if i == j:
            raise EdgeListError(f"line {lineno}: self-loop at unit {i}")
        pairs.append((i, j))
    return Network(n, pairs)


def max_index_in_edge_list(source, one_based: bool = False) -> int:
    """Largest unit index mentioned in an edge list (-1 when empty)."""
    best = -1
    for raw in _text_lines(source):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        for p in _SPLIT.split(line):
            if p:
                try:
                    best = max(best, int(p) - (1 if one_based else 0))
                except ValueError:
                    pass
    return best


def load_cluster_file(source, n: int | None = None, base: Network | None = None) -> ClusteredNetwork:
    """Read ``unit_id cluster_id [x y]`` records.

    Without ``base`` the returned network is the complete-within-cluster graph.
    Cluster ids are relabelled to ``0..V-1`` in order of first appearance of
    their sorted values; coordinates, when given, must be consistent per cluster.
    """
    rows = []
    for lineno, raw in enumerate(_text_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in _SPLIT.split(line) if p]
        if len(parts) not in (2, 4):
            raise EdgeListError(f"line {lineno}: expected 'unit cluster [x y]', got {raw!r}")
        try:
            rec = (int(parts[0]), int(parts[1]), *(float(p) for p in parts[2:]))
        except ValueError:
            raise EdgeListError(f"line {lineno}: malformed record {raw!r}") from None
        rows.append(rec)
    if base is not None:
        n = base.n
    if n is None:
        n = max(r[0] for r in rows) + 1 if rows else 0
    cluster_raw = np.full(n, -1, dtype=np.int64)
    for r in rows:
        if not 0 <= r[0] < n:
            raise EdgeListError(f"unit {r[0]} out of range [0, {n})")
        cluster_raw[r[0]] = r[1]
    if np.any(cluster_raw < 0):
        missing = int(np.flatnonzero(cluster_raw < 0)[0])
        raise EdgeListError(f"unit {missing} has no cluster record")
    labels, cluster_of = np.unique(cluster_raw, return_inverse=True)
    coords = None
    with_xy = [r for r in rows if len(r) == 4]
    if with_xy:
        if len(with_xy) != len(rows):
            raise EdgeListError("coordinates must be given for every record or none")
        coords = np.full((labels.size, 2), np.nan)
        for r in with_xy:
            v = int(np.searchsorted(labels, r[1]))
            if not np.isnan(coords[v, 0]) and not np.allclose(coords[v], r[2:]):
                raise EdgeListError(f"cluster {r[1]} has inconsistent coordinates")
            coords[v] = r[2:]
    if base is None:
        base = Network(n, complete_cluster_edges(cluster_of))
    return ClusteredNetwork(base, cluster_of, coords)


def jaccard(a: Network, b: Network) -> float:
    """Shared-edge fraction |E(a) & E(b)| / |E(a) | E(b)|; 1 for two empty graphs."""
    if a.n != b.n:
        raise ValueError(f"networks differ in size: {a.n} vs {b.n}")
    inter = np.intersect1d(a.edge_keys(), b.edge_keys(), assume_unique=True).size
    union = a.num_edges + b.num_edges - inter
    return 1.0 if union == 0 else inter / union


def gen_preferential_attachment(n: int, seed=0, zero_appeal: float = 0.0) -> Network:
    """Barabasi-Albert growth with one edge per new node, linear attachment.

    Starts from the edge (0, 1); node ``t >= 2`` links to an existing node
    drawn with probability proportional to ``degree + zero_appeal``. The
    default is pure degree-proportional attachment; ``zero_appeal=1`` is the
    undirected igraph convention, which gives fewer leaves and a lighter tail.
    """
    if n < 2:
        raise ValueError("preferential attachment needs n >= 2")
    if zero_appeal < 0:
        raise ValueError("zero_appeal must be non-negative")
    rng = as_rng(seed)
    u = rng.random(n)
    # every edge contributes both endpoints; a uniform endpoint is degree-weighted
    ends = np.empty(2 * (n - 1), dtype=np.int64)
    ends[0], ends[1] = 0, 1
    edges = np.empty((n - 1, 2), dtype=np.int64)
    edges[0] = (0, 1)
    for t in range(2, n):
        m = 2 * (t - 1)
        x = u[t] * (m + zero_appeal * t)
        if x < m:
            target = ends[int(x)]
        else:
            target = min(int((x - m) / zero_appeal), t - 1)
        edges[t - 1] = (target, t)
        ends[m], ends[m + 1] = target, t
    return Network(n, edges)


def gen_cluster_network(sizes, seed=0) -> ClusteredNetwork:
    """Disjoint complete subgraphs with cluster centres uniform on [0,1]^2."""
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if min(sizes) < 1:
        raise ValueError("cluster sizes must be >= 1")
    rng = as_rng(seed)
    cluster_of = np.repeat(np.arange(len(sizes)), sizes)
    coords = rng.random((len(sizes), 2))
    base = Network(cluster_of.size, complete_cluster_edges(cluster_of))
    return ClusteredNetwork(base, cluster_of, coords)
