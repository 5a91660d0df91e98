"""Random network perturbations: edge flips, degree censoring, cluster contamination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ._rng import as_rng
from .graph import ClusteredNetwork, Network, keys_to_pairs, pair_keys

# above this many candidate pairs we never materialise the candidate set
_ENUMERATE_LIMIT = 2_000_000


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def _draw_distinct(rng, k, propose, accept, batch_floor=64):
    """Rejection-sample ``k`` distinct pair keys.

    ``propose(rng, size)`` returns candidate keys; ``accept(keys)`` returns a
    boolean mask of admissible ones. Duplicates are discarded, so the result
    is a uniform draw without replacement whenever proposals are uniform over
    the admissible set after acceptance.
    """
    chosen = np.empty(0, dtype=np.int64)
    while chosen.size < k:
        need = k - chosen.size
        cand = propose(rng, max(batch_floor, int(need * 1.3)))
        cand = cand[accept(cand)]
        # keep first occurrences in draw order so the sample stays uniform
        _, first = np.unique(cand, return_index=True)
        cand = cand[np.sort(first)]
        cand = cand[~np.isin(cand, chosen)]
        chosen = np.concatenate([chosen, cand[:need]])
    return chosen


def flip_edges(a: Network, eta01: float, eta10: float, seed=0) -> Network:
    """Remove each edge w.p. ``eta01`` and add each absent pair w.p. ``eta10``."""
    _check_prob("eta01", eta01)
    _check_prob("eta10", eta10)
    rng = as_rng(seed)
    n = a.n
    keys = a.edge_keys()
    kept = keys[rng.random(keys.size) >= eta01]
    total = n * (n - 1) // 2
    absent = total - keys.size
    n_add = int(rng.binomial(absent, eta10)) if absent > 0 and eta10 > 0 else 0
    if n_add == 0:
        return Network(n, keys_to_pairs(kept, max(n, 1)))
    if n_add > absent // 2 or total <= 4096:
        iu, ju = np.triu_indices(n, k=1)
        allk = iu.astype(np.int64) * n + ju
        pool = allk[~a.contains_pairs(allk)]
        added = rng.choice(pool, size=n_add, replace=False)
    else:
        def propose(g, size):
            ij = g.integers(0, n, size=(size, 2))
            ij = ij[ij[:, 0] != ij[:, 1]]
            return pair_keys(ij, n)

        added = _draw_distinct(rng, n_add, propose, lambda c: ~a.contains_pairs(c))
    return Network(n, keys_to_pairs(np.concatenate([kept, added]), n))


def censor_degree(a: Network, k: int, seed=0) -> Network:
    """Randomly delete incident edges of units whose degree exceeds ``k``.

    Units are visited in a seeded random order; an over-cap unit drops a
    uniform subset of its current edges down to exactly ``k``. Passes repeat
    until no unit exceeds the cap.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if a.n == 0 or a.degree.max(initial=0) <= k:
        return a
    rng = as_rng(seed)
    nbrs = [set(a.neighbors(i).tolist()) for i in range(a.n)]
    while True:
        changed = False
        for u in rng.permutation(a.n):
            excess = len(nbrs[u]) - k
            if excess <= 0:
                continue
            current = np.fromiter(sorted(nbrs[u]), dtype=np.int64)
            for v in rng.choice(current, size=excess, replace=False):
                nbrs[u].discard(int(v))
                nbrs[int(v)].discard(int(u))
            changed = True
        if not changed or max(len(s) for s in nbrs) <= k:
            break
    edges = [(i, j) for i in range(a.n) for j in nbrs[i] if i < j]
    return Network(a.n, edges)


def mean_cluster_distance(coords: np.ndarray) -> float:
    """Average L1 distance over all unordered pairs of distinct clusters."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape[0] < 2:
        return 0.0
    return float(pdist(coords, metric="cityblock").mean())


def contamination_probs(coords: np.ndarray, gamma: float) -> np.ndarray:
    """Condensed (``pdist`` order) cross-cluster edge probabilities."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    d = pdist(np.asarray(coords, dtype=float), metric="cityblock")
    if gamma == 0:
        return np.zeros_like(d)
    dbar = d.mean() if d.size else 0.0
    if dbar == 0:
        return np.ones_like(d)
    return np.exp(-d / (gamma * dbar))


def contaminate_clusters(c: ClusteredNetwork, gamma: float, seed=0) -> Network:
    """Add cross-cluster edges with distance-decaying probability.

    Each unit pair in clusters ``v != v'`` is linked independently with
    probability ``exp(-d(v, v') / (gamma * Dbar))``. The number of new edges
    per cluster pair is drawn as a binomial and then placed uniformly, which
    is equivalent and avoids touching every unit pair.
    """
    if c.coords is None:
        raise ValueError("contamination requires cluster coordinates")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    if gamma == 0 or c.V < 2:
        return c.base
    rng = as_rng(seed)
    probs = contamination_probs(c.coords, gamma)
    sizes = c.sizes()
    iv, jv = np.triu_indices(c.V, k=1)
    slots = sizes[iv].astype(np.int64) * sizes[jv]
    counts = rng.binomial(slots, probs)
    hit = np.flatnonzero(counts)
    if hit.size == 0:
        return c.base
    members = c.members()
    new = []
    for h in hit:
        u, v = members[iv[h]], members[jv[h]]
        flat = rng.choice(slots[h], size=counts[h], replace=False)
        new.append(np.column_stack([u[flat // v.size], v[flat % v.size]]))
    return c.base.with_edges(np.vstack(new))


@dataclass(frozen=True, eq=False)
class SbmSpec:
    """Block-model description of a contaminated cluster network."""

    Q: np.ndarray
    cluster_of: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        g = np.asarray(self.cluster_of, dtype=np.int64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if g.size and (g.min() < 0 or g.max() >= Q.shape[0]):
            raise ValueError(f"cluster ids must lie in [0, {Q.shape[0]})")
        if np.any(Q < 0) or np.any(Q > 1):
            raise ValueError("Q entries must lie in [0, 1]")
        if not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        if not np.allclose(np.diag(Q), 1.0):
            raise ValueError("Q must have a unit diagonal")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "cluster_of", g)

    @classmethod
    def from_clusters(cls, c: ClusteredNetwork, gamma: float) -> "SbmSpec":
        Q = np.eye(c.V)
        iv, jv = np.triu_indices(c.V, k=1)
        p = contamination_probs(c.coords, gamma)
        Q[iv, jv] = p
        Q[jv, iv] = p
        return cls(Q, c.cluster_of)

    def membership(self) -> np.ndarray:
        """Dense unit-by-cluster indicator matrix."""
        G = np.zeros((self.cluster_of.size, self.Q.shape[0]))
        G[np.arange(self.cluster_of.size), self.cluster_of] = 1.0
        return G


def sbm_expected(spec: SbmSpec) -> np.ndarray:
    """Expected adjacency ``G Q G^T`` with the diagonal zeroed."""
    g = spec.cluster_of
    out = spec.Q[np.ix_(g, g)].copy()
    np.fill_diagonal(out, 0.0)
    return out


def add_capped_pairs(a: Network, k: int, theta0: float, seed=0) -> Network:
    """Add absent pairs touching a degree-``k`` unit, each w.p. ``theta0``.

    Used to undo degree censoring: only pairs with at least one endpoint at
    the cap could have lost edges.
    """
    _check_prob("theta0", theta0)
    rng = as_rng(seed)
    n = a.n
    capped = np.flatnonzero(a.degree == k)
    nc = capped.size
    if nc == 0 or theta0 == 0:
        return a
    is_capped = np.zeros(n, dtype=bool)
    is_capped[capped] = True
    present = a.edges()
    touching = int(np.count_nonzero(is_capped[present[:, 0]] | is_capped[present[:, 1]]))
    total = nc * (n - 1) - nc * (nc - 1) // 2 - touching
    n_add = int(rng.binomial(total, theta0)) if total > 0 else 0
    if n_add == 0:
        return a

    def admissible(keys):
        i, j = keys // n, keys % n
        return (is_capped[i] | is_capped[j]) & ~a.contains_pairs(keys)

    if n_add > total // 2 or nc * n <= _ENUMERATE_LIMIT // 4:
        other = np.arange(n)
        cu = np.repeat(capped, n)
        cj = np.tile(other, nc)
        keep = cu != cj
        pool = np.unique(pair_keys(np.column_stack([cu[keep], cj[keep]]), n))
        pool = pool[~a.contains_pairs(pool)]
        added = rng.choice(pool, size=n_add, replace=False)
    else:
        def propose(g, size):
            u = capped[g.integers(0, nc, size=size)]
            j = g.integers(0, n, size=size)
            ok = u != j
            # pairs with both ends capped are proposed twice as often
            both = is_capped[j] & ok
            ok &= ~both | (g.random(size) < 0.5)
            return pair_keys(np.column_stack([u[ok], j[ok]]), n)

        added = _draw_distinct(rng, n_add, propose, admissible)
    return a.with_edges(keys_to_pairs(added, n))


def block_pair_candidates(a: Network, block_of: np.ndarray) -> np.ndarray:
    """Sorted keys of absent same-block pairs (the candidates for contamination)."""
    block_of = np.asarray(block_of)
    if block_of.shape != (a.n,):
        raise ValueError("block map must cover every unit")
    _, block_idx = np.unique(block_of, return_inverse=True)
    order = np.argsort(block_idx, kind="stable")
    sizes = np.bincount(block_idx)
    out = []
    start = 0
    for s in sizes:
        if s > 1:
            units = np.sort(order[start:start + s])
            iu, ju = np.triu_indices(s, k=1)
            out.append(units[iu].astype(np.int64) * a.n + units[ju])
        start += s
    if not out:
        return np.empty(0, dtype=np.int64)
    keys = np.sort(np.concatenate(out))
    return keys[~a.contains_pairs(keys)]


def add_candidate_pairs(a: Network, candidates: np.ndarray, probs, seed=0) -> Network:
    """Add each candidate pair independently with its own probability."""
    rng = as_rng(seed)
    probs = np.broadcast_to(np.asarray(probs, dtype=float), candidates.shape)
    take = candidates[rng.random(candidates.size) < probs]
    if take.size == 0:
        return a
    return a.with_edges(keys_to_pairs(take, a.n))
