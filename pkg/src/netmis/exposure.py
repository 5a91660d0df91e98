"""Exposure mappings from (own treatment, neighbours' treatments) to discrete levels."""

from __future__ import annotations

import numpy as np

from .graph import Network

DISAGREE = -1


class ExposureMapping:
    """Base class. Subclasses set ``levels`` and implement ``_levels``.

    Level codes are positions in ``levels``. Batched evaluation takes an
    assignment matrix of shape ``(B, n)`` and returns int8 codes of the same
    shape.
    """

    levels: tuple[str, ...] = ()

    @property
    def L(self) -> int:
        return len(self.levels)

    def level_index(self, level) -> int:
        if isinstance(level, (int, np.integer)):
            if not 0 <= level < self.L:
                raise ValueError(f"level index {level} out of range for {self.L} levels")
            return int(level)
        try:
            return self.levels.index(level)
        except ValueError:
            raise ValueError(f"unknown level {level!r}; expected one of {self.levels}") from None

    def treated_neighbors(self, Z: np.ndarray, a: Network) -> np.ndarray:
        """Treated-neighbour counts, shape ``(B, n)``."""
        Zt = np.ascontiguousarray(Z.T, dtype=np.float32)
        return np.asarray(a.adjacency @ Zt).T

    def map_batch(self, Z: np.ndarray, a: Network) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z))
        if Z.shape[1] != a.n:
            raise ValueError(f"assignment length {Z.shape[1]} does not match network size {a.n}")
        self._check_size(a.n)
        return self._levels(Z.astype(np.uint8, copy=False), a)

    def _check_size(self, n):
        pass

    def _levels(self, Z, a):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class ThresholdMapping(ExposureMapping):
    """Four levels by own treatment and whether the treated-neighbour share exceeds ``nu_i``.

    The share is 0 for isolated units and the comparison is strict.
    """

    levels = ("c11", "c01", "c10", "c00")

    def __init__(self, nu):
        nu = np.asarray(nu, dtype=float)
        if nu.ndim != 1:
            raise ValueError("nu must be a vector")
        if not np.all(np.isfinite(nu)):
            raise ValueError("thresholds must be finite")
        self.nu = nu
        self.nu.flags.writeable = False

    @classmethod
    def constant(cls, n, value=0.0):
        return cls(np.full(n, float(value)))

    def _check_size(self, n):
        if self.nu.size != n:
            raise ValueError(f"{self.nu.size} thresholds for {n} units")

    def _levels(self, Z, a):
        count = self.treated_neighbors(Z, a)
        deg = a.degree
        share = count / np.maximum(deg, 1)
        exposed = share > self.nu
        return ((~exposed) * 2 + (1 - Z)).astype(np.int8)

    def to_dict(self):
        return {"kind": "threshold"}


class SchoolMapping(ExposureMapping):
    """Four own/peer levels inside intervention schools plus one level for control schools."""

    levels = ("c111", "c011", "c101", "c001", "c000")

    def __init__(self, s):
        s = np.asarray(s)
        if s.ndim != 1 or not np.isin(s, (0, 1)).all():
            raise ValueError("school indicator must be a 0/1 vector")
        self.s = s.astype(bool)
        self.s.flags.writeable = False

    def _check_size(self, n):
        if self.s.size != n:
            raise ValueError(f"{self.s.size} school indicators for {n} units")

    def _levels(self, Z, a):
        exposed = self.treated_neighbors(Z, a) > 0
        code = ((~exposed) * 2 + (1 - Z)).astype(np.int8)
        code[:, ~self.s] = 4
        return code

    def to_dict(self):
        return {"kind": "school"}


def map_all(m: ExposureMapping, z, a: Network) -> np.ndarray:
    """Level codes of every unit for a single assignment vector."""
    z = np.asarray(z)
    if z.ndim != 1:
        raise ValueError("z must be a vector")
    return m.map_batch(z[None, :], a)[0]


def _as_collection(nets):
    if isinstance(nets, Network):
        return [nets]
    nets = list(nets)
    if not nets:
        raise ValueError("network collection is empty")
    n = nets[0].n
    if any(x.n != n for x in nets):
        raise ValueError("all networks in a collection must share n")
    return nets


def agreement_levels(nets, m: ExposureMapping, Z) -> np.ndarray:
    """Common level code across the collection, or -1 where networks disagree.

    Duplicate networks are evaluated once.
    """
    nets = _as_collection(nets)
    Z = np.atleast_2d(np.asarray(Z))
    unique = []
    for x in nets:
        if not any(x is u or x == u for u in unique):
            unique.append(x)
    out = m.map_batch(Z, unique[0])
    for x in unique[1:]:
        other = m.map_batch(Z, x)
        out[out != other] = DISAGREE
    return out


def agreement_indicator(nets, m: ExposureMapping, z, level) -> np.ndarray:
    """1 where every network in the collection maps the unit to ``level``."""
    k = m.level_index(level)
    z = np.asarray(z)
    return (agreement_levels(nets, m, z[None, :])[0] == k).astype(np.uint8)
