"""Exact bias and bias bounds of the HT estimator under a misspecified network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exposure import ExposureMapping, map_all
from .graph import Network
from .prob import CrossTable, PositivityError, ProbTables


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Potential outcomes ``y_tilde[i, l]`` with a bound ``kappa`` on their magnitude."""

    y_tilde: np.ndarray
    kappa: float | None = None

    def __post_init__(self):
        y = np.asarray(self.y_tilde, dtype=float)
        if y.ndim != 2:
            raise ValueError("y_tilde must be an (n, L) matrix")
        if not np.all(np.isfinite(y)):
            raise ValueError("potential outcomes must be finite")
        kappa = float(np.abs(y).max(initial=0.0)) if self.kappa is None else float(self.kappa)
        if np.abs(y).max(initial=0.0) > kappa * (1 + 1e-12):
            raise ValueError(f"|y_tilde| exceeds kappa={kappa}")
        object.__setattr__(self, "y_tilde", y)
        object.__setattr__(self, "kappa", kappa)

    @property
    def n(self) -> int:
        return self.y_tilde.shape[0]


def true_means(t: PotentialTable) -> np.ndarray:
    return t.y_tilde.mean(axis=0)


def _check_pair(cross: CrossTable, marg: ProbTables, t: PotentialTable | None = None):
    if cross.n != marg.n or (t is not None and t.n != marg.n):
        raise ValueError("cross table, marginal table and outcomes must share n")
    if tuple(cross.levels) != tuple(marg.levels):
        raise ValueError("cross and marginal tables use different level sets")


def conditional(cross: CrossTable, marg: ProbTables, k: int) -> np.ndarray:
    """``P(level j under the true network | level k under the specified one)``, shape ``(n, L)``.

    Raises :class:`PositivityError` naming the first unit with a zero
    marginal at ``k``.
    """
    p = marg.individual[k]
    if np.any(p <= 0):
        i = int(np.flatnonzero(p <= 0)[0])
        raise PositivityError(i, marg.levels[k])
    return cross.joint[:, :, k] / p[:, None]


def _q(cross, marg, k):
    q = conditional(cross, marg, k)
    q[:, k] -= 1.0
    return q


def exact_bias(t: PotentialTable, cross: CrossTable, marg_sp: ProbTables, l, k=None) -> float:
    """Bias of the HT contrast ``tau(l, k)`` (of the mean ``mu(l)`` when ``k`` is None)
    computed with the specified network(s) when outcomes follow the true one.

    ``cross`` joins levels under the true network (first axis) with levels
    under the specified collection; ``marg_sp`` holds the specified marginals.
    """
    _check_pair(cross, marg_sp, t)
    l = marg_sp.level_index(l)
    w = _q(cross, marg_sp, l)
    if k is not None:
        k = marg_sp.level_index(k)
        if k == l:
            return 0.0
        w = w - _q(cross, marg_sp, k)
    return float((w * t.y_tilde).sum() / t.n)


def bias_bound(cross: CrossTable, marg_sp: ProbTables, kappa: float, l, k=None) -> float:
    """Upper bound ``(2 kappa / n) sum_i [1 - P(l | l)]``, summed over both levels for a contrast."""
    _check_pair(cross, marg_sp)
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    levels = [marg_sp.level_index(l)]
    if k is not None and marg_sp.level_index(k) != levels[0]:
        levels.append(marg_sp.level_index(k))
    total = 0.0
    for c in levels:
        stay = conditional(cross, marg_sp, c)[:, c]
        total += float(np.sum(1.0 - stay))
    return 2.0 * kappa * total / cross.n


def misclassification_counts(z, a_sp: Network, a_star: Network, m: ExposureMapping) -> np.ndarray:
    """Per level, units at that level under ``a_star`` but not under ``a_sp``."""
    if a_sp.n != a_star.n:
        raise ValueError("networks differ in size")
    true = map_all(m, z, a_star)
    spec = map_all(m, z, a_sp)
    wrong = true != spec
    return np.bincount(true[wrong], minlength=m.L)
