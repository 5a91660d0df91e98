"""Probabilistic bias analysis over postulated deviations from the specified network."""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .design import Design
from .estimators import HAJEK, ObservedData, effect, estimator_tag
from .exposure import ExposureMapping
from .graph import Network
from .perturb import add_candidate_pairs, add_capped_pairs, block_pair_candidates, flip_edges
from .prob import estimate_tables

THETA_KINDS = ("uniform", "beta", "point_mass")


@dataclass(frozen=True)
class ThetaDist:
    """Prior on one bias parameter: uniform(lo, hi), beta(a, b) or point_mass(value)."""

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in THETA_KINDS:
            raise ValueError(f"unknown theta distribution {self.kind!r}; expected one of {THETA_KINDS}")
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "uniform":
            if len(p) != 2 or p[0] > p[1]:
                raise ValueError(f"uniform needs lo <= hi, got {p}")
        elif self.kind == "beta":
            if len(p) != 2 or p[0] <= 0 or p[1] <= 0:
                raise ValueError(f"beta needs a, b > 0, got {p}")
        elif len(p) != 1:
            raise ValueError("point_mass needs a single value")

    @classmethod
    def uniform(cls, lo, hi):
        return cls("uniform", (lo, hi))

    @classmethod
    def beta(cls, a, b):
        return cls("beta", (a, b))

    @classmethod
    def point_mass(cls, value):
        return cls("point_mass", (value,))

    @classmethod
    def parse(cls, spec):
        """From a dict ``{"kind": ..., ...}``, a number (point mass) or a ThetaDist."""
        if isinstance(spec, ThetaDist):
            return spec
        if isinstance(spec, (int, float)):
            return cls.point_mass(spec)
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "uniform":
            return cls.uniform(spec["lo"], spec["hi"])
        if kind == "beta":
            return cls.beta(spec["a"], spec["b"])
        if kind == "point_mass":
            return cls.point_mass(spec["value"])
        raise ValueError(f"unknown theta distribution {kind!r}; expected one of {THETA_KINDS}")

    def sample(self, rng) -> float:
        if self.kind == "uniform":
            return float(rng.uniform(*self.params))
        if self.kind == "beta":
            return float(rng.beta(*self.params))
        return self.params[0]


class DeviationKernel:
    """Draws a candidate true network given the specified one and bias parameters."""

    name = ""
    params: tuple[str, ...] = ()

    def sample(self, a_sp: Network, theta: dict, rng) -> Network:
        raise NotImplementedError

    def _prob(self, name, value):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{self.name} parameter {name}={value} is not a probability")
        return value


class EdgeFlipKernel(DeviationKernel):
    """``theta_t = P(true edge | specified edge indicator t)`` for t in {0, 1}."""

    name = "edge_flip"
    params = ("theta0", "theta1")

    def sample(self, a_sp, theta, rng):
        t0 = self._prob("theta0", theta["theta0"])
        t1 = self._prob("theta1", theta["theta1"])
        return flip_edges(a_sp, 1.0 - t1, t0, rng)


class CensorFillKernel(DeviationKernel):
    """Adds missing edges w.p. ``theta0`` where at least one end sits at the degree cap ``k``."""

    name = "censor_fill"
    params = ("theta0",)

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)

    def sample(self, a_sp, theta, rng):
        return add_capped_pairs(a_sp, self.k, self._prob("theta0", theta["theta0"]), rng)


class ContaminationKernel(DeviationKernel):
    """Adds absent same-block pairs with probability ``theta0`` (plus ``theta1`` for equal covariates).

    Probabilities from the covariate form are clamped to [0, 1]; the number of
    clamped draws is kept in ``clamped``.
    """

    name = "contamination"

    def __init__(self, blocks, covariate=None):
        self.blocks = np.asarray(blocks)
        self.covariate = None if covariate is None else np.asarray(covariate)
        self.params = ("theta0",) if covariate is None else ("theta0", "theta1")
        self.clamped = 0
        self._cache = None
        self._lock = threading.Lock()

    def _candidates(self, a_sp):
        with self._lock:
            return self._candidates_locked(a_sp)

    def _candidates_locked(self, a_sp):
        if self._cache is None or self._cache[0] is not a_sp:
            keys = block_pair_candidates(a_sp, self.blocks)
            same = None
            if self.covariate is not None:
                i, j = keys // a_sp.n, keys % a_sp.n
                same = self.covariate[i] == self.covariate[j]
            self._cache = (a_sp, keys, same)
        return self._cache[1], self._cache[2]

    def sample(self, a_sp, theta, rng):
        if self.blocks.shape != (a_sp.n,):
            raise ValueError("contamination block map must cover every unit")
        keys, same = self._candidates(a_sp)
        if same is None:
            return add_candidate_pairs(a_sp, keys, self._prob("theta0", theta["theta0"]), rng)
        raw = np.where(same, theta["theta0"] + theta["theta1"], theta["theta0"])
        probs = np.clip(raw, 0.0, 1.0)
        with self._lock:
            self.clamped += int(np.count_nonzero(probs != raw))
        return add_candidate_pairs(a_sp, keys, probs, rng)


KERNELS = ("edge_flip", "censor_fill", "contamination")


def make_kernel(name: str, **kw) -> DeviationKernel:
    if name == "edge_flip":
        return EdgeFlipKernel()
    if name == "censor_fill":
        return CensorFillKernel(kw["k"])
    if name == "contamination":
        return ContaminationKernel(kw["blocks"], kw.get("covariate"))
    raise ValueError(f"unknown kernel {name!r}; valid kernels: {', '.join(KERNELS)}")


@dataclass
class PbaResult:
    estimates: np.ndarray
    thetas: dict
    iterations: np.ndarray
    baseline: float
    baseline_se: float | None = None
    with_random_error: np.ndarray | None = None
    degenerate_count: int = 0
    estimator: str = HAJEK
    levels: tuple = ()
    all_thetas: dict = field(default_factory=dict, repr=False)


def _theta_map(kernel, theta):
    if isinstance(theta, ThetaDist):
        if len(kernel.params) != 1:
            raise ValueError(f"kernel {kernel.name} needs a distribution for each of {kernel.params}")
        return {kernel.params[0]: theta}
    theta = {k: ThetaDist.parse(v) for k, v in dict(theta).items()}
    missing = set(kernel.params) - set(theta)
    extra = set(theta) - set(kernel.params)
    if missing or extra:
        raise ValueError(f"kernel {kernel.name} takes parameters {kernel.params}, got {sorted(theta)}")
    return theta


def run_pba(data: ObservedData, a_sp: Network, kernel: DeviationKernel, theta,
            m: ExposureMapping, d: Design, levels, iters: int = 1000, R: int = 1000,
            estimator="Hajek", random_error: bool = False, seed: int = 0,
            threads: int = 1) -> PbaResult:
    """Sample bias parameters and a true network per iteration, then re-estimate.

    Probability tables always use the same seed, so an iteration whose drawn
    network equals ``a_sp`` reproduces the baseline estimate exactly.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if a_sp.n != data.n:
        raise ValueError("network and data differ in size")
    tag = estimator_tag(estimator)
    dists = _theta_map(kernel, theta)
    l, k = levels
    base_t = estimate_tables([a_sp], m, d, R=R, seed=seed)
    base = effect(data, base_t, l, k, tag, variance=True)

    def one(it):
        rng = _rng.stream(seed, _rng.PBA, it)
        th = {name: dists[name].sample(rng) for name in kernel.params}
        a_star = kernel.sample(a_sp, th, rng)
        if a_star == a_sp:
            t = base_t
        else:
            t = estimate_tables([a_star], m, d, R=R, seed=seed)
        res = effect(data, t, l, k, tag, variance=random_error)
        redraw = math.nan
        if random_error and res.defined:
            redraw = float(rng.normal(res.point, res.se))
        return th, res, redraw

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(one, range(iters)))
    else:
        out = [one(it) for it in range(iters)]

    keep = [i for i, (_, r, _) in enumerate(out) if r.defined]
    est = np.array([out[i][1].point for i in keep])
    thetas = {name: np.array([out[i][0][name] for i in keep]) for name in kernel.params}
    all_thetas = {name: np.array([o[0][name] for o in out]) for name in kernel.params}
    redraws = np.array([out[i][2] for i in keep]) if random_error else None
    return PbaResult(est, thetas, np.array(keep, dtype=np.int64), base.point, base.se, redraws,
                     iters - len(keep), tag, (base_t.levels[base_t.level_index(l)],
                                              base_t.levels[base_t.level_index(k)]), all_thetas)


def summarize(result, percentiles=(2.5, 97.5)) -> dict:
    """Mean and linearly interpolated percentiles of a result (or a plain vector)."""
    values = result.estimates if isinstance(result, PbaResult) else result
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no estimates to summarise (every iteration was degenerate)")
    # shifted mean: exact for constant input, e.g. zero-deviation runs
    out = {"mean": float(values[0] + (values - values[0]).mean())}
    qs = np.percentile(values, list(percentiles), method="linear")
    for p, q in zip(percentiles, np.atleast_1d(qs)):
        out[f"p{p:g}"] = float(q)
    return out
