"""Simulation harness: misreported edges, degree censoring, cluster contamination, NMR trade-off."""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import _rng
from .bias import PotentialTable, exact_bias
from .design import Design
from .estimators import ObservedData, VarianceParts, batch_effect_variance, batch_means
from .exposure import ExposureMapping, ThresholdMapping, agreement_levels, map_all
from .graph import (
    ClusteredNetwork,
    Network,
    complete_cluster_edges,
    gen_cluster_network,
    gen_preferential_attachment,
)
from .perturb import (
    add_candidate_pairs,
    block_pair_candidates,
    censor_degree,
    contaminate_clusters,
    flip_edges,
)
from .prob import ProbTables, combine_levels, cross_from_level_matrices, replicate_levels

SCENARIOS = ("misreport", "censor", "contaminate", "nmr_tradeoff")

# additive shifts over the untreated, unexposed outcome, in ThresholdMapping level order
_SHIFTS = np.array([1.0, 0.25, 0.5, 0.0])
KAPPA = 2.5

DEFAULT_GRIDS = {
    "misreport": [round(0.025 * i, 3) for i in range(11)],
    "censor": list(range(1, 8)),
    "contaminate": [round(0.005 * i, 3) for i in range(11)],
    "nmr_tradeoff": list(range(1, 7)),
}
DEFAULT_ESTIMANDS = {
    "misreport": [("c11", "c00")],
    "censor": [("c10", "c00")],
    "contaminate": [("c11", "c00")],
    "nmr_tradeoff": [("c11", "c10")],
}


def gen_potential_outcomes(n: int, seed=0):
    """Outcomes ``Y(c00) ~ U[0.5, 1.5]`` shifted by 1, 0.25, 0.5 for c11, c01, c10; thresholds ``U[0, 1]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng.as_rng(seed)
    base = rng.uniform(0.5, 1.5, size=n)
    nu = rng.uniform(0.0, 1.0, size=n)
    return PotentialTable(base[:, None] + _SHIFTS[None, :], KAPPA), nu


def realize_outcomes(t: PotentialTable, z, a_star: Network, m: ExposureMapping) -> np.ndarray:
    """Observed outcomes: each unit's potential outcome at its level under ``a_star``."""
    if t.n != a_star.n:
        raise ValueError("outcome table and network differ in size")
    lv = map_all(m, z, a_star)
    return t.y_tilde[np.arange(t.n), lv]


def realize_batch(t: PotentialTable, levels: np.ndarray) -> np.ndarray:
    return t.y_tilde[np.arange(t.n)[None, :], levels]


@dataclass
class ScenarioSpec:
    scenario: str
    grid: list | None = None
    reps: int = 1000
    n: int = 3000
    R: int = 10_000
    seed: int = 0
    p: float = 0.5
    estimands: list | None = None
    estimators: tuple = ("HT", "Hajek")
    variance: bool = False
    exact_bias: bool = False
    # contamination: {"V": 500, "size": 20} or {"V": 2000, "min_size": 3, "max_size": 7}
    clusters: dict = field(default_factory=lambda: {"V": 500, "size": 20})
    # NMR trade-off: number of perturbed copies and their removal probability
    pool_size: int = 5
    pool_eta: float = 0.25
    truth_only: bool = False
    # attachment weight is degree + pa_zero_appeal; 1.0 gives the igraph-style profile
    pa_zero_appeal: float = 0.0
    threads: int = 1
    progress: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.grid is None:
            self.grid = list(DEFAULT_GRIDS[self.scenario])
        if not self.grid:
            raise ValueError("grid must be non-empty")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.estimands is None:
            self.estimands = list(DEFAULT_ESTIMANDS[self.scenario])
        self.estimands = [tuple(e) for e in self.estimands]
        self.estimators = tuple(self.estimators)
        for e in self.estimators:
            if e not in ("HT", "Hajek"):
                raise ValueError(f"unknown estimator {e!r}")
        if self.scenario == "misreport" and any(not 0 <= g <= 1 for g in self.grid):
            raise ValueError("eta values must lie in [0, 1]")
        if self.scenario == "censor" and any(int(g) < 1 for g in self.grid):
            raise ValueError("censoring thresholds must be >= 1")
        if self.scenario == "contaminate" and any(g < 0 for g in self.grid):
            raise ValueError("gamma values must be non-negative")
        if self.scenario == "nmr_tradeoff" and any(not 1 <= int(g) <= self.pool_size + 1 for g in self.grid):
            raise ValueError(f"combination sizes must lie in [1, {self.pool_size + 1}]")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class MetricRow:
    scenario: str
    point: str
    estimator: str
    estimand: str
    abs_bias: float
    sd: float
    rmse: float
    mean_se: float = math.nan
    n_valid: int = 0
    M: int | None = None
    contains_truth: bool | None = None
    exact_bias: float = math.nan

    def as_dict(self):
        return asdict(self)


def _metrics(est, truth):
    est = est[np.isfinite(est)]
    if est.size == 0:
        return math.nan, math.nan, math.nan, 0
    dev = est - truth
    bias = float(dev.mean())
    sd = float(est.std())
    rmse = float(math.sqrt(np.mean(dev * dev)))
    return abs(bias), sd, rmse, int(est.size)


class _Harness:
    """Shared state for one scenario run: truth, assignments, per-network replicate levels."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.log = (lambda msg: print(msg, file=sys.stderr, flush=True)) if spec.progress else (lambda msg: None)

    def setup_outcomes(self, n):
        self.table, nu = gen_potential_outcomes(n, _rng.stream(self.spec.seed, _rng.OUTCOMES))
        self.mapping = ThresholdMapping(nu)
        self.truth_means = self.table.y_tilde.mean(axis=0)

    def setup_assignments(self, design):
        self.design = design
        Z = np.empty((self.spec.reps, design.n), dtype=np.uint8)
        for b, lo, hi in _rng.blocks(self.spec.reps):
            Z[lo:hi] = design.sample_many(_rng.stream(self.spec.seed, _rng.REPS, b), hi - lo)
        self.Z = Z

    def rep_levels(self, net):
        return agreement_levels([net], self.mapping, self.Z)

    def table_levels(self, net):
        s = self.spec
        return replicate_levels([net], self.mapping, self.design, s.R, s.seed, s.threads)

    def evaluate(self, point, obs, y, tables, M=None, contains=None, cross=None):
        s = self.spec
        rows = []
        idx = {c: i for i, c in enumerate(self.mapping.levels)}
        for l, k in s.estimands:
            li, ki = idx[l], idx[k]
            truth = self.truth_means[li] - self.truth_means[ki]
            ht_l, hj_l, _ = batch_means(obs, y, tables.individual[li], li, tables.n)
            ht_k, hj_k, _ = batch_means(obs, y, tables.individual[ki], ki, tables.n)
            parts = VarianceParts(tables, li, ki) if s.variance else None
            eb = math.nan
            if cross is not None:
                eb = exact_bias(self.table, cross, tables, li, ki)
            for e in s.estimators:
                if e == "HT":
                    est = ht_l - ht_k
                    se = batch_effect_variance(parts, obs, y) if parts else None
                else:
                    est = hj_l - hj_k
                    se = batch_effect_variance(parts, obs, y, hj_l, hj_k) if parts else None
                ab, sd, rmse, nv = _metrics(est, truth)
                mean_se = math.nan
                if se is not None:
                    ok = np.isfinite(est)
                    mean_se = float(np.sqrt(se[ok]).mean()) if ok.any() else math.nan
                rows.append(MetricRow(s.scenario, str(point), e, f"{l}-{k}", ab, sd, rmse, mean_se,
                                      nv, M, contains, eb if e == "HT" else math.nan))
        return rows


def _cluster_sizes(spec, rng):
    c = spec.clusters
    V = int(c["V"])
    if "size" in c:
        return [int(c["size"])] * V
    lo, hi = int(c.get("min_size", 3)), int(c.get("max_size", 7))
    return rng.integers(lo, hi + 1, size=V).tolist()


def run_scenario(spec: ScenarioSpec) -> list[MetricRow]:
    """Run every grid point of a scenario and return one row per (point, estimand, estimator)."""
    if spec.scenario == "contaminate":
        return _run_contaminate(spec)
    if spec.scenario == "nmr_tradeoff":
        return _run_nmr(spec)
    return _run_single(spec)


def _run_single(spec):
    h = _Harness(spec)
    a_star = gen_preferential_attachment(spec.n, _rng.stream(spec.seed, _rng.NETWORK), spec.pa_zero_appeal)
    h.setup_outcomes(spec.n)
    h.setup_assignments(Design.bernoulli(spec.n, spec.p))
    true_lv = h.rep_levels(a_star)
    y = realize_batch(h.table, true_lv)
    true_tab = h.table_levels(a_star) if spec.exact_bias else None
    rows = []
    for gi, g in enumerate(spec.grid):
        rng = _rng.stream(spec.seed, _rng.PERTURB, gi)
        if spec.scenario == "misreport":
            a_sp = flip_edges(a_star, g, g / 100.0, rng)
        else:
            a_sp = censor_degree(a_star, int(g), rng)
        sp_tab = h.table_levels(a_sp)
        tables = ProbTables.from_levels(sp_tab, h.mapping.levels, R=spec.R)
        cross = None
        if spec.exact_bias:
            cross = cross_from_level_matrices(true_tab, sp_tab, h.mapping.levels, spec.R)
        rows += h.evaluate(g, h.rep_levels(a_sp), y, tables, cross=cross)
        h.log(f"{spec.scenario}: point {g} done")
    return rows


def _run_contaminate(spec):
    h = _Harness(spec)
    net_rng = _rng.stream(spec.seed, _rng.NETWORK)
    sizes = _cluster_sizes(spec, net_rng)
    clustered: ClusteredNetwork = gen_cluster_network(sizes, net_rng)
    n = clustered.n
    h.setup_outcomes(n)
    h.setup_assignments(Design.cluster_bernoulli(clustered.cluster_of, spec.p))
    a_sp = clustered.base
    sp_tab = h.table_levels(a_sp)
    tables = ProbTables.from_levels(sp_tab, h.mapping.levels, R=spec.R)
    obs = h.rep_levels(a_sp)
    rows = []
    for gi, g in enumerate(spec.grid):
        a_star = contaminate_clusters(clustered, g, _rng.stream(spec.seed, _rng.PERTURB, gi))
        y = realize_batch(h.table, h.rep_levels(a_star))
        cross = None
        if spec.exact_bias:
            cross = cross_from_level_matrices(h.table_levels(a_star), sp_tab, h.mapping.levels, spec.R)
        rows += h.evaluate(g, obs, y, tables, cross=cross)
        h.log(f"contaminate: gamma {g} done")
    return rows


def _run_nmr(spec):
    h = _Harness(spec)
    a_star = gen_preferential_attachment(spec.n, _rng.stream(spec.seed, _rng.NETWORK), spec.pa_zero_appeal)
    pool = [a_star]
    for j in range(spec.pool_size):
        rng = _rng.stream(spec.seed, _rng.PERTURB, j)
        pool.append(flip_edges(a_star, spec.pool_eta, spec.pool_eta / 100.0, rng))
    names = ["A*"] + [chr(ord("a") + j) for j in range(spec.pool_size)]
    h.setup_outcomes(spec.n)
    h.setup_assignments(Design.bernoulli(spec.n, spec.p))
    rep_lv = [h.rep_levels(x) for x in pool]
    y = realize_batch(h.table, rep_lv[0])
    tab_lv = [h.table_levels(x) for x in pool]
    rows = []
    for M in spec.grid:
        for combo in itertools.combinations(range(len(pool)), int(M)):
            contains = 0 in combo
            if spec.truth_only and not contains:
                continue
            obs = combine_levels(rep_lv[c] for c in combo)
            tables = ProbTables.from_levels(combine_levels(tab_lv[c] for c in combo),
                                            h.mapping.levels, R=spec.R)
            label = "+".join(names[c] for c in combo)
            rows += h.evaluate(label, obs, y, tables, M=int(M), contains=contains)
        h.log(f"nmr_tradeoff: M={M} done")
    return rows


@dataclass
class SyntheticTrial:
    """A cluster-randomised trial: classes nested in schools, treatment by class."""

    a_sp: Network
    a_star: Network
    school: np.ndarray
    classes: np.ndarray
    mapping: ThresholdMapping
    design: Design
    table: PotentialTable
    data: ObservedData


def synthetic_crt(schools=4, classes=6, students=20, contamination=0.0, treated_classes=None,
                  seed=0) -> SyntheticTrial:
    """Classes are complete graphs; the true network adds same-school pairs w.p. ``contamination``.

    Half of all classes (rounded down) are treated. Outcomes follow
    :func:`gen_potential_outcomes` realised on the true network with zero
    thresholds.
    """
    sizes = [students] * (schools * classes)
    V = len(sizes)
    cls = np.repeat(np.arange(V), students)
    school = cls // classes
    n = cls.size
    a_sp = Network(n, complete_cluster_edges(cls))
    keys = block_pair_candidates(a_sp, school)
    a_star = add_candidate_pairs(a_sp, keys, contamination, _rng.stream(seed, _rng.PERTURB, 0))
    table, _ = gen_potential_outcomes(n, _rng.stream(seed, _rng.OUTCOMES))
    m = ThresholdMapping.constant(n)
    U = V // 2 if treated_classes is None else int(treated_classes)
    d = Design.cluster(cls, U)
    z = d.sample(_rng.stream(seed, _rng.REPS, 0))
    y = realize_outcomes(table, z, a_star, m)
    return SyntheticTrial(a_sp, a_star, school, cls, m, d, table, ObservedData(z, y))

