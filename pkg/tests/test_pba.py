import numpy as np
import pytest

from conftest import random_network
from netmis.design import Design
from netmis.estimators import ObservedData, effect
from netmis.exposure import ThresholdMapping
from netmis.graph import Network
from netmis.pba import (
    KERNELS,
    CensorFillKernel,
    ContaminationKernel,
    EdgeFlipKernel,
    ThetaDist,
    make_kernel,
    run_pba,
    summarize,
)
from netmis.prob import estimate_tables
from netmis.sim import realize_outcomes, gen_potential_outcomes, synthetic_crt


@pytest.fixture(scope="module")
def trial():
    return synthetic_crt(schools=2, classes=4, students=8, contamination=0.01, seed=2)


@pytest.fixture(scope="module")
def pa_data():
    rng = np.random.default_rng(0)
    a = random_network(rng, 60, 0.025, no_isolated=True)
    table, _ = gen_potential_outcomes(60, 1)
    m = ThresholdMapping.constant(60)
    d = Design.bernoulli(60)
    z = d.sample(rng)
    return a, m, d, ObservedData(z, realize_outcomes(table, z, a, m))


def test_theta_dist_validation_and_parse():
    assert ThetaDist.parse(0.3) == ThetaDist.point_mass(0.3)
    assert ThetaDist.parse({"kind": "uniform", "lo": 0, "hi": 0.1}) == ThetaDist.uniform(0, 0.1)
    assert ThetaDist.parse({"kind": "beta", "a": 0.25, "b": 25}).params == (0.25, 25.0)
    for bad in [("uniform", (1, 0)), ("beta", (0, 1)), ("point_mass", (1, 2)), ("normal", (0, 1))]:
        with pytest.raises(ValueError):
            ThetaDist(*bad)
    rng = np.random.default_rng(0)
    draws = [ThetaDist.uniform(0.1, 0.2).sample(rng) for _ in range(200)]
    assert min(draws) >= 0.1 and max(draws) <= 0.2


def test_make_kernel():
    assert isinstance(make_kernel("edge_flip"), EdgeFlipKernel)
    assert make_kernel("censor_fill", k=3).k == 3
    assert isinstance(make_kernel("contamination", blocks=[0, 0, 1]), ContaminationKernel)
    with pytest.raises(ValueError, match="edge_flip"):
        make_kernel("rewire")
    assert set(KERNELS) == {"edge_flip", "censor_fill", "contamination"}


@pytest.mark.parametrize("estimator", ["HT", "Hajek"])
def test_zero_deviation_reproduces_baseline(pa_data, estimator):
    a, m, d, data = pa_data
    r = run_pba(data, a, EdgeFlipKernel(), {"theta0": 0.0, "theta1": 1.0}, m, d, ("c11", "c00"),
                iters=5, R=300, estimator=estimator, seed=4)
    base = effect(data, estimate_tables(a, m, d, R=300, seed=4), "c11", "c00", estimator)
    assert r.baseline == base.point
    assert np.all(r.estimates == base.point)
    assert summarize(r)["mean"] == base.point
    r2 = run_pba(data, a, CensorFillKernel(2), ThetaDist.point_mass(0), m, d, ("c11", "c00"),
                 iters=3, R=300, estimator=estimator, seed=4)
    assert np.all(r2.estimates == base.point)


def test_contamination_point_mass_spread_grows(trial):
    k = ContaminationKernel(trial.school)
    widths = []
    for theta in (0.0005, 0.005, 0.05):
        r = run_pba(trial.data, trial.a_sp, k, ThetaDist.point_mass(theta), trial.mapping, trial.design,
                    ("c11", "c00"), iters=60, R=300, seed=1)
        s = summarize(r, [2.5, 97.5])
        widths.append(s["p97.5"] - s["p2.5"])
    assert widths[0] < widths[1] < widths[2]


def test_random_error_adds_spread(pa_data):
    a, m, d, data = pa_data
    ratios = []
    for seed in range(3):
        r = run_pba(data, a, EdgeFlipKernel(), {"theta0": ThetaDist.uniform(0, 0.01),
                                                "theta1": ThetaDist.uniform(0.8, 1.0)},
                    m, d, ("c11", "c00"), iters=40, R=200, estimator="HT", random_error=True, seed=seed)
        assert r.with_random_error.shape == r.estimates.shape
        ratios.append(np.var(r.with_random_error) >= np.var(r.estimates))
    assert all(ratios)


def test_threads_do_not_change_results(trial):
    k = ContaminationKernel(trial.school)
    args = (trial.data, trial.a_sp, k, ThetaDist.uniform(0, 0.01), trial.mapping, trial.design, ("c11", "c00"))
    r1 = run_pba(*args, iters=12, R=200, seed=5, threads=1, random_error=True)
    r3 = run_pba(*args, iters=12, R=200, seed=5, threads=3, random_error=True)
    assert np.array_equal(r1.estimates, r3.estimates)
    assert np.array_equal(r1.with_random_error, r3.with_random_error)
    assert np.array_equal(r1.thetas["theta0"], r3.thetas["theta0"])


def test_covariate_form_clamps(trial):
    cov = np.arange(trial.a_sp.n) % 2
    k = ContaminationKernel(trial.school, covariate=cov)
    assert k.params == ("theta0", "theta1")
    r = run_pba(trial.data, trial.a_sp, k, {"theta0": 0.0, "theta1": ThetaDist.point_mass(-0.5)},
                trial.mapping, trial.design, ("c11", "c00"), iters=2, R=100)
    assert k.clamped > 0
    assert np.all(r.estimates == r.baseline)


def test_degenerate_iterations_are_counted():
    # two units, one edge; removing the edge makes c11 impossible for both units
    a = Network(2, [(0, 1)])
    m, d = ThresholdMapping.constant(2), Design.bernoulli(2)
    data = ObservedData([1, 1], [1.0, 2.0])
    r = run_pba(data, a, EdgeFlipKernel(), {"theta0": 0.0, "theta1": 0.0}, m, d, ("c11", "c00"),
                iters=4, R=50, estimator="Hajek")
    assert r.degenerate_count == 4 and r.estimates.size == 0
    with pytest.raises(ValueError):
        summarize(r)


def test_parameter_mismatch(pa_data):
    a, m, d, data = pa_data
    with pytest.raises(ValueError):
        run_pba(data, a, EdgeFlipKernel(), ThetaDist.point_mass(0), m, d, ("c11", "c00"), iters=1)
    with pytest.raises(ValueError):
        run_pba(data, a, EdgeFlipKernel(), {"theta0": 0.0}, m, d, ("c11", "c00"), iters=1)
    with pytest.raises(ValueError):
        run_pba(data, a, EdgeFlipKernel(), {"theta0": 2.0, "theta1": 1.0}, m, d, ("c11", "c00"), iters=1)
    with pytest.raises(ValueError):
        run_pba(data, a, CensorFillKernel(2), 0.0, m, d, ("c11", "c00"), iters=0)


def test_summarize_conventions():
    assert summarize(np.full(7, 3.25), [2.5, 50, 97.5]) == {"mean": 3.25, "p2.5": 3.25, "p50": 3.25, "p97.5": 3.25}
    s = summarize(np.arange(1, 101), [50])
    assert s["p50"] == 50.5
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = summarize(rng.normal(size=15), [2.5, 97.5])
        assert s["p2.5"] <= s["p97.5"]
    with pytest.raises(ValueError):
        summarize(np.array([]))
