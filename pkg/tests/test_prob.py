import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import brute_levels, random_network, small_networks
from netmis.design import Design
from netmis.exposure import ThresholdMapping
from netmis.graph import Network
from netmis.prob import (
    ProbTables,
    check_positivity,
    cross_from_level_matrices,
    estimate_cross,
    estimate_tables,
    exact_cross,
    exact_tables,
    replicate_levels,
)

C11, C01, C10, C00 = range(4)


def brute_probs(nets, nu, p=0.5):
    """Individual, same-level pairwise and cross-network probabilities by looping over 2^n."""
    n = nets[0].n
    ind = np.zeros((4, n))
    pair = np.zeros((4, 4, n, n))
    cross = np.zeros((n, 4, 4))
    for bits in itertools.product((0, 1), repeat=n):
        z = np.array(bits)
        w = p ** z.sum() * (1 - p) ** (n - z.sum())
        per = [brute_levels(z, a, nu) for a in nets]
        agree = np.where(np.all([x == per[0] for x in per], axis=0), per[0], -1)
        for i in range(n):
            if agree[i] >= 0:
                ind[agree[i], i] += w
            if len(nets) == 2:
                cross[i, per[0][i], per[1][i]] += w
            for j in range(n):
                if agree[i] >= 0 and agree[j] >= 0:
                    pair[agree[i], agree[j], i, j] += w
    return ind, pair, cross


def test_exact_single_isolated_unit():
    t = exact_tables(Network(1), ThresholdMapping.constant(1), Design.bernoulli(1, 0.5))
    assert t.individual[:, 0].tolist() == [0.0, 0.0, 0.5, 0.5]


def test_exact_single_edge():
    t = exact_tables(Network(2, [(0, 1)]), ThresholdMapping.constant(2), Design.bernoulli(2, 0.5))
    assert np.allclose(t.individual, 0.25)


def test_exact_complete_one_of_two():
    t = exact_tables(Network(2, [(0, 1)]), ThresholdMapping.constant(2), Design.complete(2, 1))
    assert np.all(t.individual[C11] == 0)
    assert np.allclose(t.individual[C10], 0.5) and np.allclose(t.individual[C01], 0.5)


def test_exact_too_large():
    with pytest.raises(ValueError):
        exact_tables(Network(21), ThresholdMapping.constant(21), Design.bernoulli(21))


@given(st.lists(small_networks(min_n=5, max_n=5), min_size=1, max_size=2), st.data())
def test_exact_tables_match_loop_oracle(nets, data):
    nu = np.array(data.draw(st.lists(st.sampled_from([0.0, 0.3, 0.6]), min_size=5, max_size=5)))
    m = ThresholdMapping(nu)
    d = Design.bernoulli(5, 0.5)
    ind, pair, cross = brute_probs(nets, nu)
    t = exact_tables(nets, m, d)
    assert np.allclose(t.individual, ind, atol=1e-12)
    for l, k in itertools.product(range(4), repeat=2):
        assert np.allclose(t.pairwise(l, k), pair[l, k], atol=1e-12)
    if len(nets) == 2:
        c = exact_cross(nets[0], nets[1], m, d)
        assert np.allclose(c.joint, cross, atol=1e-12)


def test_smoothing_floor():
    # an isolated unit is never exposed: count 0 at c11 gives 1/(R+1)
    a = Network(3, [(0, 1)])
    t = estimate_tables(a, ThresholdMapping.constant(3), Design.bernoulli(3), R=9999, seed=1)
    assert t.individual[C11, 2] == 1 / 10000
    assert np.all(t.individual >= 1 / 10000)
    assert t.counts.sum(axis=0).tolist() == [9999] * 3


def test_closed_form_exposure_under_coins():
    rng = np.random.default_rng(3)
    a = random_network(rng, 30, 0.1)
    R = 20000
    t = estimate_tables(a, ThresholdMapping.constant(30), Design.bernoulli(30), R=R, seed=5)
    p = 0.5 * (1 - 0.5 ** a.degree)
    raw = t.raw_individual()[C11]
    assert np.all(np.abs(raw - p) <= 3 * np.sqrt(p * (1 - p) / R) + 1e-12)


def test_duplicate_networks_same_tables():
    rng = np.random.default_rng(4)
    a = random_network(rng, 12, 0.3)
    m, d = ThresholdMapping.constant(12), Design.bernoulli(12)
    t1 = estimate_tables([a], m, d, R=2000, seed=2)
    t2 = estimate_tables([a, a], m, d, R=2000, seed=2)
    assert np.array_equal(t1.individual, t2.individual)
    assert np.array_equal(t1.pairwise(C11, C00), t2.pairwise(C11, C00))


def test_pairwise_structure():
    rng = np.random.default_rng(6)
    a = random_network(rng, 15, 0.2)
    t = estimate_tables(a, ThresholdMapping(rng.random(15) * 0.5), Design.bernoulli(15), R=3000, seed=1)
    for l in range(4):
        p = t.pairwise(l)
        assert np.allclose(p, p.T)
        assert np.array_equal(np.diag(p), t.individual[l])
        raw = t.pair_counts(l) / t.R
        ri = t.raw_individual()[l]
        assert np.all(raw <= np.minimum.outer(ri, ri) + 1e-12)
        assert np.all((p >= 0) & (p <= 1))
    cross = t.pairwise(C11, C00)
    assert np.array_equal(cross, t.pairwise(C00, C11).T)
    # a unit cannot be at two levels at once
    assert np.all(np.diag(cross) == 0)
    assert np.array_equal(t.zero_mask(C11, C00), t.pair_counts(C11, C00) == 0)


def test_levels_partition_each_replicate():
    rng = np.random.default_rng(7)
    a = random_network(rng, 20, 0.2)
    t = estimate_tables(a, ThresholdMapping.constant(20), Design.bernoulli(20), R=500, seed=0)
    assert np.allclose(t.raw_individual().sum(axis=0), 1.0)


@pytest.mark.parametrize("design", ["bernoulli", "complete", "cluster"])
def test_monte_carlo_converges_to_exact(design):
    rng = np.random.default_rng(11)
    n = 9
    a = random_network(rng, n, 0.3)
    m = ThresholdMapping(rng.choice([0.0, 0.25, 0.5], n))
    d = {"bernoulli": Design.bernoulli(n, 0.5), "complete": Design.complete(n, 4),
         "cluster": Design.cluster(np.arange(n) % 3, 1)}[design]
    R = 20000
    ex = exact_tables(a, m, d)
    mc = estimate_tables(a, m, d, R=R, seed=3)
    assert np.max(np.abs(mc.raw_individual() - ex.individual)) <= 4 * math.sqrt(0.25 / R)
    assert np.max(np.abs(mc.pair_counts(C11, C00) / R - ex.pairwise(C11, C00))) <= 4 * math.sqrt(0.25 / R)


def test_cross_same_network():
    rng = np.random.default_rng(8)
    a = random_network(rng, 10, 0.3)
    m, d = ThresholdMapping.constant(10), Design.bernoulli(10)
    c = estimate_cross(a, a, m, d, R=4000, seed=1)
    t = estimate_tables(a, m, d, R=4000, seed=1)
    for l, k in itertools.product(range(4), repeat=2):
        if l != k:
            assert np.all(c.joint[:, l, k] == 0)
        else:
            assert np.allclose(c.joint[:, l, l], t.counts[l] / 4001)
    assert np.all(c.joint.sum(axis=(1, 2)) <= 1)


def test_cross_line_graph_with_flipped_edge():
    line = Network(6, [(i, i + 1) for i in range(5)])
    flipped = Network(6, [(0, 1), (1, 2), (3, 4), (4, 5), (2, 5)])
    m, d = ThresholdMapping.constant(6), Design.bernoulli(6)
    _, _, oracle = brute_probs([line, flipped], np.zeros(6))
    R = 40000
    c = estimate_cross(line, flipped, m, d, R=R, seed=9)
    assert np.max(np.abs(c.joint * (R + 1) / R - oracle)) <= 4 * math.sqrt(0.25 / R)
    assert np.allclose(exact_cross(line, flipped, m, d).joint, oracle)


def test_cross_from_levels_matches_estimate():
    rng = np.random.default_rng(2)
    a, b = random_network(rng, 8, 0.3), random_network(rng, 8, 0.3)
    m, d = ThresholdMapping.constant(8), Design.bernoulli(8)
    la = replicate_levels([a], m, d, 700, 4)
    lb = replicate_levels([b], m, d, 700, 4)
    assert np.array_equal(cross_from_level_matrices(la, lb, m.levels, 700).joint,
                          estimate_cross(a, b, m, d, R=700, seed=4).joint)


def test_positivity_examples():
    m = ThresholdMapping.constant(3)
    t = estimate_tables(Network(3, [(0, 1)]), m, Design.bernoulli(3), R=1000, seed=0)
    rep = check_positivity(t)
    assert rep.violations == [(2, "c11"), (2, "c01")]
    assert rep.by_level() == {"c11": 1, "c01": 1}
    full = Network(5, list(itertools.combinations(range(5), 2)))
    t = estimate_tables(full, ThresholdMapping.constant(5), Design.bernoulli(5), R=10000, seed=0)
    assert check_positivity(t).ok
    assert len(check_positivity(t, threshold=10001).violations) == 20
    ex = exact_tables(Network(3, [(0, 1)]), m, Design.bernoulli(3))
    assert check_positivity(ex).violations == [(2, "c11"), (2, "c01")]


def test_thread_count_does_not_change_tables():
    rng = np.random.default_rng(5)
    a = random_network(rng, 40, 0.1)
    m, d = ThresholdMapping.constant(40), Design.bernoulli(40)
    t1 = estimate_tables(a, m, d, R=3000, seed=7, threads=1)
    t4 = estimate_tables(a, m, d, R=3000, seed=7, threads=4)
    assert np.array_equal(t1.level_matrix, t4.level_matrix)
    assert np.array_equal(t1.pairwise(C11), t4.pairwise(C11))


def test_errors():
    m = ThresholdMapping.constant(3)
    with pytest.raises(ValueError):
        estimate_tables(Network(3), m, Design.bernoulli(3), R=0)
    with pytest.raises(ValueError):
        estimate_tables(Network(3), m, Design.bernoulli(4), R=10)
    with pytest.raises(ValueError):
        estimate_tables([Network(3), Network(4)], m, Design.bernoulli(3), R=10)
    with pytest.raises(ValueError):
        ProbTables(("a",), np.zeros((2, 2), dtype=np.int8))
