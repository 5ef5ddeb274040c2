import math

import numpy as np
import pytest

from branchlab.cmj import (
    CapExceededError,
    ancestor_counts,
    count_generation,
    decomposition_terms,
    expected_event_count,
    simulate_cmj,
    simulate_embedded_rrt,
)
from branchlab.distributions import make_distribution
from branchlab.errors import TableCoverageError
from branchlab.recursive_tree import generate_rrt
from branchlab.renewal import build_renewal_table
from branchlab.rng import RngStream
from branchlab.stat_tests import ks_two_sample

EXP1 = make_distribution("exp(1)")
GAMMA22 = make_distribution("gamma(2,2)")
DET1 = make_distribution("det(1)")


@pytest.fixture(scope="module")
def exp_table_200():
    return build_renewal_table(EXP1, 200.0, h=0.02, k_max=2)


@pytest.fixture(scope="module")
def exp_trajs_200():
    return [simulate_cmj(EXP1, 200.0, 2, RngStream(31, r)) for r in range(250)]


def test_det_trajectory_by_hand():
    traj = simulate_cmj(DET1, 2.5, 2, RngStream(0, 0))
    assert np.array_equal(traj.times[0], [1.0, 2.0])
    assert np.array_equal(traj.times[1], [2.0])
    assert count_generation(traj, 1, 2.5) == 2
    assert count_generation(traj, 2, 2.5) == 1
    assert count_generation(traj, 2, 1.5) == 0
    # counting is inclusive at the query time
    assert count_generation(traj, 2, 2.0) == 1
    assert traj.anc1[1][0] == 1
    assert traj.parent_idx[1][0] == 0


def test_zero_horizon_is_empty():
    traj = simulate_cmj(EXP1, 0.0, 2, RngStream(3, 0))
    assert traj.n_events == 0
    assert count_generation(traj, 1, 0.0) == 0
    assert count_generation(traj, 2, -1.0) == 0


def test_first_generation_mean():
    m = 3000
    counts = [
        count_generation(simulate_cmj(EXP1, 10.0, 1, RngStream(8, r)), 1, 10.0)
        for r in range(m)
    ]
    se = math.sqrt(10.0 / m)
    assert abs(float(np.mean(counts)) - 10.0) < 4 * se


def test_generation_times_sorted_and_bounded():
    for r in range(5):
        traj = simulate_cmj(EXP1, 8.0, 3, RngStream(21, r))
        for g in range(3):
            t = traj.times[g]
            assert np.all(np.diff(t) >= 0)
            assert t.size == 0 or (t[0] > 0 and t[-1] <= 8.0)


def test_event_stream_invariants():
    traj = simulate_cmj(EXP1, 8.0, 3, RngStream(9, 4))
    seen = []
    per_gen = {1: 0, 2: 0, 3: 0}
    for ev in traj.events():
        if seen:
            assert ev.time >= seen[-1].time
        if ev.generation == 1:
            assert ev.parent_event is None
        else:
            parent = seen[ev.parent_event]
            assert parent.generation == ev.generation - 1
            assert parent.time <= ev.time
            assert parent.ancestor1 == ev.ancestor1
        per_gen[ev.generation] += 1
        seen.append(ev)
    for k in (1, 2, 3):
        assert per_gen[k] == count_generation(traj, k, 8.0)


def test_ancestor_counts_partition():
    traj = simulate_cmj(EXP1, 6.0, 3, RngStream(14, 2))
    for k in (1, 2, 3):
        for t in (3.0, 6.0):
            split = ancestor_counts(traj, k, t)
            assert split.shape[0] == traj.times[0].shape[0]
            assert int(split.sum()) == count_generation(traj, k, t)
    # generation 1 attributes each individual to itself
    own = ancestor_counts(traj, 1, 4.0)
    assert np.array_equal(own, (traj.times[0] <= 4.0).astype(np.int64))


def test_count_generation_range_errors():
    traj = simulate_cmj(EXP1, 5.0, 2, RngStream(0, 1))
    with pytest.raises(ValueError):
        count_generation(traj, 0, 1.0)
    with pytest.raises(ValueError):
        count_generation(traj, 3, 1.0)
    with pytest.raises(ValueError):
        count_generation(traj, 1, 6.0)


def test_expected_event_count_oracle():
    assert expected_event_count(EXP1, 10.0, 2) == pytest.approx(60.0)
    assert expected_event_count(GAMMA22, 4.0, 1) == pytest.approx(4.0)


def test_cap_precheck_raises():
    with pytest.raises(CapExceededError):
        simulate_cmj(EXP1, 2000.0, 3, RngStream(0, 0), event_cap=10**6)


def test_embedded_root_child_time():
    m = 2000
    first = np.array(
        [simulate_embedded_rrt(1, RngStream(40, r)).birth_times[0] for r in range(m)]
    )
    assert abs(float(first.mean()) - 1.0) < 4.0 / math.sqrt(m)


def test_embedded_growth_clock():
    # time of the n-th attachment is a sum of independent exponentials
    # with rates 1..n, so its mean is the harmonic number
    n, m = 100, 1500
    taus = np.array(
        [simulate_embedded_rrt(n, RngStream(41, r)).birth_times[-1] for r in range(m)]
    )
    h_n = float(np.sum(1.0 / np.arange(1, n + 1)))
    var = float(np.sum(1.0 / np.arange(1, n + 1) ** 2))
    assert abs(float(taus.mean()) - h_n) < 4 * math.sqrt(var / m)


def test_embedded_tree_shape():
    emb = simulate_embedded_rrt(50, RngStream(6, 0))
    parent = emb.tree.parent
    assert parent[0] == -1
    for i in range(1, 51):
        assert 0 <= parent[i] < i
    assert np.all(np.diff(emb.birth_times) > 0)
    empty = simulate_embedded_rrt(0, RngStream(6, 1))
    assert empty.tree.parent.shape == (1,)
    assert empty.birth_times.shape == (0,)


def test_embedded_profile_matches_uniform_attachment():
    """The clock construction and uniform attachment must agree in law.

    Compared through the level-1 count of a 201-vertex tree with a
    two-sample test at the 0.001 level.
    """
    n, m = 200, 1500
    direct = np.empty(m)
    embedded = np.empty(m)
    for r in range(m):
        d = generate_rrt(n + 1, RngStream(51, r)).depths()
        direct[r] = float(np.count_nonzero(d == 1))
        e = simulate_embedded_rrt(n, RngStream(52, r)).tree.depths()
        embedded[r] = float(np.count_nonzero(e == 1))
    report = ks_two_sample(direct, embedded)
    assert report.statistic < 1.9495 * math.sqrt(2.0 / m)


def test_decomposition_identities(exp_table_200, exp_trajs_200):
    table = exp_table_200
    for traj in exp_trajs_200[:20]:
        for t in (50.0, 125.0, 200.0):
            d = decomposition_terms(traj, table, 2, t)
            lhs = d.y1 + d.y2 + d.y3
            assert lhs == pytest.approx(d.count - t**2 / 2.0, abs=1e-6 * max(1.0, t**2))
            lhs_star = d.y1 + d.y2_star
            assert lhs_star == pytest.approx(
                d.count - float(table.interp(2, t)), abs=1e-6 * max(1.0, t**2)
            )


def test_decomposition_remainders_fade(exp_table_200, exp_trajs_200):
    """y1 and y3 grow slower than the t^{k-1/2} fluctuation scale."""
    scaled_y1 = []
    scaled_y3 = []
    for t in (50.0, 100.0, 200.0):
        vals = [decomposition_terms(tr, exp_table_200, 2, t) for tr in exp_trajs_200]
        scaled_y1.append(float(np.mean([abs(d.y1) for d in vals])) / t**1.5)
        scaled_y3.append(abs(vals[0].y3) / t**1.5)
    assert scaled_y1[0] > scaled_y1[1] - 1e-6 > scaled_y1[2] - 2e-6
    assert scaled_y3[0] >= scaled_y3[1] - 1e-6 >= scaled_y3[2] - 2e-6


def test_variance_growth_scale(exp_trajs_200):
    for k, power in ((1, 1.0), (2, 3.0)):
        v50 = float(np.var([count_generation(tr, k, 50.0) for tr in exp_trajs_200], ddof=1))
        v100 = float(np.var([count_generation(tr, k, 100.0) for tr in exp_trajs_200], ddof=1))
        ratio = (v100 / 100.0**power) / (v50 / 50.0**power)
        assert 1.0 / 3.0 < ratio < 3.0


def test_decomposition_validation(exp_table_200, exp_trajs_200):
    traj = exp_trajs_200[0]
    with pytest.raises(ValueError):
        decomposition_terms(traj, exp_table_200, 1, 10.0)
    with pytest.raises(ValueError):
        decomposition_terms(traj, exp_table_200, 3, 10.0)
    with pytest.raises(ValueError):
        decomposition_terms(traj, exp_table_200, 2, 201.0)
    gamma_table = build_renewal_table(GAMMA22, 10.0, h=0.1, k_max=2)
    with pytest.raises(ValueError):
        decomposition_terms(traj, gamma_table, 2, 5.0)
    low_order = build_renewal_table(EXP1, 200.0, h=1.0, k_max=1)
    with pytest.raises(TableCoverageError):
        decomposition_terms(traj, low_order, 2, 10.0)
