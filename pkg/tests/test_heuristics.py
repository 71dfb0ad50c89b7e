import math

import numpy as np
import pytest

from userdp import heuristics as heur
from userdp import simulate as sim
from userdp.pld import PrivacyParams
from userdp.simulate import SyntheticSpec, UserDataset


def ragged(sizes, d=2):
    return UserDataset.from_users(np.zeros(d), [np.ones((n, d)) for n in sizes])


def test_median_group_size():
    assert heur.els_group_size_heuristic(ragged([16] * 5)) == 16
    assert heur.els_group_size_heuristic(ragged([1, 2, 100])) == 2
    assert heur.els_group_size_heuristic(ragged([1, 2, 3, 100])) == 2


def test_median_statistic_fixture():
    # Lower median of an even-sized sample sitting around a known value.
    sizes = [150, 183, 183, 200, 90, 400]
    assert heur.els_group_size_heuristic(ragged(sizes)) == 183


def test_identical_examples_give_exact_norm():
    z0 = np.array([1.0, 2.0, 2.0])
    data = UserDataset.from_users(np.zeros(3), [np.tile(z0, (5, 1)) for _ in range(10)])
    theta = np.array([0.0, 0.0, 1.0])
    for G in (1, 2, 5, 9):
        est = heur.estimate_L_uls(data, theta, G, n_users=10, seed=1)
        assert est.value == pytest.approx(np.linalg.norm(theta - z0), rel=1e-15)
        assert est.sample_size == 10


def test_averaging_reduces_estimate():
    data = sim.generate_synthetic(SyntheticSpec(seed=2, sigma2=2.0))
    a = heur.estimate_L_uls(data, np.zeros(32), 1, seed=5)
    b = heur.estimate_L_uls(data, np.zeros(32), 16, seed=5)
    assert b.value < a.value


def test_group_above_all_sizes_is_capped():
    data = sim.generate_synthetic(SyntheticSpec(seed=2, N=40, K=6, d=3))
    a = heur.estimate_L_uls(data, np.ones(3), 6, n_users=40, seed=0)
    b = heur.estimate_L_uls(data, np.ones(3), 50, n_users=40, seed=0)
    assert a.value == pytest.approx(b.value, rel=1e-14)


def test_max_statistic_dominates_median():
    data = sim.generate_synthetic(SyntheticSpec(seed=2, N=40, K=6, d=3))
    med = heur.estimate_L_uls(data, np.zeros(3), 2, n_users=40, seed=0)
    mx = heur.estimate_L_uls(data, np.zeros(3), 2, n_users=40, seed=0, statistic="max")
    assert mx.value >= med.value


TARGET = PrivacyParams(1.0, 1e-6)


def test_empty_loop_returns_inputs():
    data = sim.generate_synthetic(SyntheticSpec(seed=0))
    res = heur.estimate_and_double(data, np.zeros(32), 2, 32, 64, TARGET, 64)
    assert (res.G, res.M) == (2, 32)
    assert res.trace == ()


def test_no_diversity_always_doubles_cohort():
    data = sim.generate_synthetic(SyntheticSpec(seed=0, sigma1=0.0, sigma2=0.0))
    res = heur.estimate_and_double(data, np.zeros(32), 2, 4, 128, TARGET, 64)
    assert (res.G, res.M) == (2, 64)
    assert all(s.decision == "double_M" for s in res.trace)
    assert all(s.tau_G == 1.0 and s.tau_M < 1.0 for s in res.trace)


def test_iteration_count_and_budget():
    data = sim.generate_synthetic(SyntheticSpec(seed=1, sigma2=4.0))
    res = heur.estimate_and_double(data, np.zeros(32), 1, 8, 512, TARGET, 64)
    assert len(res.trace) == int(math.log2(512 / 8))
    assert res.G * res.M == 512
    assert res.M <= data.num_users


def test_cohort_cap_falls_back_to_group():
    data = sim.generate_synthetic(SyntheticSpec(seed=1, N=16, K=16, sigma1=0.0, sigma2=0.0))
    res = heur.estimate_and_double(data, np.zeros(32), 1, 8, 64, TARGET, 32)
    assert res.M <= 16
    assert res.G * res.M == 64
    assert any(s.note for s in res.trace)


def test_input_validation():
    data = sim.generate_synthetic(SyntheticSpec(seed=1))
    with pytest.raises(ValueError):
        heur.estimate_and_double(data, np.zeros(32), 3, 8, 64, TARGET, 64)
    with pytest.raises(ValueError):
        heur.estimate_and_double(data, np.zeros(32), 4, 32, 64, TARGET, 64)


def test_power_of_two_cells():
    assert heur.power_of_two_cells(128, 256, 16) == [(1, 128), (2, 64), (4, 32), (8, 16), (16, 8)]
    assert heur.power_of_two_cells(1024, 256, 16) == [(4, 256), (8, 128), (16, 64)]


def test_strategy_comparison_arithmetic():
    losses = {(1, 4): 1.0, (2, 2): 0.5, (4, 1): 2.0}
    ses = {k: 0.1 for k in losses}
    cmp = heur.compare_strategies(losses, ses, (1, 4), 4, 1.0)
    assert cmp.best_cell == (2, 2)
    assert cmp.heuristic_suboptimality == 0.5
    assert cmp.random_suboptimality == pytest.approx((0.5 + 0 + 1.5) / 3)
    assert heur.random_strategy(list(losses), 0) in losses
