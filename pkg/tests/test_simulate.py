import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from userdp import simulate as sim
from userdp.pld import PrivacyParams
from userdp.simulate import SyntheticSpec, TrainConfig


def small_data(seed=0, **kw):
    spec = dict(seed=seed, N=32, K=8, d=4, sigma1=1.0, sigma2=1.0)
    spec.update(kw)
    return sim.generate_synthetic(SyntheticSpec(**spec))


# --- data ------------------------------------------------------------------


def test_degenerate_data_equals_mean():
    data = sim.generate_synthetic(SyntheticSpec(seed=3, sigma1=0.0, sigma2=0.0))
    assert np.array_equal(data.examples, np.broadcast_to(data.true_mean, data.examples.shape))


def test_same_seed_same_data():
    a = sim.generate_synthetic(SyntheticSpec(seed=11))
    b = sim.generate_synthetic(SyntheticSpec(seed=11))
    assert a.examples.tobytes() == b.examples.tobytes()
    assert a.true_mean.tobytes() == b.true_mean.tobytes()


def test_grand_mean_within_clt_bound():
    spec = SyntheticSpec(seed=5, sigma1=1.0, sigma2=2.0)
    data = sim.generate_synthetic(spec)
    grand = data.examples.reshape(-1, spec.d).mean(axis=0)
    # User means are shared across a user's K examples, so sigma1 enters once per user.
    bound = 3 * np.sqrt(spec.sigma1 ** 2 / spec.N + spec.sigma2 ** 2 / (spec.N * spec.K))
    assert np.all(np.abs(grand - data.true_mean) <= bound)


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(seed=0, N=0)
    with pytest.raises(ValueError):
        SyntheticSpec(seed=0, sigma2=-1.0)


def test_ragged_dataset_round_trip():
    users = [np.ones((2, 3)), np.zeros((5, 3))]
    data = sim.UserDataset.from_users(np.zeros(3), users)
    assert data.sizes.tolist() == [2, 5]
    assert [u.shape for u in data.users] == [(2, 3), (5, 3)]


# --- clip --------------------------------------------------------------------


def test_clip_cases():
    v = np.array([2.0, 0.0])
    np.testing.assert_allclose(sim.clip(v, 1.0), [1.0, 0.0])
    w = np.array([0.3, 0.4])
    assert np.array_equal(sim.clip(w, 1.0), w)
    assert np.array_equal(sim.clip(np.zeros(3), 1.0), np.zeros(3))
    with pytest.raises(ValueError):
        sim.clip(v, 0.0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8), st.floats(1e-3, 1e3))
def test_clip_norm_bound(values, C):
    out = sim.clip(np.array(values), C)
    assert np.linalg.norm(out) <= C * (1 + 1e-12)


# --- single runs -------------------------------------------------------------


def cfg(variant="els", **kw):
    base = dict(variant=variant, T=20, learning_rate=0.5, clip_norm=1.0, group_size=4,
                batch_size=16, seed=7)
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(variant="xls")
    with pytest.raises(ValueError):
        cfg(learning_rate=0.0)


def test_batch_size_limits():
    data = small_data()
    with pytest.raises(ValueError):
        sim.dp_sgd_els(data, cfg(batch_size=10_000), 1.0)
    with pytest.raises(ValueError):
        sim.dp_sgd_uls(data, cfg("uls", batch_size=33), 1.0)
    with pytest.raises(ValueError):
        sim.dp_sgd_els(data, cfg("uls"), 1.0)


@pytest.mark.parametrize("variant,G,size", [("els", 4, 16), ("els", 8, 256), ("uls", 1, 16),
                                            ("uls", 3, 8), ("uls", 8, 32)])
def test_fast_path_matches_reference(variant, G, size):
    data = small_data()
    c = cfg(variant, group_size=G, batch_size=size, clip_norm=0.7)
    fast = (sim.dp_sgd_els if variant == "els" else sim.dp_sgd_uls)(data, c, 1.3, check=True)
    ref = sim.dp_sgd_reference(data, c, 1.3)
    np.testing.assert_allclose(fast.final_params, ref.final_params, rtol=0, atol=1e-12)


def test_reference_accepts_custom_gradient():
    data = small_data()
    c = cfg("uls", group_size=2, batch_size=8)
    scaled = sim.dp_sgd_reference(data, c, 0.0, grad_fn=lambda th, Z: 2 * (th - Z))
    assert np.all(np.isfinite(scaled.final_params))


def test_single_step_closed_form():
    data = small_data()
    c = cfg("els", T=1, learning_rate=0.3, clip_norm=0.5, group_size=8, batch_size=16)
    out = sim.dp_sgd_els(data, c, 0.0)
    rng = np.random.default_rng(c.seed)
    batches, _, _ = sim._els_plan(data, 8, 16, 1, rng)
    Z = data.examples.reshape(-1, data.dim)[batches[0]]
    # theta^1 = -eta / B * sum clip(0 - z, C)
    expected = -0.3 / 16 * sim.clip(-Z, 0.5).sum(axis=0)
    np.testing.assert_allclose(out.final_params, expected, rtol=0, atol=1e-15)


def test_full_batch_noiseless_converges_to_empirical_mean():
    data = small_data()
    n = data.num_users * data.examples.shape[1]
    c = cfg("els", T=60, learning_rate=0.9, clip_norm=1e9, group_size=8, batch_size=n)
    out = sim.dp_sgd_els(data, c, 0.0)
    emp = data.examples.reshape(-1, data.dim).mean(axis=0)
    np.testing.assert_allclose(out.final_params, emp, atol=1e-12)
    assert out.eval_loss == pytest.approx(np.mean((emp - data.true_mean) ** 2), rel=1e-9)


def test_linear_convergence_rate():
    data = small_data()
    n = data.num_users * data.examples.shape[1]
    emp = data.examples.reshape(-1, data.dim).mean(axis=0)
    eta = 0.25
    errs = []
    for T in (1, 2, 3):
        c = cfg("els", T=T, learning_rate=eta, clip_norm=1e9, group_size=8, batch_size=n)
        errs.append(np.linalg.norm(sim.dp_sgd_els(data, c, 0.0).final_params - emp))
    assert errs[1] / errs[0] == pytest.approx(1 - eta, rel=1e-9)
    assert errs[2] / errs[1] == pytest.approx(1 - eta, rel=1e-9)


def test_uls_invariant_to_group_size_without_diversity():
    data = small_data(sigma1=0.0, sigma2=0.0)
    outs = [sim.dp_sgd_uls(data, cfg("uls", group_size=G, batch_size=8), 0.0).final_params
            for G in (1, 2, 8)]
    for o in outs[1:]:
        np.testing.assert_allclose(o, outs[0], atol=1e-14)


def test_els_contribution_bound():
    data = small_data()
    rng = np.random.default_rng(0)
    _, _, pool = sim._els_plan(data, 3, 8, 5, rng)
    users = pool // data.examples.shape[1]
    assert np.bincount(users).max() <= 3
    assert np.unique(pool).size == pool.size


def test_uls_cohort_sizes_and_subsets():
    data = small_data()
    cohorts, picks, valid, _ = sim._uls_plan(data, 3, 8, 10, np.random.default_rng(0))
    assert cohorts.shape == (10, 8)
    assert all(np.unique(row).size == 8 for row in cohorts)
    assert valid.sum(axis=-1).max() == 3
    for t in range(10):
        for j in range(8):
            chosen = picks[t, j][valid[t, j]]
            assert np.unique(chosen).size == chosen.size


def test_clip_assertion_catches_violation():
    theta = np.zeros((1, 1, 2))
    Z = np.array([[[3.0, 4.0]]])
    with pytest.raises(AssertionError):
        sim._step(theta, Z, np.ones((1, 1)) * 2.0, np.array([1.0]), 1.0,
                  np.zeros((1, 2)), 0.0, np.array([1.0]), True)


@pytest.mark.parametrize("variant,size", [("els", 8), ("uls", 4)])
def test_noise_variance(variant, size):
    # With every example at the origin and theta = 0 the gradients vanish,
    # so a one-step update is pure noise with std eta * C * sigma / size.
    d = 4
    data = sim.UserDataset(np.zeros(d), np.zeros((16, 2, d)), np.full(16, 2))
    C, sigma, eta = 0.5, 1.7, 1.0
    trials = 25_000
    datasets = [data] * trials
    seeds = range(trials)
    theta = sim._simulate(datasets, variant, 2, size, 1, sigma, [eta], [C], seeds)
    samples = theta.reshape(-1)
    assert samples.size == 100_000
    assert np.var(samples) == pytest.approx((C * sigma / size) ** 2, rel=0.05)


def test_uls_group_one_matches_els_update_distribution():
    # One noiseless step of ULS with G = 1, M = B draws one random example from
    # each of B distinct users, exactly like ELS with one example kept per user.
    data = small_data(N=64, K=4)
    B = 16
    trials = 10_000
    els = sim._simulate([data] * trials, "els", 1, B, 1, 0.0, [1.0], [0.5], range(trials))
    uls = sim._simulate([data] * trials, "uls", 1, B, 1, 0.0, [1.0], [0.5],
                        range(trials, 2 * trials))
    e, u = els[:, 0], uls[:, 0]
    se = np.sqrt(e.var(axis=0) / trials + u.var(axis=0) / trials)
    assert np.all(np.abs(e.mean(axis=0) - u.mean(axis=0)) <= 4 * se)
    # Sample variances of 10^4 draws agree to a few percent.
    np.testing.assert_allclose(u.var(axis=0), e.var(axis=0), rtol=0.08)


# --- sweep -------------------------------------------------------------------


def test_sweep_single_cell_equals_direct_call():
    spec = SyntheticSpec(seed=0, N=32, K=8, d=4)
    res = sim.sweep(spec, "uls", PrivacyParams(1.0, 1e-6), 16, [2], [0.25], [1.0],
                    trials=1, master_seed=9, T=30, sigma=1.1)
    data = sim.trial_datasets(spec, 1, 9)[0]
    c = TrainConfig("uls", 30, 0.25, 1.0, 2, 8, sim.algorithm_seed(9, "uls", 2, 0))
    direct = sim.dp_sgd_uls(data, c, 1.1)
    assert res.best.mean_loss == direct.eval_loss


def test_sweep_is_deterministic():
    spec = SyntheticSpec(seed=0, N=32, K=8, d=4)
    args = (spec, "els", PrivacyParams(1.0, 1e-6), 16, [4], [0.1, 0.5], [0.5, 2.0])
    a = sim.sweep(*args, trials=4, master_seed=3, T=20)
    b = sim.sweep(*args, trials=4, master_seed=3, T=20)
    assert a.rows == b.rows
    c = sim.sweep(*args, trials=4, master_seed=4, T=20)
    assert a.rows != c.rows


def test_sweep_table_shape_and_best():
    spec = SyntheticSpec(seed=0, N=32, K=8, d=4)
    res = sim.sweep(spec, "uls", PrivacyParams(4.0, 1e-6), 16, [1, 2], [0.1, 8.0], [1.0],
                    trials=3, master_seed=1, T=20)
    assert len(res.rows) == 4
    assert res.best == min(res.rows, key=lambda r: r.mean_loss)
    assert set(res.best_per_group) == {1, 2}
    assert res.rows[0].M_or_B == 16 and res.rows[-1].M_or_B == 8


def test_sweep_rejects_indivisible_budget():
    with pytest.raises(ValueError):
        sim.sweep(SyntheticSpec(seed=0), "uls", PrivacyParams(1.0, 1e-6), 64, [3], trials=1)
