import dataclasses
import math

import numpy as np
import pytest

from userdp import variance as var
from userdp.pld import PrivacyParams


def setting(**kw):
    base = dict(N=1024, K=32, T=200, B=64, M=16, G_els=32, G_uls=4, d=1,
                L_els=10.0, L_uls=10.0, target=PrivacyParams(1.0, 1e-6))
    base.update(kw)
    return var.BudgetSetting(**base)


def test_setting_validation():
    with pytest.raises(ValueError):
        setting(B=64, G_els=1, N=32)  # p > 1
    with pytest.raises(ValueError):
        setting(M=2048)  # q > 1
    with pytest.raises(ValueError):
        setting(L_uls=11.0)


def test_probabilities():
    s = setting()
    assert s.p == 64 / (32 * 1024)
    assert s.q == 16 / 1024


def test_doubling_budget_quarters_variance_at_fixed_sigma():
    s = setting()
    v1 = var.noise_variance_els(s, sigma=2.0)
    v2 = var.noise_variance_els(dataclasses.replace(s, B=128), sigma=2.0)
    assert v2 == pytest.approx(v1 / 4, rel=1e-15)


def test_uls_group_one_equals_els_single_example():
    s = setting(G_els=1, G_uls=1, M=64, B=64)
    assert var.noise_variance_uls(s) == pytest.approx(var.noise_variance_els(s), rel=2e-3)


def test_large_epsilon_limit():
    s = setting(target=PrivacyParams(100.0, 1e-6))
    sig = var.sigma_els(s)
    assert var.noise_variance_els(s) == pytest.approx(s.d * (sig * s.L_els / s.B) ** 2, rel=1e-15)
    # Noise needed at a huge epsilon is a small fraction of that at a moderate one.
    assert sig < var.sigma_els(setting(target=PrivacyParams(4.0, 1e-6))) / 3


def test_variance_sign_identity():
    s = setting(L_uls=10.0 / 2)
    v_els, v_uls = var.noise_variance_els(s), var.noise_variance_uls(s)
    lhs = s.L_els * var.sigma_els(s)
    rhs = s.G_uls * s.L_uls * var.sigma_uls(s)
    assert (v_els <= v_uls) == (lhs <= rhs)


def test_l_uls_rules():
    assert var.l_uls("equal", 10.0, 4) == 10.0
    assert var.l_uls("inverse_sqrt", 10.0, 4) == 5.0
    with pytest.raises(ValueError):
        var.l_uls("cubic", 10.0, 4)


def test_grid_skips_invalid_cells():
    grid = var.budget_grid(epsilons=(1.0,), budgets=(8, 16, 1024), cohorts=(16,))
    assert [s.B for s in grid] == [16]


def test_curves_match_individual_calls():
    grid = var.budget_grid(epsilons=(1.0, 4.0), budgets=(32, 128), cohorts=(16,), T=100)
    rows = var.variance_curves(grid)
    assert [(r[2], r[0]) for r in rows] == sorted((r[2], r[0]) for r in rows)
    for row in rows[:3]:
        s = next(g for g in grid if g.B == row[0] and g.target.epsilon == row[2])
        assert row[3] == var.noise_variance_els(s)
        eq = dataclasses.replace(s, L_uls=s.L_els)
        div = dataclasses.replace(s, L_uls=s.L_els / math.sqrt(s.G_uls))
        assert row[4] == var.noise_variance_uls(eq)
        assert row[5] == var.noise_variance_uls(div)


def test_variance_non_increasing_in_epsilon():
    vals = [var.noise_variance_uls(setting(target=PrivacyParams(e, 1e-6))) for e in (0.5, 1, 4)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    vals = [var.noise_variance_els(setting(target=PrivacyParams(e, 1e-6))) for e in (0.5, 1, 4)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
