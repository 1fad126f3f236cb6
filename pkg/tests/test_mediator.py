import numpy as np
import pytest

from ftnpl.errors import ConfigError, PreconditionError
from ftnpl.mediator import (
    PENALTIES,
    GainMatrices,
    MediatorPolicy,
    draw_code,
    emit_code,
    marginal_gains,
    mediator_reward,
    mediator_update,
)
from ftnpl.numerics.rng import make_rng


def _policy(C=2, in_dim=4, seed=0, **kw):
    return MediatorPolicy.create(in_dim, C, make_rng(seed), **kw)


# -- emit_code ----------------------------------------------------------------------
def test_mean_mode_is_deterministic():
    pol = _policy(input_norm=False)
    info = np.array([0.5, -0.5, 0.2, 0.1])
    a, _ = emit_code(pol, info, "mean", make_rng(1))
    b, _ = emit_code(pol, info, "mean", make_rng(2))
    np.testing.assert_array_equal(a, b)


def test_sample_mode_is_reproducible():
    info = np.array([0.5, -0.5, 0.2, 0.1])
    a, la = emit_code(_policy(), info, "sample", make_rng(7))
    b, lb = emit_code(_policy(), info, "sample", make_rng(7))
    np.testing.assert_array_equal(a, b)
    assert la == lb


@pytest.mark.parametrize("C", [1, 2])
def test_code_length(C):
    for mode in ("mean", "sample"):
        c, _ = emit_code(_policy(C), np.ones(4), mode, make_rng(0))
        assert c.shape == (C,)


def test_mean_mode_log_prob_at_mean():
    pol = _policy(log_std_init=0.0)
    _, lp = emit_code(pol, np.ones(4), "mean", make_rng(0))
    assert lp == pytest.approx(-np.log(2 * np.pi), abs=1e-12)


def test_emit_code_dimension_mismatch():
    with pytest.raises(ConfigError):
        emit_code(_policy(), np.ones(3), "mean", make_rng(0))
    with pytest.raises(ConfigError):
        emit_code(_policy(), np.ones(4), "median", make_rng(0))
    with pytest.raises(ConfigError):
        MediatorPolicy.create(4, 0, make_rng(0))


def test_draw_code_always_samples():
    d = draw_code(_policy(), np.ones(4), "mean", make_rng(0))
    assert not np.array_equal(d.played, d.sample)


# -- gains and reward ----------------------------------------------------------------
def test_gain_diagonal_zero():
    G = marginal_gains(np.array([0.3, -1.0, 2.0]), np.array([1.0, 1.0, 0.0]))
    np.testing.assert_array_equal(np.diag(G.G_pi), 0)
    np.testing.assert_array_equal(np.diag(G.G_D), 0)


def test_gain_pairwise_differences():
    G = marginal_gains(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    np.testing.assert_array_equal(G.G_pi, [[0.0, 1.0], [-1.0, 0.0]])


def test_gain_antisymmetry():
    rng = make_rng(0)
    G = marginal_gains(rng.standard_normal(5), rng.standard_normal(5))
    np.testing.assert_array_equal(G.G_pi, -G.G_pi.T)
    np.testing.assert_array_equal(G.G_D, -G.G_D.T)


def test_gain_length_mismatch():
    with pytest.raises(PreconditionError):
        marginal_gains(np.zeros(2), np.zeros(3))
    with pytest.raises(PreconditionError):
        marginal_gains(np.zeros(0), np.zeros(0))


@pytest.mark.parametrize("penalty", PENALTIES)
def test_equal_losses_give_zero_reward(penalty):
    assert mediator_reward(marginal_gains(np.full(4, 0.7), np.full(4, -2.0)), penalty) == 0.0


def test_hand_derived_rewards():
    G = marginal_gains(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    assert mediator_reward(G, "relu_of_sum") == -1.0
    assert mediator_reward(G, "squared") == -2.0
    assert mediator_reward(G, "sum_of_relus") == -1.0


def test_unknown_penalty():
    with pytest.raises(ConfigError):
        mediator_reward(marginal_gains(np.zeros(2), np.zeros(2)), "cubed")
    with pytest.raises(PreconditionError):
        mediator_reward(GainMatrices(np.zeros((2, 2)), np.zeros((3, 3))))


# -- update --------------------------------------------------------------------------
def _params(pol):
    return [p.copy() for p in pol.trunk.param_list()] + [pol.log_std.copy()]


def test_zero_advantage_leaves_policy():
    pol = _policy()
    d = draw_code(pol, np.ones(4), "sample", make_rng(0))
    new = mediator_update(pol, d.features, d.sample, -3.0, 0.1, baseline=-3.0)
    for a, b in zip(_params(pol), _params(new)):
        np.testing.assert_array_equal(a, b)


def test_zero_rate_leaves_policy():
    pol = _policy()
    d = draw_code(pol, np.ones(4), "sample", make_rng(0))
    new = mediator_update(pol, d.features, d.sample, -3.0, 0.0, baseline=0.0)
    for a, b in zip(_params(pol), _params(new)):
        np.testing.assert_array_equal(a, b)


def test_first_update_seeds_baseline():
    pol = _policy()
    d = draw_code(pol, np.ones(4), "sample", make_rng(0))
    new = mediator_update(pol, d.features, d.sample, -2.0, 0.1)
    assert new.baseline == -2.0
    for a, b in zip(_params(pol), _params(new)):
        np.testing.assert_array_equal(a, b)
    newer = mediator_update(new, d.features, d.sample, 0.0, 0.1)
    assert newer.baseline == pytest.approx(0.99 * -2.0)


def _bandit_reward(c, target=1.0):
    return 0.0 if abs(c[0] - target) < 0.5 else -1.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bandit_mean_moves_toward_rewarded_code(seed):
    pol = MediatorPolicy.create(1, 1, make_rng(seed), hidden=(8,), log_std_init=0.0)
    rng = make_rng(100 + seed)
    info = np.array([1.0])
    start = abs(pol.head(pol.features(info, update=False)).mean[0] - 1.0)
    for _ in range(2000):
        d = draw_code(pol, info, "sample", rng)
        pol = mediator_update(pol, d.features, d.sample, _bandit_reward(d.sample), 0.01)
    end = abs(pol.head(pol.features(info, update=False)).mean[0] - 1.0)
    assert end < start and end < 0.25


def test_expected_update_points_toward_reward():
    pol = MediatorPolicy.create(1, 1, make_rng(3), hidden=(8,), input_norm=False)
    info = np.array([1.0])
    feats = pol.features(info)
    mean0 = pol.head(feats).mean[0]
    target = mean0 + 1.0
    rng = make_rng(4)
    eta = 1e-3
    shifts = []
    for _ in range(10**4):
        c = pol.head(feats).mean + np.exp(pol.log_std) * rng.standard_normal(1)
        r = 0.0 if abs(c[0] - target) < 0.5 else -1.0
        new = mediator_update(pol, feats, c, r, eta, baseline=-0.5)
        shifts.append(new.head(feats).mean[0] - mean0)
    assert np.mean(shifts) > 0
