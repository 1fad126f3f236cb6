import math

import numpy as np
import pytest

from ftnpl.errors import ConfigError, PreconditionError
from ftnpl.imitation import (
    EXPERT_MODES,
    OBS_DIM,
    CircleWorldEnv,
    GailConfig,
    PolicyNet,
    Trajectory,
    correlated_rollout,
    disc_scores,
    discounted_returns,
    expert_generate,
    ftnpl_gail_iteration,
    gail_disc_loss,
    init_gail,
    policy_log_prob,
    policy_update,
    run_circleworld,
    write_trajectory_csv,
)
from ftnpl.mediator import MediatorPolicy
from ftnpl.numerics import autodiff as ad
from ftnpl.numerics.mlp import MlpParams, init_mlp
from ftnpl.numerics.rng import make_rng


# -- environment -----------------------------------------------------------------
def test_observation_shape_and_padding():
    env = CircleWorldEnv()
    obs = env.reset()
    assert obs.shape == (OBS_DIM,) and np.all(obs == 0)
    obs, done = env.step(np.array([3.0, 0.0]))
    np.testing.assert_allclose(obs[-2:], [0.05, 0.0])
    np.testing.assert_array_equal(obs[:-4], 0.0)
    assert not done


def test_episode_cap():
    env = CircleWorldEnv(n=3)
    env.reset()
    dones = [env.step(np.array([0.0, 1.0]))[1] for _ in range(3)]
    assert dones == [False, False, True]


def test_env_validation():
    with pytest.raises(ConfigError):
        CircleWorldEnv(delta=0.0)
    with pytest.raises(ConfigError):
        CircleWorldEnv(n=-1)


# -- expert ----------------------------------------------------------------------
def test_expert_zero_steps():
    assert len(expert_generate(EXPERT_MODES[0], 0, make_rng(0))) == 0


@pytest.mark.parametrize("mode", EXPERT_MODES)
def test_expert_mean_radius(mode):
    tr = expert_generate(mode, 1000, make_rng(1))
    r = np.linalg.norm(tr.positions, axis=1).mean()
    assert abs(r - mode.radius) <= 0.1 * mode.radius


def test_expert_steps_have_fixed_length():
    tr = expert_generate(EXPERT_MODES[1], 300, make_rng(2))
    np.testing.assert_allclose(np.linalg.norm(np.diff(tr.positions, axis=0), axis=1), 0.05, atol=1e-12)
    assert np.all(tr.codes == 0)


# -- rollout -------------------------------------------------------------------------
def _nets(C=2, seed=0):
    rng = make_rng(seed)
    pol = PolicyNet.create(C, rng)
    med = MediatorPolicy.create(OBS_DIM + 2, C, rng, squash=True)
    return pol, med


def test_rollout_zero_length():
    pol, med = _nets()
    tau, tau_c = correlated_rollout(pol, med, CircleWorldEnv(), 0, make_rng(0))
    assert len(tau) == 0 and len(tau_c) == 0


def test_rollout_starts_with_zero_code():
    pol, med = _nets(C=3)
    tau, tau_c = correlated_rollout(pol, med, CircleWorldEnv(), 20, make_rng(0))
    np.testing.assert_array_equal(tau_c[0], np.zeros(3))
    assert len(tau.states) == len(tau.actions) == len(tau_c) == 20
    assert np.any(tau_c[1:] != 0)


def test_rollout_codes_follow_previous_pair():
    # c_{i+1} is the mediator mean at (s_{i+1}, a_i)
    pol, med = _nets()
    med.input_norm = False
    tau, tau_c = correlated_rollout(pol, med, CircleWorldEnv(), 6, make_rng(3), code_mode="mean")
    for i in range(5):
        info = np.concatenate([tau.states[i + 1], tau.actions[i]])
        np.testing.assert_allclose(tau_c[i + 1], med.head(med.features(info)).mean, atol=1e-14)


def test_rollout_stops_at_cap():
    pol, med = _nets()
    tau, _ = correlated_rollout(pol, med, CircleWorldEnv(n=7), 50, make_rng(0))
    assert len(tau) == 7


def test_rollout_code_size_check():
    pol, med = _nets(C=2)
    with pytest.raises(ConfigError):
        correlated_rollout(pol, med, CircleWorldEnv(), 5, make_rng(0), code_size=3)


# -- critic --------------------------------------------------------------------------
def test_constant_critic_loss_zero():
    d_in = OBS_DIM + 4
    disc = MlpParams([np.zeros((3, d_in)), np.zeros((1, 3))], [np.zeros(3), np.array([0.7])], ("tanh",))
    rng = make_rng(0)
    a, b = rng.standard_normal((10, d_in)), rng.standard_normal((12, d_in))
    for bounded in (True, False):
        assert float(gail_disc_loss(disc, a, b, bounded=bounded)) == pytest.approx(0.0, abs=1e-15)


def test_identical_batches_loss_zero():
    disc = init_mlp([OBS_DIM + 4, 8, 1], make_rng(0))
    x = make_rng(1).standard_normal((10, OBS_DIM + 4))
    assert float(gail_disc_loss(disc, x, x)) == 0.0


@pytest.mark.parametrize("bounded", [True, False])
def test_critic_gradient_matches_finite_diff(bounded):
    disc = init_mlp([OBS_DIM + 4, 8, 8, 1], make_rng(2))
    rng = make_rng(3)
    e, p = rng.standard_normal((9, OBS_DIM + 4)), rng.standard_normal((7, OBS_DIM + 4))
    like = disc.param_list()

    def f(flat):
        return gail_disc_loss(ad.unflat_params(flat, like), e, p, disc.activations, bounded)

    flat = ad.flat_params(like)
    g, fd = ad.grad(f, flat), ad.finite_diff(f, flat)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-5


def test_critic_empty_batch():
    disc = init_mlp([OBS_DIM + 4, 1], make_rng(0))
    with pytest.raises(ConfigError):
        gail_disc_loss(disc, np.zeros((0, OBS_DIM + 4)), np.zeros((3, OBS_DIM + 4)))


def test_disc_scores_bounded_range():
    disc = init_mlp([OBS_DIM + 4, 1], make_rng(0), scale=50.0)
    x = make_rng(1).standard_normal((20, OBS_DIM + 4))
    assert np.all(np.abs(disc_scores(disc, x)) <= 1)


# -- policy update -------------------------------------------------------------------
def test_discounted_returns_per_episode():
    r = np.array([1.0, 1.0, 1.0, 2.0])
    np.testing.assert_allclose(discounted_returns(r, (2, 4), 0.5), [1.5, 1.0, 2.0, 2.0])


def _batch(policy, n, rng, C=2):
    states = rng.standard_normal((n, OBS_DIM))
    codes = rng.standard_normal((n, C))
    mean = policy.mean(states, codes)
    raw = mean + np.exp(policy.log_std) * rng.standard_normal((n, 2))
    z = (raw - mean) / np.exp(policy.log_std)
    lps = -0.5 * (z * z).sum(1) - policy.log_std.sum() - np.log(2 * np.pi)
    return Trajectory(states, raw / np.linalg.norm(raw, axis=1, keepdims=True), codes, np.zeros(n),
                      np.zeros((n, 2)), raw, lps, episode_ends=tuple(range(1, n + 1)))


def test_zero_advantage_leaves_policy():
    pol = PolicyNet.create(2, make_rng(0))
    b = _batch(pol, 30, make_rng(1))
    new = policy_update(pol, b, np.full(30, 0.8), lr=0.1)
    for x, y in zip(pol.trunk.param_list() + [pol.log_std], new.trunk.param_list() + [new.log_std]):
        np.testing.assert_array_equal(x, y)


def test_unclipped_step_equals_policy_gradient():
    pol = PolicyNet.create(2, make_rng(0), head_scale=1.0)
    n = 40
    b = _batch(pol, n, make_rng(1))
    rewards = make_rng(2).uniform(0, 1, n)
    lr = 1e-3
    new = policy_update(pol, b, rewards, lr=lr, minibatch=n, normalize=False)
    # one-step episodes: return = reward; advantage = reward - mean
    adv = rewards - rewards.mean()

    def objective(pl, ls):
        lp_rows = []
        for i in range(n):
            lp_rows.append(policy_log_prob(pl, ls, pol.trunk.activations, b.states[i:i + 1], b.codes[i:i + 1],
                                           b.raw_actions[i:i + 1]) * adv[i])
        out = 0.0
        for v in lp_rows:
            out = out + v
        return out * (1.0 / n)

    _, (g_pl, g_ls) = ad.value_and_grad(objective, pol.trunk.param_list(), pol.log_std)
    for p0, p1, g in zip(pol.trunk.param_list(), new.trunk.param_list(), g_pl):
        np.testing.assert_allclose(p1 - p0, lr * g, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(new.log_std - pol.log_std, lr * g_ls, rtol=1e-9, atol=1e-15)


def test_two_action_bandit_greedy_probability_increases():
    # action "right" (x > 0) pays 1, "left" pays 0; single-step episodes
    pol = PolicyNet.create(2, make_rng(0), hidden=(8,))
    rng = make_rng(1)
    state = np.zeros((1, OBS_DIM))
    code = np.zeros((1, 2))

    def p_right(p):
        return 0.5 * (1.0 + math.erf(p.mean(state, code)[0, 0] / np.exp(p.log_std[0]) / math.sqrt(2.0)))

    probs = [p_right(pol)]
    for _ in range(100):
        n = 256
        mean = pol.mean(np.zeros((n, OBS_DIM)), np.zeros((n, 2)))
        raw = mean + np.exp(pol.log_std) * rng.standard_normal((n, 2))
        z = (raw - mean) / np.exp(pol.log_std)
        lps = -0.5 * (z * z).sum(1) - pol.log_std.sum() - np.log(2 * np.pi)
        b = Trajectory(np.zeros((n, OBS_DIM)), raw, np.zeros((n, 2)), np.zeros(n), np.zeros((n, 2)), raw, lps,
                       episode_ends=tuple(range(1, n + 1)))
        pol = policy_update(pol, b, (raw[:, 0] > 0).astype(float), lr=0.01, minibatch=n)
        probs.append(p_right(pol))
    # a batch where every draw goes right has zero advantage and leaves p unchanged
    d = np.diff(probs)
    assert np.all(d >= 0) and np.all(d[:20] > 0)
    assert probs[-1] > 0.9


def test_policy_update_validation():
    pol = PolicyNet.create(2, make_rng(0))
    with pytest.raises(PreconditionError):
        policy_update(pol, Trajectory.empty(2), np.zeros(0))
    b = _batch(pol, 5, make_rng(1))
    with pytest.raises(ConfigError):
        policy_update(pol, b, np.arange(5.0), baseline="median")


# -- FTNPL-GAIL ------------------------------------------------------------------------
def _small_cfg(**kw):
    base = dict(n=20, episodes_per_iter=2, expert_episodes=2, k=3)
    base.update(kw)
    return GailConfig(**base)


def test_gail_iteration_invariants():
    st = init_gail(_small_cfg(), 0)
    for _ in range(6):
        st = ftnpl_gail_iteration(st)
        assert len(st.q_batches) <= 3 and len(st.q_discs) <= 3
        assert st.history["r_m"][-1] <= 0
    assert st.iteration == 6


def test_gail_deterministic_digest():
    a = init_gail(_small_cfg(), 5)
    b = init_gail(_small_cfg(), 5)
    for _ in range(3):
        a, b = ftnpl_gail_iteration(a), ftnpl_gail_iteration(b)
    assert a.digest() == b.digest()
    c = ftnpl_gail_iteration(init_gail(_small_cfg(), 6))
    assert c.digest() != ftnpl_gail_iteration(init_gail(_small_cfg(), 5)).digest()


def test_gail_config_validation():
    with pytest.raises(ConfigError):
        GailConfig(k=0)
    with pytest.raises(ConfigError):
        GailConfig(code_size=0)


def test_run_and_export(tmp_path):
    state, log = run_circleworld(2, 0, _small_cfg())
    assert len(log) == 2
    path = write_trajectory_csv(tmp_path / "roll.csv", state.last_batch)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,ax,ay" and len(lines) == 1 + len(state.last_batch)
