"""Property tests over randomized inputs."""
import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ftnpl.analytics import convergence_verdict, cross_entropy_and_kl, entropy
from ftnpl.games import PenniesGame, pennies_loss, relu_pennies_losses
from ftnpl.learners import HistoryQueue, ftl_queue_step, mw_step
from ftnpl.mediator import PENALTIES, marginal_gains, mediator_reward
from ftnpl.numerics import autodiff as ad

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

finite = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)
vec2 = arrays(np.float64, 2, elements=finite)
code = arrays(np.float64, 2, elements=st.floats(-2.0, 2.0, allow_nan=False))
losses = st.integers(1, 7).flatmap(lambda n: st.tuples(arrays(np.float64, n, elements=finite),
                                                        arrays(np.float64, n, elements=finite)))
interior = st.floats(0.02, 0.98)


@SETTINGS
@given(vec2, vec2, code)
def test_zero_sum_losses_cancel(phi, om, c):
    lp, ld = PenniesGame(False).losses(phi, om, c)
    assert lp + ld == 0.0


@SETTINGS
@given(vec2, vec2, st.sampled_from(["proximal", "additive"]))
def test_zero_code_reduces_to_plain_game(phi, om, injection):
    assert pennies_loss(phi, om, np.zeros(2), injection) == pennies_loss(phi, om)
    assert relu_pennies_losses(phi, om, np.zeros(2), injection) == relu_pennies_losses(phi, om)


@SETTINGS
@given(vec2, vec2)
def test_bilinear_saddle_at_origin(phi, om):
    # the origin guarantees each player loss 0 whatever the opponent does
    assert pennies_loss(np.zeros(2), om) == 0.0
    assert pennies_loss(phi, np.zeros(2)) == 0.0


@SETTINGS
@given(vec2, vec2, code)
def test_relu_discriminator_loss_nonnegative(phi, om, c):
    assert relu_pennies_losses(phi, om, c)[1] >= 0.0


@SETTINGS
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20), st.floats(0.0, 2.0), interior)
def test_mw_stays_on_simplex(us, eta, p0):
    mu = np.array([p0, 1 - p0])
    for u in us:
        mu = mw_step(mu, np.array(u), eta)
        assert abs(mu.sum() - 1.0) <= 1e-12 and np.all(mu >= 0)


@SETTINGS
@given(losses)
def test_gains_antisymmetric_with_zero_diagonal(uv):
    G = marginal_gains(*uv)
    for M in (G.G_pi, G.G_D):
        np.testing.assert_array_equal(M, -M.T)
        np.testing.assert_array_equal(np.diag(M), 0.0)


@SETTINGS
@given(losses, st.sampled_from(PENALTIES))
def test_mediator_reward_nonpositive(uv, penalty):
    assert mediator_reward(marginal_gains(*uv), penalty) <= 0.0


@SETTINGS
@given(interior, interior, interior, interior)
def test_cross_entropy_decomposes(a, b, c, d):
    s = (np.array([a, 1 - a]), np.array([b, 1 - b]))
    m = (np.array([c, 1 - c]), np.array([d, 1 - d]))
    H, kl = cross_entropy_and_kl(s, m)
    assert abs(H - entropy(s) - kl) <= 1e-12 and kl >= -1e-15


@SETTINGS
@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.integers(0, 2**31 - 1))
def test_verdict_monotone_in_eps(e1, e2, seed):
    order = {"last_iterate": 0, "weak_only": 1, "diverged": 2}
    lo, hi = sorted((e1, e2))
    rng = np.random.default_rng(seed)
    traj = np.cumsum(rng.normal(0, 0.05, size=(100, 4)), axis=0) * rng.uniform(0, 1)
    ref = (np.zeros(2), np.zeros(2))
    # a looser tolerance never gives a worse verdict
    assert order[convergence_verdict(traj, ref, hi)] <= order[convergence_verdict(traj, ref, lo)]


@SETTINGS
@given(arrays(np.float64, (4, 2), elements=finite), vec2, code, st.permutations(range(4)))
def test_queue_step_order_invariant(opp, own, c, perm):
    game = PenniesGame(True)
    a = ftl_queue_step(own, HistoryQueue(4, list(opp)), c, game, 0.01, "pi")
    b = ftl_queue_step(own, HistoryQueue(4, [opp[i] for i in perm]), c, game, 0.01, "pi")
    np.testing.assert_allclose(a, b, atol=1e-12)


@SETTINGS
@given(vec2, vec2, arrays(np.float64, 2, elements=st.floats(0.05, 2.0)))
def test_pennies_gradient_matches_finite_diff(phi, om, c):
    for nonconvex in (False, True):
        game = PenniesGame(nonconvex)
        f = lambda x: game.loss_pi(x, om, c)  # noqa: E731
        g, fd = ad.grad(f, phi), ad.finite_diff(f, phi)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)
