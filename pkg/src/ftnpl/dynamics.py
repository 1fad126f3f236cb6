"""Run loops: baselines and the mediated leader dynamics on each game.

Every runner is deterministic given its arguments and returns a
:class:`RunResult` whose trajectory has the start point as row 0 and one
row per step after that.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .analytics import TrajectoryLog
from .errors import ConfigError
from .games import PENNIES_A, DiscretePennies, PenniesGame, ToyGanGame
from .learners import HistoryQueue, external_regret, ftl_queue_step, replicator_flow, sample_ftpl_noise
from .mediator import MediatorPolicy, draw_code, marginal_gains, mediator_reward, mediator_update
from .numerics.autodiff import flat_params
from .numerics.rng import derive_rng
from .numerics.sampling import sample_exponential  # noqa: F401  (re-exported for callers)

__all__ = [
    "RunResult",
    "DEFAULT_INIT",
    "run_pennies_ftrl",
    "run_pennies_ftpl",
    "run_pennies_ftnpl",
    "run_replicator",
    "run_mw_selfplay",
    "run_toygan",
]

# Starting point for the continuous pennies games. It lies in the range of
# A for both players: the component along (1, 1) is invisible to every
# gradient and would keep iterates away from the origin forever.
DEFAULT_INIT = (0.5, -0.5)

# Stream identifiers for derive_rng(seed, ...).
_STREAM_INIT = 0
_STREAM_PLAY = 1
_STREAM_NOISE = 2


@dataclass
class RunResult:
    log: TrajectoryLog
    traj: np.ndarray | None
    mu_star: tuple | None
    extras: dict = field(default_factory=dict)
    regret_curve: list | None = None


def _pennies_losses(game, traj):
    prev = traj[:-1]
    lp, ld = game.losses(prev[:, :2], prev[:, 2:])
    return np.asarray(lp, dtype=float), np.asarray(ld, dtype=float)


def run_pennies_ftrl(nonconvex: bool, steps: int, eta: float, init=DEFAULT_INIT, code_size: int = 2) -> RunResult:
    """Simultaneous full-history l2-FTRL anchored at ``init``."""
    game = PenniesGame(nonconvex)
    x0 = np.asarray(init, dtype=float)
    traj = kernels.ftrl_pennies_run(PENNIES_A, x0.copy(), x0.copy(), float(eta), int(steps), bool(nonconvex))
    lp, ld = _pennies_losses(game, traj)
    mu = game.mne_reference()
    log = TrajectoryLog.from_arrays(traj, np.zeros((steps, code_size)), lp, ld, None, mu)
    return RunResult(log, traj, mu)


def run_pennies_ftpl(nonconvex: bool, steps: int, seed: int, zeta: float | None = None, bound: float = 5.0,
                     inner_steps: int = 50, symmetric: bool = True, init=DEFAULT_INIT,
                     code_size: int = 2) -> RunResult:
    """Follow-the-perturbed-leader with fresh exponential noise every round.

    ``zeta`` defaults to ``1/sqrt(steps)``.
    """
    game = PenniesGame(nonconvex)
    if zeta is None:
        zeta = 1.0 / np.sqrt(steps)
    rng = derive_rng(seed, _STREAM_NOISE)
    noise_pi = sample_ftpl_noise(rng, (steps, 2), zeta, symmetric)
    noise_d = sample_ftpl_noise(rng, (steps, 2), zeta, symmetric)
    x0 = np.clip(np.asarray(init, dtype=float), -bound, bound)
    traj = kernels.ftpl_pennies_run(PENNIES_A, x0.copy(), x0.copy(), noise_pi, noise_d, float(bound),
                                    int(inner_steps), bool(nonconvex))
    lp, ld = _pennies_losses(game, traj)
    mu = game.mne_reference()
    log = TrajectoryLog.from_arrays(traj, np.zeros((steps, code_size)), lp, ld, None, mu)
    return RunResult(log, traj, mu, extras={"zeta": float(zeta)})


def run_pennies_ftnpl(nonconvex: bool, steps: int, seed: int, k: int = 5, code_size: int = 2,
                      eta: float = 1e-3, eta_m: float = 1e-3, penalty: str = "squared",
                      code_mode: str | None = None, injection: str = "proximal", init=DEFAULT_INIT,
                      use_mediator: bool = True, hidden=(32, 32)) -> RunResult:
    """Queue-based leader dynamics with a neural mediator on continuous pennies.

    Each round the mediator sees ``(phi, omega)`` and emits a code. Its
    reward is computed from the players' queues at a fresh sample of the
    code; the players step against the opponent's queue using the played
    code (the mean in ``"mean"`` mode, the sample in ``"sample"`` mode).
    ``code_mode`` defaults to mean for the zero-sum game and sample for the
    non-convex one. ``use_mediator=False`` fixes the code at zero.
    """
    game = PenniesGame(nonconvex, injection)
    if code_mode is None:
        code_mode = "sample" if nonconvex else "mean"
    if use_mediator and code_size < 1:
        raise ConfigError("the mediator needs at least one code component", field="code_size")
    phi = np.asarray(init, dtype=float).copy()
    om = phi.copy()
    q_pi = HistoryQueue(k, [phi])
    q_d = HistoryQueue(k, [om])
    policy = MediatorPolicy.create(4, code_size, derive_rng(seed, _STREAM_INIT), hidden) if use_mediator else None
    rng = derive_rng(seed, _STREAM_PLAY)
    traj = np.empty((steps + 1, 4))
    traj[0] = np.concatenate([phi, om])
    codes = np.zeros((steps, max(code_size, 0)))
    loss_pi = np.empty(steps)
    loss_d = np.empty(steps)
    rewards = np.full(steps, np.nan)
    zero = np.zeros(code_size)
    for t in range(steps):
        if policy is not None:
            draw = draw_code(policy, traj[t], code_mode, rng)
            u_pi, u_d = game.marginal_losses(q_pi.as_array(), q_d.as_array(), draw.sample)
            r = mediator_reward(marginal_gains(u_pi, u_d), penalty)
            policy = mediator_update(policy, draw.features, draw.sample, r, eta_m)
            c = draw.played
            rewards[t] = r
        else:
            c = zero
        lp, ld = game.losses(phi, om, c)
        new_phi = ftl_queue_step(phi, q_d, c, game, eta, "pi")
        new_om = ftl_queue_step(om, q_pi, c, game, eta, "D")
        phi, om = new_phi, new_om
        q_pi.push(phi)
        q_d.push(om)
        traj[t + 1, :2] = phi
        traj[t + 1, 2:] = om
        codes[t] = c
        loss_pi[t] = lp
        loss_d[t] = ld
    mu = game.mne_reference()
    log = TrajectoryLog.from_arrays(traj, codes, loss_pi, loss_d, rewards if policy is not None else None, mu)
    extras = {"code_mode": code_mode}
    if policy is not None:
        extras["final_log_std"] = policy.log_std.tolist()
    return RunResult(log, traj, mu, extras)


def run_replicator(steps: int, h: float = 1e-3, mu_pi0=(0.9, 0.1), mu_d0=(0.2, 0.8), code_size: int = 2):
    """RK4 replicator flow on discrete matching pennies for ``steps`` steps of size ``h``."""
    from .analytics import cross_entropy_and_kl, entropy

    game = DiscretePennies()
    flow = replicator_flow(game.loss_matrix_pi, game.loss_matrix_d, mu_pi0, mu_d0, h, steps * h)
    tp, td = flow.trajectories
    traj = np.concatenate([tp, td], axis=1)
    mu = game.mne_reference()
    lp = np.einsum("ta,ab,tb->t", tp[:-1], game.loss_matrix_pi, td[:-1])
    log = TrajectoryLog.from_arrays(traj, np.zeros((steps, code_size)), lp, -lp, None, mu)
    H = np.array([cross_entropy_and_kl(mu, (a, b))[0] for a, b in zip(tp, td)])
    extras = {
        "h": h,
        "cross_entropy_initial": float(H[0]),
        "cross_entropy_max_deviation": float(np.abs(H - H[0]).max()),
        "kl_initial": float(H[0] - entropy(mu)),
        "max_simplex_drift": float(flow.drift.max()) if len(flow.drift) else 0.0,
    }
    return RunResult(log, traj, mu, extras)


def run_mw_selfplay(steps: int, eta: float | None = None, mu_pi0=(0.9, 0.1), mu_d0=(0.2, 0.8)):
    """Multiplicative-weights self-play on discrete pennies.

    ``eta`` defaults to ``sqrt(8 ln 2 / steps)``. Returns the strategy
    trajectories and the agent's and discriminator's regret curves.
    """
    game = DiscretePennies()
    if eta is None:
        eta = float(np.sqrt(8.0 * np.log(2.0) / steps))
    tp, td, rp, rd = kernels.mw_selfplay(game.loss_matrix_pi, game.loss_matrix_d,
                                         np.asarray(mu_pi0, dtype=float), np.asarray(mu_d0, dtype=float),
                                         float(eta), int(steps))
    if np.isnan(rp[-1]):
        from .errors import NumericError

        raise NumericError("multiplicative weights collapsed", op="mw_selfplay")
    return {"traj_pi": tp, "traj_d": td, "regret_pi": rp, "regret_d": rd, "eta": eta, "game": game}


# ---------------------------------------------------------------------------
# toy GAN


def _gan_summary(game, gen, disc, c, real, z):
    from .numerics.mlp import mlp_forward

    fake = game.generate(gen, z, c)
    tile = np.tile(np.asarray(c, dtype=float), (len(real), 1))
    d_real = 1.0 / (1.0 + np.exp(-mlp_forward(disc, np.column_stack([real, tile]))[:, 0]))
    d_fake = 1.0 / (1.0 + np.exp(-mlp_forward(disc, np.column_stack([fake, tile]))[:, 0]))
    return np.array([fake.mean(), fake.std()]), np.array([d_real.mean(), d_fake.mean()])


def _gan_marginal_losses(game, gens, discs, c, real, z):
    vals = np.array([[float(game.loss_pi(g, d, c, real, z)) for d in discs] for g in gens])
    return vals.sum(axis=1), -vals.sum(axis=0)


def run_toygan(learner: str, steps: int, seed: int, k: int = 5, code_size: int = 2, lr: float = 0.05,
               eta_m: float = 1e-3, penalty: str = "squared", code_mode: str = "mean",
               data_mean: float = 2.0, data_std: float = 0.5, batch_size: int = 64,
               eval_samples: int = 10000, code_log_std_init: float = 0.0,
               use_mediator: bool = True, zero_code_weights: bool = True) -> RunResult:
    """Train the 1-D GAN with the mediated queue dynamics or alternating gradients.

    ``learner="ftnpl"`` steps each player against the opponent's queue with
    learning rate ``lr / k`` (the queue sums ``k`` losses); ``"gda"``
    alternates one generator and one discriminator gradient step at ``lr``
    with the code fixed at zero.

    The log's ``phi`` columns hold the generated batch mean and std, the
    ``omega`` columns the discriminator's mean probability on real and
    generated samples, and ``step_norm_sq`` the squared change of all
    network parameters.
    """
    if learner not in ("ftnpl", "gda"):
        raise ConfigError(f"toygan supports learners ftnpl and gda, got {learner!r}", field="learner")
    game = ToyGanGame(data_mean, data_std, code_size, batch_size)
    init_rng = derive_rng(seed, _STREAM_INIT)
    gen, disc = game.init_players(init_rng, zero_code_weights)
    rng = derive_rng(seed, _STREAM_PLAY)
    log = TrajectoryLog(code_size)
    prev_flat = np.concatenate([flat_params(gen.param_list()), flat_params(disc.param_list())])
    c = np.zeros(code_size)
    policy = None
    if learner == "ftnpl":
        if code_size < 1:
            raise ConfigError("the mediator needs at least one code component", field="code_size")
        if use_mediator:
            policy = MediatorPolicy.create(2 + code_size, code_size, init_rng, log_std_init=code_log_std_init)
        q_gen = HistoryQueue(k, [gen])
        q_disc = HistoryQueue(k, [disc])
    for t in range(steps):
        real, z = game.sample_batch(rng)
        r = None
        if learner == "ftnpl":
            if policy is not None:
                info = np.concatenate([[real.mean(), real.std()], c])
                draw = draw_code(policy, info, code_mode, rng)
                u_pi, u_d = _gan_marginal_losses(game, q_gen.items(), q_disc.items(), draw.sample, real, z)
                r = mediator_reward(marginal_gains(u_pi, u_d), penalty)
                policy = mediator_update(policy, draw.features, draw.sample, r, eta_m)
                c = draw.played
            lp = float(game.loss_pi(gen, disc, c, real, z))
            new_gen = ftl_queue_step(gen, q_disc, c, game, lr / k, "pi", real=real, z=z)
            new_disc = ftl_queue_step(disc, q_gen, c, game, lr / k, "D", real=real, z=z)
            gen, disc = new_gen, new_disc
            q_gen.push(gen)
            q_disc.push(disc)
        else:
            lp = float(game.loss_pi(gen, disc, c, real, z))
            gen = ftl_queue_step(gen, [disc], c, game, lr, "pi", real=real, z=z)
            disc = ftl_queue_step(disc, [gen], c, game, lr, "D", real=real, z=z)
        flat = np.concatenate([flat_params(gen.param_list()), flat_params(disc.param_list())])
        phi_s, om_s = _gan_summary(game, gen, disc, c, real, z)
        log.append(t + 1, phi_s, om_s, c, lp, -lp, r, float(np.sum((flat - prev_flat) ** 2)), None)
        prev_flat = flat
    # evaluate the learned marginal: one mediator draw per evaluation batch
    eval_rng = derive_rng(seed, _STREAM_NOISE)
    samples = []
    n_batches = max(1, eval_samples // batch_size)
    for _ in range(n_batches):
        real, z = game.sample_batch(eval_rng)
        if policy is not None:
            info = np.concatenate([[real.mean(), real.std()], c])
            feats = policy.features(info, update=False)
            head = policy.head(feats)
            cc = head.mean if code_mode == "mean" else head.mean + np.exp(head.log_std) * eval_rng.standard_normal(code_size)
        else:
            cc = np.zeros(code_size)
        samples.append(game.generate(gen, z, cc))
    samples = np.concatenate(samples)
    extras = {"sample_mean": float(samples.mean()), "sample_std": float(samples.std()),
              "data_mean": data_mean, "data_std": data_std}
    return RunResult(log, None, None, extras)
