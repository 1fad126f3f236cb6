"""Adversarial imitation on CircleWorld with mediator codes.

CircleWorld is a point moving a fixed distance per step in a chosen
direction; the observation is its last five positions. Experts follow
noisy circles around the origin at one of several radii. The learner is a
Gaussian policy on ``[observation; code]`` trained with a clipped
surrogate objective against a Wasserstein-style critic on
``[observation; action; code]``, while a mediator emits a code after every
step from the latest state-action pair.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from ._io import atomic_write_text
from .errors import ConfigError, NumericError, PreconditionError
from .analytics import TrajectoryLog
from .learners import HistoryQueue
from .mediator import MediatorPolicy, marginal_gains, mediator_reward, mediator_update
from .numerics import autodiff as ad
from .numerics.mlp import MlpParams, init_mlp, mlp_apply
from .numerics.rng import derive_rng
from .numerics.sampling import LOG_STD_MAX, LOG_STD_MIN, gaussian_log_prob

__all__ = [
    "OBS_HISTORY",
    "OBS_DIM",
    "ExpertMode",
    "EXPERT_MODES",
    "CircleWorldEnv",
    "Trajectory",
    "PolicyNet",
    "expert_generate",
    "correlated_rollout",
    "gail_disc_loss",
    "disc_scores",
    "policy_log_prob",
    "policy_update",
    "GailConfig",
    "GailState",
    "init_gail",
    "ftnpl_gail_iteration",
    "write_trajectory_csv",
    "run_circleworld",
]

OBS_HISTORY = 5
OBS_DIM = 2 * OBS_HISTORY


@dataclass(frozen=True)
class ExpertMode:
    """A circular demonstration mode around the origin."""

    radius: float
    direction: float = 1.0  # +1 counter-clockwise, -1 clockwise
    noise: float = 0.05
    gain: float = 1.0


EXPERT_MODES = (ExpertMode(0.25), ExpertMode(0.5), ExpertMode(0.75))


class CircleWorldEnv:
    """2-D point world; each step moves ``delta`` along the normalized action."""

    def __init__(self, delta: float = 0.05, n: int = 100, start=(0.0, 0.0)):
        if not delta > 0:
            raise ConfigError("step size must be positive", field="delta")
        if n < 0:
            raise ConfigError("episode cap must be nonnegative", field="n")
        self.delta = float(delta)
        self.n = int(n)
        self.start = np.asarray(start, dtype=float)
        self.reset()

    def reset(self) -> np.ndarray:
        self.pos = self.start.copy()
        self.t = 0
        self._buf = np.zeros((OBS_HISTORY, 2))
        self._buf[-1] = self.pos
        return self.observation()

    def observation(self) -> np.ndarray:
        """Last five positions, oldest first; zeros before the episode began."""
        return self._buf.reshape(-1).copy()

    @staticmethod
    def normalize(action) -> np.ndarray:
        a = np.asarray(action, dtype=float)
        n = np.sqrt(a @ a)
        if not np.isfinite(n):
            raise NumericError("non-finite action", op="CircleWorldEnv.step")
        return a / n if n > 0 else np.zeros(2)

    def step(self, action):
        """Move along ``action`` (normalized); returns ``(observation, done)``."""
        self.pos = self.pos + self.delta * self.normalize(action)
        self.t += 1
        self._buf = np.roll(self._buf, -1, axis=0)
        self._buf[-1] = self.pos
        return self.observation(), self.t >= self.n


@dataclass
class Trajectory:
    """Aligned per-step records of one or more episodes.

    ``actions`` are the unit directions actually taken. Rollouts also keep
    the raw policy samples and their log-probabilities, and the mediator
    inputs and codes it emitted after each step.
    """

    states: np.ndarray
    actions: np.ndarray
    codes: np.ndarray
    rewards: np.ndarray
    positions: np.ndarray
    raw_actions: np.ndarray | None = None
    log_probs: np.ndarray | None = None
    med_features: np.ndarray | None = None
    med_codes: np.ndarray | None = None
    episode_ends: tuple = ()

    def __len__(self) -> int:
        return len(self.states)

    @classmethod
    def empty(cls, code_size: int) -> "Trajectory":
        return cls(np.zeros((0, OBS_DIM)), np.zeros((0, 2)), np.zeros((0, code_size)), np.zeros(0),
                   np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0), np.zeros((0, OBS_DIM + 2)),
                   np.zeros((0, code_size)), ())

    @classmethod
    def concat(cls, parts) -> "Trajectory":
        parts = list(parts)
        if not parts:
            raise PreconditionError("nothing to concatenate")

        def cat(name):
            vals = [getattr(p, name) for p in parts]
            return None if any(v is None for v in vals) else np.concatenate(vals)

        ends, offset = [], 0
        for p in parts:
            ends += [offset + e for e in (p.episode_ends or (len(p),))]
            offset += len(p)
        return cls(cat("states"), cat("actions"), cat("codes"), cat("rewards"), cat("positions"),
                   cat("raw_actions"), cat("log_probs"), cat("med_features"), cat("med_codes"), tuple(ends))

    def inputs(self) -> np.ndarray:
        """Discriminator inputs ``[s; a; c]`` per row."""
        return np.concatenate([self.states, self.actions, self.codes], axis=1)


def expert_generate(mode: ExpertMode, steps: int, rng, env: CircleWorldEnv | None = None,
                    code_size: int = 2) -> Trajectory:
    """Noisy proportional-control circling for ``steps`` steps from ``env.reset()``.

    Direction = chord + gain * (r - |pos|) * radial + N(0, noise^2 I),
    normalized, where the chord is the tangent tilted inward by
    ``asin(delta / 2|pos|)`` so that a noiseless step starting on a circle
    ends on it. Codes are zero.
    """
    if steps < 0:
        raise ConfigError("steps must be nonnegative", field="steps")
    env = env or CircleWorldEnv(n=max(steps, 1))
    s = env.reset()
    states, actions, positions = [], [], []
    for _ in range(steps):
        p = env.pos
        rho = np.sqrt(p @ p)
        radial = p / rho if rho > 0 else np.array([1.0, 0.0])
        tangent = mode.direction * np.array([-radial[1], radial[0]])
        tilt = min(1.0, env.delta / (2.0 * rho)) if rho > 0 else 0.0
        chord = np.sqrt(1.0 - tilt * tilt) * tangent - tilt * radial
        a = env.normalize(chord + mode.gain * (mode.radius - rho) * radial + mode.noise * rng.standard_normal(2))
        states.append(s)
        actions.append(a)
        positions.append(p.copy())
        s, _ = env.step(a)
    n = len(states)
    return Trajectory(np.array(states).reshape(n, OBS_DIM), np.array(actions).reshape(n, 2),
                      np.zeros((n, code_size)), np.zeros(n), np.array(positions).reshape(n, 2),
                      episode_ends=(n,))


@dataclass
class PolicyNet:
    """Gaussian policy over 2-D directions given ``[state; code]``."""

    trunk: MlpParams
    log_std: np.ndarray

    @classmethod
    def create(cls, code_size: int, rng, hidden=(32, 32), log_std_init: float = np.log(0.5),
               head_scale: float = 0.01) -> "PolicyNet":
        """New policy; the output layer is scaled by ``head_scale`` so the
        initial mean direction is close to zero (an unbiased random walk)."""
        trunk = init_mlp([OBS_DIM + code_size, *hidden, 2], rng)
        trunk.weights[-1] *= head_scale
        return cls(trunk, np.full(2, float(log_std_init)))

    def mean(self, state, code) -> np.ndarray:
        x = np.concatenate([np.asarray(state, dtype=float), np.asarray(code, dtype=float)], axis=-1)
        return np.asarray(mlp_apply(self.trunk.param_list(), self.trunk.activations, x))

    def copy(self) -> "PolicyNet":
        return PolicyNet(self.trunk.copy(), self.log_std.copy())


def policy_log_prob(plist, log_std, activations, states, codes, raw_actions):
    """Summed log-probability of ``raw_actions``; differentiable in ``plist`` and ``log_std``."""
    x = np.concatenate([states, codes], axis=-1)
    return gaussian_log_prob(raw_actions, mlp_apply(plist, activations, x), log_std)


def _per_row_log_prob(policy: PolicyNet, states, codes, raw_actions) -> np.ndarray:
    mean = policy.mean(states, codes)
    z = (raw_actions - mean) / np.exp(policy.log_std)
    return -0.5 * np.sum(z * z, axis=-1) - policy.log_std.sum() - np.log(2.0 * np.pi)


def correlated_rollout(policy: PolicyNet, mediator: MediatorPolicy | None, env: CircleWorldEnv, n: int, rng,
                       code_mode: str = "sample", code_size: int | None = None):
    """One episode where each step's code comes from the previous state-action pair.

    Starts with the zero code, then repeatedly: act on ``(s_i, c_i)``,
    record ``c_i`` and ``(s_i, a)``, step the environment, and ask the
    mediator for ``c_{i+1}`` from ``(s_{i+1}, a)``. Stops when the
    environment reports done or after ``n`` steps. Returns ``(tau, tau_c)``.
    """
    if n < 0:
        raise ConfigError("n must be nonnegative", field="n")
    C = mediator.code_size if mediator is not None else (code_size or 0)
    if mediator is not None and code_size is not None and code_size != C:
        raise ConfigError("code size disagrees with the mediator", field="code_size")
    s = env.reset()
    c = np.zeros(C)
    states, actions, raws, codes, lps, pos, mfeat, mcode = [], [], [], [], [], [], [], []
    std = np.exp(policy.log_std)
    done = False
    i = 0
    while not done and i < n:
        mean = policy.mean(s, c)
        raw = mean + std * rng.standard_normal(2)
        a = env.normalize(raw)
        codes.append(c)
        states.append(s)
        actions.append(a)
        raws.append(raw)
        pos.append(env.pos.copy())
        z = (raw - mean) / std
        lps.append(-0.5 * float(z @ z) - float(policy.log_std.sum()) - np.log(2.0 * np.pi))
        i += 1
        s, done = env.step(a)
        if mediator is not None:
            info = np.concatenate([s, a])
            feats = mediator.features(info)
            head = mediator.head(feats)
            eps = rng.standard_normal(C)
            c = head.mean + np.exp(head.log_std) * eps if code_mode == "sample" else head.mean
            if not done and i < n:
                mfeat.append(feats)
                mcode.append(c)
    L = len(states)
    tau = Trajectory(
        np.array(states).reshape(L, OBS_DIM),
        np.array(actions).reshape(L, 2),
        np.array(codes).reshape(L, C),
        np.zeros(L),
        np.array(pos).reshape(L, 2),
        np.array(raws).reshape(L, 2),
        np.array(lps),
        np.array(mfeat).reshape(len(mfeat), OBS_DIM + 2),
        np.array(mcode).reshape(len(mcode), C),
        (L,),
    )
    return tau, tau.codes


def disc_scores(disc, x, activations=None, bounded: bool = True):
    """Critic score per row of ``x``; ``tanh``-squashed into (-1, 1) when ``bounded``.

    Arrays in, a 1-D array out; with ``disc`` on the tape the result is a
    ``(n, 1)`` variable.
    """
    plist = disc.param_list() if isinstance(disc, MlpParams) else disc
    acts = disc.activations if isinstance(disc, MlpParams) else activations
    out = mlp_apply(plist, acts, x)
    if bounded:
        out = ad.tanh(out)
    return out[:, 0] if not isinstance(out, ad.Var) else out


def gail_disc_loss(disc, expert_x, policy_x, activations=None, bounded: bool = True):
    """``mean d(policy) - mean d(expert)`` over ``[s; a; c]`` rows; the critic descends it."""
    expert_x = np.asarray(expert_x, dtype=float)
    policy_x = np.asarray(policy_x, dtype=float)
    if len(expert_x) == 0 or len(policy_x) == 0:
        raise ConfigError("critic batches must be nonempty", field="batch")
    return (ad.vmean(disc_scores(disc, policy_x, activations, bounded))
            - ad.vmean(disc_scores(disc, expert_x, activations, bounded)))


def discounted_returns(rewards, episode_ends, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    start = 0
    for end in episode_ends:
        acc = 0.0
        for t in range(end - 1, start - 1, -1):
            acc = rewards[t] + gamma * acc
            out[t] = acc
        start = end
    return out


def policy_update(policy: PolicyNet, batch: Trajectory, rewards, lr: float = 0.01, clip: float = 0.2,
                  gamma: float = 0.99, minibatch: int = 100, normalize: bool = True, rng=None,
                  baseline: str = "mean") -> PolicyNet:
    """One epoch of clipped-surrogate ascent over ``batch``.

    Advantages are discounted rewards-to-go minus a baseline (divided by
    their std when ``normalize``). ``baseline="mean"`` subtracts the batch
    mean; ``"time"`` subtracts the mean over episodes at the same step
    index, which removes the dependence of returns on the time left. The batch is visited in consecutive
    minibatches (shuffled if ``rng`` is given); the probability ratio
    against the rollout policy is clipped to ``[1 - clip, 1 + clip]``.
    """
    if len(batch) == 0:
        raise PreconditionError("no rollouts to learn from")
    rewards = np.asarray(rewards, dtype=float)
    ends = batch.episode_ends or (len(batch),)
    ret = discounted_returns(rewards, ends, gamma)
    if baseline == "mean":
        adv = ret - ret.mean()
    elif baseline == "time":
        starts = (0,) + tuple(ends[:-1])
        step = np.concatenate([np.arange(e - s) for s, e in zip(starts, ends)])
        sums = np.bincount(step, weights=ret)
        counts = np.bincount(step)
        adv = ret - (sums / counts)[step]
    else:
        raise ConfigError(f"unknown baseline {baseline!r}", field="baseline")
    if not np.all(np.isfinite(adv)):
        raise NumericError("non-finite advantage", op="policy_update")
    sd = adv.std()
    if sd <= 1e-12 * (1.0 + np.abs(ret).max()):
        # advantages are rounding noise around zero
        return policy.copy()
    if normalize:
        adv = adv / sd
    old_lp = batch.log_probs
    if old_lp is None:
        old_lp = _per_row_log_prob(policy, batch.states, batch.codes, batch.raw_actions)
    idx = np.arange(len(batch)) if rng is None else rng.permutation(len(batch))
    acts = policy.trunk.activations
    plist = policy.trunk.param_list()
    log_std = policy.log_std.copy()
    for lo in range(0, len(batch), minibatch):
        sl = idx[lo : lo + minibatch]
        x = np.concatenate([batch.states[sl], batch.codes[sl]], axis=1)
        ra, A, olp = batch.raw_actions[sl], adv[sl], old_lp[sl]
        # rows whose ratio is already clipped on the side of their advantage
        # contribute no gradient; evaluate the ratio first
        cur = PolicyNet(policy.trunk.with_params(plist), log_std)
        ratio = np.exp(_per_row_log_prob(cur, batch.states[sl], batch.codes[sl], ra) - olp)
        active = np.where(A >= 0, ratio < 1 + clip, ratio > 1 - clip)
        if not np.any(active):
            continue
        w = (A * ratio)[active] / len(sl)

        def surrogate(pl, ls):
            mean = mlp_apply(pl, acts, x[active])
            z = (ra[active] - mean) * ad.exp(-ls)
            lp_rows = -0.5 * ad.vsum(ad.square(z), axis=1) - ad.vsum(ls)
            # d ratio = ratio * d log p, so weight log p rows by A * ratio
            return ad.vsum(lp_rows * w)

        _, (g_pl, g_ls) = ad.value_and_grad(surrogate, plist, log_std)
        plist = [p + lr * g for p, g in zip(plist, g_pl)]
        log_std = np.clip(log_std + lr * g_ls, LOG_STD_MIN, LOG_STD_MAX)
    return PolicyNet(policy.trunk.with_params(plist), log_std)


# ---------------------------------------------------------------------------
# FTNPL-GAIL


@dataclass
class GailConfig:
    mode: ExpertMode = EXPERT_MODES[1]
    code_size: int = 2
    k: int = 5
    n: int = 100
    delta: float = 0.05
    episodes_per_iter: int = 8
    expert_episodes: int = 16
    disc_lr: float = 1e-3
    policy_lr: float = 0.05
    mediator_lr: float = 1e-3
    penalty: str = "squared"
    code_mode: str = "sample"
    clip: float = 0.2
    gamma: float = 0.99
    hidden: tuple = (32, 32)
    squash_codes: bool = True
    normalize_mediator_advantage: bool = True
    bounded_critic: bool = False
    baseline: str = "time"
    minibatch: int = 50

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("must be at least 1", field="k")
        if self.code_size < 1:
            raise ConfigError("must be at least 1", field="code_size")
        if self.episodes_per_iter < 1 or self.expert_episodes < 1:
            raise ConfigError("need at least one episode", field="episodes")


@dataclass
class GailState:
    cfg: GailConfig
    policy: PolicyNet
    disc: MlpParams
    mediator: MediatorPolicy
    expert: Trajectory
    q_batches: HistoryQueue
    q_discs: HistoryQueue
    rng: np.random.Generator
    iteration: int = 0
    history: dict = field(default_factory=lambda: {"score_gap": [], "r_m": [], "radius": [], "disc_loss": []})
    last_batch: Trajectory | None = None

    def digest(self) -> str:
        """Hash of all learned parameters and the iteration counter."""
        h = hashlib.sha256()
        h.update(str(self.iteration).encode())
        for arr in (self.policy.trunk.param_list() + [self.policy.log_std] + self.disc.param_list()
                    + self.mediator.trunk.param_list() + [self.mediator.log_std]):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        return h.hexdigest()


def _expert_dataset(cfg: GailConfig, rng) -> Trajectory:
    env = CircleWorldEnv(cfg.delta, cfg.n)
    return Trajectory.concat([expert_generate(cfg.mode, cfg.n, rng, env, cfg.code_size)
                              for _ in range(cfg.expert_episodes)])


def _relabel_expert(expert: Trajectory, mediator: MediatorPolicy, code_mode: str, rng) -> Trajectory:
    """Expert codes produced the way a rollout would: zero first, then the
    mediator's response to the previous step's next state and action."""
    C = mediator.code_size
    codes = np.zeros((len(expert), C))
    start = 0
    for end in expert.episode_ends:
        for i in range(start + 1, end):
            feats = mediator.features(np.concatenate([expert.states[i], expert.actions[i - 1]]), update=False)
            head = mediator.head(feats)
            codes[i] = head.mean + np.exp(head.log_std) * rng.standard_normal(C) if code_mode == "sample" else head.mean
        start = end
    return replace(expert, codes=codes)


def _rollouts(state: GailState) -> Trajectory:
    cfg = state.cfg
    env = CircleWorldEnv(cfg.delta, cfg.n)
    eps = [correlated_rollout(state.policy, state.mediator, env, cfg.n, state.rng, cfg.code_mode)[0]
           for _ in range(cfg.episodes_per_iter)]
    return Trajectory.concat(eps)


def init_gail(cfg: GailConfig, seed: int) -> GailState:
    init_rng = derive_rng(seed, 0)
    rng = derive_rng(seed, 1)
    policy = PolicyNet.create(cfg.code_size, init_rng, cfg.hidden)
    disc = init_mlp([OBS_DIM + 2 + cfg.code_size, *cfg.hidden, 1], init_rng)
    mediator = MediatorPolicy.create(OBS_DIM + 2, cfg.code_size, init_rng, cfg.hidden, squash=cfg.squash_codes,
                                      normalize_advantage=cfg.normalize_mediator_advantage)
    expert = _expert_dataset(cfg, derive_rng(seed, 2))
    state = GailState(cfg, policy, disc, mediator, expert, HistoryQueue(cfg.k), HistoryQueue(cfg.k, [disc]), rng)
    return state


def ftnpl_gail_iteration(state: GailState) -> GailState:
    """One outer step of the mediated queue dynamics on imitation.

    Rolls out the current policy (its batch joins the policy queue),
    rewards the mediator from the queues' pairwise gains, moves the critic
    against every queued policy batch, improves the policy on the summed
    scores of the queued critics, and appends the new critic.
    """
    cfg = state.cfg
    batch = _rollouts(state)
    expert = _relabel_expert(state.expert, state.mediator, cfg.code_mode, state.rng)
    q_batches = HistoryQueue(cfg.k, state.q_batches.items())
    q_batches.push(batch)
    q_discs = HistoryQueue(cfg.k, state.q_discs.items())
    ex = expert.inputs()
    bx = [b.inputs() for b in q_batches]
    discs = q_discs.items()
    # mean critic score of every (queued critic, queued batch) pair
    bd = cfg.bounded_critic
    S = np.array([[disc_scores(d, x, bounded=bd).mean() for x in bx] for d in discs])
    E = np.array([disc_scores(d, ex, bounded=bd).mean() for d in discs])
    u_pi = -S.sum(axis=0)  # batch k against all critics
    u_d = (S - E[:, None]).sum(axis=1)  # critic k against all batches
    r_m = mediator_reward(marginal_gains(u_pi, u_d), cfg.penalty)
    mediator = state.mediator
    if len(batch.med_codes):
        mediator = mediator_update(mediator, batch.med_features, batch.med_codes, r_m, cfg.mediator_lr)
    disc = state.disc
    gap = abs(float(disc_scores(disc, bx[-1], bounded=bd).mean() - disc_scores(disc, ex, bounded=bd).mean()))
    dl_val = float(gail_disc_loss(disc, ex, bx[-1], bounded=bd))

    def critic_total(pl):
        out = 0.0
        for x in bx:
            out = out + gail_disc_loss(pl, ex, x, disc.activations, bd)
        return out

    _, (g,) = ad.value_and_grad(critic_total, disc.param_list())
    new_disc = disc.with_params([p - cfg.disc_lr * gp for p, gp in zip(disc.param_list(), g)])
    rewards = np.sum([disc_scores(d, bx[-1], bounded=bd) for d in discs], axis=0)
    new_policy = policy_update(state.policy, batch, rewards, cfg.policy_lr, cfg.clip, cfg.gamma, cfg.minibatch,
                               rng=state.rng, baseline=cfg.baseline)
    q_discs.push(new_disc)
    history = {k: list(v) for k, v in state.history.items()}
    history["score_gap"].append(gap)
    history["r_m"].append(r_m)
    history["radius"].append(float(np.linalg.norm(batch.positions, axis=1).mean()))
    history["disc_loss"].append(dl_val)
    return replace(state, policy=new_policy, disc=new_disc, mediator=mediator, q_batches=q_batches,
                   q_discs=q_discs, iteration=state.iteration + 1, history=history, last_batch=batch)


def write_trajectory_csv(path, traj: Trajectory):
    """``x,y,ax,ay`` per step."""
    lines = ["x,y,ax,ay"]
    for p, a in zip(traj.positions, traj.actions):
        lines.append(",".join(repr(float(v)) for v in (*p, *a)))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def run_circleworld(steps: int, seed: int, cfg: GailConfig | None = None):
    """Run ``steps`` iterations and log one row per iteration.

    Log columns: ``phi`` = (mean rollout radius, radius std), ``omega`` =
    (critic score gap, critic loss), ``c`` = mean code of the batch,
    ``loss_D`` the critic loss and ``loss_pi`` its negation,
    ``step_norm_sq`` the squared change of the policy parameters.
    Returns ``(state, log)``.
    """
    cfg = cfg or GailConfig()
    state = init_gail(cfg, seed)
    log = TrajectoryLog(cfg.code_size)

    def flat(st):
        return np.concatenate([np.ravel(a) for a in st.policy.trunk.param_list() + [st.policy.log_std]])

    prev = flat(state)
    for t in range(steps):
        state = ftnpl_gail_iteration(state)
        cur = flat(state)
        b = state.last_batch
        radii = np.linalg.norm(b.positions, axis=1)
        h = state.history
        log.append(t + 1, (radii.mean(), radii.std()), (h["score_gap"][-1], h["disc_loss"][-1]),
                   b.codes.mean(axis=0), -h["disc_loss"][-1], h["disc_loss"][-1], h["r_m"][-1],
                   float(np.sum((cur - prev) ** 2)), None)
        prev = cur
    return state, log
