"""No-regret learners and the queue-based leader step.

Baselines: l2-regularized FTRL (lazy cumulative-gradient form plus the
exact regularized leader for hinge histories), multiplicative weights,
follow-the-perturbed-leader with a projected-descent oracle. The
``ftl_queue_step`` is the player update used with a mediator: one gradient
step on the summed loss against the opponent's last ``K`` strategies.
Replicator flow integration and external regret live here as well.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .kernels import PGD_DECAY
from .errors import ConfigError, NumericError, PreconditionError
from .numerics import autodiff as ad
from .numerics.mlp import MlpParams
from .numerics.sampling import sample_exponential

__all__ = [
    "HistoryQueue",
    "LearnerConfig",
    "CumulativeGradient",
    "ftrl_l2_step",
    "l2_leader_hinge",
    "mw_step",
    "sample_ftpl_noise",
    "ftpl_step",
    "ftl_queue_step",
    "replicator_rhs",
    "rk4_integrate",
    "replicator_flow",
    "external_regret",
]


class HistoryQueue:
    """Bounded FIFO of strategy snapshots; the oldest is evicted when full."""

    def __init__(self, capacity: int, items: Iterable = ()):
        if capacity < 1:
            raise ConfigError("queue capacity must be at least 1", field="k")
        self.capacity = int(capacity)
        self._items: deque = deque(maxlen=self.capacity)
        for x in items:
            self.push(x)

    def push(self, x) -> None:
        self._items.append(x.copy() if hasattr(x, "copy") else x)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i):
        return self._items[i]

    @property
    def full(self) -> bool:
        return len(self._items) == self.capacity

    def items(self) -> list:
        return list(self._items)

    def as_array(self) -> np.ndarray:
        """Stack array snapshots into ``(len, d)``."""
        return np.stack([np.asarray(x, dtype=float) for x in self._items])


@dataclass
class LearnerConfig:
    """Hyperparameters shared by the learners.

    ``ftpl_zeta=None`` picks the rate ``1/sqrt(steps)`` at run time.
    """

    learning_rate: float = 0.01
    reg_weight: float = 1.0
    ftpl_zeta: float | None = None
    ftpl_bound: float = 5.0
    ftpl_inner_steps: int = 50
    ftpl_symmetric: bool = True
    queue_size: int = 5
    code_size: int = 2

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("must be positive", field="learning_rate")
        if not self.reg_weight > 0:
            raise ConfigError("must be positive", field="reg_weight")
        if self.queue_size < 1:
            raise ConfigError("must be at least 1", field="k")
        if self.code_size < 0:
            raise ConfigError("must be nonnegative", field="code_size")
        if self.ftpl_zeta is not None and not self.ftpl_zeta > 0:
            raise ConfigError("must be positive", field="ftpl_zeta")
        if not self.ftpl_bound > 0:
            raise ConfigError("must be positive", field="ftpl_bound")
        if self.ftpl_inner_steps < 1:
            raise ConfigError("must be at least 1", field="ftpl_inner_steps")


@dataclass
class CumulativeGradient:
    """Running sum of per-round gradients for one player."""

    G: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def add(self, g) -> None:
        g = np.asarray(g, dtype=float)
        if g.shape != self.G.shape:
            raise PreconditionError(f"gradient shape {g.shape} does not match {self.G.shape}")
        self.G = self.G + g


def ftrl_l2_step(G: CumulativeGradient, g_t, eta: float, anchor=None, reg_weight: float = 1.0):
    """Add ``g_t`` to ``G`` and return ``anchor - eta * G / reg_weight``.

    This is the argmin of the linearized cumulative loss plus
    ``reg_weight / (2 eta) * |theta - anchor|^2``; ``anchor`` defaults to 0.
    """
    G.add(g_t)
    params = -(eta / reg_weight) * G.G
    return params if anchor is None else np.asarray(anchor, dtype=float) + params


def l2_leader_hinge(anchor, direction, eta: float, pos: float, neg: float):
    """Exact l2-regularized leader for a sum of hinges along ``direction``.

    Minimizes ``|theta - anchor|^2 / (2 eta) + pos * max(y, 0) - neg * min(y, 0)``
    with ``y = theta . direction`` (unit ``direction``), i.e. a soft threshold
    of the anchor's component along ``direction``.
    """
    anchor = np.asarray(anchor, dtype=float)
    y0 = float(anchor @ direction)
    if y0 - eta * pos > 0:
        y = y0 - eta * pos
    elif y0 + eta * neg < 0:
        y = y0 + eta * neg
    else:
        y = 0.0
    return anchor + (y - y0) * direction


def mw_step(mu, u, eta: float):
    """Multiplicative weights: ``mu'(k) ~ mu(k) exp(-eta u(k))``."""
    mu = np.asarray(mu, dtype=float)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise PreconditionError("losses must be finite")
    w = mu * np.exp(-eta * (u - u.min()))
    s = w.sum()
    if not s > 0 or not np.isfinite(s):
        raise NumericError("all multiplicative weights vanished", op="mw_step")
    return w / s


def sample_ftpl_noise(rng, d: int, zeta: float, symmetric: bool = True):
    """Per-coordinate exponential perturbation, optionally with random signs."""
    sigma = sample_exponential(zeta, rng, size=d)
    if symmetric:
        sigma = sigma * rng.choice(np.array([-1.0, 1.0]), size=d)
    return sigma


def ftpl_step(history_grad: Callable, theta_prev, sigma, cfg: LearnerConfig):
    """Approximate perturbed leader over the box ``[-B, B]^d``.

    ``history_grad(theta)`` returns the gradient of the cumulative history
    loss. Runs ``cfg.ftpl_inner_steps`` projected steps of length
    ``2B * PGD_DECAY**k`` along the normalized gradient of ``history + sigma . theta``,
    warm-started at ``theta_prev``.
    """
    B = cfg.ftpl_bound
    x = np.clip(np.asarray(theta_prev, dtype=float), -B, B)
    sigma = np.asarray(sigma, dtype=float)
    for k in range(cfg.ftpl_inner_steps):
        g = np.asarray(history_grad(x), dtype=float) + sigma
        gn = np.sqrt((g * g).sum())
        if gn == 0.0:
            break
        x = np.minimum(np.maximum(x - (2.0 * B * PGD_DECAY**k) * g / gn, -B), B)
    return x


def _role_loss(game, role):
    if role == "pi":
        return lambda own, opp, c, **kw: game.loss_pi(own, opp, c, **kw)
    if role == "D":
        return lambda own, opp, c, **kw: game.loss_D(opp, own, c, **kw)
    raise ConfigError(f"role must be 'pi' or 'D', got {role!r}", field="role")


def ftl_queue_step(own, opp_queue, c, game, eta: float, role: str, **loss_kwargs):
    """One descent step on the loss summed over every queued opponent.

    ``own`` is an array strategy or an :class:`MlpParams`; queued opponents
    have the matching type. Extra keyword arguments (e.g. data batches) are
    forwarded to the game's loss. The code ``c`` is held fixed.
    """
    items = list(opp_queue)
    if not items:
        raise PreconditionError("opponent queue is empty")
    loss = _role_loss(game, role)
    if isinstance(own, MlpParams):
        def total(plist):
            out = 0.0
            for opp in items:
                out = out + loss(plist, opp, c, **loss_kwargs)
            return out

        _, (g,) = ad.value_and_grad(total, own.param_list())
        return own.with_params([p - eta * gp for p, gp in zip(own.param_list(), g)])
    own = np.asarray(own, dtype=float)
    opp = np.stack([np.asarray(o, dtype=float) for o in items])
    g = ad.grad(lambda x: ad.vsum(loss(x, opp, c, **loss_kwargs)), own)
    return own - eta * g


def replicator_rhs(mu_pi, mu_d, payoff_pi, payoff_d):
    """Two-population replicator vector field.

    ``payoff_pi[a, b]`` and ``payoff_d[a, b]`` are the payoffs (negated
    losses) when the agent plays ``a`` and the discriminator ``b``. Each
    action grows at the rate its payoff against the opponent's mixture
    exceeds the own mixture's average.
    """
    mu_pi = np.asarray(mu_pi, dtype=float)
    mu_d = np.asarray(mu_d, dtype=float)
    if np.any(mu_pi <= 0) or np.any(mu_d <= 0):
        raise PreconditionError("replicator dynamics need interior strategies")
    u_pi = payoff_pi @ mu_d
    u_d = payoff_d.T @ mu_pi
    return mu_pi * (u_pi - mu_pi @ u_pi), mu_d * (u_d - mu_d @ u_d)


@dataclass
class Flow:
    """Integrated trajectory of one or more simplex strategies."""

    trajectories: tuple
    drift: np.ndarray
    h: float

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(len(self.trajectories[0]))


def rk4_integrate(rhs: Callable, mu0: Sequence, h: float, T: float) -> Flow:
    """Classical RK4 for ``d mu / dt = rhs(*mu)`` with per-step renormalization.

    ``mu0`` is a tuple of simplex vectors and ``rhs`` returns a tuple of the
    same shapes. After each step each vector is divided by its sum and the
    pre-normalization deviation ``|sum - 1|`` is recorded.
    """
    if not h > 0:
        raise PreconditionError("step size must be positive")
    n_steps = int(round(T / h))
    state = [np.asarray(m, dtype=float).copy() for m in mu0]
    trajs = [[s.copy()] for s in state]
    drift = np.zeros(n_steps)

    def shifted(base, ks, scale):
        return [b + scale * k for b, k in zip(base, ks)]

    for t in range(n_steps):
        k1 = rhs(*state)
        k2 = rhs(*shifted(state, k1, 0.5 * h))
        k3 = rhs(*shifted(state, k2, 0.5 * h))
        k4 = rhs(*shifted(state, k3, h))
        new = [s + (h / 6.0) * (a + 2 * b + 2 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4)]
        sums = [x.sum() for x in new]
        dr = max(abs(s - 1.0) for s in sums)
        drift[t] = dr
        if dr > kernels.SIMPLEX_TOL or any(x.min() < -kernels.SIMPLEX_TOL for x in new):
            raise NumericError(f"state left the simplex at step {t} (drift {dr:.3g})", op="rk4_integrate")
        state = [x / s for x, s in zip(new, sums)]
        for tr, s in zip(trajs, state):
            tr.append(s.copy())
    return Flow(tuple(np.array(tr) for tr in trajs), drift, h)


def replicator_flow(loss_pi, loss_d, mu_pi0, mu_d0, h: float, T: float) -> Flow:
    """Compiled RK4 replicator flow for a bimatrix game given loss matrices."""
    if not h > 0:
        raise PreconditionError("step size must be positive")
    mu_pi0 = np.asarray(mu_pi0, dtype=float)
    mu_d0 = np.asarray(mu_d0, dtype=float)
    if np.any(mu_pi0 <= 0) or np.any(mu_d0 <= 0):
        raise PreconditionError("replicator dynamics need interior strategies")
    n_steps = int(round(T / h))
    tp, td, drift, status = kernels.replicator_rk4_bimatrix(
        -np.asarray(loss_pi, dtype=float), -np.asarray(loss_d, dtype=float), mu_pi0, mu_d0, float(h), n_steps
    )
    if status >= 0:
        raise NumericError(f"state left the simplex at step {status}", op="replicator_flow")
    return Flow((tp, td), drift, h)


def external_regret(plays_pi, plays_d, game, role: str = "pi", bound: float = 5.0) -> float:
    """Realized cumulative loss minus that of the best fixed strategy in hindsight.

    For discrete games the plays are mixed strategies (one-hot for pure
    actions) and the comparator ranges over pure actions. For continuous
    pennies the comparator ranges over the box ``[-bound, bound]^2``; the
    cumulative loss is piecewise linear with kinks only at the origin, so
    the corners together with the origin contain a minimizer.
    """
    P = np.atleast_2d(np.asarray(plays_pi, dtype=float))
    W = np.atleast_2d(np.asarray(plays_d, dtype=float))
    if len(P) == 0 or len(P) != len(W):
        raise PreconditionError("need a nonempty history with one play per player per round")
    if role not in ("pi", "D"):
        raise ConfigError(f"role must be 'pi' or 'D', got {role!r}", field="role")
    if hasattr(game, "loss_matrix_pi"):
        if role == "pi":
            L = game.loss_matrix_pi
            realized = np.einsum("ta,ab,tb->", P, L, W)
            best = (L @ W.sum(axis=0)).min()
        else:
            L = game.loss_matrix_d
            realized = np.einsum("ta,ab,tb->", P, L, W)
            best = (P.sum(axis=0) @ L).min()
        return float(realized - best)
    cands = np.array([[0.0, 0.0]] + [list(s) for s in itertools.product((-bound, bound), repeat=2)])
    if role == "pi":
        realized = np.sum(game.loss_pi(P, W))
        totals = [np.sum(game.loss_pi(x[None, :], W)) for x in cands]
    else:
        realized = np.sum(game.loss_D(P, W))
        totals = [np.sum(game.loss_D(P, x[None, :])) for x in cands]
    return float(realized - min(totals))
