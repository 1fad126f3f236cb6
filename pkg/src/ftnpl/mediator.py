"""Neural mediator: emits correlated codes and learns from marginal payoff gains.

The mediator is a small tanh network producing the mean of a diagonal
Gaussian over codes. Its reward penalizes every positive pairwise gain a
player could obtain by switching between strategies in its recent history,
and it is trained with the score-function (REINFORCE) estimator against a
running-mean baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, NumericError, PreconditionError
from .numerics import autodiff as ad
from .numerics.mlp import MlpParams, init_mlp, mlp_apply
from .numerics.sampling import LOG_STD_MAX, LOG_STD_MIN, GaussianHead, gaussian_log_prob

__all__ = [
    "PENALTIES",
    "MediatorPolicy",
    "CodeDraw",
    "GainMatrices",
    "draw_code",
    "emit_code",
    "marginal_gains",
    "mediator_reward",
    "mediator_update",
]

PENALTIES = ("squared", "relu_of_sum", "sum_of_relus")
MODES = ("mean", "sample")


@dataclass
class MediatorPolicy:
    """Mediator network, log standard deviations and running statistics.

    With ``input_norm`` the observation is divided by a running RMS
    (exponential average of its mean square) before entering the network,
    so the codes keep responding as the players' strategies shrink. With
    ``squash`` the Gaussian mean is ``tanh`` of the network output, which
    keeps codes on the scale of the other network inputs.
    """

    trunk: MlpParams
    log_std: np.ndarray
    input_norm: bool = True
    input_ms: float | None = None
    baseline: float | None = None
    decay: float = 0.99
    squash: bool = False
    normalize_advantage: bool = False
    adv_ms: float | None = None

    @classmethod
    def create(cls, in_dim: int, code_size: int, rng, hidden=(32, 32), log_std_init: float = 0.0,
               input_norm: bool = True, decay: float = 0.99, squash: bool = False,
               normalize_advantage: bool = False) -> "MediatorPolicy":
        if code_size < 1:
            raise ConfigError("a mediator needs at least one code component", field="code_size")
        trunk = init_mlp([in_dim, *hidden, code_size], rng, activation="tanh")
        log_std = np.clip(np.full(code_size, float(log_std_init)), LOG_STD_MIN, LOG_STD_MAX)
        return cls(trunk, log_std, input_norm=input_norm, decay=decay, squash=squash,
                   normalize_advantage=normalize_advantage)

    @property
    def code_size(self) -> int:
        return self.trunk.out_dim

    @property
    def in_dim(self) -> int:
        return self.trunk.in_dim

    def features(self, info, update: bool = True) -> np.ndarray:
        """Network input for observation ``info``; refreshes the RMS if ``update``."""
        info = np.asarray(info, dtype=float)
        if info.shape != (self.in_dim,):
            raise ConfigError(f"mediator expects {self.in_dim} inputs, got {info.shape}", field="info")
        if not self.input_norm:
            return info
        q = float(info @ info) / info.size
        ms = q if self.input_ms is None else self.decay * self.input_ms + (1.0 - self.decay) * q
        if update:
            self.input_ms = ms
        return info / np.sqrt(ms + 1e-12)

    def mean_fn(self, plist, features):
        """Gaussian mean from a parameter list (arrays or tape variables)."""
        out = mlp_apply(plist, self.trunk.activations, features)
        return ad.tanh(out) if self.squash else out

    def head(self, features) -> GaussianHead:
        return GaussianHead(np.asarray(self.mean_fn(self.trunk.param_list(), features)), self.log_std)


class CodeDraw(NamedTuple):
    """Codes from one mediator call.

    ``played`` is what the players see (the mean or the sample);
    ``sample`` is always a fresh draw, used for learning.
    """

    played: np.ndarray
    log_prob: float
    sample: np.ndarray
    sample_log_prob: float
    features: np.ndarray


def draw_code(policy: MediatorPolicy, info, mode: str, rng) -> CodeDraw:
    """Evaluate the mediator on ``info``; always draws one reparameterized sample."""
    if mode not in MODES:
        raise ConfigError(f"unknown code mode {mode!r}", field="code_mode")
    feats = policy.features(info)
    head = policy.head(feats)
    eps = rng.standard_normal(head.mean.shape)
    sample = head.mean + np.exp(head.log_std) * eps
    lp_sample = float(gaussian_log_prob(sample, head.mean, head.log_std))
    if mode == "sample":
        return CodeDraw(sample, lp_sample, sample, lp_sample, feats)
    lp_mean = float(gaussian_log_prob(head.mean, head.mean, head.log_std))
    return CodeDraw(head.mean, lp_mean, sample, lp_sample, feats)


def emit_code(policy: MediatorPolicy, info, mode: str, rng):
    """``(c, log_prob)``: the head mean (``mode="mean"``) or a sample."""
    d = draw_code(policy, info, mode, rng)
    return d.played, d.log_prob


@dataclass(frozen=True)
class GainMatrices:
    """Pairwise marginal payoff gains ``G[i][j] = u[j] - u[i]`` for both players."""

    G_pi: np.ndarray
    G_D: np.ndarray


def marginal_gains(u_pi, u_D) -> GainMatrices:
    """Gain matrices from per-strategy summed losses."""
    u_pi = np.asarray(u_pi, dtype=float)
    u_D = np.asarray(u_D, dtype=float)
    if u_pi.ndim != 1 or u_pi.shape != u_D.shape or u_pi.size == 0:
        raise PreconditionError(f"need equal nonempty loss vectors, got {u_pi.shape} and {u_D.shape}")
    return GainMatrices(u_pi[None, :] - u_pi[:, None], u_D[None, :] - u_D[:, None])


def mediator_reward(G: GainMatrices, penalty: str = "squared") -> float:
    """Nonpositive mediator reward penalizing positive or any gains."""
    if G.G_pi.shape != G.G_D.shape:
        raise PreconditionError("gain matrices differ in shape")
    if penalty == "squared":
        r = -(np.square(G.G_pi).sum() + np.square(G.G_D).sum())
    elif penalty == "relu_of_sum":
        r = -np.maximum(G.G_pi + G.G_D, 0.0).sum()
    elif penalty == "sum_of_relus":
        r = -(np.maximum(G.G_pi, 0.0).sum() + np.maximum(G.G_D, 0.0).sum())
    else:
        raise ConfigError(f"unknown penalty {penalty!r}", field="penalty")
    return float(r) + 0.0  # normalizes -0.0


def mediator_update(policy: MediatorPolicy, features, code, r_m: float, eta_m: float,
                    baseline: float | None = None) -> MediatorPolicy:
    """Score-function ascent step ``psi += eta_m (r_m - b) grad log p(code | features)``.

    Without an explicit ``baseline`` the policy's running mean of ``r_m`` is
    refreshed first and used as ``b``. With ``normalize_advantage`` the
    advantage is divided by its running RMS. ``features`` and ``code`` may be
    batches of rows that all share the reward (e.g. one episode); the
    log-probability is then averaged over rows.
    """
    new = replace(policy)
    if baseline is None:
        b = r_m if policy.baseline is None else policy.decay * policy.baseline + (1.0 - policy.decay) * r_m
        new.baseline = b
    else:
        b = baseline
    adv = float(r_m) - float(b)
    if adv == 0.0 or eta_m == 0.0:
        return new
    if policy.normalize_advantage:
        # divide by a running RMS so the step size does not depend on the reward scale
        ms = adv * adv if policy.adv_ms is None else policy.decay * policy.adv_ms + (1.0 - policy.decay) * adv * adv
        new.adv_ms = ms
        adv = adv / np.sqrt(ms)
    code = np.asarray(code, dtype=float)
    features = np.asarray(features, dtype=float)
    rows = len(code) if code.ndim == 2 else 1
    if rows == 0:
        return new

    def logp(plist, log_std):
        return gaussian_log_prob(code, policy.mean_fn(plist, features), log_std) * (1.0 / rows)

    _, (g_params, g_ls) = ad.value_and_grad(logp, policy.trunk.param_list(), policy.log_std)
    for g in g_params + [g_ls]:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite mediator gradient", op="mediator_update")
    step = eta_m * adv
    new.trunk = policy.trunk.with_params([p + step * g for p, g in zip(policy.trunk.param_list(), g_params)])
    new.log_std = np.clip(policy.log_std + step * g_ls, LOG_STD_MIN, LOG_STD_MAX)
    return new
