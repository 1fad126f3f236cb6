"""Two-player games with optional mediator codes.

Continuous matching pennies (zero-sum and a hinge-loss variant), its
discrete simplex version, and a one-dimensional GAN. Loss functions accept
plain arrays or autodiff variables and broadcast over leading axes, so
``loss_pi(P[:, None], W[None], c)`` evaluates every queued pair at once.

How a code enters the continuous games
--------------------------------------
Adding a scalar to every coordinate of a strategy cannot change
``phi A omega^T`` for matching pennies, because the all-ones vector lies in
the kernel of ``A`` on both sides. The default ``"proximal"`` injection
therefore lets each code component act as a nonnegative weight on a
quadratic term centred at the equilibrium::

    L(phi, omega, c) = phi A omega^T + relu(c_pi)/2 |phi|^2 - relu(c_D)/2 |omega|^2

which is the original game at ``c = 0``. The literal ``"additive"`` shift is
kept as an option.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .numerics import autodiff as ad
from .numerics.mlp import MlpParams, init_mlp, mlp_apply

__all__ = [
    "PENNIES_A",
    "split_code",
    "pennies_loss",
    "relu_pennies_losses",
    "PenniesGame",
    "DiscretePennies",
    "ToyGanGame",
    "toygan_losses",
    "toygan_value",
    "mne_reference",
]

PENNIES_A = np.array([[1.0, -1.0], [-1.0, 1.0]])
INJECTIONS = ("proximal", "additive")


def split_code(c):
    """Map a code of length 0, 1 or 2 to the per-player pair ``(c_pi, c_D)``."""
    if c is None:
        return 0.0, 0.0
    n = len(c)
    if n == 0:
        return 0.0, 0.0
    if n == 1:
        return c[0], c[0]
    if n == 2:
        return c[0], c[1]
    raise ConfigError(f"pennies games take codes of length 0, 1 or 2, got {n}", field="code_size")


def _bilinear(phi, omega):
    return ad.vsum((phi @ PENNIES_A) * omega, axis=-1)


def _sq(x):
    return ad.vsum(ad.square(x), axis=-1)


def _check_injection(injection):
    if injection not in INJECTIONS:
        raise ConfigError(f"unknown injection {injection!r}", field="injection")


def pennies_loss(phi, omega, c=None, injection: str = "proximal"):
    """Agent loss of continuous matching pennies; the discriminator's is its negation."""
    _check_injection(injection)
    cp, cd = split_code(c)
    if injection == "additive":
        return _bilinear(phi + cp, omega + cd)
    return _bilinear(phi, omega) + 0.5 * float(max(cp, 0.0)) * _sq(phi) - 0.5 * float(max(cd, 0.0)) * _sq(omega)


def relu_pennies_losses(phi, omega, c=None, injection: str = "proximal"):
    """``(loss_pi, loss_D)`` of the hinge variant where ``loss_D = max(0, -phi A omega^T)``."""
    _check_injection(injection)
    cp, cd = split_code(c)
    if injection == "additive":
        bil = _bilinear(phi + cp, omega + cd)
        return bil, ad.relu(-bil)
    bil = _bilinear(phi, omega)
    loss_pi = bil + 0.5 * float(max(cp, 0.0)) * _sq(phi)
    loss_d = ad.relu(-bil) + 0.5 * float(max(cd, 0.0)) * _sq(omega)
    return loss_pi, loss_d


@dataclass(frozen=True)
class PenniesGame:
    """Continuous matching pennies over ``phi, omega`` in R^2."""

    nonconvex: bool = False
    injection: str = "proximal"

    def __post_init__(self):
        _check_injection(self.injection)

    @property
    def name(self) -> str:
        return "pennies_nonconvex" if self.nonconvex else "pennies"

    @property
    def is_zero_sum(self) -> bool:
        return not self.nonconvex

    dim = 2

    def loss_pi(self, phi, omega, c=None):
        if self.nonconvex:
            return relu_pennies_losses(phi, omega, c, self.injection)[0]
        return pennies_loss(phi, omega, c, self.injection)

    def loss_D(self, phi, omega, c=None):
        if self.nonconvex:
            return relu_pennies_losses(phi, omega, c, self.injection)[1]
        return -pennies_loss(phi, omega, c, self.injection)

    def losses(self, phi, omega, c=None):
        if self.nonconvex:
            return relu_pennies_losses(phi, omega, c, self.injection)
        v = pennies_loss(phi, omega, c, self.injection)
        return v, -v

    def mne_reference(self):
        return np.zeros(2), np.zeros(2)

    def marginal_losses(self, queue_pi, queue_d, c=None):
        """Summed losses of each queued strategy against the opponent's queue.

        ``u_pi[k] = sum_j loss_pi(phi_k, omega_j, c)`` and
        ``u_D[k] = sum_j loss_D(phi_j, omega_k, c)``.
        """
        P = np.asarray(queue_pi, dtype=float)
        W = np.asarray(queue_d, dtype=float)
        lp, ld = self.losses(P[:, None, :], W[None, :, :], c)
        return np.asarray(lp).sum(axis=1), np.asarray(ld).sum(axis=0)


@dataclass(frozen=True)
class DiscretePennies:
    """Matching pennies on the simplex: the agent loses ``A[a, b]``."""

    @property
    def loss_matrix_pi(self) -> np.ndarray:
        return PENNIES_A.copy()

    @property
    def loss_matrix_d(self) -> np.ndarray:
        return -PENNIES_A

    name = "discrete_pennies"
    is_zero_sum = True

    def loss_pi(self, mu_pi, mu_d, c=None):
        return mu_pi @ PENNIES_A @ mu_d

    def loss_D(self, mu_pi, mu_d, c=None):
        return -(mu_pi @ PENNIES_A @ mu_d)

    def mne_reference(self):
        return np.full(2, 0.5), np.full(2, 0.5)


# ---------------------------------------------------------------------------
# one-dimensional GAN


def _plist(net):
    return net.param_list() if isinstance(net, MlpParams) else net


def _with_code(x, c, n):
    """Column-stack ``x`` (n, 1) with the code repeated over rows."""
    if c is None or len(c) == 0:
        return x
    return ad.concat([x, np.tile(np.asarray(c, dtype=float), (n, 1))], axis=1)


def toygan_value(gen, disc, c, real, z, activations=("tanh", "tanh")):
    """Saturating GAN value ``mean log D(real) + mean log(1 - D(G(z)))``.

    ``gen`` and ``disc`` may be :class:`MlpParams` or flat parameter lists
    (e.g. autodiff variables); ``D`` is the logistic of the discriminator
    output.
    """
    real = np.asarray(real, dtype=float).reshape(-1, 1)
    z = np.asarray(z, dtype=float).reshape(-1, 1)
    if real.shape[0] == 0 or z.shape[0] == 0:
        raise ConfigError("GAN batches must be nonempty", field="batch")
    if isinstance(disc, MlpParams):
        activations = disc.activations
    gp, dp = _plist(gen), _plist(disc)
    fake = mlp_apply(gp, (), _with_code(z, c, z.shape[0]))
    d_real = mlp_apply(dp, activations, _with_code(real, c, real.shape[0]))
    d_fake = mlp_apply(dp, activations, _with_code(fake, c, z.shape[0]))
    return ad.vmean(ad.log_sigmoid(d_real)) + ad.vmean(ad.log_sigmoid(-d_fake))


def toygan_losses(gen, disc, c, batch, noise):
    """``(loss_pi, loss_D) = (L, -L)`` for the GAN value ``L``."""
    v = toygan_value(gen, disc, c, batch, noise)
    return v, -v


@dataclass(frozen=True)
class ToyGanGame:
    """1-D GAN: affine generator on ``[z; c]``, tanh discriminator on ``[x; c]``."""

    data_mean: float = 2.0
    data_std: float = 0.5
    code_size: int = 2
    batch_size: int = 64
    disc_hidden: int = 16

    name = "toygan"
    is_zero_sum = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch size must be positive", field="batch_size")
        if self.data_std <= 0:
            raise ConfigError("data std must be positive", field="data_std")

    def init_players(self, rng, zero_code_weights: bool = False):
        gen = init_mlp([1 + self.code_size, 1], rng)
        disc = init_mlp([1 + self.code_size, self.disc_hidden, self.disc_hidden, 1], rng)
        if zero_code_weights:
            # both networks start out ignoring the code
            gen.weights[0][:, 1:] = 0.0
            disc.weights[0][:, 1:] = 0.0
        return gen, disc

    def sample_batch(self, rng):
        real = rng.normal(self.data_mean, self.data_std, self.batch_size)
        z = rng.standard_normal(self.batch_size)
        return real, z

    def loss_pi(self, gen, disc, c, real, z):
        return toygan_value(gen, disc, c, real, z)

    def loss_D(self, gen, disc, c, real, z):
        return -toygan_value(gen, disc, c, real, z)

    def generate(self, gen, z, c):
        z = np.asarray(z, dtype=float).reshape(-1, 1)
        return np.asarray(mlp_apply(_plist(gen), (), _with_code(z, c, z.shape[0])))[:, 0]

    def mne_reference(self):
        return None


def mne_reference(game):
    """Equilibrium of ``game`` as ``(agent, discriminator)`` or ``None`` if unknown."""
    ref = getattr(game, "mne_reference", None)
    return None if ref is None else ref()
