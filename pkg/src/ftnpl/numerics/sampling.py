"""Gaussian reparameterized sampling and exponential perturbations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from . import autodiff as ad

__all__ = [
    "LOG_STD_MIN",
    "LOG_STD_MAX",
    "GaussianHead",
    "gaussian_log_prob",
    "gaussian_reparam_sample",
    "sample_exponential",
]

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class GaussianHead:
    """Diagonal Gaussian with clamped log standard deviation."""

    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.log_std = np.clip(np.asarray(self.log_std, dtype=float), LOG_STD_MIN, LOG_STD_MAX)
        if self.mean.shape != self.log_std.shape:
            raise ConfigError("mean and log_std shapes differ", field="head")


def gaussian_log_prob(c, mean, log_std):
    """Log density of ``c`` under N(mean, diag(exp(log_std))^2).

    ``c`` may be a batch ``(n, C)``; the result is then the summed log
    density of all rows. ``mean`` and ``log_std`` may be tape variables, in which case the result
    is differentiable with respect to them.
    """
    z = (c - mean) * ad.exp(-log_std) if isinstance(log_std, ad.Var) else (c - mean) / np.exp(log_std)
    n = np.size(c)
    # a batch of codes shares one log_std vector
    reps = n // np.size(log_std.value if isinstance(log_std, ad.Var) else log_std)
    return -0.5 * ad.vsum(ad.square(z)) - reps * ad.vsum(log_std) - n * _HALF_LOG_2PI


def gaussian_reparam_sample(head: GaussianHead, rng, eps=None):
    """Draw ``c = mean + exp(log_std) * eps`` and return ``(c, log_prob)``.

    Pass ``eps`` to fix the noise (``eps = 0`` returns the mean).
    """
    if eps is None:
        eps = rng.standard_normal(head.mean.shape)
    c = head.mean + np.exp(head.log_std) * np.asarray(eps, dtype=float)
    return c, float(gaussian_log_prob(c, head.mean, head.log_std))


def sample_exponential(zeta: float, rng, size=None, u=None):
    """Inverse-CDF draw ``-ln(1 - u) / zeta`` with ``u`` uniform in [0, 1)."""
    if not zeta > 0:
        raise ConfigError(f"rate must be positive, got {zeta}", field="zeta")
    if u is None:
        u = rng.random(size)
    return -np.log1p(-np.asarray(u, dtype=float)) / zeta
