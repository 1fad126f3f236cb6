"""Numerical building blocks: autodiff, random streams, MLPs, sampling."""
from .autodiff import Var, finite_diff, grad, value_and_grad
from .mlp import MlpParams, init_mlp, mlp_apply, mlp_forward
from .rng import Rng, derive_rng, make_rng, spawn
from .sampling import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    GaussianHead,
    gaussian_log_prob,
    gaussian_reparam_sample,
    sample_exponential,
)

__all__ = [
    "Var",
    "grad",
    "value_and_grad",
    "finite_diff",
    "MlpParams",
    "init_mlp",
    "mlp_apply",
    "mlp_forward",
    "Rng",
    "make_rng",
    "derive_rng",
    "spawn",
    "GaussianHead",
    "gaussian_log_prob",
    "gaussian_reparam_sample",
    "sample_exponential",
    "LOG_STD_MIN",
    "LOG_STD_MAX",
]
