"""Small fully connected networks usable with the autodiff tape."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from . import autodiff as ad

__all__ = ["MlpParams", "init_mlp", "mlp_forward", "mlp_apply"]

_ACTIVATIONS = {"tanh": ad.tanh, "relu": ad.relu}


@dataclass
class MlpParams:
    """Weights ``(out, in)`` and biases per layer plus hidden activations.

    ``activations`` has one tag per hidden layer; the output layer is
    always affine.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigError("need one bias per weight matrix", field="layers")
        if len(self.activations) != len(self.weights) - 1:
            raise ConfigError(
                f"expected {len(self.weights) - 1} activation tags, got {len(self.activations)}",
                field="activations",
            )
        for tag in self.activations:
            if tag not in _ACTIVATIONS:
                raise ConfigError(f"unknown activation {tag!r}", field="activations")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ConfigError(f"layer {i} has inconsistent shapes", field="layers")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ConfigError(f"layer {i} input does not chain", field="layers")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def param_list(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]`` (the order used by gradients)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_params(self, plist: Sequence[np.ndarray]) -> "MlpParams":
        return MlpParams(
            [np.array(p, dtype=float) for p in plist[0::2]],
            [np.array(p, dtype=float) for p in plist[1::2]],
            self.activations,
        )

    def copy(self) -> "MlpParams":
        return self.with_params(self.param_list())


def init_mlp(sizes: Sequence[int], rng, activation: str = "tanh", scale: float = 1.0) -> MlpParams:
    """Gaussian init with std ``scale / sqrt(fan_in)`` and zero biases."""
    if len(sizes) < 2:
        raise ConfigError("need at least input and output sizes", field="sizes")
    weights = [rng.normal(0.0, scale / np.sqrt(a), size=(b, a)) for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return MlpParams(weights, biases, (activation,) * (len(sizes) - 2))


def mlp_apply(plist, activations, x):
    """Forward pass from a flat parameter list (arrays or tape variables).

    ``x`` may be a single input ``(n,)`` or a batch ``(B, n)``.
    """
    h = x
    n_layers = len(plist) // 2
    for i in range(n_layers):
        w, b = plist[2 * i], plist[2 * i + 1]
        h = h @ w.T + b
        if i < n_layers - 1:
            h = _ACTIVATIONS[activations[i]](h)
    return h


def mlp_forward(p: MlpParams, x):
    """Deterministic forward pass of ``p`` on ``x``."""
    n = x.shape[-1] if hasattr(x, "shape") and len(x.shape) else None
    if n != p.in_dim:
        raise ConfigError(f"input has {n} features, network expects {p.in_dim}", field="input")
    return mlp_apply(p.param_list(), p.activations, x)
