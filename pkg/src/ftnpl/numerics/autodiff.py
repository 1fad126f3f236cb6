"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Var` wraps an array and records how it was produced. Calling
:func:`grad` or :func:`value_and_grad` builds the tape by running the
function once on ``Var`` inputs and then sweeps it backwards.

The primitive set is deliberately small: elementwise arithmetic with
numpy broadcasting, matmul, sum/mean, tanh, relu, exp, log, square,
log-sigmoid, concatenation and indexing. Every module function also accepts
plain arrays and then simply evaluates with numpy, so game losses can be
written once and used both for fast evaluation and for differentiation.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NumericError

__all__ = [
    "Var",
    "grad",
    "value_and_grad",
    "finite_diff",
    "tanh",
    "relu",
    "exp",
    "log",
    "square",
    "log_sigmoid",
    "concat",
    "vsum",
    "vmean",
    "maximum0",
]


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverses numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _check(value, op):
    if not np.all(np.isfinite(value)):
        raise NumericError("non-finite intermediate value", op=op)
    return value


class Var:
    """Array-valued node on the gradient tape."""

    __slots__ = ("value", "grad", "_parents", "op")
    __array_priority__ = 1000.0

    def __init__(self, value, parents=(), op="leaf"):
        self.value = np.asarray(value, dtype=float)
        self._parents = parents
        self.op = op
        self.grad = None

    # -- array protocol ---------------------------------------------------
    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Var({self.value!r}, op={self.op!r})"

    @property
    def T(self):
        return _node(self.value.T, "transpose", (self, lambda g: g.T))

    def reshape(self, *shape):
        old = self.value.shape
        return _node(self.value.reshape(*shape), "reshape", (self, lambda g: g.reshape(old)))

    def sum(self, axis=None):
        return vsum(self, axis)

    def mean(self, axis=None):
        return vmean(self, axis)

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return _add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _add(self, _neg(_lift(other)))

    def __rsub__(self, other):
        return _add(_lift(other), _neg(self))

    def __mul__(self, other):
        return _mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(_lift(other), self)

    def __neg__(self):
        return _neg(self)

    def __pow__(self, p):
        if isinstance(p, Var):
            raise TypeError("only constant exponents are supported")
        if p == 2:
            return square(self)
        x = self.value
        return _node(x**p, "pow", (self, lambda g: g * p * x ** (p - 1)))

    def __matmul__(self, other):
        return _matmul(self, _lift(other))

    def __rmatmul__(self, other):
        return _matmul(_lift(other), self)

    def __getitem__(self, idx):
        shape = self.value.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return out

        return _node(self.value[idx], "index", (self, back))

    # -- backward -------------------------------------------------------------
    def backward(self):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable node."""
        if self.value.size != 1:
            raise ValueError("backward() needs a scalar output")
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node.grad is None:
                continue
            for parent, back in node._parents:
                contrib = back(node.grad)
                parent.grad = contrib if parent.grad is None else parent.grad + contrib


def _lift(x):
    return x if isinstance(x, Var) else Var(x, op="const")


def _node(value, op, *pairs):
    return Var(_check(value, op), tuple(pairs), op)


def _add(a, b):
    a, b = _lift(a), _lift(b)
    sa, sb = a.value.shape, b.value.shape
    return _node(
        a.value + b.value,
        "add",
        (a, lambda g: _unbroadcast(g, sa)),
        (b, lambda g: _unbroadcast(g, sb)),
    )


def _neg(a):
    return _node(-a.value, "neg", (a, lambda g: -g))


def _mul(a, b):
    a, b = _lift(a), _lift(b)
    av, bv = a.value, b.value
    return _node(
        av * bv,
        "mul",
        (a, lambda g: _unbroadcast(g * bv, av.shape)),
        (b, lambda g: _unbroadcast(g * av, bv.shape)),
    )


def _div(a, b):
    a, b = _lift(a), _lift(b)
    av, bv = a.value, b.value
    with np.errstate(divide="ignore", invalid="ignore"):
        out = av / bv
    return _node(
        out,
        "div",
        (a, lambda g: _unbroadcast(g / bv, av.shape)),
        (b, lambda g: _unbroadcast(-g * av / bv**2, bv.shape)),
    )


def _matmul(a, b):
    av, bv = a.value, b.value
    out = av @ bv
    if av.ndim == 1 and bv.ndim == 1:
        return _node(out, "matmul", (a, lambda g: g * bv), (b, lambda g: g * av))
    if av.ndim == 1:
        return _node(out, "matmul", (a, lambda g: bv @ g), (b, lambda g: np.outer(av, g)))
    if bv.ndim == 1:
        return _node(out, "matmul", (a, lambda g: np.outer(g, bv)), (b, lambda g: av.T @ g))
    return _node(out, "matmul", (a, lambda g: g @ bv.T), (b, lambda g: av.T @ g))


# -- public elementwise / reduction functions ----------------------------------
def tanh(x):
    if not isinstance(x, Var):
        return np.tanh(x)
    y = np.tanh(x.value)
    return _node(y, "tanh", (x, lambda g: g * (1.0 - y * y)))


def relu(x):
    if not isinstance(x, Var):
        return np.maximum(x, 0.0)
    mask = (x.value > 0).astype(float)
    return _node(x.value * mask, "relu", (x, lambda g: g * mask))


maximum0 = relu


def exp(x):
    if not isinstance(x, Var):
        with np.errstate(over="ignore"):
            return _check(np.exp(x), "exp")
    with np.errstate(over="ignore"):
        y = np.exp(x.value)
    return _node(y, "exp", (x, lambda g: g * y))


def log(x):
    if not isinstance(x, Var):
        with np.errstate(divide="ignore", invalid="ignore"):
            return _check(np.log(x), "log")
    xv = x.value
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(xv)
    return _node(y, "log", (x, lambda g: g / xv))


def square(x):
    if not isinstance(x, Var):
        return np.square(x)
    xv = x.value
    return _node(xv * xv, "square", (x, lambda g: 2.0 * g * xv))


def log_sigmoid(x):
    """Numerically stable ``log(1 / (1 + exp(-x)))``."""
    xv = x.value if isinstance(x, Var) else np.asarray(x, dtype=float)
    y = -np.logaddexp(0.0, -xv)
    if not isinstance(x, Var):
        return y
    sig_neg = np.exp(y - xv)  # sigmoid(-x) = exp(log_sigmoid(x) - x)
    return _node(y, "log_sigmoid", (x, lambda g: g * sig_neg))


def vsum(x, axis=None):
    if not isinstance(x, Var):
        return np.sum(x, axis=axis)
    shape = x.value.shape

    def back(g):
        if axis is None:
            return np.broadcast_to(g, shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), shape).copy()

    return _node(np.sum(x.value, axis=axis), "sum", (x, back))


def vmean(x, axis=None):
    n = np.size(x.value if isinstance(x, Var) else x) if axis is None else np.shape(
        x.value if isinstance(x, Var) else x
    )[axis]
    return vsum(x, axis) * (1.0 / n)


def concat(parts, axis=0):
    """Concatenate arrays and/or Vars along ``axis``."""
    if not any(isinstance(p, Var) for p in parts):
        return np.concatenate([np.asarray(p, dtype=float) for p in parts], axis=axis)
    vs = [_lift(p) for p in parts]
    sizes = [v.value.shape[axis] for v in vs]
    bounds = np.cumsum([0] + sizes)
    pairs = []
    for v, lo, hi in zip(vs, bounds[:-1], bounds[1:]):
        pairs.append((v, lambda g, lo=lo, hi=hi: np.take(g, np.arange(lo, hi), axis=axis)))
    return _node(np.concatenate([v.value for v in vs], axis=axis), "concat", *pairs)


# -- drivers ------------------------------------------------------------------------
def _wrap(arg):
    if isinstance(arg, (list, tuple)):
        return [Var(a) for a in arg]
    return Var(arg)


def _collect(wrapped):
    if isinstance(wrapped, list):
        return [np.zeros_like(v.value) if v.grad is None else v.grad for v in wrapped]
    return np.zeros_like(wrapped.value) if wrapped.grad is None else wrapped.grad


def value_and_grad(f: Callable, *args):
    """Evaluate scalar ``f(*args)`` and its gradient w.r.t. every argument.

    Each argument may be an array or a list/tuple of arrays (e.g. network
    parameters); gradients come back in the same structure.
    """
    wrapped = [_wrap(a) for a in args]
    out = f(*wrapped)
    if not isinstance(out, Var):
        # f did not depend on its inputs
        val = float(np.asarray(out))
        return val, tuple(_collect(w) for w in wrapped)
    if out.value.size != 1:
        raise ValueError("f must return a scalar")
    out.backward()
    return float(out.value.reshape(())), tuple(_collect(w) for w in wrapped)


def grad(f: Callable, x):
    """Exact reverse-mode gradient of scalar ``f`` at ``x``."""
    return value_and_grad(f, x)[1][0]


def finite_diff(f: Callable, x, h: float = 1e-5):
    """Central-difference gradient estimate of ``f`` at ``x``."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.array(x, dtype=float)
    out = np.zeros_like(x)
    flat, gflat = x.reshape(-1), out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return out


def flat_params(params: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(p) for p in params]) if len(params) else np.zeros(0)


def unflat_params(vec, like: Sequence[np.ndarray]):
    """Split a flat vector (array or :class:`Var`) into arrays shaped like ``like``."""
    out, i = [], 0
    for p in like:
        n = np.size(p)
        piece = vec[i : i + n]
        if isinstance(piece, Var):
            out.append(piece.reshape(np.shape(p)))
        else:
            out.append(np.asarray(piece, dtype=float).reshape(np.shape(p)))
        i += n
    return out
