"""Tape-based reverse-mode differentiation over numpy arrays.

Operations record a backward closure on the active :class:`Tape` only if
one of their inputs requires a gradient; outside a tape they are plain
forward computations, which is what inference uses.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


class Tape:
    """Ordered record of recorded ops; backward replays it in reverse."""

    def __init__(self):
        self.entries: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.pop()
        return False

    def __len__(self):
        return len(self.entries)

    def record(self, out: Tensor, backward: Callable[[np.ndarray], None]) -> None:
        self.entries.append((out, backward))

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, fn in reversed(self.entries):
            if out.grad is not None:
                fn(out.grad)


_ACTIVE: list[Tape] = []


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _wrap(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _ACTIVE and any(p.requires_grad for p in parents):
        out.requires_grad = True
        _ACTIVE[-1].record(out, backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- arithmetic ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.shape))

    return _wrap(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.shape))

    return _wrap(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))

    return _wrap(a.data * b.data, (a, b), backward)


def matmul(a, b) -> Tensor:
    """``a @ b`` where ``b`` is 2-D or shares ``a``'s batch dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            if b.data.ndim == 2:
                a2 = a.data.reshape(-1, a.shape[-1])
                b.accumulate(a2.T @ g.reshape(-1, g.shape[-1]))
            else:
                b.accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _wrap(a.data @ b.data, (a, b), backward)


def affine(x, W, b) -> Tensor:
    """``x @ W + b`` with W laid out (in, out)."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if x.shape[-1] != W.shape[0] or W.shape[1:] != b.shape:
        raise ShapeError(f"affine: x {x.shape}, W {W.shape}, b {b.shape}")

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        if x.requires_grad:
            x.accumulate((g2 @ W.data.T).reshape(x.shape))
        if W.requires_grad:
            W.accumulate(x.data.reshape(-1, x.shape[-1]).T @ g2)
        if b.requires_grad:
            b.accumulate(g2.sum(axis=0))

    return _wrap(x.data @ W.data + b.data, (x, W, b), backward)


def sum(x, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    x = as_tensor(x)

    def backward(g):
        if axis is None:
            x.accumulate(np.broadcast_to(g, x.shape))
        else:
            x.accumulate(np.broadcast_to(np.expand_dims(g, axis), x.shape))

    return _wrap(x.data.sum(axis=axis), (x,), backward)


def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    ax = axis % xs[0].data.ndim
    for x in xs[1:]:
        if x.data.ndim != xs[0].data.ndim or any(
                s != t for i, (s, t) in enumerate(zip(x.shape, xs[0].shape)) if i != ax):
            raise ShapeError(f"concat: incompatible shapes {[t.shape for t in xs]}")
    bounds = np.cumsum([0] + [x.shape[ax] for x in xs])

    def backward(g):
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            if x.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[ax] = slice(lo, hi)
                x.accumulate(g[tuple(sl)])

    return _wrap(np.concatenate([x.data for x in xs], axis=ax), xs, backward)


def stack(xs, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    if len({x.shape for x in xs}) != 1:
        raise ShapeError(f"stack: shapes differ {[t.shape for t in xs]}")

    def backward(g):
        for i, x in enumerate(xs):
            if x.requires_grad:
                x.accumulate(np.take(g, i, axis=axis))

    return _wrap(np.stack([x.data for x in xs], axis=axis), xs, backward)


def getitem(x, key) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        x.accumulate(full)

    return _wrap(x.data[key], (x,), backward)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape

    def backward(g):
        x.accumulate(g.reshape(old))

    return _wrap(x.data.reshape(shape), (x,), backward)


def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        x.accumulate(_unbroadcast(g, x.shape))

    return _wrap(np.broadcast_to(x.data, shape).copy(), (x,), backward)


# -- elementwise nonlinearities ----------------------------------------------

def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)

    def backward(g):
        x.accumulate(g * y * (1.0 - y))

    return _wrap(y, (x,), backward)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)

    def backward(g):
        x.accumulate(g * (1.0 - y * y))

    return _wrap(y, (x,), backward)


def elu(x, alpha: float = 1.0) -> Tensor:
    x = as_tensor(x)
    neg = x.data < 0
    y = np.where(neg, alpha * np.expm1(np.minimum(x.data, 0.0)), x.data)

    def backward(g):
        x.accumulate(g * np.where(neg, y + alpha, 1.0))

    return _wrap(y, (x,), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0

    def backward(g):
        x.accumulate(g * pos)

    return _wrap(x.data * pos, (x,), backward)


def softmax_array(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    y = softmax_array(x.data, axis)

    def backward(g):
        x.accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _wrap(y, (x,), backward)


def dropout(x, p: float, train: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when ``train`` is false or ``p`` is 0."""
    x = as_tensor(x)
    if not train or p <= 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)

    def backward(g):
        x.accumulate(g * keep)

    return _wrap(x.data * keep, (x,), backward)


def embedding_lookup(table, index) -> Tensor:
    table = as_tensor(table)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise IndexError(f"embedding index out of range for table of {table.shape[0]} rows")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, index.reshape(-1), g.reshape(-1, table.shape[1]))
        table.accumulate(full)

    return _wrap(table.data[index], (table,), backward)


# -- losses -------------------------------------------------------------------

def softmax_cross_entropy(logits, gold, mask=None, candidates=None) -> Tensor:
    """Summed ``-log softmax(logits)[gold]`` over positions where ``mask`` holds.

    ``logits`` has shape (..., K) and ``gold`` the leading shape. A boolean
    ``candidates`` array of shape (..., K) restricts the softmax support.
    """
    logits = as_tensor(logits)
    gold = np.asarray(gold, dtype=np.int64)
    K = logits.shape[-1]
    if gold.shape != logits.shape[:-1]:
        raise ShapeError(f"gold shape {gold.shape} does not match logits {logits.shape}")
    mask = np.ones(gold.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if np.any((gold[mask] < 0) | (gold[mask] >= K)):
        raise IndexError("gold index out of range")
    z = logits.data
    if candidates is not None:
        candidates = np.asarray(candidates, dtype=bool)
        if not np.all(np.take_along_axis(candidates, gold[..., None], -1)[..., 0][mask]):
            raise ValueError("gold index excluded by candidate mask")
        z = np.where(candidates, z, -np.inf)
    z = np.where(mask[..., None], z, 0.0)
    z = z - np.max(z, axis=-1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - logsum
    picked = np.take_along_axis(logp, np.where(mask, gold, 0)[..., None], -1)[..., 0]
    loss = -np.sum(picked[mask])

    def backward(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, np.where(mask, gold, 0)[..., None], 1.0, -1)
        logits.accumulate(g * (p - onehot) * mask[..., None])

    return _wrap(np.asarray(loss), (logits,), backward)
