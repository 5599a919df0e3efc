"""Named parameter collections, initialisers, seeded RNG substreams and Adam."""
from __future__ import annotations

import zlib
from typing import Iterable, Iterator, Optional

import numpy as np

from .tensor import ShapeError, Tensor


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator per (seed, component name)."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])


class ParameterStore:
    """Ordered ``name -> Tensor`` map plus Adam state.

    Names listed in ``frozen`` get no gradient and are skipped by Adam,
    but stay in the store (and thus in archives).
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.frozen: set[str] = set()
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in self._params if n.startswith(prefix)]

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        value = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise ValueError(f"parameter {name!r} has non-finite entries")
        t = Tensor(value.copy(), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def set(self, name: str, value: np.ndarray) -> None:
        t = self._params[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != t.shape:
            raise ShapeError(f"{name}: shape {value.shape} != {t.shape}")
        t.data = value.copy()

    def freeze(self, names: Iterable[str]) -> None:
        for n in names:
            self.frozen.add(n)
            self._params[n].requires_grad = False

    def unfreeze(self, names: Iterable[str]) -> None:
        for n in names:
            self.frozen.discard(n)
            self._params[n].requires_grad = True

    def trainable(self) -> list[str]:
        return [n for n in self._params if n not in self.frozen]

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {n: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for n, t in self._params.items() if n not in self.frozen}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for n, arr in snap.items():
            self.set(n, arr)

    def copy_from(self, other: "ParameterStore", src_prefix: str, dst_prefix: str) -> None:
        for n in other.names(src_prefix):
            self.set(dst_prefix + n[len(src_prefix):], other[n].data)


# -- initialisers ---------------------------------------------------------------

def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


def normal_embedding(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return rng.normal(0.0, 1.0 / np.sqrt(dim), size=(n, dim))


def lstm_init(rng: np.random.Generator, input_dim: int, hidden: int):
    k = np.sqrt(1.0 / hidden)
    W_ih = rng.uniform(-k, k, size=(input_dim, 4 * hidden))
    W_hh = rng.uniform(-k, k, size=(hidden, 4 * hidden))
    b = rng.uniform(-k, k, size=4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget gate
    return W_ih, W_hh, b


# -- optimiser -------------------------------------------------------------------

def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: Optional[float]) -> float:
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm is not None and max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


def adam_update(store: ParameterStore, grads: dict[str, np.ndarray], lr: float,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> ParameterStore:
    """One bias-corrected Adam step over ``grads`` (frozen names are ignored)."""
    for n, g in grads.items():
        if store[n].shape != np.shape(g):
            raise ShapeError(f"gradient for {n!r} has shape {np.shape(g)}, parameter {store[n].shape}")
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for n, g in grads.items():
        if n in store.frozen:
            continue
        if n not in store.m:
            store.m[n] = np.zeros_like(g)
            store.v[n] = np.zeros_like(g)
        m = store.m[n]
        v = store.v[n]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p = store[n]
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return store
