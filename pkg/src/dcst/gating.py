"""Element-wise gated fusion of the parser encoder with tagger encoders."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .neural import tensor as T
from .neural.params import ParameterStore, glorot
from .neural.tensor import ShapeError, Tensor


def init_gate_params(store: ParameterStore, prefix: str, d: int, n: int, rng) -> None:
    """Sigmoid gate for n == 1, softmax gate with one projection per stream otherwise.

    Weights are laid out (in, out): W_g is ((n+1)*d, d).
    """
    if n < 1:
        raise ValueError("gating needs at least one tagger encoder")
    if n == 1:
        store.add(prefix + ".W", glorot(rng, 2 * d, d))
        store.add(prefix + ".b", np.zeros(d))
    else:
        for i in range(n + 1):
            store.add(f"{prefix}.{i}.W", glorot(rng, (n + 1) * d, d))
            store.add(f"{prefix}.{i}.b", np.zeros(d))


def gate2(h_parser, h_tgr, W, b) -> Tensor:
    """a = sigmoid(W [h_p; h_t] + b); g = a * h_p + (1 - a) * h_t."""
    h_parser, h_tgr = T.as_tensor(h_parser), T.as_tensor(h_tgr)
    if h_parser.shape != h_tgr.shape:
        raise ShapeError(f"gate2: {h_parser.shape} vs {h_tgr.shape}")
    a = T.sigmoid(T.affine(T.concat([h_parser, h_tgr], axis=-1), W, b))
    return a * h_parser + (1.0 - a) * h_tgr


def gate_weights(h_parser, h_tgrs: Sequence, Ws: Sequence, bs: Sequence) -> Tensor:
    """Per-dimension softmax weights over the n+1 streams, stacked on axis 0."""
    streams = [T.as_tensor(h_parser)] + [T.as_tensor(h) for h in h_tgrs]
    if len(streams) < 2:
        raise ValueError("gate_n needs at least one tagger encoder")
    if len({s.shape for s in streams}) != 1:
        raise ShapeError(f"gate_n: stream shapes differ {[s.shape for s in streams]}")
    if len(Ws) != len(streams) or len(bs) != len(streams):
        raise ValueError("gate_n needs one (W, b) pair per stream")
    cat = T.concat(streams, axis=-1)
    scores = T.stack([T.affine(cat, W, b) for W, b in zip(Ws, bs)], axis=0)
    return T.softmax(scores, axis=0)


def gate_n(h_parser, h_tgrs: Sequence, Ws: Sequence, bs: Sequence) -> Tensor:
    a = gate_weights(h_parser, h_tgrs, Ws, bs)
    streams = T.stack([T.as_tensor(h_parser)] + [T.as_tensor(h) for h in h_tgrs], axis=0)
    return T.sum(a * streams, axis=0)


def apply_gate(store: ParameterStore, prefix: str, h_parser, h_tgrs: Sequence) -> Tensor:
    n = len(h_tgrs)
    if n == 1:
        return gate2(h_parser, h_tgrs[0], store[prefix + ".W"], store[prefix + ".b"])
    return gate_n(h_parser, h_tgrs, [store[f"{prefix}.{i}.W"] for i in range(n + 1)],
                  [store[f"{prefix}.{i}.b"] for i in range(n + 1)])
