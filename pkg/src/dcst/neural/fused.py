"""Fused differentiable ops with hand-written backward passes."""
from __future__ import annotations

import numpy as np

from .. import kernels
from .tensor import ShapeError, Tensor, _wrap, as_tensor


def reverse_index(lengths: np.ndarray, T: int) -> np.ndarray:
    """Per-row permutation reversing the first ``lengths[b]`` steps (an involution)."""
    t = np.arange(T)[None, :]
    L = np.asarray(lengths)[:, None]
    return np.where(t < L, L - 1 - t, t)


def lstm_direction(x, lengths, W_ih, W_hh, b, reverse: bool = False) -> Tensor:
    """One LSTM direction over a right-padded batch.

    x: (B, T, I); returns (B, T, H) with padded steps zeroed. Padding sits
    after the valid steps in both directions, so it never reaches a valid
    position.
    """
    x, W_ih, W_hh, b = (as_tensor(t) for t in (x, W_ih, W_hh, b))
    B, T, I = x.shape
    H = W_hh.shape[0]
    if W_ih.shape != (I, 4 * H) or W_hh.shape != (H, 4 * H) or b.shape != (4 * H,):
        raise ShapeError(f"lstm: x {x.shape}, W_ih {W_ih.shape}, W_hh {W_hh.shape}, b {b.shape}")
    if T == 0:
        raise ShapeError("lstm: empty sequence")
    lengths = np.asarray(lengths)
    valid = (np.arange(T)[None, :] < lengths[:, None])
    rows = np.arange(B)[:, None]
    perm = reverse_index(lengths, T) if reverse else None
    xin = x.data[rows, perm] if reverse else x.data
    xt = np.ascontiguousarray(xin.transpose(1, 0, 2))  # (T, B, I)
    xw = np.ascontiguousarray(xt @ W_ih.data + b.data)
    hs, cs, acts = kernels.lstm_forward(xw, np.ascontiguousarray(W_hh.data))
    out = hs.transpose(1, 0, 2)
    if reverse:
        out = out[rows, perm]
    out = out * valid[..., None]

    def backward(g):
        g = g * valid[..., None]
        if reverse:
            g = g[rows, perm]
        dhs = np.ascontiguousarray(g.transpose(1, 0, 2))
        dxw, dwh = kernels.lstm_backward(dhs, hs, cs, acts, np.ascontiguousarray(W_hh.data))
        dxw2 = dxw.reshape(-1, 4 * H)
        if W_hh.requires_grad:
            W_hh.accumulate(dwh)
        if b.requires_grad:
            b.accumulate(dxw2.sum(axis=0))
        if W_ih.requires_grad:
            W_ih.accumulate(xt.reshape(-1, I).T @ dxw2)
        if x.requires_grad:
            dx = (dxw @ W_ih.data.T).transpose(1, 0, 2)
            if reverse:
                dx = dx[rows, perm]
            x.accumulate(dx)

    return _wrap(np.ascontiguousarray(out), (x, W_ih, W_hh, b), backward)


def char_cnn(char_emb, char_mask, W, b) -> Tensor:
    """Width-3 convolution with zero padding, max-pool over positions, ReLU.

    char_emb: (N, L, dc); char_mask: (N, L) bool with at least one true
    entry per row; W: (3*dc, F); b: (F,). Returns (N, F).
    """
    char_emb, W, b = as_tensor(char_emb), as_tensor(W), as_tensor(b)
    N, L, dc = char_emb.shape
    if W.shape[0] != 3 * dc or b.shape != (W.shape[1],):
        raise ShapeError(f"char_cnn: emb {char_emb.shape}, W {W.shape}, b {b.shape}")
    cm = np.asarray(char_mask, dtype=bool)
    xe = char_emb.data * cm[..., None]
    pad = np.zeros((N, L + 2, dc))
    pad[:, 1:L + 1] = xe
    win = np.concatenate([pad[:, 0:L], pad[:, 1:L + 1], pad[:, 2:L + 2]], axis=-1)  # (N, L, 3dc)
    conv = win @ W.data + b.data
    conv = np.where(cm[..., None], conv, -np.inf)
    arg = conv.argmax(axis=1)  # (N, F)
    mx = np.take_along_axis(conv, arg[:, None, :], 1)[:, 0, :]
    out = np.maximum(mx, 0.0)

    def backward(g):
        gm = g * (mx > 0)
        dconv = np.zeros((N, L, W.shape[1]))
        np.put_along_axis(dconv, arg[:, None, :], gm[:, None, :], 1)
        if b.requires_grad:
            b.accumulate(gm.sum(axis=0))
        if W.requires_grad:
            W.accumulate(win.reshape(-1, 3 * dc).T @ dconv.reshape(-1, W.shape[1]))
        if char_emb.requires_grad:
            dwin = dconv @ W.data.T
            dpad = np.zeros((N, L + 2, dc))
            dpad[:, 0:L] += dwin[..., 0:dc]
            dpad[:, 1:L + 1] += dwin[..., dc:2 * dc]
            dpad[:, 2:L + 2] += dwin[..., 2 * dc:]
            char_emb.accumulate(dpad[:, 1:L + 1] * cm[..., None])

    return _wrap(out, (char_emb, W, b), backward)


def arc_biaffine(r_dep, r_head, U, w) -> Tensor:
    """s[b, i, j] = r_dep[b,i] U r_head[b,j] + w . r_head[b,j].

    r_dep: (B, m, a); r_head: (B, n, a); returns (B, m, n).
    """
    r_dep, r_head, U, w = (as_tensor(t) for t in (r_dep, r_head, U, w))
    a = r_dep.shape[-1]
    if r_head.shape[-1] != a or U.shape != (a, a) or w.shape != (a,):
        raise ShapeError(f"arc_biaffine: {r_dep.shape}, {r_head.shape}, U {U.shape}, w {w.shape}")
    rdU = r_dep.data @ U.data  # (B, m, a)
    bias = r_head.data @ w.data  # (B, n)
    s = rdU @ np.swapaxes(r_head.data, 1, 2) + bias[:, None, :]

    def backward(g):
        if r_dep.requires_grad:
            r_dep.accumulate(g @ r_head.data @ U.data.T)
        if r_head.requires_grad:
            r_head.accumulate(np.swapaxes(g, 1, 2) @ rdU + g.sum(axis=1)[..., None] * w.data)
        if U.requires_grad:
            gh = g @ r_head.data  # (B, m, a)
            U.accumulate(r_dep.data.reshape(-1, a).T @ gh.reshape(-1, a))
        if w.requires_grad:
            w.accumulate(np.einsum("bn,bna->a", g.sum(axis=1), r_head.data))

    return _wrap(s, (r_dep, r_head, U, w), backward)


def label_biaffine(q_dep, q_head, U, W, b) -> Tensor:
    """l[b, i, k] = q_dep U_k q_head + W_k . [q_dep; q_head] + b_k.

    q_dep, q_head: (B, m, d) aligned per dependent; U: (K, d, d);
    W: (K, 2d); b: (K,). Returns (B, m, K).
    """
    q_dep, q_head, U, W, b = (as_tensor(t) for t in (q_dep, q_head, U, W, b))
    d = q_dep.shape[-1]
    K = U.shape[0]
    if q_head.shape != q_dep.shape or U.shape != (K, d, d) or W.shape != (K, 2 * d) or b.shape != (K,):
        raise ShapeError(f"label_biaffine: {q_dep.shape}, {q_head.shape}, U {U.shape}, W {W.shape}")
    qi, qj = q_dep.data, q_head.data
    tmp = np.einsum("bmi,kij->bmkj", qi, U.data, optimize=True)
    out = (np.einsum("bmkj,bmj->bmk", tmp, qj, optimize=True)
           + qi @ W.data[:, :d].T + qj @ W.data[:, d:].T + b.data)

    def backward(g):
        if q_dep.requires_grad:
            q_dep.accumulate(np.einsum("bmk,kij,bmj->bmi", g, U.data, qj, optimize=True) + g @ W.data[:, :d])
        if q_head.requires_grad:
            q_head.accumulate(np.einsum("bmk,bmkj->bmj", g, tmp, optimize=True) + g @ W.data[:, d:])
        if U.requires_grad:
            U.accumulate(np.einsum("bmk,bmi,bmj->kij", g, qi, qj, optimize=True))
        if W.requires_grad:
            g2 = g.reshape(-1, K)
            W.accumulate(np.concatenate([g2.T @ qi.reshape(-1, d), g2.T @ qj.reshape(-1, d)], axis=1))
        if b.requires_grad:
            b.accumulate(g.reshape(-1, K).sum(axis=0))

    return _wrap(out, (q_dep, q_head, U, W, b), backward)


def gather_heads(q, heads) -> Tensor:
    """out[b, i] = q[b, heads[b, i]]; q: (B, n, d), heads: (B, m) ints."""
    q = as_tensor(q)
    heads = np.asarray(heads, dtype=np.int64)
    rows = np.arange(q.shape[0])[:, None]

    def backward(g):
        full = np.zeros_like(q.data)
        np.add.at(full, (np.broadcast_to(rows, heads.shape), heads), g)
        q.accumulate(full)

    return _wrap(q.data[rows, heads], (q,), backward)
