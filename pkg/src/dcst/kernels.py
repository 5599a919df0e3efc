"""Hot inner loops: LSTM recurrences and Chu-Liu/Edmonds.

Chu-Liu/Edmonds is written once in numba-compatible numpy. The LSTM
has two forms: vectorised numpy (``*_py``) and fused scalar loops
(``*_loops``) that only pay off once compiled. When numba is importable
and ``DCST_NO_NUMBA`` is unset (or "0"), MST decoding and the LSTM
backward pass run compiled. The LSTM forward always uses numpy, since
its ufuncs beat compiled scalar loops; ``lstm_forward_compiled`` is kept
for ``benchmarks/bench_kernels.py``.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("DCST_NO_NUMBA", "0") not in ("", "0", "false", "False")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit
    USE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag
    USE_NUMBA = False


def _maybe_jit(fn):
    if USE_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn


def _sigmoid_py(x):
    return 1.0 / (1.0 + np.exp(-x))


_sigmoid = _maybe_jit(_sigmoid_py)


def lstm_forward_py(xw, wh):
    """Run one LSTM direction over time-major pre-activations.

    xw: (T, B, 4H) input projections plus bias, gate order i, f, g, o.
    wh: (H, 4H) recurrent weights.
    Returns hidden states (T, B, H), cell states (T, B, H) and the
    activated gates (T, B, 4H) kept for the backward pass.
    """
    T, B, G = xw.shape
    H = G // 4
    hs = np.zeros((T, B, H))
    cs = np.zeros((T, B, H))
    acts = np.zeros((T, B, G))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        z = xw[t] + np.dot(h, wh)
        ig = _sigmoid(z[:, 0:H])
        fg = _sigmoid(z[:, H:2 * H])
        gg = np.tanh(z[:, 2 * H:3 * H])
        og = _sigmoid(z[:, 3 * H:4 * H])
        c = fg * c + ig * gg
        h = og * np.tanh(c)
        acts[t, :, 0:H] = ig
        acts[t, :, H:2 * H] = fg
        acts[t, :, 2 * H:3 * H] = gg
        acts[t, :, 3 * H:4 * H] = og
        hs[t] = h
        cs[t] = c
    return hs, cs, acts


def lstm_backward_py(dhs, hs, cs, acts, wh):
    """Backpropagate through :func:`lstm_forward_py`.

    Returns gradients w.r.t. the pre-activations xw (T, B, 4H) and wh.
    """
    T, B, H = dhs.shape
    G = 4 * H
    dxw = np.zeros((T, B, G))
    dwh = np.zeros((H, G))
    wht = np.ascontiguousarray(wh.T)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dz = np.zeros((B, G))
    zeros = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        ig = acts[t, :, 0:H]
        fg = acts[t, :, H:2 * H]
        gg = acts[t, :, 2 * H:3 * H]
        og = acts[t, :, 3 * H:4 * H]
        c = cs[t]
        if t > 0:
            c_prev = cs[t - 1]
            h_prev = hs[t - 1]
        else:
            c_prev = zeros
            h_prev = zeros
        tc = np.tanh(c)
        dh = dhs[t] + dh_next
        dc = dh * og * (1.0 - tc * tc) + dc_next
        dz[:, 0:H] = dc * gg * ig * (1.0 - ig)
        dz[:, H:2 * H] = dc * c_prev * fg * (1.0 - fg)
        dz[:, 2 * H:3 * H] = dc * ig * (1.0 - gg * gg)
        dz[:, 3 * H:4 * H] = dh * tc * og * (1.0 - og)
        dc_next = dc * fg
        dxw[t] = dz
        dwh += np.dot(np.ascontiguousarray(h_prev.T), dz)
        dh_next = np.dot(dz, wht)
    return dxw, dwh


def chu_liu_edmonds_py(scores):
    """Maximum spanning arborescence rooted at node 0.

    scores: (n, n) with scores[d, h] the weight of arc h -> d; -inf marks
    a forbidden arc. Row 0 is ignored. Returns heads (n,), heads[0] = -1.
    Iterative contraction with an explicit record of each contraction so
    the expansion step can be replayed in reverse.
    """
    n = scores.shape[0]
    S = scores.copy()
    for v in range(n):
        S[v, v] = -np.inf
    od = np.empty((n, n), dtype=np.int64)
    oh = np.empty((n, n), dtype=np.int64)
    for d in range(n):
        for h in range(n):
            od[d, h] = d
            oh[d, h] = h
    alive = np.ones(n, dtype=np.bool_)
    rep = np.arange(n)
    best = np.full(n, -1, dtype=np.int64)
    cyc_rep = np.zeros(n, dtype=np.int64)
    in_cycle = np.zeros((n, n), dtype=np.bool_)
    cyc_in_h = np.zeros((n, n), dtype=np.int64)
    cyc_in_d = np.zeros((n, n), dtype=np.int64)
    member_of = np.zeros((n, n), dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    nk = 0
    while True:
        for v in range(1, n):
            if not alive[v]:
                continue
            bu = -1
            bs = -np.inf
            for u in range(n):
                if alive[u] and u != v and (bu == -1 or S[v, u] > bs):
                    bu = u
                    bs = S[v, u]
            best[v] = bu
        # find a cycle among best in-edges
        mark[:] = 0
        cyc_start = -1
        for s in range(1, n):
            if not alive[s] or mark[s] != 0:
                continue
            v = s
            while v != 0 and alive[v] and mark[v] == 0:
                mark[v] = s
                v = best[v]
            if v != 0 and mark[v] == s:
                cyc_start = v
                break
        if cyc_start == -1:
            break
        k = nk
        nk += 1
        c = cyc_start
        cyc_rep[k] = c
        v = cyc_start
        while True:
            in_cycle[k, v] = True
            cyc_in_h[k, v] = oh[v, best[v]]
            cyc_in_d[k, v] = od[v, best[v]]
            v = best[v]
            if v == cyc_start:
                break
        for x in range(n):
            member_of[k, x] = rep[x]
        # arcs entering the cycle
        for u in range(n):
            if not alive[u] or in_cycle[k, u]:
                continue
            bv = -1
            bval = -np.inf
            for v in range(n):
                if in_cycle[k, v]:
                    val = S[v, u] - S[v, best[v]]
                    if bv == -1 or val > bval:
                        bv = v
                        bval = val
            src_h = oh[bv, u]
            src_d = od[bv, u]
            S[c, u] = bval
            oh[c, u] = src_h
            od[c, u] = src_d
        # arcs leaving the cycle
        for w in range(1, n):
            if not alive[w] or in_cycle[k, w]:
                continue
            bv = -1
            bval = -np.inf
            for v in range(n):
                if in_cycle[k, v] and (bv == -1 or S[w, v] > bval):
                    bv = v
                    bval = S[w, v]
            src_h = oh[w, bv]
            src_d = od[w, bv]
            S[w, c] = bval
            oh[w, c] = src_h
            od[w, c] = src_d
        for v in range(n):
            if in_cycle[k, v] and v != c:
                alive[v] = False
        S[c, c] = -np.inf
        for x in range(n):
            if in_cycle[k, rep[x]]:
                rep[x] = c
    sel_h = np.full(n, -1, dtype=np.int64)
    sel_d = np.full(n, -1, dtype=np.int64)
    for v in range(1, n):
        if alive[v]:
            sel_h[v] = oh[v, best[v]]
            sel_d[v] = od[v, best[v]]
    for k in range(nk - 1, -1, -1):
        c = cyc_rep[k]
        eh = sel_h[c]
        ed = sel_d[c]
        for v in range(n):
            if in_cycle[k, v]:
                sel_h[v] = cyc_in_h[k, v]
                sel_d[v] = cyc_in_d[k, v]
        vs = member_of[k, ed]
        sel_h[vs] = eh
        sel_d[vs] = ed
    heads = np.full(n, -1, dtype=np.int64)
    for v in range(1, n):
        heads[sel_d[v]] = sel_h[v]
    return heads


def _tree_score(scores, heads):
    total = 0.0
    for d in range(1, heads.shape[0]):
        total += scores[d, heads[d]]
    return total


def mst_single_root_py(scores):
    """Best arborescence with exactly one child of ROOT.

    Runs unconstrained Chu-Liu/Edmonds first; if that tree already has a
    single root child it is optimal, otherwise each root child is tried.
    """
    n = scores.shape[0]
    heads = chu_liu_edmonds(scores)
    n_root = 0
    for d in range(1, n):
        if heads[d] == 0:
            n_root += 1
    if n_root <= 1:
        return heads
    best_heads = heads
    best_total = -np.inf
    for r in range(1, n):
        if not np.isfinite(scores[r, 0]):
            continue
        s2 = scores.copy()
        for d in range(1, n):
            if d != r:
                s2[d, 0] = -np.inf
        cand = chu_liu_edmonds(s2)
        total = _tree_score(scores, cand)
        if total > best_total:
            best_total = total
            best_heads = cand
    return best_heads




def lstm_forward_loops(xw, wh):
    """Same contract as :func:`lstm_forward_py`; gate maths fused into scalar loops for numba."""
    T, B, G = xw.shape
    H = G // 4
    hs = np.zeros((T, B, H))
    cs = np.zeros((T, B, H))
    acts = np.zeros((T, B, G))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        z = np.dot(h, wh)
        for b in range(B):
            for k in range(H):
                ig = 1.0 / (1.0 + np.exp(-(xw[t, b, k] + z[b, k])))
                fg = 1.0 / (1.0 + np.exp(-(xw[t, b, H + k] + z[b, H + k])))
                gg = np.tanh(xw[t, b, 2 * H + k] + z[b, 2 * H + k])
                og = 1.0 / (1.0 + np.exp(-(xw[t, b, 3 * H + k] + z[b, 3 * H + k])))
                ck = fg * c[b, k] + ig * gg
                c[b, k] = ck
                h[b, k] = og * np.tanh(ck)
                acts[t, b, k] = ig
                acts[t, b, H + k] = fg
                acts[t, b, 2 * H + k] = gg
                acts[t, b, 3 * H + k] = og
                hs[t, b, k] = h[b, k]
                cs[t, b, k] = ck
    return hs, cs, acts


def lstm_backward_loops(dhs, hs, cs, acts, wh):
    T, B, H = dhs.shape
    G = 4 * H
    dxw = np.zeros((T, B, G))
    dwh = np.zeros((H, G))
    wht = np.ascontiguousarray(wh.T)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dz = np.zeros((B, G))
    for t in range(T - 1, -1, -1):
        for b in range(B):
            for k in range(H):
                ig = acts[t, b, k]
                fg = acts[t, b, H + k]
                gg = acts[t, b, 2 * H + k]
                og = acts[t, b, 3 * H + k]
                c_prev = cs[t - 1, b, k] if t > 0 else 0.0
                tc = np.tanh(cs[t, b, k])
                dh = dhs[t, b, k] + dh_next[b, k]
                dc = dh * og * (1.0 - tc * tc) + dc_next[b, k]
                dz[b, k] = dc * gg * ig * (1.0 - ig)
                dz[b, H + k] = dc * c_prev * fg * (1.0 - fg)
                dz[b, 2 * H + k] = dc * ig * (1.0 - gg * gg)
                dz[b, 3 * H + k] = dh * tc * og * (1.0 - og)
                dc_next[b, k] = dc * fg
        dxw[t] = dz
        if t > 0:
            dwh += np.dot(np.ascontiguousarray(hs[t - 1].T), dz)
        dh_next = np.dot(dz, wht)
    return dxw, dwh


# The compiled forward loop is slower than vectorised numpy (scalar exp/tanh
# against SIMD ufuncs), so the forward pass stays on numpy either way; it is
# still compiled for the benchmark and the equivalence tests.
lstm_forward_compiled = _maybe_jit(lstm_forward_loops)
lstm_forward = lstm_forward_py
lstm_backward = _maybe_jit(lstm_backward_loops) if USE_NUMBA else lstm_backward_py
chu_liu_edmonds = _maybe_jit(chu_liu_edmonds_py)
_tree_score = _maybe_jit(_tree_score)
mst_single_root = _maybe_jit(mst_single_root_py)
