"""Tree decoding from arc-score matrices."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from . import kernels
from .trees import validate_tree

BRUTE_FORCE_MAX_LEN = 7


def _square(arc_scores: np.ndarray) -> np.ndarray:
    """(m, m+1) dep-by-head scores -> (m+1, m+1) with a dead ROOT row."""
    s = np.asarray(arc_scores, dtype=np.float64)
    m = s.shape[0]
    if s.shape != (m, m + 1):
        raise ValueError(f"arc scores must have shape (m, m+1), got {s.shape}")
    full = np.full((m + 1, m + 1), -np.inf)
    full[1:, :] = s
    idx = np.arange(1, m + 1)
    full[idx, idx] = -np.inf
    return full


def decode_mst(arc_scores: np.ndarray) -> list[int]:
    """Maximum-score single-root arborescence; returns 1-based heads (0 = ROOT)."""
    full = _square(arc_scores)
    if not np.any(np.isfinite(full[1:, 0])):
        raise ValueError("no finite ROOT arc")
    heads = kernels.mst_single_root(full)
    return [int(h) for h in heads[1:]]


def tree_score(arc_scores: np.ndarray, heads) -> float:
    s = np.asarray(arc_scores)
    return float(sum(s[d, h] for d, h in enumerate(heads)))


@lru_cache(maxsize=None)
def single_root_trees(m: int) -> np.ndarray:
    """All single-root arborescences over m tokens, lexicographically ordered."""
    if not 1 <= m <= BRUTE_FORCE_MAX_LEN:
        raise ValueError(f"brute force supports 1 <= m <= {BRUTE_FORCE_MAX_LEN}, got {m}")
    rows = [hs for hs in itertools.product(range(m + 1), repeat=m)
            if hs.count(0) == 1 and validate_tree(hs).ok]
    return np.array(rows, dtype=np.int64).reshape(-1, m)


def brute_force_best_tree(arc_scores: np.ndarray) -> list[int]:
    s = np.asarray(arc_scores, dtype=np.float64)
    m = s.shape[0]
    trees = single_root_trees(m)
    totals = s[np.arange(m)[None, :], trees].sum(axis=1)
    return [int(h) for h in trees[int(np.argmax(totals))]]
