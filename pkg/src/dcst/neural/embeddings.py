"""Pre-trained word-vector files: one ``token v1 ... vD`` entry per line."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from .vocab import Vocab

log = logging.getLogger(__name__)


class EmbeddingFileError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def load_pretrained_embeddings(path, dim: int) -> tuple[np.ndarray, Vocab]:
    """Return (table, vocab); rows 0/1 are PAD/UNK and stay zero."""
    words, rows = [], []
    seen = set()
    with open(Path(path), encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            if len(parts) - 1 != dim:
                raise EmbeddingFileError(f"expected {dim} values, got {len(parts) - 1}", lineno)
            try:
                vec = [float(x) for x in parts[1:]]
            except ValueError:
                raise EmbeddingFileError("non-numeric value", lineno) from None
            if parts[0] in seen:
                continue
            seen.add(parts[0])
            words.append(parts[0])
            rows.append(vec)
    vocab = Vocab(words, lowercase_fallback=True)
    table = np.zeros((len(vocab), dim))
    if rows:
        table[len(vocab) - len(rows):] = np.array(rows)
    return table, vocab


def pretrained_or_none(path, dim: int) -> Optional[tuple[np.ndarray, Vocab]]:
    """Like :func:`load_pretrained_embeddings`, but an empty or missing path gives None.

    Callers then fall back to a randomly initialised, trainable word table.
    """
    if not path:
        return None
    if not Path(path).exists():
        log.warning("embedding file %s not found; using random trainable word embeddings", path)
        return None
    return load_pretrained_embeddings(path, dim)
