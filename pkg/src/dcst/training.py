"""Mini-batch Adam training with dev-based early stopping."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .config import ParserConfig
from .neural.params import ParameterStore, adam_update, clip_grad_norm
from .neural.tensor import Tape, Tensor

log = logging.getLogger(__name__)


class NumericError(FloatingPointError):
    """Raised when a training loss becomes non-finite."""


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    dev_score: Optional[float]
    seconds: float


def train_loop(store: ParameterStore,
               batch_loss: Callable[[Sequence, np.random.Generator], tuple[Tensor, int]],
               evaluate: Optional[Callable[[Sequence], float]],
               items: Sequence, dev_items: Sequence, cfg: ParserConfig, rng: np.random.Generator,
               epochs: Optional[int] = None, name: str = "model") -> list[EpochRecord]:
    """Train in place; on return ``store`` holds the best-dev parameters.

    With an empty dev set there is no early stopping and the final
    parameters are kept.
    """
    if not items:
        raise ValueError(f"{name}: empty training set")
    epochs = cfg.epochs if epochs is None else epochs
    history: list[EpochRecord] = []
    best, best_snap, bad = -np.inf, None, 0
    use_dev = evaluate is not None and len(dev_items) > 0
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(items))
        total, count = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [items[i] for i in order[start:start + cfg.batch_size]]
            store.zero_grad()
            with Tape() as tape:
                loss, n = batch_loss(batch, rng)
                if not np.isfinite(loss.data):
                    raise NumericError(f"{name}: non-finite loss at epoch {epoch}")
                scaled = loss * (1.0 / max(n, 1))
            tape.backward(scaled)
            grads = store.grads()
            with np.errstate(over="ignore", invalid="ignore"):
                norm = clip_grad_norm(grads, cfg.clip)
            if not np.isfinite(norm):
                raise NumericError(f"{name}: non-finite gradient at epoch {epoch}")
            adam_update(store, grads, cfg.lr, cfg.beta1, cfg.beta2)
            total += float(loss.data)
            count += n
        store.zero_grad()
        bad_param = next((k for k, v in store.items() if not np.all(np.isfinite(v.data))), None)
        if bad_param is not None:
            raise NumericError(f"{name}: parameter {bad_param} became non-finite at epoch {epoch}")
        score = evaluate(dev_items) if use_dev else None
        rec = EpochRecord(epoch, total / max(count, 1), score, time.perf_counter() - t0)
        history.append(rec)
        log.info("%s epoch %d loss %.4f dev %s (%.1fs)", name, epoch, rec.loss,
                 "-" if score is None else f"{score:.4f}", rec.seconds)
        if use_dev:
            if score > best:
                best, best_snap, bad = score, store.snapshot(), 0
            else:
                bad += 1
                if bad >= cfg.patience:
                    break
    if best_snap is not None:
        store.restore(best_snap)
    return history
