"""Finite-difference verification of tape gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .params import ParameterStore
from .tensor import Tape, Tensor


@dataclass
class GradCheckReport:
    tol: float
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> dict[str, float]:
        return {n: e for n, e in self.errors.items() if not e <= self.tol}

    @property
    def ok(self) -> bool:
        return not self.failed

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)


class NonFiniteError(FloatingPointError):
    pass


def _eval(fn: Callable[[], Tensor]) -> float:
    val = float(np.asarray(fn().data).reshape(()))
    if not np.isfinite(val):
        raise NonFiniteError("function returned a non-finite value")
    return val


def grad_check(fn: Callable[[], Tensor], store: ParameterStore, h: float = 1e-5, tol: float = 1e-4,
               names: Optional[list[str]] = None, max_entries: Optional[int] = 24,
               rng: Optional[np.random.Generator] = None) -> GradCheckReport:
    """Compare tape gradients of the scalar ``fn()`` with central differences.

    The error for a parameter tensor is max |analytic - numeric| over the
    probed entries, divided by the largest gradient magnitude in that
    tensor (floored at 1e-8). With ``max_entries`` set, the probed entries
    are the largest-gradient half plus a random half.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    names = store.trainable() if names is None else names
    store.zero_grad()
    with Tape() as tape:
        out = fn()
    if not np.isfinite(out.data).all():
        raise NonFiniteError("function returned a non-finite value")
    tape.backward(out)
    analytic = {n: (store[n].grad.copy() if store[n].grad is not None else np.zeros(store[n].shape))
                for n in names}
    store.zero_grad()
    report = GradCheckReport(tol=tol)
    for n in names:
        p = store[n]
        flat = p.data.reshape(-1)
        a = analytic[n].reshape(-1)
        size = flat.size
        if max_entries is None or size <= max_entries:
            idx = np.arange(size)
        else:
            top = np.argsort(-np.abs(a), kind="stable")[: max_entries // 2]
            rest = rng.choice(size, size=max_entries - top.size, replace=False)
            idx = np.unique(np.concatenate([top, rest]))
        num = np.empty(idx.size)
        for k, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + h
            fp = _eval(fn)
            flat[i] = old - h
            fm = _eval(fn)
            flat[i] = old
            num[k] = (fp - fm) / (2.0 * h)
        scale = max(np.max(np.abs(a)), np.max(np.abs(num)), 1e-8)
        report.errors[n] = float(np.max(np.abs(a[idx] - num)) / scale)
    return report
