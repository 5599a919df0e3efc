"""Attachment scores, tree-structure error metrics, regression and significance."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .trees import DepTree, _depths

ROOT_POS = "<ROOT>"


class AlignmentError(ValueError):
    pass


class DegenerateError(ValueError):
    pass


def _heads(t) -> tuple[int, ...]:
    return tuple(t.heads) if isinstance(t, DepTree) else tuple(t)


def _labels(t) -> Optional[tuple]:
    return t.labels if isinstance(t, DepTree) else None


def _check(gold: Sequence, pred: Sequence):
    if len(gold) != len(pred):
        raise AlignmentError(f"{len(gold)} gold vs {len(pred)} predicted sentences")
    for k, (g, p) in enumerate(zip(gold, pred)):
        if len(_heads(g)) != len(_heads(p)):
            raise AlignmentError(f"sentence {k}: lengths {len(_heads(g))} vs {len(_heads(p))}")
    if sum(len(_heads(g)) for g in gold) == 0:
        raise AlignmentError("no tokens to evaluate")


def sentence_attachment(gold, pred) -> tuple[int, int, int]:
    """(tokens, correct heads, correct heads and labels)."""
    gh, ph = _heads(gold), _heads(pred)
    gl, pl = _labels(gold), _labels(pred)
    uh = sum(1 for a, b in zip(gh, ph) if a == b)
    if gl is None or pl is None:
        lh = 0
    else:
        lh = sum(1 for a, b, c, d in zip(gh, ph, gl, pl) if a == b and c == d)
    return len(gh), uh, lh


def uas_las(gold: Sequence, pred: Sequence) -> tuple[float, float]:
    """Micro-averaged unlabeled and labeled attachment scores."""
    _check(gold, pred)
    n = u = l = 0
    for g, p in zip(gold, pred):
        a, b, c = sentence_attachment(g, p)
        n += a
        u += b
        l += c
    return u / n, l / n


def _children(heads: Sequence[int]) -> list[int]:
    counts = [0] * (len(heads) + 1)
    for h in heads:
        counts[h] += 1
    return counts[1:]


def _mean_of(per_token: list[list[float]]) -> float:
    flat = [x for s in per_token for x in s]
    return float(np.mean(flat)) if flat else 0.0


def ad_nc_tokens(gold, pred) -> list[float]:
    return [abs(a - b) for a, b in zip(_children(_heads(gold)), _children(_heads(pred)))]


def ad_dr_tokens(gold, pred) -> list[float]:
    return [abs(a - b) for a, b in zip(_depths(_heads(gold)), _depths(_heads(pred)))]


def signed_head_distance(dep: int, head: int, variant: str = "intervening") -> int:
    """Signed head distance; negative when the dependent is right of its head.

    ``intervening`` counts the words strictly between the two; ``offset``
    is the raw position difference.
    """
    gap = abs(head - dep)
    mag = gap - 1 if variant == "intervening" else gap
    if variant not in ("intervening", "offset"):
        raise ValueError(f"unknown AD-PDH variant {variant!r}")
    return -mag if dep > head else mag


def ad_pdh_tokens(gold, pred, variant: str = "intervening") -> list[float]:
    out = []
    for i, (g, p) in enumerate(zip(_heads(gold), _heads(pred)), start=1):
        if g == 0 or p == 0:
            continue
        out.append(abs(signed_head_distance(i, g, variant) - signed_head_distance(i, p, variant)))
    return out


def pos_head_error_tokens(gold, pred, pos: Sequence[str]) -> list[float]:
    def head_pos(h):
        return ROOT_POS if h == 0 else pos[h - 1]

    return [float(head_pos(g) != head_pos(p)) for g, p in zip(_heads(gold), _heads(pred))]


def ad_nc(gold: Sequence, pred: Sequence) -> float:
    _check(gold, pred)
    return _mean_of([ad_nc_tokens(g, p) for g, p in zip(gold, pred)])


def ad_dr(gold: Sequence, pred: Sequence) -> float:
    _check(gold, pred)
    return _mean_of([ad_dr_tokens(g, p) for g, p in zip(gold, pred)])


def ad_pdh(gold: Sequence, pred: Sequence, variant: str = "intervening") -> float:
    _check(gold, pred)
    return _mean_of([ad_pdh_tokens(g, p, variant) for g, p in zip(gold, pred)])


def pos_head_error(gold: Sequence, pred: Sequence, pos: Sequence[Sequence[str]]) -> float:
    _check(gold, pred)
    if len(pos) != len(gold):
        raise AlignmentError("POS sequences not aligned with trees")
    return _mean_of([pos_head_error_tokens(g, p, ps) for g, p, ps in zip(gold, pred, pos)])


@dataclass
class EvalReport:
    uas: float
    las: float
    ad_nc: float
    ad_dr: float
    ad_pdh: float
    pos_head_error: float
    n_sentences: int
    n_tokens: int
    per_sentence: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self, per_sentence: bool = False) -> dict:
        d = asdict(self)
        if not per_sentence:
            d.pop("per_sentence")
        return d


def evaluate(gold: Sequence, pred: Sequence, pos: Sequence[Sequence[str]],
             pdh_variant: str = "intervening") -> EvalReport:
    _check(gold, pred)
    uas, las = uas_las(gold, pred)
    per = {"uas": [], "las": [], "ad_nc": [], "ad_dr": [], "ad_pdh": [], "pos_head_error": []}
    for g, p, ps in zip(gold, pred, pos):
        n, u, l = sentence_attachment(g, p)
        per["uas"].append(u / n)
        per["las"].append(l / n)
        per["ad_nc"].append(float(np.mean(ad_nc_tokens(g, p))))
        per["ad_dr"].append(float(np.mean(ad_dr_tokens(g, p))))
        pdh = ad_pdh_tokens(g, p, pdh_variant)
        per["ad_pdh"].append(float(np.mean(pdh)) if pdh else 0.0)
        per["pos_head_error"].append(float(np.mean(pos_head_error_tokens(g, p, ps))))
    return EvalReport(uas, las, ad_nc(gold, pred), ad_dr(gold, pred), ad_pdh(gold, pred, pdh_variant),
                      pos_head_error(gold, pred, pos), len(gold), sum(len(_heads(g)) for g in gold), per)


def regression_r2(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Ordinary least squares y ~ slope * x + intercept; returns (slope, intercept, R^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need two equally long samples of size >= 2")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise DegenerateError("x is constant; slope undefined")
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    intercept = ym - slope * xm
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, float(intercept), r2


# -- Student t distribution ---------------------------------------------------

def _betacf(a: float, b: float, x: float, max_iter: int = 10000, eps: float = 1e-16) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    front = math.exp(lbeta + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test; returns (t, p)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equally long samples of size >= 2")
    d = a - b
    n = d.size
    sd = float(np.std(d, ddof=1))
    if sd == 0.0 or not np.isfinite(sd):
        raise DegenerateError("zero variance of paired differences")
    t = float(d.mean()) / (sd / math.sqrt(n))
    return t, t_sf_two_sided(t, n - 1)
