import numpy as np
import pytest
from scipy import stats

from conftest import CHAIN, STAR, random_heads
from dcst.metrics import (AlignmentError, DegenerateError, ad_dr, ad_nc, ad_pdh, ad_pdh_tokens, betainc_reg, evaluate,
                          paired_t_test, pos_head_error, regression_r2, signed_head_distance, t_sf_two_sided, uas_las)
from dcst.trees import DepTree


def test_uas_las_examples():
    g = DepTree((2, 0, 2), ("a", "r", "b"))
    assert uas_las([g], [g]) == (1.0, 1.0)
    assert uas_las([g], [DepTree((2, 0, 1), ("a", "r", "b"))]) == pytest.approx((2 / 3, 2 / 3))
    assert uas_las([g], [DepTree((2, 0, 2), ("x", "y", "z"))]) == (1.0, 0.0)


def test_uas_las_recount(rng):
    labels = ["a", "b", "c"]
    for _ in range(100):
        gold, pred = [], []
        for _ in range(int(rng.integers(1, 6))):
            m = int(rng.integers(1, 9))
            gold.append(DepTree(random_heads(rng, m), tuple(rng.choice(labels, m))))
            pred.append(DepTree(random_heads(rng, m), tuple(rng.choice(labels, m))))
        n = u = l = 0
        for g, p in zip(gold, pred):
            for gh, ph, gl, pl in zip(g.heads, p.heads, g.labels, p.labels):
                n += 1
                u += gh == ph
                l += gh == ph and gl == pl
        assert uas_las(gold, pred) == (u / n, l / n)


def test_structure_metrics_star_chain():
    assert ad_nc([STAR], [STAR]) == 0.0
    assert ad_nc([STAR], [CHAIN]) == 1.0
    assert ad_dr([CHAIN], [CHAIN]) == 0.0
    assert ad_dr([CHAIN], [STAR]) == 0.75


def test_pdh_rules():
    assert signed_head_distance(3, 1) == -1
    assert signed_head_distance(3, 2) == 0
    assert signed_head_distance(1, 2) == 0
    assert signed_head_distance(1, 4) == 2
    assert signed_head_distance(3, 1, "offset") == -2
    assert ad_pdh_tokens((0, 3, 1), (0, 3, 2)) == [0, 1]
    assert ad_pdh_tokens((2, 0, 2), (2, 0, 2)) == [0, 0]
    # token 2: left-adjacent head in gold, right-adjacent in pred, both distances zero
    assert ad_pdh_tokens((0, 1, 2), (0, 3, 1)) == [0, 1]
    assert ad_pdh([STAR], [STAR]) == 0.0
    with pytest.raises(ValueError):
        signed_head_distance(1, 2, "bogus")


def test_pos_head_error():
    pos = [["NOUN", "VERB", "NOUN", "NOUN"]]
    gold = DepTree((2, 0, 2, 3))
    assert pos_head_error([gold], [gold], pos) == 0.0
    # token 4: head 3 (NOUN) -> head 1 (NOUN) is not a POS error; token 1: VERB -> NOUN is
    assert pos_head_error([gold], [DepTree((3, 0, 2, 1))], pos) == pytest.approx(1 / 4)


def test_evaluate_report_and_alignment():
    rep = evaluate([STAR, CHAIN], [CHAIN, CHAIN], [["X"] * 4] * 2)
    assert rep.n_sentences == 2 and rep.n_tokens == 8
    assert rep.ad_nc == pytest.approx(0.5)
    assert rep.per_sentence["uas"] == [0.5, 1.0]
    with pytest.raises(AlignmentError):
        uas_las([STAR], [STAR, STAR])
    with pytest.raises(AlignmentError):
        uas_las([STAR], [DepTree((0, 1))])


def test_regression():
    x = np.linspace(0, 1, 20)
    assert regression_r2(x, 2 * x + 1) == pytest.approx((2.0, 1.0, 1.0))
    rng = np.random.default_rng(0)
    assert regression_r2(rng.normal(size=5000), rng.normal(size=5000))[2] < 0.01
    with pytest.raises(DegenerateError):
        regression_r2([1, 1, 1], [1, 2, 3])


def test_t_test_matches_reference():
    rng = np.random.default_rng(42)
    a = rng.normal(size=100)
    b = a - 0.3 + rng.normal(scale=0.8, size=100)
    t, p = paired_t_test(a, b)
    ref = stats.ttest_rel(a, b)
    assert t == pytest.approx(ref.statistic, abs=1e-9)
    assert p == pytest.approx(ref.pvalue, abs=1e-6)
    for df in (1, 3, 30, 500):
        for tv in (0.0, 0.5, 2.0, 7.0):
            assert t_sf_two_sided(tv, df) == pytest.approx(2 * stats.t.sf(tv, df), abs=1e-12)
    assert betainc_reg(2.0, 3.0, 0.4) == pytest.approx(stats.beta.cdf(0.4, 2.0, 3.0), abs=1e-13)


def test_t_test_degenerate():
    with pytest.raises(DegenerateError):
        paired_t_test([1, 2, 3], [1, 2, 3])
    with pytest.raises(DegenerateError):
        paired_t_test([1, 2, 3], [0, 1, 2])
