"""Acceptance criteria 1-9. Each test records one PASS/FAIL line, echoed at the end of the session."""
import time

import numpy as np
import pytest

import conftest
from conftest import CHAIN, STAR, random_heads, tiny_config
from dcst.cli import main
from dcst.config import ExperimentConfig, ParserConfig
from dcst.decode import brute_force_best_tree, decode_mst, tree_score
from dcst.gating import gate2, gate_n
from dcst.metrics import ad_dr, ad_nc, ad_pdh, paired_t_test, pos_head_error, uas_las
from dcst.neural import tensor as T
from dcst.neural.gradcheck import grad_check
from dcst.neural.params import ParameterStore
from dcst.neural.tensor import Tensor
from dcst.parser import BiaffineParser, parse_loss, train_parser
from dcst.pipeline import build_hybrid, run_experiment, train_hybrid, trees_of
from dcst.synth import generate_corpus
from dcst.tagger import SequenceTagger, derive_tagged_corpus, tag_accuracy, train_tagger
from dcst.trees import DepTree, decode_rpe, encode_dr, encode_nc, encode_rpe

DESK = ParserConfig.for_profile("desk")


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_1_codecs():
    rng = np.random.default_rng(101)
    pos_set = ["NOUN", "VERB", "DET", "ADJ", "ADP", "PRON", "PUNCT"]
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        m = int(rng.integers(1, 16))
        tree = DepTree(random_heads(rng, m))
        pos = [pos_set[i] for i in rng.integers(len(pos_set), size=m)]
        bad += decode_rpe(encode_rpe(tree, pos), pos).heads != tree.heads
        bad += sum(int(t) for t in encode_nc(tree).tags) != m - 1
        dr = [int(t) for t in encode_dr(tree).tags]
        bad += any(dr[i] != dr[h - 1] + 1 for i, h in enumerate(tree.heads) if h)
        bad += [dr[i] for i, h in enumerate(tree.heads) if h == 0] != [1]
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 5
    record(1, ok, f"{bad} codec violations on 1000 trees in {dt:.2f}s")
    assert ok


def test_criterion_2_mst_oracle():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for m in range(2, 7):
        for _ in range(200):
            s = rng.normal(size=(m, m + 1)) * 3
            if rng.random() < 0.3:
                s = np.round(s)  # plenty of ties
            got, best = tree_score(s, decode_mst(s)), tree_score(s, brute_force_best_tree(s))
            worst = max(worst, best - got)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 30
    record(2, ok, f"max score shortfall {worst:.2e} over 1000 matrices in {dt:.2f}s")
    assert ok


def _randomise(store, rng, scale=0.3):
    for n in store:
        store.set(n, rng.normal(size=store[n].shape) * scale)


def _primitive_errors(rng):
    errs = {}
    unary = {"sigmoid": T.sigmoid, "tanh": T.tanh, "elu": T.elu, "relu": T.relu,
             "softmax": lambda x: T.softmax(x, axis=-1)}
    for name, op in unary.items():
        st = ParameterStore()
        x = rng.normal(size=(3, 4))
        x[np.abs(x) < 0.05] += 0.2
        st.add("x", x)
        w = Tensor(rng.normal(size=(3, 4)))
        errs[name] = grad_check(lambda: T.sum(op(st["x"]) * w), st, max_entries=None).max_error
    st = ParameterStore()
    for n, shape in dict(a=(2, 3, 4), W=(4, 5), b=(5,), E=(6, 4)).items():
        st.add(n, rng.normal(size=shape))
    idx = np.array([[0, 3, 3], [5, 1, 0]])
    w = Tensor(rng.normal(size=(2, 3, 5)))
    errs["affine+lookup"] = grad_check(
        lambda: T.sum(T.affine(T.add(st["a"], T.embedding_lookup(st["E"], idx)), st["W"], st["b"]) * w),
        st, max_entries=None).max_error
    st = ParameterStore()
    st.add("z", rng.normal(size=(3, 5)))
    errs["cross_entropy"] = grad_check(lambda: T.softmax_cross_entropy(st["z"], np.array([1, 4, 0])), st,
                                       max_entries=None).max_error
    return errs


def test_criterion_3_gradients():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    errs = _primitive_errors(rng)
    corpus = generate_corpus(300, seed=3)
    four = [s for s in corpus if len(s) == 4][:1]
    three = [s for s in corpus if len(s) == 3][:1]
    assert four and three
    cfg = DESK.with_(dropout=0.0)
    parser = BiaffineParser.build(four, cfg)
    _randomise(parser.store, rng)
    errs["biaffine(4 tokens)"] = grad_check(lambda: parser.loss(four, train=False)[0], parser.store,
                                            max_entries=6).max_error
    taggers = []
    for scheme in ("NC", "DR", "RPE"):
        tc = derive_tagged_corpus(three, trees_of(three), scheme)
        taggers.append(SequenceTagger.build(tc, cfg, seed=len(scheme)))
    hybrid = build_hybrid(three, cfg, taggers, seed=1, freeze=False)
    _randomise(hybrid.store, rng)
    errs["hybrid(3 taggers, 3 tokens)"] = grad_check(lambda: hybrid.loss(three, train=False)[0], hybrid.store,
                                                     max_entries=4).max_error
    dt = time.perf_counter() - t0
    worst = max(errs, key=errs.get)
    ok = errs[worst] <= 1e-4 and dt < 120
    record(3, ok, f"max rel error {errs[worst]:.2e} ({worst}) over {len(errs)} checks in {dt:.1f}s")
    assert ok, errs


def test_criterion_4_closed_forms():
    gaps = []
    for m, K in [(1, 1), (3, 2), (7, 5), (12, 30)]:
        heads = np.array([[0] + list(range(1, m))])
        loss = parse_loss(Tensor(np.zeros((1, m, m + 1))), Tensor(np.zeros((1, m, K))), heads, np.zeros((1, m), int))
        gaps.append(abs(float(loss.data) - m * (np.log(m + 1) + np.log(K))))
    rng = np.random.default_rng(404)
    hs = [rng.normal(size=(2, 5, 8)) for _ in range(4)]
    g2 = gate2(Tensor(hs[0]), Tensor(hs[1]), Tensor(np.zeros((16, 8))), Tensor(np.zeros(8))).data
    gn = gate_n(Tensor(hs[0]), [Tensor(h) for h in hs[1:]], [Tensor(np.zeros((32, 8)))] * 4,
                [Tensor(np.zeros(8))] * 4).data
    gate_gap = max(np.abs(g2 - (hs[0] + hs[1]) / 2).max(), np.abs(gn - sum(hs) / 4).max())
    ok = max(gaps) <= 1e-9 and gate_gap <= 1e-12
    record(4, ok, f"loss gap {max(gaps):.1e}, gate gap {gate_gap:.1e}")
    assert ok


def test_criterion_5_overfit():
    t0 = time.perf_counter()
    c = generate_corpus(70, seed=5)
    train = c[:20]
    cfg = DESK.with_(epochs=100)
    parser, _ = train_parser(train, [], cfg, seed=1)
    uas = uas_las(trees_of(train), parser.predict(train))[0]
    parser_secs = time.perf_counter() - t0
    U = c[20:]
    auto = parser.predict(U)
    accs = {}
    for scheme in ("NC", "DR", "RPE"):
        tc = derive_tagged_corpus(U, auto, scheme)
        tagger, _ = train_tagger(tc, None, cfg, seed=1)
        accs[scheme] = tag_accuracy(tagger, tc)[1]
    ok = uas >= 0.95 and parser_secs < 120 and min(accs.values()) >= 0.95
    record(5, ok, f"train UAS {uas:.3f} in {parser_secs:.0f}s; tagger train acc "
           + " ".join(f"{k}={v:.3f}" for k, v in accs.items()))
    assert ok


TREND_PARSER = DESK.with_(hidden=64, layers=2, word_dim=32, char_dim=16, char_filters=16, pos_dim=16, arc_mlp=64,
                          label_mlp=32, tagger_fc1=64, tagger_fc2=32, epochs=60, patience=10)


def test_criterion_6_trend(tmp_path):
    t0 = time.perf_counter()
    ec = ExperimentConfig(models=("Base", "DCST-LM", "DCST-ENS"), budget="100", n_dev=100, synth_train=2200,
                          synth_test=500, parser=TREND_PARSER, seeds=(1, 2, 3), tagger_epochs=15)
    recs = run_experiment(ec, tmp_path)
    dt = time.perf_counter() - t0
    mean = {m: 100 * np.mean([r["uas"] for r in recs if r["model"] == m]) for m in ec.models}
    ok = mean["DCST-ENS"] >= mean["Base"] + 1.0 and mean["DCST-ENS"] >= mean["DCST-LM"] and dt < 1800
    record(6, ok, "mean test UAS " + " ".join(f"{m}={v:.2f}" for m, v in mean.items()) + f" in {dt / 60:.1f}min"
           + ("" if ok else " (soft criterion)"))
    if not ok:
        pytest.xfail("soft trend criterion not met on the synthetic grammar")


def test_criterion_7_metrics():
    checks = [ad_nc([STAR], [CHAIN]) == 1.0, ad_dr([CHAIN], [STAR]) == 0.75, ad_nc([STAR], [STAR]) == 0.0,
              ad_pdh([STAR], [STAR]) == 0.0, ad_pdh([DepTree((0, 1, 2))], [DepTree((0, 3, 1))]) == 0.5,
              pos_head_error([DepTree((2, 0, 2, 3))], [DepTree((3, 0, 2, 1))],
                             [["NOUN", "VERB", "NOUN", "NOUN"]]) == 0.25]
    rng = np.random.default_rng(707)
    for _ in range(100):
        gold, pred, n, u, l = [], [], 0, 0, 0
        for _ in range(int(rng.integers(1, 6))):
            m = int(rng.integers(1, 9))
            g = DepTree(random_heads(rng, m), tuple(rng.choice(["a", "b"], m)))
            p = DepTree(random_heads(rng, m), tuple(rng.choice(["a", "b"], m)))
            gold.append(g)
            pred.append(p)
            for gh, ph, gl, pl in zip(g.heads, p.heads, g.labels, p.labels):
                n, u, l = n + 1, u + (gh == ph), l + (gh == ph and gl == pl)
        checks.append(uas_las(gold, pred) == (u / n, l / n))
    worst = 0.0
    for k in range(20):
        a = rng.normal(size=int(rng.integers(3, 40)))
        b = a + rng.normal(0.1 * k / 10, 1.0, size=a.size)
        t, p = paired_t_test(a, b)
        d = a - b
        t_ref = d.mean() / (d.std(ddof=1) / np.sqrt(d.size))
        worst = max(worst, abs(t - t_ref), abs(p - _reference_p(t_ref, d.size - 1)))
    ok = all(checks) and worst <= 1e-6
    record(7, ok, f"{sum(checks)}/{len(checks)} exact checks, t-test max deviation {worst:.1e}")
    assert ok


def _reference_p(t: float, df: int) -> float:
    """Two-sided Student-t p value by Simpson integration of the density, independent of the library code."""
    from math import gamma, pi, sqrt
    c = gamma((df + 1) / 2) / (sqrt(df * pi) * gamma(df / 2))
    x = np.linspace(0.0, abs(t), 200001)
    f = c * (1 + x ** 2 / df) ** (-(df + 1) / 2)
    h = x[1] - x[0]
    area = h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum())
    return float(1.0 - 2.0 * area)


def test_criterion_8_determinism(tmp_path):
    from dcst.conllu import save_conllu
    c = generate_corpus(80, seed=8)
    for name, part in (("L", c[:20]), ("dev", c[20:30]), ("U", c[30:])):
        save_conllu(tmp_path / f"{name}.conllu", part)
    sets = [x for k, v in dict(hidden=16, layers=1, word_dim=16, char_dim=8, char_filters=8, pos_dim=8, arc_mlp=16,
                               label_mlp=8, tagger_fc1=16, tagger_fc2=8, epochs=3).items()
            for x in ("--set", f"{k}={v}")]
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        code = main(["selftrain", "--mode", "dcst", "--labeled", str(tmp_path / "L.conllu"), "--unlabeled",
                     str(tmp_path / "U.conllu"), "--dev", str(tmp_path / "dev.conllu"), "--seed", "7",
                     "--out", str(out), *sets])
        assert code == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir() if p.name != "run.log")
    same = [(outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files]
    ok = all(same) and "model.parser" in files and "report.json" in files
    record(8, ok, f"{sum(same)}/{len(files)} artifacts byte-identical ({', '.join(files)})")
    assert ok


def test_criterion_9_freeze():
    c = generate_corpus(70, seed=9)
    L, dev, U = c[:15], c[15:25], c[25:]
    cfg = tiny_config(epochs=2)
    taggers = [train_tagger(derive_tagged_corpus(U, trees_of(U), s), None, cfg, seed=1)[0] for s in ("NC", "DR", "RPE")]
    status = {}
    for freeze in ("true", "false"):
        model, _, _, _ = train_hybrid(L, dev, cfg, taggers, seed=1, freeze=freeze)
        key = "enc." if freeze == "true" else "enc.lstm"
        status[freeze] = [np.array_equal(model.store[f"tgr{i}." + n[4:]].data, t.store[n].data)
                          for i, t in enumerate(taggers) for n in t.store.names(key)]
    ok = all(status["true"]) and not any(status["false"])
    record(9, ok, f"frozen: {sum(status['true'])}/{len(status['true'])} tensors unchanged; "
           f"unfrozen: {len(status['false']) - sum(status['false'])}/{len(status['false'])} LSTM tensors moved")
    assert ok
