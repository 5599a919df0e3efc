"""Self-training orchestration: DCST, its baselines and the experiment runner."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, ParserConfig, dump_kv
from .conllu import Sentence, read_conllu, strip_annotations
from .encoder import Encoder
from .metrics import EvalReport, evaluate
from .neural.embeddings import pretrained_or_none
from .neural.params import substream
from .parser import BiaffineParser, evaluate_las, fit_parser, train_parser
from .synth import generate_corpus
from .tagger import (SequenceTagger, TaggedCorpus, derive_tagged_corpus, tag_accuracy, train_lm_tagger,
                     train_tagger)
from .trees import DepTree

log = logging.getLogger(__name__)

TREE_SCHEMES = ("NC", "DR", "RPE")


# -- data splits ------------------------------------------------------------------

def sample_split(corpus: Sequence[Sentence], n_train: int, n_dev: int, seed: int):
    """Seeded (L, dev, U) partition; U is the remainder with trees stripped."""
    if n_train < 0 or n_dev < 0 or len(corpus) < n_train + n_dev:
        raise ValueError(f"corpus of {len(corpus)} sentences cannot supply {n_train} + {n_dev}")
    perm = substream(seed, "split").permutation(len(corpus))
    L = [corpus[i] for i in perm[:n_train]]
    dev = [corpus[i] for i in perm[n_train:n_train + n_dev]]
    U = [strip_annotations(corpus[i]) for i in perm[n_train + n_dev:]]
    return L, dev, U


def split_by_length(corpus: Sequence[Sentence], threshold: int = 10):
    short = [s for s in corpus if len(s) <= threshold]
    long = [s for s in corpus if len(s) > threshold]
    return short, long


def carve_dev(U: Sequence[Sentence], fraction: float, seed: int, cap: int = 1000):
    """Hold out part of U (for tagger early stopping)."""
    n = min(cap, int(round(len(U) * fraction)))
    if len(U) < 2 or n == 0:
        return list(U), []
    perm = substream(seed, "u-dev").permutation(len(U))
    return [U[i] for i in perm[n:]], [U[i] for i in perm[:n]]


def trees_of(sentences: Sequence[Sentence]) -> list[DepTree]:
    return [DepTree.from_sentence(s) for s in sentences]


# -- reports ------------------------------------------------------------------------

@dataclass
class RunReport:
    model: str
    stages: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"model": self.model, "stages": self.stages, "timings": self.timings}


class _Timer:
    def __init__(self, report: RunReport, name: str):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.report.timings[self.name] = round(time.perf_counter() - self.t0, 3)
        return False


# -- hybrids ---------------------------------------------------------------------------

def build_hybrid(L: Sequence[Sentence], cfg: ParserConfig, taggers: Sequence[SequenceTagger], seed: int,
                 freeze: bool, pretrained=None) -> BiaffineParser:
    """Fresh parser parameters plus tagger encoders copied from ``taggers``."""
    encs = [t.encoder.renamed(f"tgr{i}") for i, t in enumerate(taggers)]
    model = BiaffineParser.build(L, cfg, taggers=encs, tagger_schemes=[t.scheme for t in taggers],
                                 pretrained=pretrained, seed=seed)
    for i, t in enumerate(taggers):
        model.store.copy_from(t.store, "enc.", f"tgr{i}.")
        model.pinned.update(f"tgr{i}." + n[len("enc."):] for n in t.store.frozen if n.startswith("enc."))
    model.set_tagger_frozen(freeze)
    return model


def train_hybrid(L, dev, cfg: ParserConfig, taggers: Sequence[SequenceTagger], seed: int, freeze="false",
                 pretrained=None, name: str = "hybrid"):
    """Step 5. ``freeze`` is "true", "false" or "tune_on_dev" (both tried, best dev LAS kept)."""
    options = {"true": [True], "false": [False], "tune_on_dev": [False, True]}[str(freeze).lower()]
    best = None
    for fz in options:
        model = build_hybrid(L, cfg, taggers, seed, fz, pretrained)
        history = fit_parser(model, L, dev, seed, name=f"{name}.{'frozen' if fz else 'tuned'}")
        score = evaluate_las(model, dev) if dev else float("nan")
        if best is None or score > best[2]:
            best = (model, history, score, fz)
    return best


def auto_parse(parser: BiaffineParser, U: Sequence[Sentence]) -> list[Sentence]:
    return parser.parse(list(U))


def run_dcst(L: Sequence[Sentence], dev: Sequence[Sentence], U: Sequence[Sentence], schemes: Sequence[str],
             cfg: ParserConfig, freeze: str = "false", U_dev: Optional[Sequence[Sentence]] = None,
             seed: Optional[int] = None, tagger_epochs: Optional[int] = None, u_dev_fraction: float = 0.1,
             base: Optional[BiaffineParser] = None, taggers: Optional[dict] = None,
             archive_dir: Optional[Path] = None, pretrained=None):
    """Algorithm 1 end to end; returns (hybrid, report).

    ``base`` and ``taggers`` (scheme -> SequenceTagger) let callers reuse
    earlier stages; anything missing is trained here.
    """
    schemes = list(schemes)
    if not schemes:
        raise ValueError("DCST needs at least one tagging scheme")
    bad = [s for s in schemes if s not in TREE_SCHEMES]
    if bad:
        raise ValueError(f"schemes must be drawn from {TREE_SCHEMES}, got {bad}")
    if not L or not U:
        raise ValueError("DCST needs non-empty labeled and unlabeled sets")
    seed = cfg.seed if seed is None else seed
    report = RunReport("DCST-" + ("ENS" if len(schemes) == 3 else "+".join(schemes)))
    taggers = {} if taggers is None else taggers
    U = [strip_annotations(s) for s in U]
    if U_dev is None:
        U, U_dev = carve_dev(U, u_dev_fraction, seed)
    U_dev = [strip_annotations(s) for s in U_dev]

    if base is None:
        with _Timer(report, "1_base"):
            base, _ = train_parser(L, dev, cfg, pretrained=pretrained, seed=seed, name="base")
    report.stages["base_dev_las"] = evaluate_las(base, dev) if dev else None
    if archive_dir is not None:
        base.save(Path(archive_dir) / "base.parser")

    needed = [s for s in schemes if s not in taggers]
    if needed:
        with _Timer(report, "2_autoparse"):
            auto_u = auto_parse(base, U)
            auto_dev = auto_parse(base, U_dev) if U_dev else []
        with _Timer(report, "3_4_taggers"):
            for scheme in needed:
                corpus = derive_tagged_corpus(auto_u, trees_of(auto_u), scheme)
                dcorp = derive_tagged_corpus(auto_dev, trees_of(auto_dev), scheme) if auto_dev else None
                taggers[scheme], _ = train_tagger(corpus, dcorp, cfg, epochs=tagger_epochs, pretrained=pretrained,
                                                  seed=seed)
                if archive_dir is not None:
                    taggers[scheme].save(Path(archive_dir) / f"tagger_{scheme}.tagger")
    report.stages["tagger_dev_acc"] = {}
    if U_dev:
        auto_dev = auto_parse(base, U_dev)
        for scheme in schemes:
            dc = derive_tagged_corpus(auto_dev, trees_of(auto_dev), scheme)
            report.stages["tagger_dev_acc"][scheme] = tag_accuracy(taggers[scheme], dc)[1]

    with _Timer(report, "5_hybrid"):
        hybrid, _, score, frozen = train_hybrid(L, dev, cfg, [taggers[s] for s in schemes], seed, freeze,
                                                pretrained, name=report.model)
    report.stages["hybrid_dev_las"] = score if dev else None
    report.stages["frozen"] = frozen
    if archive_dir is not None:
        hybrid.save(Path(archive_dir) / "hybrid.parser")
    return hybrid, report


def run_dcst_lm(L, dev, U, cfg: ParserConfig, freeze: str = "false", U_dev=None, seed: Optional[int] = None,
                tagger_epochs: Optional[int] = None, u_dev_fraction: float = 0.1, lm_tagger=None,
                archive_dir: Optional[Path] = None, pretrained=None):
    """DCST with the step-4 encoder trained as a bidirectional language model."""
    seed = cfg.seed if seed is None else seed
    report = RunReport("DCST-LM")
    U = [strip_annotations(s) for s in U]
    if U_dev is None:
        U, U_dev = carve_dev(U, u_dev_fraction, seed)
    if lm_tagger is None:
        with _Timer(report, "4_lm"):
            lm_tagger, _ = train_lm_tagger(U, U_dev, cfg, epochs=tagger_epochs, pretrained=pretrained, seed=seed)
    if U_dev:
        from .tagger import lm_corpus
        report.stages["tagger_dev_acc"] = {"LM": tag_accuracy(lm_tagger, lm_corpus(U_dev))[1]}
    if archive_dir is not None:
        lm_tagger.save(Path(archive_dir) / "tagger_LM.tagger")
    with _Timer(report, "5_hybrid"):
        hybrid, _, score, frozen = train_hybrid(L, dev, cfg, [lm_tagger], seed, freeze, pretrained, "DCST-LM")
    report.stages["hybrid_dev_las"] = score if dev else None
    report.stages["frozen"] = frozen
    if archive_dir is not None:
        hybrid.save(Path(archive_dir) / "hybrid.parser")
    return hybrid, report


def run_self_training(L, dev, U, cfg: ParserConfig, seed: Optional[int] = None,
                      base: Optional[BiaffineParser] = None, pretrained=None):
    """Classic self-training: one round of retraining on L plus auto-parsed U."""
    seed = cfg.seed if seed is None else seed
    report = RunReport("Self-Training")
    if base is None:
        base, _ = train_parser(L, dev, cfg, pretrained=pretrained, seed=seed, name="base")
    auto_u = auto_parse(base, [strip_annotations(s) for s in U]) if U else []
    combined = list(L) + auto_u
    report.stages["train_size"] = len(combined)
    with _Timer(report, "retrain"):
        model, _ = train_parser(combined, dev, cfg, pretrained=pretrained, seed=seed, name="self-training")
    report.stages["dev_las"] = evaluate_las(model, dev) if dev else None
    return model, report


def run_random_gating(L, dev, cfg: ParserConfig, seed: Optional[int] = None, freeze: bool = False,
                      vocab_source: Optional[Sequence[Sentence]] = None, pretrained=None):
    """Base + RG: one randomly initialised, never pre-trained tagger encoder gated in.

    The random encoder's vocabularies come from ``vocab_source`` (default
    L), so passing U yields an archive shaped like a one-tagger DCST hybrid.
    """
    seed = cfg.seed if seed is None else seed
    report = RunReport("Base+RG")
    src = list(vocab_source) if vocab_source is not None else list(L)
    enc = Encoder.build("tgr0", src, cfg, pretrained=pretrained)
    model = BiaffineParser.build(L, cfg, taggers=[enc], tagger_schemes=["RG"], pretrained=pretrained, seed=seed)
    model.set_tagger_frozen(freeze)
    with _Timer(report, "train"):
        fit_parser(model, L, dev, seed, name="base+rg")
    report.stages["dev_las"] = evaluate_las(model, dev) if dev else None
    report.stages["frozen"] = freeze
    return model, report


# -- experiment runner -------------------------------------------------------------------

@dataclass
class ExperimentData:
    L_full: list[Sentence]     # all labeled training sentences (Base-FS)
    pool: list[Sentence]       # labeled pool that L/dev are sampled from
    dev_pool: list[Sentence]
    U: list[Sentence]
    U_dev: Optional[list[Sentence]]
    test: list[Sentence]


def _load(path: str) -> list[Sentence]:
    return read_conllu(path) if path else []


def prepare_data(cfg: ExperimentConfig) -> ExperimentData:
    if cfg.setup == "domain_adaptation":
        src_train, src_dev = _load(cfg.train), _load(cfg.dev)
        tgt_train, tgt_dev, test = _load(cfg.target_train), _load(cfg.target_dev), _load(cfg.test)
        if not (src_train and tgt_train and test):
            raise ValueError("domain adaptation needs train, target_train and test corpora")
        return ExperimentData(tgt_train, src_train, src_dev, [strip_annotations(s) for s in tgt_train],
                              [strip_annotations(s) for s in tgt_dev] or None, test)
    if cfg.train:
        train, dev, test = _load(cfg.train), _load(cfg.dev), _load(cfg.test)
    else:
        corpus = generate_corpus(cfg.synth_train + cfg.synth_test, cfg.synth_seed)
        train, dev, test = corpus[: cfg.synth_train], [], corpus[cfg.synth_train:]
    if cfg.setup == "length_adaptation":
        short, long = split_by_length(train, cfg.length_threshold)
        dev_short, _ = split_by_length(dev, cfg.length_threshold)
        _, test_long = split_by_length(test, cfg.length_threshold)
        return ExperimentData(train, short, dev_short, [strip_annotations(s) for s in long], None, test_long)
    return ExperimentData(train, train, dev, [], None, test)


def _budget(cfg: ExperimentConfig, available: int) -> int:
    return available if cfg.budget == "all" else int(cfg.budget)


def _split_for_seed(cfg: ExperimentConfig, data: ExperimentData, seed: int):
    if cfg.setup == "domain_adaptation":
        n = min(_budget(cfg, len(data.pool)), len(data.pool))
        L = [data.pool[i] for i in substream(seed, "split").permutation(len(data.pool))[:n]]
        return L, data.dev_pool[: cfg.n_dev], data.U, data.U_dev
    if cfg.setup == "length_adaptation":
        n = min(_budget(cfg, len(data.pool)), len(data.pool))
        L, dev, _ = sample_split(data.pool, n, 0, seed) if n < len(data.pool) else (data.pool, [], [])
        dev = data.dev_pool[: cfg.n_dev] if data.dev_pool else dev
        return L, dev, data.U, None
    if data.dev_pool:
        n = _budget(cfg, len(data.pool))
        L, _, U = sample_split(data.pool, n, 0, seed)
        dev = [data.dev_pool[i] for i in substream(seed, "dev").permutation(len(data.dev_pool))[: cfg.n_dev]]
        return L, dev, U, None
    n = _budget(cfg, len(data.pool) - cfg.n_dev)
    L, dev, U = sample_split(data.pool, n, cfg.n_dev, seed)
    return L, dev, U, None


def _evaluate(model: BiaffineParser, test: Sequence[Sentence]) -> EvalReport:
    preds = model.predict(list(test))
    return evaluate(trees_of(test), preds, [s.upos for s in test])


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> list[dict]:
    """Train and test every requested model for every seed.

    Returns one record per (model, seed) sorted by model name then seed;
    records are also appended to ``results.jsonl`` as soon as each model
    finishes.
    """
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(dump_kv(cfg))
    data = prepare_data(cfg)
    results_path = out / "results.jsonl"
    results_path.write_text("")
    records = []
    tagger_epochs = cfg.tagger_epochs or None
    pre = pretrained_or_none(cfg.parser.pretrained, cfg.parser.word_dim)
    for seed in cfg.seeds:
        pcfg = cfg.parser.with_(seed=seed)
        L, dev, U, U_dev = _split_for_seed(cfg, data, seed)
        if U_dev is None and U:
            U, U_dev = carve_dev(U, cfg.u_dev_fraction, seed)
        cache: dict = {"taggers": {}}

        def base():
            if "base" not in cache:
                cache["base"], _ = train_parser(L, dev, pcfg, pre, seed=seed, name="base")
            return cache["base"]

        for name in cfg.models:
            t0 = time.perf_counter()
            extra: dict = {}
            if name == "Base":
                model = base()
            elif name == "Base-FS":
                model, _ = train_parser(data.L_full, dev, pcfg, pre, seed=seed, name="base-fs")
            elif name == "Base+RG":
                model, rep = run_random_gating(L, dev, pcfg, seed, cfg.rg_freeze, vocab_source=U or None,
                                               pretrained=pre)
                extra = rep.stages
            elif name == "Self-Training":
                model, rep = run_self_training(L, dev, U, pcfg, seed, base=base(), pretrained=pre)
                extra = rep.stages
            elif name == "DCST-LM":
                model, rep = run_dcst_lm(L, dev, U, pcfg, cfg.freeze, U_dev, seed, tagger_epochs,
                                         pretrained=pre)
                extra = rep.stages
            else:
                schemes = list(TREE_SCHEMES) if name == "DCST-ENS" else [name.split("-")[1]]
                model, rep = run_dcst(L, dev, U, schemes, pcfg, cfg.freeze, U_dev, seed, tagger_epochs,
                                      base=base(), taggers=cache["taggers"], pretrained=pre)
                extra = rep.stages
            report = _evaluate(model, data.test)
            rec = {"model": name, "seed": seed, "uas": report.uas, "las": report.las,
                   "ad_nc": report.ad_nc, "ad_dr": report.ad_dr, "ad_pdh": report.ad_pdh,
                   "pos_head_error": report.pos_head_error, "n_train": len(L), "n_unlabeled": len(U),
                   "stages": extra, "seconds": round(time.perf_counter() - t0, 3),
                   "per_sentence_las": report.per_sentence["las"]}
            records.append(rec)
            with open(results_path, "a") as f:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
            log.info("%s seed %d: UAS %.4f LAS %.4f", name, seed, report.uas, report.las)
    records.sort(key=lambda r: (r["model"], r["seed"]))
    (out / "results.txt").write_text(format_table(records))
    return records


def format_table(records: Sequence[dict]) -> str:
    rows = sorted(records, key=lambda r: (r["model"], r["seed"]))
    lines = [f"{'model':<14} {'seed':>5} {'UAS':>7} {'LAS':>7}"]
    for r in rows:
        lines.append(f"{r['model']:<14} {r['seed']:>5} {100 * r['uas']:7.2f} {100 * r['las']:7.2f}")
    models = sorted({r["model"] for r in rows})
    if len({r["seed"] for r in rows}) > 1:
        for m in models:
            sub = [r for r in rows if r["model"] == m]
            lines.append(f"{m:<14} {'mean':>5} {100 * np.mean([r['uas'] for r in sub]):7.2f} "
                         f"{100 * np.mean([r['las'] for r in sub]):7.2f}")
    return "\n".join(lines) + "\n"
