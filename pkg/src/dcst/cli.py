"""``dcst`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(reported as ``file:line: message`` where a line is known), 3 non-finite
training loss.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, ExperimentConfig, build_experiment_config, build_parser_config, dump_kv, parse_kv
from .conllu import ConlluError, Sentence, Token, read_conllu, save_conllu, strip_annotations
from .metrics import AlignmentError, DegenerateError, evaluate
from .neural.archive import ArchiveError
from .neural.embeddings import EmbeddingFileError, pretrained_or_none
from .parser import BiaffineParser, evaluate_las, train_parser
from .pipeline import (carve_dev, format_table, run_dcst, run_dcst_lm, run_experiment, run_random_gating,
                       run_self_training, trees_of)
from .synth import generate_corpus
from .tagger import TaggedCorpus, derive_tagged_corpus, lm_corpus, tag_accuracy, train_lm_tagger, train_tagger
from .training import NumericError
from .trees import SCHEMES, DepTree, TagSequence, TreeError, encode, read_tag_dump, write_tag_dump

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
OUT_ENV = "DCST_OUT_DIR"
MODEL_FILE = "model.parser"

log = logging.getLogger("dcst")


class UsageError(Exception):
    pass


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers ---------------------------------------------------------------------

def _out_dir(args, default_name: str) -> Path:
    if args.out:
        out = Path(args.out)
    elif os.environ.get(OUT_ENV):
        out = Path(os.environ[OUT_ENV]) / default_name
    else:
        raise UsageError(f"--out is required (or set {OUT_ENV})")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _setup_logging(out: Optional[Path], verbose: bool) -> None:
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
    root.setLevel(logging.INFO)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.INFO if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(console)
    if out is not None:
        fh = logging.FileHandler(out / "run.log", mode="w")
        fh.setFormatter(logging.Formatter("%(asctime)s %(name)s %(message)s"))
        root.addHandler(fh)


def _parser_config(args):
    kv = parse_kv(Path(args.config).read_text(), args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        kv[k.strip()] = v.strip()
    if getattr(args, "seed", None) is not None:
        kv["seed"] = str(args.seed)
    if getattr(args, "profile", None):
        kv["profile"] = args.profile
    return kv


def _pretrained(cfg):
    try:
        return pretrained_or_none(cfg.pretrained, cfg.word_dim)
    except EmbeddingFileError as exc:
        raise ConlluError(str(exc).split(": ", 1)[1], exc.line, cfg.pretrained) from None


def _write_run_files(out: Path, cfg, seed: int) -> None:
    (out / "config.resolved").write_text(dump_kv(cfg))
    (out / "seed").write_text(f"{seed}\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _resolve_model(path: str) -> Path:
    p = Path(path)
    if p.is_dir():
        p = p / MODEL_FILE
    if not p.exists():
        raise FileNotFoundError(f"{p}: no parser archive")
    return p


def _looks_like_conllu(text: str) -> bool:
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            return len(line.split("\t")) == 10
    return False


def _read_tagged(path: str, scheme: str) -> TaggedCorpus:
    """A tagger training file is either a CoNLL-U treebank or a two-column tag dump."""
    text = Path(path).read_text()
    if scheme == "LM":
        from .conllu import parse_conllu
        return lm_corpus(parse_conllu(text, path))
    if _looks_like_conllu(text):
        from .conllu import parse_conllu
        sents = parse_conllu(text, path)
        return derive_tagged_corpus(sents, trees_of(sents), scheme)
    pairs = read_tag_dump(text, path)
    out = []
    for forms, tags in pairs:
        sent = Sentence(tuple(Token(i + 1, f) for i, f in enumerate(forms)))
        out.append((sent, TagSequence(scheme, tuple(tags))))
    return TaggedCorpus(scheme, out)


def _scheme(name: str) -> str:
    s = name.upper()
    if s not in SCHEMES:
        raise UsageError(f"unknown scheme {name!r}; choose from {', '.join(x.lower() for x in SCHEMES)}")
    return s


# -- subcommands -----------------------------------------------------------------------

def cmd_train_base(args) -> int:
    out = _out_dir(args, "train-base")
    _setup_logging(out, args.verbose)
    cfg = build_parser_config(_parser_config(args))
    L, dev = read_conllu(args.train), read_conllu(args.dev) if args.dev else []
    model, history = train_parser(L, dev, cfg, pretrained=_pretrained(cfg), seed=cfg.seed, name="base")
    model.save(out / MODEL_FILE)
    _write_run_files(out, cfg, cfg.seed)
    metrics = {"epochs": [h.__dict__ for h in history]}
    if dev:
        rep = evaluate(trees_of(dev), model.predict(dev), [s.upos for s in dev])
        metrics["dev"] = rep.to_dict()
        print(f"dev UAS {rep.uas:.4f} LAS {rep.las:.4f}")
    _write_json(out / "metrics.json", metrics)
    return EXIT_OK


def cmd_parse(args) -> int:
    _setup_logging(None, args.verbose)
    model = BiaffineParser.load(_resolve_model(args.model))
    sents = read_conllu(args.input)
    parsed = model.parse([strip_annotations(s) if args.ignore_gold else s for s in sents])
    # keep the input's non-tree columns; only HEAD/DEPREL are replaced
    merged = [s.with_tree(p.heads, p.deprels) for s, p in zip(sents, parsed)]
    save_conllu(args.out, merged)
    return EXIT_OK


def cmd_encode_tags(args) -> int:
    scheme = _scheme(args.scheme)
    if scheme == "LM":
        raise UsageError("encode-tags supports nc, dr and rpe")
    sents = read_conllu(args.input)
    pairs = []
    for s in sents:
        if s.heads is None:
            raise ConlluError("sentence has no tree", None, args.input)
        pairs.append((s.forms, list(encode(DepTree.from_sentence(s), scheme, s.upos).tags)))
    text = write_tag_dump(pairs)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_train_tagger(args) -> int:
    out = _out_dir(args, "train-tagger")
    _setup_logging(out, args.verbose)
    scheme = _scheme(args.scheme)
    cfg = build_parser_config(_parser_config(args))
    corpus = _read_tagged(args.input, scheme)
    dev = _read_tagged(args.dev, scheme) if args.dev else None
    if scheme == "LM":
        model, history = train_lm_tagger(corpus.sentences, dev.sentences if dev else [], cfg,
                                         epochs=args.epochs, pretrained=_pretrained(cfg), seed=cfg.seed)
    else:
        model, history = train_tagger(corpus, dev, cfg, epochs=args.epochs, pretrained=_pretrained(cfg),
                                      seed=cfg.seed)
    model.save(out / f"tagger_{scheme}.tagger")
    _write_run_files(out, cfg, cfg.seed)
    metrics = {"epochs": [h.__dict__ for h in history]}
    if dev is not None:
        metrics["dev_accuracy"] = tag_accuracy(model, dev)[1]
        print(f"dev tag accuracy {metrics['dev_accuracy']:.4f}")
    _write_json(out / "metrics.json", metrics)
    return EXIT_OK


def cmd_selftrain(args) -> int:
    out = _out_dir(args, "selftrain")
    _setup_logging(out, args.verbose)
    cfg = build_parser_config(_parser_config(args))
    pre = _pretrained(cfg)
    L = read_conllu(args.labeled)
    U = [strip_annotations(s) for s in read_conllu(args.unlabeled)]
    dev = read_conllu(args.dev) if args.dev else []
    U_dev = [strip_annotations(s) for s in read_conllu(args.unlabeled_dev)] if args.unlabeled_dev else None
    if args.mode == "dcst":
        schemes = [_scheme(s) for s in args.schemes.split(",") if s.strip()]
        if not schemes or "LM" in schemes:
            raise UsageError("--schemes must list one or more of nc,dr,rpe")
        model, rep = run_dcst(L, dev, U, schemes, cfg, args.freeze, U_dev, cfg.seed, args.tagger_epochs,
                              archive_dir=out, pretrained=pre)
    elif args.mode == "lm":
        model, rep = run_dcst_lm(L, dev, U, cfg, args.freeze, U_dev, cfg.seed, args.tagger_epochs,
                                 archive_dir=out, pretrained=pre)
    elif args.mode == "classic":
        model, rep = run_self_training(L, dev, U, cfg, cfg.seed, pretrained=pre)
    else:
        model, rep = run_random_gating(L, dev, cfg, cfg.seed, freeze=args.freeze == "true", vocab_source=U,
                                       pretrained=pre)
    model.save(out / MODEL_FILE)
    _write_run_files(out, cfg, cfg.seed)
    for stage, secs in rep.timings.items():
        log.info("stage %s took %.1fs", stage, secs)
    report = {"model": rep.model, "mode": args.mode, "stages": rep.stages}
    if dev:
        ev = evaluate(trees_of(dev), model.predict(dev), [s.upos for s in dev])
        report["dev"] = ev.to_dict()
        print(f"{rep.model} dev UAS {ev.uas:.4f} LAS {ev.las:.4f}")
    _write_json(out / "report.json", report)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gold, pred = read_conllu(args.gold), read_conllu(args.pred)
    if len(gold) != len(pred):
        raise AlignmentError(f"{args.gold} has {len(gold)} sentences, {args.pred} has {len(pred)}")
    for i, (g, p) in enumerate(zip(gold, pred), start=1):
        if g.forms != p.forms:
            raise AlignmentError(f"sentence {i}: token sequences differ")
    pos = [(g if args.pos_source == "gold" else p).upos for g, p in zip(gold, pred)]
    rep = evaluate(trees_of(gold), trees_of(pred), pos)
    d = rep.to_dict()
    for k in ("uas", "las", "ad_nc", "ad_dr", "ad_pdh", "pos_head_error"):
        print(f"{k.upper():<15}{d[k]:.3f}")
    if args.out:
        _write_json(Path(args.out), rep.to_dict(per_sentence=True))
    return EXIT_OK


def cmd_experiment(args) -> int:
    kv = parse_kv(Path(args.config).read_text(), args.config)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        kv[k.strip()] = v.strip()
    if args.out:
        kv["out"] = args.out
    elif os.environ.get(OUT_ENV) and "out" not in kv:
        kv["out"] = str(Path(os.environ[OUT_ENV]) / "experiment")
    cfg: ExperimentConfig = build_experiment_config(kv)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _setup_logging(out, args.verbose)
    (out / "seed").write_text(",".join(str(s) for s in cfg.seeds) + "\n")
    records = run_experiment(cfg, out)
    sys.stdout.write(format_table(records))
    return EXIT_OK


def cmd_synth(args) -> int:
    out = _out_dir(args, "synth")
    corpus = generate_corpus(args.n, args.seed)
    save_conllu(out / "corpus.conllu", corpus)
    (out / "seed").write_text(f"{args.seed}\n")
    print(f"wrote {len(corpus)} sentences to {out / 'corpus.conllu'}")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, training: bool = True) -> None:
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    if training:
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--profile", choices=("desk", "paper"))
        p.add_argument("--seed", type=int)


def build_arg_parser() -> argparse.ArgumentParser:
    ap = _ArgParser(prog="dcst", description="Biaffine parsing with deep contextualized self-training.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_ArgParser)

    p = sub.add_parser("train-base", help="train a biaffine parser on labeled data")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_train_base)

    p = sub.add_parser("parse", help="parse a CoNLL-U file with a trained parser")
    p.add_argument("--model", required=True, help="parser archive or run directory")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ignore-gold", action="store_true", help="drop input trees before parsing")
    _common(p, training=False)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("encode-tags", help="write the tag sequences of a treebank")
    p.add_argument("--scheme", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    _common(p, training=False)
    p.set_defaults(func=cmd_encode_tags)

    p = sub.add_parser("train-tagger", help="train a sequence tagger (nc, dr, rpe or lm)")
    p.add_argument("--scheme", required=True)
    p.add_argument("--input", required=True, help="CoNLL-U trees or a two-column tag dump")
    p.add_argument("--dev")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_train_tagger)

    p = sub.add_parser("selftrain", help="DCST or one of its baselines")
    p.add_argument("--mode", choices=("dcst", "classic", "rg", "lm"), default="dcst")
    p.add_argument("--schemes", default="nc,dr,rpe")
    p.add_argument("--labeled", required=True)
    p.add_argument("--unlabeled", required=True)
    p.add_argument("--unlabeled-dev")
    p.add_argument("--dev")
    p.add_argument("--freeze", choices=("true", "false", "tune_on_dev"), default="false")
    p.add_argument("--tagger-epochs", type=int)
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_selftrain)

    p = sub.add_parser("evaluate", help="score predicted trees against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--pos-source", choices=("gold", "pred"), default="gold")
    p.add_argument("--out", help="also write the full report as JSON")
    _common(p, training=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a model comparison from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("synth-corpus", help="write a synthetic treebank")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"dcst: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"dcst: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConlluError, ArchiveError, TreeError, AlignmentError, DegenerateError, FileNotFoundError,
            IsADirectoryError, ValueError) as exc:
        print(f"dcst: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
