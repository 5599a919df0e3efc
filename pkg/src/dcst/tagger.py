"""BiLSTM sequence taggers trained on tags derived from automatic parses.

A scheme tagger (NC, DR, RPE) decodes each encoder state with two
FC + ELU + dropout layers and a softmax over the tag vocabulary. The LM
tagger uses a direction-separated encoder whose forward half predicts the
next word and backward half the previous word.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import ParserConfig
from .conllu import Sentence
from .encoder import Encoder
from .neural import archive
from .neural import tensor as T
from .neural.layers import init_linear, linear
from .neural.params import ParameterStore, substream
from .neural.tensor import Tensor
from .neural.vocab import PAD, UNK, Vocab
from .training import EpochRecord, train_loop
from .trees import SCHEMES, DepTree, TagSequence, encode

TAGGER_KIND = "sequence-tagger"


@dataclass
class TaggedCorpus:
    scheme: str
    pairs: list[tuple[Sentence, TagSequence]]

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        for s, t in self.pairs:
            if t.scheme != self.scheme:
                raise ValueError("mixed schemes in a tagged corpus")
            if len(t) != len(s):
                raise ValueError("tag sequence length differs from sentence length")

    def __len__(self):
        return len(self.pairs)

    @property
    def sentences(self) -> list[Sentence]:
        return [s for s, _ in self.pairs]

    def tag_vocab(self) -> Vocab:
        """Tags seen here plus an UNK class for tags unseen at training time."""
        return Vocab.from_counts((tag for _, t in self.pairs for tag in t.tags), specials=(UNK,))


def derive_tagged_corpus(U: Sequence[Sentence], auto_trees: Sequence[DepTree], scheme: str,
                         table=None) -> TaggedCorpus:
    if len(U) != len(auto_trees):
        raise ValueError(f"{len(U)} sentences but {len(auto_trees)} trees")
    pairs = []
    for s, tree in zip(U, auto_trees):
        if len(tree) != len(s):
            raise ValueError("tree length differs from sentence length")
        pairs.append((s, encode(tree, scheme, s.upos, table)))
    return TaggedCorpus(scheme, pairs)


def lm_corpus(U: Sequence[Sentence]) -> TaggedCorpus:
    return TaggedCorpus("LM", [(s, TagSequence("LM", tuple(s.forms))) for s in U])


class SequenceTagger:
    def __init__(self, cfg: ParserConfig, scheme: str, encoder: Encoder, tags: Vocab):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.cfg = cfg
        self.scheme = scheme
        self.encoder = encoder
        self.tags = tags
        self.store = ParameterStore()

    @property
    def is_lm(self) -> bool:
        return self.scheme == "LM"

    @classmethod
    def build(cls, corpus: TaggedCorpus, cfg: ParserConfig, pretrained=None,
              seed: Optional[int] = None) -> "SequenceTagger":
        sents = corpus.sentences
        enc = Encoder.build("enc", sents, cfg, directional=corpus.scheme == "LM", pretrained=pretrained)
        if corpus.scheme == "LM":
            tags = Vocab.from_counts((f for s in sents for f in s.forms), max_size=cfg.lm_vocab)
        else:
            tags = corpus.tag_vocab()
        model = cls(cfg, corpus.scheme, enc, tags)
        model.init_params(cfg.seed if seed is None else seed)
        return model

    def init_params(self, seed: int) -> None:
        cfg, st = self.cfg, self.store
        self.encoder.init_params(st, substream(seed, f"tagger.{self.scheme}.enc"))
        rng = substream(seed, f"tagger.{self.scheme}.dec")
        K = len(self.tags)
        if self.is_lm:
            init_linear(st, "dec.next", cfg.hidden, K, rng)
            init_linear(st, "dec.prev", cfg.hidden, K, rng)
        else:
            init_linear(st, "dec.fc1", self.encoder.output_dim, cfg.tagger_fc1, rng)
            init_linear(st, "dec.fc2", cfg.tagger_fc1, cfg.tagger_fc2, rng)
            init_linear(st, "dec.out", cfg.tagger_fc2, K, rng)

    # -- forward ----------------------------------------------------------------

    def logits(self, sentences: Sequence[Sentence], train: bool = False, rng=None):
        p = self.cfg.dropout
        batch = self.encoder.prepare(sentences)
        h = self.encoder.forward(self.store, batch, p, train, rng)
        st = self.store
        if self.is_lm:
            H = self.encoder.hidden
            return (linear(st, "dec.next", h[..., :H]), linear(st, "dec.prev", h[..., H:])), batch
        z = T.dropout(T.elu(linear(st, "dec.fc1", h)), p, train, rng)
        z = T.dropout(T.elu(linear(st, "dec.fc2", z)), p, train, rng)
        return linear(st, "dec.out", z), batch

    def _tag_ids(self, tag_seqs: Sequence[TagSequence], m: int) -> np.ndarray:
        ids = np.zeros((len(tag_seqs), m), dtype=np.int64)
        for b, t in enumerate(tag_seqs):
            ids[b, : len(t)] = [self.tags.index(x) for x in t.tags]
        return ids

    def _lm_targets(self, sentences: Sequence[Sentence], m: int):
        B = len(sentences)
        words = np.zeros((B, m), dtype=np.int64)
        for b, s in enumerate(sentences):
            words[b, : len(s)] = [self.tags.index(f) for f in s.forms]
        lengths = np.array([len(s) for s in sentences])
        nxt = np.zeros_like(words)
        prv = np.zeros_like(words)
        nxt[:, :-1] = words[:, 1:]
        prv[:, 1:] = words[:, :-1]
        t = np.arange(m)[None, :]
        nmask = t < (lengths[:, None] - 1)
        pmask = (t >= 1) & (t < lengths[:, None])
        return nxt, nmask, prv, pmask

    def lm_candidates(self, shape) -> np.ndarray:
        cand = np.ones(shape, dtype=bool)
        cand[..., self.tags.stoi[PAD]] = False
        return cand

    def loss(self, pairs: Sequence[tuple[Sentence, TagSequence]], train: bool = True,
             rng=None) -> tuple[Tensor, int]:
        sents = [s for s, _ in pairs]
        out, batch = self.logits(sents, train, rng)
        m = batch.shape[1]
        if self.is_lm:
            fwd, bwd = out
            nxt, nmask, prv, pmask = self._lm_targets(sents, m)
            cand = self.lm_candidates(fwd.shape)
            loss = (T.softmax_cross_entropy(fwd, nxt, nmask, cand)
                    + T.softmax_cross_entropy(bwd, prv, pmask, cand))
            return loss, int(nmask.sum() + pmask.sum())
        gold = self._tag_ids([t for _, t in pairs], m)
        return T.softmax_cross_entropy(out, gold, batch.mask), int(batch.lengths.sum())

    # -- inference ---------------------------------------------------------------

    def predict_tags(self, sentences: Sequence[Sentence], batch_size: int = 64) -> list[list[str]]:
        """Predicted tag per token; for the LM tagger the predicted next word."""
        out: list = [None] * len(sentences)
        for start in range(0, len(sentences), batch_size):
            chunk = sentences[start:start + batch_size]
            logits, _ = self.logits(chunk)
            if self.is_lm:
                z = np.where(self.lm_candidates(logits[0].shape), logits[0].data, -np.inf)
            else:
                z = logits.data
            best = z.argmax(axis=-1)
            for b, s in enumerate(chunk):
                out[start + b] = [self.tags[int(k)] for k in best[b, : len(s)]]
        return out

    def _lm_correct(self, sentences: Sequence[Sentence], batch_size: int = 64) -> list[tuple[int, int]]:
        res = []
        for start in range(0, len(sentences), batch_size):
            chunk = sentences[start:start + batch_size]
            (fwd, bwd), batch = self.logits(chunk)
            m = batch.shape[1]
            nxt, nmask, prv, pmask = self._lm_targets(chunk, m)
            cand = self.lm_candidates(fwd.shape)
            pf = np.where(cand, fwd.data, -np.inf).argmax(-1)
            pb = np.where(cand, bwd.data, -np.inf).argmax(-1)
            ok = ((pf == nxt) & nmask).sum(1) + ((pb == prv) & pmask).sum(1)
            tot = nmask.sum(1) + pmask.sum(1)
            res.extend(zip(ok.tolist(), tot.tolist()))
        return res

    # -- persistence -------------------------------------------------------------

    def header(self) -> dict:
        return {"kind": TAGGER_KIND, "scheme": self.scheme, "encoder": self.encoder.to_json(),
                "tags": self.tags.to_json()}

    def to_bytes(self, meta: Optional[dict] = None) -> bytes:
        return archive.dumps(self.store, config=self.cfg.to_dict(), vocabs=self.header(), meta=meta)

    def save(self, path, meta: Optional[dict] = None) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes(meta))

    @classmethod
    def load(cls, path) -> "SequenceTagger":
        store, header = archive.load(path)
        v = header["vocabs"]
        if v.get("kind") != TAGGER_KIND:
            raise archive.ArchiveError(f"{path}: not a tagger archive")
        model = cls(ParserConfig(**header["config"]), v["scheme"], Encoder.from_json(v["encoder"]),
                    Vocab.from_json(v["tags"]))
        model.store = store
        return model


def tag_accuracy(model: SequenceTagger, corpus: TaggedCorpus) -> tuple[list[float], float]:
    """Per-sentence token accuracy and the micro-average.

    LM taggers are scored on next- and previous-word prediction together;
    single-token sentences have no LM targets and score NaN.
    """
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    if corpus.scheme != model.scheme:
        raise ValueError(f"scheme mismatch: model {model.scheme}, corpus {corpus.scheme}")
    if model.is_lm:
        counts = model._lm_correct(corpus.sentences)
        per = [ok / tot if tot else float("nan") for ok, tot in counts]
        total = sum(t for _, t in counts)
        return per, (sum(o for o, _ in counts) / total if total else float("nan"))
    preds = model.predict_tags(corpus.sentences)
    per, ok, tot = [], 0, 0
    for (s, gold), pred in zip(corpus.pairs, preds):
        c = sum(1 for a, b in zip(gold.tags, pred) if a == b)
        per.append(c / len(gold))
        ok += c
        tot += len(gold)
    return per, ok / tot


def fit_tagger(model: SequenceTagger, corpus: TaggedCorpus, dev: Optional[TaggedCorpus],
               epochs: Optional[int] = None, seed: Optional[int] = None,
               name: Optional[str] = None) -> list[EpochRecord]:
    cfg = model.cfg
    seed = cfg.seed if seed is None else seed
    name = name or f"tagger.{model.scheme}"
    rng = substream(seed, name + ".train")

    def evaluate(dev_pairs):
        return tag_accuracy(model, TaggedCorpus(model.scheme, list(dev_pairs)))[1]

    return train_loop(model.store, lambda b, r: model.loss(b, True, r), evaluate, corpus.pairs,
                      dev.pairs if dev is not None else [], cfg, rng, epochs=epochs, name=name)


def train_tagger(corpus: TaggedCorpus, dev: Optional[TaggedCorpus], cfg: ParserConfig, epochs: Optional[int] = None,
                 pretrained=None, seed: Optional[int] = None):
    """Scheme tagger trained with early stopping on dev tag accuracy; returns (model, history)."""
    if len(corpus) == 0:
        raise ValueError("empty tagged corpus")
    model = SequenceTagger.build(corpus, cfg, pretrained=pretrained, seed=seed)
    return model, fit_tagger(model, corpus, dev, epochs, seed)


def train_lm_tagger(U: Sequence[Sentence], dev: Sequence[Sentence], cfg: ParserConfig,
                    epochs: Optional[int] = None, pretrained=None, seed: Optional[int] = None):
    if not U:
        raise ValueError("empty unlabeled corpus")
    corpus = lm_corpus(U)
    model = SequenceTagger.build(corpus, cfg, pretrained=pretrained, seed=seed)
    return model, fit_tagger(model, corpus, lm_corpus(dev) if dev else None, epochs, seed)
