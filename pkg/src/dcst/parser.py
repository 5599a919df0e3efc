"""Graph-based biaffine dependency parser, optionally fused with tagger encoders."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .config import ParserConfig
from .conllu import Sentence
from .decode import decode_mst
from .encoder import Encoder
from .gating import apply_gate, init_gate_params
from .neural import archive
from .neural import tensor as T
from .neural.fused import arc_biaffine, gather_heads, label_biaffine
from .neural.layers import init_linear, linear
from .neural.params import ParameterStore, substream
from .neural.tensor import Tensor
from .neural.vocab import Vocab
from .training import EpochRecord, train_loop
from .trees import DepTree, TreeError

PARSER_KIND = "biaffine-parser"


def arc_candidates(lengths: np.ndarray, m: int) -> np.ndarray:
    """(B, m, m+1) mask of admissible heads: ROOT plus the sentence's own tokens."""
    cols = np.arange(m + 1)[None, None, :]
    return np.broadcast_to(cols <= np.asarray(lengths)[:, None, None], (len(lengths), m, m + 1))


def parse_loss(arc_scores, label_scores, heads, label_ids, mask=None, candidates=None) -> Tensor:
    """Summed head cross-entropy plus label cross-entropy given the gold heads.

    ``arc_scores`` is (..., m, m+1) over ROOT and all tokens; ``label_scores``
    is (..., m, K) computed at the gold heads.
    """
    arc = T.softmax_cross_entropy(arc_scores, heads, mask, candidates)
    lab = T.softmax_cross_entropy(label_scores, label_ids, mask)
    return arc + lab


class BiaffineParser:
    """Biaffine parser; with ``taggers`` it is the gated hybrid.

    Tagger encoders live in this model's store under ``tgr<i>.`` and can
    be frozen so that Adam never touches them.
    """

    def __init__(self, cfg: ParserConfig, encoder: Encoder, labels: Vocab,
                 taggers: Sequence[Encoder] = (), tagger_schemes: Sequence[str] = ()):
        self.cfg = cfg
        self.encoder = encoder
        self.labels = labels
        self.taggers = list(taggers)
        self.tagger_schemes = list(tagger_schemes) or ["?"] * len(self.taggers)
        self.store = ParameterStore()
        self.pinned: set[str] = set()  # stay frozen even when the taggers are fine-tuned
        d = encoder.output_dim
        if any(t.output_dim != d for t in self.taggers):
            raise ValueError("tagger encoder dims must equal the parser encoder dim")

    # -- construction ---------------------------------------------------------

    @classmethod
    def build(cls, train: Sequence[Sentence], cfg: ParserConfig, taggers: Sequence[Encoder] = (),
              tagger_schemes: Sequence[str] = (), pretrained=None, seed: Optional[int] = None) -> "BiaffineParser":
        labels = Vocab(sorted({t.deprel for s in train for t in s.tokens if t.deprel is not None}), specials=())
        if len(labels) == 0:
            labels = Vocab(["dep"], specials=())
        enc = Encoder.build("parser.enc", train, cfg, pretrained=pretrained)
        model = cls(cfg, enc, labels, taggers, tagger_schemes)
        model.init_params(cfg.seed if seed is None else seed)
        return model

    def init_params(self, seed: int) -> None:
        cfg, st = self.cfg, self.store
        d = self.encoder.output_dim
        self.encoder.init_params(st, substream(seed, "parser.enc"))
        rng = substream(seed, "parser.dec")
        st.add("parser.root", rng.normal(0.0, 1.0 / np.sqrt(d), size=d))
        init_linear(st, "parser.arc_mlp", d, cfg.arc_mlp, rng)
        init_linear(st, "parser.label_mlp", d, cfg.label_mlp, rng)
        st.add("parser.arc.U", np.zeros((cfg.arc_mlp, cfg.arc_mlp)))
        st.add("parser.arc.w", np.zeros(cfg.arc_mlp))
        K, dl = len(self.labels), cfg.label_mlp
        st.add("parser.label.U", np.zeros((K, dl, dl)))
        st.add("parser.label.W", np.zeros((K, 2 * dl)))
        st.add("parser.label.b", np.zeros(K))
        for i, enc in enumerate(self.taggers):
            enc.init_params(st, substream(seed, f"tgr{i}"))
        if self.taggers:
            init_gate_params(st, "gate", d, len(self.taggers), substream(seed, "gate"))

    def tagger_param_names(self) -> list[str]:
        return [n for enc in self.taggers for n in enc.param_names(self.store)]

    def set_tagger_frozen(self, frozen: bool) -> None:
        names = self.tagger_param_names()
        if frozen:
            self.store.freeze(names)
        else:
            self.store.unfreeze(n for n in names if n not in self.pinned)

    # -- forward ----------------------------------------------------------------

    def encode(self, sentences: Sequence[Sentence], train: bool = False, rng=None):
        p = self.cfg.dropout
        batch = self.encoder.prepare(sentences)
        h = self.encoder.forward(self.store, batch, p, train, rng)
        if self.taggers:
            hts = [enc.forward(self.store, enc.prepare(sentences), p, train, rng) for enc in self.taggers]
            h = apply_gate(self.store, "gate", h, hts)
        return h, batch

    def decoder_states(self, h: Tensor, train: bool = False, rng=None):
        st, p = self.store, self.cfg.dropout
        B = h.shape[0]
        root = T.broadcast_to(T.reshape(st["parser.root"], (1, 1, h.shape[-1])), (B, 1, h.shape[-1]))
        hr = T.concat([root, h], axis=1)  # (B, m+1, d); ROOT bypasses gating
        r = T.dropout(T.elu(linear(st, "parser.arc_mlp", hr)), p, train, rng)
        q = T.dropout(T.elu(linear(st, "parser.label_mlp", hr)), p, train, rng)
        return r, q

    def score_arcs(self, r: Tensor) -> Tensor:
        """(B, m, m+1) arc scores; column 0 is ROOT."""
        return arc_biaffine(r[:, 1:], r, self.store["parser.arc.U"], self.store["parser.arc.w"])

    def score_labels(self, q: Tensor, heads: np.ndarray) -> Tensor:
        st = self.store
        return label_biaffine(q[:, 1:], gather_heads(q, heads), st["parser.label.U"], st["parser.label.W"],
                              st["parser.label.b"])

    def gold_arrays(self, sentences: Sequence[Sentence], m: int):
        B = len(sentences)
        heads = np.zeros((B, m), dtype=np.int64)
        labels = np.zeros((B, m), dtype=np.int64)
        for b, s in enumerate(sentences):
            hs = s.heads
            if hs is None:
                raise TreeError("training sentence without heads")
            heads[b, : len(s)] = hs
            for i, t in enumerate(s.tokens):
                labels[b, i] = self.labels.stoi.get(t.deprel, 0) if t.deprel is not None else 0
        return heads, labels

    def loss(self, sentences: Sequence[Sentence], train: bool = True, rng=None) -> tuple[Tensor, int]:
        h, batch = self.encode(sentences, train, rng)
        r, q = self.decoder_states(h, train, rng)
        m = batch.shape[1]
        heads, labels = self.gold_arrays(sentences, m)
        arc = self.score_arcs(r)
        lab = self.score_labels(q, heads)
        loss = parse_loss(arc, lab, heads, labels, batch.mask, arc_candidates(batch.lengths, m))
        return loss, int(batch.lengths.sum())

    # -- inference -------------------------------------------------------------

    def predict(self, sentences: Sequence[Sentence], batch_size: int = 64) -> list[DepTree]:
        out: list[Optional[DepTree]] = [None] * len(sentences)
        order = sorted(range(len(sentences)), key=lambda i: len(sentences[i]))
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            batch_sents = [sentences[i] for i in idx]
            h, batch = self.encode(batch_sents)
            r, q = self.decoder_states(h)
            arc = self.score_arcs(r).data
            m = batch.shape[1]
            heads = np.zeros((len(idx), m), dtype=np.int64)
            for b, s in enumerate(batch_sents):
                L = len(s)
                heads[b, :L] = decode_mst(arc[b, :L, : L + 1])
            lab = self.score_labels(q, heads).data
            for b, (i, s) in enumerate(zip(idx, batch_sents)):
                L = len(s)
                out[i] = DepTree(tuple(int(x) for x in heads[b, :L]),
                                 tuple(self.labels[int(k)] for k in lab[b, :L].argmax(axis=-1)))
        return out  # type: ignore[return-value]

    def parse(self, sentences: Sequence[Sentence]) -> list[Sentence]:
        return [s.with_tree(t.heads, t.labels) for s, t in zip(sentences, self.predict(sentences))]

    # -- persistence -------------------------------------------------------------

    def header(self) -> dict:
        return {"kind": PARSER_KIND, "encoder": self.encoder.to_json(), "labels": self.labels.to_json(),
                "taggers": [t.to_json() for t in self.taggers], "tagger_schemes": self.tagger_schemes}

    def to_bytes(self, meta: Optional[dict] = None) -> bytes:
        return archive.dumps(self.store, config=self.cfg.to_dict(), vocabs=self.header(), meta=meta)

    def save(self, path, meta: Optional[dict] = None) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes(meta))

    @classmethod
    def load(cls, path) -> "BiaffineParser":
        store, header = archive.load(path)
        v = header["vocabs"]
        if v.get("kind") != PARSER_KIND:
            raise archive.ArchiveError(f"{path}: not a parser archive")
        cfg = ParserConfig(**header["config"])
        model = cls(cfg, Encoder.from_json(v["encoder"]), Vocab.from_json(v["labels"]),
                    [Encoder.from_json(t) for t in v["taggers"]], v["tagger_schemes"])
        model.store = store
        return model


def evaluate_las(model: BiaffineParser, dev: Sequence[Sentence]) -> float:
    from .metrics import uas_las
    preds = model.predict(dev)
    return uas_las([DepTree.from_sentence(s) for s in dev], preds)[1]


def fit_parser(model: BiaffineParser, train: Sequence[Sentence], dev: Sequence[Sentence],
               seed: Optional[int] = None, name: str = "parser") -> list[EpochRecord]:
    """Train ``model`` in place with early stopping on dev LAS."""
    cfg = model.cfg
    seed = cfg.seed if seed is None else seed
    rng = substream(seed, name + ".train")

    def batch_loss(batch, r):
        return model.loss(batch, train=True, rng=r)

    return train_loop(model.store, batch_loss, lambda d: evaluate_las(model, d), list(train), list(dev),
                      cfg, rng, name=name)


def train_parser(L: Sequence[Sentence], dev: Sequence[Sentence], cfg: ParserConfig, pretrained=None,
                 seed: Optional[int] = None, name: str = "parser"):
    """Base parser trained on ``L``; returns (model, history)."""
    if not L:
        raise ValueError("empty labeled training set")
    model = BiaffineParser.build(L, cfg, pretrained=pretrained, seed=seed)
    history = fit_parser(model, L, dev, seed, name)
    return model, history
