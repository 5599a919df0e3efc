"""Input embedding plus stacked BiLSTM: the unit transplanted from taggers into hybrids."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .config import ParserConfig
from .neural import tensor as T
from .neural.layers import InputBatch, InputEmbedder, bilstm_encode, build_vocabs, init_bilstm
from .neural.params import ParameterStore
from .neural.tensor import Tensor
from .neural.vocab import Vocab


class Encoder:
    def __init__(self, prefix: str, embedder: InputEmbedder, hidden: int, layers: int, directional: bool = False):
        self.prefix = prefix
        self.embedder = embedder
        self.hidden = hidden
        self.layers = layers
        self.directional = directional

    @classmethod
    def build(cls, prefix: str, sentences: Sequence, cfg: ParserConfig, directional: bool = False,
              pretrained: Optional[tuple[np.ndarray, Vocab]] = None) -> "Encoder":
        words, chars, pos = build_vocabs(sentences)
        table = None
        if pretrained is not None:
            table, words = pretrained
        emb = InputEmbedder(prefix + ".emb", words, chars, pos, cfg.word_dim, cfg.char_dim, cfg.char_filters,
                            cfg.pos_dim, cfg.max_chars, pretrained=table)
        return cls(prefix, emb, cfg.hidden, cfg.layers, directional)

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden

    def param_names(self, store: ParameterStore) -> list[str]:
        return store.names(self.prefix + ".")

    def init_params(self, store: ParameterStore, rng) -> None:
        self.embedder.init_params(store, rng)
        init_bilstm(store, self.prefix + ".lstm", self.embedder.output_dim, self.hidden, self.layers, rng)

    def prepare(self, sentences: Sequence) -> InputBatch:
        return self.embedder.prepare(sentences)

    def forward(self, store: ParameterStore, batch: InputBatch, dropout: float = 0.0, train: bool = False,
                rng=None) -> Tensor:
        f = T.dropout(self.embedder.forward(store, batch), dropout, train, rng)
        h = bilstm_encode(store, self.prefix + ".lstm", f, batch.lengths, self.layers, dropout, train, rng,
                          directional=self.directional)
        return T.dropout(h, dropout, train, rng)

    def to_json(self) -> dict:
        e = self.embedder
        return {"prefix": self.prefix, "hidden": self.hidden, "layers": self.layers,
                "directional": self.directional, "vocabs": e.vocab_json(),
                "dims": [e.word_dim, e.char_dim, e.char_filters, e.pos_dim, e.max_chars]}

    @classmethod
    def from_json(cls, obj: dict, prefix: Optional[str] = None) -> "Encoder":
        prefix = obj["prefix"] if prefix is None else prefix
        v = obj["vocabs"]
        wd, cd, cf, pd, mc = obj["dims"]
        emb = InputEmbedder(prefix + ".emb", Vocab.from_json(v["words"]), Vocab.from_json(v["chars"]),
                            Vocab.from_json(v["pos"]), wd, cd, cf, pd, mc)
        return cls(prefix, emb, obj["hidden"], obj["layers"], obj["directional"])

    def renamed(self, prefix: str) -> "Encoder":
        return Encoder.from_json(self.to_json(), prefix)
