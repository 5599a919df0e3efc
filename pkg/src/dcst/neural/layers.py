"""Layers shared by the parser and the taggers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .fused import char_cnn, lstm_direction
from .params import ParameterStore, glorot, lstm_init, normal_embedding
from .tensor import Tensor
from .vocab import Vocab


def init_linear(store: ParameterStore, prefix: str, fan_in: int, fan_out: int, rng) -> None:
    store.add(prefix + ".W", glorot(rng, fan_in, fan_out))
    store.add(prefix + ".b", np.zeros(fan_out))


def linear(store: ParameterStore, prefix: str, x) -> Tensor:
    return T.affine(x, store[prefix + ".W"], store[prefix + ".b"])


def lstm_step(x, h_prev, c_prev, W_ih, W_hh, b):
    """Single LSTM cell step from primitives; gate order i, f, g, o."""
    H = T.as_tensor(W_hh).shape[0]
    z = T.add(T.add(T.matmul(x, W_ih), T.matmul(h_prev, W_hh)), b)
    i = T.sigmoid(z[..., 0:H])
    f = T.sigmoid(z[..., H:2 * H])
    g = T.tanh(z[..., 2 * H:3 * H])
    o = T.sigmoid(z[..., 3 * H:4 * H])
    c = f * c_prev + i * g
    h = o * T.tanh(c)
    return h, c


def init_bilstm(store: ParameterStore, prefix: str, input_dim: int, hidden: int, n_layers: int, rng) -> None:
    if n_layers < 1:
        raise ValueError("a BiLSTM needs at least one layer")
    d = input_dim
    for layer in range(n_layers):
        for direction in ("fwd", "bwd"):
            W_ih, W_hh, b = lstm_init(rng, d, hidden)
            p = f"{prefix}.l{layer}.{direction}"
            store.add(p + ".W_ih", W_ih)
            store.add(p + ".W_hh", W_hh)
            store.add(p + ".b", b)
        d = 2 * hidden


def bilstm_encode(store: ParameterStore, prefix: str, x, lengths, n_layers: int, dropout: float = 0.0,
                  train: bool = False, rng=None, directional: bool = False) -> Tensor:
    """Stacked BiLSTM; returns (B, T, 2H).

    With ``directional`` set, layer l+1's forward pass only sees layer l's
    forward half (and likewise backward), so the forward state at t never
    depends on tokens after t. Parameter shapes are unchanged.
    """
    xf = xb = x
    out = None
    for layer in range(n_layers):
        p = f"{prefix}.l{layer}"
        fwd = lstm_direction(xf, lengths, store[p + ".fwd.W_ih"], store[p + ".fwd.W_hh"], store[p + ".fwd.b"])
        bwd = lstm_direction(xb, lengths, store[p + ".bwd.W_ih"], store[p + ".bwd.W_hh"], store[p + ".bwd.b"],
                             reverse=True)
        out = T.concat([fwd, bwd], axis=-1)
        if layer + 1 < n_layers:
            out = T.dropout(out, dropout, train, rng)
            if directional:
                H = fwd.shape[-1]
                zeros = np.zeros(fwd.shape[:-1] + (H,))
                xf = T.concat([out[..., :H], zeros], axis=-1)
                xb = T.concat([zeros, out[..., H:]], axis=-1)
            else:
                xf = xb = out
    return out


@dataclass
class InputBatch:
    word_ids: np.ndarray   # (B, m)
    pos_ids: np.ndarray    # (B, m)
    pos_mask: np.ndarray   # (B, m) bool, false where POS is absent
    char_ids: np.ndarray   # (B*m, L)
    char_mask: np.ndarray  # (B*m, L)
    lengths: np.ndarray    # (B,)
    mask: np.ndarray       # (B, m) bool

    @property
    def shape(self):
        return self.word_ids.shape


class InputEmbedder:
    """f_t = [word; char-CNN; POS] for every token."""

    def __init__(self, prefix: str, words: Vocab, chars: Vocab, pos: Vocab, word_dim: int, char_dim: int,
                 char_filters: int, pos_dim: int, max_chars: int = 30, pretrained: Optional[np.ndarray] = None):
        self.prefix = prefix
        self.words, self.chars, self.pos = words, chars, pos
        self.word_dim, self.char_dim, self.char_filters, self.pos_dim = word_dim, char_dim, char_filters, pos_dim
        self.max_chars = max_chars
        self.pretrained = pretrained

    @property
    def output_dim(self) -> int:
        return self.word_dim + self.char_filters + self.pos_dim

    def init_params(self, store: ParameterStore, rng) -> None:
        p = self.prefix
        if self.pretrained is not None:
            if self.pretrained.shape != (len(self.words), self.word_dim):
                raise ValueError("pre-trained table does not match the word vocabulary")
            store.add(p + ".word", self.pretrained)
            store.freeze([p + ".word"])
        else:
            store.add(p + ".word", normal_embedding(rng, len(self.words), self.word_dim))
        store.add(p + ".char", normal_embedding(rng, len(self.chars), self.char_dim))
        store.add(p + ".pos", normal_embedding(rng, len(self.pos), self.pos_dim))
        store.add(p + ".cnn.W", glorot(rng, 3 * self.char_dim, self.char_filters))
        store.add(p + ".cnn.b", np.zeros(self.char_filters))

    def vocab_json(self) -> dict:
        return {"words": self.words.to_json(), "chars": self.chars.to_json(), "pos": self.pos.to_json()}

    def prepare(self, sentences: Sequence) -> InputBatch:
        B = len(sentences)
        m = max(len(s) for s in sentences)
        word_ids = np.zeros((B, m), dtype=np.int64)
        pos_ids = np.zeros((B, m), dtype=np.int64)
        pos_mask = np.zeros((B, m), dtype=bool)
        L = max(1, min(self.max_chars, max(len(t.form) for s in sentences for t in s.tokens)))
        char_ids = np.zeros((B, m, L), dtype=np.int64)
        char_mask = np.zeros((B, m, L), dtype=bool)
        char_mask[:, :, 0] = True
        lengths = np.array([len(s) for s in sentences], dtype=np.int64)
        for b, s in enumerate(sentences):
            for i, t in enumerate(s.tokens):
                word_ids[b, i] = self.words.index(t.form)
                if t.upos is not None and t.upos != "_":
                    pos_ids[b, i] = self.pos.index(t.upos)
                    pos_mask[b, i] = True
                form = t.form[: self.max_chars]
                for c, ch in enumerate(form):
                    char_ids[b, i, c] = self.chars.index(ch)
                char_mask[b, i, : max(1, len(form))] = True
        mask = np.arange(m)[None, :] < lengths[:, None]
        return InputBatch(word_ids, pos_ids, pos_mask, char_ids.reshape(B * m, L),
                          char_mask.reshape(B * m, L), lengths, mask)

    def forward(self, store: ParameterStore, batch: InputBatch) -> Tensor:
        p = self.prefix
        B, m = batch.shape
        w = T.embedding_lookup(store[p + ".word"], batch.word_ids)
        ce = T.embedding_lookup(store[p + ".char"], batch.char_ids)
        c = char_cnn(ce, batch.char_mask, store[p + ".cnn.W"], store[p + ".cnn.b"])
        c = T.reshape(c, (B, m, self.char_filters))
        pe = T.embedding_lookup(store[p + ".pos"], batch.pos_ids) * batch.pos_mask[..., None].astype(float)
        return T.concat([w, c, pe], axis=-1) * batch.mask[..., None].astype(float)


def build_vocabs(sentences: Sequence, max_words: Optional[int] = None) -> tuple[Vocab, Vocab, Vocab]:
    words = Vocab.from_counts((t.form for s in sentences for t in s.tokens), max_size=max_words,
                              lowercase_fallback=True)
    chars = Vocab.from_counts(ch for s in sentences for t in s.tokens for ch in t.form)
    pos = Vocab.from_counts(t.upos for s in sentences for t in s.tokens if t.upos not in (None, "_"))
    return words, chars, pos
