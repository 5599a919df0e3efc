"""CoNLL-U reading and writing.

Only the basic-tree columns are retained (ID, FORM, LEMMA, UPOS, HEAD,
DEPREL). Multiword-token ranges and empty nodes are skipped.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional


class ConlluError(ValueError):
    """Malformed CoNLL-U input. ``line`` is 1-based, or None for structural errors."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<string>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Token:
    id: int
    form: str
    lemma: Optional[str] = None
    upos: Optional[str] = None
    head: Optional[int] = None
    deprel: Optional[str] = None


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        m = len(self.tokens)
        if m == 0:
            raise ConlluError("empty sentence")
        for i, tok in enumerate(self.tokens, start=1):
            if tok.id != i:
                raise ConlluError(f"token ids must be 1..{m} without gaps, got {tok.id} at position {i}")
            if tok.head is not None and not (0 <= tok.head <= m and tok.head != tok.id):
                raise ConlluError(f"token {tok.id}: head {tok.head} out of range or self-loop")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def upos(self) -> list[str]:
        return [t.upos if t.upos is not None else "_" for t in self.tokens]

    @property
    def heads(self) -> Optional[list[int]]:
        """Heads if every token is annotated, else None."""
        hs = [t.head for t in self.tokens]
        return None if any(h is None for h in hs) else hs

    @property
    def deprels(self) -> list[Optional[str]]:
        return [t.deprel for t in self.tokens]

    def with_tree(self, heads: Iterable[int], deprels: Optional[Iterable[str]] = None) -> "Sentence":
        heads = list(heads)
        deprels = list(deprels) if deprels is not None else [None] * len(heads)
        if len(heads) != len(self.tokens) or len(deprels) != len(self.tokens):
            raise ValueError("tree length does not match sentence length")
        return Sentence(tuple(replace(t, head=int(h), deprel=d)
                              for t, h, d in zip(self.tokens, heads, deprels)))


def _opt(field: str) -> Optional[str]:
    return None if field == "_" else field


def parse_conllu(text: str, source: str = "<string>") -> list[Sentence]:
    sentences: list[Sentence] = []
    block: list[Token] = []
    block_start = 0

    def flush():
        nonlocal block
        if block:
            try:
                sentences.append(Sentence(tuple(block)))
            except ConlluError as exc:
                raise ConlluError(str(exc).split(": ", 1)[-1], block_start, source) from None
            block = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 tab-separated columns, got {len(cols)}", lineno, source)
        tid = cols[0]
        if "-" in tid or "." in tid:
            continue
        if not block:
            block_start = lineno
        try:
            idx = int(tid)
        except ValueError:
            raise ConlluError(f"non-integer ID {tid!r}", lineno, source) from None
        head_field = cols[6]
        if head_field == "_":
            head = None
        else:
            try:
                head = int(head_field)
            except ValueError:
                raise ConlluError(f"non-integer HEAD {head_field!r}", lineno, source) from None
        block.append(Token(idx, cols[1], _opt(cols[2]), _opt(cols[3]), head, _opt(cols[7])))
    flush()
    return sentences


def read_conllu(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as f:
        return parse_conllu(f.read(), source=str(path))


def _field(value) -> str:
    return "_" if value is None else str(value)


def write_conllu(sentences: Iterable[Sentence]) -> str:
    out = []
    for sent in sentences:
        for t in sent.tokens:
            out.append("\t".join([str(t.id), t.form, _field(t.lemma), _field(t.upos), "_", "_",
                                  _field(t.head), _field(t.deprel), "_", "_"]))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def save_conllu(path, sentences: Iterable[Sentence]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_conllu(sentences))


def strip_annotations(sent: Sentence) -> Sentence:
    return Sentence(tuple(replace(t, head=None, deprel=None) for t in sent.tokens))
