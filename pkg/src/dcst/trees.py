"""Dependency trees and the word-level tagging schemes derived from them.

Heads are 1-based token positions with 0 denoting ROOT, exactly as in
CoNLL-U. Three tree-to-tag codecs are provided: number of children (NC),
distance from the root (DR) and relative POS-based encoding (RPE).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

SCHEMES = ("NC", "DR", "RPE", "LM")
ROOT_TAG = "ROOT@0"

# UD tags; language-specific tagsets supply their own table with the same categories.
DEFAULT_COARSE_POS: dict[str, str] = {
    "NOUN": "N",
    "PROPN": "PN",
    "VERB": "V",
    "AUX": "V",
    "ADJ": "J",
    "PUNCT": "PU",
    "SYM": "PU",
}


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    kind: str  # "no_root" | "multi_root" | "cycle" | "range"
    indices: tuple[int, ...]

    def __str__(self):
        return f"{self.kind}: {list(self.indices)}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_tree(heads: Sequence[int]) -> ValidationResult:
    """Check single-rootedness and that every token reaches ROOT."""
    m = len(heads)
    bad = tuple(i + 1 for i, h in enumerate(heads) if not 0 <= h <= m)
    if bad:
        return ValidationResult((Violation("range", bad),))
    violations = []
    roots = tuple(i + 1 for i, h in enumerate(heads) if h == 0)
    if not roots:
        violations.append(Violation("no_root", ()))
    elif len(roots) > 1:
        violations.append(Violation("multi_root", roots))
    # 0 unvisited, 1 on current walk, 2 reaches ROOT, 3 does not
    state = [0] * (m + 1)
    state[0] = 2
    in_cycle: set[int] = set()
    for start in range(1, m + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            in_cycle.update(path[path.index(node):])
            outcome = 3
        else:
            outcome = state[node]
        for p in path:
            state[p] = outcome
    if in_cycle:
        violations.append(Violation("cycle", tuple(sorted(in_cycle))))
    return ValidationResult(tuple(violations))


@dataclass(frozen=True)
class DepTree:
    heads: tuple[int, ...]
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.heads):
                raise TreeError("labels and heads differ in length")
        res = validate_tree(self.heads)
        if not res.ok:
            raise TreeError("invalid tree: " + "; ".join(map(str, res.violations)))

    def __len__(self):
        return len(self.heads)

    @classmethod
    def from_sentence(cls, sent) -> "DepTree":
        heads = sent.heads
        if heads is None:
            raise TreeError("sentence has unannotated tokens")
        labels = sent.deprels
        return cls(tuple(heads), None if any(l is None for l in labels) else tuple(labels))


@dataclass(frozen=True)
class TagSequence:
    scheme: str
    tags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "tags", tuple(self.tags))

    def __len__(self):
        return len(self.tags)


def _check_pos(tree: DepTree, i: int):
    if not 1 <= i <= len(tree.heads):
        raise IndexError(f"position {i} outside 1..{len(tree.heads)}")


def children_count(tree: DepTree, i: int) -> int:
    _check_pos(tree, i)
    return sum(1 for h in tree.heads if h == i)


def _depths(heads: Sequence[int]) -> list[int]:
    m = len(heads)
    depth = [0] * (m + 1)
    for start in range(1, m + 1):
        path = []
        node = start
        while node != 0 and depth[node] == 0:
            path.append(node)
            node = heads[node - 1]
        d = depth[node]
        for p in reversed(path):
            d += 1
            depth[p] = d
    return depth[1:]


def depth_of(tree: DepTree, i: int) -> int:
    _check_pos(tree, i)
    return _depths(tree.heads)[i - 1]


def encode_nc(tree: DepTree) -> TagSequence:
    counts = [0] * (len(tree.heads) + 1)
    for h in tree.heads:
        counts[h] += 1
    return TagSequence("NC", tuple(str(c) for c in counts[1:]))


def encode_dr(tree: DepTree) -> TagSequence:
    return TagSequence("DR", tuple(str(d) for d in _depths(tree.heads)))


def coarsen_pos(upos: str, table: Optional[Mapping[str, str]] = None) -> str:
    table = DEFAULT_COARSE_POS if table is None else table
    return table.get(upos, upos)


def format_rpe(pos: str, offset: int) -> str:
    return f"{pos}@{offset}"


def parse_rpe(tag: str) -> tuple[str, int]:
    pos, sep, off = tag.rpartition("@")
    if not sep:
        raise ValueError(f"malformed RPE tag {tag!r}")
    return pos, int(off)


def encode_rpe(tree: DepTree, pos: Sequence[str], table: Optional[Mapping[str, str]] = None) -> TagSequence:
    m = len(tree.heads)
    if len(pos) != m:
        raise TreeError("POS sequence length does not match the tree")
    coarse = [coarsen_pos(p, table) for p in pos]
    tags = []
    for i, h in enumerate(tree.heads, start=1):
        if h == 0:
            tags.append(ROOT_TAG)
            continue
        p = coarse[h - 1]
        if h > i:
            k = sum(1 for j in range(i + 1, h + 1) if coarse[j - 1] == p)
        else:
            k = -sum(1 for j in range(h, i) if coarse[j - 1] == p)
        tags.append(format_rpe(p, k))
    return TagSequence("RPE", tuple(tags))


@dataclass(frozen=True)
class RpeDecoding:
    heads: tuple[int, ...]
    failed: tuple[bool, ...]

    @property
    def any_failed(self) -> bool:
        return any(self.failed)


def decode_rpe(tags: TagSequence | Sequence[str], pos: Sequence[str],
               table: Optional[Mapping[str, str]] = None) -> RpeDecoding:
    """Invert :func:`encode_rpe`. The result is not validated as a tree.

    Tags whose referenced occurrence does not exist decode to head 0 and
    are flagged in ``failed``.
    """
    tag_list = tags.tags if isinstance(tags, TagSequence) else tuple(tags)
    m = len(tag_list)
    if len(pos) != m:
        raise TreeError("POS sequence length does not match the tags")
    coarse = [coarsen_pos(p, table) for p in pos]
    heads, failed = [], []
    for i, tag in enumerate(tag_list, start=1):
        try:
            p, e = parse_rpe(tag)
        except ValueError:
            heads.append(0)
            failed.append(True)
            continue
        if e == 0:
            heads.append(0)
            failed.append(p != "ROOT")
            continue
        step = 1 if e > 0 else -1
        need = abs(e)
        j = i + step
        found = 0
        while 1 <= j <= m:
            if coarse[j - 1] == p:
                need -= 1
                if need == 0:
                    found = j
                    break
            j += step
        heads.append(found)
        failed.append(found == 0)
    return RpeDecoding(tuple(heads), tuple(failed))


def encode(tree: DepTree, scheme: str, pos: Optional[Sequence[str]] = None,
           table: Optional[Mapping[str, str]] = None) -> TagSequence:
    if scheme == "NC":
        return encode_nc(tree)
    if scheme == "DR":
        return encode_dr(tree)
    if scheme == "RPE":
        if pos is None:
            raise TreeError("RPE encoding needs POS tags")
        return encode_rpe(tree, pos, table)
    raise ValueError(f"scheme {scheme!r} is not a tree encoding")


def write_tag_dump(pairs) -> str:
    """Two-column dump: form TAB tag, blank line between sentences."""
    lines = []
    for forms, tags in pairs:
        if len(forms) != len(tags):
            raise ValueError("forms and tags differ in length")
        lines.extend(f"{f}\t{t}" for f, t in zip(forms, tags))
        lines.append("")
    return "\n".join(lines) + ("\n" if lines else "")


def read_tag_dump(text: str, source: str = "<string>") -> list[tuple[list[str], list[str]]]:
    from .conllu import ConlluError
    out, forms, tags = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            if forms:
                out.append((forms, tags))
                forms, tags = [], []
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ConlluError("expected 2 tab-separated columns", lineno, source)
        forms.append(cols[0])
        tags.append(cols[1])
    if forms:
        out.append((forms, tags))
    return out
