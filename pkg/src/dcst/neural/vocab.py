from __future__ import annotations

from collections import Counter
from typing import Iterable, Optional

PAD = "<PAD>"
UNK = "<UNK>"


class Vocab:
    """String <-> index map; the ``specials`` occupy the first indices.

    Lookups of unknown items return the UNK index when UNK is one of the
    specials and raise ``KeyError`` otherwise.
    """

    def __init__(self, items: Iterable[str] = (), lowercase_fallback: bool = False,
                 specials: tuple[str, ...] = (PAD, UNK)):
        self.specials = tuple(specials)
        self.itos: list[str] = list(self.specials)
        self.stoi: dict[str, int] = {s: i for i, s in enumerate(self.specials)}
        self.lowercase_fallback = lowercase_fallback
        for it in items:
            self.add(it)

    def add(self, item: str) -> int:
        if item not in self.stoi:
            self.stoi[item] = len(self.itos)
            self.itos.append(item)
        return self.stoi[item]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, item: str) -> bool:
        return item in self.stoi

    @property
    def unk_index(self) -> Optional[int]:
        return self.stoi.get(UNK) if UNK in self.specials else None

    def index(self, item: str) -> int:
        i = self.stoi.get(item)
        if i is None and self.lowercase_fallback:
            i = self.stoi.get(item.lower())
        if i is None:
            if self.unk_index is None:
                raise KeyError(item)
            return self.unk_index
        return i

    def __getitem__(self, i: int) -> str:
        return self.itos[i]

    def to_json(self) -> dict:
        return {"items": self.itos[len(self.specials):], "lowercase_fallback": self.lowercase_fallback,
                "specials": list(self.specials)}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        return cls(obj["items"], obj.get("lowercase_fallback", False), tuple(obj.get("specials", (PAD, UNK))))

    @classmethod
    def from_counts(cls, items: Iterable[str], max_size: Optional[int] = None, **kw) -> "Vocab":
        counts = Counter(items)
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if max_size is not None:
            ordered = ordered[:max_size]
        return cls((w for w, _ in ordered), **kw)
