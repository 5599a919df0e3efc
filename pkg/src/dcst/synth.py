"""Seeded synthetic treebank for desk-scale experiments.

A small template grammar over a 50-word vocabulary with UD-style head
rules. Nouns belong to hidden semantic classes (animate, place, thing)
that only surface through selectional preferences: which adjectives,
verbs and prepositions they co-occur with. Prepositional-phrase
attachment is a deterministic function of those classes (see
``pp_attaches_to_verb``), so a parser has to recover the classes to get
attachments right. Sentence lengths are kept within [3, 12].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conllu import Sentence, Token

LEXICON: dict[str, tuple[str, ...]] = {
    "DET": ("the", "a", "every", "this"),
    "ADJ": ("big", "small", "red", "old", "happy"),
    "NOUN": ("dog", "cat", "man", "woman", "park", "house", "telescope", "book", "garden", "river", "car", "city"),
    "PROPN": ("anna", "bob", "paris"),
    "VERB_T": ("sees", "likes", "finds", "takes", "builds"),
    "VERB_I": ("sleeps", "runs", "walks"),
    "ADP": ("in", "with", "near", "on", "from"),
    "ADV": ("quickly", "often", "never"),
    "PRON": ("she", "he", "it", "they"),
    "CCONJ": ("and", "or"),
    "AUX": ("will", "can"),
    "PUNCT": (".", ","),
}
NOUN_CLASS = {
    "dog": "anim", "cat": "anim", "man": "anim", "woman": "anim", "anna": "anim", "bob": "anim",
    "she": "anim", "he": "anim", "they": "anim", "it": "thing",
    "park": "place", "house": "place", "garden": "place", "river": "place", "city": "place", "paris": "place",
    "telescope": "thing", "book": "thing", "car": "thing",
}
# adjectives each class accepts
CLASS_ADJ = {"anim": ("happy", "old", "small"), "place": ("big", "old", "small"), "thing": ("big", "red", "small")}
# object classes each transitive verb accepts
VERB_OBJ = {"sees": ("anim", "place", "thing"), "likes": ("anim", "place", "thing"), "finds": ("anim", "thing"),
            "takes": ("thing",), "builds": ("place", "thing")}
# prepositions each PP-object class combines with
CLASS_PREP = {"anim": ("with", "from"), "place": ("in", "near", "from"), "thing": ("with", "on")}
MIN_LEN, MAX_LEN = 3, 12


def vocabulary() -> list[str]:
    return [w for ws in LEXICON.values() for w in ws]


@dataclass
class _Node:
    form: str
    upos: str
    deprel: str = "dep"
    deps_left: list["_Node"] = field(default_factory=list)
    deps_right: list["_Node"] = field(default_factory=list)


class _Grammar:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def pick(self, cat: str) -> str:
        ws = LEXICON[cat]
        return ws[int(self.rng.integers(len(ws)))]

    def chance(self, p: float) -> bool:
        return bool(self.rng.random() < p)

    def choose(self, items):
        return items[int(self.rng.integers(len(items)))]

    def noun_phrase(self, classes=("anim", "place", "thing"), allow_coord: bool = True) -> _Node:
        cls = self.choose(classes)
        r = self.rng.random()
        pron = [w for w in LEXICON["PRON"] if NOUN_CLASS[w] == cls]
        prop = [w for w in LEXICON["PROPN"] if NOUN_CLASS[w] == cls]
        if r < 0.15 and pron:
            head = _Node(self.choose(pron), "PRON")
        elif r < 0.3 and prop:
            head = _Node(self.choose(prop), "PROPN")
        else:
            head = _Node(self.choose([w for w in LEXICON["NOUN"] if NOUN_CLASS[w] == cls]), "NOUN")
            if self.chance(0.4):
                head.deps_left.insert(0, _Node(self.choose(CLASS_ADJ[cls]), "ADJ", "amod"))
            head.deps_left.insert(0, _Node(self.pick("DET"), "DET", "det"))
        if allow_coord and self.chance(0.12):
            other = self.noun_phrase((cls,), allow_coord=False)
            other.deprel = "conj"
            other.deps_left.insert(0, _Node(self.pick("CCONJ"), "CCONJ", "cc"))
            head.deps_right.append(other)
        return head

    def prep_phrase(self) -> tuple[str, _Node]:
        obj = self.noun_phrase(allow_coord=False)
        prep = self.choose(CLASS_PREP[NOUN_CLASS[obj.form]])
        obj.deps_left.insert(0, _Node(prep, "ADP", "case"))
        return prep, obj

    def clause(self) -> _Node:
        transitive = self.chance(0.65)
        verb = _Node(self.pick("VERB_T" if transitive else "VERB_I"), "VERB", "root")
        subj = self.noun_phrase(("anim",) if self.chance(0.85) else ("anim", "place", "thing"))
        subj.deprel = "nsubj"
        if self.chance(0.2):
            verb.deps_left.append(_Node(self.pick("ADV"), "ADV", "advmod"))
        verb.deps_left.insert(0, subj)
        if self.chance(0.2):
            verb.deps_left.insert(0, _Node(self.pick("ADV"), "ADV", "advmod"))
        if self.chance(0.25):
            verb.deps_left.append(_Node(self.pick("AUX"), "AUX", "aux"))
        last_noun: Optional[_Node] = None
        if transitive:
            obj = self.noun_phrase(VERB_OBJ[verb.form])
            obj.deprel = "obj"
            verb.deps_right.append(obj)
            last_noun = obj if obj.upos in ("NOUN", "PROPN", "PRON") else None
        n_pp = int(self.rng.choice([0, 1, 1, 2, 2]))
        for _ in range(n_pp):
            prep, pp = self.prep_phrase()
            if last_noun is None or pp_attaches_to_verb(verb.form, last_noun.form, prep, pp.form):
                pp.deprel = "obl"
                verb.deps_right.append(pp)
            else:
                pp.deprel = "nmod"
                last_noun.deps_right.append(pp)
            last_noun = pp
        if self.chance(0.7):
            verb.deps_right.append(_Node(".", "PUNCT", "punct"))
        return verb


def pp_attaches_to_verb(verb: str, noun: str, prep: str, pp_noun: str) -> bool:
    """Head rule for a PP following ``noun`` inside a clause headed by ``verb``.

    Instruments ("with" + thing) and places reached from a thing or place
    attach to the verb; companions, origins of animates and locations of
    animates attach to the noun.
    """
    c_noun, c_pp = NOUN_CLASS[noun], NOUN_CLASS[pp_noun]
    if prep == "with":
        return c_pp == "thing"
    if prep == "from":
        return c_noun != "anim"
    if prep in ("in", "near"):
        return c_noun != "anim"
    return verb in ("takes", "finds")  # "on": the book on the car vs. finds it on the car


def _linearize(root: _Node) -> tuple[list[_Node], list[int]]:
    order: list[_Node] = []
    parent: dict[int, Optional[_Node]] = {}

    def walk(node: _Node, par: Optional[_Node]):
        for d in node.deps_left:
            walk(d, node)
        parent[id(node)] = par
        order.append(node)
        for d in node.deps_right:
            walk(d, node)

    walk(root, None)
    pos = {id(n): i + 1 for i, n in enumerate(order)}
    heads = [0 if parent[id(n)] is None else pos[id(parent[id(n)])] for n in order]
    return order, heads


def generate_sentence(rng: np.random.Generator) -> Sentence:
    g = _Grammar(rng)
    while True:
        nodes, heads = _linearize(g.clause())
        if MIN_LEN <= len(nodes) <= MAX_LEN:
            break
    toks = tuple(Token(i + 1, n.form, n.form, n.upos, h, n.deprel)
                 for i, (n, h) in enumerate(zip(nodes, heads)))
    return Sentence(toks)


def generate_corpus(n: int, seed: int = 0) -> list[Sentence]:
    rng = np.random.default_rng(seed)
    return [generate_sentence(rng) for _ in range(n)]
