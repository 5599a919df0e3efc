import itertools

import numpy as np
import pytest

from conftest import CHAIN, STAR, random_heads
from dcst.trees import (DepTree, ROOT_TAG, TagSequence, TreeError, children_count, coarsen_pos, decode_rpe, depth_of,
                        encode, encode_dr, encode_nc, encode_rpe, parse_rpe, read_tag_dump, validate_tree, write_tag_dump)


def _is_tree_reference(heads):
    m = len(heads)
    if any(not 0 <= h <= m or h == i + 1 for i, h in enumerate(heads)):
        return False
    if sum(h == 0 for h in heads) != 1:
        return False
    for i in range(1, m + 1):
        seen, node = set(), i
        while node != 0:
            if node in seen:
                return False
            seen.add(node)
            node = heads[node - 1]
    return True


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_validate_tree_exhaustive(m):
    for heads in itertools.product(range(m + 1), repeat=m):
        if any(h == i + 1 for i, h in enumerate(heads)):
            continue
        assert validate_tree(heads).ok == _is_tree_reference(heads), heads


def test_validate_examples():
    assert validate_tree([0]).ok
    assert validate_tree([2, 0, 2]).ok
    res = validate_tree([2, 1])
    kinds = {v.kind: v.indices for v in res.violations}
    assert kinds == {"no_root": (), "cycle": (1, 2)}
    assert {v.kind for v in validate_tree([0, 0, 1]).violations} == {"multi_root"}
    assert validate_tree([4, 0]).violations[0].kind == "range"


def test_deptree_rejects_invalid():
    with pytest.raises(TreeError):
        DepTree((2, 1))


def test_children_and_depth():
    t = DepTree((2, 0, 2))
    assert children_count(t, 2) == 2 and children_count(t, 1) == 0
    assert [depth_of(t, i) for i in (1, 2, 3)] == [2, 1, 2]
    assert [depth_of(CHAIN, i) for i in (1, 2, 3, 4)] == [1, 2, 3, 4]
    with pytest.raises(IndexError):
        children_count(t, 4)


def test_nc_dr_examples():
    assert encode_nc(DepTree((2, 0, 2))).tags == ("0", "2", "0")
    assert encode_nc(DepTree((0,))).tags == ("0",)
    assert encode_nc(STAR).tags == ("3", "0", "0", "0")
    assert encode_dr(DepTree((2, 0, 2))).tags == ("2", "1", "2")
    assert encode_dr(DepTree((0, 1, 2))).tags == ("1", "2", "3")
    assert encode_dr(STAR).tags == ("1", "2", "2", "2")


def test_coarsen():
    assert coarsen_pos("NOUN") == "N"
    assert coarsen_pos("PROPN") == "PN"
    assert coarsen_pos("AUX") == "V"
    assert coarsen_pos("DET") == "DET"
    assert coarsen_pos("PUNCT") == "PU"
    assert coarsen_pos("NOUN", {"NOUN": "X"}) == "X"


def test_rpe_examples():
    assert encode_rpe(DepTree((2, 3, 0)), ["DET", "NOUN", "VERB"]).tags == ("N@1", "V@1", ROOT_TAG)
    assert encode_rpe(DepTree((2, 0, 2)), ["PROPN", "VERB", "PROPN"]).tags == ("V@1", "ROOT@0", "V@-1")
    assert decode_rpe(("N@1", "V@1", ROOT_TAG), ["DET", "NOUN", "VERB"]).heads == (2, 3, 0)
    assert parse_rpe("DET@-3") == ("DET", -3)
    with pytest.raises(ValueError):
        parse_rpe("nonsense")


def test_rpe_decode_failure_falls_back_to_root():
    dec = decode_rpe(["V@2", ROOT_TAG], ["NOUN", "VERB"])
    assert dec.heads == (0, 0) and dec.failed == (True, False) and dec.any_failed


def test_rpe_decode_does_not_validate():
    dec = decode_rpe([ROOT_TAG] * 3, ["X", "Y", "Z"])
    assert dec.heads == (0, 0, 0) and not dec.any_failed
    assert not validate_tree(dec.heads).ok


def test_codec_properties_random(rng):
    tags6 = ["NOUN", "VERB", "DET", "ADJ", "ADP", "PUNCT"]
    for _ in range(300):
        m = int(rng.integers(1, 16))
        tree = DepTree(random_heads(rng, m))
        pos = [tags6[i] for i in rng.integers(6, size=m)]
        rpe = encode_rpe(tree, pos)
        assert decode_rpe(rpe, pos).heads == tree.heads
        assert all(abs(parse_rpe(t)[1]) <= m - 1 for t in rpe.tags)
        nc = encode_nc(tree)
        assert sum(int(t) for t in nc.tags) == m - 1
        dr = [int(t) for t in encode_dr(tree).tags]
        assert dr.count(1) == 1
        for i, h in enumerate(tree.heads):
            if h:
                assert dr[i] == dr[h - 1] + 1


def test_encode_dispatch():
    assert encode(STAR, "NC") == encode_nc(STAR)
    with pytest.raises(TreeError):
        encode(STAR, "RPE")
    with pytest.raises(ValueError):
        encode(STAR, "LM")
    with pytest.raises(ValueError):
        TagSequence("XX", ())


def test_tag_dump_round_trip():
    pairs = [(["a", "b"], ["1", "2"]), (["c"], ["ROOT@0"])]
    text = write_tag_dump(pairs)
    assert text == "a\t1\nb\t2\n\nc\tROOT@0\n\n"
    assert read_tag_dump(text) == pairs
