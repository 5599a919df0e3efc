import pytest
from hypothesis import given, settings, strategies as st

from dcst.conllu import ConlluError, Sentence, Token, parse_conllu, read_conllu, save_conllu, strip_annotations, write_conllu

BLOCK = (
    "# sent_id = 1\n"
    "1\tthe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n"
    "2\tdog\tdog\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
    "3\truns\trun\tVERB\t_\t_\t0\troot\t_\t_\n"
    "\n"
)


def test_three_token_block():
    [s] = parse_conllu(BLOCK)
    assert s.forms == ["the", "dog", "runs"]
    assert s.heads == [2, 3, 0]
    assert s.deprels == ["det", "nsubj", "root"]
    assert s.tokens[2].lemma == "run"


def test_range_and_empty_nodes_are_skipped():
    text = ("1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tdo\tdo\tAUX\t_\t_\t0\troot\t_\t_\n"
            "2\tn't\tnot\tPART\t_\t_\t1\tadvmod\t_\t_\n"
            "2.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n\n")
    [s] = parse_conllu(text)
    assert [t.id for t in s.tokens] == [1, 2]


def test_nine_columns_reports_line():
    bad = BLOCK.replace("2\tdog\tdog\tNOUN\t_\t_\t3\tnsubj\t_\t_", "2\tdog\tdog\tNOUN\t_\t_\t3\tnsubj\t_")
    with pytest.raises(ConlluError) as err:
        parse_conllu(bad, "x.conllu")
    assert err.value.line == 3
    assert str(err.value).startswith("x.conllu:3:")


def test_non_integer_head():
    with pytest.raises(ConlluError) as err:
        parse_conllu("1\ta\ta\tX\t_\t_\tzero\troot\t_\t_\n")
    assert err.value.line == 1


def test_head_out_of_range_rejected():
    with pytest.raises(ConlluError):
        parse_conllu("1\ta\ta\tX\t_\t_\t5\troot\t_\t_\n")


def test_write_empty_and_single():
    assert write_conllu([]) == ""
    [s] = parse_conllu(BLOCK)
    text = write_conllu([s])
    assert text.endswith("\t_\t_\n\n") and not text.endswith("\n\n\n")


def test_strip_annotations_idempotent():
    [s] = parse_conllu(BLOCK)
    u = strip_annotations(s)
    assert u.forms == s.forms and u.upos == s.upos
    assert u.heads is None and all(d is None for d in u.deprels)
    assert strip_annotations(u) == u
    one = strip_annotations(Sentence((Token(1, "x", head=0, deprel="root"),)))
    assert len(one) == 1 and one.tokens[0].head is None


def test_file_round_trip(tmp_path, corpus):
    p = tmp_path / "c.conllu"
    save_conllu(p, corpus)
    assert read_conllu(p) == corpus


_word = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc", "Zs", "Zl", "Zp")), min_size=1, max_size=6).filter(lambda w: w != "_")  # "_" means "absent" in CoNLL-U


@st.composite
def sentences(draw):
    m = draw(st.integers(1, 6))
    annotated = draw(st.booleans())
    toks = []
    root = draw(st.integers(1, m))
    for i in range(1, m + 1):
        head = None
        if annotated:
            head = 0 if i == root else draw(st.sampled_from([j for j in range(1, m + 1) if j != i]))
        toks.append(Token(i, draw(_word), draw(st.one_of(st.none(), _word)), draw(st.sampled_from(["NOUN", "VERB", None])),
                          head, draw(st.sampled_from(["dep", "root"])) if annotated else None))
    return Sentence(tuple(toks))


@settings(max_examples=150, deadline=None)
@given(st.lists(sentences(), max_size=4))
def test_parse_write_fixpoint(corpus):
    text = write_conllu(corpus)
    again = parse_conllu(text)
    assert again == corpus
    assert write_conllu(again) == text
