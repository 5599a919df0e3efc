import numpy as np
import pytest

from dcst.config import ParserConfig
from dcst.synth import generate_corpus
from dcst.trees import DepTree


def tiny_config(**kw) -> ParserConfig:
    base = dict(word_dim=8, char_dim=4, char_filters=4, pos_dim=4, hidden=6, layers=1, arc_mlp=6, label_mlp=5,
                tagger_fc1=6, tagger_fc2=5, epochs=2, batch_size=8, dropout=0.0)
    base.update(kw)
    return ParserConfig.for_profile("desk", **base)


def random_heads(rng: np.random.Generator, m: int) -> list[int]:
    """Random single-root tree: visit tokens in random order, attach each to an already placed one."""
    order = rng.permutation(m) + 1
    heads = [0] * m
    for k, tok in enumerate(order):
        heads[tok - 1] = 0 if k == 0 else int(order[rng.integers(k)])
    return heads


@pytest.fixture
def cfg():
    return tiny_config()


@pytest.fixture(scope="session")
def corpus():
    return generate_corpus(60, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


STAR = DepTree((0, 1, 1, 1))
CHAIN = DepTree((0, 1, 2, 3))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
