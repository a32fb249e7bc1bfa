import string
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from soaccept.porter import porter_stem

PAIRS_FILE = Path(__file__).parent / "data" / "porter_pairs.txt"


def load_pairs():
    pairs = []
    for line in PAIRS_FILE.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, stem = line.split("\t")
        pairs.append((word, stem))
    return pairs


@pytest.mark.parametrize("word,expected", load_pairs())
def test_frozen_vocabulary(word, expected):
    assert porter_stem(word) == expected


def test_key_examples():
    assert porter_stem("coming") == "come"
    assert porter_stem("sky") == "sky"
    assert porter_stem("caresses") == "caress"
    assert porter_stem("relational") == "relat"


def test_short_words_unchanged():
    for w in ("a", "is", "as", "be", "js", "io"):
        assert porter_stem(w) == w


def test_not_idempotent_in_general():
    # double application over-strips; the pipeline must stem exactly once
    once = porter_stem("indeed")
    assert once == "inde"
    assert porter_stem(once) != once


@given(st.text(alphabet=string.ascii_lowercase, min_size=1, max_size=20))
def test_stem_stays_lowercase_alpha_and_never_grows_much(word):
    stem = porter_stem(word)
    assert stem
    assert stem.islower() and stem.isalpha()
    # rules only append at most one letter relative to what they removed
    assert len(stem) <= len(word) + 1
