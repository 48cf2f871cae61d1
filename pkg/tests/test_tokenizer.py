from hypothesis import given
from hypothesis import strategies as st

from protqa.tokenizer import BOS, EOS, PAD, VOCAB_SIZE, detokenize, tokenize


def test_single_ascii_byte():
    assert tokenize("A") == [65]


def test_empty():
    assert tokenize("") == []
    assert detokenize([]) == ""


def test_multibyte_round_trip():
    s = "séq"
    assert detokenize(tokenize(s)) == s


def test_specials_stripped():
    assert detokenize([BOS, 104, 105, EOS, PAD]) == "hi"


def test_vocab_constants():
    assert (BOS, EOS, PAD) == (256, 257, 258)
    assert VOCAB_SIZE == 259


@given(st.text(max_size=200))
def test_round_trip_arbitrary_utf8(s):
    assert detokenize(tokenize(s)) == s
