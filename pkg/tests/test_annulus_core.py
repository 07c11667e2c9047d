import pytest
from hypothesis import given, strategies as st

from annkh.annulus_core import (BraidLikeWord, Sigma, WordError, cable, closure, full_twist, parse_word,
                                resolve, writhe)
from conftest import braid_words


def test_parse_empty_word():
    w = parse_word("", 3)
    assert w.strands == 3 and w.letters == ()


def test_parse_trefoil():
    assert parse_word("1 1 1", 2).letters == (Sigma(1, 1),) * 3


def test_parse_beta_three():
    assert parse_word("1 2 3", 4).letters == (Sigma(1, 1), Sigma(2, 1), Sigma(3, 1))


@pytest.mark.parametrize("text,strands", [("1 x", 2), ("0", 2), ("2", 2), ("-3", 3), ("", 0)])
def test_parse_rejects(text, strands):
    with pytest.raises(WordError):
        parse_word(text, strands)


@given(braid_words())
def test_text_round_trip(item):
    text, strands = item
    assert parse_word(parse_word(text, strands).text(), strands) == parse_word(text, strands)


def test_unknot_three_cable_is_trivial_braid():
    assert cable(parse_word("", 1), 3, 0) == BraidLikeWord(3, ())


def test_one_cable_is_identity():
    w = parse_word("1", 2)
    assert cable(w, 1, writhe(w)) == w


def test_trefoil_two_cable_counts():
    c = cable(parse_word("1 1 1", 2), 2, 6)
    assert c.strands == 4
    assert len(c.letters) == 12
    # brute force over the generated word
    assert sum(x.sign for x in c.letters) == 12


def test_framing_adds_full_twists():
    c = cable(parse_word("1 1 1", 2), 2, 7)
    assert c.letters[12:] == tuple(full_twist(2, 1))


def test_resolutions_of_sigma_closure():
    d = closure(parse_word("1", 2))
    zero, one = resolve(d, "0"), resolve(d, "1")
    assert [c.trivial for c in zero.circles] == [False, False]
    assert [c.trivial for c in one.circles] == [True]
    assert one.circles[0].epsilon is None


def test_trivial_closure_nesting():
    res = resolve(closure(parse_word("", 3)), 0)
    assert [(c.nesting, c.epsilon) for c in res.circles] == [(0, 1), (1, -1), (2, 1)]


def test_two_strand_alternating_duals():
    res = resolve(closure(parse_word("", 2)), 0)
    assert [(c.nesting, c.epsilon) for c in res.circles] == [(0, 1), (1, -1)]


def test_middle_crossing_on_four_strands():
    res = resolve(closure(parse_word("2", 4)), "1")
    assert sorted(c.trivial for c in res.circles) == [False, False, True]


@given(braid_words(), st.data())
def test_circle_invariants(item, data):
    d = closure(parse_word(*item))
    v = data.draw(st.integers(0, 2 ** len(d.crossings) - 1))
    res = resolve(d, v)
    nontrivial = [c for c in res.circles if not c.trivial]
    assert len(nontrivial) % 2 == item[1] % 2
    assert sorted(c.nesting for c in nontrivial) == list(range(len(nontrivial)))
    for c in res.circles:
        assert c.trivial == (len(c.seam_hits) % 2 == 0)
        if not c.trivial:
            assert c.epsilon == (-1) ** c.nesting
