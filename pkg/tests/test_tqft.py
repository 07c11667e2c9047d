from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from annkh.tqft import (PARTS, ResourceLimitError, alternating_marked_sum, build_complex, marked_point_operator,
                        sl2_action, theta, verify_chain_relations)
from annkh.annulus_core import closure, parse_word
from conftest import braid_words, complex_of


def entry(op, cx, src, tgt):
    return op.apply({src: Fraction(1)}).get(tgt, 0)


def test_sigma_closure_buckets():
    c = complex_of("1", 2)
    assert c.bucket_dims(0) == {(1, 2): 1, (1, 0): 2, (1, -2): 1}
    assert c.bucket_dims(1) == {(1, 0): 1, (3, 0): 1}
    assert np.linalg.matrix_rank(c.block("d0", 0).toarray()) == 1


def test_inverse_sigma_closure_buckets():
    c = complex_of("-1", 2)
    assert c.bucket_dims(-1) == {(-1, 0): 1, (-3, 0): 1}
    assert c.bucket_dims(0) == {(-1, 2): 1, (-1, 0): 2, (-1, -2): 1}
    assert np.linalg.matrix_rank(c.block("d0", -1).toarray()) == 1


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_trivial_closure_single_bucket(n):
    c = complex_of("", n)
    assert {(i, jp) for i, jp, _ in c.buckets} == {(0, 0)}
    assert c.size == 2 ** n
    assert all(c.operator(p).is_zero() for p in PARTS)


def test_merge_of_nontrivial_circles():
    c = complex_of("1", 2)
    d0, dm = c.operator("d0"), c.operator("dminus")
    pm, mp, pp = c.index("0", "+-"), c.index("0", "-+"), c.index("0", "++")
    wm, wp = c.index("1", "-"), c.index("1", "+")
    assert entry(d0, c, pm, wm) == 1 and entry(d0, c, mp, wm) == 1
    assert d0.apply({pp: 1}) == {}
    assert dm.apply({pp: Fraction(1)}) == {wp: 1}


def test_lee_split_into_nontrivial_circles():
    c = complex_of("-1", 2)
    wm = c.index("0", "-")
    assert c.operator("dleeplus").apply({wm: Fraction(1)}) == {c.index("1", "++"): 1}


def test_theta_examples():
    one = complex_of("", 1)
    assert theta(one).apply({one.index(0, "+"): 1}) == {one.index(0, "-"): 1}
    two = complex_of("", 2)
    assert theta(two).apply({two.index(0, "+-"): 1}) == {two.index(0, "-+"): 1}
    c = complex_of("1", 2)
    assert theta(c).apply({c.index("1", "+"): 1}) == {c.index("1", "+"): 1}


def test_sl2_on_two_trivial_strands():
    c = complex_of("", 2)
    f = sl2_action(c, "f")
    assert f.apply({c.index(0, "++"): Fraction(1)}) == {c.index(0, "-+"): 1, c.index(0, "+-"): -1}
    e, h = sl2_action(c, "e"), sl2_action(c, "h")
    assert e.bracket(f) == h
    assert h.bracket(e) == e.scale(2)
    assert h.bracket(f) == f.scale(-2)


def test_weights_on_one_strand():
    c = complex_of("", 1)
    h = sl2_action(c, "h")
    assert h.apply({c.index(0, "+"): 1}) == {c.index(0, "+"): 1}
    assert h.apply({c.index(0, "-"): 1}) == {c.index(0, "-"): -1}


def test_marked_point_on_one_strand():
    c = complex_of("", 1)
    x = marked_point_operator(c, 1)
    assert x.apply({c.index(0, "+"): 1}) == {c.index(0, "-"): 1}
    assert x.apply({c.index(0, "-"): 1}) == {}


def test_marked_points_give_f_on_two_strands():
    c = complex_of("", 2)
    f, alt = sl2_action(c, "f"), alternating_marked_sum(c)
    assert f == alt or f == alt.scale(-1)


@pytest.mark.parametrize("text,strands", [("1", 2), ("1 1 1", 2), ("", 3), ("1 -2 1 2", 3)])
def test_chain_relations_examples(text, strands):
    rep = verify_chain_relations(complex_of(text, strands))
    assert all(rep.values()), [k for k, v in rep.items() if not v]


@given(braid_words())
def test_chain_relations_random(item):
    rep = verify_chain_relations(complex_of(*item))
    assert all(rep.values()), [k for k, v in rep.items() if not v]


@given(braid_words())
def test_theta_is_involution_and_swaps_weights(item):
    c = complex_of(*item)
    th = theta(c)
    assert (th @ th).matrix.diagonal().tolist() == [1] * c.size
    coo = th.matrix.tocoo()
    assert np.all(c.k[coo.row] == -c.k[coo.col])


def test_resource_guard():
    with pytest.raises(ResourceLimitError):
        build_complex(closure(parse_word("1 1 1", 2)), limit=4)


def test_resource_guard_from_environment(monkeypatch):
    monkeypatch.setenv("ANNKH_MAX_CUBE", "2")
    with pytest.raises(ResourceLimitError):
        build_complex(closure(parse_word("1 1", 2)))
