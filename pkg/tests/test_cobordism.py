import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annkh.annulus_core import BraidLikeWord, Sigma, parse_word
from annkh.cobordism import (ComplexCache, Movie, MovieError, MovieStep, cable_word, cap_movie, colored_skh,
                             compile_movie, e_i_map, ei_movie, r2_map, sn_action, stabilization_maps,
                             tl_reference_matrix, word_tokens, _Builder)
from annkh.homology import homology
from annkh.linalg import QMatrix
from annkh.repr import current_action
from conftest import braid_words

UNKNOT = BraidLikeWord(1, ())
TREFOIL = parse_word("1 1 1", 2)


def test_empty_cable_slide_is_one_reindex():
    m = cap_movie(cable_word(UNKNOT, 2), 1)
    assert [s.kind for s in m.steps] == ["Saddle", "Reindex", "Death"]


def test_trefoil_cable_slide_cancels_every_crossing():
    cw = cable_word(TREFOIL, 2)
    cap = cap_movie(cw, 1)
    assert 2 * cap.counts()["R2Remove"] == len(cw.letters) == 12
    assert cap.target == BraidLikeWord(0, ())


@pytest.mark.parametrize("word,n,i", [(UNKNOT, 2, 1), (UNKNOT, 3, 2), (TREFOIL, 2, 1)])
def test_ei_movie_is_a_loop(word, n, i):
    cw = cable_word(word, n)
    m = ei_movie(cw, i)
    assert m.source == m.target == cw
    assert m.reversed().reversed() == m
    assert m.counts().get("R2Create", 0) == m.counts().get("R2Remove", 0)


def test_movie_steps_validate_targets():
    w = parse_word("1", 2)
    with pytest.raises(MovieError):
        MovieStep("Reindex", w, parse_word("-1", 2), move="cycle")
    with pytest.raises(MovieError):
        Movie(())


def test_movie_json():
    m = cap_movie(cable_word(UNKNOT, 2), 1)
    rows = m.to_json()
    assert rows[0]["kind"] == "Saddle" and rows[-1]["kind"] == "Death"
    assert word_tokens(m.source) == ""


@pytest.mark.parametrize("word,index", [(UNKNOT, 1), (parse_word("1", 2), 1), (parse_word("1", 2), 3)])
def test_death_after_birth_is_zero(word, index):
    b = _Builder(word)
    b.push("Birth", level=0, index=index)
    b.push("Death", level=0, index=index)
    cm = compile_movie(b.movie())
    for flavor in ("kh", "lee"):
        assert abs(cm.matrix(flavor)).sum() == 0


@st.composite
def r2_sites(draw):
    text, strands = draw(braid_words(max_strands=3, max_crossings=3, min_strands=2))
    small = parse_word(text, strands)
    p = draw(st.integers(0, len(small.letters)))
    a = draw(st.integers(1, strands - 1))
    sign = draw(st.sampled_from((1, -1)))
    letters = list(small.letters)
    large = BraidLikeWord(strands, tuple(letters[:p] + [Sigma(a, sign), Sigma(a, -sign)] + letters[p:]))
    return small, large, p, a


@settings(max_examples=25)
@given(r2_sites(), st.sampled_from(("kh", "lee")))
def test_r2_equivalence(site, flavor):
    small, large, p, a = site
    cache = ComplexCache()
    maps = r2_map(cache(small), cache(large), p, a, flavor, homotopy=True)
    G_F = (maps.G @ maps.F).toarray()
    assert np.array_equal(G_F, np.eye(G_F.shape[0], dtype=G_F.dtype))
    assert maps.homotopy is not None


@pytest.mark.parametrize("n", [2, 3])
def test_unknot_ei_matches_formula(n):
    act = sn_action(UNKNOT, n)
    for i, m in act.e.items():
        assert m == tl_reference_matrix(act.homology, i)
        assert act.maps[i].calibration in (1, -1)
        assert act.per_step_agrees[i]


@pytest.mark.parametrize("n", [2, 3])
def test_lee_entries_vanish_off_extendable_pairs(n):
    cw = cable_word(UNKNOT, n)
    for i in range(1, n):
        cm = e_i_map(cw, i)
        for fi, fo in itertools.product(itertools.product((False, True), repeat=n), repeat=2):
            rest = all(fi[t] == fo[t] for t in range(n) if t not in (i - 1, i))
            extends = rest and fi[i - 1] != fi[i] and fo[i - 1] != fo[i]
            assert (cm.lee_entry(fi, fo) != 0) == extends


def test_colored_two_cable_brute_force():
    act = sn_action(UNKNOT, 2)
    H = act.homology
    s = act.s[1]
    # every vector with entries in {-1, 0, 1}; invariants are those fixed by s
    fixed = [v for v in itertools.product((-1, 0, 1), repeat=H.dim)
             if s.apply({b: Fraction(x) for b, x in enumerate(v) if x}) == {b: x for b, x in enumerate(v) if x}]
    by_key: dict = {}
    for key in set(H.basis):
        idx = [b for b, k in enumerate(H.basis) if k == key]
        sub = [[v[b] for b in idx] for v in fixed if any(v[b] for b in idx)
               and all(v[c] == 0 for c in range(H.dim) if c not in idx)]
        rank = np.linalg.matrix_rank(np.array(sub)) if sub else 0
        if rank:
            by_key[key] = rank
    assert colored_skh(act) == by_key == {(0, 0, -2): 1, (0, 0, 0): 1, (0, 0, 2): 1}


def test_colored_one_cable_is_everything():
    act = sn_action(TREFOIL, 1)
    assert colored_skh(act) == act.homology.dims()


def test_symmetrizer_idempotent():
    P = sn_action(UNKNOT, 3).symmetrizer()
    assert P @ P == P


@pytest.mark.parametrize("n", [0, 1, 2])
def test_unknot_stabilization(n):
    st_ = stabilization_maps(UNKNOT, n)
    assert st_.scalar in (2, -2)
    assert st_.cup.rank() == st_.small.dim
    assert st_.composite == QMatrix.identity(st_.small.dim).scale(st_.scalar)


def test_empty_cable_unit_lands_in_trivial_summand():
    st_ = stabilization_maps(UNKNOT, 0)
    image = st_.cup.column(0)
    assert image and all(st_.large.basis[r] == (0, 0, 0) for r in image)
    M = current_action(st_.large.complex, st_.large)
    assert not M.sl2.e.apply(image) and not M.sl2.f.apply(image)


def test_cable_word_twists():
    assert cable_word(TREFOIL, 2) == cable_word(TREFOIL, 2, 6)
    assert len(cable_word(TREFOIL, 2, 7).letters) == 14
    assert cable_word(UNKNOT, 0) == BraidLikeWord(0, ())


def test_cable_with_band_twists_is_rejected():
    cw = cable_word(TREFOIL, 2, 7)
    with pytest.raises(MovieError):
        ei_movie(cw, 1)
