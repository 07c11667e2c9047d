from fractions import Fraction

import pytest
from hypothesis import given

from annkh.annulus_core import closure, parse_word
from annkh.homology import (euler_audit, homology, induced_map, lee_canonical_homology, page_totals,
                            spectral_sequence, trapezoid_ok)
from annkh.linalg import QMatrix
from annkh.tqft import ChainOperator, identity, sl2_action
from conftest import braid_words, complex_of


def skh(text, strands):
    return homology(complex_of(text, strands), "d0").dims()


def test_sigma_closure():
    assert skh("1", 2) == {(0, 1, 2): 1, (0, 1, 0): 1, (0, 1, -2): 1, (1, 3, 0): 1}


def test_inverse_sigma_closure():
    assert skh("-1", 2) == {(0, -1, 2): 1, (0, -1, 0): 1, (0, -1, -2): 1, (-1, -3, 0): 1}


def test_two_trivial_strands():
    assert skh("", 2) == {(0, 0, 2): 1, (0, 0, 0): 2, (0, 0, -2): 1}


def test_projection_inverts_inclusion():
    H = homology(complex_of("1 -2 1 2", 3), "d0")
    for n in range(H.dim):
        assert H.project(H.cycle(n)) == {n: 1}


def test_sl2_relations_on_homology():
    c = complex_of("1", 2)
    H = homology(c, "d0")
    e, f, h = (induced_map(sl2_action(c, x), H) for x in "efh")
    assert e @ f - f @ e == h
    assert h @ e - e @ h == e.scale(2)


def test_vminus_on_beta_two():
    c = complex_of("1 2", 3)
    H = homology(c, "d0")
    vm2 = induced_map(c.operator("dminus"), H)
    e = induced_map(sl2_action(c, "e"), H)
    (top,) = H.indices(i=0, jp=2, k=3)
    image = vm2.column(top)
    assert image and all(H.basis[r] == (1, 4, 1) for r in image)
    assert not e.apply(image)


def test_zero_operator_induces_zero():
    c = complex_of("1 1", 2)
    H = homology(c, "d0")
    zero = ChainOperator(c, c, identity(c).matrix * 0, (0, 0, 0))
    assert induced_map(zero, H) == QMatrix.zeros(H.dim, H.dim)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_trivial_closure_sequence_degenerates(n):
    pages = spectral_sequence(complex_of("", n))
    assert pages[0]["dims"] == pages[-1]["dims"]


@pytest.mark.parametrize("n", range(1, 7))
def test_torus_link_sequence(n):
    c = complex_of(" ".join(["-1"] * n), 2)
    kh = homology(c, "full_kh").dims_by_degree()
    last = page_totals(spectral_sequence(c)[-1])
    assert last == kh


def test_trefoil_rational_khovanov_rank():
    c = complex_of("1 1 1", 2)
    kh = homology(c, "full_kh").dims_by_degree()
    # rational Khovanov homology of the trefoil has rank 4
    assert sum(kh.values()) == 4
    assert sum(page_totals(spectral_sequence(c)[-1]).values()) == 4


@pytest.mark.parametrize("text,strands,dim", [("", 1, 2), ("", 2, 4), ("1 1 1", 2, 2)])
def test_lee_dimension(text, strands, dim):
    lee = lee_canonical_homology(closure(parse_word(text, strands)))
    assert lee.homology.dim == dim


def test_lee_trefoil_even_degrees():
    lee = lee_canonical_homology(closure(parse_word("1 1 1", 2)))
    assert all(i % 2 == 0 for i in lee.homology.dims_by_degree())


@pytest.mark.parametrize("text,strands", [("", 1), ("", 2), ("1", 2), ("1 1 1", 2), ("-1 -1", 2)])
def test_e_plus_f_diagonal_on_lee_classes(text, strands):
    d = closure(parse_word(text, strands))
    lee = lee_canonical_homology(d)
    c = lee.homology.complex
    op = sl2_action(c, "e") + sl2_action(c, "f")
    induced_map(op, lee.homology)
    for n, z in enumerate(lee.cycles):
        assert set(lee.coordinates(op.apply(z))) <= {n}


@pytest.mark.parametrize("text,strands", [("1", 2), ("1 1 1", 2), ("-1 -1", 2), ("1 -2 1", 3)])
def test_khovanov_operators_commute(text, strands):
    c = complex_of(text, strands)
    K = homology(c, "full_kh")
    f = induced_map(sl2_action(c, "f"), K)
    g = induced_map(c.operator("lee_correction"), K)
    assert f @ g == g @ f


@given(braid_words())
def test_euler_and_trapezoid(item):
    c = complex_of(*item)
    H = homology(c, "d0")
    assert euler_audit(c, H)
    assert trapezoid_ok(H.dims())


@given(braid_words(min_strands=2))
def test_cyclic_rotation_invariance(item):
    text, strands = item
    toks = text.split()
    if not toks:
        return
    rotated = " ".join(toks[1:] + toks[:1])
    assert skh(text, strands) == skh(rotated, strands)


@given(braid_words())
def test_first_page_is_sutured_homology(item):
    c = complex_of(*item)
    first = spectral_sequence(c)[0]["dims"]
    sk: dict = {}
    for (i, _, k), n in homology(c, "d0").dims().items():
        sk[(i, k)] = sk.get((i, k), 0) + n
    assert first == sk
    kh = homology(c, "full_kh").dims_by_degree()
    assert page_totals(spectral_sequence(c)[-1]) == kh
