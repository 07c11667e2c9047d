import itertools
from fractions import Fraction

import pytest
from hypothesis import given

from annkh.homology import homology
from annkh.linalg import QMatrix
from annkh.repr import (CurrentModule, GradedSl2Module, current_action, decompose_sl2, is_indecomposable,
                        reconstruct_dims, schur_bound, to_quiver, verify_current_relations)
from conftest import braid_words, complex_of


def module(text, strands):
    c = complex_of(text, strands)
    return current_action(c, homology(c, "d0"))


def beta(n):
    return " ".join(str(i) for i in range(1, n + 1)), n + 1


def test_decompose_beta_three():
    assert decompose_sl2(module(*beta(3)).sl2) == {(0, 3, 4): 1, (1, 5, 2): 1}


def test_decompose_two_trivial_strands():
    assert decompose_sl2(module("", 2).sl2) == {(0, 0, 2): 1, (0, 0, 0): 1}


def test_decompose_torus_link_two():
    assert decompose_sl2(module("-1 -1", 2).sl2) == {
        (0, -2, 2): 1, (-1, -4, 0): 1, (-2, -4, 0): 1, (-2, -6, 0): 1}


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_beta_vminus_and_indecomposable(n):
    M = module(*beta(n))
    (top,) = [b for b, key in enumerate(M.sl2.keys) if key == (0, n, n + 1)]
    image = M.vm2.column(top)
    assert image
    assert all(M.sl2.keys[r] == (1, n + 2, n - 1) for r in image)
    assert not M.sl2.e.apply(image)
    assert is_indecomposable(M)


@pytest.mark.parametrize("n", range(1, 6))
def test_torus_link_v2(n):
    M = module(" ".join(["-1"] * n), 2)
    keys = M.sl2.keys
    for b, key in enumerate(keys):
        image = M.v2.column(b)
        if key == (-1, -n - 2, 0):
            assert image and all(keys[r] == (0, -n, 2) for r in image)
        elif key[0] < 0:
            assert not image


@pytest.mark.parametrize("n", [1, 2, 3])
def test_trivial_closure_has_no_odd_action(n):
    M = module("", n)
    assert M.v2.is_zero() and M.vm2.is_zero() and M.v0.is_zero()


def test_h_v2_on_single_negative_crossing():
    M = module("-1", 2)
    assert not M.v2.is_zero()
    assert verify_current_relations(M)["[h,v2]=2v2"]


def test_zero_module():
    z = QMatrix.zeros(0, 0)
    M = CurrentModule(GradedSl2Module([], z, z, z), z, z, z)
    assert all(verify_current_relations(M).values())


@given(braid_words())
def test_current_relations_random(item):
    M = module(*item)
    rep = verify_current_relations(M)
    assert all(rep.values()), [k for k, v in rep.items() if not v]
    assert schur_bound(M.sl2, item[1])
    assert reconstruct_dims(decompose_sl2(M.sl2)) == M.sl2.dims()


@given(braid_words())
def test_quiver_relations_random(item):
    Q = to_quiver(module(*item))
    assert all(Q.relations.values()), [k for k, v in Q.relations.items() if not v]
    assert all(Q.weight_zero.values())


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_beta_quiver_arrow(n):
    Q = to_quiver(module(*beta(n)))
    arrow = Q.beta[n - 1]
    assert not arrow.is_zero()
    for r, c, _ in arrow.triplets():
        assert Q.degrees[n + 1][c][0] == 0 and Q.degrees[n - 1][r][0] == 1


def test_trivial_quiver_is_zero():
    Q = to_quiver(module("", 2))
    assert sorted(Q.spaces) == [0, 2]
    assert all(m.is_zero() for m in itertools.chain(Q.alpha.values(), Q.beta.values(), Q.p.values()))


# --- independent oracle: the free module (exterior algebra on V_(2)) x V_(n)

_AD = {"e": {0: {}, 1: {0: -2}, 2: {1: 1}}, "f": {0: {1: -1}, 1: {2: 2}, 2: {}}}
_WT = (2, 0, -2)


def _sorted_sign(seq):
    sign = 1
    for a, b in itertools.combinations(seq, 2):
        if a > b:
            sign = -sign
    return sign, tuple(sorted(seq))


def free_module(n):
    subsets = [s for r in range(4) for s in itertools.combinations(range(3), r)]
    basis = [(s, k) for s in subsets for k in range(n + 1)]
    where = {b: t for t, b in enumerate(basis)}

    def matrix(rule):
        rows = [[Fraction(0)] * len(basis) for _ in basis]
        for col, (s, k) in enumerate(basis):
            for key, x in rule(s, k):
                rows[where[key]][col] += x
        return QMatrix.from_dense(rows)

    def raising(which):
        def rule(s, k):
            for pos, a in enumerate(s):
                for b, x in _AD[which][a].items():
                    rest = s[:pos] + (b,) + s[pos + 1:]
                    if len(set(rest)) == len(rest):
                        sign, key = _sorted_sign(rest)
                        yield (key, k), sign * x
            if which == "f" and k < n:
                yield (s, k + 1), 1
            if which == "e" and k > 0:
                yield (s, k - 1), k * (n - k + 1)
        return matrix(rule)

    def wedge(a):
        def rule(s, k):
            if a not in s:
                sign, key = _sorted_sign((a,) + s)
                yield (key, k), sign
        return matrix(rule)

    weight = lambda s, k: sum(_WT[a] for a in s) + n - 2 * k  # noqa: E731
    e, f = raising("e"), raising("f")
    h = matrix(lambda s, k: [((s, k), weight(s, k))])
    keys = [(len(s), 0, weight(s, k)) for s, k in basis]
    v2, vm2 = wedge(0), wedge(2)
    return CurrentModule(GradedSl2Module(keys, e, f, h), v2, vm2, e @ vm2 - vm2 @ e)


@pytest.mark.parametrize("n", range(0, 5))
def test_free_module_quiver(n):
    M = free_module(n)
    assert M.sl2.e @ M.sl2.f - M.sl2.f @ M.sl2.e == M.sl2.h
    assert all(verify_current_relations(M).values())
    Q = to_quiver(M)
    assert all(Q.relations.values()), [k for k, v in Q.relations.items() if not v]


@pytest.mark.parametrize("n", range(1, 5))
def test_free_module_rejects_literal_coefficient(n):
    # beta alpha = -(i^2 (i+3)/4) eps^2 here with eps^2 nonzero, so the
    # coefficient i^2/(4(i+3)) cannot hold as well
    assert not to_quiver(free_module(n)).literal_coefficient
