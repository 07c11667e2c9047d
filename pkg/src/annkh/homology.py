"""Homology of the trigraded complex, induced operators, and the k-filtration spectral sequence."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from . import linalg
from .annulus_core import AnnularDiagram
from .linalg import ComplexReducer, QMatrix
from .tqft import ChainOperator, TrigradedComplex, build_complex

FLAVORS = ("d0", "full_kh", "lee_full")


class InducedMapError(RuntimeError):
    pass


def _group_key(cx: TrigradedComplex, flavor: str):
    """Gradings preserved by the chosen differential, used to split the reduction."""
    if flavor == "d0":
        return lambda g: (int(cx.jp[g]), int(cx.k[g]))
    if flavor == "full_kh":
        return lambda g: int(cx.j[g])
    if flavor == "lee_full":
        return lambda g: int(cx.j[g]) % 4
    raise ValueError(f"unknown homology flavor {flavor!r}")


def _report_key(cx: TrigradedComplex, flavor: str, g: int):
    if flavor == "d0":
        return int(cx.i[g]), int(cx.jp[g]), int(cx.k[g])
    if flavor == "full_kh":
        return int(cx.i[g]), int(cx.j[g])
    return (int(cx.i[g]),)


@dataclass
class HomologyPresentation:
    """Homology of one differential, with a fixed basis of cycle representatives.

    ``basis[n]`` is the reporting key (trigrading for d0) of basis class n.
    """

    complex: TrigradedComplex
    flavor: str
    basis: list = field(default_factory=list)
    _reducers: dict = field(default_factory=dict, repr=False)
    _where: list = field(default_factory=list, repr=False)    # n -> (group, survivor)
    _index: dict = field(default_factory=dict, repr=False)    # (group, survivor) -> n

    @property
    def dim(self) -> int:
        return len(self.basis)

    def dims(self) -> dict:
        out: dict = {}
        for key in self.basis:
            out[key] = out.get(key, 0) + 1
        return out

    def dims_by_degree(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for key in self.basis:
            out[key[0]] = out.get(key[0], 0) + 1
        return dict(sorted(out.items()))

    def indices(self, **grading) -> list[int]:
        """Basis indices whose key matches the given named gradings (i, jp, k)."""
        names = {"d0": ("i", "jp", "k"), "full_kh": ("i", "j"), "lee_full": ("i",)}[self.flavor]
        pos = {n: p for p, n in enumerate(names)}
        return [n for n, key in enumerate(self.basis)
                if all(key[pos[name]] == val for name, val in grading.items())]

    def cycle(self, n: int) -> dict[int, Fraction]:
        group, s = self._where[n]
        return self._reducers[group].include(s)

    def project(self, vec: dict) -> dict[int, Fraction]:
        """Coordinates of the class of a cycle in the chosen basis."""
        key = _group_key(self.complex, self.flavor)
        split: dict = {}
        for g, x in vec.items():
            if x:
                split.setdefault(key(g), {})[g] = x
        out: dict[int, Fraction] = {}
        for group, part in split.items():
            red = self._reducers.get(group)
            if red is None:
                continue
            for s, x in red.project(part).items():
                out[self._index[(group, s)]] = x
        return out

    def is_cycle(self, vec: dict) -> bool:
        d = self.complex.operator(self.flavor)
        return not d.apply(vec)


def homology(cx: TrigradedComplex, differential: str = "d0") -> HomologyPresentation:
    d = cx.differential(differential)
    if not linalg.is_zero(linalg.matmul(d, d)):
        raise AssertionError(f"{differential} does not square to zero")
    key = _group_key(cx, differential)
    groups: dict = {}
    for g in range(cx.size):
        groups.setdefault(key(g), []).append(g)
    reducers = {}
    entries = []
    for group, gens in sorted(groups.items()):
        cols = linalg.column_dicts(d, gens)
        red = ComplexReducer(gens, cols)
        reducers[group] = red
        for s, g in enumerate(red.survivors):
            entries.append((_report_key(cx, differential, g), g, group, s))
    entries.sort(key=lambda e: (e[0], e[1]))
    H = HomologyPresentation(cx, differential, [e[0] for e in entries], reducers)
    H._where = [(e[2], e[3]) for e in entries]
    H._index = {w: n for n, w in enumerate(H._where)}
    return H


def _commutes(op: ChainOperator, d_src, d_tgt) -> bool:
    a = linalg.matmul(op.matrix, d_src)
    b = linalg.matmul(d_tgt, op.matrix)
    return linalg.equal(a, b) or linalg.equal(a, -b)


def induced_map(op: ChainOperator, H: HomologyPresentation, H_target: HomologyPresentation | None = None,
                check: bool = True) -> QMatrix:
    """Matrix of ``[x] -> [op x]`` in the chosen bases (rows: target basis)."""
    Ht = H if H_target is None else H_target
    if op.source is not H.complex or op.target is not Ht.complex:
        raise ValueError("operator and homology live on different complexes")
    if check and not _commutes(op, H.complex.differential(H.flavor), Ht.complex.differential(Ht.flavor)):
        raise InducedMapError("operator does not (anti)commute with the differential")
    cols = []
    for n in range(H.dim):
        image = op.apply(H.cycle(n))
        cols.append(Ht.project(image))
    return QMatrix.from_columns(Ht.dim, cols)


def sub_block(M: QMatrix, rows: list[int], cols: list[int]) -> QMatrix:
    return M.submatrix(rows, cols)


# ----------------------------------------------------- spectral sequence


def _restricted(d, src: list[int], tgt: list[int]) -> list[dict]:
    tpos = {g: n for n, g in enumerate(tgt)}
    return [dict(c) for c in linalg.column_dicts(d, src, tpos).values()]


def _apply_cols(cols: list[dict], vec: dict) -> dict:
    out: dict = {}
    for j, x in vec.items():
        for r, y in cols[j].items():
            s = out.get(r, 0) + x * y
            if s:
                out[r] = s
            else:
                out.pop(r, None)
    return out


def spectral_sequence(cx: TrigradedComplex) -> list[dict]:
    """Pages E_1, E_2, ... of the k-filtration on the full Khovanov complex.

    Page r has a differential lowering k by 2r.  Each page is reported as
    ``{"r": r, "dims": {(i, k): dim}}``; the last page is E-infinity.
    """
    d = cx.differential("full_kh")
    slices: dict[tuple[int, int], list[int]] = {}
    for g in range(cx.size):
        slices.setdefault((int(cx.i[g]), int(cx.j[g])), []).append(g)
    if cx.size == 0:
        return [{"r": 1, "dims": {}}]
    kmin, kmax = int(cx.k.min()), int(cx.k.max())
    last = max(1, (kmax - kmin) // 2 + 1)
    pages = [dict() for _ in range(last)]
    for (i, j), gens in slices.items():
        prev = slices.get((i - 1, j), [])
        nxt = slices.get((i + 1, j), [])
        d_out = _restricted(d, gens, nxt)       # C^i -> C^{i+1}
        d_in = _restricted(d, prev, gens)       # C^{i-1} -> C^i
        ks = [int(cx.k[g]) for g in gens]
        ks_prev = [int(cx.k[g]) for g in prev]
        ks_next = [int(cx.k[g]) for g in nxt]
        for r in range(1, last + 1):
            for level in sorted(set(ks)):
                dim = _page_dim(level, r, ks, ks_prev, ks_next, d_out, d_in)
                if dim:
                    key = (i, level)
                    pages[r - 1][key] = pages[r - 1].get(key, 0) + dim
    out = []
    for r, dims in enumerate(pages, start=1):
        dims = dict(sorted(dims.items()))
        if out and out[-1]["dims"] == dims and r != last:
            continue
        out.append({"r": r, "dims": dims})
    if out[-1]["r"] != last:
        out.append({"r": last, "dims": out[-1]["dims"]})
    return out


def _cycles(level: int, drop: int, ks: list[int], ks_tgt: list[int], cols: list[dict]) -> list[dict]:
    """Basis of {x in F_level : dx in F_(level - drop)}, in local coordinates."""
    dom = [n for n, k in enumerate(ks) if k <= level]
    bad = {n for n, k in enumerate(ks_tgt) if k > level - drop}
    sub = [{r: x for r, x in cols[n].items() if r in bad} for n in dom]
    return [{dom[j]: x for j, x in v.items()} for v in linalg.nullspace(sub, len(dom))]


def _page_dim(level, r, ks, ks_prev, ks_next, d_out, d_in) -> int:
    z = _cycles(level, 2 * r, ks, ks_next, d_out)
    if not z:
        return 0
    below = _cycles(level - 2, 2 * (r - 1), ks, ks_next, d_out)
    src = _cycles(level + 2 * (r - 1), 2 * (r - 1), ks_prev, ks, d_in)
    bounds = [_apply_cols(d_in, v) for v in src]
    return linalg.rank_of_columns(z) - linalg.rank_of_columns(below + bounds)


def page_totals(page: dict) -> dict[int, int]:
    out: dict[int, int] = {}
    for (i, _), n in page["dims"].items():
        out[i] = out.get(i, 0) + n
    return dict(sorted(out.items()))


# -------------------------------------------------- Lee canonical classes


@dataclass
class LeeCanonical:
    homology: HomologyPresentation
    orientations: list[tuple[bool, ...]]     # per component: reversed?
    cycles: list[dict]                       # s_o as chain vectors
    matrix: QMatrix                          # columns: s_o in homology coordinates
    vertices: list[int]
    labels: list[tuple[str, ...]]            # per circle of the oriented resolution: "a"/"b"

    def coordinates(self, vec: dict) -> dict[int, Fraction]:
        """Canonical coordinates of a Lee cycle."""
        target = self.homology.project(vec)
        x = linalg.solve(self.matrix.columns(), target)
        if x is None:
            raise AssertionError("canonical classes do not span Lee homology")
        return x

    def index(self, reversed_components: tuple[bool, ...]) -> int:
        return self.orientations.index(tuple(reversed_components))


def orientation_directions(diagram: AnnularDiagram, flips: tuple[bool, ...]) -> tuple[bool, ...]:
    return tuple(down != flips[c] for down, c in zip(diagram.node_down, diagram.node_component))


def canonical_labels(diagram: AnnularDiagram, vertex: int, down: tuple[bool, ...], res=None) -> tuple[str, ...]:
    """``a``/``b`` labels of the circles of an oriented resolution.

    A circle gets ``a`` when its orientation is counterclockwise (downward
    at its outermost node) exactly when it sits inside an even number of
    other circles.
    """
    from .annulus_core import resolve
    res = resolve(diagram, vertex) if res is None else res
    labels = []
    for c in res.circles:
        segs = set(c.segments)
        # a node with nothing of its own circle further out along its level
        outside, v = min((diagram.widths[lv] - pos, v)
                         for v in range(diagram.n_nodes) if diagram.node_segment[v] in segs
                         for lv, pos in [diagram.node_position(v)])
        ccw = down[v]
        labels.append("a" if ccw != (outside % 2 == 1) else "b")
    return tuple(labels)


def _label_vector(cx: TrigradedComplex, vertex: int, labels: tuple[str, ...]) -> dict[int, Fraction]:
    off = cx.offsets[vertex]
    m = len(labels)
    vec = {}
    for mask in range(2 ** m):
        sign = 1
        for p, lab in enumerate(labels):
            if lab == "b" and mask >> p & 1:
                sign = -sign
        vec[off + mask] = Fraction(sign)
    return vec


def lee_canonical_homology(diagram: AnnularDiagram, cx: TrigradedComplex | None = None) -> LeeCanonical:
    if not diagram.word.is_braid:
        raise ValueError("canonical Lee classes need a braid closure without turnbacks")
    cx = build_complex(diagram) if cx is None else cx
    H = homology(cx, "lee_full")
    orients, cycles, verts, labs = [], [], [], []
    for flips in itertools.product((False, True), repeat=diagram.n_components):
        down = orientation_directions(diagram, flips)
        v = diagram.oriented_vertex(down)
        lab = canonical_labels(diagram, v, down, cx.resolutions[v])
        vec = _label_vector(cx, v, lab)
        if not H.is_cycle(vec):
            raise AssertionError("canonical Lee chain is not a cycle")
        orients.append(flips)
        cycles.append(vec)
        verts.append(v)
        labs.append(lab)
    M = QMatrix.from_columns(H.dim, [H.project(c) for c in cycles])
    if M.rank() != len(cycles) or H.dim != len(cycles):
        raise AssertionError(f"Lee homology has dim {H.dim}, canonical classes rank {M.rank()}")
    return LeeCanonical(H, orients, cycles, M, verts, labs)


def lee_pairing(cx: TrigradedComplex, lee: LeeCanonical, n: int, vec: dict) -> Fraction:
    """Pairing of ``vec`` with the dual functional of canonical class n.

    On each circle <1,1> = <x,x> = 0 and <1,x> = 1, so <a,a> = 2 and
    <b,b> = -2; only the oriented vertex contributes.
    """
    v = lee.vertices[n]
    off = cx.offsets[v]
    labels = lee.labels[n]
    total = Fraction(0)
    for g, x in vec.items():
        if not off <= g < cx.offsets[v + 1]:
            continue
        mask = g - off
        term = Fraction(x)
        for p, lab in enumerate(labels):
            # <a, v_+> = <a, v_-> = 1, <b, v_+> = -1, <b, v_-> = 1
            if lab == "b" and not mask >> p & 1:
                term = -term
        total += term
    return total


def euler_audit(cx: TrigradedComplex, H: HomologyPresentation) -> bool:
    chain: dict = {}
    for (i, jp, k), idx in cx.buckets.items():
        chain[(jp, k)] = chain.get((jp, k), 0) + (-1) ** (i % 2) * len(idx)
    hom: dict = {}
    for (i, jp, k), n in H.dims().items():
        hom[(jp, k)] = hom.get((jp, k), 0) + (-1) ** (i % 2) * n
    return {k: v for k, v in chain.items() if v} == {k: v for k, v in hom.items() if v}


def trapezoid_ok(dims: dict) -> bool:
    rows: dict = {}
    for (i, jp, k), n in dims.items():
        rows.setdefault((i, jp), {})[k] = n
    for row in rows.values():
        for k, n in row.items():
            if row.get(-k, 0) != n:
                return False
            if k >= 0 and row.get(k + 2, 0) > n:
                return False
    return True


def to_json_dims(dims: dict) -> list[dict]:
    return [{"i": i, "jp": jp, "k": k, "dim": n} for (i, jp, k), n in sorted(dims.items())]


def kh_dims(cx: TrigradedComplex) -> dict[int, int]:
    return homology(cx, "full_kh").dims_by_degree()


__all__ = [
    "HomologyPresentation", "homology", "induced_map", "spectral_sequence", "lee_canonical_homology",
    "LeeCanonical", "InducedMapError", "page_totals", "trapezoid_ok", "euler_audit", "lee_pairing",
]
