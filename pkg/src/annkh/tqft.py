"""Trigraded annular chain complex and its chain-level operators.

Generators of a resolution are indexed by a bitmask over its circles (in
tensor order); a set bit means the circle carries the ``-`` label.  The
global index of a generator is ``offset[vertex] + mask``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from . import linalg
from .annulus_core import AnnularDiagram, Resolution, resolve

PARTS = ("d0", "dminus", "dlee0", "dleeplus")

# (flavor, delta k) -> part
_PART_OF = {("kh", 0): "d0", ("kh", -2): "dminus", ("lee", 0): "dlee0", ("lee", 2): "dleeplus"}

DEGREES = {"d0": (1, 0, 0), "dminus": (1, 2, -2), "dlee0": (1, 4, 0), "dleeplus": (1, 2, 2)}

DEFAULT_MAX_CUBE = 2 ** 20


class ResourceLimitError(RuntimeError):
    pass


def max_cube() -> int:
    raw = os.environ.get("ANNKH_MAX_CUBE")
    return int(raw) if raw else DEFAULT_MAX_CUBE


@dataclass(frozen=True)
class Generator:
    vertex: int
    labels: int
    i: int
    j: int
    jp: int
    k: int


def circle_label(c, minus: bool) -> str:
    sign = "-" if minus else "+"
    if c.trivial:
        return "w" + sign
    return ("v" if c.epsilon == 1 else "v*") + sign


class TrigradedComplex:
    """All labelled resolutions of a diagram with the four differential parts.

    ``parts[name]`` is an ``N x N`` integer matrix (rows are targets).
    """

    def __init__(self, diagram: AnnularDiagram, limit: int | None = None):
        limit = max_cube() if limit is None else limit
        ncross = len(diagram.crossings)
        if 2 ** ncross > limit:
            raise ResourceLimitError(
                f"{ncross} crossings give a cube of 2^{ncross} vertices, above the limit {limit}")
        self.diagram = diagram
        self.n_crossings = ncross
        self.resolutions: list[Resolution] = [resolve(diagram, v) for v in range(2 ** ncross)]
        offsets = [0]
        for res in self.resolutions:
            offsets.append(offsets[-1] + 2 ** len(res.circles))
        self.offsets = offsets
        self.size = offsets[-1]
        self._grade()
        self._parts = None

    @property
    def parts(self) -> dict[str, sp.csr_matrix]:
        # built on first use: movie compilation only needs resolutions for most diagrams
        if self._parts is None:
            self._parts = self._differentials()
        return self._parts

    # ----------------------------------------------------------- gradings

    def _grade(self) -> None:
        n = self.size
        vert = np.empty(n, dtype=np.int64)
        lab = np.empty(n, dtype=np.int64)
        kk = np.empty(n, dtype=np.int64)
        qq = np.empty(n, dtype=np.int64)
        rr = np.empty(n, dtype=np.int64)
        for v, res in enumerate(self.resolutions):
            lo, hi = self.offsets[v], self.offsets[v + 1]
            m = len(res.circles)
            labels = np.arange(2 ** m, dtype=np.int64)
            minus = np.zeros_like(labels)
            knt = np.zeros_like(labels)
            for p, c in enumerate(res.circles):
                bit = (labels >> p) & 1
                minus += bit
                if not c.trivial:
                    knt += 1 - 2 * bit
            vert[lo:hi] = v
            lab[lo:hi] = labels
            kk[lo:hi] = knt
            qq[lo:hi] = m - 2 * minus
            rr[lo:hi] = res.r
        d = self.diagram
        self.gen_vertex = vert
        self.gen_labels = lab
        self.k = kk
        self.i = rr - d.n_minus
        self.j = qq + rr + d.n_plus - 2 * d.n_minus
        self.jp = self.j - self.k
        buckets: dict[tuple[int, int, int], list[int]] = {}
        for idx, key in enumerate(zip(self.i.tolist(), self.jp.tolist(), self.k.tolist())):
            buckets.setdefault(key, []).append(idx)
        self.buckets = dict(sorted(buckets.items()))

    # ------------------------------------------------------ differentials

    def _edge(self, v: int, c: int):
        """Entries of the edge map v -> v + e_c, as (rows, cols, vals, flavor)."""
        return edge_map(self.resolutions[v], self.resolutions[v | (1 << c)],
                        self.diagram, c, self.offsets[v], self.offsets[v | (1 << c)])

    def _differentials(self) -> dict[str, sp.csr_matrix]:
        acc = {p: ([], [], []) for p in PARTS}
        for v in range(2 ** self.n_crossings):
            for c in range(self.n_crossings):
                if v >> c & 1:
                    continue
                for flavor, (rows, cols, vals) in self._edge(v, c).items():
                    if not len(rows):
                        continue
                    dk = self.k[rows] - self.k[cols]
                    for delta in np.unique(dk).tolist():
                        part = _PART_OF.get((flavor, delta))
                        if part is None:
                            raise AssertionError(f"unexpected k-degree {delta} in {flavor} edge map")
                        sel = dk == delta
                        acc[part][0].append(rows[sel])
                        acc[part][1].append(cols[sel])
                        acc[part][2].append(vals[sel])
        shape = (self.size, self.size)
        out = {}
        for p, (r, c, x) in acc.items():
            if r:
                out[p] = linalg.coo_build(shape, np.concatenate(r), np.concatenate(c),
                                          np.concatenate(x))
            else:
                out[p] = linalg.csr(shape)
        return out

    # ------------------------------------------------------------ access

    def generator(self, idx: int) -> Generator:
        return Generator(int(self.gen_vertex[idx]), int(self.gen_labels[idx]), int(self.i[idx]),
                         int(self.j[idx]), int(self.jp[idx]), int(self.k[idx]))

    def index(self, vertex, labels: int | str) -> int:
        v = self.diagram.vertex_from(vertex)
        res = self.resolutions[v]
        if isinstance(labels, str):
            if len(labels) != len(res.circles) or set(labels) - set("+-"):
                raise ValueError(f"label string {labels!r} does not fit {len(res.circles)} circles")
            labels = sum(1 << p for p, ch in enumerate(labels) if ch == "-")
        if not 0 <= labels < 2 ** len(res.circles):
            raise ValueError("label mask out of range")
        return self.offsets[v] + labels

    def label_text(self, idx: int) -> str:
        v = int(self.gen_vertex[idx])
        mask = int(self.gen_labels[idx])
        res = self.resolutions[v]
        circ = " ⊗ ".join(circle_label(c, bool(mask >> p & 1)) for p, c in enumerate(res.circles))
        bits = "".join(str(v >> c & 1) for c in range(self.n_crossings))
        return f"[{bits}] {circ or '1'}"

    def differential(self, which: str = "d0") -> sp.csr_matrix:
        if which in self.parts:
            return self.parts[which]
        if which == "full_kh":
            return self.parts["d0"] + self.parts["dminus"]
        if which == "lee_full":
            return sum((self.parts[p] for p in PARTS[1:]), self.parts["d0"])
        if which == "lee_correction":
            return self.parts["dlee0"] + self.parts["dleeplus"]
        raise ValueError(f"unknown differential {which!r}")

    def operator(self, which: str) -> "ChainOperator":
        m = self.differential(which)
        deg = DEGREES.get(which)
        return ChainOperator(self, self, m, deg, 1)

    def block(self, which: str, degree: int) -> sp.csr_matrix:
        """Matrix of a differential from homological degree ``degree`` to ``degree + 1``."""
        src = np.flatnonzero(self.i == degree)
        tgt = np.flatnonzero(self.i == degree + 1)
        return self.differential(which)[tgt][:, src]

    def bucket_dims(self, degree: int | None = None) -> dict:
        out = {}
        for (i, jp, k), idx in self.buckets.items():
            if degree is None:
                out[(i, jp, k)] = len(idx)
            elif i == degree:
                out[(jp, k)] = len(idx)
        return out

    def degrees(self) -> list[int]:
        return sorted({i for i, _, _ in self.buckets})

    def dump(self) -> dict:
        """JSON-ready debug dump: buckets with labels, nonzero differential triplets."""
        buckets = {}
        for (i, jp, k), idx in self.buckets.items():
            buckets[f"{i},{jp},{k}"] = [{"index": g, "label": self.label_text(g)} for g in idx]
        mats = {}
        for p, m in self.parts.items():
            coo = m.tocoo()
            mats[p] = sorted((int(r), int(c), f"{int(x)}/1") for r, c, x in zip(coo.row, coo.col, coo.data))
        return {"schema": 1, "word": self.diagram.word.text(), "strands": self.diagram.word.strands,
                "buckets": buckets, "matrices": mats}

    def dumps(self) -> str:
        return json.dumps(self.dump(), ensure_ascii=False, indent=1)


def build_complex(diagram: AnnularDiagram, limit: int | None = None) -> TrigradedComplex:
    return TrigradedComplex(diagram, limit)


# ----------------------------------------------------------- edge maps


def cube_sign(vertex: int, c: int) -> int:
    return -1 if bin(vertex & ((1 << c) - 1)).count("1") % 2 else 1


def _touched(res: Resolution, diagram: AnnularDiagram, c: int) -> list[int]:
    x = diagram.crossings[c]
    return sorted({res.seg_circle[s] for s in (x.tl, x.tr, x.bl, x.br)})


def edge_map(source: Resolution, target: Resolution, diagram: AnnularDiagram, crossing: int | None = None,
             src_offset: int = 0, tgt_offset: int = 0) -> dict:
    """Khovanov and Lee-correction entries of one cube edge, with cube sign.

    Returns ``{"kh": (rows, cols, vals), "lee": (...)}`` as int64 arrays of
    global generator indices (offsets default to 0, giving local label masks).
    """
    diff = source.vertex ^ target.vertex
    if bin(diff).count("1") != 1 or target.vertex & diff == 0:
        raise ValueError("edge_map needs cube-adjacent vertices with source bit 0 and target bit 1")
    c = diff.bit_length() - 1
    if crossing is not None and crossing != c:
        raise ValueError("crossing does not match the flipped bit")
    sign = cube_sign(source.vertex, c)
    s_touch = _touched(source, diagram, c)
    t_touch = _touched(target, diagram, c)
    m = len(source.circles)
    labels = np.arange(2 ** m, dtype=np.int64)
    base = np.zeros_like(labels)
    for p, circ in enumerate(source.circles):
        if p in s_touch:
            continue
        q = target.seg_circle[circ.segments[0]]
        base |= ((labels >> p) & 1) << q
    out = {}
    for flavor, (rows, cols) in saddle_local(labels, base, s_touch, t_touch).items():
        out[flavor] = (rows + tgt_offset, cols + src_offset, np.full(rows.shape, sign, dtype=np.int64))
    return out


def saddle_local(labels, base, s_touch, t_touch) -> dict:
    """Merge or split on label masks, all coefficients 1.

    ``base`` already carries the untouched circles into target positions.
    Returns local ``(rows, cols)`` for the Khovanov part and the Lee correction.
    """
    out: dict[str, tuple] = {}
    if len(s_touch) == 2 and len(t_touch) == 1:
        a, b = s_touch
        (t,) = t_touch
        sa = (labels >> a) & 1
        sb = (labels >> b) & 1
        keep = (sa & sb) == 0
        out["kh"] = (base[keep] | ((sa | sb)[keep] << t), labels[keep])
        both = (sa & sb) == 1
        out["lee"] = (base[both], labels[both])
    elif len(s_touch) == 1 and len(t_touch) == 2:
        (s,) = s_touch
        a, b = t_touch
        sc = (labels >> s) & 1
        plus = sc == 0
        minus = ~plus
        rows = np.concatenate([base[plus] | (1 << b), base[plus] | (1 << a),
                               base[minus] | (1 << a) | (1 << b)])
        out["kh"] = (rows, np.concatenate([labels[plus], labels[plus], labels[minus]]))
        out["lee"] = (base[minus], labels[minus])
    else:
        raise AssertionError("a saddle must merge two circles or split one")
    return out


# ---------------------------------------------------------- operators


class ChainOperator:
    """A homogeneous endomorphism (or map) of trigraded complexes."""

    def __init__(self, source: TrigradedComplex, target: TrigradedComplex, matrix, degree=None, parity: int = 0):
        self.source = source
        self.target = target
        self.matrix = matrix.tocsr()
        self.degree = degree
        self.parity = parity % 2

    def _same(self, other: "ChainOperator") -> None:
        if self.source is not other.source or self.target is not other.target:
            raise ValueError("operators act between different complexes")

    def __add__(self, other):
        self._same(other)
        deg = self.degree if self.degree == other.degree else None
        return ChainOperator(self.source, self.target, self.matrix + other.matrix, deg, self.parity)

    def __sub__(self, other):
        return self + other.scale(-1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, k: int):
        return ChainOperator(self.source, self.target, self.matrix * int(k), self.degree, self.parity)

    def __rmul__(self, k):
        return self.scale(k)

    def __matmul__(self, other: "ChainOperator"):
        if other.target is not self.source:
            raise ValueError("composition across mismatched complexes")
        deg = None
        if self.degree is not None and other.degree is not None:
            deg = tuple(a + b for a, b in zip(self.degree, other.degree))
        return ChainOperator(other.source, self.target, linalg.matmul(self.matrix, other.matrix),
                             deg, self.parity + other.parity)

    def bracket(self, other: "ChainOperator") -> "ChainOperator":
        """Super commutator ab - (-1)^{|a||b|} ba."""
        ab = self @ other
        ba = other @ self
        return ab + ba if self.parity and other.parity else ab - ba

    def is_zero(self) -> bool:
        return linalg.is_zero(self.matrix)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChainOperator):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and linalg.equal(self.matrix, other.matrix)

    __hash__ = None

    def apply(self, vec: dict[int, Fraction]) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        m = self.matrix.tocsc()
        for g, x in vec.items():
            lo, hi = m.indptr[g], m.indptr[g + 1]
            for r, y in zip(m.indices[lo:hi].tolist(), m.data[lo:hi].tolist()):
                s = out.get(r, 0) + x * y
                if s:
                    out[r] = s
                else:
                    out.pop(r, None)
        return out

    def respects_degree(self) -> bool:
        if self.degree is None:
            return True
        coo = self.matrix.tocoo()
        s, t = self.source, self.target
        di, dj, dk = self.degree
        return bool(np.all(t.i[coo.row] - s.i[coo.col] == di)
                    and np.all(t.jp[coo.row] - s.jp[coo.col] == dj)
                    and np.all(t.k[coo.row] - s.k[coo.col] == dk))


def _per_generator(cx: TrigradedComplex, rule, degree, parity=0) -> ChainOperator:
    rows, cols, vals = [], [], []
    for v, res in enumerate(cx.resolutions):
        off = cx.offsets[v]
        for mask in range(2 ** len(res.circles)):
            for tgt, coef in rule(res, mask):
                if coef:
                    rows.append(off + tgt)
                    cols.append(off + mask)
                    vals.append(coef)
    m = linalg.coo_build((cx.size, cx.size), rows, cols, vals) if rows else linalg.csr((cx.size, cx.size))
    return ChainOperator(cx, cx, m, degree, parity)


def theta(cx: TrigradedComplex) -> ChainOperator:
    """Exchange of the two boundary points: flips every nontrivial label."""
    def rule(res, mask):
        flip = sum(1 << p for p, c in enumerate(res.circles) if not c.trivial)
        return [(mask ^ flip, 1)]
    return _per_generator(cx, rule, None)


def sl2_action(cx: TrigradedComplex, which: str) -> ChainOperator:
    if which == "h":
        return ChainOperator(cx, cx, sp.diags(cx.k.astype(np.int64), format="csr", dtype=np.int64),
                             (0, 0, 0))
    if which not in ("e", "f"):
        raise ValueError(f"unknown sl2 generator {which!r}")
    raising = which == "e"

    def rule(res, mask):
        out = []
        for p, c in enumerate(res.circles):
            if c.trivial:
                continue
            minus = mask >> p & 1
            if raising and minus:
                out.append((mask ^ (1 << p), c.epsilon))
            elif not raising and not minus:
                out.append((mask ^ (1 << p), c.epsilon))
        return out
    return _per_generator(cx, rule, (0, 0, 2 if raising else -2))


def marked_point_operator(cx: TrigradedComplex, i: int) -> ChainOperator:
    n = cx.diagram.word.strands
    if not 1 <= i <= n:
        raise ValueError(f"marked point {i} outside 1..{n}")

    def rule(res, mask):
        for p, c in enumerate(res.circles):
            if i in c.seam_hits:
                return [] if mask >> p & 1 else [(mask | (1 << p), 1)]
        raise AssertionError("marked point not on any circle")
    return _per_generator(cx, rule, None)


def alternating_marked_sum(cx: TrigradedComplex) -> ChainOperator:
    n = cx.diagram.word.strands
    total = marked_point_operator(cx, 1).scale(-1)
    for i in range(2, n + 1):
        total = total + marked_point_operator(cx, i).scale((-1) ** i)
    return total


def marked_point_sign(cx: TrigradedComplex) -> int | None:
    """The global sign s with f = s * sum (-1)^i x_i, or None if neither works."""
    f = sl2_action(cx, "f")
    alt = alternating_marked_sum(cx)
    for s in (1, -1):
        if f == alt.scale(s):
            return s
    return None


def current_generators(cx: TrigradedComplex) -> dict[str, ChainOperator]:
    """Chain-level images of the dg current algebra generators."""
    return {
        "e": sl2_action(cx, "e"),
        "f": sl2_action(cx, "f"),
        "h": sl2_action(cx, "h"),
        "v2": cx.operator("dleeplus"),
        "v-2": cx.operator("dminus"),
        "d": cx.operator("d0"),
        "D": cx.operator("dlee0"),
    }


def verify_chain_relations(cx: TrigradedComplex) -> dict[str, bool]:
    d0, dm, dl0, dlp = (cx.operator(p) for p in PARTS)
    th = theta(cx)
    zero = lambda op: op.is_zero()  # noqa: E731
    rep: dict[str, bool] = {}
    rep["d0^2=0"] = zero(d0 @ d0)
    rep["dlee0^2=0"] = zero(dl0 @ dl0)
    rep["dminus^2=0"] = zero(dm @ dm)
    rep["dleeplus^2=0"] = zero(dlp @ dlp)
    rep["theta d0 = d0 theta"] = th @ d0 == d0 @ th
    rep["theta dlee0 = dlee0 theta"] = th @ dl0 == dl0 @ th
    rep["theta dminus = dleeplus theta"] = th @ dm == dlp @ th
    rep["theta^2 = 1"] = th @ th == ChainOperator(cx, cx, sp.identity(cx.size, dtype=np.int64, format="csr"))
    rep["[dminus,d0]=0"] = zero(dm.bracket(d0))
    rep["[dleeplus,dlee0]=0"] = zero(dlp.bracket(dl0))
    rep["[dleeplus,d0]=0"] = zero(dlp.bracket(d0))
    rep["[dminus,dlee0]=0"] = zero(dm.bracket(dl0))
    rep["[d0,dlee0]+[dminus,dleeplus]=0"] = zero(d0.bracket(dl0) + dm.bracket(dlp))

    g = current_generators(cx)
    e, f, h, v2, vm2, d, D = (g[x] for x in ("e", "f", "h", "v2", "v-2", "d", "D"))
    rep["[e,f]=h"] = e.bracket(f) == h
    rep["[h,e]=2e"] = h.bracket(e) == e.scale(2)
    rep["[h,f]=-2f"] = h.bracket(f) == f.scale(-2)
    rep["[e,v2]=0"] = zero(e.bracket(v2))
    rep["[f,v-2]=0"] = zero(f.bracket(vm2))
    rep["[e,v-2]=-[f,v2]"] = e.bracket(vm2) == f.bracket(v2).scale(-1)
    rep["[h,v2]=2v2"] = h.bracket(v2) == v2.scale(2)
    rep["[h,v-2]=-2v-2"] = h.bracket(vm2) == vm2.scale(-2)
    for name, y in (("e", e), ("f", f), ("h", h), ("v2", v2), ("v-2", vm2)):
        rep[f"[d,{name}]=0"] = zero(d.bracket(y))
        rep[f"[D,{name}]=0"] = zero(D.bracket(y))
    rep["[v2,v-2]+[d,D]=0"] = zero(v2.bracket(vm2) + d.bracket(D))
    rep["e = theta f theta"] = e == th @ f @ th
    rep["degrees respected"] = all(cx.operator(p).respects_degree() for p in PARTS)
    rep["f = s*sum (-1)^i x_i"] = marked_point_sign(cx) is not None
    xs = [marked_point_operator(cx, i) for i in range(1, cx.diagram.word.strands + 1)]
    full = cx.operator("full_kh")
    rep["[x_i, d] = 0"] = all(zero(x @ full - full @ x) for x in xs)
    rep["x_i^2 = 0"] = all(zero(x @ x) for x in xs)
    return rep


def identity(cx: TrigradedComplex) -> ChainOperator:
    return ChainOperator(cx, cx, sp.identity(cx.size, dtype=np.int64, format="csr"), (0, 0, 0))


def vector_text(cx: TrigradedComplex, vec: dict) -> str:
    parts = []
    for g in sorted(vec):
        parts.append(f"{linalg.qstr(vec[g])}·({cx.label_text(g)})")
    return " + ".join(parts) or "0"


def basis_vectors(cx: TrigradedComplex, indices: Iterable[int]) -> list[dict]:
    return [{g: Fraction(1)} for g in indices]
