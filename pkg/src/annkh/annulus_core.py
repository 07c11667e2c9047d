"""Braid-like words, their annular closures, and resolution circles.

A word lives on ``n`` strand positions numbered 1..n, position 1 being the
one closest to the annulus hole.  Reading the word top to bottom moves
counterclockwise around the annulus; the closure arcs join the bottom of
position ``t`` back to the top of position ``t`` and are the only place the
seam crosses the diagram.

Besides crossings (``Sigma``) and Temperley-Lieb turnbacks (``TL``) the
diagram layer understands bare ``Open``/``Close`` arcs, which change the
number of strands.  They only appear in intermediate diagrams produced while
compiling cobordism movies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union


@dataclass(frozen=True)
class Sigma:
    index: int
    sign: int = 1


@dataclass(frozen=True)
class TL:
    index: int


@dataclass(frozen=True)
class Open:
    """Creates a new arc whose two ends occupy positions index, index+1 below."""
    index: int


@dataclass(frozen=True)
class Close:
    """Joins the strands at positions index, index+1 coming from above."""
    index: int


Letter = Union[Sigma, TL, Open, Close]


class WordError(ValueError):
    pass


@dataclass(frozen=True)
class BraidLikeWord:
    strands: int
    letters: tuple = ()
    # one flag per top position: True means the strand runs downward
    orientation: tuple | None = None

    def __post_init__(self):
        if self.strands < 0:
            raise WordError("strand count must be non-negative")
        width = self.strands
        for letter in self.letters:
            i = letter.index
            if isinstance(letter, Open):
                if not 1 <= i <= width + 1:
                    raise WordError(f"open index {i} out of range for width {width}")
                width += 2
                continue
            if not 1 <= i <= width - 1:
                raise WordError(f"generator index {i} out of range for width {width}")
            if isinstance(letter, Sigma) and letter.sign not in (1, -1):
                raise WordError("crossing sign must be +1 or -1")
            if isinstance(letter, Close):
                width -= 2
        if width != self.strands:
            raise WordError("word does not close up: top and bottom widths differ")

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def is_braid(self) -> bool:
        return all(isinstance(x, Sigma) for x in self.letters)

    def text(self) -> str:
        if not self.is_braid:
            raise WordError("only pure crossing words have a text form")
        return " ".join(str(x.index * x.sign) for x in self.letters)


def parse_word(text: str, strands: int) -> BraidLikeWord:
    if strands < 1:
        raise WordError("strands must be at least 1")
    letters = []
    for tok in text.split():
        try:
            k = int(tok)
        except ValueError:
            raise WordError(f"not an integer: {tok!r}") from None
        if k == 0:
            raise WordError("generator index 0 is not allowed")
        if abs(k) > strands - 1:
            raise WordError(f"generator {k} out of range for {strands} strands")
        letters.append(Sigma(abs(k), 1 if k > 0 else -1))
    return BraidLikeWord(strands, tuple(letters))


def writhe(word: BraidLikeWord) -> int:
    if not word.is_braid:
        raise WordError("writhe is only defined here for crossing words")
    return sum(x.sign for x in word.letters)


def cable_block(index: int, sign: int, n: int) -> list[Sigma]:
    """The n*n crossings carrying group ``index`` across group ``index+1``.

    Strands of the left group move right one at a time, rightmost first.
    """
    base = index * n
    return [Sigma(base - r + c, sign) for r in range(n) for c in range(n)]


def full_twist(n: int, sign: int = 1) -> list[Sigma]:
    half = [Sigma(j, sign) for i in range(1, n) for j in range(i, 0, -1)]
    return half + half


def cable(word: BraidLikeWord, n: int, framing: int) -> BraidLikeWord:
    """n-cable of a knot braid word.

    Compensating full twists on the first group: ``framing - n * writhe``.
    """
    if n < 1:
        raise WordError("cable multiplicity must be at least 1")
    if not word.is_braid:
        raise WordError("cannot cable a word containing turnbacks")
    letters: list[Sigma] = []
    for x in word.letters:
        letters.extend(cable_block(x.index, x.sign, n))
    twists = framing - n * writhe(word)
    for _ in range(abs(twists)):
        letters.extend(full_twist(n, 1 if twists > 0 else -1))
    return BraidLikeWord(word.strands * n, tuple(letters))


# ---------------------------------------------------------------- diagrams


class _DSU:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


@dataclass(frozen=True)
class Crossing:
    letter: int          # position in the expanded letter list
    sign: int            # letter sign (geometry, not orientation)
    oriented_sign: int   # sign under the default orientation
    tl: int              # arc segments at the four corners
    tr: int
    bl: int
    br: int
    nodes: tuple         # (tl, tr, bl, br) node ids


@dataclass(frozen=True)
class CircleData:
    id: int
    trivial: bool
    nesting: int | None
    epsilon: int | None
    seam_hits: tuple
    segments: tuple

    @property
    def type(self) -> str:
        return "Trivial" if self.trivial else "Nontrivial"


@dataclass(frozen=True)
class Resolution:
    vertex: int
    circles: tuple          # CircleData in tensor order
    r: int
    seg_circle: tuple       # segment -> position in ``circles``

    @property
    def n_nontrivial(self) -> int:
        return sum(1 for c in self.circles if not c.trivial)


def _expand(letters: Sequence[Letter]) -> list[Letter]:
    out: list[Letter] = []
    for x in letters:
        if isinstance(x, TL):
            out.append(Close(x.index))
            out.append(Open(x.index))
        else:
            out.append(x)
    return out


class AnnularDiagram:
    """Closure of a braid-like word with a fixed seam in the closure region."""

    def __init__(self, word: BraidLikeWord):
        self.word = word
        letters = _expand(word.letters)
        self.letters = tuple(letters)
        widths = [word.strands]
        for x in letters:
            w = widths[-1]
            if isinstance(x, Open):
                w += 2
            elif isinstance(x, Close):
                w -= 2
            widths.append(w)
        self.widths = tuple(widths)
        offsets = [0]
        for w in widths:
            offsets.append(offsets[-1] + w)
        self._offsets = offsets
        self.n_nodes = offsets[-1]

        def node(p: int, t: int) -> int:
            return offsets[p] + t - 1

        # fixed connections (everything except crossing interiors); each is
        # recorded with ports: 0 = the node's upper side, 1 = its lower side
        fixed: list[tuple[int, int, int, int]] = []
        crossing_sites = []
        for p, x in enumerate(letters):
            w = widths[p]
            if isinstance(x, Sigma):
                i = x.index
                for t in range(1, w + 1):
                    if t not in (i, i + 1):
                        fixed.append((node(p, t), 1, node(p + 1, t), 0))
                crossing_sites.append((p, x))
            elif isinstance(x, Close):
                i = x.index
                fixed.append((node(p, i), 1, node(p, i + 1), 1))
                for t in range(1, w + 1):
                    if t < i:
                        fixed.append((node(p, t), 1, node(p + 1, t), 0))
                    elif t > i + 1:
                        fixed.append((node(p, t), 1, node(p + 1, t - 2), 0))
            else:
                i = x.index
                fixed.append((node(p + 1, i), 0, node(p + 1, i + 1), 0))
                for t in range(1, w + 1):
                    fixed.append((node(p, t), 1, node(p + 1, t if t < i else t + 2), 0))
        L = len(letters)
        fixed += [(node(L, t), 1, node(0, t), 0) for t in range(1, word.strands + 1)]
        self._fixed = [(a, b) for a, _, b, _ in fixed]
        self._ports = fixed

        dsu = _DSU(self.n_nodes)
        for a, b in self._fixed:
            dsu.union(a, b)
        roots = sorted({dsu.find(v) for v in range(self.n_nodes)})
        seg_of_root = {r: s for s, r in enumerate(roots)}
        self.node_segment = tuple(seg_of_root[dsu.find(v)] for v in range(self.n_nodes))
        self.n_segments = len(roots)
        hits: list[list[int]] = [[] for _ in range(self.n_segments)]
        for t in range(1, word.strands + 1):
            hits[self.node_segment[node(0, t)]].append(t)
        self.segment_hits = tuple(tuple(h) for h in hits)

        self._node = node
        self._crossing_sites = crossing_sites
        directions, comps = self._trace_orientation(crossing_sites)
        self.node_down = directions
        self.node_component = comps
        self.n_components = (max(comps) + 1) if comps else 0

        crossings = []
        for p, x in crossing_sites:
            i = x.index
            nodes = (node(p, i), node(p, i + 1), node(p + 1, i), node(p + 1, i + 1))
            a_down = directions[nodes[0]]
            b_down = directions[nodes[1]]
            osign = x.sign if a_down == b_down else -x.sign
            seg = self.node_segment
            crossings.append(Crossing(p, x.sign, osign, seg[nodes[0]], seg[nodes[1]],
                                      seg[nodes[2]], seg[nodes[3]], nodes))
        self.crossings = tuple(crossings)
        self.n_plus = sum(1 for c in crossings if c.oriented_sign > 0)
        self.n_minus = len(crossings) - self.n_plus

    # ------------------------------------------------------------ geometry

    def node(self, level: int, position: int) -> int:
        return self._node(level, position)

    def node_position(self, v: int) -> tuple[int, int]:
        for p in range(len(self.widths)):
            if v < self._offsets[p + 1]:
                return p, v - self._offsets[p] + 1
        raise IndexError(v)

    def _trace_orientation(self, crossing_sites):
        """Walk each link component from its smallest node, leaving downward."""
        link: dict[tuple[int, int], tuple[int, int]] = {}
        for a, pa, b, pb in self._ports:
            link[(a, pa)] = (b, pb)
            link[(b, pb)] = (a, pa)
        node = self._node
        for p, x in crossing_sites:
            i = x.index
            for top, bot in ((node(p, i), node(p + 1, i + 1)), (node(p, i + 1), node(p + 1, i))):
                link[(top, 1)] = (bot, 0)
                link[(bot, 0)] = (top, 1)
        down = [True] * self.n_nodes
        comp = [-1] * self.n_nodes
        ncomp = 0
        for start in range(self.n_nodes):
            if comp[start] >= 0:
                continue
            cur, out_port = start, 1
            while True:
                comp[cur] = ncomp
                down[cur] = out_port == 1
                nxt, in_port = link[(cur, out_port)]
                cur, out_port = nxt, 1 - in_port
                if cur == start:
                    break
            ncomp += 1
        return tuple(down), tuple(comp)

    # ---------------------------------------------------------- resolutions

    def vertex_from(self, vertex: Union[int, str, Sequence[int]]) -> int:
        c = len(self.crossings)
        if isinstance(vertex, int):
            if not 0 <= vertex < (1 << c):
                raise WordError("vertex out of range")
            return vertex
        bits = [int(b) for b in vertex]
        if len(bits) != c:
            raise WordError(f"vertex has length {len(bits)}, expected {c}")
        if any(b not in (0, 1) for b in bits):
            raise WordError("vertex must be a 0/1 string")
        return sum(b << i for i, b in enumerate(bits))

    def is_vertical(self, crossing: int, bit: int) -> bool:
        return (bit == 0) == (self.crossings[crossing].sign > 0)

    def oriented_vertex(self, down: Sequence[bool] | None = None) -> int:
        """Vertex of the oriented resolution for per-node directions ``down``."""
        down = self.node_down if down is None else down
        v = 0
        for ci, c in enumerate(self.crossings):
            same = down[c.nodes[0]] == down[c.nodes[1]]
            bit = 0 if (same == (c.sign > 0)) else 1
            v |= bit << ci
        return v


def _circle_groups(diagram: AnnularDiagram, v: int) -> list[list[int]]:
    dsu = _DSU(diagram.n_segments)
    for ci, c in enumerate(diagram.crossings):
        bit = (v >> ci) & 1
        if (bit == 0) == (c.sign > 0):
            dsu.union(c.tl, c.bl)
            dsu.union(c.tr, c.br)
        else:
            dsu.union(c.tl, c.tr)
            dsu.union(c.bl, c.br)
    groups: dict[int, list[int]] = {}
    for s in range(diagram.n_segments):
        groups.setdefault(dsu.find(s), []).append(s)
    return sorted(groups.values(), key=lambda g: g[0])


def classify_circles(groups: Iterable[Sequence[int]], diagram: AnnularDiagram) -> list[CircleData]:
    """Circle data in tensor order: nontrivial by nesting, then trivial by id."""
    raw = []
    for g in groups:
        hits = sorted(t for s in g for t in diagram.segment_hits[s])
        raw.append((min(g), tuple(sorted(g)), tuple(hits)))
    nontrivial = sorted((r for r in raw if len(r[2]) % 2 == 1), key=lambda r: r[2][0])
    trivial = sorted((r for r in raw if len(r[2]) % 2 == 0), key=lambda r: r[0])
    out = []
    for nest, (cid, segs, hits) in enumerate(nontrivial):
        out.append(CircleData(cid, False, nest, 1 if nest % 2 == 0 else -1, hits, segs))
    for cid, segs, hits in trivial:
        out.append(CircleData(cid, True, None, None, hits, segs))
    return out


def resolve(diagram: AnnularDiagram, vertex: Union[int, str, Sequence[int]]) -> Resolution:
    v = diagram.vertex_from(vertex)
    circles = classify_circles(_circle_groups(diagram, v), diagram)
    seg_circle = [0] * diagram.n_segments
    for pos, c in enumerate(circles):
        for s in c.segments:
            seg_circle[s] = pos
    return Resolution(v, tuple(circles), bin(v).count("1"), tuple(seg_circle))


def closure(word: BraidLikeWord) -> AnnularDiagram:
    return AnnularDiagram(word)
