"""Chain maps of annular movies, the symmetric group action on cables, and
stabilization.

Each movie step relates two diagrams that agree outside a small window of
one or two letters.  Arc segments outside the window are matched through
node coordinates, which carries every untouched circle of every resolution
across; the window itself contributes a saddle, a birth, a death, or
nothing.  Runs of planar isotopies are fused into one relabelling before any
complex is built, so only diagrams on either side of a genuine cobordism
step are ever resolved.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import linalg
from .annulus_core import (AnnularDiagram, BraidLikeWord, Close, Open, Sigma, WordError, cable,
                           writhe)
from .homology import HomologyPresentation, canonical_labels, homology, orientation_directions
from .linalg import QMatrix
from .repr import current_action
from .tqft import TrigradedComplex, saddle_local

FLAVORS = ("kh", "lee")
_DIFF = {"kh": "full_kh", "lee": "lee_full"}
KINDS = ("Reindex", "Saddle", "Birth", "Death", "R2Create", "R2Remove")


class MovieError(ValueError):
    """A movie step is malformed or a slide gets stuck."""


class ChainMapError(AssertionError):
    """A compiled map does not commute with the differentials."""


# ------------------------------------------------------------- words


def _word(strands: int, letters) -> BraidLikeWord:
    return BraidLikeWord(strands, tuple(letters))


def _letters(word: BraidLikeWord) -> list:
    return list(AnnularDiagram(word).letters) if any(
        not isinstance(x, (Sigma, Open, Close)) for x in word.letters) else list(word.letters)


def _widths(strands: int, letters) -> list[int]:
    out = [strands]
    for x in letters:
        out.append(out[-1] + (2 if isinstance(x, Open) else -2 if isinstance(x, Close) else 0))
    return out


def word_tokens(word: BraidLikeWord) -> str:
    """Space separated tokens: signed crossing indices, ``o<i>`` opens, ``c<i>`` closes."""
    out = []
    for x in _letters(word):
        if isinstance(x, Sigma):
            out.append(str(x.index * x.sign))
        else:
            out.append(("o" if isinstance(x, Open) else "c") + str(x.index))
    return " ".join(out)


def cable_word(word: BraidLikeWord, n: int, framing: int | None = None) -> BraidLikeWord:
    """n-cable with blackboard framing by default; n = 0 is the empty diagram."""
    if n == 0:
        return BraidLikeWord(0, ())
    if framing is None:
        framing = n * writhe(word)
    return cable(word, n, framing)


def _commute_pair(x, y, side: int = 1):
    """Letters at consecutive levels swapped by a far commutation, or None.

    A close followed by an open in the same gap is ambiguous; ``side`` +1
    puts the new arc to the left of the old one, -1 to the right.
    """
    X, Y = type(x), type(y)
    a, j = x.index, y.index
    if X is Sigma and Y is Sigma:
        return (y, x) if abs(a - j) >= 2 else None
    if X is Open and Y is Sigma:
        if j + 1 < a:
            return y, x
        if j > a + 1:
            return Sigma(j - 2, y.sign), x
        return None
    if X is Open and Y is Close:
        if j + 1 < a:
            return y, Open(a - 2)
        if j > a + 1:
            return Close(j - 2), x
        return None
    if X is Sigma and Y is Close:
        if j + 1 < a:
            return y, Sigma(a - 2, x.sign)
        if j > a + 1:
            return y, x
        return None
    if X is Sigma and Y is Open:
        if j <= a:
            return y, Sigma(a + 2, x.sign)
        if j >= a + 2:
            return y, x
        return None
    if X is Close and Y is Sigma:
        if j + 1 < a:
            return y, x
        if j >= a:
            return Sigma(j + 2, y.sign), x
        return None
    if X is Close and Y is Open:
        if j < a or (j == a and side > 0):
            return y, Close(a + 2)
        return Open(j + 2), x
    return None


def _side(x, y) -> int:
    # records where an open arc passing a close arc came from, so the reverse is exact
    if isinstance(x, Open) and isinstance(y, Close):
        return 1 if y.index > x.index + 1 else -1
    return 1


def _slide_pair(x, y):
    """Swing a crossing on one leg of an arc over to the other leg."""
    if isinstance(x, Open) and isinstance(y, Sigma) and y.index in (x.index - 1, x.index + 1):
        return Open(y.index), Sigma(x.index, -y.sign)
    return None


# ------------------------------------------------------------- movies


_REVERSE_KIND = {"Birth": "Death", "Death": "Birth", "R2Create": "R2Remove", "R2Remove": "R2Create",
                 "Saddle": "Saddle", "Reindex": "Reindex"}
_REVERSE_MOVE = {"commute": "commute", "slide": "slide", "cycle": "uncycle", "uncycle": "cycle",
                 "join": "cut", "cut": "join", "": ""}


@dataclass(frozen=True)
class MovieStep:
    """One elementary rewrite.

    ``level`` is the letter position of the window in the larger of the two
    words (both words for a Reindex), ``index`` the strand position of the
    window and ``sign`` the sign of the first crossing of an R2 pair.
    Saddles are ``join`` (insert a turnback) or ``cut`` (remove one).
    """

    kind: str
    source: BraidLikeWord
    target: BraidLikeWord
    level: int = 0
    index: int = 0
    sign: int = 1
    move: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MovieError(f"unknown step kind {self.kind!r}")
        if self.expected_target() != self.target:
            raise MovieError(f"{self.kind} step target is not the declared rewrite of its source")

    @property
    def inserts(self) -> bool:
        return self.kind in ("Birth", "R2Create") or (self.kind == "Saddle" and self.move == "join")

    def window(self) -> list:
        a = self.index
        if self.kind == "Saddle":
            return [Close(a), Open(a)]
        if self.kind in ("Birth", "Death"):
            return [Open(a), Close(a)]
        return [Sigma(a, self.sign), Sigma(a, -self.sign)]

    def expected_target(self) -> BraidLikeWord:
        src = _letters(self.source)
        p = self.level
        if self.kind == "Reindex":
            if self.move == "cycle":
                if not src:
                    return self.source
                return _word(_widths(self.source.strands, src)[-2], [src[-1]] + src[:-1])
            if self.move == "uncycle":
                return _word(_widths(self.source.strands, src)[1], src[1:] + [src[0]])
            if not 0 <= p < len(src) - 1:
                raise MovieError("reindex window out of range")
            if self.move == "commute":
                pair = _commute_pair(src[p], src[p + 1], self.sign)
            else:
                pair = _slide_pair(src[p], src[p + 1])
            if pair is None:
                raise MovieError(f"letters at {p} do not allow a {self.move}")
            return _word(self.source.strands, src[:p] + list(pair) + src[p + 2:])
        win = self.window()
        if self.inserts:
            return _word(self.source.strands, src[:p] + win + src[p:])
        if src[p:p + 2] != win:
            raise MovieError(f"{self.kind} window not found at letter {p}")
        return _word(self.source.strands, src[:p] + src[p + 2:])

    def reversed(self) -> "MovieStep":
        return MovieStep(_REVERSE_KIND[self.kind], self.target, self.source, self.level, self.index,
                         self.sign, _REVERSE_MOVE[self.move])

    def to_json(self) -> dict:
        return {"kind": self.kind, "move": self.move, "level": self.level, "index": self.index,
                "sign": self.sign, "source": word_tokens(self.source), "source_strands": self.source.strands,
                "target": word_tokens(self.target), "target_strands": self.target.strands}


@dataclass(frozen=True)
class Movie:
    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise MovieError("a movie needs at least one step")
        for a, b in zip(self.steps, self.steps[1:]):
            if a.target != b.source:
                raise MovieError("consecutive steps do not compose")

    @property
    def source(self) -> BraidLikeWord:
        return self.steps[0].source

    @property
    def target(self) -> BraidLikeWord:
        return self.steps[-1].target

    def __add__(self, other: "Movie") -> "Movie":
        return Movie(self.steps + other.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def reversed(self) -> "Movie":
        return Movie(tuple(s.reversed() for s in reversed(self.steps)))

    def counts(self) -> dict[str, int]:
        return dict(sorted(Counter(s.kind for s in self.steps).items()))

    def to_json(self) -> list[dict]:
        return [s.to_json() for s in self.steps]


class _Builder:
    """Accumulates steps while rewriting a word in place."""

    def __init__(self, word: BraidLikeWord):
        self.strands = word.strands
        self.letters = _letters(word)
        self.steps: list[MovieStep] = []

    @property
    def word(self) -> BraidLikeWord:
        return _word(self.strands, self.letters)

    def push(self, kind, **kw) -> None:
        src = self.word
        target = _target_of(kind, src, **kw)
        step = MovieStep(kind, src, target, **kw)
        self.steps.append(step)
        self.strands = target.strands
        self.letters = list(target.letters)

    def movie(self) -> Movie:
        return Movie(tuple(self.steps))


def _target_of(kind, src, **kw) -> BraidLikeWord:
    # compute the rewrite without validating against a guessed target
    step = object.__new__(MovieStep)
    for name, default in (("level", 0), ("index", 0), ("sign", 1), ("move", "")):
        object.__setattr__(step, name, kw.get(name, default))
    object.__setattr__(step, "kind", kind)
    object.__setattr__(step, "source", src)
    object.__setattr__(step, "target", src)
    return step.expected_target()


def compile_slide(word: BraidLikeWord, i: int | None = None) -> Movie:
    """Slide the single ``Open`` arc of ``word`` down and around the annulus
    until it sits directly above its ``Close``.

    Letters away from the arc are commuted past it; a crossing on one leg is
    swung onto the other leg and cancelled against its partner by an R2
    move.  Passing the bottom of the word wraps the arc through the seam.
    """
    b = _Builder(word)
    opens = [p for p, x in enumerate(b.letters) if isinstance(x, Open)]
    closes = [p for p, x in enumerate(b.letters) if isinstance(x, Close)]
    if len(opens) != 1 or len(closes) != 1:
        raise MovieError("the slide needs exactly one open arc and one close arc")
    if i is not None and b.letters[opens[0]].index != i:
        raise MovieError(f"turnback is not at strand {i}")
    budget = 8 * (len(b.letters) + 4) ** 2
    while True:
        budget -= 1
        if budget < 0:
            raise MovieError("slide did not terminate")
        p = next(q for q, x in enumerate(b.letters) if isinstance(x, Open))
        if p == len(b.letters) - 1:
            b.push("Reindex", move="cycle")
            continue
        x, y = b.letters[p], b.letters[p + 1]
        if isinstance(y, Close) and y.index == x.index:
            break
        if _commute_pair(x, y) is not None:
            b.push("Reindex", level=p, move="commute", sign=_side(x, y))
            continue
        if _slide_pair(x, y) is None:
            raise MovieError(f"arc at letter {p} meets {y} and cannot pass it")
        b.push("Reindex", level=p, move="slide")
        q = p + 1
        while True:
            if q + 1 >= len(b.letters):
                raise MovieError("no cancelling partner below a swung crossing")
            c, z = b.letters[q], b.letters[q + 1]
            if isinstance(z, Sigma) and z.index == c.index and z.sign == -c.sign:
                b.push("R2Remove", level=q, index=c.index, sign=c.sign)
                break
            if _commute_pair(c, z) is None:
                raise MovieError(f"swung crossing blocked by {z}")
            b.push("Reindex", level=q, move="commute")
            q += 1
    if not b.steps:
        raise MovieError("nothing to slide: the arc already sits on its partner")
    return b.movie()


def reindex_to(word: BraidLikeWord, target: BraidLikeWord) -> list[MovieStep]:
    """Far commutations (after a cyclic shift if needed) carrying word to target."""
    if word == target:
        return []
    src, tgt = _letters(word), _letters(target)
    if Counter(map(repr, src)) != Counter(map(repr, tgt)):
        raise MovieError("words have different letters")
    for shift in range(max(len(src), 1)):
        b = _Builder(word)
        try:
            for _ in range(shift):
                b.push("Reindex", move="cycle")
            if b.strands != target.strands:
                continue
            for pos, want in enumerate(tgt):
                j = next((q for q in range(pos, len(b.letters)) if b.letters[q] == want), None)
                if j is None:
                    raise MovieError("letter missing")
                for q in range(j - 1, pos - 1, -1):
                    b.push("Reindex", level=q, move="commute")
            if b.word == target:
                return b.steps
        except (MovieError, WordError):
            continue
    raise MovieError("no far-commutation sequence joins the two words")


def cap_movie(word: BraidLikeWord, i: int, target: BraidLikeWord | None = None) -> Movie:
    """Cut strands i, i+1 together, retract the resulting arc around the
    annulus and cap off the small circle it leaves behind."""
    letters = _letters(word)
    if not all(isinstance(x, Sigma) for x in letters):
        raise MovieError("cap movies start from a crossing word")
    if not 1 <= i < word.strands:
        raise MovieError(f"strand index {i} out of range")
    b = _Builder(word)
    b.push("Saddle", level=0, index=i, move="join")
    slide = compile_slide(b.word, i)
    steps = list(b.steps) + list(slide.steps)
    last = steps[-1].target
    ls = _letters(last)
    p = next(q for q, x in enumerate(ls) if isinstance(x, Open))
    steps.append(MovieStep("Death", last, _target_of("Death", last, level=p, index=ls[p].index),
                           level=p, index=ls[p].index))
    if target is not None:
        steps += reindex_to(steps[-1].target, target)
    return Movie(tuple(steps))


def ei_movie(word: BraidLikeWord, i: int) -> Movie:
    cap = cap_movie(word, i)
    return cap + cap.reversed()


# ----------------------------------------------------------- geometry


def _seg(d: AnnularDiagram, level: int, pos: int) -> int:
    return d.node_segment[d.node(level, pos)]


def _segment_images(src: AnnularDiagram, tgt: AnnularDiagram, level_map) -> list[set]:
    out = [set() for _ in range(src.n_segments)]
    for q, w in enumerate(src.widths):
        levels = level_map(q)
        for t in range(1, w + 1):
            s = src.node_segment[src.node(q, t)]
            for q2 in levels:
                out[s].add(tgt.node_segment[tgt.node(q2, t)])
    return out


def _insert_levels(level: int, k: int = 2):
    def f(q):
        if q < level:
            return [q]
        if q == level:
            return [q, q + k]
        return [q + k]
    return f


def _reindex_geometry(step: MovieStep, src: AnnularDiagram, tgt: AnnularDiagram):
    """(segment bijection, crossing permutation) of a planar isotopy step."""
    if step.move == "uncycle":
        seg, perm = _reindex_geometry(step.reversed(), tgt, src)
        inv_seg = np.empty_like(seg)
        inv_seg[seg] = np.arange(len(seg))
        inv_perm = np.empty_like(perm)
        inv_perm[perm] = np.arange(len(perm))
        return inv_seg, inv_perm
    L = len(src.letters)
    p = step.level
    if step.move == "cycle":
        images = _segment_images(src, tgt, lambda q: [q + 1] if q < L else [1])
        letter_map = {q: (q + 1 if q < L - 1 else 0) for q in range(L)}
    else:
        images = _segment_images(src, tgt, lambda q: [] if q == p + 1 else [q])
        letter_map = {q: q for q in range(L)}
        if step.move == "commute":
            letter_map[p], letter_map[p + 1] = p + 1, p
    seg = []
    for im in images:
        if len(im) != 1:
            raise MovieError("isotopy does not match arc segments one to one")
        seg.append(next(iter(im)))
    if sorted(seg) != list(range(tgt.n_segments)):
        raise MovieError("isotopy does not match arc segments one to one")
    where = {c.letter: n for n, c in enumerate(tgt.crossings)}
    perm = [where[letter_map[c.letter]] for c in src.crossings]
    return np.array(seg, dtype=np.int64), np.array(perm, dtype=np.int64)


def _match(src_res, tgt_res, images, skip_src=(), skip_tgt=(), exclude=frozenset()) -> list[tuple[int, int]]:
    """Pairs (source circle, target circle) for circles untouched by the window."""
    pairs, hit = [], set()
    for p, c in enumerate(src_res.circles):
        if p in skip_src:
            continue
        qs = {tgt_res.seg_circle[t] for s in c.segments if s not in exclude for t in images[s]}
        if len(qs) != 1:
            raise MovieError("circle correspondence is ambiguous")
        q = qs.pop()
        if q in hit or q in skip_tgt:
            raise MovieError("circle correspondence is not injective")
        hit.add(q)
        pairs.append((p, q))
    if len(hit) + len(set(skip_tgt)) != len(tgt_res.circles):
        raise MovieError("circle correspondence is not onto")
    return pairs


def _flip(pairs):
    return [(q, p) for p, q in pairs]


def _local(src_res, pairs, s_touch=(), t_touch=(), deaths=(), flavor="kh"):
    """Local (rows, cols) label masks; births need nothing since w+ is mask 0."""
    m = len(src_res.circles)
    labels = np.arange(1 << m, dtype=np.int64)
    base = np.zeros_like(labels)
    for p, q in pairs:
        base |= ((labels >> p) & 1) << q
    if s_touch:
        parts = saddle_local(labels, base, list(s_touch), list(t_touch))
        rows, cols = parts["kh"]
        if flavor == "lee":
            rows = np.concatenate([rows, parts["lee"][0]])
            cols = np.concatenate([cols, parts["lee"][1]])
    else:
        rows, cols = base, labels
    if deaths:
        keep = np.ones(len(cols), dtype=bool)
        for d in deaths:
            keep &= ((cols >> d) & 1) == 1
        rows, cols = rows[keep], cols[keep]
    return rows, cols


class _Acc:
    def __init__(self, target: TrigradedComplex, source: TrigradedComplex):
        self.shape = (target.size, source.size)
        self.t_off, self.s_off = target.offsets, source.offsets
        self.r, self.c, self.v = [], [], []

    def add(self, w: int, v: int, rc, sign: int) -> None:
        rows, cols = rc
        if len(rows):
            self.r.append(rows + self.t_off[w])
            self.c.append(cols + self.s_off[v])
            self.v.append(np.full(len(rows), sign, dtype=np.int64))

    def build(self) -> sp.csr_matrix:
        if not self.r:
            return linalg.csr(self.shape)
        return linalg.coo_build(self.shape, np.concatenate(self.r), np.concatenate(self.c),
                                np.concatenate(self.v))


def _popcount(x: int) -> int:
    return bin(x).count("1")


# ------------------------------------------------------ elementary maps


def _reindex_matrix(src: TrigradedComplex, tgt: TrigradedComplex, seg, perm) -> sp.csr_matrix:
    acc = _Acc(tgt, src)
    ncross = src.n_crossings
    for v, res in enumerate(src.resolutions):
        bits = [int(perm[c]) for c in range(ncross) if v >> c & 1]
        w = sum(1 << x for x in bits)
        inversions = sum(1 for x, y in itertools.combinations(bits, 2) if x > y)
        tres = tgt.resolutions[w]
        pairs = [(p, tres.seg_circle[seg[c.segments[0]]]) for p, c in enumerate(res.circles)]
        if sorted(q for _, q in pairs) != list(range(len(tres.circles))):
            raise MovieError("isotopy does not match circles one to one")
        acc.add(w, v, _local(res, pairs), -1 if inversions % 2 else 1)
    return acc.build()


def elementary_map(step: MovieStep, source: TrigradedComplex, target: TrigradedComplex,
                   flavor: str = "kh") -> sp.csr_matrix:
    """Matrix (rows: target generators) of a Birth, Death, Saddle or Reindex step."""
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    if source.diagram.word != step.source or target.diagram.word != step.target:
        raise MovieError("complexes do not belong to the step's diagrams")
    if step.kind == "Reindex":
        seg, perm = _reindex_geometry(step, source.diagram, target.diagram)
        return _reindex_matrix(source, target, seg, perm)
    if step.kind in ("R2Create", "R2Remove"):
        raise MovieError("R2 steps go through r2_map")
    small, large = (source, target) if step.inserts else (target, source)
    sd, ld = small.diagram, large.diagram
    p, a = step.level, step.index
    images = _segment_images(sd, ld, _insert_levels(p))
    acc = _Acc(target, source)
    if step.kind == "Saddle":
        s_site = (_seg(sd, p, a), _seg(sd, p, a + 1))
        l_site = (_seg(ld, p, a), _seg(ld, p + 2, a))
        for v in range(len(small.resolutions)):
            rs, rl = small.resolutions[v], large.resolutions[v]
            st = sorted({rs.seg_circle[s] for s in s_site})
            lt = sorted({rl.seg_circle[s] for s in l_site})
            pairs = _match(rs, rl, images, st, lt)
            if step.inserts:
                acc.add(v, v, _local(rs, pairs, st, lt, flavor=flavor), 1)
            else:
                acc.add(v, v, _local(rl, _flip(pairs), lt, st, flavor=flavor), 1)
    else:
        fresh = _seg(ld, p + 1, a)
        for v in range(len(small.resolutions)):
            rs, rl = small.resolutions[v], large.resolutions[v]
            c = rl.seg_circle[fresh]
            pairs = _match(rs, rl, images, (), (c,))
            if step.kind == "Birth":
                acc.add(v, v, _local(rs, pairs), 1)
            else:
                acc.add(v, v, _local(rl, _flip(pairs), deaths=(c,)), 1)
    return acc.build()


# ----------------------------------------------------------------- R2


@dataclass
class R2Maps:
    """Inclusion F of the smaller diagram's complex and its retraction G."""

    small: TrigradedComplex
    large: TrigradedComplex
    flavor: str
    F: sp.csr_matrix
    G: sp.csr_matrix
    signs: tuple            # coefficients of the saddle components of F and G
    homotopy: tuple | None = None


def _r2_pieces(small: TrigradedComplex, large: TrigradedComplex, p: int, a: int, flavor: str) -> dict:
    sd, ld = small.diagram, large.diagram
    P = sum(1 for c in ld.crossings if c.letter < p)
    if ld.crossings[P].letter != p or ld.crossings[P + 1].letter != p + 1:
        raise MovieError("no crossing pair at the R2 window")
    vbit = [0 if ld.crossings[P + e].sign > 0 else 1 for e in (0, 1)]

    def ins(v: int, b1: int, b2: int) -> int:
        low = v & ((1 << P) - 1)
        return low | (b1 << P) | (b2 << (P + 1)) | ((v >> P) << (P + 2))

    images = _segment_images(sd, ld, _insert_levels(p))
    identity = [{s} for s in range(ld.n_segments)]
    s_site = (_seg(sd, p, a), _seg(sd, p, a + 1))
    top, mid, bottom = _seg(ld, p, a), _seg(ld, p + 1, a), _seg(ld, p + 2, a)
    middle = frozenset({mid, _seg(ld, p + 1, a + 1)})
    hv, vh = (1 - vbit[0], vbit[1]), (vbit[0], 1 - vbit[1])
    low, high = (hv, vh) if sum(hv) == 0 else (vh, hv)
    acc = {name: _Acc(*pair) for name, pair in (
        ("F_VV", (large, small)), ("F_HH", (large, small)), ("G_VV", (small, large)),
        ("G_HH", (small, large)), ("H_death", (large, large)), ("H_birth", (large, large)))}
    for v in range(len(small.resolutions)):
        rs = small.resolutions[v]
        sigma = -1 if _popcount(v >> P) % 2 else 1
        tau = -1 if _popcount(v & ((1 << P) - 1)) % 2 else 1
        w = ins(v, *vbit)
        rl = large.resolutions[w]
        pairs = _match(rs, rl, images)
        acc["F_VV"].add(w, v, _local(rs, pairs), sigma)
        acc["G_VV"].add(v, w, _local(rl, _flip(pairs)), sigma)
        hh = ins(v, 1 - vbit[0], 1 - vbit[1])
        rh = large.resolutions[hh]
        st = sorted({rs.seg_circle[s] for s in s_site})
        lt = sorted({rh.seg_circle[top], rh.seg_circle[bottom]})
        ring = rh.seg_circle[mid]
        pairs = _match(rs, rh, images, st, lt + [ring])
        acc["F_HH"].add(hh, v, _local(rs, pairs, st, lt, flavor=flavor), sigma)
        acc["G_HH"].add(v, hh, _local(rh, _flip(pairs), lt, st, deaths=(ring,), flavor=flavor), sigma)
        lo, hi = ins(v, *low), ins(v, *high)
        rlo, rhi = large.resolutions[lo], large.resolutions[hi]
        pairs = _match(rh, rlo, identity, (ring,), (), middle)
        acc["H_death"].add(lo, hh, _local(rh, pairs, deaths=(ring,)), tau)
        pairs = _match(rhi, rh, identity, (), (ring,), middle)
        acc["H_birth"].add(hh, hi, _local(rhi, pairs), tau)
    return {k: x.build() for k, x in acc.items()}


def _commutes(M, d_src, d_tgt) -> bool:
    return linalg.equal(linalg.matmul(d_tgt, M), linalg.matmul(M, d_src))


def r2_map(small: TrigradedComplex, large: TrigradedComplex, level: int, index: int,
           flavor: str = "kh", homotopy: bool = False) -> R2Maps:
    """Reidemeister II equivalence between ``small`` and ``large`` (the pair at ``level``)."""
    pieces = _r2_pieces(small, large, level, index, flavor)
    ds = small.differential(_DIFF[flavor])
    dl = large.differential(_DIFF[flavor])
    found = []
    for a_name, b_name, src_d, tgt_d in (("F_VV", "F_HH", ds, dl), ("G_VV", "G_HH", dl, ds)):
        for c in (1, -1):
            M = pieces[a_name] + c * pieces[b_name]
            if _commutes(M, src_d, tgt_d):
                found.append((c, M.tocsr()))
                break
        else:
            raise ChainMapError(f"no sign makes the R2 map {a_name[0]} a chain map")
    (cF, F), (cG, G) = found
    ident = sp.identity(small.size, dtype=np.int64, format="csr")
    if not linalg.equal(linalg.matmul(G, F), ident):
        raise ChainMapError("R2 retraction is not a left inverse")
    out = R2Maps(small, large, flavor, F, G, (cF, cG))
    if homotopy:
        lhs = linalg.matmul(F, G) - sp.identity(large.size, dtype=np.int64, format="csr")
        for x, y in itertools.product((1, -1), repeat=2):
            H = (x * pieces["H_death"] + y * pieces["H_birth"]).tocsr()
            if linalg.equal(lhs, linalg.matmul(dl, H) + linalg.matmul(H, dl)):
                out.homotopy = (x, y, H)
                break
        else:
            raise ChainMapError("no homotopy of the expected shape joins F G and the identity")
    return out


# ------------------------------------------------------------ compiling


class ComplexCache:
    """Complexes and diagrams keyed by word, shared across movies."""

    def __init__(self, limit: int | None = None):
        self.limit = limit
        self._cx: dict = {}
        self._diag: dict = {}

    def diagram(self, word: BraidLikeWord) -> AnnularDiagram:
        d = self._diag.get(word)
        if d is None:
            d = self._diag[word] = AnnularDiagram(word)
        return d

    def __call__(self, word: BraidLikeWord) -> TrigradedComplex:
        cx = self._cx.get(word)
        if cx is None:
            cx = self._cx[word] = TrigradedComplex(self.diagram(word), self.limit)
        return cx


@dataclass
class MapSegment:
    kinds: tuple
    source: TrigradedComplex
    target: TrigradedComplex
    matrices: dict                  # flavor -> csr (rows: target)
    _sutured: dict = field(default_factory=dict, repr=False)

    def sutured(self, flavor: str = "kh") -> sp.csr_matrix:
        """The k-preserving part."""
        m = self._sutured.get(flavor)
        if m is None:
            coo = self.matrices[flavor].tocoo()
            keep = self.target.k[coo.row] == self.source.k[coo.col]
            m = linalg.coo_build(coo.shape, coo.row[keep], coo.col[keep], coo.data[keep])
            self._sutured[flavor] = m
        return m


_LIMIT = 2 ** 52


class CompiledMovie:
    def __init__(self, movie: Movie, segments: list[MapSegment]):
        self.movie = movie
        self.segments = segments

    @property
    def source(self) -> TrigradedComplex:
        return self.segments[0].source

    @property
    def target(self) -> TrigradedComplex:
        return self.segments[-1].target

    def apply(self, vec: np.ndarray, flavor: str = "kh", sutured: bool = False) -> np.ndarray:
        out = np.asarray(vec, dtype=np.int64)
        for s in self.segments:
            M = s.sutured(flavor) if sutured else s.matrices[flavor]
            bound = int(np.abs(out).max(initial=0)) * int(np.abs(M.data).max(initial=0)) * max(
                1, int(np.diff(M.indptr).max(initial=0)))
            if bound >= _LIMIT:
                raise OverflowError("vector entries too large for exact int64 arithmetic")
            out = M @ out
        return out

    def matrix(self, flavor: str = "kh") -> sp.csr_matrix:
        M = self.segments[0].matrices[flavor]
        for s in self.segments[1:]:
            M = linalg.matmul(s.matrices[flavor], M)
        return M


def compile_movie(movie: Movie, cache: ComplexCache | None = None, check: bool = True) -> CompiledMovie:
    """Chain maps of every step in both flavors; isotopy runs are fused."""
    cache = ComplexCache() if cache is None else cache
    steps = movie.steps
    segments: list[MapSegment] = []
    i = 0
    while i < len(steps):
        st = steps[i]
        if st.kind == "Reindex":
            j = i
            seg = perm = None
            while j < len(steps) and steps[j].kind == "Reindex":
                s2, p2 = _reindex_geometry(steps[j], cache.diagram(steps[j].source),
                                           cache.diagram(steps[j].target))
                seg, perm = (s2, p2) if seg is None else (s2[seg], p2[perm])
                j += 1
            src, tgt = cache(steps[i].source), cache(steps[j - 1].target)
            M = _reindex_matrix(src, tgt, seg, perm)
            mats = {"kh": M, "lee": M}
            kinds = tuple(s.kind for s in steps[i:j])
            i = j
        else:
            src, tgt = cache(st.source), cache(st.target)
            if st.kind in ("R2Create", "R2Remove"):
                small, large = (src, tgt) if st.inserts else (tgt, src)
                mats = {}
                for f in FLAVORS:
                    r2 = r2_map(small, large, st.level, st.index, f)
                    mats[f] = r2.F if st.inserts else r2.G
            else:
                mats = {f: elementary_map(st, src, tgt, f) for f in FLAVORS}
            kinds = (st.kind,)
            i += 1
        if check:
            for f in FLAVORS:
                if not _commutes(mats[f], src.differential(_DIFF[f]), tgt.differential(_DIFF[f])):
                    raise ChainMapError(f"{'+'.join(sorted(set(kinds)))} map is not a {f} chain map")
        segments.append(MapSegment(kinds, src, tgt, mats))
    return CompiledMovie(movie, segments)


# --------------------------------------------------------- calibration


def _dense(vec: dict, n: int) -> tuple[np.ndarray, int]:
    den = 1
    for x in vec.values():
        den = den * Fraction(x).denominator // math.gcd(den, Fraction(x).denominator)
    out = np.zeros(n, dtype=np.int64)
    for g, x in vec.items():
        out[g] = int(Fraction(x) * den)
    return out, den


def _sparse(arr: np.ndarray, den: int) -> dict[int, Fraction]:
    return {int(g): Fraction(int(arr[g]), den) for g in np.flatnonzero(arr)}


def alternating_orientation(diagram: AnnularDiagram, parallel: bool = False) -> tuple[bool, ...]:
    """Component flips orienting the strands at the seam alternately down and up
    (all down with ``parallel``)."""
    n = diagram.word.strands
    flips: dict[int, bool] = {}
    for t in range(1, n + 1):
        node = diagram.node(0, t)
        want = True if parallel else t % 2 == 1
        comp = diagram.node_component[node]
        flip = diagram.node_down[node] != want
        if flips.setdefault(comp, flip) != flip:
            raise MovieError("seam strands of one component need opposite orientations")
    if len(flips) != diagram.n_components:
        raise MovieError("some component never reaches the seam")
    return tuple(flips[c] for c in range(diagram.n_components))


def lee_state(cx: TrigradedComplex, flips: tuple[bool, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Canonical Lee chain of an orientation and its dual functional."""
    d = cx.diagram
    down = orientation_directions(d, flips)
    v = d.oriented_vertex(down)
    labels = canonical_labels(d, v, down, cx.resolutions[v])
    masks = np.arange(1 << len(labels), dtype=np.int64)
    s_val = np.ones_like(masks)
    l_val = np.ones_like(masks)
    for p, lab in enumerate(labels):
        if lab == "b":
            bit = (masks >> p) & 1
            s_val *= 1 - 2 * bit
            l_val *= 2 * bit - 1
    s = np.zeros(cx.size, dtype=np.int64)
    lam = np.zeros(cx.size, dtype=np.int64)
    lo = cx.offsets[v]
    s[lo:lo + len(masks)] = s_val
    lam[lo:lo + len(masks)] = l_val
    return s, lam


@dataclass
class CalibratedMap:
    """A movie's Khovanov and Lee chain maps with the sign fixed by the
    alternating orientation's diagonal Lee entry being -1."""

    compiled: CompiledMovie
    calibration: int
    raw_entry: Fraction
    convention: str = "alternating orientation entry -1"

    @property
    def movie(self) -> Movie:
        return self.compiled.movie

    def sutured_matrix(self, H: HomologyPresentation, H_target: HomologyPresentation | None = None,
                       per_step: bool = False) -> QMatrix:
        """Induced map on the d0 homology, k-degree-0 part."""
        H_target = H if H_target is None else H_target
        src, tgt = self.compiled.source, self.compiled.target
        if H.complex is not src or H_target.complex is not tgt:
            raise ValueError("homology does not belong to the movie's end complexes")
        cols = []
        for n in range(H.dim):
            z = H.cycle(n)
            k0 = H.basis[n][2]
            arr, den = _dense(z, src.size)
            out = self.compiled.apply(arr, "kh", sutured=per_step)
            if not per_step:
                out[tgt.k != k0] = 0
            image = _sparse(out * self.calibration, den)
            if not H_target.is_cycle(image):
                raise ChainMapError("sutured image is not a cycle")
            cols.append(H_target.project(image))
        return QMatrix.from_columns(H_target.dim, cols)

    def lee_entry(self, flips_in, flips_out) -> Fraction:
        """Calibrated coefficient of s_out in the image of s_in."""
        s_in, _ = lee_state(self.compiled.source, flips_in)
        s_out, lam = lee_state(self.compiled.target, flips_out)
        img = self.compiled.apply(s_in, "lee")
        return Fraction(int(lam @ img) * self.calibration, int(lam @ s_out))


def calibrate(compiled: CompiledMovie) -> CalibratedMap:
    cx = compiled.source
    if compiled.target is not cx:
        raise ValueError("calibration needs an endomorphism movie")
    flips = alternating_orientation(cx.diagram)
    s, lam = lee_state(cx, flips)
    d = cx.differential("lee_full")
    if (d @ s).any() or (d.T @ lam).any():
        raise AssertionError("canonical Lee chain or its dual is not closed")
    img = compiled.apply(s, "lee")
    entry = Fraction(int(lam @ img), int(lam @ s))
    if entry not in (1, -1):
        raise ChainMapError(f"alternating orientation entry is {entry}, expected +1 or -1")
    return CalibratedMap(compiled, -int(entry), entry)


def e_i_map(cableword: BraidLikeWord, i: int, cache: ComplexCache | None = None,
            check: bool = True) -> CalibratedMap:
    n_strands = cableword.strands
    if not 1 <= i < n_strands:
        raise MovieError(f"turnback index {i} out of range")
    cache = ComplexCache() if cache is None else cache
    compiled = compile_movie(ei_movie(cableword, i), cache, check)
    return calibrate(compiled)


# ---------------------------------------------------------- S_n action


def _key_preserving(M: QMatrix, keys: list) -> bool:
    return all(keys[r] == keys[c] for r, row in M.rows.items() for c in row)


@dataclass
class SnAction:
    word: BraidLikeWord
    n: int
    cableword: BraidLikeWord
    complex: TrigradedComplex
    homology: HomologyPresentation
    e: dict                     # i -> QMatrix on SKh
    maps: dict                  # i -> CalibratedMap
    per_step_agrees: dict       # i -> bool

    @property
    def s(self) -> dict:
        ident = QMatrix.identity(self.homology.dim)
        return {i: ident + m for i, m in self.e.items()}

    def permutation(self, perm: tuple[int, ...]) -> QMatrix:
        """Action of a permutation of 0..n-1 via a product of adjacent transpositions."""
        word = []
        p = list(perm)
        for a in range(len(p)):
            for b in range(len(p) - 1 - a):
                if p[b] > p[b + 1]:
                    p[b], p[b + 1] = p[b + 1], p[b]
                    word.append(b + 1)
        out = QMatrix.identity(self.homology.dim)
        s = self.s
        for i in reversed(word):
            out = out @ s[i]
        return out

    def symmetrizer(self) -> QMatrix:
        total = QMatrix.zeros(self.homology.dim, self.homology.dim)
        for perm in itertools.permutations(range(self.n)):
            total = total + self.permutation(perm)
        return total.scale(Fraction(1, math.factorial(self.n)))

    def relations(self) -> dict[str, bool]:
        e, s = self.e, self.s
        dim = self.homology.dim
        ident = QMatrix.identity(dim)
        out: dict[str, bool] = {}
        idx = sorted(e)
        for i in idx:
            out[f"e{i}^2 = -2 e{i}"] = e[i] @ e[i] == e[i].scale(-2)
            out[f"s{i}^2 = id"] = s[i] @ s[i] == ident
        for i in idx:
            if i + 1 in e:
                j = i + 1
                out[f"e{i} e{j} e{i} = e{i}"] = e[i] @ e[j] @ e[i] == e[i]
                out[f"e{j} e{i} e{j} = e{j}"] = e[j] @ e[i] @ e[j] == e[j]
                out[f"s{i} s{j} s{i} = s{j} s{i} s{j}"] = s[i] @ s[j] @ s[i] == s[j] @ s[i] @ s[j]
        for i, j in itertools.combinations(idx, 2):
            if j - i >= 2:
                out[f"e{i} e{j} = e{j} e{i}"] = e[i] @ e[j] == e[j] @ e[i]
                out[f"s{i} s{j} = s{j} s{i}"] = s[i] @ s[j] == s[j] @ s[i]
        module = current_action(self.complex, self.homology)
        ops = module.operators()
        keys = self.homology.basis
        for i in idx:
            for name in ("e", "f", "h", "v2", "v-2"):
                X = ops[name]
                out[f"s{i} commutes with {name}"] = s[i] @ X == X @ s[i]
            out[f"s{i} preserves (i,j',k)"] = _key_preserving(s[i], keys)
            out[f"e{i} sutured part agrees stepwise"] = self.per_step_agrees[i]
        return out

    def report(self) -> dict:
        return {"word": self.word.text() if self.word.letters else "", "n": self.n,
                "dim": self.homology.dim, "basis": [list(k) for k in self.homology.basis],
                "e": {str(i): m.triplets() for i, m in sorted(self.e.items())},
                "s": {str(i): m.triplets() for i, m in sorted(self.s.items())},
                "calibration": {str(i): m.calibration for i, m in sorted(self.maps.items())},
                "relations": self.relations()}


def sn_action(word: BraidLikeWord, n: int, framing: int | None = None, cache: ComplexCache | None = None,
              check: bool = True, per_step: bool = True) -> SnAction:
    cache = ComplexCache() if cache is None else cache
    cw = cable_word(word, n, framing)
    cx = cache(cw)
    H = homology(cx, "d0")
    es, maps, agree = {}, {}, {}
    for i in range(1, n):
        cm = e_i_map(cw, i, cache, check)
        maps[i] = cm
        es[i] = cm.sutured_matrix(H)
        agree[i] = (cm.sutured_matrix(H, per_step=True) == es[i]) if per_step else True
    return SnAction(word, n, cw, cx, H, es, maps, agree)


def schur_weyl_matrix(H: HomologyPresentation, perm: tuple[int, ...]) -> QMatrix:
    """Reference action on SKh of the trivial n-cable.

    Circles alternate V, V*; V* is identified with V by v_+ -> v*_+,
    v_- -> -v*_-, and permutations act by moving tensor factors.
    """
    cx = H.complex
    n = len(perm)
    gens = []
    for b in range(H.dim):
        z = H.cycle(b)
        (g, x), = z.items()
        gens.append((int(cx.gen_labels[g]), x))
    index = {mask: b for b, (mask, _) in enumerate(gens)}

    def twist(mask: int) -> int:
        return (-1) ** sum(1 for t in range(1, n, 2) if mask >> t & 1)

    cols = []
    for mask, x in gens:
        moved = 0
        for t in range(n):
            if mask >> t & 1:
                moved |= 1 << perm[t]
        coef = Fraction(twist(mask) * twist(moved)) * x / gens[index[moved]][1]
        cols.append({index[moved]: coef})
    return QMatrix.from_columns(H.dim, cols)


def tl_reference_matrix(H: HomologyPresentation, i: int) -> QMatrix:
    """Reference u_i on SKh of the trivial n-cable.

    Zero when the labels of strands i and i+1 agree; otherwise
    x -> -x - (x with the two labels exchanged), in generator coordinates.
    """
    cx = H.complex
    gens = []
    for b in range(H.dim):
        (g, x), = H.cycle(b).items()
        gens.append((int(cx.gen_labels[g]), x))
    index = {mask: b for b, (mask, _) in enumerate(gens)}
    lo, hi = 1 << (i - 1), 1 << i
    cols = []
    for b, (mask, x) in enumerate(gens):
        if bool(mask & lo) == bool(mask & hi):
            cols.append({})
            continue
        other = index[mask ^ lo ^ hi]
        cols.append({b: Fraction(-1), other: -x / gens[other][1]})
    return QMatrix.from_columns(H.dim, cols)


def colored_skh(act: SnAction) -> dict:
    """Dimensions of the symmetric-group invariants per (i, j', k)."""
    P = act.symmetrizer()
    if P @ P != P:
        raise AssertionError("symmetrizer is not idempotent")
    groups: dict = {}
    for b, key in enumerate(act.homology.basis):
        groups.setdefault(key, []).append(b)
    out = {}
    for key, idx in sorted(groups.items()):
        r = P.submatrix(idx, idx).rank()
        if r:
            out[key] = r
    return out


# --------------------------------------------------------- stabilization


@dataclass
class Stabilization:
    small: HomologyPresentation
    large: HomologyPresentation
    cup: QMatrix
    cap: QMatrix
    scalar: int | None

    @property
    def composite(self) -> QMatrix:
        return self.cap @ self.cup

    def checks(self) -> dict[str, bool]:
        return {"cap o cup = +-2 id": self.scalar is not None,
                "cup injective": self.cup.rank() == self.small.dim}


def stabilization_maps(word: BraidLikeWord, n: int, i: int = 1, cache: ComplexCache | None = None,
                       check: bool = True) -> Stabilization:
    """Cup SKh(K^n) -> SKh(K^(n+2)) opening strands i, i+1, and the cap back."""
    cache = ComplexCache() if cache is None else cache
    small_w = cable_word(word, n)
    large_w = cable_word(word, n + 2)
    cap = cap_movie(large_w, i, target=small_w)
    cm_cap = compile_movie(cap, cache, check)
    cm_cup = compile_movie(cap.reversed(), cache, check)
    Hs = homology(cache(small_w), "d0")
    Hl = homology(cache(large_w), "d0")
    cup_m = CalibratedMap(cm_cup, 1, Fraction(1), "uncalibrated").sutured_matrix(Hs, Hl)
    cap_m = CalibratedMap(cm_cap, 1, Fraction(1), "uncalibrated").sutured_matrix(Hl, Hs)
    comp = cap_m @ cup_m
    scalar = None
    for c in (2, -2):
        if comp == QMatrix.identity(Hs.dim).scale(c):
            scalar = c
    return Stabilization(Hs, Hl, cup_m, cap_m, scalar)
