"""Exact sparse linear algebra over the rationals.

Chain-level matrices are ``scipy.sparse`` integer matrices (rows = targets,
columns = sources); every product goes through :func:`matmul`, which refuses
to run if int64 could overflow.  Anything that needs division lives in
:class:`QMatrix` (dict-of-rows with ``Fraction`` entries) or in
:class:`ComplexReducer`.
"""

from __future__ import annotations

import heapq
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

_LIMIT = 2 ** 62


def csr(shape, entries: Mapping[tuple[int, int], int] | None = None) -> sp.csr_matrix:
    if not entries:
        return sp.csr_matrix(shape, dtype=np.int64)
    rows, cols, vals = [], [], []
    for (r, c), v in entries.items():
        if v:
            rows.append(r)
            cols.append(c)
            vals.append(int(v))
    m = sp.csr_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=shape)
    m.sum_duplicates()
    m.eliminate_zeros()
    return m


def coo_build(shape, rows: list[int], cols: list[int], vals: list[int]) -> sp.csr_matrix:
    m = sp.csr_matrix((np.array(vals, dtype=np.int64), (np.array(rows, dtype=np.int64),
                                                         np.array(cols, dtype=np.int64))),
                      shape=shape)
    m.sum_duplicates()
    m.eliminate_zeros()
    return m


def _maxabs(m) -> int:
    return int(abs(m.data).max()) if m.nnz else 0


def matmul(a, b):
    if a.nnz and b.nnz:
        width = int(np.diff(a.tocsr().indptr).max())
        if _maxabs(a) * _maxabs(b) * max(width, 1) >= _LIMIT:
            raise OverflowError("integer chain matrix product could overflow int64")
    out = (a @ b).tocsr()
    out.eliminate_zeros()
    return out


def is_zero(m) -> bool:
    m = m.tocsr()
    m.eliminate_zeros()
    return m.nnz == 0


def equal(a, b) -> bool:
    return is_zero(a - b)


def column_dicts(m, columns: Iterable[int], row_map: Mapping[int, int] | None = None) -> dict:
    """Columns of a sparse matrix as ``{col: {row: int}}``."""
    m = m.tocsc()
    out = {}
    for c in columns:
        lo, hi = m.indptr[c], m.indptr[c + 1]
        col = {}
        for r, v in zip(m.indices[lo:hi], m.data[lo:hi]):
            if v:
                rr = int(r) if row_map is None else row_map.get(int(r))
                if rr is not None:
                    col[rr] = int(v)
        out[c] = col
    return out


# ---------------------------------------------------------------- QMatrix


class QMatrix:
    """Small exact matrix stored as ``{row: {col: Fraction}}``."""

    __slots__ = ("nrows", "ncols", "rows")

    def __init__(self, nrows: int, ncols: int, rows: dict | None = None):
        self.nrows = nrows
        self.ncols = ncols
        self.rows = {}
        if rows:
            for r, row in rows.items():
                clean = {c: Fraction(v) for c, v in row.items() if v}
                if clean:
                    self.rows[r] = clean

    @classmethod
    def identity(cls, n: int) -> "QMatrix":
        return cls(n, n, {i: {i: 1} for i in range(n)})

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "QMatrix":
        return cls(nrows, ncols)

    @classmethod
    def from_dense(cls, data: list[list]) -> "QMatrix":
        nr = len(data)
        nc = len(data[0]) if nr else 0
        return cls(nr, nc, {i: {j: v for j, v in enumerate(row)} for i, row in enumerate(data)})

    @classmethod
    def from_columns(cls, nrows: int, cols: list[Mapping[int, Fraction]]) -> "QMatrix":
        rows: dict[int, dict] = {}
        for j, col in enumerate(cols):
            for i, v in col.items():
                if v:
                    rows.setdefault(i, {})[j] = Fraction(v)
        m = cls(nrows, len(cols))
        m.rows = rows
        return m

    def copy(self) -> "QMatrix":
        m = QMatrix(self.nrows, self.ncols)
        m.rows = {r: dict(row) for r, row in self.rows.items()}
        return m

    def __getitem__(self, rc) -> Fraction:
        r, c = rc
        return self.rows.get(r, {}).get(c, Fraction(0))

    def dense(self) -> list[list[Fraction]]:
        out = [[Fraction(0)] * self.ncols for _ in range(self.nrows)]
        for r, row in self.rows.items():
            for c, v in row.items():
                out[r][c] = v
        return out

    def column(self, c: int) -> dict[int, Fraction]:
        return {r: row[c] for r, row in self.rows.items() if c in row}

    def columns(self) -> list[dict[int, Fraction]]:
        cols: list[dict[int, Fraction]] = [dict() for _ in range(self.ncols)]
        for r, row in self.rows.items():
            for c, v in row.items():
                cols[c][r] = v
        return cols

    def transpose(self) -> "QMatrix":
        m = QMatrix(self.ncols, self.nrows)
        for r, row in self.rows.items():
            for c, v in row.items():
                m.rows.setdefault(c, {})[r] = v
        return m

    def _check(self, other: "QMatrix") -> None:
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def __add__(self, other: "QMatrix") -> "QMatrix":
        self._check(other)
        m = self.copy()
        for r, row in other.rows.items():
            tgt = m.rows.setdefault(r, {})
            for c, v in row.items():
                s = tgt.get(c, 0) + v
                if s:
                    tgt[c] = s
                else:
                    tgt.pop(c, None)
            if not tgt:
                del m.rows[r]
        return m

    def __neg__(self) -> "QMatrix":
        return self.scale(-1)

    def __sub__(self, other: "QMatrix") -> "QMatrix":
        return self + (-other)

    def scale(self, k) -> "QMatrix":
        k = Fraction(k)
        m = QMatrix(self.nrows, self.ncols)
        if k:
            m.rows = {r: {c: v * k for c, v in row.items()} for r, row in self.rows.items()}
        return m

    def __rmul__(self, k) -> "QMatrix":
        return self.scale(k)

    def __matmul__(self, other: "QMatrix") -> "QMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        m = QMatrix(self.nrows, other.ncols)
        orows = other.rows
        for r, row in self.rows.items():
            acc: dict[int, Fraction] = {}
            for k, v in row.items():
                orow = orows.get(k)
                if orow:
                    for c, w in orow.items():
                        acc[c] = acc.get(c, 0) + v * w
            acc = {c: v for c, v in acc.items() if v}
            if acc:
                m.rows[r] = acc
        return m

    def apply(self, vec: Mapping[int, Fraction]) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for r, row in self.rows.items():
            s = sum((v * vec[c] for c, v in row.items() if c in vec), Fraction(0))
            if s:
                out[r] = s
        return out

    def is_zero(self) -> bool:
        return not self.rows

    def __eq__(self, other) -> bool:
        if not isinstance(other, QMatrix):
            return NotImplemented
        return self.shape == other.shape and (self - other).is_zero()

    def __hash__(self):
        raise TypeError("QMatrix is unhashable")

    def submatrix(self, rows: list[int], cols: list[int]) -> "QMatrix":
        cpos = {c: j for j, c in enumerate(cols)}
        m = QMatrix(len(rows), len(cols))
        for i, r in enumerate(rows):
            row = self.rows.get(r)
            if row:
                sub = {cpos[c]: v for c, v in row.items() if c in cpos}
                if sub:
                    m.rows[i] = sub
        return m

    def rank(self) -> int:
        return len(_echelon(self.columns())[1])

    def nullspace(self) -> list[dict[int, Fraction]]:
        return nullspace(self.columns(), self.ncols)

    def power(self, k: int) -> "QMatrix":
        out = QMatrix.identity(self.nrows)
        for _ in range(k):
            out = out @ self
        return out

    def triplets(self) -> list[tuple[int, int, str]]:
        return [(r, c, _qstr(v)) for r in sorted(self.rows) for c, v in sorted(self.rows[r].items())]

    def __repr__(self) -> str:
        return f"QMatrix({self.nrows}x{self.ncols}, nnz={sum(len(r) for r in self.rows.values())})"


def _qstr(v: Fraction) -> str:
    v = Fraction(v)
    return f"{v.numerator}/{v.denominator}"


def qstr(v) -> str:
    return _qstr(v)


# ----------------------------------------------------- elimination helpers


def _echelon(cols: list[Mapping[int, Fraction]]):
    """Column echelon reduction.  Returns (reduced pivot columns, pivot list).

    ``pivots`` is a list of (column index, pivot row); reduced columns are
    stored so that each later column is reduced against earlier pivots.
    """
    basis: dict[int, dict[int, Fraction]] = {}   # pivot row -> reduced column
    pivots: list[tuple[int, int]] = []
    for j, col in enumerate(cols):
        v = {r: Fraction(x) for r, x in col.items() if x}
        while v:
            r = min(v)
            if r in basis:
                b = basis[r]
                f = v[r] / b[r]
                for rr, x in b.items():
                    y = v.get(rr, 0) - f * x
                    if y:
                        v[rr] = y
                    else:
                        v.pop(rr, None)
            else:
                basis[r] = v
                pivots.append((j, r))
                break
    return basis, pivots


def rank_of_columns(cols: list[Mapping[int, Fraction]]) -> int:
    return len(_echelon(cols)[1])


def in_span(basis_cols: list[Mapping[int, Fraction]], v: Mapping[int, Fraction]) -> bool:
    return rank_of_columns(list(basis_cols) + [v]) == rank_of_columns(basis_cols)


def nullspace(cols: list[Mapping[int, Fraction]], ncols: int) -> list[dict[int, Fraction]]:
    """Basis of {x : sum_j x_j cols[j] = 0}, deterministic."""
    # Track combinations alongside reduction.
    basis: dict[int, tuple[dict[int, Fraction], dict[int, Fraction]]] = {}
    kernel: list[dict[int, Fraction]] = []
    for j in range(ncols):
        v = {r: Fraction(x) for r, x in cols[j].items() if x} if j < len(cols) else {}
        comb: dict[int, Fraction] = {j: Fraction(1)}
        while v:
            r = min(v)
            if r in basis:
                b, bc = basis[r]
                f = v[r] / b[r]
                for rr, x in b.items():
                    y = v.get(rr, 0) - f * x
                    if y:
                        v[rr] = y
                    else:
                        v.pop(rr, None)
                for cc, x in bc.items():
                    y = comb.get(cc, 0) - f * x
                    if y:
                        comb[cc] = y
                    else:
                        comb.pop(cc, None)
            else:
                basis[r] = (v, comb)
                break
        else:
            kernel.append(comb)
    return kernel


def solve(cols: list[Mapping[int, Fraction]], target: Mapping[int, Fraction]) -> dict[int, Fraction] | None:
    """Some x with sum_j x_j cols[j] = target, or None."""
    n = len(cols)
    ker = nullspace(list(cols) + [target], n + 1)
    for k in ker:
        if n in k and k[n]:
            s = -1 / k[n]
            return {j: v * s for j, v in k.items() if j != n and v}
    return None


# ----------------------------------------------------- complex reduction


class ComplexReducer:
    """Gaussian elimination of a finite chain complex over Q.

    ``d`` maps each generator to its boundary ``{target: coeff}``.  Pairs of
    generators joined by a nonzero entry are cancelled until the differential
    vanishes; the survivors index homology.  The log of cancellations gives
    the projection onto the reduced complex and the inclusion back.
    """

    def __init__(self, gens: Iterable[int], d: Mapping[int, Mapping[int, int]]):
        gens = sorted(gens)
        self.gens = gens
        gset = set(gens)
        cols: dict[int, dict[int, Fraction]] = {}
        rows: dict[int, dict[int, None]] = {g: {} for g in gens}
        for g in gens:
            col = {r: v for r, v in d.get(g, {}).items() if v and r in gset}
            cols[g] = col
            for r in col:
                rows[r][g] = None
        self._log: list[tuple[int, int, object, dict, dict]] = []
        heap = [(len(c), g) for g, c in cols.items() if c]
        heapq.heapify(heap)
        while heap:
            size, a = heapq.heappop(heap)
            col_a = cols.get(a)
            if not col_a or len(col_a) != size:
                if col_a:
                    heapq.heappush(heap, (len(col_a), a))
                continue
            b = min(col_a, key=lambda r: (abs(col_a[r]) != 1, len(rows[r]), r))
            lam = col_a[b]
            row_b = {x: cols[x][b] for x in rows[b]}
            self._log.append((a, b, lam, dict(col_a), row_b))
            # eliminate
            for x, cxb in row_b.items():
                if x == a:
                    continue
                col_x = cols[x]
                f = _div(cxb, lam)
                for y, v in col_a.items():
                    if y == b:
                        continue
                    nv = col_x.get(y, 0) - f * v
                    if nv:
                        if y not in col_x:
                            rows[y][x] = None
                        col_x[y] = nv
                    elif y in col_x:
                        del col_x[y]
                        del rows[y][x]
                del col_x[b]
                if col_x:
                    heapq.heappush(heap, (len(col_x), x))
            # drop a and b from the complex entirely
            for y in col_a:
                rows[y].pop(a, None)
            del cols[a]
            del rows[b]
            for x in rows.pop(a):
                cols[x].pop(a, None)
            for y in cols.pop(b):
                rows[y].pop(b, None)
        removed = set()
        for a, b, *_ in self._log:
            removed.add(a)
            removed.add(b)
        self.survivors = [g for g in gens if g not in removed]
        self._pos = {g: i for i, g in enumerate(self.survivors)}

    def project(self, vec: Mapping[int, object]) -> dict[int, Fraction]:
        """Coordinates (by survivor) of the image of ``vec`` in the reduced complex."""
        v = {g: c for g, c in vec.items() if c}
        for a, b, lam, col_a, _ in self._log:
            vb = v.get(b)
            if vb:
                f = _div(vb, lam)
                for y, x in col_a.items():
                    nv = v.get(y, 0) - f * x
                    if nv:
                        v[y] = nv
                    else:
                        v.pop(y, None)
            v.pop(a, None)
            v.pop(b, None)
        return {self._pos[g]: Fraction(c) for g, c in v.items() if c}

    def include(self, survivor: int) -> dict[int, Fraction]:
        """Cycle representing the homology class of survivor number ``survivor``."""
        v: dict[int, object] = {self.survivors[survivor]: 1}
        for a, b, lam, _, row_b in reversed(self._log):
            s = 0
            for x, c in row_b.items():
                if x in v:
                    s += v[x] * c
            if s:
                f = _div(s, lam)
                nv = v.get(a, 0) - f
                if nv:
                    v[a] = nv
                else:
                    v.pop(a, None)
        return {g: Fraction(c) for g, c in v.items() if c}


def _div(a, b):
    if b == 1:
        return a
    if b == -1:
        return -a
    if isinstance(a, int) and isinstance(b, int) and a % b == 0:
        return a // b
    return Fraction(a) / Fraction(b)
