"""sl2 and exterior current algebra modules on sutured homology, and their quiver form."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import linalg
from .homology import HomologyPresentation, induced_map
from .linalg import QMatrix
from .tqft import TrigradedComplex, sl2_action


class CurrentActionError(RuntimeError):
    pass


class DecompositionError(RuntimeError):
    pass


@dataclass
class GradedSl2Module:
    keys: list          # (i, jp, k) per basis vector
    e: QMatrix
    f: QMatrix
    h: QMatrix

    @property
    def dim(self) -> int:
        return len(self.keys)

    def dims(self) -> dict:
        out: dict = {}
        for key in self.keys:
            out[key] = out.get(key, 0) + 1
        return out

    def weight_indices(self, k: int, i: int | None = None, jp: int | None = None) -> list[int]:
        return [n for n, (a, b, c) in enumerate(self.keys)
                if c == k and (i is None or a == i) and (jp is None or b == jp)]


@dataclass
class CurrentModule:
    sl2: GradedSl2Module
    v2: QMatrix
    vm2: QMatrix
    v0: QMatrix

    def operators(self) -> dict[str, QMatrix]:
        return {"e": self.sl2.e, "f": self.sl2.f, "h": self.sl2.h,
                "v2": self.v2, "v0": self.v0, "v-2": self.vm2}


def sl2_module(cx: TrigradedComplex, H: HomologyPresentation) -> GradedSl2Module:
    if H.flavor != "d0":
        raise ValueError("sl2 module structure lives on sutured homology")
    ops = [induced_map(sl2_action(cx, x), H) for x in ("e", "f", "h")]
    return GradedSl2Module(list(H.basis), *ops)


def decompose_sl2(module: GradedSl2Module) -> dict[tuple[int, int, int], int]:
    """Multiplicity of V_(N){jp} in each homological degree: ``{(i, jp, N): mult}``."""
    dims = module.dims()
    out = {}
    for (i, jp, k), n in sorted(dims.items()):
        if k < 0:
            continue
        mult = n - dims.get((i, jp, k + 2), 0)
        if mult < 0:
            raise DecompositionError(f"negative multiplicity at i={i}, jp={jp}, N={k}")
        # highest weight vectors: kernel of e on the weight space
        src = module.weight_indices(k, i, jp)
        tgt = module.weight_indices(k + 2, i, jp)
        rank = module.e.submatrix(tgt, src).rank() if tgt else 0
        if len(src) - rank != mult:
            raise DecompositionError(f"rank of e disagrees with weight counts at i={i}, jp={jp}, N={k}")
        if mult:
            out[(i, jp, k)] = mult
    return out


def irreps_json(table: dict) -> list[dict]:
    return [{"i": i, "jp": jp, "N": N, "mult": m} for (i, jp, N), m in sorted(table.items())]


def reconstruct_dims(table: dict) -> dict:
    out: dict = {}
    for (i, jp, N), m in table.items():
        for k in range(-N, N + 1, 2):
            out[(i, jp, k)] = out.get((i, jp, k), 0) + m
    return out


def current_action(cx: TrigradedComplex, H: HomologyPresentation,
                   module: GradedSl2Module | None = None) -> CurrentModule:
    module = sl2_module(cx, H) if module is None else module
    v2 = induced_map(cx.operator("dleeplus"), H)
    vm2 = induced_map(cx.operator("dminus"), H)
    e, f = module.e, module.f
    v0 = e @ vm2 - vm2 @ e
    if v0 != -(f @ v2 - v2 @ f):
        raise CurrentActionError("[e, v-2] and -[f, v2] disagree on homology")
    return CurrentModule(module, v2, vm2, v0)


def _br(a: QMatrix, b: QMatrix, odd: bool) -> QMatrix:
    return a @ b + b @ a if odd else a @ b - b @ a


def verify_current_relations(M: CurrentModule) -> dict[str, bool]:
    e, f, h = M.sl2.e, M.sl2.f, M.sl2.h
    v2, v0, vm2 = M.v2, M.v0, M.vm2
    rep = {
        "[e,f]=h": _br(e, f, False) == h,
        "[h,e]=2e": _br(h, e, False) == e.scale(2),
        "[h,f]=-2f": _br(h, f, False) == f.scale(-2),
        "[e,v2]=0": _br(e, v2, False).is_zero(),
        "[e,v0]=-2v2": _br(e, v0, False) == v2.scale(-2),
        "[e,v-2]=v0=-[f,v2]": _br(e, vm2, False) == v0 and _br(f, v2, False) == -v0,
        "[f,v0]=2v-2": _br(f, v0, False) == vm2.scale(2),
        "[f,v-2]=0": _br(f, vm2, False).is_zero(),
        "[h,v2]=2v2": _br(h, v2, False) == v2.scale(2),
        "[h,v0]=0": _br(h, v0, False).is_zero(),
        "[h,v-2]=-2v-2": _br(h, vm2, False) == vm2.scale(-2),
    }
    vs = (v2, v0, vm2)
    rep["[vi,vj]=0"] = all(_br(a, b, True).is_zero() for a in vs for b in vs)
    return rep


def schur_bound(module: GradedSl2Module, n: int) -> bool:
    """e^(n+1) = f^(n+1) = 0 and every weight lies in [-n, n]."""
    if any(abs(k) > n for _, _, k in module.keys):
        return False
    return module.e.power(n + 1).is_zero() and module.f.power(n + 1).is_zero()


# ------------------------------------------------------------------ quiver


@dataclass
class QuiverRep:
    spaces: dict[int, list[dict]]          # m -> basis of E_m (vectors in homology coordinates)
    degrees: dict[int, list[tuple]]        # m -> (i, jp) of each basis vector
    alpha: dict[int, QMatrix]              # E_m -> E_{m+2}
    beta: dict[int, QMatrix]               # E_{m+2} -> E_m
    p: dict[int, QMatrix]                  # E_m -> E_m; eps_m = p_m / m
    relations: dict[str, bool] = field(default_factory=dict)
    weight_zero: dict[str, bool] = field(default_factory=dict)
    # the quadratic relation with coefficient i^2/(4(i+3)); generic modules violate it
    literal_coefficient: bool = True

    def eps(self, m: int) -> QMatrix | None:
        return None if m == 0 else self.p[m].scale(Fraction(1, m))

    def to_json(self) -> dict:
        def mats(d):
            return {str(m): {"shape": list(x.shape), "entries": x.triplets()} for m, x in sorted(d.items())}
        return {"E": {str(m): len(b) for m, b in sorted(self.spaces.items())},
                "alpha": mats(self.alpha), "beta": mats(self.beta), "p": mats(self.p),
                "relations": self.relations, "weight_zero_flagged": self.weight_zero,
                "literal_coefficient_holds": self.literal_coefficient}


def _coords(basis: list[dict], vec: dict, what: str) -> dict:
    if not vec:
        return {}
    x = linalg.solve(basis, vec)
    if x is None:
        raise DecompositionError(f"{what}: vector outside the expected highest weight space")
    return x


def _vec_add(*terms):
    out: dict = {}
    for coef, vec in terms:
        for g, x in vec.items():
            s = out.get(g, 0) + coef * x
            if s:
                out[g] = s
            else:
                out.pop(g, None)
    return out


def highest_weight_space(M: CurrentModule, m: int) -> tuple[list[dict], list[tuple]]:
    mod = M.sl2
    basis, degs = [], []
    groups = sorted({(i, jp) for i, jp, k in mod.keys if k == m})
    for i, jp in groups:
        src = mod.weight_indices(m, i, jp)
        tgt = mod.weight_indices(m + 2, i, jp)
        sub = mod.e.submatrix(tgt, src) if tgt else QMatrix(0, len(src))
        for v in linalg.nullspace(sub.columns(), len(src)):
            basis.append({src[a]: x for a, x in v.items()})
            degs.append((i, jp))
    return basis, degs


def to_quiver(M: CurrentModule) -> QuiverRep:
    weights = sorted({k for _, _, k in M.sl2.keys if k >= 0})
    E, D = {}, {}
    for m in weights:
        b, d = highest_weight_space(M, m)
        if b:
            E[m], D[m] = b, d
    f = M.sl2.f
    alpha, beta, p = {}, {}, {}
    q_ok = True
    for m, basis in E.items():
        up = E.get(m + 2, [])
        a_cols, p_cols = [], []
        for b in basis:
            v2b = M.v2.apply(b)
            a_cols.append({r: (m + 3) * x for r, x in _coords(up, v2b, f"v2 on E_{m}").items()})
            fv2b = f.apply(v2b)
            pb = _vec_add((1, M.v0.apply(b)), (Fraction(2, m + 2), fv2b))
            pc = _coords(basis, pb, f"p_{m}")
            p_cols.append(pc)
            # q_{m-2}(b) = v-2(b) - (1/m) f p(b) + 1/((m+1)(m+2)) f^2 v2(b)
            fpb = f.apply(pb)
            if m == 0 and fpb:
                raise DecompositionError("f p_0 should vanish on weight-zero highest weight vectors")
            terms = [(1, M.vm2.apply(b)), (Fraction(1, (m + 1) * (m + 2)), f.apply(fv2b))]
            if m:
                terms.append((-Fraction(1, m), fpb))
            qb = _vec_add(*terms)
            down = E.get(m - 2, [])
            if m - 2 < 0 or not down:
                q_ok = q_ok and not qb
                continue
            if m - 2 not in beta:
                beta[m - 2] = []
            beta[m - 2].append({r: Fraction(1, m) * x for r, x in _coords(down, qb, f"q_{m - 2}").items()})
        alpha[m] = QMatrix.from_columns(len(up), a_cols)
        p[m] = QMatrix.from_columns(len(basis), p_cols)
    beta_m = {m: QMatrix.from_columns(len(E[m]), cols) for m, cols in beta.items()}
    Q = QuiverRep(E, D, alpha, beta_m, p)
    _check_quiver(Q)
    Q.relations["q residual vanishes below weight 0"] = q_ok
    return Q


def _check_quiver(Q: QuiverRep) -> None:
    E = Q.spaces

    def dim(m):
        return len(E.get(m, []))

    def A(m):
        return Q.alpha.get(m) or QMatrix(dim(m + 2), dim(m))

    def B(m):
        return Q.beta.get(m) or QMatrix(dim(m), dim(m + 2))

    def P(m):
        return Q.p.get(m) or QMatrix(dim(m), dim(m))

    rel = {name: True for name in ("alpha alpha = 0", "beta beta = 0", "eps alpha + alpha eps = 0",
                                   "eps beta + beta eps = 0", "beta alpha + alpha beta + eps^2 = 0",
                                   "beta alpha + i^2(i+3)/4 eps^2 = 0")}
    zero: dict[str, bool] = {}
    top = max(E) if E else -1
    for i in range(0, top + 1):
        if not dim(i):
            continue
        checks = {
            "alpha alpha = 0": (A(i + 2) @ A(i)).is_zero(),
            "beta beta = 0": i < 2 or (B(i - 2) @ B(i)).is_zero(),
            # cleared of the denominators i and i+2 carried by eps
            "eps alpha + alpha eps = 0": (P(i + 2) @ A(i)).scale(i) + (A(i) @ P(i)).scale(i + 2) == QMatrix(dim(i + 2), dim(i)),
            "eps beta + beta eps = 0": (P(i) @ B(i)).scale(i + 2) + (B(i) @ P(i + 2)).scale(i) == QMatrix(dim(i), dim(i + 2)),
            "beta alpha + alpha beta + eps^2 = 0": ((B(i) @ A(i)) + (A(i - 2) @ B(i - 2) if i >= 2 else QMatrix(dim(i), dim(i)))).scale(i * i) + P(i) @ P(i) == QMatrix(dim(i), dim(i)),
            "beta alpha + i^2(i+3)/4 eps^2 = 0": (B(i) @ A(i)).scale(4) + (P(i) @ P(i)).scale(i + 3) == QMatrix(dim(i), dim(i)),
        }
        literal = (B(i) @ A(i)).scale(4 * (i + 3)) + P(i) @ P(i) == QMatrix(dim(i), dim(i))
        Q.literal_coefficient = Q.literal_coefficient and literal
        for name, ok in checks.items():
            if i == 0 and name in ("eps alpha + alpha eps = 0", "eps beta + beta eps = 0",
                                   "beta alpha + alpha beta + eps^2 = 0"):
                zero[name] = ok
            else:
                rel[name] = rel[name] and ok
    Q.relations.update(rel)
    Q.weight_zero.update(zero)


# -------------------------------------------------------- indecomposability


def endomorphism_algebra(M: CurrentModule) -> list[QMatrix]:
    """Basis of grading-preserving endomorphisms commuting with e, f, v2, v-2."""
    keys = M.sl2.keys
    n = len(keys)
    by_key: dict = {}
    for a, key in enumerate(keys):
        by_key.setdefault(key, []).append(a)
    unknowns = [(r, s) for idx in by_key.values() for r in idx for s in idx]
    ops = [M.sl2.e, M.sl2.f, M.v2, M.vm2]
    op_rows = [op.rows for op in ops]
    op_cols = [op.columns() for op in ops]
    cols = []
    for r, s in unknowns:
        # [E_rs, op] = E_rs op - op E_rs, flattened per operator block
        col: dict = {}
        for t, (rows, ocols) in enumerate(zip(op_rows, op_cols)):
            base = t * n * n
            for c, x in rows.get(s, {}).items():
                key = base + r * n + c
                col[key] = col.get(key, 0) + x
            for rr, x in ocols[r].items():
                key = base + rr * n + s
                col[key] = col.get(key, 0) - x
        cols.append({k: v for k, v in col.items() if v})
    out = []
    for v in linalg.nullspace(cols, len(unknowns)):
        rows: dict = {}
        for u, x in v.items():
            r, s = unknowns[u]
            rows.setdefault(r, {})[s] = x
        out.append(QMatrix(n, n, rows))
    return out


def _trace(m: QMatrix) -> Fraction:
    return sum((row.get(r, 0) for r, row in m.rows.items()), Fraction(0))


def is_indecomposable(M: CurrentModule) -> bool:
    """True when the graded endomorphism algebra is local with one-dimensional top.

    The radical is the kernel of the trace form (characteristic zero), so the
    semisimple quotient has dimension equal to the rank of the Gram matrix.
    """
    if M.sl2.dim == 0:
        return False
    basis = endomorphism_algebra(M)
    gram = [[_trace(a @ b) for b in basis] for a in basis]
    return QMatrix.from_dense(gram).rank() == 1


def module_report(M: CurrentModule, with_quiver: bool = True) -> dict:
    table = decompose_sl2(M.sl2)
    out = {"irreps": irreps_json(table), "current_relations": verify_current_relations(M)}
    if with_quiver:
        out["quiver"] = to_quiver(M).to_json()
    out["indecomposable"] = is_indecomposable(M)
    return out
