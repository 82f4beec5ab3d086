"""Bredon homology with covariant coefficients, and two presentations of ``H_0``.

A coefficient system is queried only on class representatives: ``obj(k)`` is
its value on ``G/R_k`` and ``morphism(k, h, y)`` its value on the G-map
``G/R_k -> G/R_h, gR_k -> gyR_h`` (defined when ``y^-1 R_k y ⊆ R_h``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .errors import ConsistencyError, ValidationError
from .exactalg import (
    AbGroup,
    group_from_presentation,
    intmat,
    kernel_basis,
    matmul,
    solve_full_rank,
    sparse_invariant_factors,
    zeros,
)
from .glattice import FiniteGroup, GLattice, Subgroup, class_of, enumerate_subgroups
from .groupcoh import h1, h1_conjugation, h1_restriction

__all__ = [
    "CoefficientSystem",
    "ConstantZ",
    "constant_Z",
    "BredonChainComplex",
    "chain_complex",
    "homology",
    "bredon_homology",
    "Presentation",
    "coend_h0",
    "mp_k0",
    "homology_to_json",
    "homology_table",
    "morphisms",
]


def morphisms(G: FiniteGroup, k: int, h: int) -> list[int]:
    """Elements ``y`` with ``y^-1 R_k y ⊆ R_h``, one per coset ``y R_h``."""
    classes = enumerate_subgroups(G)
    K, H = classes[k].rep, classes[h].rep
    inv = G.inverse
    out, seen = [], set()
    for y in range(G.order):
        coset = frozenset(G.mul(y, x) for x in H.elements)
        if coset in seen:
            continue
        if all(G.mul(G.mul(inv[y], x), y) in H for x in K.elements):
            seen.add(coset)
            out.append(y)
    return out


class CoefficientSystem:
    """Covariant functor on the orbit category, evaluated on class representatives."""

    group: FiniteGroup

    def obj(self, k: int) -> AbGroup:
        raise NotImplementedError

    def morphism(self, k: int, h: int, y: int) -> np.ndarray:
        raise NotImplementedError

    def covers(self, k: int) -> bool:
        return True

    def projection(self, k: int, h: int) -> np.ndarray:
        """Value on the projection ``G/R_k -> G/R_h`` (requires ``R_k ⊆ R_h``)."""
        classes = enumerate_subgroups(self.group)
        if not classes[k].rep.is_subgroup_of(classes[h].rep):
            raise ValidationError("projection needs nested representatives")
        return self.morphism(k, h, 0)


class ConstantZ(CoefficientSystem):
    """``Z`` on every orbit; the projection ``G/K -> G/H`` multiplies by ``[H:K]``."""

    def __init__(self, group: FiniteGroup):
        self.group = group

    def obj(self, k: int) -> AbGroup:
        return AbGroup(1)

    def morphism(self, k: int, h: int, y: int) -> np.ndarray:
        classes = enumerate_subgroups(self.group)
        return intmat([[classes[h].rep.order // classes[k].rep.order]])


def constant_Z(G: FiniteGroup) -> ConstantZ:
    return ConstantZ(G)


@dataclass
class BredonChainComplex:
    """Chains ``C_p = ⊕ M(G/G_σ)`` over orbit representatives ``σ``.

    ``generators[p]`` lists (cell, class index) pairs; each contributes the
    standard generators of its object, whose orders are in ``orders[p]``
    (0 for a free generator). ``columns[p][j]`` is the sparse image of the
    j-th generator of ``C_p`` in ``C_{p-1}``.
    """

    complex: object
    coefficients: CoefficientSystem
    generators: list[list[tuple[int, int]]]
    orders: list[list[int]]
    columns: list[list[dict[int, int]]]
    valid_degrees: int

    def rank(self, p: int) -> int:
        return len(self.orders[p]) if 0 <= p < len(self.orders) else 0

    def boundary_matrix(self, p: int) -> np.ndarray:
        M = zeros(self.rank(p - 1), self.rank(p))
        if 0 < p < len(self.columns):
            for j, col in enumerate(self.columns[p]):
                for i, v in col.items():
                    M[i, j] = v
        return M


def _transporters(X, p: int):
    """Per p-cell: (orbit representative, smallest g carrying the cell to it)."""
    N = X.ncells(p)
    rep = np.full(N, -1, dtype=np.int64)
    for orb in X.orbits(p):
        rep[orb] = orb[0]
    trans = np.full(N, -1, dtype=np.int64)
    for g in range(X.group.order):
        hit = (X.perm[p][g] == rep) & (trans < 0)
        trans[hit] = g
    return rep, trans


def _frame(X):
    """Coefficient-independent data: orbit representatives, their classes, face transporters.

    Cached on the complex, since every coefficient system needs the same frame.
    """
    cached = getattr(X, "_bredon_frame", None)
    if cached is not None:
        return cached
    G = X.group
    reps, info, faces = [], [], [None]
    for p in range(X.top_degree + 1):
        rp, ip = [], {}
        for orb in X.orbits(p):
            sigma = orb[0]
            S = X.stabilizer(p, sigma)
            k, cls = class_of(S)
            ip[sigma] = (k, G.inverse[cls.transporter(S)])
            rp.append(sigma)
        reps.append(rp)
        info.append(ip)
    for p in range(1, X.top_degree + 1):
        rep, trans = _transporters(X, p - 1)
        fp = {}
        for sigma in reps[p]:
            k, a = info[p][sigma]
            out = []
            for tau, s in X.boundary[p][sigma]:
                t_rep, h = int(rep[tau]), int(trans[tau])
                eps = int(X.sign[p - 1][h][tau])
                kt, at = info[p - 1][t_rep]
                y = G.mul(G.mul(a, G.inverse[h]), G.inverse[at])
                out.append((t_rep, kt, y, s * eps))
            fp[sigma] = out
        faces.append(fp)
    frame = (reps, info, faces)
    X._bredon_frame = frame
    return frame


def chain_complex(X, M: CoefficientSystem) -> BredonChainComplex:
    """Bredon chains of ``X`` with coefficients ``M``."""
    G = X.group
    if M.group.order != G.order:
        raise ValidationError("coefficient system is defined over a different group")
    classes = enumerate_subgroups(G)
    top = X.top_degree
    reps, info, faces = _frame(X)
    objs: dict[int, AbGroup] = {}
    gens, orders, offsets = [], [], []
    for p in range(top + 1):
        gp, op, off = [], [], {}
        for sigma in reps[p]:
            k, _ = info[p][sigma]
            if k not in objs:
                if not M.covers(k):
                    raise ValidationError(f"coefficients do not cover the stabilizer class {classes[k].rep.label()}")
                objs[k] = M.obj(k)
            off[sigma] = len(op)
            gp.append((sigma, k))
            op.extend(objs[k].orders)
        gens.append(gp)
        orders.append(op)
        offsets.append(off)
    memo: dict[tuple[int, int, int], list[tuple[int, int, int]]] = {}

    def entries(k, kt, y):
        key = (k, kt, y)
        if key not in memo:
            A = M.morphism(k, kt, y)
            memo[key] = [(i, j, int(A[i, j])) for i in range(A.shape[0]) for j in range(A.shape[1]) if A[i, j]]
        return memo[key]

    columns: list[list[dict[int, int]]] = [[{} for _ in orders[0]]]
    for p in range(1, top + 1):
        cols = []
        for sigma, k in gens[p]:
            block: list[dict[int, int]] = [dict() for _ in range(objs[k].ngens)]
            for t_rep, kt, y, sign in faces[p][sigma]:
                base = offsets[p - 1][t_rep]
                for i, j, v in entries(k, kt, y):
                    col = block[j]
                    col[base + i] = col.get(base + i, 0) + v * sign
            for col in block:
                cols.append({i: v for i, v in col.items() if v})
        columns.append(cols)
    valid = top + 1 if top == X.dimension else top
    return BredonChainComplex(X, M, gens, orders, columns, valid)


def _free_homology(ranks: list[int], columns: list[list[dict[int, int]]]) -> list[AbGroup]:
    n = len(ranks)
    rk = [0] * (n + 1)
    tors: list[list[int]] = [[] for _ in range(n + 1)]
    for p in range(1, n):
        rk[p], tors[p] = sparse_invariant_factors(columns[p], ranks[p - 1])
    return [AbGroup.from_orders(tors[p + 1], ranks[p] - rk[p] - rk[p + 1]) for p in range(n)]


def _compose_zero(cols_hi: list[dict[int, int]], cols_lo: list[dict[int, int]]) -> bool:
    for col in cols_hi:
        acc: dict[int, int] = {}
        for j, v in col.items():
            for i, w in cols_lo[j].items():
                acc[i] = acc.get(i, 0) + v * w
        if any(acc.values()):
            return False
    return True


def _cone(C: BredonChainComplex, n: int):
    """Free complex quasi-isomorphic to ``C``: ``F_p ⊕ F'_{p-1}``, ``F'`` the torsion relations."""
    tors = [[i for i, d in enumerate(C.orders[p]) if d] for p in range(n)]
    tpos = [{i: k for k, i in enumerate(t)} for t in tors]
    ranks = [C.rank(p) + (len(tors[p - 1]) if p else 0) for p in range(n)]
    cols_out: list[list[dict[int, int]]] = [[{} for _ in range(ranks[0])]]
    for p in range(1, n):
        cols = [dict(c) for c in C.columns[p]]
        # relation generators of C_{p-1}: y -> (R y, -E y)
        for i in tors[p - 1]:
            r = C.orders[p - 1][i]
            col = {i: r}
            if p >= 2:
                for i2, v in C.columns[p - 1][i].items():
                    r2 = C.orders[p - 2][i2]
                    if r2 == 0:
                        if v:
                            raise ConsistencyError("torsion generator maps to a free one")
                        continue
                    if (v * r) % r2:
                        raise ConsistencyError("boundary is not well defined on torsion chains")
                    col[C.rank(p - 1) + tpos[p - 2][i2]] = -(v * r) // r2
            cols.append(col)
        cols_out.append(cols)
    return ranks, cols_out


def _dense_homology(C: BredonChainComplex, n: int) -> list[AbGroup]:
    out = []
    for p in range(n):
        np_ = C.rank(p)
        tors_prev = [i for i, d in enumerate(C.orders[p - 1]) if d] if p else []
        D = C.boundary_matrix(p) if p else zeros(0, np_)
        R = zeros(D.shape[0], len(tors_prev))
        for k, i in enumerate(tors_prev):
            R[i, k] = C.orders[p - 1][i]
        A = np.concatenate([D, R], axis=1) if D.shape[0] else zeros(0, np_ + len(tors_prev))
        K = kernel_basis(A) if A.shape[0] else intmat(np.eye(np_ + len(tors_prev), dtype=int).tolist(), np_ + len(tors_prev), np_ + len(tors_prev))
        Z = K[:np_, :]
        Dn = C.boundary_matrix(p + 1) if p + 1 < len(C.columns) else zeros(np_, 0)
        tors_here = [i for i, d in enumerate(C.orders[p]) if d]
        Rn = zeros(np_, len(tors_here))
        for k, i in enumerate(tors_here):
            Rn[i, k] = C.orders[p][i]
        B = np.concatenate([Dn, Rn], axis=1)
        if Z.shape[1] == 0:
            out.append(AbGroup())
            continue
        Y = solve_full_rank(Z, B)
        out.append(group_from_presentation(Z.shape[1], Y.T))
    return out


def homology(C: BredonChainComplex) -> list[AbGroup]:
    """``H_p`` for every degree the chains determine (all of them for a full complex)."""
    n = C.valid_degrees
    m = len(C.orders)
    P = _Padded(C, m)
    if all(d == 0 for p in range(m) for d in C.orders[p]):
        return _free_homology([P.rank(p) for p in range(m + 1)], P.columns)[:n]
    if all(_compose_zero(C.columns[p], C.columns[p - 1]) for p in range(2, m)):
        uniform = {d for p in range(m) for d in C.orders[p]}
        if len(uniform) == 1:
            return _uct_homology(P, m, uniform.pop())[:n]
        ranks, cols = _cone(P, m + 1)
        return _free_homology(ranks, cols)[:n]
    return _dense_homology(C, n)


def _uct_homology(P: "_Padded", m: int, order: int) -> list[AbGroup]:
    """All generators of order ``order``: the chains are a free complex mod ``order``.

    Universal coefficients: ``H_p = H_p(F) ⊗ Z/order ⊕ Tor(H_{p-1}(F), Z/order)``.
    """
    free = _free_homology([P.rank(p) for p in range(m + 1)], P.columns)
    out = []
    for p in range(m):
        tensor = [order] * free[p].free_rank + [gcd(d, order) for d in free[p].torsion]
        tor = [gcd(d, order) for d in free[p - 1].torsion] if p else []
        out.append(AbGroup.from_orders(tensor + tor))
    return out


class _Padded:
    """View of a chain complex with an empty degree appended on top."""

    def __init__(self, C: BredonChainComplex, m: int):
        self.orders = C.orders[:m] + [[]]
        self.columns = C.columns[:m] + [[]]

    def rank(self, p: int) -> int:
        return len(self.orders[p]) if 0 <= p < len(self.orders) else 0


def bredon_homology(X, M: CoefficientSystem | None = None) -> list[AbGroup]:
    return homology(chain_complex(X, M if M is not None else ConstantZ(X.group)))


# --------------------------------------------------------------------------
# H_0 presentations


@dataclass
class Presentation:
    group: AbGroup
    generators: list[str]
    relations: list[list[int]] = field(repr=False)

    def to_json(self) -> dict:
        return {"group": self.group.to_json(), "generators": self.generators, "relations": self.relations}


def _present(labels: list[str], rels: list[list[int]]) -> Presentation:
    uniq = sorted({tuple(r) for r in rels if any(r)})
    rows = [list(r) for r in uniq]
    grp = group_from_presentation(len(labels), intmat(rows, len(rows), len(labels)) if rows else zeros(0, len(labels)))
    return Presentation(grp, labels, rows)


def coend_h0(X, lat: GLattice | None = None) -> Presentation:
    """``H_0`` with ``Z``-coefficients as a quotient of ``⊕_H Z[π_0(X^H)]``.

    For each orbit map ``f_y: G/K -> G/H`` and component ``c`` of ``X^H``:
    ``gen_K(y·c) = [H : y^-1 K y] gen_H(c)``.
    """
    from .eqcell import fixed_subcomplex

    G = X.group
    classes = enumerate_subgroups(G)
    comps, where, base = [], [], []
    labels: list[str] = []
    for k, cls in enumerate(classes):
        F = fixed_subcomplex(X, cls.rep)
        comps.append(F.components)
        where.append({v: i for i, comp in enumerate(F.components) for v in comp})
        base.append(len(labels))
        labels.extend(f"{cls.rep.label()}:c{i}" for i in range(F.count))
    rels = []
    for h, H in enumerate(classes):
        for k, K in enumerate(classes):
            for y in morphisms(G, k, h):
                index = H.rep.order // K.rep.order
                for i, comp in enumerate(comps[h]):
                    w = int(X.perm[0][y][comp[0]])
                    if w not in where[k]:
                        raise ConsistencyError("image of a fixed component is not fixed")
                    row = [0] * len(labels)
                    row[base[h] + i] += index
                    row[base[k] + where[k][w]] -= 1
                    rels.append(row)
    return _present(labels, rels)


def mp_k0(lat: GLattice) -> Presentation:
    """``K_0`` as a quotient of ``⊕_H Z[H^1(H, Λ)]`` by ``[H:K]·(L) - (res L)``."""
    G = lat.group
    classes = enumerate_subgroups(G)
    elems, base = [], []
    labels: list[str] = []
    for cls in classes:
        E = h1(lat, cls.rep).elements()
        elems.append({e: i for i, e in enumerate(E)})
        base.append(len(labels))
        labels.extend(f"{cls.rep.label()}:{list(e)}" for e in E)
    rels = []
    inv = G.inverse
    for h, H in enumerate(classes):
        src = h1(lat, H.rep)
        for k, K in enumerate(classes):
            tgt = h1(lat, K.rep)
            for y in morphisms(G, k, h):
                S = K.rep.conjugate(inv[y])  # y^-1 K y ⊆ H
                A = matmul(h1_conjugation(lat, y, S), h1_restriction(lat, S, H.rep))
                index = H.rep.order // K.rep.order
                for e, i in elems[h].items():
                    img = tgt.group.reduce([int(x) for x in matmul(A, intmat([list(e)], 1, len(e)).T)[:, 0]]) if e else ()
                    row = [0] * len(labels)
                    row[base[h] + i] += index
                    row[base[k] + elems[k][img]] -= 1
                    rels.append(row)
    return _present(labels, rels)


# --------------------------------------------------------------------------
# Output


def homology_to_json(groups: list[AbGroup]) -> dict:
    return {"H": [g.to_json() for g in groups]}


def homology_table(groups: list[AbGroup], label: str = "H") -> str:
    rows = [(f"{label}_{p}", str(g)) for p, g in enumerate(groups)]
    w = max((len(a) for a, _ in rows), default=0)
    return "\n".join(f"{a.ljust(w)}  {b}" for a, b in rows)
