"""Mackey coefficients, the E^2 page, lacunary collapse and the rank-one Swan oracle."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bredon import CoefficientSystem, ConstantZ, chain_complex, homology
from .errors import ConsistencyError, ValidationError
from .exactalg import (
    AbGroup,
    congruent,
    identity,
    intmat,
    map_cokernel,
    map_kernel,
    matmul,
    well_defined,
    zeros,
)
from .glattice import FiniteGroup, GLattice, enumerate_subgroups

__all__ = [
    "MackeyData",
    "MACKEY_SCHEMA",
    "finite_field_mackey",
    "finite_field_k_group",
    "E2Page",
    "CollapseCertificate",
    "e2_page",
    "collapse_by_lacunarity",
    "SwanDegree",
    "swan_rank1",
    "swan_finite_field",
]

MACKEY_SCHEMA = "mackey/1"


class MackeyData(CoefficientSystem):
    """Mackey functor on class representatives.

    ``transfer[(k, h)]`` and ``restriction[(k, h)]`` are given for
    representatives with ``R_k ⊂ R_h``; transfer maps ``M(R_k) -> M(R_h)``,
    restriction the other way. ``conjugation[(k, g)]`` is the action of
    ``g ∈ N(R_k)`` on ``M(R_k)``; a class without any conjugation entries gets
    the trivial action. Missing transfers and restrictions are composed along
    chains of given ones.
    """

    def __init__(self, group: FiniteGroup, objects: Mapping[int, AbGroup], transfer=None, restriction=None,
                 conjugation=None, name: str | None = None, degree: int | None = None, strict: bool = False):
        self.group = group
        self.classes = enumerate_subgroups(group)
        self.objects = dict(objects)
        self.name = name
        self.degree = degree
        self.strict = strict
        self._tr = {k: intmat(v) for k, v in (transfer or {}).items()}
        self._res = {k: intmat(v) for k, v in (restriction or {}).items()}
        self._conj_given = {k: intmat(v) for k, v in (conjugation or {}).items()}
        self.warnings: list[str] = []
        for k in self.objects:
            if not 0 <= k < len(self.classes):
                raise ValidationError(f"unknown subgroup class {k}")
        self._conj = self._close_conjugations()
        self.validate()

    def __repr__(self):
        return f"MackeyData({self.name or ''}, {len(self.objects)} objects)"

    # -- structure -----------------------------------------------------------------

    def covers(self, k: int) -> bool:
        return k in self.objects

    def obj(self, k: int) -> AbGroup:
        if k not in self.objects:
            raise ValidationError(f"no object for subgroup class {self.classes[k].rep.label()}")
        return self.objects[k]

    def _close_conjugations(self) -> dict[tuple[int, int], np.ndarray]:
        G = self.group
        out = {}
        for k, M in self.objects.items():
            cls = self.classes[k]
            N = cls.normalizer
            acts = {r: identity(M.ngens) for r in cls.rep.elements}
            given = {g: A for (kk, g), A in self._conj_given.items() if kk == k}
            for g in given:
                if g not in N:
                    raise ValidationError(f"conjugating element {g} does not normalize class {k}")
            if not given:
                acts = {g: identity(M.ngens) for g in N.elements}
            frontier = list(acts)
            while frontier:
                nxt = []
                for x in frontier:
                    for g, A in given.items():
                        y = G.mul(g, x)
                        if y not in acts:
                            acts[y] = matmul(A, acts[x])
                            nxt.append(y)
                frontier = nxt
            if len(acts) != N.order:
                raise ValidationError(f"conjugations given for class {k} do not generate its normalizer")
            for g, A in given.items():
                if not congruent(acts[g], A, M):
                    raise ValidationError(f"conjugation by {g} on class {k} is inconsistent")
            for g, A in acts.items():
                out[(k, g)] = A
        return out

    def conj(self, k: int, g: int) -> np.ndarray:
        return self._conj[(k, g)]

    def _path(self, store, k: int, h: int, forward: bool):
        if k == h:
            return identity(self.obj(k).ngens)
        if (k, h) in store:
            return store[(k, h)]
        K, H = self.classes[k].rep, self.classes[h].rep
        for j in range(len(self.classes)):
            J = self.classes[j].rep
            if j in (k, h) or not (K.is_subgroup_of(J) and J.is_subgroup_of(H)):
                continue
            if (k, j) in store and j in self.objects:
                rest = self._path(store, j, h, forward)
                if rest is not None:
                    return matmul(rest, store[(k, j)]) if forward else matmul(store[(k, j)], rest)
        return None

    def transfer(self, k: int, h: int) -> np.ndarray:
        A = self._path(self._tr, k, h, True)
        if A is None:
            raise ValidationError(f"no transfer from class {k} to class {h}")
        return A

    def restriction(self, k: int, h: int) -> np.ndarray:
        """``M(R_h) -> M(R_k)`` for ``R_k ⊂ R_h``."""
        A = self._path(self._res, k, h, False)
        if A is None:
            raise ValidationError(f"no restriction from class {h} to class {k}")
        return A

    def morphism(self, k: int, h: int, y: int) -> np.ndarray:
        """Value on ``G/R_k -> G/R_h``: write ``y = n m`` with ``n ∈ N(R_k)``, ``m ∈ N(R_h)``."""
        G = self.group
        Nk, Nh = self.classes[k].normalizer, self.classes[h].normalizer
        for m in Nh.elements:
            n = G.mul(y, G.inverse[m])
            if n in Nk:
                if not self.classes[k].rep.is_subgroup_of(self.classes[h].rep):
                    break
                A = self.transfer(k, h)
                return matmul(self.conj(h, G.inverse[m]), A, self.conj(k, G.inverse[n]))
        raise ValidationError(f"orbit map along element {y} from class {k} to class {h} is not expressible in the given data")

    # -- validation ------------------------------------------------------------------

    def _fail(self, msg: str, soft: bool = False):
        if soft and not self.strict:
            self.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)
            return
        if self.strict:
            raise ConsistencyError(msg)
        raise ValidationError(msg)

    def validate(self):
        cl = self.classes
        for (k, h), A in list(self._tr.items()) + list(self._res.items()):
            if k not in self.objects or h not in self.objects:
                self._fail(f"map between classes {k} and {h} without objects")
            if not cl[k].rep.is_subgroup_of(cl[h].rep) or k == h:
                self._fail(f"class {k} is not properly contained in class {h}")
        for (k, h), A in self._tr.items():
            if A.shape != (self.objects[h].ngens, self.objects[k].ngens) or not well_defined(A, self.objects[k], self.objects[h]):
                self._fail(f"transfer {k}->{h} is not a homomorphism")
        for (k, h), A in self._res.items():
            if A.shape != (self.objects[k].ngens, self.objects[h].ngens) or not well_defined(A, self.objects[h], self.objects[k]):
                self._fail(f"restriction {h}->{k} is not a homomorphism")
        for (k, g), A in self._conj.items():
            M = self.objects[k]
            if A.shape != (M.ngens, M.ngens) or not well_defined(A, M, M):
                self._fail(f"conjugation by {g} on class {k} is not a homomorphism")
        G = self.group
        for (k, g), A in self._conj.items():
            for g2 in cl[k].normalizer.elements:
                if not congruent(matmul(A, self._conj[(k, g2)]), self._conj[(k, G.mul(g, g2))], self.objects[k]):
                    self._fail(f"conjugations on class {k} do not form an action")
        ks = sorted(self.objects)
        for k in ks:
            for h in ks:
                if k == h or not cl[k].rep.is_subgroup_of(cl[h].rep):
                    continue
                tr, res = self.transfer(k, h), self.restriction(k, h)
                Mk, Mh = self.objects[k], self.objects[h]
                index = cl[h].rep.order // cl[k].rep.order
                for j in ks:
                    if j in (k, h) or not (cl[k].rep.is_subgroup_of(cl[j].rep) and cl[j].rep.is_subgroup_of(cl[h].rep)):
                        continue
                    if not congruent(tr, matmul(self.transfer(j, h), self.transfer(k, j)), Mh):
                        self._fail(f"transfers along {k} < {j} < {h} do not compose")
                    if not congruent(res, matmul(self.restriction(k, j), self.restriction(j, h)), Mk):
                        self._fail(f"restrictions along {k} < {j} < {h} do not compose")
                for g in set(cl[k].normalizer.elements) & set(cl[h].normalizer.elements):
                    if not congruent(matmul(self._conj[(h, g)], tr), matmul(tr, self._conj[(k, g)]), Mh):
                        self._fail(f"conjugation by {g} does not commute with transfer {k}->{h}")
                    if not congruent(matmul(self._conj[(k, g)], res), matmul(res, self._conj[(h, g)]), Mk):
                        self._fail(f"conjugation by {g} does not commute with restriction {h}->{k}")
                if not congruent(matmul(tr, res), index * identity(Mh.ngens), Mh):
                    self._fail(f"transfer after restriction is not multiplication by {index} on class {h}", soft=True)
                if G.is_abelian:
                    # double cosets are cosets: res tr = sum of conjugations over H/K
                    total = zeros(Mk.ngens, Mk.ngens)
                    for coset in _cosets(G, cl[h].rep, cl[k].rep):
                        total = total + self._conj[(k, coset)]
                    if not congruent(matmul(res, tr), total, Mk):
                        self._fail(f"double coset formula fails for {k} < {h}")

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        cl = self.classes
        ks = sorted(self.objects)
        pos = {k: i for i, k in enumerate(ks)}
        return {
            "schema": MACKEY_SCHEMA,
            "name": self.name,
            "degree": self.degree,
            "group": self.group.to_json(),
            "classes": [list(cl[k].rep.elements) for k in ks],
            "objects": [self.objects[k].to_json() for k in ks],
            "transfer": [{"from": pos[k], "to": pos[h], "matrix": _rows(A)} for (k, h), A in sorted(self._tr.items())],
            "restriction": [{"from": pos[h], "to": pos[k], "matrix": _rows(A)} for (k, h), A in sorted(self._res.items())],
            "conjugation": [{"class": pos[k], "element": g, "matrix": _rows(A)} for (k, g), A in sorted(self._conj_given.items())],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "MackeyData":
        allowed = {"schema", "name", "degree", "group", "classes", "objects", "transfer", "restriction", "conjugation"}
        extra = set(data) - allowed
        if extra:
            raise ValidationError(f"unknown fields in Mackey data: {sorted(extra)}")
        if data.get("schema") != MACKEY_SCHEMA:
            raise ValidationError(f"unsupported Mackey schema {data.get('schema')!r}")
        try:
            G = FiniteGroup.from_json(data["group"])
            reps = {c.rep.elements: i for i, c in enumerate(enumerate_subgroups(G))}
            idx = []
            for els in data["classes"]:
                key = tuple(sorted(int(e) for e in els))
                if key not in reps:
                    raise ValidationError(f"{list(key)} is not a subgroup class representative")
                idx.append(reps[key])
            objects = {idx[i]: AbGroup.from_json(o) for i, o in enumerate(data["objects"])}
            tr = {(idx[e["from"]], idx[e["to"]]): e["matrix"] for e in data.get("transfer", [])}
            res = {(idx[e["to"]], idx[e["from"]]): e["matrix"] for e in data.get("restriction", [])}
            conj = {(idx[e["class"]], int(e["element"])): e["matrix"] for e in data.get("conjugation", [])}
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"malformed Mackey data: {exc}") from None
        if len(data["objects"]) != len(data["classes"]):
            raise ValidationError("classes and objects differ in length")
        return cls(G, objects, _shape(tr, objects, "tr"), _shape(res, objects, "res"), _shape(conj, objects, "conj"),
                   name=data.get("name"), degree=data.get("degree"))

    @classmethod
    def load(cls, path: str) -> "MackeyData":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read {path}: {exc}") from None
        return cls.from_json(data)


def _rows(A: np.ndarray) -> list[list[int]]:
    return [[int(x) for x in row] for row in A]


def _shape(store, objects, kind):
    out = {}
    for key, m in store.items():
        if kind == "tr":
            r, c = objects[key[1]].ngens, objects[key[0]].ngens
        elif kind == "res":
            r, c = objects[key[0]].ngens, objects[key[1]].ngens
        else:
            r = c = objects[key[0]].ngens
        out[key] = intmat(m, r, c) if r and c else zeros(r, c)
    return out


def _cosets(G: FiniteGroup, H, K) -> list[int]:
    """One representative per coset ``gK`` in ``H``."""
    seen, out = set(), []
    for h in H.elements:
        c = frozenset(G.mul(h, k) for k in K.elements)
        if c not in seen:
            seen.add(c)
            out.append(h)
    return out


# --------------------------------------------------------------------------
# Finite fields


def finite_field_k_group(q: int, n: int) -> AbGroup:
    """``K_n(F_q)``: ``Z``, ``Z/(q^i - 1)`` for ``n = 2i - 1``, and 0 in positive even degrees."""
    if n < 0:
        return AbGroup()
    if n == 0:
        return AbGroup(1)
    if n % 2 == 0:
        return AbGroup()
    return AbGroup.from_orders([q ** ((n + 1) // 2) - 1])


def _check_prime_power(q: int):
    if q < 2:
        raise ValidationError(f"{q} is not a prime power")
    p = next(d for d in range(2, q + 1) if q % d == 0)
    x = q
    while x % p == 0:
        x //= p
    if x != 1:
        raise ValidationError(f"{q} is not a prime power")


def finite_field_mackey(q: int, d: int, n: int) -> MackeyData:
    """``K_n`` of the subfields of ``F_{q^d}`` over ``Gal = C_d`` (element 1 is Frobenius)."""
    _check_prime_power(q)
    if d < 1 or n < 0:
        raise ValidationError("need d >= 1 and n >= 0")
    G = FiniteGroup.cyclic(d)
    classes = enumerate_subgroups(G)
    ext = {k: d // c.rep.order for k, c in enumerate(classes)}  # degree of the fixed field over F_q
    objects = {k: finite_field_k_group(q ** e, n) for k, e in ext.items()}
    tr, res, conj = {}, {}, {}
    for k, K in enumerate(classes):
        for h, H in enumerate(classes):
            if k == h or not K.rep.is_subgroup_of(H.rep):
                continue
            Mk, Mh = objects[k], objects[h]
            index = H.rep.order // K.rep.order
            if n == 0:
                tr[(k, h)] = intmat([[index]])
                res[(k, h)] = intmat([[1]])
            elif Mk.ngens and Mh.ngens:
                i = (n + 1) // 2
                tr[(k, h)] = intmat([[1]])
                res[(k, h)] = intmat([[(q ** (ext[k] * i) - 1) // (q ** (ext[h] * i) - 1)]])
            else:
                tr[(k, h)] = zeros(Mh.ngens, Mk.ngens)
                res[(k, h)] = zeros(Mk.ngens, Mh.ngens)
    if n % 2 == 1 and d > 1:
        i = (n + 1) // 2
        for k in objects:
            if objects[k].ngens:
                conj[(k, 1)] = intmat([[q ** i % objects[k].torsion[0]]])
    return MackeyData(G, objects, tr, res, conj, name=f"K_{n}(F_{q}^{d})", degree=n, strict=True)


# --------------------------------------------------------------------------
# E^2 page


@dataclass
class CollapseCertificate:
    collapses: bool
    reason: str
    graded: dict[int, list[tuple[int, AbGroup]]] = field(default_factory=dict)
    ambiguous: dict[int, bool] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "collapses": self.collapses,
            "reason": self.reason,
            "graded": {str(n): [[p, g.to_json()] for p, g in pieces] for n, pieces in sorted(self.graded.items())},
            "extension_ambiguous": {str(n): v for n, v in sorted(self.ambiguous.items())},
        }


@dataclass
class E2Page:
    rank: int
    qmin: int
    qmax: int
    table: dict[tuple[int, int], AbGroup]
    certificate: CollapseCertificate | None = None

    def __getitem__(self, pq: tuple[int, int]) -> AbGroup:
        p, q = pq
        if p < 0 or p > self.rank or q < 0:
            return AbGroup()
        return self.table[(p, q)]

    def to_json(self) -> dict:
        out = {
            "rank": self.rank,
            "q_range": [self.qmin, self.qmax],
            "E2": {f"{p},{q}": self.table[(p, q)].to_json() for q in range(self.qmin, self.qmax + 1) for p in range(self.rank + 1)},
        }
        if self.certificate is not None:
            out["collapse"] = self.certificate.to_json()
        return out

    def grid(self) -> str:
        """Text grid, ``q`` decreasing downwards as rows, ``p`` as columns."""
        head = ["q\\p"] + [str(p) for p in range(self.rank + 1)]
        rows = [head]
        for q in range(self.qmax, self.qmin - 1, -1):
            rows.append([str(q)] + [str(self.table[(p, q)]) for p in range(self.rank + 1)])
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def _lattice_over(lat: GLattice, G: FiniteGroup) -> GLattice:
    if lat.group.order == G.order and lat.group.table == G.table:
        return lat
    if lat.group.order == 1:
        return GLattice.trivial(G, lat.rank, name=lat.name)
    raise ValidationError("lattice and coefficients are defined over different groups")


def e2_page(lat: GLattice, coefficients: Mapping[int, CoefficientSystem] | Sequence[CoefficientSystem], q_range: tuple[int, int],
            X=None, backend: str = "auto") -> E2Page:
    """``E^2_{p,q} = H_p^G(X; M_q)``; row ``q = 0`` uses the constant functor."""
    from .eqcell import build_complex

    qmin, qmax = q_range
    if qmin > qmax or qmin < 0:
        raise ValidationError("invalid q range")
    coeffs = dict(enumerate(coefficients)) if not isinstance(coefficients, Mapping) else dict(coefficients)
    if coeffs:
        G = next(iter(coeffs.values())).group
        lat = _lattice_over(lat, G)
    if X is None:
        X = build_complex(lat, backend)
    table = {}
    for q in range(qmin, qmax + 1):
        if q == 0:
            M = ConstantZ(X.group)
        else:
            if q not in coeffs:
                raise ValidationError(f"no coefficients for q = {q}")
            M = coeffs[q]
        H = homology(chain_complex(X, M))
        for p in range(lat.rank + 1):
            table[(p, q)] = H[p]
    page = E2Page(lat.rank, qmin, qmax, table)
    page.certificate = collapse_by_lacunarity(page)
    return page


def collapse_by_lacunarity(page: E2Page) -> CollapseCertificate:
    """Certify degeneration when every ``d_r`` (r >= 2) leaves the strip ``0 <= p <= rank``."""
    if page.rank <= 1:
        reason = f"rank {page.rank}: d_r changes p by r >= 2, which leaves the strip 0 <= p <= {page.rank}"
        graded, amb = {}, {}
        for n in range(0, page.qmax + 1):
            if any(0 <= n - p < page.qmin for p in range(page.rank + 1)):
                continue  # a contributing row was not computed
            pieces = [(p, page[(p, n - p)]) for p in range(page.rank + 1)]
            graded[n] = pieces
            amb[n] = sum(1 for _, g in pieces if not g.is_trivial()) >= 2
        return CollapseCertificate(True, reason, graded, amb)
    return CollapseCertificate(False, f"rank {page.rank}: d_2 from column 2 to column 0 is not excluded by degree")


# --------------------------------------------------------------------------
# Swan oracle for rank-one norm tori


@dataclass
class SwanDegree:
    degree: int
    split: AbGroup
    coker: AbGroup
    ker: AbGroup

    @property
    def ambiguous(self) -> bool:
        return not self.coker.is_trivial() and not self.ker.is_trivial()

    def graded(self) -> list[AbGroup]:
        """Pieces in filtration order: ``K_n(F) ⊕ coker`` then ``ker``."""
        return [self.split + self.coker, self.ker]

    def to_json(self) -> dict:
        return {"degree": self.degree, "split": self.split.to_json(), "coker": self.coker.to_json(),
                "ker": self.ker.to_json(), "extension_ambiguous": self.ambiguous}


def swan_rank1(KF: Sequence[AbGroup], KE: Sequence[AbGroup], res_scalars: Sequence) -> list[SwanDegree]:
    """``K_i(T) = K_i(F) ⊕ C_i`` with ``0 -> coker(ρ_i) -> C_i -> ker(ρ_{i-1}) -> 0``.

    ``res_scalars[i]`` is the matrix of ``K_i(E) -> K_i(F)``.
    """
    if not (len(KF) == len(KE) == len(res_scalars)):
        raise ValidationError("K-groups and maps must be given through the same degree")
    mats = []
    for i, (a, b, A) in enumerate(zip(KF, KE, res_scalars)):
        A = intmat(A, a.ngens, b.ngens) if a.ngens and b.ngens else zeros(a.ngens, b.ngens)
        if A.shape != (a.ngens, b.ngens):
            raise ValidationError(f"map in degree {i} has the wrong shape")
        if not well_defined(A, b, a):
            raise ValidationError(f"map in degree {i} is not a homomorphism")
        mats.append(A)
    out = []
    for i in range(len(KF)):
        coker = map_cokernel(mats[i], KE[i], KF[i])
        ker = map_kernel(mats[i - 1], KE[i - 1], KF[i - 1]) if i else AbGroup()
        out.append(SwanDegree(i, KF[i], coker, ker))
    return out


def swan_finite_field(q: int, nmax: int) -> list[SwanDegree]:
    """Swan data for ``F_q`` and its quadratic extension, maps = restriction of scalars."""
    KF, KE, maps = [], [], []
    for i in range(nmax + 1):
        M = finite_field_mackey(q, 2, i)
        e, G = 0, 1  # class 0 is the trivial subgroup, class 1 the whole group
        KF.append(M.obj(G))
        KE.append(M.obj(e))
        maps.append(M.transfer(e, G))
    return swan_rank1(KF, KE, maps)
