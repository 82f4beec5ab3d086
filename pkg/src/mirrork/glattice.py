"""Finite groups, their subgroups, and integral lattices with group action.

A :class:`GLattice` is the character lattice of a torus: a finite group acting
on ``Z^r`` through unimodular matrices. Matrices act on column vectors.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConsistencyError, UnsupportedError, ValidationError
from .exactalg import (
    determinant,
    identity,
    intmat,
    kernel_basis,
    matmul,
    smith_normal_form,
    zeros,
)

GROUP_ORDER_CAP = 64
GLATTICE_SCHEMA = "glattice/1"


def max_group_order() -> int:
    raw = os.environ.get("MIRRORK_MAX_GROUP_ORDER")
    if raw is None:
        return GROUP_ORDER_CAP
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"MIRRORK_MAX_GROUP_ORDER={raw!r} is not an integer") from None


# --------------------------------------------------------------------------
# Groups


class FiniteGroup:
    """A finite group given by its Cayley table.

    ``table[a][b]`` is the index of the product ``a*b``; index 0 must be the
    identity. The table is validated (associativity, identity, inverses) at
    construction.
    """

    def __init__(self, table: Sequence[Sequence[int]], labels: Sequence[str] | None = None, name: str | None = None):
        n = len(table)
        if n == 0:
            raise ValidationError("group table is empty")
        rows = []
        for row in table:
            if len(row) != n:
                raise ValidationError("group table is not square")
            r = tuple(int(x) for x in row)
            if any(not 0 <= x < n for x in r):
                raise ValidationError("group table entry out of range")
            rows.append(r)
        self.table: tuple[tuple[int, ...], ...] = tuple(rows)
        self.order = n
        self.name = name
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
        if len(self.labels) != n:
            raise ValidationError("wrong number of element labels")
        self._validate()
        self.inverse = tuple(self.table[a].index(0) for a in range(n))

    def _validate(self):
        n, t = self.order, self.table
        for a in range(n):
            if t[0][a] != a or t[a][0] != a:
                raise ValidationError("index 0 is not a two-sided identity")
            if sorted(t[a]) != list(range(n)):
                raise ValidationError(f"row {a} of the group table is not a permutation")
            if 0 not in t[a]:
                raise ValidationError(f"element {a} has no inverse")
        for a in range(n):
            ta = t[a]
            for b in range(n):
                tab = t[ta[b]]
                tb = t[b]
                for c in range(n):
                    if tab[c] != ta[tb[c]]:
                        raise ValidationError(f"table is not associative at ({a}, {b}, {c})")

    def __repr__(self):
        return f"FiniteGroup({self.name or 'order %d' % self.order})"

    def __len__(self):
        return self.order

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def conjugate(self, g: int, h: int) -> int:
        """``g h g^-1``."""
        return self.table[self.table[g][h]][self.inverse[g]]

    def element_order(self, g: int) -> int:
        k, x = 1, g
        while x != 0:
            x = self.table[x][g]
            k += 1
        return k

    @cached_property
    def is_abelian(self) -> bool:
        t = self.table
        return all(t[a][b] == t[b][a] for a in range(self.order) for b in range(a))

    def closure(self, gens: Iterable[int]) -> frozenset[int]:
        gens = [g for g in set(gens) if g != 0]
        elems = {0}
        frontier = [0]
        while frontier:
            new = []
            for x in frontier:
                for s in gens:
                    y = self.table[x][s]
                    if y not in elems:
                        elems.add(y)
                        new.append(y)
            frontier = new
        return frozenset(elems)

    def generators(self) -> tuple[int, ...]:
        return Subgroup(self, tuple(range(self.order))).generators

    @cached_property
    def whole(self) -> "Subgroup":
        return Subgroup(self, tuple(range(self.order)))

    @cached_property
    def trivial_subgroup(self) -> "Subgroup":
        return Subgroup(self, (0,))

    def subgroup(self, elements: Iterable[int]) -> "Subgroup":
        elems = tuple(sorted(set(int(e) for e in elements)))
        if not elems or elems[0] != 0 or self.closure(elems) != frozenset(elems):
            raise ValidationError(f"{list(elems)} is not a subgroup")
        return Subgroup(self, elems)

    def subgroup_classes(self) -> list["SubgroupClass"]:
        return enumerate_subgroups(self)

    # -- constructors --------------------------------------------------

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroup":
        table = [[(a + b) % n for b in range(n)] for a in range(n)]
        return cls(table, labels=[f"g^{k}" if k else "e" for k in range(n)], name=f"C{n}")

    @classmethod
    def trivial(cls) -> "FiniteGroup":
        return cls([[0]], labels=["e"], name="C1")

    @classmethod
    def from_permutations(cls, generators: Sequence[Sequence[int]], name: str | None = None) -> "FiniteGroup":
        """Group generated by permutations of ``{0..m-1}``.

        Elements are ordered lexicographically as tuples, so the identity gets
        index 0. The product ``a*b`` is the composition "apply ``b`` first".
        """
        gens = [tuple(int(x) for x in p) for p in generators]
        if not gens:
            return cls.trivial()
        m = len(gens[0])
        for p in gens:
            if len(p) != m or sorted(p) != list(range(m)):
                raise ValidationError(f"{list(p)} is not a permutation of 0..{m - 1}")
        ident = tuple(range(m))
        elems = {ident}
        frontier = [ident]
        cap = max_group_order()
        while frontier:
            new = []
            for x in frontier:
                for s in gens:
                    y = tuple(s[x[i]] for i in range(m))
                    if y not in elems:
                        elems.add(y)
                        new.append(y)
                        if len(elems) > cap:
                            raise UnsupportedError(f"permutation group exceeds order cap {cap}")
            frontier = new
        ordered = sorted(elems)
        index = {p: i for i, p in enumerate(ordered)}
        table = [[index[tuple(a[b[i]] for i in range(m))] for b in ordered] for a in ordered]
        labels = ["(" + " ".join(map(str, p)) + ")" for p in ordered]
        grp = cls(table, labels=labels, name=name)
        grp.permutations = tuple(ordered)
        return grp

    @classmethod
    def symmetric(cls, n: int) -> "FiniteGroup":
        if n <= 1:
            return cls.trivial()
        gens = [tuple([1, 0] + list(range(2, n))), tuple(list(range(1, n)) + [0])]
        return cls.from_permutations(gens, name=f"S{n}")

    def to_json(self) -> dict:
        return {"order": self.order, "table": [list(r) for r in self.table]}

    @classmethod
    def from_json(cls, data: Mapping) -> "FiniteGroup":
        if "table" in data:
            grp = cls(data["table"], labels=data.get("labels"), name=data.get("name"))
            if "order" in data and int(data["order"]) != grp.order:
                raise ValidationError("group 'order' disagrees with the table")
            return grp
        if "perm_generators" in data:
            return cls.from_permutations(data["perm_generators"], name=data.get("name"))
        raise ValidationError("group needs a 'table' or 'perm_generators'")


@dataclass(frozen=True)
class Subgroup:
    group: FiniteGroup = field(compare=False, repr=False)
    elements: tuple[int, ...]

    def __len__(self):
        return len(self.elements)

    @property
    def order(self) -> int:
        return len(self.elements)

    def __contains__(self, g: int) -> bool:
        return g in self._set

    @cached_property
    def _set(self) -> frozenset[int]:
        return frozenset(self.elements)

    def index(self) -> int:
        return self.group.order // self.order

    def index_in(self, other: "Subgroup") -> int:
        return other.order // self.order

    def is_subgroup_of(self, other: "Subgroup") -> bool:
        return self._set <= other._set

    def conjugate(self, g: int) -> "Subgroup":
        """``g H g^-1``."""
        G = self.group
        return Subgroup(G, tuple(sorted(G.conjugate(g, h) for h in self.elements)))

    @cached_property
    def generators(self) -> tuple[int, ...]:
        """A small generating set, chosen greedily by element index."""
        G = self.group
        gens: list[int] = []
        span = frozenset([0])
        for h in self.elements:
            if h not in span:
                gens.append(h)
                span = G.closure(gens)
            if len(span) == self.order:
                break
        return tuple(gens)

    def is_normal(self) -> bool:
        return all(self.conjugate(g) == self for g in range(self.group.order))

    def cosets(self) -> list[tuple[int, ...]]:
        """Left cosets ``gH`` ordered by their smallest element index."""
        G = self.group
        seen: set[int] = set()
        out = []
        for g in range(G.order):
            if g in seen:
                continue
            coset = tuple(sorted(G.mul(g, h) for h in self.elements))
            seen.update(coset)
            out.append(coset)
        return out

    def label(self) -> str:
        G = self.group
        if self.order == 1:
            return "e"
        if self.order == G.order:
            return "G"
        return "{" + ",".join(G.labels[e] for e in self.elements) + "}"

    def __repr__(self):
        return f"Subgroup({list(self.elements)})"


@dataclass(frozen=True)
class SubgroupClass:
    rep: Subgroup
    conjugates: tuple[Subgroup, ...]
    normalizer: Subgroup

    def transporter(self, target: Subgroup) -> int:
        """Smallest ``g`` with ``g rep g^-1 = target``."""
        G = self.rep.group
        for g in range(G.order):
            if self.rep.conjugate(g) == target:
                return g
        raise ValidationError(f"{target} is not conjugate to {self.rep}")


def enumerate_subgroups(G: FiniteGroup) -> list[SubgroupClass]:
    """Conjugacy classes of subgroups, smallest first.

    Every subgroup is a join of cyclic subgroups, so the search starts from
    the cyclic ones and closes under joining one more cyclic subgroup at a
    time. Results are cached on the group.
    """
    cached = getattr(G, "_subgroup_classes", None)
    if cached is not None:
        return cached
    cap = max_group_order()
    if G.order > cap:
        raise UnsupportedError(f"group of order {G.order} exceeds the subgroup enumeration cap {cap}")
    cyclic = {G.closure([g]) for g in range(G.order)}
    found = set(cyclic)
    frontier = list(cyclic)
    while frontier:
        new = []
        for S in frontier:
            for C in cyclic:
                if C <= S:
                    continue
                J = G.closure(S | C)
                if J not in found:
                    found.add(J)
                    new.append(J)
        frontier = new
    subgroups = sorted((Subgroup(G, tuple(sorted(s))) for s in found), key=lambda s: (s.order, s.elements))
    classes: list[SubgroupClass] = []
    assigned: set[tuple[int, ...]] = set()
    for S in subgroups:
        if S.elements in assigned:
            continue
        conj = sorted({S.conjugate(g) for g in range(G.order)}, key=lambda s: s.elements)
        assigned.update(c.elements for c in conj)
        norm = Subgroup(G, tuple(g for g in range(G.order) if S.conjugate(g) == S))
        classes.append(SubgroupClass(rep=S, conjugates=tuple(conj), normalizer=norm))
    G._subgroup_classes = classes
    return classes


def class_of(S: Subgroup) -> tuple[int, SubgroupClass]:
    """Index and class of the conjugacy class containing ``S``."""
    for i, cls in enumerate(enumerate_subgroups(S.group)):
        if S in cls.conjugates:
            return i, cls
    raise ValidationError(f"{S} is not a subgroup of {S.group}")


# --------------------------------------------------------------------------
# Lattices


class GLattice:
    """``Z^rank`` with ``group`` acting through ``action(g)``."""

    def __init__(self, group: FiniteGroup, matrices: Sequence, rank: int | None = None, name: str | None = None, validate: bool = True):
        if len(matrices) != group.order:
            raise ValidationError(f"need {group.order} action matrices, got {len(matrices)}")
        if rank is None:
            rank = len(matrices[0]) if len(matrices[0]) else 0
        self.group = group
        self.rank = int(rank)
        self.name = name
        self._mats = tuple(intmat(m, self.rank, self.rank) for m in matrices)
        if validate:
            self.validate_action()

    def __repr__(self):
        return f"GLattice({self.name or 'rank %d' % self.rank}, {self.group!r})"

    def action(self, g: int) -> np.ndarray:
        return self._mats[g]

    @cached_property
    def _small(self) -> list[np.ndarray]:
        return [np.array(m, dtype=np.int64).reshape(self.rank, self.rank) for m in self._mats]

    def validate_action(self):
        G, r = self.group, self.rank
        I = identity(r)
        if not np.array_equal(self._mats[0], I):
            raise ValidationError("identity element does not act as the identity matrix")
        for g in range(G.order):
            if abs(determinant(self._mats[g])) != 1:
                raise ValidationError(f"action matrix of element {g} is not unimodular")
        for a in range(G.order):
            for b in range(G.order):
                if not np.array_equal(matmul(self._mats[a], self._mats[b]), self._mats[G.mul(a, b)]):
                    raise ValidationError(f"action is not a homomorphism at ({a}, {b})")

    @classmethod
    def from_generators(cls, group: FiniteGroup, images: Mapping[int, Sequence], rank: int, name: str | None = None) -> "GLattice":
        """Extend matrices given on some elements to the whole group.

        Matrices of the remaining elements are derived through the
        homomorphism property; every given matrix is then checked against the
        derived one and the full action is validated against the table.
        """
        images = {int(g): intmat(m, rank, rank) for g, m in images.items()}
        mats: dict[int, np.ndarray] = {0: identity(rank)}
        frontier = [0]
        gens = [g for g in images if g != 0]
        while frontier:
            new = []
            for x in frontier:
                for s in gens:
                    y = group.mul(s, x)
                    if y not in mats:
                        mats[y] = matmul(images[s], mats[x])
                        new.append(y)
            frontier = new
        if len(mats) != group.order:
            raise ValidationError("the given elements do not generate the group")
        for g, m in images.items():
            if not np.array_equal(mats[g], m):
                raise ValidationError(f"matrix given for element {g} is inconsistent with the others")
        return cls(group, [mats[g] for g in range(group.order)], rank=rank, name=name)

    @classmethod
    def trivial(cls, group: FiniteGroup, rank: int, name: str | None = None) -> "GLattice":
        return cls(group, [identity(rank)] * group.order, rank=rank, name=name)

    def direct_sum(self, other: "GLattice", name: str | None = None) -> "GLattice":
        if other.group is not self.group:
            raise ValidationError("direct sum of lattices over different groups")
        r, s = self.rank, other.rank
        mats = []
        for g in range(self.group.order):
            m = zeros(r + s, r + s)
            m[:r, :r] = self._mats[g]
            m[r:, r:] = other._mats[g]
            mats.append(m)
        return GLattice(self.group, mats, rank=r + s, name=name)

    def kernel(self) -> Subgroup:
        """Elements acting trivially."""
        I = identity(self.rank)
        return Subgroup(self.group, tuple(g for g in range(self.group.order) if np.array_equal(self._mats[g], I)))

    def is_monomial(self) -> bool:
        """Every action matrix is a signed permutation matrix."""
        for m in self._mats:
            for row in m:
                nz = [x for x in row if x]
                if len(nz) != 1 or abs(nz[0]) != 1:
                    return False
            for col in m.T:
                if sum(1 for x in col if x) != 1:
                    return False
        return True

    def apply(self, g: int, v: Sequence[int]) -> tuple[int, ...]:
        m = self._mats[g]
        return tuple(int(sum(m[i, j] * v[j] for j in range(self.rank))) for i in range(self.rank))

    def to_json(self) -> dict:
        gens = self.group.generators()
        return {
            "version": GLATTICE_SCHEMA,
            "name": self.name,
            "group": self.group.to_json(),
            "lattice": {
                "rank": self.rank,
                "action": {str(g): [[int(x) for x in row] for row in self._mats[g]] for g in gens},
            },
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "GLattice":
        version = data.get("version")
        if version != GLATTICE_SCHEMA:
            raise ValidationError(f"unsupported lattice schema version {version!r}")
        unknown = set(data) - {"version", "name", "group", "lattice"}
        if unknown:
            raise ValidationError(f"unknown fields in lattice file: {sorted(unknown)}")
        group = FiniteGroup.from_json(data["group"])
        lat = data["lattice"]
        rank = int(lat["rank"])
        try:
            images = {int(k): v for k, v in lat.get("action", {}).items()}
        except (TypeError, ValueError):
            raise ValidationError("action keys must be element indices") from None
        for g in images:
            if not 0 <= g < group.order:
                raise ValidationError(f"action given for unknown element {g}")
        if not images and group.order > 1:
            raise ValidationError("no action matrices given for a nontrivial group")
        try:
            return cls.from_generators(group, images, rank, name=data.get("name"))
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(str(exc)) from None

    @classmethod
    def load(cls, path: str) -> "GLattice":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
        return cls.from_json(data)


def _check_subgroup(lat_or_group, H: Subgroup):
    G = lat_or_group.group if isinstance(lat_or_group, GLattice) else lat_or_group
    if H.group is not G:
        if H.group.table != G.table:
            raise ValidationError("subgroup belongs to a different group")
    if G.closure(H.elements) != frozenset(H.elements):
        raise ValidationError(f"{list(H.elements)} is not a subgroup")


def permutation_lattice(G: FiniteGroup, cosets: Sequence[Sequence[int]], name: str | None = None) -> GLattice:
    """``Z[X]`` for a transitive-or-not G-set ``X`` given as a list of blocks of G."""
    lookup = {}
    for i, c in enumerate(cosets):
        for x in c:
            lookup[x] = i
    n = len(cosets)
    mats = []
    for g in range(G.order):
        P = zeros(n, n)
        for i, c in enumerate(cosets):
            P[lookup[G.mul(g, c[0])], i] = 1
        mats.append(P)
    return GLattice(G, mats, rank=n, name=name)


def induced_lattice(G: FiniteGroup, H: Subgroup, name: str | None = None) -> GLattice:
    """The permutation lattice ``Z[G/H]``, cosets ordered by smallest element."""
    _check_subgroup(G, H)
    return permutation_lattice(G, H.cosets(), name=name)


def regular_lattice(G: FiniteGroup, name: str | None = None) -> GLattice:
    return induced_lattice(G, G.trivial_subgroup, name=name)


def unimodular_inverse(U: np.ndarray) -> np.ndarray:
    U1, D, V1 = smith_normal_form(U)
    if not np.array_equal(D, identity(U.shape[0])):
        raise ValueError("matrix is not unimodular")
    return matmul(V1, U1)


def quotient_lattice(big: GLattice, sub_basis: np.ndarray, name: str | None = None) -> tuple[GLattice, np.ndarray, np.ndarray]:
    """Quotient of ``big`` by the invariant sublattice spanned by ``sub_basis``.

    Returns ``(quotient, projection, U)`` where the quotient basis is given by
    the trailing columns of ``U^-1`` for the Smith transform ``U``. Raises
    :class:`ConsistencyError` when the quotient has torsion.
    """
    S = intmat(sub_basis)
    n, k = S.shape
    U, D, _ = smith_normal_form(S)
    for i in range(k):
        if D[i, i] != 1:
            raise ConsistencyError("sublattice is not saturated; quotient has torsion")
    Uinv = unimodular_inverse(U)
    mats = []
    for g in range(big.group.order):
        conj = matmul(U, big.action(g), Uinv)
        if any(conj[i, j] for i in range(k, n) for j in range(k)):
            raise ConsistencyError("sublattice is not invariant under the action")
        mats.append(conj[k:, k:])
    quotient = GLattice(big.group, mats, rank=n - k, name=name)
    return quotient, U[k:, :], U


def norm_one_lattice(G: FiniteGroup, name: str | None = None) -> GLattice:
    """``Z[G] / (sum of all g)``, in the basis given by the Smith transform."""
    reg = regular_lattice(G)
    norm = intmat([[1] for _ in range(G.order)], G.order, 1)
    quotient, _, _ = quotient_lattice(reg, norm, name=name)
    return quotient


@dataclass
class WeilResolutionData:
    """``0 -> lattice -> big -> quotient -> 0`` with ``big`` a permutation-type lattice."""

    lattice: GLattice
    inclusion: np.ndarray
    big: GLattice
    quotient: GLattice
    projection: np.ndarray
    effective_group: list[tuple[int, ...]]

    def verify(self):
        lat, big, q = self.lattice, self.big, self.quotient
        G = lat.group
        r, R = lat.rank, big.rank
        if self.inclusion.shape != (R, r):
            raise ConsistencyError("inclusion has the wrong shape")
        _, D, _ = smith_normal_form(self.inclusion)
        if any(D[i, i] != 1 for i in range(r)):
            raise ConsistencyError("inclusion is not split injective")
        if np.any(matmul(self.projection, self.inclusion)):
            raise ConsistencyError("projection does not kill the image of the inclusion")
        if R != r + q.rank:
            raise ConsistencyError("ranks are not additive")
        for g in range(G.order):
            if not np.array_equal(matmul(big.action(g), self.inclusion), matmul(self.inclusion, lat.action(g))):
                raise ConsistencyError(f"inclusion is not equivariant at element {g}")
            if not np.array_equal(matmul(q.action(g), self.projection), matmul(self.projection, big.action(g))):
                raise ConsistencyError(f"projection is not equivariant at element {g}")
        _, Dp, _ = smith_normal_form(self.projection)
        if any(Dp[i, i] != 1 for i in range(q.rank)):
            raise ConsistencyError("projection is not surjective")


def weil_resolution(lat: GLattice) -> WeilResolutionData:
    """Embed ``lat`` into the induced lattice ``Z[G/N] ⊗ Z^r``.

    ``N`` is the kernel of the action. ``G`` permutes the cosets and acts
    trivially on ``Z^r``; the embedding is ``λ ↦ Σ_c c ⊗ ρ(c)^-1 λ`` with
    cosets ordered by smallest element index.
    """
    G, r = lat.group, lat.rank
    N = lat.kernel()
    cosets = N.cosets()
    m = len(cosets)
    perm = permutation_lattice(G, cosets)
    mats = []
    for g in range(G.order):
        P = perm.action(g)
        big_g = zeros(m * r, m * r)
        for i in range(m):
            for j in range(m):
                if P[i, j]:
                    for k in range(r):
                        big_g[i * r + k, j * r + k] = 1
        mats.append(big_g)
    big = GLattice(G, mats, rank=m * r, name=f"Ind({lat.name or 'lattice'})", validate=False)
    inclusion = zeros(m * r, r)
    for i, coset in enumerate(cosets):
        inclusion[i * r:(i + 1) * r, :] = lat.action(G.inverse[coset[0]])
    quotient, projection, _ = quotient_lattice(big, inclusion, name=f"K({lat.name or 'lattice'})")
    data = WeilResolutionData(lat, inclusion, big, quotient, projection, cosets)
    data.verify()
    return data


def fixed_sublattice(lat: GLattice, H: Subgroup) -> np.ndarray:
    """Saturated basis (columns) of the vectors fixed by every element of ``H``."""
    _check_subgroup(lat, H)
    r = lat.rank
    blocks = [lat.action(h) - identity(r) for h in H.generators]
    if not blocks:
        return identity(r)
    return kernel_basis(np.vstack(blocks))


@dataclass(frozen=True)
class CharacterOrbit:
    representative: tuple[int, ...]
    stabilizer: Subgroup
    size: int
    members: tuple[tuple[int, ...], ...]


def character_orbits(lat: GLattice, norm_bound: int) -> list[CharacterOrbit]:
    """Partition the vectors of max-norm at most ``norm_bound`` into G-orbits.

    ``size`` is the full orbit size ``|G| / |stabilizer|``; ``members`` lists
    only the orbit elements inside the box (a non-monomial action can carry
    box vectors outside it). The representative is the lexicographically
    smallest member.
    """
    if norm_bound < 0:
        raise ValidationError("norm bound must be nonnegative")
    G, r = lat.group, lat.rank
    box = np.array(list(itertools.product(range(-norm_bound, norm_bound + 1), repeat=r)), dtype=np.int64).reshape(-1, r)
    images = [box @ lat._small[g].T for g in range(G.order)]
    index = {tuple(v): i for i, v in enumerate(box.tolist())}
    seen = np.zeros(len(box), dtype=bool)
    out = []
    for i in range(len(box)):
        if seen[i]:
            continue
        v = tuple(box[i].tolist())
        stab = []
        members = set()
        for g in range(G.order):
            w = tuple(images[g][i].tolist())
            if w == v:
                stab.append(g)
            j = index.get(w)
            if j is not None:
                members.add(w)
                seen[j] = True
        S = Subgroup(G, tuple(stab))
        mem = tuple(sorted(members))
        out.append(CharacterOrbit(mem[0], S, G.order // len(stab), mem))
    return out
