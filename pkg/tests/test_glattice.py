import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mirrork import catalog
from mirrork.errors import UnsupportedError, ValidationError
from mirrork.exactalg import identity, intmat, matmul, smith_normal_form
from mirrork.glattice import (
    FiniteGroup,
    GLattice,
    Subgroup,
    character_orbits,
    class_of,
    enumerate_subgroups,
    fixed_sublattice,
    induced_lattice,
    norm_one_lattice,
    regular_lattice,
    unimodular_inverse,
    weil_resolution,
)

NAMES = catalog.names()


def brute_force_subgroups(G):
    """Every subset closed under multiplication (groups here are tiny)."""
    out = set()
    for r in range(1, G.order + 1):
        for S in itertools.combinations(range(G.order), r):
            if 0 in S and all(G.mul(a, b) in S for a in S for b in S):
                out.add(S)
    return out


def conjugacy_classes_of(G, subgroups):
    seen, classes = set(), []
    for S in sorted(subgroups, key=lambda s: (len(s), s)):
        if S in seen:
            continue
        orbit = {tuple(sorted(G.conjugate(g, h) for h in S)) for g in range(G.order)}
        seen |= orbit
        classes.append(orbit)
    return classes


def test_c2_classes():
    cl = enumerate_subgroups(FiniteGroup.cyclic(2))
    assert [c.rep.order for c in cl] == [1, 2]


def test_s3_from_table_has_four_classes():
    S3 = FiniteGroup.symmetric(3)
    G = FiniteGroup([list(r) for r in S3.table])
    cl = enumerate_subgroups(G)
    assert [c.rep.order for c in cl] == [1, 2, 3, 6]
    assert [len(c.conjugates) for c in cl] == [1, 3, 1, 1]


@pytest.mark.parametrize("G", [FiniteGroup.cyclic(6), FiniteGroup.symmetric(3), FiniteGroup.cyclic(4),
                               FiniteGroup.cyclic(2), FiniteGroup.trivial()])
def test_enumeration_matches_brute_force(G):
    subs = brute_force_subgroups(G)
    classes = conjugacy_classes_of(G, subs)
    cl = enumerate_subgroups(G)
    assert len(cl) == len(classes)
    assert sorted(len(c.conjugates) for c in cl) == sorted(len(c) for c in classes)
    for c in cl:
        for S in c.conjugates:
            assert class_of(S)[1] is c
            assert c.rep.conjugate(c.transporter(S)) == S


def test_c6_one_class_per_divisor():
    assert [c.rep.order for c in enumerate_subgroups(FiniteGroup.cyclic(6))] == [1, 2, 3, 6]


def test_group_order_cap(monkeypatch):
    monkeypatch.setenv("MIRRORK_MAX_GROUP_ORDER", "4")
    with pytest.raises(UnsupportedError):
        enumerate_subgroups(FiniteGroup.cyclic(5))


def test_group_json_round_trip():
    S3 = FiniteGroup.symmetric(3)
    assert FiniteGroup.from_json(S3.to_json()).table == S3.table
    P = FiniteGroup.from_json({"perm_generators": [[1, 0, 2], [1, 2, 0]]})
    assert P.order == 6 and not P.is_abelian


def test_bad_table_rejected():
    with pytest.raises(ValidationError):
        FiniteGroup([[0, 1], [0, 1]])


def test_induced_examples():
    C2, S3 = FiniteGroup.cyclic(2), FiniteGroup.symmetric(3)
    L = induced_lattice(C2, C2.trivial_subgroup)
    assert L.rank == 2 and L.action(1).tolist() == [[0, 1], [1, 0]]
    L = induced_lattice(C2, C2.whole)
    assert L.rank == 1 and L.action(1).tolist() == [[1]]
    H = next(c.rep for c in enumerate_subgroups(S3) if c.rep.order == 2)
    L = induced_lattice(S3, H)
    assert L.rank == 3 and L.is_monomial()
    # restricted to H the permutation lattice has one fixed vector per H-orbit on G/H
    assert fixed_sublattice(L, H).shape[1] == 2


def test_norm_one_examples():
    assert norm_one_lattice(FiniteGroup.cyclic(2)).action(1).tolist() == [[-1]]
    L = norm_one_lattice(FiniteGroup.cyclic(3))
    s = L.action(1)
    assert s.tolist() == [[0, -1], [1, -1]]
    assert not (matmul(s, s) + s + identity(2)).any()
    assert norm_one_lattice(FiniteGroup.trivial()).rank == 0


def test_norm_one_c2_is_the_sign_lattice():
    a = norm_one_lattice(FiniteGroup.cyclic(2))
    b = catalog.get("sign").lattice
    found = [u for u in (1, -1) if u * a.action(1)[0, 0] * u == b.action(1)[0, 0]]
    assert found


def test_weil_examples():
    W = weil_resolution(catalog.get("sign").lattice)
    assert W.big.action(1).tolist() == [[0, 1], [1, 0]]
    assert W.inclusion.tolist() == [[1], [-1]]
    assert W.quotient.rank == 1 and W.quotient.action(1).tolist() == [[1]]
    W = weil_resolution(catalog.get("split2").lattice)
    assert W.inclusion.tolist() == [[1, 0], [0, 1]] and W.quotient.rank == 0
    W = weil_resolution(catalog.get("norm_one_cyclic3").lattice)
    assert W.big.rank == 6 and W.quotient.rank == 4


def _check_weil(lat):
    W = weil_resolution(lat)
    G = lat.group
    assert W.big.rank == lat.rank + W.quotient.rank
    _, D, _ = smith_normal_form(W.inclusion)
    assert all(D[i, i] == 1 for i in range(lat.rank))
    for g in range(G.order):
        assert np.array_equal(matmul(W.big.action(g), W.inclusion), matmul(W.inclusion, lat.action(g)))
    # free cokernel: the projection is onto and kills exactly the image
    _, Dp, _ = smith_normal_form(W.projection)
    assert all(Dp[i, i] == 1 for i in range(W.quotient.rank))
    assert not matmul(W.projection, W.inclusion).any()


@pytest.mark.parametrize("name", NAMES)
def test_weil_invariants_on_catalog(name):
    _check_weil(catalog.get(name).lattice)


def unimodular(n):
    """Products of elementary matrices."""
    steps = st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(-2, 2)), max_size=6)

    def build(ops):
        M = identity(n)
        for i, j, k in ops:
            if i != j:
                E = identity(n)
                E[i, j] = k
                M = matmul(E, M)
        return M
    return steps.map(build)


def conjugated(lat, P):
    Pinv = unimodular_inverse(P)
    return GLattice(lat.group, [matmul(P, lat.action(g), Pinv) for g in range(lat.group.order)], rank=lat.rank)


small_lattices = st.sampled_from(["sign", "norm_one_cyclic3", "regular_C2", "sign_sign", "induced_S3_C2",
                                  "norm_one_cyclic4", "regular_C3"])


@given(small_lattices, st.data())
def test_weil_invariants_after_base_change(name, data):
    lat = catalog.get(name).lattice
    _check_weil(conjugated(lat, data.draw(unimodular(lat.rank))))


@given(small_lattices, st.integers(0, 2))
def test_orbit_stabilizer(name, bound):
    lat = catalog.get(name).lattice
    orbits = character_orbits(lat, bound)
    G = lat.group
    seen = set()
    for o in orbits:
        assert o.size * o.stabilizer.order == G.order
        for g in o.stabilizer.elements:
            assert lat.apply(g, o.representative) == o.representative
        assert not seen & set(o.members)
        seen |= set(o.members)
        # choosing another member gives the same orbit
        for m in o.members:
            assert {lat.apply(g, m) for g in range(G.order)} >= set(o.members)
    assert len(seen) == (2 * bound + 1) ** lat.rank


def test_character_orbit_examples():
    orbits = character_orbits(catalog.get("sign").lattice, 2)
    assert [(o.members, o.stabilizer.order) for o in orbits] == [
        (((-2,), (2,)), 1), (((-1,), (1,)), 1), (((0,),), 2)]
    triv = character_orbits(GLattice.trivial(FiniteGroup.cyclic(2), 1), 1)
    assert [o.stabilizer.order for o in triv] == [2, 2, 2]
    cubic = character_orbits(catalog.get("norm_one_cyclic3").lattice, 1)
    zero = [o for o in cubic if o.representative == (0, 0)]
    assert zero[0].stabilizer.order == 3
    assert all(o.size == 3 for o in cubic if o is not zero[0])
    assert sum(len(o.members) for o in cubic) == 9


def test_fixed_sublattice_examples():
    sign = catalog.get("sign").lattice
    assert fixed_sublattice(sign, sign.group.whole).shape == (1, 0)
    L = catalog.get("norm_one_cyclic3").lattice
    assert np.array_equal(fixed_sublattice(L, L.group.trivial_subgroup), identity(2))
    R = catalog.get("regular_C2").lattice
    F = fixed_sublattice(R, R.group.whole)
    assert F.tolist() in ([[1], [1]], [[-1], [-1]])


@pytest.mark.parametrize("name", NAMES)
def test_catalog_lattices_round_trip_json(name):
    lat = catalog.get(name).lattice
    back = GLattice.from_json(json.loads(json.dumps(lat.to_json())))
    assert back.rank == lat.rank
    assert all(np.array_equal(back.action(g), lat.action(g)) for g in range(lat.group.order))


def test_json_rejects_bad_input():
    good = catalog.get("sign").lattice.to_json()
    with pytest.raises(ValidationError):
        GLattice.from_json({**good, "version": "glattice/9"})
    with pytest.raises(ValidationError):
        GLattice.from_json({**good, "colour": "red"})
    bad = json.loads(json.dumps(good))
    bad["lattice"]["action"]["1"] = [[2]]
    with pytest.raises(ValidationError):
        GLattice.from_json(bad)


def test_action_must_be_a_homomorphism():
    C3 = FiniteGroup.cyclic(3)
    with pytest.raises(ValidationError):
        GLattice(C3, [[[1]], [[-1]], [[-1]]], rank=1)
