import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mirrork import catalog
from mirrork.errors import ValidationError
from mirrork.exactalg import AbGroup, congruent, identity, matmul
from mirrork.glattice import FiniteGroup, GLattice, enumerate_subgroups, fixed_sublattice, regular_lattice
from mirrork.groupcoh import h0, h1, h1_conjugation, h1_cyclic, h1_restriction, pi0_fixed_points

NAMES = catalog.names()


def is_cyclic(H):
    G = H.group
    return any(G.element_order(h) == H.order for h in H.elements)


def test_sign_h1():
    lat = catalog.get("sign").lattice
    assert h1(lat, lat.group.whole).group == AbGroup(0, (2,))


@pytest.mark.parametrize("r", [0, 1, 3])
def test_trivial_action_has_no_h1(r):
    G = FiniteGroup.cyclic(4)
    lat = GLattice.trivial(G, r)
    for c in enumerate_subgroups(G):
        assert h1(lat, c.rep).group.is_trivial()


def test_cubic_norm_one_h1():
    lat = catalog.get("norm_one_cyclic3").lattice
    assert h1(lat, lat.group.whole).group == AbGroup(0, (3,))


@pytest.mark.parametrize("name", NAMES)
def test_h1_agrees_with_cyclic_formula(name):
    lat = catalog.get(name).lattice
    for c in enumerate_subgroups(lat.group):
        if is_cyclic(c.rep):
            assert h1(lat, c.rep).group == h1_cyclic(lat, c.rep)


@pytest.mark.parametrize("name", NAMES)
def test_h1_killed_by_order(name):
    lat = catalog.get(name).lattice
    for c in enumerate_subgroups(lat.group):
        grp = h1(lat, c.rep).group
        assert all(c.rep.order % d == 0 for d in grp.torsion)
        assert grp.free_rank == 0


@pytest.mark.parametrize("name", NAMES)
def test_h1_matches_frozen_values(name):
    e = catalog.get(name)
    got = [h1(e.lattice, c.rep).group for c in enumerate_subgroups(e.lattice.group)]
    assert got == e.expected_group("h1")


def test_restriction_examples():
    lat = catalog.get("sign").lattice
    G = lat.group
    assert h1_restriction(lat, G.whole, G.whole).tolist() == identity(1).tolist()
    assert h1_restriction(lat, G.trivial_subgroup, G.whole).shape == (0, 1)
    both = regular_lattice(G).direct_sum(lat)
    R = h1_restriction(both, G.trivial_subgroup, G.whole)
    assert R.shape == (0, h1(both, G.whole).group.ngens)
    assert h1(both, G.whole).group == AbGroup(0, (2,))


def test_restriction_requires_containment():
    lat = catalog.get("induced_S3_C2").lattice
    cl = enumerate_subgroups(lat.group)
    with pytest.raises(ValidationError):
        h1_restriction(lat, cl[3].rep, cl[1].rep)


@pytest.mark.parametrize("name", ["norm_one_cyclic4", "sign_sign", "induced_S3_C2", "norm_one_cyclic3"])
def test_restriction_is_functorial(name):
    lat = catalog.get(name).lattice
    subs = [S for c in enumerate_subgroups(lat.group) for S in c.conjugates]
    for K in subs:
        for H in subs:
            for J in subs:
                if K.is_subgroup_of(H) and H.is_subgroup_of(J):
                    a = matmul(h1_restriction(lat, K, H), h1_restriction(lat, H, J))
                    assert congruent(a, h1_restriction(lat, K, J), h1(lat, K).group)


def test_conjugation_is_an_action():
    lat = catalog.get("induced_S3_C2").lattice
    G = lat.group
    for c in enumerate_subgroups(G):
        H = c.rep
        for g in range(G.order):
            for k in range(G.order):
                a = matmul(h1_conjugation(lat, g, H.conjugate(k)), h1_conjugation(lat, k, H))
                b = h1_conjugation(lat, G.mul(g, k), H)
                assert congruent(a, b, h1(lat, H.conjugate(G.mul(g, k))).group)


def test_pi0_examples():
    sign = catalog.get("sign").lattice
    assert pi0_fixed_points(sign, sign.group.whole) == (AbGroup(0, (2,)), 0)
    split = catalog.get("split3").lattice
    assert pi0_fixed_points(split, split.group.whole) == (AbGroup(), 3)
    cubic = catalog.get("norm_one_cyclic3").lattice
    assert pi0_fixed_points(cubic, cubic.group.whole) == (AbGroup(0, (3,)), 0)
    assert h0(cubic, cubic.group.trivial_subgroup) == AbGroup(2)


@given(st.sampled_from(["sign", "norm_one_cyclic3", "norm_one_cyclic4", "sign_sign"]), st.data())
def test_cocycle_coordinates_round_trip(name, data):
    lat = catalog.get(name).lattice
    H = lat.group.whole
    res = h1(lat, H)
    if res.group.is_trivial():
        return
    coords = data.draw(st.tuples(*[st.integers(-20, 20) for _ in res.group.orders]))
    phi = res.cocycle(coords)
    assert res.coordinates(phi) == res.group.reduce(coords)
    # adding a coboundary does not change the class
    lam = np.array([[data.draw(st.integers(-5, 5))] for _ in range(lat.rank)], dtype=object)
    cob = np.concatenate([matmul(lat.action(h), lam) - lam for h in H.elements], axis=0)
    assert res.coordinates(phi + cob) == res.group.reduce(coords)


def test_fixed_rank_is_dimension_of_fixed_torus():
    lat = catalog.get("regular_C3").lattice
    for c in enumerate_subgroups(lat.group):
        assert pi0_fixed_points(lat, c.rep)[1] == fixed_sublattice(lat, c.rep).shape[1]
