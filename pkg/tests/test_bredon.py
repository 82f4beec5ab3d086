from math import comb

import pytest
import sympy
from sympy import ZZ
from sympy.matrices.normalforms import invariant_factors

from cached import LARGE, backends_for, complex_for
from mirrork import catalog
from mirrork.bredon import (
    bredon_homology,
    chain_complex,
    coend_h0,
    constant_Z,
    homology,
    homology_table,
    homology_to_json,
    morphisms,
    mp_k0,
)
from mirrork.errors import ValidationError
from mirrork.exactalg import AbGroup
from mirrork.glattice import FiniteGroup, GLattice, enumerate_subgroups
from mirrork.eqcell import build_complex, underlying_homology
from mirrork.ktheory import finite_field_mackey

FULL = [n for n in catalog.names() if n not in LARGE]
Z = AbGroup(1)


def test_constant_Z_multiplies_by_the_index():
    G = FiniteGroup.cyclic(6)
    M = constant_Z(G)
    orders = [c.rep.order for c in enumerate_subgroups(G)]
    for k, a in enumerate(orders):
        for h, b in enumerate(orders):
            if b % a == 0:
                assert M.morphism(k, h, 0).tolist() == [[b // a]]


def test_morphisms_one_per_coset():
    S3 = FiniteGroup.symmetric(3)
    classes = enumerate_subgroups(S3)
    e = next(i for i, c in enumerate(classes) if c.rep.order == 1)
    top = next(i for i, c in enumerate(classes) if c.rep.order == 6)
    c2 = next(i for i, c in enumerate(classes) if c.rep.order == 2)
    assert len(morphisms(S3, e, top)) == 1
    assert len(morphisms(S3, e, e)) == 6
    assert len(morphisms(S3, c2, c2)) == 1
    assert morphisms(S3, top, e) == []


def test_sign_chain_complex():
    X = complex_for("sign", subdivisions=0)
    C = chain_complex(X, constant_Z(X.group))
    assert (C.rank(0), C.rank(1)) == (2, 1)
    assert sorted(C.boundary_matrix(1)[:, 0].tolist()) == [-2, 2]
    assert homology(C) == [AbGroup(1, [2]), AbGroup()]


def test_rank_zero_is_a_point():
    lat = GLattice.trivial(FiniteGroup.cyclic(2), 0)
    X = build_complex(lat)
    C = chain_complex(X, constant_Z(X.group))
    assert C.rank(0) == 1 and homology(C) == [Z]


@pytest.mark.parametrize("n", range(4))
def test_split_tori(n):
    assert bredon_homology(complex_for(f"split{n}")) == [AbGroup(comb(n, p)) for p in range(n + 1)]


@pytest.mark.parametrize("name", FULL)
def test_catalog_values(name):
    assert bredon_homology(complex_for(name)) == catalog.get(name).expected_group("bredon")


def _invariant_chain_homology(X):
    """Homology of G-invariant cellular chains, one orbit sum per orbit, via sympy."""
    G = X.group
    top = X.top_degree
    reps = [[o[0] for o in X.orbits(p)] for p in range(top + 1)]
    rk = [0] * (top + 2)
    tors = [[] for _ in range(top + 2)]
    for p in range(1, top + 1):
        idx = {o[0]: k for k, o in enumerate(X.orbits(p - 1))}
        M = [[0] * len(reps[p]) for _ in reps[p - 1]]
        for j, s in enumerate(reps[p]):
            images = {}
            for g in range(G.order):
                images.setdefault(int(X.perm[p][g][s]), int(X.sign[p][g][s]))
            for c, e in images.items():
                for t, v in X.boundary[p][c]:
                    if t in idx:
                        M[idx[t]][j] += e * v
        f = [abs(int(x)) for x in invariant_factors(sympy.Matrix(M), domain=ZZ) if x != 0]
        rk[p] = len(f)
        tors[p] = [x for x in f if x > 1]
    return [AbGroup.from_orders(tors[p + 1], len(reps[p]) - rk[p] - rk[p + 1]) for p in range(top + 1)]


@pytest.mark.parametrize("name", [n for n in FULL if n != "split3"])
def test_agrees_with_invariant_chains(name):
    # stabilizers of a subdivided complex fix their cells pointwise, so the
    # constant functor's chains are exactly the invariant chains
    X = complex_for(name)
    assert bredon_homology(X) == _invariant_chain_homology(X)


@pytest.mark.parametrize("n", range(4))
def test_trivial_group_reduces_to_cellular_homology(n):
    X = complex_for(f"split{n}")
    assert bredon_homology(X) == underlying_homology(X)


def test_sign_presentations():
    X = complex_for("sign")
    P = coend_h0(X)
    assert P.generators == ["e:c0", "G:c0", "G:c1"]
    assert sorted(P.relations) == [[-1, 0, 2], [-1, 2, 0]]
    assert P.group == AbGroup(1, [2])
    assert mp_k0(X.lattice).group == AbGroup(1, [2])


def test_cubic_coend_has_four_generators():
    P = coend_h0(complex_for("norm_one_cyclic3"))
    assert len(P.generators) == 4
    assert P.group == AbGroup(1, [3, 3])


@pytest.mark.parametrize("name", catalog.names())
def test_triple_agreement(name):
    expected = catalog.get(name).expected_group("k0")
    mp = mp_k0(catalog.get(name).lattice).group
    assert mp == expected
    for backend in backends_for(name):
        X = complex_for(name, backend)
        assert bredon_homology(X)[0] == coend_h0(X).group == mp


@pytest.mark.parametrize("name", [n for n in FULL if len(backends_for(n)) == 2])
def test_backend_independence(name):
    assert bredon_homology(complex_for(name, "cubical")) == bredon_homology(complex_for(name, "delone"))


def test_coverage_gap_is_a_validation_error():
    X = complex_for("sign")

    class OnlyTop(type(finite_field_mackey(3, 2, 0))):
        def covers(self, k):
            return k != 0

    M = finite_field_mackey(3, 2, 1)
    M.__class__ = OnlyTop
    with pytest.raises(ValidationError):
        chain_complex(X, M)


def test_coefficients_over_another_group():
    with pytest.raises(ValidationError):
        chain_complex(complex_for("sign"), constant_Z(FiniteGroup.cyclic(3)))


def test_output_formats():
    H = [AbGroup(1, [2]), AbGroup()]
    assert homology_to_json(H) == {"H": [[1, [2]], [0, []]]}
    assert homology_table(H).splitlines()[0].startswith("H_0")


def _routes(C, dense=True):
    from mirrork.bredon import _Padded, _compose_zero, _cone, _dense_homology, _free_homology, _uct_homology

    n, m = C.valid_degrees, len(C.orders)
    P = _Padded(C, m)
    out = {"dense": _dense_homology(C, n)} if dense else {}
    if all(_compose_zero(C.columns[p], C.columns[p - 1]) for p in range(2, m)):
        ranks, cols = _cone(P, m + 1)
        out["cone"] = _free_homology(ranks, cols)[:n]
        orders = {d for p in range(m) for d in C.orders[p]}
        if len(orders) == 1:
            out["uct"] = _uct_homology(P, m, orders.pop())[:n]
    return out


@pytest.mark.parametrize("name,d,routes", [
    ("sign", 2, {"dense", "cone"}),
    ("sign_sign", 2, {"dense"}),
    ("regular_C2", 2, {"dense"}),
    ("norm_one_cyclic4", 4, {"dense"}),
    ("split2", 1, {"dense", "cone", "uct"}),
    ("split3", 1, {"cone", "uct"}),
])
@pytest.mark.parametrize("n", [1, 3])
def test_torsion_homology_routes_agree(name, d, routes, n):
    C = chain_complex(complex_for(name), finite_field_mackey(5, d, n))
    found = _routes(C, dense="dense" in routes)
    assert set(found) == routes
    assert all(H == homology(C) for H in found.values())
