import json
from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cached import complex_for
from mirrork import catalog
from mirrork.bredon import bredon_homology, mp_k0
from mirrork.errors import ValidationError
from mirrork.exactalg import AbGroup
from mirrork.glattice import FiniteGroup, GLattice
from mirrork.ktheory import (
    MackeyData,
    collapse_by_lacunarity,
    e2_page,
    finite_field_k_group,
    finite_field_mackey,
    swan_finite_field,
    swan_rank1,
)

Z = AbGroup(1)


def cyc(n):
    return AbGroup.from_orders([n])


def preset(q, d, qmax):
    return {n: finite_field_mackey(q, d, n) for n in range(1, qmax + 1)}


def test_finite_field_groups():
    assert finite_field_k_group(3, 0) == Z
    assert finite_field_k_group(3, 1) == cyc(2)
    assert finite_field_k_group(9, 1) == cyc(8)
    assert finite_field_k_group(3, 3) == cyc(8)
    assert finite_field_k_group(3, 2) == AbGroup()


def test_quadratic_mackey_degree_one():
    M = finite_field_mackey(3, 2, 1)
    assert (M.obj(0), M.obj(1)) == (cyc(8), cyc(2))
    assert M.restriction(0, 1).tolist() == [[4]]
    assert M.transfer(0, 1).tolist() == [[1]]


def test_degree_one_extension_is_trivial():
    M = finite_field_mackey(5, 1, 3)
    assert len(M.classes) == 1 and M.obj(0) == cyc(24)


def test_even_degrees_vanish():
    M = finite_field_mackey(3, 2, 2)
    assert M.obj(0).is_trivial() and M.obj(1).is_trivial()


@given(st.sampled_from([2, 3, 4, 5, 7, 8, 9]), st.sampled_from([1, 2, 3, 4, 6]), st.integers(0, 5))
def test_presets_pass_validation(q, d, n):
    M = finite_field_mackey(q, d, n)
    assert M.warnings == []


def test_rejects_non_prime_powers():
    with pytest.raises(ValidationError):
        finite_field_mackey(6, 2, 1)
    with pytest.raises(ValidationError):
        finite_field_mackey(3, 0, 1)


def test_mackey_json_round_trip(tmp_path):
    M = finite_field_mackey(5, 2, 3)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(M.to_json()))
    assert MackeyData.load(str(path)).to_json() == M.to_json()


def test_mackey_rejects_a_zero_transfer():
    bad = finite_field_mackey(3, 2, 1).to_json()
    bad["transfer"][0]["matrix"] = [[0]]
    with pytest.raises(ValidationError, match="double coset"):
        MackeyData.from_json(bad)


def test_mackey_rejects_a_non_homomorphism():
    bad = finite_field_mackey(3, 2, 1).to_json()
    bad["restriction"][0]["matrix"] = [[1]]  # ℤ/2 -> ℤ/8, 1 -> 1 is not well defined
    with pytest.raises(ValidationError, match="not a homomorphism"):
        MackeyData.from_json(bad)


def test_sign_page_over_f3():
    P = e2_page(catalog.get("sign").lattice, preset(3, 2, 3), (0, 3))
    assert P[(0, 0)] == AbGroup(1, [2]) and P[(1, 0)] == AbGroup()
    assert P[(0, 1)] == cyc(2) and P[(1, 1)] == cyc(4)
    assert P[(2, 1)] == AbGroup() and P[(0, -1)] == AbGroup()
    cert = P.certificate
    assert cert.collapses
    assert [g for _, g in cert.graded[2] if not g.is_trivial()] == [cyc(4)]


@pytest.mark.parametrize("n", range(4))
def test_split_pages_are_binomial(n):
    lat = catalog.get(f"split{n}").lattice
    P = e2_page(lat, preset(5, 1, 3), (0, 3), X=complex_for(f"split{n}"))
    for q in range(4):
        Kq = finite_field_k_group(5, q)
        for p in range(n + 1):
            expected = Kq
            for _ in range(comb(n, p) - 1):
                expected = expected + Kq
            assert P[(p, q)] == (expected if comb(n, p) else AbGroup())


def test_collapse_by_rank():
    lat0 = GLattice.trivial(FiniteGroup.trivial(), 0)
    assert e2_page(lat0, preset(3, 1, 1), (0, 1)).certificate.collapses
    P2 = e2_page(catalog.get("split2").lattice, preset(3, 1, 1), (0, 1), X=complex_for("split2"))
    assert not collapse_by_lacunarity(P2).collapses


def test_missing_row_is_a_validation_error():
    with pytest.raises(ValidationError):
        e2_page(catalog.get("sign").lattice, preset(3, 2, 1), (0, 2))


@pytest.mark.parametrize("name", ["sign", "norm_one_cyclic2", "regular_C2", "sign_sign"])
def test_row_zero_is_k0(name):
    lat = catalog.get(name).lattice
    P = e2_page(lat, preset(3, 2, 1), (0, 1), X=complex_for(name))
    assert P[(0, 0)] == mp_k0(lat).group


def test_swan_f3():
    out = swan_finite_field(3, 2)
    assert out[0].split + out[0].coker == AbGroup(1, [2]) and out[0].ker.is_trivial()
    assert out[1].graded() == [cyc(2), AbGroup()]
    assert out[2].graded() == [AbGroup(), cyc(4)]


def test_swan_flags_extensions():
    out = swan_rank1([cyc(2), cyc(2)], [cyc(4), cyc(4)], [[[0]], [[0]]])
    assert out[1].ambiguous


def test_swan_degree_mismatch():
    with pytest.raises(ValidationError):
        swan_rank1([Z], [Z, Z], [[[2]]])


@pytest.mark.parametrize("q", [3, 5, 7, 9])
def test_page_matches_swan(q):
    X = complex_for("sign")
    P = e2_page(X.lattice, preset(q, 2, 6), (0, 6), X=X)
    swan = swan_finite_field(q, 6)
    for n in range(7):
        assert [g for _, g in P.certificate.graded[n]] == swan[n].graded()
        assert P.certificate.ambiguous[n] == swan[n].ambiguous


def test_bredon_row_matches_constant_functor():
    X = complex_for("sign")
    P = e2_page(X.lattice, {}, (0, 0), X=X)
    assert P[(0, 0)] == bredon_homology(X)[0]
