import json

import numpy as np
import pytest

from mirrork import catalog
from mirrork.errors import ValidationError
from mirrork.glattice import GLattice


def test_names_are_unique_and_ordered():
    names = catalog.names()
    assert len(names) == len(set(names)) == 13
    assert names[0] == "split0"


def test_cubic_norm_one_entry():
    lat = catalog.get("norm_one_cyclic3").lattice
    assert lat.rank == 2 and lat.group.order == 3
    m = lat.action(1)
    assert not np.array_equal(m, np.identity(2, dtype=m.dtype))
    assert np.array_equal(m @ m @ m, np.identity(2, dtype=m.dtype))


def test_lattices_are_cached_and_named():
    for e in catalog.entries():
        assert e.lattice is e.lattice
        assert e.lattice.name == e.name


def test_unknown_entry():
    with pytest.raises(ValidationError, match="unknown catalog entry"):
        catalog.get("nope")


def test_every_entry_has_a_k0_value():
    for e in catalog.entries():
        assert e.expected_group("k0") is not None
        assert e.expected_group("h1") is not None


def test_resolve(tmp_path):
    lat = catalog.resolve("catalog:sign")
    assert lat is catalog.get("sign").lattice
    path = tmp_path / "sign.json"
    path.write_text(json.dumps(lat.to_json()))
    other = catalog.resolve(str(path))
    assert isinstance(other, GLattice)
    assert [other.action(g).tolist() for g in range(2)] == [lat.action(g).tolist() for g in range(2)]
