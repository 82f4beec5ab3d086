"""Built-in lattices with frozen expected values.

Expected groups are stored as ``[free_rank, [torsion...]]``. ``k0`` was
produced by the three independent ``K_0`` routes (chain ``H_0``, the coend
presentation, the cohomological presentation), which agree; ``bredon`` is
``H_*`` with constant coefficients, checked against the homology of invariant
chains and across backends; ``h1`` lists ``H^1(H, Λ)`` per subgroup class,
checked against the cyclic-group formula where it applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from .errors import ValidationError
from .exactalg import AbGroup
from .glattice import FiniteGroup, GLattice, enumerate_subgroups, induced_lattice, norm_one_lattice, regular_lattice

__all__ = ["CatalogEntry", "get", "names", "entries", "resolve"]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    factory: Callable[[], GLattice] = field(repr=False)
    note: str
    expected: dict = field(default_factory=dict, repr=False)

    @property
    def lattice(self) -> GLattice:
        return _build(self.name)

    def expected_group(self, key: str):
        val = self.expected.get(key)
        if val is None:
            return None
        if key == "bredon" or key == "h1":
            return [AbGroup.from_json(v) for v in val]
        return AbGroup.from_json(val)


def _split(n: int) -> Callable[[], GLattice]:
    return lambda: GLattice.trivial(FiniteGroup.trivial(), n, name=f"split{n}")


def _sign() -> GLattice:
    return GLattice(FiniteGroup.cyclic(2), [[[1]], [[-1]]], rank=1, name="sign")


def _induced_s3_c2() -> GLattice:
    S3 = FiniteGroup.symmetric(3)
    C2 = next(c.rep for c in enumerate_subgroups(S3) if c.rep.order == 2)
    return induced_lattice(S3, C2, name="induced_S3_C2")


def _sign_sign() -> GLattice:
    s = _sign()
    return s.direct_sum(s, name="sign_sign")


Z, Z2 = [1, []], [0, [2]]

_ENTRIES = [
    CatalogEntry("split0", _split(0), "rank-0 torus (a point)",
                 {"k0": Z, "bredon": [Z], "h1": [[0, []]]}),
    CatalogEntry("split1", _split(1), "split torus of rank 1",
                 {"k0": Z, "bredon": [Z, Z], "h1": [[0, []]]}),
    CatalogEntry("split2", _split(2), "split torus of rank 2",
                 {"k0": Z, "bredon": [Z, [2, []], Z], "h1": [[0, []]]}),
    CatalogEntry("split3", _split(3), "split torus of rank 3",
                 {"k0": Z, "bredon": [Z, [3, []], [3, []], Z], "h1": [[0, []]]}),
    CatalogEntry("sign", _sign, "rank-1 norm-one torus of a quadratic extension",
                 {"k0": [1, [2]], "bredon": [[1, [2]], [0, []]], "h1": [[0, []], Z2]}),
    CatalogEntry("norm_one_cyclic2", lambda: norm_one_lattice(FiniteGroup.cyclic(2), name="norm_one_cyclic2"),
                 "norm-one torus of a cyclic extension of degree 2",
                 {"k0": [1, [2]], "bredon": [[1, [2]], [0, []]], "h1": [[0, []], Z2]}),
    CatalogEntry("norm_one_cyclic3", lambda: norm_one_lattice(FiniteGroup.cyclic(3), name="norm_one_cyclic3"),
                 "norm-one torus of a cyclic cubic extension",
                 {"k0": [1, [3, 3]], "bredon": [[1, [3, 3]], [0, []], Z], "h1": [[0, []], [0, [3]]]}),
    CatalogEntry("norm_one_cyclic4", lambda: norm_one_lattice(FiniteGroup.cyclic(4), name="norm_one_cyclic4"),
                 "norm-one torus of a cyclic quartic extension",
                 {"k0": [1, [2, 2, 4]], "bredon": [[1, [2, 2, 4]], [0, []], [1, [2]], [0, []]],
                  "h1": [[0, []], Z2, [0, [4]]]}),
    CatalogEntry("regular_C2", lambda: regular_lattice(FiniteGroup.cyclic(2), name="regular_C2"),
                 "Weil restriction of the multiplicative group along a quadratic extension",
                 {"k0": Z, "bredon": [Z, [1, [2]], [0, []]], "h1": [[0, []], [0, []]]}),
    CatalogEntry("regular_C3", lambda: regular_lattice(FiniteGroup.cyclic(3), name="regular_C3"),
                 "Weil restriction along a cyclic cubic extension",
                 {"k0": Z, "bredon": [Z, [1, [3]], Z, Z], "h1": [[0, []], [0, []]]}),
    CatalogEntry("regular_S3", lambda: regular_lattice(FiniteGroup.symmetric(3), name="regular_S3"),
                 "Weil restriction along a Galois extension with group S3 (rank 6)",
                 {"k0": Z, "h1": [[0, []]] * 4}),
    CatalogEntry("induced_S3_C2", _induced_s3_c2, "Weil restriction along a non-Galois cubic extension",
                 {"k0": Z, "bredon": [Z, [1, [6]], [0, [2]], [0, []]], "h1": [[0, []]] * 4}),
    CatalogEntry("sign_sign", _sign_sign,
                 "product of two copies of the quadratic norm-one torus",
                 {"k0": [1, [2, 2, 2]], "bredon": [[1, [2, 2, 2]], [0, []], Z], "h1": [[0, []], [0, [2, 2]]]}),
]

_BY_NAME = {e.name: e for e in _ENTRIES}


@lru_cache(maxsize=None)
def _build(name: str) -> GLattice:
    lat = _BY_NAME[name].factory()
    lat.name = name
    return lat


def names() -> list[str]:
    return [e.name for e in _ENTRIES]


def entries() -> list[CatalogEntry]:
    return list(_ENTRIES)


def get(name: str) -> CatalogEntry:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValidationError(f"unknown catalog entry {name!r}; known: {', '.join(names())}") from None


def resolve(source: str) -> GLattice:
    """``catalog:<name>`` or a path to a lattice JSON file."""
    if source.startswith("catalog:"):
        return get(source[len("catalog:"):]).lattice
    return GLattice.load(source)
