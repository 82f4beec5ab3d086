"""Complexes shared between test modules; building some of them takes seconds."""

from functools import lru_cache

from mirrork import catalog
from mirrork.eqcell import build_complex

# 1-skeleton only: the full subdivided 6-torus is far beyond the cell cap
LARGE = {"regular_S3"}


@lru_cache(maxsize=None)
def complex_for(name: str, backend: str = "auto", subdivisions: int = 1, max_dim=None):
    lat = catalog.get(name).lattice
    if name in LARGE and max_dim is None:
        max_dim = 1
    return build_complex(lat, backend, subdivisions=subdivisions, max_dim=max_dim)


def backends_for(name: str) -> list[str]:
    lat = catalog.get(name).lattice
    out = []
    if lat.is_monomial():
        out.append("cubical")
    if lat.rank <= 3:
        out.append("delone")
    return out
