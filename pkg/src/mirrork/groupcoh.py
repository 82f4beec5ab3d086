"""H^0 and H^1 of finite groups with lattice coefficients.

``H^1(H, Λ)`` is computed as crossed homomorphisms modulo principal ones,
from the full system of cocycle equations. Cocycles are stored as vectors of
length ``|H| * rank``: the block at position ``i`` is the value on
``H.elements[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ValidationError
from .exactalg import (
    AbGroup,
    identity,
    intmat,
    kernel_basis,
    left_inverse,
    matmul,
    smith_normal_form,
    solve_in_basis,
    zeros,
)
from .glattice import GLattice, Subgroup, _check_subgroup, fixed_sublattice

__all__ = [
    "CohomologyResult",
    "h0",
    "h1",
    "h1_restriction",
    "h1_conjugation",
    "h1_cyclic",
    "pi0_fixed_points",
]


@dataclass
class CohomologyResult:
    lattice: GLattice
    subgroup: Subgroup
    group: AbGroup
    cocycle_basis: np.ndarray  # one representative cocycle per invariant factor
    coord_matrix: np.ndarray  # cocycle vector -> invariant-factor coordinates
    restrictions: dict = field(default_factory=dict)

    def coordinates(self, cocycle) -> tuple[int, ...]:
        v = intmat(cocycle).reshape(-1, 1) if not isinstance(cocycle, np.ndarray) or cocycle.ndim == 1 else cocycle
        c = matmul(self.coord_matrix, intmat(v))
        return self.group.reduce([int(x) for x in c[:, 0]])

    def cocycle(self, coords) -> np.ndarray:
        """Representative cocycle (column vector) of the class with these coordinates."""
        out = zeros(self.cocycle_basis.shape[0], 1)
        for j, c in enumerate(coords):
            if c:
                out = out + int(c) * self.cocycle_basis[:, j:j + 1]
        return out

    def elements(self) -> list[tuple[int, ...]]:
        return self.group.elements()

    def value(self, cocycle: np.ndarray, h: int) -> np.ndarray:
        r = self.lattice.rank
        i = self.subgroup.elements.index(h)
        return cocycle[i * r:(i + 1) * r, :]


def _cache(lat: GLattice) -> dict:
    cache = lat.__dict__.get("_h1_cache")
    if cache is None:
        cache = lat.__dict__.setdefault("_h1_cache", {})
    return cache


def h0(lat: GLattice, H: Subgroup) -> AbGroup:
    """Invariants ``Λ^H`` (free of rank ``rank Λ^H``)."""
    return AbGroup(fixed_sublattice(lat, H).shape[1])


def h1(lat: GLattice, H: Subgroup) -> CohomologyResult:
    """``H^1(H, Λ) = Z^1 / B^1`` with representatives and coordinates."""
    _check_subgroup(lat, H)
    cache = _cache(lat)
    key = H.elements
    if key in cache:
        return cache[key]
    G, r = lat.group, lat.rank
    elems = H.elements
    pos = {h: i for i, h in enumerate(elems)}
    n = len(elems) * r
    # φ(gh) - φ(g) - ρ(g) φ(h) = 0 for all g, h in H
    eqs = zeros(len(elems) ** 2 * r, n)
    row = 0
    for g in elems:
        rho = lat.action(g)
        for h in elems:
            gh = pos[G.mul(g, h)]
            for k in range(r):
                eqs[row + k, gh * r + k] += 1
                eqs[row + k, pos[g] * r + k] -= 1
                for j in range(r):
                    eqs[row + k, pos[h] * r + j] -= rho[k, j]
            row += r
    Z = kernel_basis(eqs)
    z = Z.shape[1]
    # coboundaries (ρ(h)λ - λ)_h for λ = e_j
    B = zeros(n, r)
    for h in elems:
        B[pos[h] * r:(pos[h] + 1) * r, :] = lat.action(h) - identity(r)
    L = left_inverse(Z)
    Y = solve_in_basis(Z, B, L)
    U, D, _ = smith_normal_form(Y)
    diag = [int(D[i, i]) if i < min(D.shape) else 0 for i in range(z)]
    if any(d == 0 for d in diag):
        raise ConsistencyError("H^1 with lattice coefficients came out infinite")
    keep = [i for i, d in enumerate(diag) if d != 1]
    Uinv = _inverse(U)
    basis = matmul(Z, Uinv)[:, keep] if keep else zeros(n, 0)
    coords = matmul(U, L)[keep, :] if keep else zeros(0, n)
    res = CohomologyResult(lat, H, AbGroup(0, tuple(diag[i] for i in keep)), basis, coords)
    _validate_on_generators(res)
    cache[key] = res
    return res


def _inverse(U: np.ndarray) -> np.ndarray:
    from .glattice import unimodular_inverse

    return unimodular_inverse(U)


def _validate_on_generators(res: CohomologyResult):
    lat, H = res.lattice, res.subgroup
    G = lat.group
    for j in range(res.cocycle_basis.shape[1]):
        phi = res.cocycle_basis[:, j:j + 1]
        for g in H.generators:
            for h in H.elements:
                lhs = res.value(phi, G.mul(g, h))
                rhs = res.value(phi, g) + matmul(lat.action(g), res.value(phi, h))
                if not np.array_equal(lhs, rhs):
                    raise ConsistencyError("cocycle representative fails the cocycle identity")


def _restrict_cocycle(lat: GLattice, phi: np.ndarray, H: Subgroup, K: Subgroup) -> np.ndarray:
    r = lat.rank
    pos = {h: i for i, h in enumerate(H.elements)}
    out = zeros(len(K.elements) * r, 1)
    for i, k in enumerate(K.elements):
        out[i * r:(i + 1) * r, :] = phi[pos[k] * r:(pos[k] + 1) * r, :]
    return out


def h1_restriction(lat: GLattice, K: Subgroup, H: Subgroup) -> np.ndarray:
    """Matrix of ``H^1(H, Λ) -> H^1(K, Λ)`` in invariant-factor coordinates."""
    if not K.is_subgroup_of(H):
        raise ValidationError(f"{list(K.elements)} is not contained in {list(H.elements)}")
    src = h1(lat, H)
    key = K.elements
    if key in src.restrictions:
        return src.restrictions[key]
    tgt = h1(lat, K)
    M = zeros(tgt.group.ngens, src.group.ngens)
    for j in range(src.group.ngens):
        psi = _restrict_cocycle(lat, src.cocycle_basis[:, j:j + 1], H, K)
        M[:, j] = tgt.coordinates(psi)
    src.restrictions[key] = M
    return M


def h1_conjugation(lat: GLattice, g: int, H: Subgroup) -> np.ndarray:
    """Matrix of ``c_g: H^1(H, Λ) -> H^1(gHg^-1, Λ)``, ``(c_g φ)(g h g^-1) = ρ(g) φ(h)``."""
    G, r = lat.group, lat.rank
    Hg = H.conjugate(g)
    src, tgt = h1(lat, H), h1(lat, Hg)
    pos = {h: i for i, h in enumerate(H.elements)}
    tpos = {h: i for i, h in enumerate(Hg.elements)}
    M = zeros(tgt.group.ngens, src.group.ngens)
    rho = lat.action(g)
    for j in range(src.group.ngens):
        phi = src.cocycle_basis[:, j:j + 1]
        psi = zeros(len(Hg.elements) * r, 1)
        for h in H.elements:
            i = tpos[G.conjugate(g, h)]
            psi[i * r:(i + 1) * r, :] = matmul(rho, phi[pos[h] * r:(pos[h] + 1) * r, :])
        M[:, j] = tgt.coordinates(psi)
    return M


def h1_cyclic(lat: GLattice, H: Subgroup) -> AbGroup:
    """``ker(N) / im(σ - 1)`` for cyclic ``H = <σ>``; independent check on :func:`h1`."""
    G, r = lat.group, lat.rank
    sigma = next((h for h in H.elements if G.element_order(h) == H.order), None)
    if sigma is None:
        raise ValidationError("subgroup is not cyclic")
    N = zeros(r, r)
    for h in H.elements:
        N = N + lat.action(h)
    K = kernel_basis(N)
    im = lat.action(sigma) - identity(r)
    Y = solve_in_basis(K, im)
    from .exactalg import group_from_presentation

    return group_from_presentation(K.shape[1], Y.T)


def pi0_fixed_points(lat: GLattice, H: Subgroup) -> tuple[AbGroup, int]:
    """Component group of the fixed torus and the dimension of its identity component."""
    return h1(lat, H).group, fixed_sublattice(lat, H).shape[1]
