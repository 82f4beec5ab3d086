"""Regular equivariant cell structures on the torus ``Λ_R / Λ``.

Cells are handled through a :class:`PeriodicPoset`: one entry per cell class
modulo ``Λ`` together with a canonical lift to ``R^n``. Faces and the group
action are recorded as (class, integer translation) pairs, so nothing is ever
compared in floating point.

Two base structures are available. The cubical one is the half-integer grid
and needs every action matrix to be a signed permutation. The Delone one is
the periodic Delone subdivision for the averaged Gram matrix and works for any
action in low rank. Either is then barycentrically subdivided, which makes it
a regular G-CW complex with simplicial cells.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConsistencyError, UnsupportedError, ValidationError
from .exactalg import AbGroup, intmat, kernel_basis, sparse_invariant_factors
from .glattice import GLattice, Subgroup

__all__ = [
    "PeriodicPoset",
    "EquivariantCellComplex",
    "FixedSubcomplex",
    "build_complex",
    "cubical_poset",
    "delone_poset",
    "barycentric_subdivision",
    "verify_complex",
    "fixed_subcomplex",
    "fixed_component_dimensions",
    "underlying_homology",
    "EQCW_SCHEMA",
]

EQCW_SCHEMA = "eqcw/1"
DELONE_RANK_CAP = 3
DELONE_RANK_HARD_CAP = 4
CELL_CAP = 1_500_000


def max_cells() -> int:
    raw = os.environ.get("MIRRORK_MAX_CELLS")
    return CELL_CAP if raw is None else int(raw)


def delone_rank_cap() -> int:
    raw = os.environ.get("MIRRORK_MAX_DELONE_RANK")
    cap = DELONE_RANK_CAP if raw is None else int(raw)
    return min(cap, DELONE_RANK_HARD_CAP)


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _matvec(rows, v):
    return tuple(sum(x * y for x, y in zip(r, v)) for r in rows)


def _sparse_rows(m):
    return tuple(tuple((j, x) for j, x in enumerate(r) if x) for r in m)


def _apply(sp, v):
    return tuple(sum(x * v[j] for j, x in row) for row in sp)


def _floor_vec(v):
    return tuple(math.floor(x) for x in v)


class PeriodicPoset:
    """Cell classes of a ``Z^n``-periodic cell structure with a group action.

    ``facets[c]`` lists ``(f, t, sign)``: the canonical lift of ``c`` has the
    lift of ``f`` translated by ``t`` as a facet, with incidence ``sign``
    (``None`` when orientations are not tracked). ``action[g][c]`` is
    ``(c', t, sign)`` with ``ρ(g)·lift(c) = lift(c') + t``. Classes are sorted
    by dimension.
    """

    def __init__(self, n, dims, points, facets, action, matrices, kind=""):
        self.n = n
        self.dims = list(dims)
        self._points = points
        self.facets = facets
        self.action = action
        self.matrices = matrices
        self.kind = kind
        if any(self.dims[i] > self.dims[i + 1] for i in range(len(self.dims) - 1)):
            raise ConsistencyError("cell classes must be sorted by dimension")

    def __len__(self):
        return len(self.dims)

    @cached_property
    def points(self) -> list[tuple[Fraction, ...]]:
        """Barycenter of each canonical lift (computed on first use when given as a callable)."""
        return list(self._points() if callable(self._points) else self._points)

    @cached_property
    def regular_failures(self) -> list[tuple[int, int]]:
        return _regular_failures(self)

    @cached_property
    def below(self) -> list[list[tuple[int, tuple]]]:
        """All proper faces of each canonical lift, as sorted (class, translation) pairs."""
        out: list[list] = []
        for c in range(len(self.dims)):
            acc = set()
            for f, t, _ in self.facets[c]:
                acc.add((f, t))
                for g, u in out[f]:
                    acc.add((g, _add(u, t)))
            out.append(sorted(acc))
        return out

    @cached_property
    def vertices(self) -> list[list[tuple[int, tuple]]]:
        zero = (0,) * self.n
        return [
            [(f, t) for f, t in self.below[c] if self.dims[f] == 0] if self.dims[c] else [(c, zero)]
            for c in range(len(self.dims))
        ]

    @property
    def oriented(self) -> bool:
        return all(s is not None for fl in self.facets for _, _, s in fl)


# --------------------------------------------------------------------------
# Cubical base structure on the half-integer grid

# per coordinate: 0 -> {0}, 1 -> {1/2}, 2 -> [0, 1/2], 3 -> [1/2, 1]
_HALF = Fraction(1, 2)
_CENTER = {0: Fraction(0), 1: _HALF, 2: Fraction(1, 4), 3: Fraction(3, 4)}
_NEG = {0: (0, 0), 1: (1, -1), 2: (3, -1), 3: (2, -1)}


def _signed_permutation(m) -> tuple[list[int], list[int]]:
    n = len(m)
    perm, sign = [0] * n, [0] * n
    for j in range(n):
        nz = [i for i in range(n) if m[i][j]]
        if len(nz) != 1 or abs(m[nz[0]][j]) != 1:
            raise UnsupportedError("cubical backend needs signed permutation matrices")
        perm[j], sign[j] = nz[0], int(m[nz[0]][j])
    return perm, sign


def _perm_sign(seq) -> int:
    s = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                s = -s
    return s


def cubical_poset(lat: GLattice) -> PeriodicPoset:
    """Cells of ``(½Z)^n / Z^n``: products of the points ``0, ½`` and the intervals between them."""
    n = lat.rank
    mats = [[[int(x) for x in row] for row in lat.action(g)] for g in range(lat.group.order)]
    signed = [_signed_permutation(m) for m in mats]
    types = sorted(itertools.product(range(4), repeat=n), key=lambda t: (sum(x >= 2 for x in t), t))
    index = {t: i for i, t in enumerate(types)}
    zero = (0,) * n
    dims = [sum(x >= 2 for x in t) for t in types]
    points = [tuple(_CENTER[x] for x in t) for t in types]
    facets = []
    for t in types:
        fl = []
        edges = [j for j in range(n) if t[j] >= 2]
        for m, j in enumerate(edges):
            sgn = 1 if m % 2 == 0 else -1
            lo, hi = list(t), list(t)
            shift = [0] * n
            if t[j] == 2:
                lo[j], hi[j] = 0, 1
            else:
                lo[j], hi[j] = 1, 0
                shift[j] = 1
            fl.append((index[tuple(hi)], tuple(shift), sgn))
            fl.append((index[tuple(lo)], zero, -sgn))
        facets.append(fl)
    action = []
    for perm, sign in signed:
        row = []
        for t in types:
            img, shift = [0] * n, [0] * n
            for j in range(n):
                if sign[j] > 0:
                    img[perm[j]] = t[j]
                else:
                    img[perm[j]], shift[perm[j]] = _NEG[t[j]]
            edges = [j for j in range(n) if t[j] >= 2]
            s = _perm_sign([perm[j] for j in edges])
            for j in edges:
                s *= sign[j]
            row.append((index[tuple(img)], tuple(shift), s))
        action.append(row)
    P = PeriodicPoset(n, dims, points, facets, action, mats, kind="cubical")
    P.below_arrays = _cubical_below(n, types)
    return P


# (type, face type, translation) for the faces of a one-dimensional factor, the cell itself included
_FACES = np.array([(0, 0, 0), (1, 1, 0), (2, 0, 0), (2, 1, 0), (2, 2, 0), (3, 0, 1), (3, 1, 0), (3, 3, 0)],
                  dtype=np.int64)


def _cubical_below(n: int, types) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (cell, proper face, translation) triples, as arrays."""
    code = np.zeros(4 ** n, dtype=np.int64)
    pw = 4 ** np.arange(n, dtype=np.int64)
    code[np.array([sum(x * 4 ** i for i, x in enumerate(t)) for t in types], dtype=np.int64)] = np.arange(len(types))
    choice = np.indices((len(_FACES),) * n).reshape(n, -1).T if n else np.zeros((1, 0), dtype=np.int64)
    opts = _FACES[choice]  # (rows, n, 3)
    cell = (opts[:, :, 0] * pw).sum(1)
    face = (opts[:, :, 1] * pw).sum(1)
    keep = cell != face
    return code[cell[keep]], code[face[keep]], opts[keep][:, :, 2].reshape(int(keep.sum()), n)


# --------------------------------------------------------------------------
# Delone base structure


def _gram(lat: GLattice) -> list[list[int]]:
    n = lat.rank
    Q = [[0] * n for _ in range(n)]
    for g in range(lat.group.order):
        m = lat.action(g)
        for i in range(n):
            for j in range(n):
                Q[i][j] += int(sum(m[k, i] * m[k, j] for k in range(n)))
    return Q


def _qnorm(Q, x):
    n = len(x)
    return sum(x[i] * Q[i][j] * x[j] for i in range(n) for j in range(n))


def _rational_solve(A, b):
    """Unique solution of a square rational system, or ``None`` if singular."""
    n = len(A)
    M = [[Fraction(x) for x in row] + [Fraction(y)] for row, y in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [x / p for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return tuple(M[r][n] for r in range(n))


def _inverse_diag(Q) -> list[Fraction]:
    n = len(Q)
    out = []
    for i in range(n):
        e = [1 if k == i else 0 for k in range(n)]
        out.append(_rational_solve(Q, e)[i])
    return out


def _points_near(Q, qinv, center, R):
    """Integer points ``x`` with ``(x-c)^T Q (x-c) <= R``."""
    ranges = []
    for i, c in enumerate(center):
        b = math.isqrt(math.floor(R * qinv[i])) + 1
        ranges.append(range(math.floor(c) - b, math.ceil(c) + b + 1))
    out = []
    for x in itertools.product(*ranges):
        d = tuple(Fraction(a) - b for a, b in zip(x, center))
        if _qnorm(Q, d) <= R:
            out.append(x)
    return out


def _relevant_vectors(Q, qinv) -> list[tuple[int, ...]]:
    """Voronoi-relevant vectors: ``±v`` unique shortest in ``v + 2Z^n``."""
    n = len(Q)
    parities = [p for p in itertools.product((0, 1), repeat=n) if any(p)]
    R = max(_qnorm(Q, p) for p in parities)
    best: dict[tuple, list] = {}
    for x in _points_near(Q, qinv, (0,) * n, R):
        if not any(x):
            continue
        key = tuple(a % 2 for a in x)
        nx = _qnorm(Q, x)
        cur = best.get(key)
        if cur is None or nx < cur[0]:
            best[key] = [nx, [x]]
        elif nx == cur[0]:
            cur[1].append(x)
    out = []
    for p in parities:
        vs = best[p][1]
        if len(vs) == 2:
            out.extend(vs)
    return sorted(out)


def _voronoi_vertices(Q, rel) -> list[tuple[Fraction, ...]]:
    n = len(Q)
    rows = [[2 * sum(v[i] * Q[i][j] for i in range(n)) for j in range(n)] for v in rel]
    rhs = [_qnorm(Q, v) for v in rel]
    found = set()
    for S in itertools.combinations(range(len(rel)), n):
        c = _rational_solve([rows[i] for i in S], [rhs[i] for i in S])
        if c is None:
            continue
        if all(sum(r[j] * c[j] for j in range(n)) <= b for r, b in zip(rows, rhs)):
            found.add(c)
    return sorted(found)


def _normalize(points) -> tuple[frozenset, tuple]:
    m = min(points)
    t = _floor_vec(m)
    return frozenset(_sub(p, t) for p in points), t


def _affine_rank(V) -> int:
    if len(V) <= 1:
        return 0
    rows = [_sub(v, V[0]) for v in V[1:]]
    n = len(V[0])
    K = kernel_basis(intmat(rows, len(rows), n))
    return n - K.shape[1]


def _polytope_facets(V: list[tuple[int, ...]], k: int) -> list[tuple[int, ...]]:
    """Facets (as sorted vertex index tuples) of a k-dimensional lattice polytope."""
    if k == 0:
        return []
    n = len(V[0])
    dirs = [_sub(v, V[0]) for v in V[1:]]
    D: list[tuple] = []
    for d in dirs:
        if _affine_rank([(0,) * n] + D + [d]) > len(D):
            D.append(d)
        if len(D) == k:
            break
    found = set()
    for S in itertools.combinations(range(len(V)), k):
        base = V[S[0]]
        A = [_sub(V[s], base) for s in S[1:]]
        M = [[sum(a[i] * d[i] for i in range(n)) for d in D] for a in A]
        Y = kernel_basis(intmat(M, len(M), k))
        if Y.shape[1] != 1:
            continue
        y = [int(x) for x in Y[:, 0]]
        a = tuple(sum(y[m] * D[m][i] for m in range(k)) for i in range(n))
        vals = [sum(a[i] * v[i] for i in range(n)) for v in V]
        b = vals[S[0]]
        if all(x <= b for x in vals) or all(x >= b for x in vals):
            found.add(tuple(i for i, x in enumerate(vals) if x == b))
    return sorted(found)


def _simplices(V: list[tuple], k: int, faces_of) -> list[tuple]:
    """Pulling triangulation: cone the first vertex over the facets that miss it."""
    if k == 0:
        return [(V[0],)]
    out = []
    for F in faces_of(V, k):
        FV = [V[i] for i in F]
        if V[0] in FV:
            continue
        for s in _simplices(sorted(FV), k - 1, faces_of):
            out.append((V[0],) + s)
    return out


def delone_poset(lat: GLattice) -> PeriodicPoset:
    """Periodic Delone subdivision for ``Q = Σ ρ(g)^T ρ(g)``, modulo ``Z^n``."""
    n = lat.rank
    cap = delone_rank_cap()
    if n > cap:
        raise UnsupportedError(f"Delone backend supports rank <= {cap}, got {n}")
    if n > DELONE_RANK_CAP:
        warnings.warn(f"Delone backend at rank {n} is slow", RuntimeWarning, stacklevel=2)
    mats = [[[int(x) for x in row] for row in lat.action(g)] for g in range(lat.group.order)]
    zero = (0,) * n
    if n == 0:
        return PeriodicPoset(0, [0], [()], [[]], [[(0, (), None)] for _ in mats], mats, kind="delone")
    Q = _gram(lat)
    qinv = _inverse_diag(Q)
    rel = _relevant_vectors(Q, qinv)
    tops: dict[frozenset, None] = {}
    for c in _voronoi_vertices(Q, rel):
        R = _qnorm(Q, c)
        cell = [x for x in _points_near(Q, qinv, c, R) if _qnorm(Q, tuple(Fraction(a) - b for a, b in zip(x, c))) == R]
        if _affine_rank(cell) != n:
            raise ConsistencyError("Delone cell is not full-dimensional")
        tops[_normalize(cell)[0]] = None

    # all faces, class keys are vertex sets normalized mod Z^n
    dim_of: dict[frozenset, int] = {}
    facet_raw: dict[frozenset, list] = {}
    stack = [(k, n) for k in tops]
    while stack:
        key, k = stack.pop()
        if key in dim_of:
            continue
        dim_of[key] = k
        V = sorted(key)
        fl = []
        for F in _polytope_facets(V, k):
            fkey, t = _normalize([V[i] for i in F])
            fl.append((fkey, t))
            stack.append((fkey, k - 1))
        facet_raw[key] = fl
    keys = sorted(dim_of, key=lambda s: (dim_of[s], sorted(s)))
    index = {k: i for i, k in enumerate(keys)}
    dims = [dim_of[k] for k in keys]
    points = [tuple(Fraction(sum(v[i] for v in k), len(k)) for i in range(n)) for k in keys]
    facets = [[(index[f], t, None) for f, t in facet_raw[k]] for k in keys]
    action = []
    for m in mats:
        row = []
        for k in keys:
            img, t = _normalize([_matvec(m, v) for v in k])
            if img not in index:
                raise ConsistencyError("Delone subdivision is not invariant under the group")
            row.append((index[img], t, None))
        action.append(row)
    P = PeriodicPoset(n, dims, points, facets, action, mats, kind="delone")
    P.top_volume = _check_delone(P, keys, n)
    return P


def _check_delone(P: PeriodicPoset, keys, n) -> Fraction:
    vol = Fraction(0)
    for key, d in zip(keys, P.dims):
        if d != n:
            continue
        for s in _simplices(sorted(key), n, _polytope_facets):
            rows = [_sub(v, s[0]) for v in s[1:]]
            from .exactalg import determinant

            vol += Fraction(abs(determinant(intmat(rows, n, n))), math.factorial(n))
    if vol != 1:
        raise ConsistencyError(f"Delone cells cover volume {vol}, expected 1")
    count: dict[int, int] = {}
    for c, d in enumerate(P.dims):
        if d == n:
            for f, _, _ in P.facets[c]:
                count[f] = count.get(f, 0) + 1
    bad = [f for f, d in enumerate(P.dims) if d == n - 1 and count.get(f) != 2]
    if bad:
        raise ConsistencyError("Delone facets are not shared by exactly two cells")
    return vol


# --------------------------------------------------------------------------
# Barycentric subdivision


class _Codec:
    """Packs ``(class, translation)`` into one int64; translations become base-``B`` digits."""

    def __init__(self, n: int, nclasses: int, off: int):
        self.n, self.off, self.B = n, off, 2 * off + 1
        self.pow = np.array([self.B ** i for i in range(n)], dtype=np.int64)
        self.W = self.B ** n
        if nclasses * self.W >= 2 ** 62:
            raise UnsupportedError("cell structure too large for the flag encoding")
        self.zero = off * int(self.pow.sum())

    def encode(self, cls: np.ndarray, trans: np.ndarray) -> np.ndarray:
        if trans.size and np.abs(trans).max() > self.off:
            raise ConsistencyError("translation outside the encodable range")
        return cls * self.W + ((trans + self.off) * self.pow).sum(-1) if self.n else cls * self.W

    def delta(self, trans: np.ndarray) -> np.ndarray:
        return (trans * self.pow).sum(-1) if self.n else np.zeros(trans.shape[:-1], dtype=np.int64)

    def decode(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cls, rem = np.divmod(keys, self.W)
        return cls, (rem[..., None] // self.pow) % self.B - self.off


def _lookup(table: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Row index of each query row in ``table`` (-1 when absent)."""
    if not len(query):
        return np.zeros(0, dtype=np.int64)
    rows = np.vstack([table, query])
    order = np.lexsort(rows.T[::-1])
    srt = rows[order]
    fresh = np.ones(len(srt), dtype=bool)
    fresh[1:] = np.any(srt[1:] != srt[:-1], axis=1)
    group = np.empty(len(srt), dtype=np.int64)
    group[order] = np.cumsum(fresh) - 1
    pos = np.full(int(group.max()) + 1, -1, dtype=np.int64)
    pos[group[:len(table)]] = np.arange(len(table))
    return pos[group[len(table):]]


class FlagPoset(PeriodicPoset):
    """Barycentric subdivision with flags stored as integer-coded arrays.

    ``layers[L-1]`` holds the flags with ``L`` elements, one per row, each
    entry a packed ``(class, translation)``, normalized so the top entry has
    translation zero. Rows are sorted by top class, then lexicographically.
    Tuple views (``flags``, ``facets``, ``action``) are built on first use.
    """

    def __init__(self, base: PeriodicPoset, codec: _Codec, layers, facet_idx, facet_shift, act_idx, act_shift):
        self.base = base
        self.codec = codec
        self.layers = layers
        self.offsets = np.cumsum([0] + [len(F) for F in layers])
        self.facet_idx = facet_idx
        self.facet_shift = facet_shift
        self.act_idx = act_idx
        self.act_shift = act_shift
        dims = [L for L, F in enumerate(layers) for _ in range(len(F))]
        super().__init__(base.n, dims, self._barycenters, None, None, base.matrices, kind=base.kind)
        del self.facets, self.action

    def _decoded(self, L: int):
        return self.codec.decode(self.layers[L])

    @cached_property
    def flags(self) -> list[tuple]:
        out = []
        for L in range(len(self.layers)):
            cls, tr = self._decoded(L)
            out.extend(tuple((int(a), tuple(int(x) for x in u)) for a, u in zip(cr, tc)) for cr, tc in zip(cls, tr))
        return out

    def _barycenters(self):
        base = self.base.points
        out = []
        for fl in self.flags:
            acc = [Fraction(0)] * self.n
            for a, u in fl:
                for i in range(self.n):
                    acc[i] += base[a][i] + u[i]
            out.append(tuple(x / len(fl) for x in acc))
        return out

    @cached_property
    def facets(self) -> list[list[tuple[int, tuple, int]]]:
        zero = (0,) * self.n
        out = [[] for _ in range(len(self.layers[0]))]
        for L in range(1, len(self.layers)):
            idx, sh = self.facet_idx[L], self.facet_shift[L]
            for i in range(len(idx)):
                row = [(int(idx[i, j]), zero, 1 if j % 2 == 0 else -1) for j in range(L)]
                row.append((int(idx[i, L]), tuple(int(x) for x in sh[i]), 1 if L % 2 == 0 else -1))
                out.append(row)
        return out

    @cached_property
    def action(self) -> list[list[tuple[int, tuple, int]]]:
        return [[(int(j), tuple(int(x) for x in u), 1) for j, u in zip(self.act_idx[g], self.act_shift[g])]
                for g in range(len(self.matrices))]

    @property
    def oriented(self) -> bool:
        return True

    @cached_property
    def vertices(self) -> list[list[tuple[int, tuple]]]:
        # vertex ids of the subdivision are the base class indices
        return [list(fl) for fl in self.flags]

    def vertex_ids(self, L: int) -> np.ndarray:
        return self.layers[L] // self.codec.W

    def action_arrays(self, g: int) -> tuple[np.ndarray, np.ndarray]:
        return self.act_idx[g], np.ones(len(self.act_idx[g]), dtype=np.int64)

    def facet_arrays(self, L: int) -> tuple[np.ndarray, np.ndarray]:
        signs = np.array([1 if j % 2 == 0 else -1 for j in range(L + 1)], dtype=np.int64)
        return self.facet_idx[L], signs


def _base_arrays(P: PeriodicPoset):
    n = P.n
    nb = len(P.dims)
    if getattr(P, "below_arrays", None) is not None:
        BC, BF, BT = P.below_arrays
    else:
        below = P.below
        pairs = [(c, f, t) for c in range(nb) for f, t in below[c]]
        BC = np.array([c for c, _, _ in pairs], dtype=np.int64)
        BF = np.array([f for _, f, _ in pairs], dtype=np.int64)
        BT = np.array([t for _, _, t in pairs], dtype=np.int64).reshape(len(pairs), n)
    act_b = [np.array([a[0] for a in row], dtype=np.int64) for row in P.action]
    act_t = [np.array([a[1] for a in row], dtype=np.int64).reshape(nb, n) for row in P.action]
    return BC, BF, BT, act_b, act_t


def barycentric_subdivision(P: PeriodicPoset, max_dim: int | None = None) -> FlagPoset:
    """Flag complex of ``P``: one simplex per chain of faces, up to ``max_dim``.

    A flag lists ``(class, translation)`` pairs in increasing dimension,
    normalized so that its top element has translation zero. Its vertices are
    the barycenters in that order, which is also the order of the new vertex
    ids, so the action never flips orientations.
    """
    n = P.n
    nb = len(P.dims)
    top = n if max_dim is None else min(max_dim, n)
    cap = max_cells()
    BC, BF, BT, act_b, act_t = _base_arrays(P)
    mats = [np.array(m, dtype=np.int64).reshape(n, n) for m in P.matrices]
    tb = int(np.abs(BT).max()) if BT.size else 0
    ta = max((int(np.abs(t).max()) for t in act_t if t.size), default=0)
    norm = max((int(np.abs(m).sum(axis=1).max()) for m in mats if m.size), default=1)
    codec = _Codec(n, nb, 2 * (norm * tb + ta) + tb + 1)
    Z = np.zeros(n, dtype=np.int64)
    base_key = codec.encode(np.arange(nb, dtype=np.int64), np.zeros((nb, n), dtype=np.int64))

    layers = [base_key.reshape(nb, 1)]
    total = nb
    dBT = codec.delta(BT)
    for L in range(2, top + 2):
        prev = layers[-1]
        last = prev[:, -1] // codec.W
        starts = np.searchsorted(last, np.arange(nb), side="left")
        counts = np.searchsorted(last, np.arange(nb), side="right") - starts
        cnt = counts[BF]
        tot = int(cnt.sum())
        total += tot
        if total > cap:
            raise UnsupportedError(f"subdivision exceeds {cap} cells (set MIRRORK_MAX_CELLS to raise the cap)")
        pair = np.repeat(np.arange(len(BF)), cnt)
        within = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        rows = prev[starts[BF][pair] + within] + dBT[pair][:, None]
        new = np.hstack([rows, base_key[BC[pair]][:, None]]) if tot else np.zeros((0, L), dtype=np.int64)
        order = np.lexsort([new[:, j] for j in range(L - 2, -1, -1)] + [new[:, L - 1]])
        layers.append(new[order])

    facet_idx: list = [None]
    facet_shift: list = [None]
    offsets = np.cumsum([0] + [len(F) for F in layers])
    for L in range(1, len(layers)):
        F = layers[L]
        idx = np.zeros((len(F), L + 1), dtype=np.int64)
        shift = np.zeros((len(F), n), dtype=np.int64)
        for j in range(L + 1):
            sub = np.delete(F, j, axis=1)
            if j == L:
                _, tr = codec.decode(sub[:, -1])
                shift = tr
                sub = sub - codec.delta(tr)[:, None]
            pos = _lookup(layers[L - 1], sub)
            if len(pos) and pos.min() < 0:
                raise ConsistencyError("a face of a flag is not a flag")
            idx[:, j] = pos + offsets[L - 1]
        facet_idx.append(idx)
        facet_shift.append(shift)

    act_idx, act_shift = [], []
    decoded = [codec.decode(F) for F in layers]
    for g, m in enumerate(mats):
        gi, gs = [], []
        for L, F in enumerate(layers):
            cls, tr = decoded[L]
            icls = act_b[g][cls]
            itr = act_t[g][cls] + np.einsum("ij,rkj->rki", m, tr) if n else act_t[g][cls]
            u = itr[:, -1, :].copy()
            itr = itr - u[:, None, :]
            pos = _lookup(F, codec.encode(icls, itr)) if len(F) else np.zeros(0, dtype=np.int64)
            if len(pos) and pos.min() < 0:
                raise ConsistencyError("group action does not preserve the flag complex")
            gi.append(pos + offsets[L])
            gs.append(u.reshape(len(F), n))
        act_idx.append(np.concatenate(gi))
        act_shift.append(np.concatenate(gs) if gs else np.zeros((0, n), dtype=np.int64))
    del Z
    return FlagPoset(P, codec, layers, facet_idx, facet_shift, act_idx, act_shift)


# --------------------------------------------------------------------------
# Complexes


class EquivariantCellComplex:
    """A finite regular G-CW complex structure on the torus, cells grouped by degree.

    ``boundary[p][i]`` lists ``(j, sign)`` with ``j`` a (p-1)-cell.
    ``perm[p][g][i]`` and ``sign[p][g][i]`` describe ``g`` acting on the
    ``i``-th p-cell.
    """

    def __init__(self, lattice: GLattice, poset: PeriodicPoset, backend: str, subdivisions: int, skeleton: int):
        self.lattice = lattice
        self.group = lattice.group
        self.poset = poset
        self.backend = backend
        self.subdivisions = subdivisions
        self.dimension = lattice.rank
        self.skeleton = skeleton
        top = min(skeleton, self.dimension)
        if isinstance(poset, FlagPoset):
            self._init_from_flags(poset, top)
            return
        self.cells: list[list[int]] = [[] for _ in range(top + 1)]
        local = []
        for c, d in enumerate(poset.dims):
            local.append(len(self.cells[d]))
            self.cells[d].append(c)
        self._local = local
        self.boundary: list[list[list[tuple[int, int]]]] = []
        for p, cl in enumerate(self.cells):
            rows = []
            for c in cl:
                acc: dict[int, int] = {}
                for f, _, s in poset.facets[c]:
                    j = local[f]
                    acc[j] = acc.get(j, 0) + s
                rows.append(sorted((j, s) for j, s in acc.items() if s))
            self.boundary.append(rows)
        self.perm: list[np.ndarray] = []
        self.sign: list[np.ndarray] = []
        loc = np.array(local, dtype=np.int64)
        for p, cl in enumerate(self.cells):
            P = np.zeros((self.group.order, len(cl)), dtype=np.int64)
            S = np.zeros((self.group.order, len(cl)), dtype=np.int64)
            for g in range(self.group.order):
                act = poset.action[g]
                if len(cl):
                    P[g] = loc[np.array([act[c][0] for c in cl], dtype=np.int64)]
                    S[g] = np.array([act[c][2] for c in cl], dtype=np.int64)
            self.perm.append(P)
            self.sign.append(S)

    def _init_from_flags(self, poset: "FlagPoset", top: int):
        off = poset.offsets
        self.cells = [list(range(int(off[p]), int(off[p + 1]))) for p in range(top + 1)]
        self._local = np.concatenate([np.arange(int(off[p + 1] - off[p])) for p in range(top + 1)])
        self.boundary = [[[] for _ in self.cells[0]]]
        for p in range(1, top + 1):
            idx, signs = poset.facet_arrays(p)
            idx = idx - off[p - 1]
            order = np.argsort(idx, axis=1, kind="stable")
            sidx = np.take_along_axis(idx, order, 1)
            ssg = signs[order]
            if len(sidx) and not np.all(np.diff(sidx, axis=1)):
                raise ConsistencyError("a simplex has two equal facets")
            self.boundary.append([list(zip(r, t)) for r, t in zip(sidx.tolist(), ssg.tolist())])
        self.perm, self.sign = [], []
        for p in range(top + 1):
            lo, hi = int(off[p]), int(off[p + 1])
            self.perm.append(np.stack([poset.act_idx[g][lo:hi] - lo for g in range(self.group.order)]))
            self.sign.append(np.ones((self.group.order, hi - lo), dtype=np.int64))

    def __repr__(self):
        counts = ", ".join(str(len(c)) for c in self.cells)
        return f"EquivariantCellComplex({self.backend}, dim {self.dimension}, cells [{counts}])"

    @property
    def top_degree(self) -> int:
        return len(self.cells) - 1

    def ncells(self, p: int) -> int:
        return len(self.cells[p]) if 0 <= p < len(self.cells) else 0

    def vertices(self, p: int, i: int) -> list[int]:
        """Sorted vertex ids of the i-th p-cell."""
        if self.vertex_array is not None:
            return sorted(int(v) for v in self.vertex_array[p][i])
        return sorted({self._local[v] for v, _ in self.poset.vertices[self.cells[p][i]]})

    def vertex_coordinates(self, i: int) -> tuple[Fraction, ...]:
        c = self.cells[0][i]
        base = getattr(self.poset, "base", None)
        # a vertex of a subdivision is the barycenter of a base class with the same index
        pt = base.points[c] if base is not None else self.poset.points[c]
        return tuple(x - math.floor(x) for x in pt)

    def stabilizer(self, p: int, i: int) -> Subgroup:
        col = self.perm[p][:, i]
        return Subgroup(self.group, tuple(int(g) for g in np.nonzero(col == i)[0]))

    @cached_property
    def stabilizers(self) -> list[list[Subgroup]]:
        return [[self.stabilizer(p, i) for i in range(len(cl))] for p, cl in enumerate(self.cells)]

    @cached_property
    def vertex_array(self) -> list[np.ndarray] | None:
        """Vertex ids of every p-cell as an ``(N_p, p+1)`` array, for subdivided (simplicial) complexes."""
        if not isinstance(self.poset, FlagPoset):
            return None
        return [self.poset.vertex_ids(p) for p in range(len(self.cells))]

    def regular_failures(self) -> list[tuple[int, int, int]]:
        """``(p, i, g)`` where ``g`` maps the i-th p-cell to itself but moves a vertex or flips it."""
        if self.vertex_array is None:
            return [(self.poset.dims[c], self._local[c], g) for c, g in self.poset.regular_failures]
        bad = []
        for p in range(1, len(self.cells)):
            V = self.vertex_array[p]
            ar = np.arange(len(V))
            for g in range(1, self.group.order):
                fixed = np.nonzero(self.perm[p][g] == ar)[0]
                if not len(fixed):
                    continue
                Vf = V[fixed]
                ok = (self.perm[0][g][Vf] == Vf).all(axis=1) & (self.sign[p][g][fixed] == 1)
                bad.extend((p, int(i), g) for i in fixed[~ok])
        return bad

    def is_embedded(self) -> bool:
        """No cell has two vertices identified in the torus."""
        if self.vertex_array is None:
            return _is_embedded(self.poset)
        for V in self.vertex_array[1:]:
            if len(V) and not np.all(np.diff(np.sort(V, axis=1), axis=1)):
                return False
        return True

    def euler_characteristic(self) -> int:
        return sum((-1) ** p * len(c) for p, c in enumerate(self.cells))

    def boundary_columns(self, p: int) -> list[dict[int, int]]:
        """Sparse columns of the cellular boundary ``C_p -> C_{p-1}``."""
        if p <= 0 or p >= len(self.cells):
            return [{} for _ in range(self.ncells(p))]
        return [dict(b) for b in self.boundary[p]]

    def orbits(self, p: int) -> list[list[int]]:
        """Orbits of p-cells, each sorted, ordered by smallest member."""
        seen = np.zeros(self.ncells(p), dtype=bool)
        out = []
        P = self.perm[p]
        for i in range(self.ncells(p)):
            if seen[i]:
                continue
            orb = sorted({int(x) for x in P[:, i]})
            seen[orb] = True
            out.append(orb)
        return out

    def to_json(self) -> dict:
        G = self.group
        return {
            "schema": EQCW_SCHEMA,
            "dimension": self.dimension,
            "skeleton": self.top_degree,
            "backend": self.backend,
            "subdivisions": self.subdivisions,
            "group": G.to_json(),
            "vertex_coordinates": [[str(x) for x in self.vertex_coordinates(i)] for i in range(self.ncells(0))],
            "cells": [
                [{"vertices": self.vertices(p, i), "boundary": [list(e) for e in self.boundary[p][i]]} for i in range(len(cl))]
                for p, cl in enumerate(self.cells)
            ],
            "action": [
                {"perm": [self.perm[p][g].tolist() for p in range(len(self.cells))],
                 "sign": [self.sign[p][g].tolist() for p in range(len(self.cells))]}
                for g in range(G.order)
            ],
        }


def _regular_failures(P: PeriodicPoset, cells=None) -> list[tuple[int, int]]:
    """(class, g) pairs where g maps a cell to itself without fixing its vertices."""
    bad = []
    for g, m in enumerate(P.matrices):
        act = P.action[g]
        sp = _sparse_rows(m)
        for c in range(len(P.dims)) if cells is None else cells:
            b, t, s = act[c]
            if b != c:
                continue
            if s is not None and s != 1:
                bad.append((c, g))
                continue
            for v, u in P.vertices[c]:
                vb, vt, _ = act[v]
                if vb != v or (_add(_apply(sp, u), vt) if any(u) else vt) != _add(u, t):
                    bad.append((c, g))
                    break
    return bad


def _is_embedded(P: PeriodicPoset) -> bool:
    """Distinct vertices of each lifted cell lie in distinct classes."""
    for c in range(len(P.dims)):
        vs = [v for v, _ in P.vertices[c]]
        if len(vs) != len(set(vs)):
            return False
    return True


def _backend_for(lat: GLattice, backend: str) -> str:
    if backend not in ("auto", "cubical", "delone"):
        raise ValidationError(f"unknown backend {backend!r}")
    if backend == "auto":
        return "cubical" if lat.is_monomial() else "delone"
    if backend == "cubical" and not lat.is_monomial():
        raise UnsupportedError("cubical backend needs signed permutation matrices; the action is not monomial")
    return backend


def build_complex(lat: GLattice, backend: str = "auto", subdivisions: int = 1, max_dim: int | None = None,
                  verify: bool = True) -> EquivariantCellComplex:
    """Regular G-CW structure on ``Λ_R/Λ``.

    ``subdivisions`` barycentric subdivisions are applied (a further one is
    added automatically if the result is not yet regular). ``max_dim``
    truncates the last subdivision to a skeleton, which is enough for
    ``H_0`` and fixed-point components.
    """
    kind = _backend_for(lat, backend)
    if subdivisions < 0:
        raise ValidationError("subdivisions must be >= 0")
    base = cubical_poset(lat) if kind == "cubical" else delone_poset(lat)

    def subdivide(times):
        P = base
        for i in range(times):
            P = barycentric_subdivision(P, max_dim if i == times - 1 else None)
        return P

    def complex_for(P, done):
        if not P.oriented:
            return None
        skeleton = lat.rank if max_dim is None or done == 0 else min(max_dim, lat.rank)
        return EquivariantCellComplex(lat, P, kind, done, skeleton)

    def regular(X):
        return X is not None and X.is_embedded() and not X.regular_failures()

    X = complex_for(subdivide(subdivisions), subdivisions)
    if not regular(X):
        if subdivisions == 0:
            raise ValidationError("the unsubdivided structure is not a regular complex; use subdivisions >= 1")
        if subdivisions >= 2:
            raise ConsistencyError("complex is still not regular after two subdivisions")
        X = complex_for(subdivide(2), 2)
        if not regular(X):
            raise ConsistencyError("complex is still not regular after two subdivisions")
    if verify:
        verify_complex(X)
    return X


# --------------------------------------------------------------------------
# Verification and derived data


def verify_complex(X: EquivariantCellComplex) -> None:
    """Check ∂∂ = 0, equivariance, regularity, face closure and (for full complexes) χ = 0."""
    for p in range(2, len(X.cells)):
        for i, bd in enumerate(X.boundary[p]):
            acc: dict[int, int] = {}
            for j, s in bd:
                for k, t in X.boundary[p - 1][j]:
                    acc[k] = acc.get(k, 0) + s * t
            if any(acc.values()):
                raise ConsistencyError(f"boundary of boundary is nonzero on {p}-cell {i}")
    for p in range(1, len(X.cells)):
        Pp, Sp = X.perm[p], X.sign[p]
        Pq, Sq = X.perm[p - 1], X.sign[p - 1]
        if _equivariant_uniform(X, p):
            continue
        for g in range(X.group.order):
            for i, bd in enumerate(X.boundary[p]):
                lhs = {int(Pq[g, j]): s * int(Sq[g, j]) for j, s in bd}
                gi = int(Pp[g, i])
                rhs = {j: s * int(Sp[g, i]) for j, s in X.boundary[p][gi]}
                if lhs != rhs:
                    raise ConsistencyError(f"action of element {g} does not commute with the boundary")
    if isinstance(X.poset, FlagPoset):
        off = X.poset.offsets
        for p in range(1, len(X.cells)):
            idx = X.poset.facet_idx[p]
            if idx.size and (idx.min() < off[p - 1] or idx.max() >= off[p]):
                raise ConsistencyError("face of wrong dimension")
    else:
        for p, cl in enumerate(X.cells):
            for c in cl:
                for f, _, _ in X.poset.facets[c]:
                    if X.poset.dims[f] != p - 1:
                        raise ConsistencyError("face of wrong dimension")
    if X.regular_failures():
        raise ConsistencyError("complex is not regular")
    if not X.is_embedded():
        raise ConsistencyError("a cell has identified vertices")
    if 0 < X.dimension == X.top_degree and X.euler_characteristic() != 0:
        raise ConsistencyError(f"Euler characteristic {X.euler_characteristic()} is not 0")


def _equivariant_uniform(X: EquivariantCellComplex, p: int) -> bool:
    """Vectorized g∂ = ∂g when every p-cell has the same number of faces; False if not applicable."""
    bd = X.boundary[p]
    if not bd:
        return True
    k = len(bd[0])
    if any(len(b) != k for b in bd):
        return False
    idx = np.array([[j for j, _ in b] for b in bd], dtype=np.int64).reshape(len(bd), k)
    sgn = np.array([[s for _, s in b] for b in bd], dtype=np.int64).reshape(len(bd), k)
    for g in range(X.group.order):
        li = X.perm[p - 1][g][idx]
        ls = X.sign[p - 1][g][idx] * sgn
        gi = X.perm[p][g]
        ri = idx[gi]
        rs = sgn[gi] * X.sign[p][g][:, None]
        lo, ro = np.argsort(li, axis=1), np.argsort(ri, axis=1)
        if not (np.array_equal(np.take_along_axis(li, lo, 1), np.take_along_axis(ri, ro, 1))
                and np.array_equal(np.take_along_axis(ls, lo, 1), np.take_along_axis(rs, ro, 1))):
            raise ConsistencyError(f"action of element {g} does not commute with the boundary")
    return True


@dataclass
class FixedSubcomplex:
    cells: list[list[int]]
    components: list[list[int]]

    @property
    def count(self) -> int:
        return len(self.components)

    def component_of(self, vertex: int) -> int:
        for i, comp in enumerate(self.components):
            if vertex in comp:
                return i
        raise KeyError(vertex)


def fixed_subcomplex(X: EquivariantCellComplex, H: Subgroup) -> FixedSubcomplex:
    """Cells fixed pointwise by ``H`` and the connected components of their union."""
    gens = H.generators
    cells = []
    for p in range(len(X.cells)):
        idx = np.arange(X.ncells(p))
        mask = np.ones(X.ncells(p), dtype=bool)
        for g in gens:
            mask &= X.perm[p][g] == idx
        cells.append([int(i) for i in np.nonzero(mask)[0]])
    parent = {v: v for v in cells[0]}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    if len(cells) > 1:
        for e in cells[1]:
            ends = [j for j, _ in X.boundary[1][e]]
            if not ends:
                continue
            roots = [find(v) for v in ends]
            r0 = min(roots)
            for r in roots:
                parent[r] = r0
    groups: dict[int, list[int]] = {}
    for v in cells[0]:
        groups.setdefault(find(v), []).append(v)
    comps = sorted((sorted(c) for c in groups.values()), key=lambda c: c[0])
    return FixedSubcomplex(cells, comps)


def fixed_component_dimensions(X: EquivariantCellComplex, H: Subgroup, F: FixedSubcomplex | None = None) -> list[int]:
    """Dimension of each component of ``X^H``, in the order of ``F.components``.

    On a barycentric subdivision the fixed part is the order complex of the
    base cells with fixed barycenters, so the dimension is read off the
    longest chain of such cells. This stays exact when ``X`` is a skeleton.
    """
    F = F if F is not None else fixed_subcomplex(X, H)
    comp = {v: i for i, c in enumerate(F.components) for v in c}
    dims = [0] * F.count
    P = X.poset
    if isinstance(P, FlagPoset):
        base = P.base
        fixed = set(F.cells[0])  # vertex ids are base class ids
        gens = H.generators
        shift = {c: [base.action[g][c][1] for g in gens] for c in fixed}
        height: dict[int, int] = {}
        for c in sorted(fixed, key=lambda c: (base.dims[c], c)):
            best = -1
            for f, t in base.below[c]:
                # the face f + t moves with c only if g shifts it by the same vector
                if f in fixed and f in height and all(
                        _add(u, _matvec(base.matrices[g], t)) == _add(t, s)
                        for g, u, s in zip(gens, shift[f], shift[c])):
                    best = max(best, height[f])
            height[c] = best + 1
            dims[comp[c]] = max(dims[comp[c]], height[c])
        return dims
    for p, cells in enumerate(F.cells):
        for i in cells:
            v = X.vertices(p, i)[0]
            dims[comp[v]] = max(dims[comp[v]], p)
    return dims


def underlying_homology(X: EquivariantCellComplex) -> list[AbGroup]:
    """Cellular homology of the underlying space, forgetting the action."""
    top = X.top_degree
    ranks, tors = [0] * (top + 2), [[] for _ in range(top + 2)]
    for p in range(1, top + 1):
        ranks[p], tors[p] = sparse_invariant_factors(X.boundary_columns(p), X.ncells(p - 1))
    out = []
    for p in range(top + 1):
        free = X.ncells(p) - ranks[p] - ranks[p + 1]
        out.append(AbGroup.from_orders(tors[p + 1], free))
    return out
