"""Exact integer linear algebra.

Matrices are 2-d numpy arrays of ``dtype=object`` holding Python ints, so all
arithmetic is arbitrary precision. The heavy loops run on plain lists of lists
internally; numpy is only the container.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, prod
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "AbGroup",
    "intmat",
    "identity",
    "matmul",
    "zeros",
    "is_unimodular",
    "determinant",
    "smith_normal_form",
    "invariant_factors",
    "sparse_invariant_factors",
    "group_from_presentation",
    "kernel_basis",
    "hermite_columns",
    "left_inverse",
    "solve_in_basis",
    "solve_full_rank",
    "map_kernel",
    "map_cokernel",
    "congruent",
    "well_defined",
]


def intmat(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce ``data`` to a 2-d object array of Python ints."""
    if isinstance(data, np.ndarray) and data.dtype == object and data.ndim == 2:
        out = data.copy()
    else:
        arr = np.array(data, dtype=object)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(rows or 0, cols or 0)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
        out = np.empty(arr.shape, dtype=object)
        for idx, v in np.ndenumerate(arr):
            out[idx] = int(v)
    if rows is not None and cols is not None and out.size == 0:
        out = np.zeros((rows, cols), dtype=object)
    if rows is not None and out.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {out.shape[0]}")
    if cols is not None and out.shape[1] != cols:
        raise ValueError(f"expected {cols} columns, got {out.shape[1]}")
    return out


def zeros(m: int, n: int) -> np.ndarray:
    out = np.empty((m, n), dtype=object)
    out.fill(0)
    return out


def identity(n: int) -> np.ndarray:
    out = zeros(n, n)
    for i in range(n):
        out[i, i] = 1
    return out


def matmul(*mats: np.ndarray) -> np.ndarray:
    """Exact product of object matrices; handles empty inner dimensions."""
    out = mats[0]
    for m in mats[1:]:
        if out.shape[1] != m.shape[0]:
            raise ValueError(f"shape mismatch {out.shape} @ {m.shape}")
        if out.shape[1] == 0:
            out = zeros(out.shape[0], m.shape[1])
        else:
            out = out.dot(m)
    return out


def _tolists(M: np.ndarray) -> list[list[int]]:
    return [[int(x) for x in row] for row in M]


def determinant(M: np.ndarray) -> int:
    """Bareiss fraction-free determinant."""
    A = _tolists(intmat(M))
    n = len(A)
    if n == 0:
        return 1
    if any(len(r) != n for r in A):
        raise ValueError("determinant of a non-square matrix")
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        akk = A[k][k]
        for i in range(k + 1, n):
            aik = A[i][k]
            row_i, row_k = A[i], A[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
        prev = akk
    return sign * A[n - 1][n - 1]


def is_unimodular(M: np.ndarray) -> bool:
    return M.shape[0] == M.shape[1] and abs(determinant(M)) == 1


# --------------------------------------------------------------------------
# Smith normal form


def _snf_lists(A: list[list[int]], m: int, n: int, track: bool):
    U = [[int(i == j) for j in range(m)] for i in range(m)] if track else None
    V = [[int(i == j) for j in range(n)] for i in range(n)] if track else None

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        if track:
            U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        if track:
            for row in V:
                row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):
        # row_dst -= q * row_src
        rd, rs = A[dst], A[src]
        for k in range(n):
            if rs[k]:
                rd[k] -= q * rs[k]
        if track:
            ud, us = U[dst], U[src]
            for k in range(m):
                if us[k]:
                    ud[k] -= q * us[k]

    def add_col(dst, src, q):
        # col_dst -= q * col_src
        for row in A:
            if row[src]:
                row[dst] -= q * row[src]
        if track:
            for row in V:
                if row[src]:
                    row[dst] -= q * row[src]

    for t in range(min(m, n)):
        while True:
            # smallest nonzero |entry| in the trailing block, ties by (row, col)
            best = None
            for i in range(t, m):
                row = A[i]
                for j in range(t, n):
                    v = row[j]
                    if v and (best is None or abs(v) < best[0]):
                        best = (abs(v), i, j)
                        if best[0] == 1:
                            break
                if best is not None and best[0] == 1:
                    break
            if best is None:
                return A, U, V
            _, pi, pj = best
            if pi != t:
                swap_rows(t, pi)
            if pj != t:
                swap_cols(t, pj)
            p = A[t][t]
            dirty = False
            for i in range(t + 1, m):
                if A[i][t]:
                    q = A[i][t] // p
                    add_row(i, t, q)
                    if A[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                if A[t][j]:
                    q = A[t][j] // p
                    add_col(j, t, q)
                    if A[t][j]:
                        dirty = True
            if dirty:
                continue
            # divisibility of the trailing block by the pivot
            bad = None
            for i in range(t + 1, m):
                row = A[i]
                for j in range(t + 1, n):
                    if row[j] % p:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            add_row(t, bad, -1)
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            if track:
                U[t] = [-x for x in U[t]]
    return A, U, V


def smith_normal_form(M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(U, D, V)`` with ``D = U @ M @ V`` in Smith normal form.

    ``U`` and ``V`` are unimodular and the diagonal of ``D`` is a nonnegative
    divisibility chain. The pivot is always the entry of smallest absolute
    value in the trailing block (ties broken by lowest row, then column), so
    the output is a deterministic function of the input.
    """
    M = intmat(M)
    m, n = M.shape
    A, U, V = _snf_lists(_tolists(M), m, n, track=True)
    return intmat(U, m, m), intmat(A, m, n), intmat(V, n, n)


def _diagonal(A: list[list[int]], m: int, n: int) -> list[int]:
    return [A[i][i] for i in range(min(m, n)) if A[i][i]]


def sparse_invariant_factors(columns: Sequence[dict[int, int]], nrows: int) -> tuple[int, list[int]]:
    """Rank and non-unit invariant factors of a sparse integer matrix.

    ``columns[j]`` maps row index to entry. Unit pivots are eliminated first
    (cheapest row/column product), which keeps boundary matrices sparse; the
    leftover core goes through the dense Smith form.
    """
    colmap: dict[int, dict[int, int]] = {}
    rowmap: dict[int, dict[int, int]] = {}
    for j, col in enumerate(columns):
        entries = {r: int(v) for r, v in col.items() if v}
        if not entries:
            continue
        colmap[j] = entries
        for r, v in entries.items():
            if not 0 <= r < nrows:
                raise ValueError(f"row index {r} out of range")
            rowmap.setdefault(r, {})[j] = v

    rank = 0
    progress = True
    while progress and colmap:
        progress = False
        for c in sorted(colmap, key=lambda k: (len(colmap[k]), k)):
            col = colmap.get(c)
            if col is None:
                continue
            pivot_row = None
            for r, v in col.items():
                if v == 1 or v == -1:
                    if pivot_row is None or len(rowmap[r]) < len(rowmap[pivot_row]):
                        pivot_row = r
            if pivot_row is None:
                continue
            p = col[pivot_row]
            prow = rowmap.pop(pivot_row)
            for r2, a in list(col.items()):
                if r2 == pivot_row:
                    continue
                f = a * p
                row2 = rowmap[r2]
                for c2, b in prow.items():
                    if c2 == c:
                        continue
                    nv = row2.get(c2, 0) - f * b
                    if nv:
                        row2[c2] = nv
                        colmap[c2][r2] = nv
                    elif c2 in row2:
                        del row2[c2]
                        del colmap[c2][r2]
                del row2[c]
                if not row2:
                    del rowmap[r2]
            for c2 in prow:
                if c2 == c:
                    continue
                cm = colmap[c2]
                del cm[pivot_row]
                if not cm:
                    del colmap[c2]
            del colmap[c]
            rank += 1
            progress = True

    if not colmap:
        return rank, []
    rows = sorted(rowmap)
    cols = sorted(colmap)
    rindex = {r: i for i, r in enumerate(rows)}
    dense = [[0] * len(cols) for _ in rows]
    for jj, c in enumerate(cols):
        for r, v in colmap[c].items():
            dense[rindex[r]][jj] = v
    A, _, _ = _snf_lists(dense, len(rows), len(cols), track=False)
    diag = _diagonal(A, len(rows), len(cols))
    return rank + len(diag), [d for d in diag if d != 1]


def invariant_factors(M) -> tuple[int, list[int]]:
    """Rank and the invariant factors different from 1 of ``M``."""
    M = intmat(M)
    m, n = M.shape
    cols = []
    for j in range(n):
        cols.append({i: int(M[i, j]) for i in range(m) if M[i, j]})
    return sparse_invariant_factors(cols, m)


# --------------------------------------------------------------------------
# Finitely generated abelian groups


@dataclass(frozen=True, order=True)
class AbGroup:
    """``Z^free_rank ⊕ Z/d_1 ⊕ ... ⊕ Z/d_k`` with ``d_1 | d_2 | ... | d_k``."""

    free_rank: int = 0
    torsion: tuple[int, ...] = ()

    def __post_init__(self):
        tors = tuple(int(d) for d in self.torsion)
        object.__setattr__(self, "torsion", tors)
        if self.free_rank < 0:
            raise ValueError("negative free rank")
        for d in tors:
            if d < 2:
                raise ValueError(f"invariant factor {d} < 2")
        for a, b in zip(tors, tors[1:]):
            if b % a:
                raise ValueError(f"invariant factors {tors} do not form a divisibility chain")

    @classmethod
    def from_orders(cls, orders: Iterable[int], free_rank: int = 0) -> "AbGroup":
        """Normalize an arbitrary list of cyclic orders (0 means Z)."""
        orders = [abs(int(d)) for d in orders]
        free = free_rank + sum(1 for d in orders if d == 0)
        finite = [d for d in orders if d > 1]
        M = zeros(len(finite), len(finite))
        for i, d in enumerate(finite):
            M[i, i] = d
        _, factors = invariant_factors(M) if finite else (0, [])
        return cls(free, tuple(factors))

    @property
    def ngens(self) -> int:
        return self.free_rank + len(self.torsion)

    @property
    def orders(self) -> tuple[int, ...]:
        """Cyclic orders of the standard generators (0 for Z), torsion first."""
        return self.torsion + (0,) * self.free_rank

    @property
    def order(self) -> int | None:
        """Group order, ``None`` when infinite."""
        return None if self.free_rank else prod(self.torsion)

    @property
    def exponent(self) -> int | None:
        if self.free_rank:
            return None
        return self.torsion[-1] if self.torsion else 1

    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.torsion

    def is_free(self) -> bool:
        return not self.torsion

    def __add__(self, other: "AbGroup") -> "AbGroup":
        return AbGroup.from_orders(self.torsion + other.torsion, self.free_rank + other.free_rank)

    def elements(self) -> list[tuple[int, ...]]:
        """All elements of a finite group in standard coordinates."""
        if self.free_rank:
            raise ValueError("infinite group has no element list")
        out: list[tuple[int, ...]] = [()]
        for d in self.torsion:
            out = [e + (k,) for e in out for k in range(d)]
        return out

    def reduce(self, coords: Sequence[int]) -> tuple[int, ...]:
        """Canonical representative of a coordinate vector."""
        out = []
        for c, d in zip(coords, self.orders):
            out.append(int(c) % d if d else int(c))
        return tuple(out)

    def to_json(self) -> list:
        return [self.free_rank, list(self.torsion)]

    @classmethod
    def from_json(cls, data) -> "AbGroup":
        free, tors = data
        return cls.from_orders(tors, free)

    def __str__(self) -> str:
        parts = ["ℤ/%d" % d for d in self.torsion]
        if self.free_rank == 1:
            parts.insert(0, "ℤ")
        elif self.free_rank > 1:
            parts.insert(0, "ℤ^%d" % self.free_rank)
        return " ⊕ ".join(parts) if parts else "0"


def group_from_presentation(generators: int, relations) -> AbGroup:
    """Cokernel of the relation matrix (one relation per row)."""
    R = intmat(relations, cols=generators) if np.size(relations) else zeros(0, generators)
    if R.shape[1] != generators:
        raise ValueError(f"relations have {R.shape[1]} columns, expected {generators}")
    rank, factors = invariant_factors(R)
    return AbGroup(generators - rank, tuple(factors))


# --------------------------------------------------------------------------
# Kernels and solving


def hermite_columns(B) -> np.ndarray:
    """Column-style Hermite normal form of a basis matrix (columns span the same lattice).

    Pivots are positive, entries left of a pivot in its row are reduced into
    ``[0, pivot)``. Zero columns are dropped.
    """
    B = intmat(B)
    m, k = B.shape
    cols = [[int(B[i, j]) for i in range(m)] for j in range(k)]
    out: list[list[int]] = []
    for i in range(m):
        active = [c for c in cols if c[i]]
        rest = [c for c in cols if not c[i]]
        while len(active) > 1:
            active.sort(key=lambda c: abs(c[i]))
            piv = active[0]
            nxt = [piv]
            for c in active[1:]:
                q = c[i] // piv[i]
                c = [a - q * b for a, b in zip(c, piv)]
                if c[i]:
                    nxt.append(c)
                elif any(c):
                    rest.append(c)
            active = nxt
        if active:
            piv = active[0]
            if piv[i] < 0:
                piv = [-a for a in piv]
            for idx, c in enumerate(out):
                q = c[i] // piv[i]
                if q:
                    out[idx] = [a - q * b for a, b in zip(c, piv)]
            out.append(piv)
        cols = rest
    if not out:
        return zeros(m, 0)
    return intmat([list(col) for col in zip(*out)], m, len(out))


def kernel_basis(M) -> np.ndarray:
    """Saturated basis (as columns) of the integer kernel of ``M``.

    Column operations bring ``M`` to echelon form while the same operations
    act on an identity matrix; the transformation is unimodular, so the
    columns it carries into zero columns span a saturated sublattice.
    """
    M = intmat(M)
    m, n = M.shape
    cols = [([int(M[i, j]) for i in range(m)], [int(i == j) for i in range(n)]) for j in range(n)]
    for i in range(m):
        active = [c for c in cols if c[0][i]]
        if not active:
            continue
        cols = [c for c in cols if not c[0][i]]
        while len(active) > 1:
            active.sort(key=lambda c: abs(c[0][i]))
            pa, pt = active[0]
            nxt = [active[0]]
            for a, t in active[1:]:
                q = a[i] // pa[i]
                a = [x - q * y for x, y in zip(a, pa)]
                t = [x - q * y for x, y in zip(t, pt)]
                if a[i]:
                    nxt.append((a, t))
                else:
                    cols.append((a, t))
            active = nxt
        # the surviving pivot column is never zero again; drop it
    kernel = [t for a, t in cols if not any(a)]
    if not kernel:
        return zeros(n, 0)
    return hermite_columns(intmat([list(r) for r in zip(*kernel)], n, len(kernel)))


def left_inverse(Z) -> np.ndarray:
    """Integer ``L`` with ``L @ Z = I`` for a saturated full-column-rank ``Z``."""
    Z = intmat(Z)
    m, k = Z.shape
    if k == 0:
        return zeros(0, m)
    U, D, V = smith_normal_form(Z)
    for i in range(k):
        if D[i, i] != 1:
            raise ValueError("matrix is not a saturated full-rank basis")
    return matmul(V, U[:k, :])


def solve_in_basis(Z, B, L=None) -> np.ndarray:
    """Coordinates ``Y`` with ``Z @ Y = B``; raises if ``B`` leaves the span of ``Z``."""
    Z = intmat(Z)
    B = intmat(B) if np.size(B) else zeros(Z.shape[0], 0)
    L = left_inverse(Z) if L is None else L
    Y = matmul(L, B)
    if not np.array_equal(matmul(Z, Y), B):
        raise ValueError("vectors are not in the lattice spanned by the basis")
    return Y


def solve_full_rank(Z, B) -> np.ndarray:
    """Integer ``Y`` with ``Z @ Y = B`` for a full-column-rank (not necessarily saturated) ``Z``."""
    Z, B = intmat(Z), intmat(B)
    U, D, V = smith_normal_form(Z)
    k = Z.shape[1]
    UB = matmul(U, B)
    W = zeros(k, B.shape[1])
    for i in range(k):
        d = int(D[i, i])
        if d == 0:
            raise ValueError("basis matrix is not of full column rank")
        for j in range(B.shape[1]):
            q, r = divmod(int(UB[i, j]), d)
            if r:
                raise ValueError("vectors are not in the lattice spanned by the basis")
            W[i, j] = q
    if any(UB[i, j] for i in range(k, UB.shape[0]) for j in range(B.shape[1])):
        raise ValueError("vectors are not in the lattice spanned by the basis")
    return matmul(V, W)


def _relation_matrix(G: AbGroup) -> np.ndarray:
    tors = [i for i, d in enumerate(G.orders) if d]
    R = zeros(G.ngens, len(tors))
    for k, i in enumerate(tors):
        R[i, k] = G.orders[i]
    return R


def map_cokernel(A, src: AbGroup, tgt: AbGroup) -> AbGroup:
    """Cokernel of ``A: src -> tgt`` (matrices act on invariant-factor coordinates)."""
    A = intmat(A, tgt.ngens, src.ngens)
    rel = np.concatenate([A, _relation_matrix(tgt)], axis=1)
    return group_from_presentation(tgt.ngens, rel.T)


def map_kernel(A, src: AbGroup, tgt: AbGroup) -> AbGroup:
    """Kernel of ``A: src -> tgt``."""
    A = intmat(A, tgt.ngens, src.ngens)
    n = src.ngens
    if n == 0:
        return AbGroup()
    Rt = _relation_matrix(tgt)
    big = np.concatenate([A, Rt], axis=1)
    K = kernel_basis(big) if big.shape[0] else identity(big.shape[1])
    Z = K[:n, :]
    if Z.shape[1] == 0:
        return AbGroup()
    Y = solve_full_rank(Z, _relation_matrix(src))
    return group_from_presentation(Z.shape[1], Y.T)


def congruent(A, B, tgt: AbGroup) -> bool:
    """``A ≡ B`` as maps into ``tgt`` (rows reduced modulo the target orders)."""
    A, B = intmat(A), intmat(B)
    if A.shape != B.shape:
        return False
    for i, d in enumerate(tgt.orders):
        for j in range(A.shape[1]):
            diff = int(A[i, j]) - int(B[i, j])
            if (diff % d) if d else diff:
                return False
    return True


def well_defined(A, src: AbGroup, tgt: AbGroup) -> bool:
    """Whether ``A`` respects the relations of ``src``."""
    A = intmat(A, tgt.ngens, src.ngens)
    for j, d in enumerate(src.orders):
        if d == 0:
            continue
        for i, e in enumerate(tgt.orders):
            v = d * int(A[i, j])
            if (v % e) if e else v:
                return False
    return True
