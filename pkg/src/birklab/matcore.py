"""Exact rational matrices, permutation matrices and Birkhoff-von Neumann tools.

A "rational matrix" here is a 2-D numpy array of dtype ``object`` whose
entries are :class:`fractions.Fraction`.  Integer-valued matrices (adjacency
and incidence matrices) are kept as ``int64`` arrays; every function accepts
either and never rounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from itertools import permutations
from math import gcd, lcm

import numpy as np

__all__ = [
    "BvnDecomposition",
    "IntSpan",
    "PermMatrix",
    "SubstochasticReport",
    "as_int_matrix",
    "as_ratmatrix",
    "bvn_decompose",
    "bvn_extract_permutation",
    "complete_to_doubly_stochastic",
    "euclidean_norm_sq",
    "greedy_affine_basis",
    "is_doubly_stochastic",
    "is_doubly_substochastic",
    "matrix_from_json",
    "matrix_to_json",
    "all_permutations",
    "truncation",
]


# ---------------------------------------------------------------------------
# construction and exchange
# ---------------------------------------------------------------------------

def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        raise TypeError("floats are not accepted; pass a Fraction or a 'p/q' string")
    return Fraction(x)


def as_ratmatrix(M) -> np.ndarray:
    """Return ``M`` as a 2-D object array of Fractions (copy)."""
    if isinstance(M, np.ndarray) and M.dtype != object:
        if M.dtype.kind in "iub":
            A = np.empty(M.shape, dtype=object)
            A.flat[:] = [Fraction(int(v)) for v in M.flat]
            return A
        raise TypeError(f"cannot take exact values from dtype {M.dtype}")
    rows = [list(r) for r in M]
    n_cols = len(rows[0]) if rows else 0
    A = np.empty((len(rows), n_cols), dtype=object)
    for i, r in enumerate(rows):
        if len(r) != n_cols:
            raise ValueError("ragged matrix")
        for j, v in enumerate(r):
            A[i, j] = _frac(v)
    return A


def as_int_matrix(M) -> np.ndarray:
    """Return ``M`` as an int64 array; rejects non-integral entries."""
    if isinstance(M, np.ndarray) and M.dtype.kind in "iub":
        return M.astype(np.int64)
    A = as_ratmatrix(M)
    if any(v.denominator != 1 for v in A.flat):
        raise ValueError("matrix has non-integer entries")
    return np.array([[int(v) for v in row] for row in A], dtype=np.int64).reshape(A.shape)


def _entry_str(v: Fraction):
    v = _frac(v)
    return int(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def matrix_to_json(M) -> dict:
    """Exchange form ``{rows, cols, entries}``; entries row-major, ints or 'p/q'."""
    A = np.asarray(M)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    rows, cols = A.shape
    return {"rows": rows, "cols": cols, "entries": [_entry_str(v) for v in A.flat]}


def matrix_from_json(obj, integer: bool = False) -> np.ndarray:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    if len(entries) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {len(entries)}")
    A = np.empty((rows, cols), dtype=object)
    A.flat[:] = [_frac(e) for e in entries]
    return as_int_matrix(A) if integer else A


def truncation(m: int, n: int) -> np.ndarray:
    """The m x n matrix ``(U_m 0)``."""
    if m > n:
        raise ValueError("truncation needs m <= n")
    P = np.zeros((m, n), dtype=np.int64)
    P[np.arange(m), np.arange(m)] = 1
    return P


# ---------------------------------------------------------------------------
# permutation matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PermMatrix:
    """Permutation matrix with ``X[i, image[i]] = 1`` (0-based)."""

    image: tuple

    def __post_init__(self):
        img = tuple(int(v) for v in self.image)
        if sorted(img) != list(range(len(img))):
            raise ValueError(f"not a permutation: {img}")
        object.__setattr__(self, "image", img)

    @property
    def n(self) -> int:
        return len(self.image)

    def matrix(self) -> np.ndarray:
        X = np.zeros((self.n, self.n), dtype=np.int64)
        X[np.arange(self.n), self.image] = 1
        return X

    def inverse(self) -> "PermMatrix":
        inv = [0] * self.n
        for i, j in enumerate(self.image):
            inv[j] = i
        return PermMatrix(tuple(inv))

    @classmethod
    def identity(cls, n: int) -> "PermMatrix":
        return cls(tuple(range(n)))

    @classmethod
    def from_matrix(cls, M) -> "PermMatrix":
        A = as_ratmatrix(M)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("permutation matrix must be square")
        image = []
        for i in range(n):
            ones = [j for j in range(n) if A[i, j] == 1]
            if len(ones) != 1 or any(A[i, j] != 0 for j in range(n) if j != ones[0]):
                raise ValueError("not a permutation matrix")
            image.append(ones[0])
        return cls(tuple(image))

    def to_json(self) -> list:
        return [v + 1 for v in self.image]


def all_permutations(n: int) -> np.ndarray:
    """All n! permutations of ``range(n)`` in lexicographic order, shape (n!, n)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(permutations(range(n))), dtype=np.int64)


# ---------------------------------------------------------------------------
# stochasticity and norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubstochasticReport:
    ok: bool
    nonnegative: bool
    row_slack: tuple
    col_slack: tuple


def _square(M) -> np.ndarray:
    A = as_ratmatrix(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"square matrix required, got shape {A.shape}")
    return A


def is_doubly_substochastic(M) -> SubstochasticReport:
    A = _square(M)
    nonneg = all(v >= 0 for v in A.flat)
    row_slack = tuple(1 - sum(A[i, :], Fraction(0)) for i in range(A.shape[0]))
    col_slack = tuple(1 - sum(A[:, j], Fraction(0)) for j in range(A.shape[1]))
    ok = nonneg and all(s >= 0 for s in row_slack) and all(s >= 0 for s in col_slack)
    return SubstochasticReport(ok, nonneg, row_slack, col_slack)


def is_doubly_stochastic(M) -> bool:
    rep = is_doubly_substochastic(M)
    return rep.ok and not any(rep.row_slack) and not any(rep.col_slack)


def euclidean_norm_sq(M) -> Fraction:
    """Sum of squared entries, exact."""
    return sum((_frac(v) ** 2 for v in np.asarray(M, dtype=object).flat), Fraction(0))


def complete_to_doubly_stochastic(M) -> np.ndarray:
    """Raise entries of a doubly substochastic matrix until all sums are 1.

    Northwest-corner fill of the row deficits against the column deficits;
    both deficit vectors have the same total, so the fill always closes.
    """
    A = _square(M).copy()
    rep = is_doubly_substochastic(A)
    if not rep.ok:
        raise ValueError("matrix is not doubly substochastic")
    r = list(rep.row_slack)
    c = list(rep.col_slack)
    i = j = 0
    n = A.shape[0]
    while i < n and j < n:
        if r[i] == 0:
            i += 1
            continue
        if c[j] == 0:
            j += 1
            continue
        t = min(r[i], c[j])
        A[i, j] += t
        r[i] -= t
        c[j] -= t
    return A


# ---------------------------------------------------------------------------
# Birkhoff-von Neumann
# ---------------------------------------------------------------------------

def _has_perfect_matching(support: np.ndarray, rows, cols) -> bool:
    """Kuhn's augmenting paths on the sub-support rows x cols."""
    rows = list(rows)
    cols = list(cols)
    if len(rows) != len(cols):
        return False
    match_col = {}

    def try_row(r, seen):
        for c in cols:
            if support[r, c] and c not in seen:
                seen.add(c)
                if c not in match_col or try_row(match_col[c], seen):
                    match_col[c] = r
                    return True
        return False

    return all(try_row(r, set()) for r in rows)


def bvn_extract_permutation(X):
    """Pick n nonzero cells of a doubly stochastic X forming a permutation.

    Cells are taken lexicographically (row, col), skipping any cell after
    which the remaining support has no perfect matching; a blind greedy can
    dead-end.  Returns ``(PermMatrix, cells)`` with cells in selection order.
    """
    A = _square(X)
    if not is_doubly_stochastic(A):
        raise ValueError("input is not doubly stochastic")
    n = A.shape[0]
    support = np.array([[A[i, j] != 0 for j in range(n)] for i in range(n)], dtype=bool)
    free_rows = set(range(n))
    free_cols = set(range(n))
    cells = []
    while free_rows:
        picked = None
        for i in sorted(free_rows):
            for j in sorted(free_cols):
                if not support[i, j]:
                    continue
                if _has_perfect_matching(support, free_rows - {i}, free_cols - {j}):
                    picked = (i, j)
                    break
            if picked:
                break
        if picked is None:  # cannot happen for doubly stochastic input
            raise RuntimeError("support has no perfect matching")
        cells.append(picked)
        free_rows.discard(picked[0])
        free_cols.discard(picked[1])
    image = [0] * n
    for i, j in cells:
        image[i] = j
    return PermMatrix(tuple(image)), cells


@dataclass(frozen=True)
class BvnDecomposition:
    terms: tuple  # ((Fraction, PermMatrix), ...)

    @property
    def alpha(self) -> int:
        return len(self.terms)

    def reconstruct(self) -> np.ndarray:
        n = self.terms[0][1].n
        out = np.full((n, n), Fraction(0), dtype=object)
        for coeff, P in self.terms:
            out = out + coeff * P.matrix().astype(object)
        return out


def bvn_decompose(X) -> BvnDecomposition:
    """Convex combination of permutation matrices equal to X, exactly."""
    A = _square(X)
    if not is_doubly_stochastic(A):
        raise ValueError("input is not doubly stochastic")
    n = A.shape[0]
    R = A.copy()
    remaining = Fraction(1)
    terms = []
    while remaining > 0:
        P, cells = bvn_extract_permutation(R / remaining)
        lam = min(R[i, j] for i, j in cells)
        for i, j in cells:
            R[i, j] -= lam
        remaining -= lam
        terms.append((lam, P))
        if len(terms) > n * n:  # each round zeroes a cell
            raise RuntimeError("decomposition failed to terminate")
    return BvnDecomposition(tuple(terms))


# ---------------------------------------------------------------------------
# exact spans
# ---------------------------------------------------------------------------

def _int_vector(v) -> np.ndarray:
    """Scale a rational vector to a primitive integer vector (object dtype)."""
    vals = [_frac(x) for x in np.asarray(v, dtype=object).ravel()]
    den = reduce(lcm, (x.denominator for x in vals), 1)
    ints = [int(x * den) for x in vals]
    g = reduce(gcd, ints, 0)
    if g > 1:
        ints = [x // g for x in ints]
    out = np.empty(len(ints), dtype=object)
    out[:] = ints
    return out


class IntSpan:
    """Incremental echelon basis over Q, kept fraction-free in Python ints."""

    def __init__(self, dim: int):
        self.dim = dim
        self.rows: list = []
        self.pivots: list = []

    @property
    def rank(self) -> int:
        return len(self.rows)

    def reduce(self, v) -> np.ndarray:
        w = _int_vector(v)
        if w.shape[0] != self.dim:
            raise ValueError("dimension mismatch")
        for row, p in zip(self.rows, self.pivots):
            c = w[p]
            if c:
                w = w * row[p] - row * c
                g = reduce(gcd, (int(x) for x in w), 0)
                if g > 1:
                    w = w // g
        return w

    def contains(self, v) -> bool:
        return not any(self.reduce(v))

    def add(self, v) -> bool:
        """Insert v; return True iff it raised the rank."""
        w = self.reduce(v)
        nz = np.flatnonzero(w != 0)
        if nz.size == 0:
            return False
        self.rows.append(w)
        self.pivots.append(int(nz[0]))
        return True


def exact_rank(vectors) -> int:
    vectors = list(vectors)
    if not vectors:
        return 0
    sp = IntSpan(len(np.asarray(vectors[0], dtype=object).ravel()))
    for v in vectors:
        sp.add(v)
    return sp.rank


def greedy_affine_basis(family):
    """Maximal affinely independent sublist, greedy in input order."""
    family = list(family)
    if not family:
        raise ValueError("empty family")
    mats = [P.matrix() if isinstance(P, PermMatrix) else np.asarray(P) for P in family]
    shape = mats[0].shape
    if any(M.shape != shape for M in mats):
        raise ValueError("all matrices must share one shape")
    base = as_ratmatrix(mats[0]).ravel()
    sp = IntSpan(base.shape[0])
    kept = [family[0]]
    for P, M in zip(family[1:], mats[1:]):
        if sp.add(as_ratmatrix(M).ravel() - base):
            kept.append(P)
    return kept
