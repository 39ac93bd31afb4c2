"""Arc labeling and the out/in incidence factorization ``M = O I^T``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matcore import as_int_matrix, as_ratmatrix, matrix_to_json, truncation


@dataclass(frozen=True)
class IncidencePair:
    """``O[:, t]`` marks the source and ``I[:, t]`` the target of arc t.

    ``arc_labels[t] = (row, col, copy)`` names arc t by its matrix cell
    (0-based) and its copy index among that cell's multiplicity.
    """

    O: np.ndarray = field(compare=False)
    I: np.ndarray = field(compare=False)
    arc_labels: tuple = ()

    @property
    def k(self) -> int:
        return self.O.shape[1]

    @property
    def n(self) -> int:
        return self.O.shape[0]

    def product(self) -> np.ndarray:
        return self.O @ self.I.T

    def to_json(self) -> dict:
        return {
            "O": matrix_to_json(self.O),
            "I": matrix_to_json(self.I),
            "arc_labels": [[r + 1, c + 1, k] for r, c, k in self.arc_labels],
        }


@dataclass(frozen=True)
class StructureReport:
    one_per_column: bool
    sinks: tuple
    sources: tuple
    isolated: tuple


def incidence_decompose(M) -> IncidencePair:
    """Label arcs row-major over cells, copies of one cell consecutive."""
    A = as_int_matrix(M)
    if (A < 0).any():
        raise ValueError("incidence decomposition needs nonnegative entries")
    rows, cols = A.shape
    labels = []
    for i in range(rows):
        for j in range(cols):
            for c in range(int(A[i, j])):
                labels.append((i, j, c))
    k = len(labels)
    O = np.zeros((rows, k), dtype=np.int64)
    I = np.zeros((cols, k), dtype=np.int64)
    for t, (i, j, _) in enumerate(labels):
        O[i, t] = 1
        I[j, t] = 1
    return IncidencePair(O, I, tuple(labels))


def check_incidence_structure(p: IncidencePair) -> StructureReport:
    ok = bool(np.all(p.O.sum(axis=0) == 1) and np.all(p.I.sum(axis=0) == 1)
              and set(np.unique(p.O)) <= {0, 1} and set(np.unique(p.I)) <= {0, 1})
    out_zero = set(np.flatnonzero(p.O.sum(axis=1) == 0).tolist())
    in_zero = set(np.flatnonzero(p.I.sum(axis=1) == 0).tolist())
    return StructureReport(
        one_per_column=ok,
        sinks=tuple(sorted(out_zero)),
        sources=tuple(sorted(in_zero)),
        isolated=tuple(sorted(out_zero & in_zero)),
    )


def hc_incidence_pattern(n: int) -> IncidencePair:
    """Cycle arcs labeled by their end vertex: O = cycle matrix, I = identity."""
    if n < 2:
        raise ValueError("Hamiltonian patterns need n >= 2")
    O = np.zeros((n, n), dtype=np.int64)
    O[0, n - 1] = 1
    O[np.arange(1, n), np.arange(n - 1)] = 1
    I = np.eye(n, dtype=np.int64)
    # arc t runs from the unique row with O[row, t] = 1 into vertex t
    labels = tuple((int(np.flatnonzero(O[:, t])[0]), t, 0) for t in range(n))
    return IncidencePair(O, I, labels)


def check_quadratic_condition(Z, l: int) -> bool:
    """Entrywise ``Z P_lk^T P_lk Z^T <= U_k``."""
    Zr = as_ratmatrix(Z)
    k = Zr.shape[0]
    if Zr.shape != (k, k):
        raise ValueError("Z must be square")
    if l > k:
        raise ValueError("l must not exceed k")
    P = as_ratmatrix(truncation(l, k))
    prod = Zr @ P.T @ P @ Zr.T
    U = np.eye(k, dtype=np.int64)
    return all(prod[i, j] <= U[i, j] for i in range(k) for j in range(k))
