"""Exact LP, exact linear systems, and the permutation-norm decision.

The simplex works on an all-integer tableau: every entry is ``d * B^-1 [A|b]``
with ``d = |det B|``, so pivots are exact integer divisions (Edmonds'
fraction-free pivoting).  Entering and leaving variables follow Bland's
least-index rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import reduce
from math import gcd, lcm

import numpy as np

from .matcore import _frac, euclidean_norm_sq
from .systems import ConstraintSystem


class Status(str, Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"
    OPTIMAL = "OPTIMAL"
    UNBOUNDED = "UNBOUNDED"
    ITERATION_LIMIT = "ITERATION_LIMIT"


@dataclass(frozen=True)
class SolveOutcome:
    status: Status
    witness: tuple | None = None
    objective: Fraction | None = None
    iterations: int = 0
    certificate: tuple | None = None

    @property
    def feasible(self) -> bool:
        return self.status in (Status.FEASIBLE, Status.OPTIMAL, Status.UNBOUNDED)


class WitnessError(RuntimeError):
    """A solver produced a point that fails exact substitution."""


# ---------------------------------------------------------------------------
# simplex
# ---------------------------------------------------------------------------

def _int_row(coeffs, rhs):
    den = reduce(lcm, (a.denominator for _, a in coeffs), rhs.denominator)
    return {j: int(a * den) for j, a in coeffs}, int(rhs * den)


def _obj_col(c, T, basis, d):
    """Reduced-cost row ``d*c - c_B T`` for integer costs c (list)."""
    row = np.empty(T.shape[1], dtype=object)
    row[:] = [d * v for v in c] + [0]
    for i, b in enumerate(basis):
        cb = c[b]
        if cb:
            row = row - cb * T[i]
    return row


def _pivot(T, r, c, d):
    p = T[r, c]
    col = T[:, c].copy()
    prow = T[r].copy()
    T = (T * p - np.outer(col, prow)) // d
    T[r] = prow
    if p < 0:
        return -T, -p
    return T, p


def _run(T, basis, d, eligible, max_iters, it):
    """Minimise with the last row as reduced costs.  Returns (T, d, state, it)."""
    m = T.shape[0] - 1
    ncols = T.shape[1] - 1
    while True:
        obj = T[m]
        enter = -1
        for j in range(ncols):
            if eligible[j] and obj[j] < 0:
                enter = j
                break
        if enter < 0:
            return T, d, "optimal", it
        best = -1
        for i in range(m):
            a = T[i, enter]
            if a > 0:
                if best < 0:
                    best = i
                    continue
                lhs = T[i, -1] * T[best, enter]
                rhs = T[best, -1] * a
                if lhs < rhs or (lhs == rhs and basis[i] < basis[best]):
                    best = i
        if best < 0:
            return T, d, "unbounded", it
        if it >= max_iters:
            return T, d, "limit", it
        T, d = _pivot(T, best, enter, d)
        basis[best] = enter
        it += 1


def lp_solve(sys: ConstraintSystem, max_iters: int = 200_000) -> SolveOutcome:
    """Two-phase exact simplex; every returned witness is re-verified."""
    nv = sys.num_vars
    lo = [_frac(v) for v in sys.lower]
    rows = []  # (coeffs, rhs, is_le)
    for coeffs, rhs in sys.eq:
        rows.append((coeffs, rhs - sum((a * lo[j] for j, a in coeffs), Fraction(0)), False))
    for coeffs, rhs in sys.le:
        rows.append((coeffs, rhs - sum((a * lo[j] for j, a in coeffs), Fraction(0)), True))
    for j, up in enumerate(sys.upper):
        if up is not None:
            rows.append((((j, Fraction(1)),), up - lo[j], True))

    m = len(rows)
    n_slack = sum(1 for r in rows if r[2])
    needs_art = [(not le) or rhs < 0 for _, rhs, le in rows]
    n_art = sum(needs_art)
    ncols = nv + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1), dtype=object)
    T[:] = 0
    basis = [0] * m
    s_col = nv
    a_col = nv + n_slack
    art_cols = []
    for i, (coeffs, rhs, le) in enumerate(rows):
        ic, ir = _int_row(coeffs, rhs)
        sign = -1 if ir < 0 else 1
        for j, a in ic.items():
            T[i, j] = sign * a
        T[i, -1] = sign * ir
        if le:
            T[i, s_col] = sign
            if sign > 0:
                basis[i] = s_col
            s_col += 1
        if needs_art[i]:
            T[i, a_col] = 1
            basis[i] = a_col
            art_cols.append(a_col)
            a_col += 1

    d = 1
    it = 0
    eligible = [True] * (nv + n_slack) + [False] * n_art
    if n_art:
        c1 = [0] * (nv + n_slack) + [1] * n_art
        T[m] = _obj_col(c1, T[:m], basis, d)
        T, d, state, it = _run(T, basis, d, eligible, max_iters, it)
        if state == "limit":
            return SolveOutcome(Status.ITERATION_LIMIT, iterations=it)
        if T[m, -1] != 0:  # -d * (sum of artificials) < 0
            return SolveOutcome(Status.INFEASIBLE, iterations=it)
        # drive zero-level artificials out of the basis; drop redundant rows
        art_set = set(art_cols)
        i = 0
        while i < T.shape[0] - 1:
            if basis[i] in art_set:
                piv = next((j for j in range(nv + n_slack) if T[i, j] != 0), None)
                if piv is None:
                    T = np.delete(T, i, axis=0)
                    del basis[i]
                    continue
                T, d = _pivot(T, i, piv, d)
                basis[i] = piv
            i += 1
        T = np.delete(T, art_cols, axis=1) if art_cols else T
        m = T.shape[0] - 1

    if sys.objective is None:
        state = "optimal"
        obj_scale = 1
        const = Fraction(0)
    else:
        sgn = -1 if sys.sense == "max" else 1
        cf = [Fraction(0)] * nv
        for j, a in sys.objective:
            cf[j] = sgn * a
        obj_scale = reduce(lcm, (v.denominator for v in cf), 1)
        c = [int(v * obj_scale) for v in cf] + [0] * n_slack
        const = sum((cf[j] * lo[j] for j in range(nv)), Fraction(0))
        T[m] = _obj_col(c, T[:m], basis, d)
        T, d, state, it = _run(T, basis, d, [True] * (nv + n_slack), max_iters, it)
        if state == "limit":
            return SolveOutcome(Status.ITERATION_LIMIT, iterations=it)

    x = list(lo)
    for i, b in enumerate(basis):
        if b < nv:
            x[b] = lo[b] + Fraction(int(T[i, -1]), int(d))
    witness = tuple(x)
    bad = next(sys.residuals(witness), None)
    if bad is not None:
        raise WitnessError(f"simplex witness violates {bad}")
    if sys.objective is None:
        return SolveOutcome(Status.FEASIBLE, witness, None, it)
    if state == "unbounded":
        return SolveOutcome(Status.UNBOUNDED, witness, None, it)
    value = sys.objective_value(witness)
    # cross-check against the tableau's own objective value
    z = Fraction(-int(T[m, -1]), int(d) * obj_scale) + const
    if (value if sys.sense == "min" else -value) != z:
        raise WitnessError("objective value disagrees with the tableau")
    return SolveOutcome(Status.OPTIMAL, witness, value, it)


# ---------------------------------------------------------------------------
# exact linear systems
# ---------------------------------------------------------------------------

def _bareiss(M: np.ndarray, ncols: int):
    """Fraction-free row echelon of integer object array M on its first ncols.

    Returns (M, pivot_cols).  Row swaps are applied to M in place.
    """
    M = M.copy()
    rows = M.shape[0]
    prev = 1
    r = 0
    pivots = []
    for c in range(ncols):
        if r >= rows:
            break
        nz = [i for i in range(r, rows) if M[i, c] != 0]
        if not nz:
            continue
        i0 = nz[0]
        if i0 != r:
            M[[r, i0]] = M[[i0, r]]
        p = M[r, c]
        below = M[r + 1:]
        if below.shape[0]:
            M[r + 1:] = (below * p - np.outer(below[:, c], M[r])) // prev
        prev = p
        pivots.append(c)
        r += 1
    return M, pivots


def _to_int_rows(A, b):
    A = np.asarray(A, dtype=object)
    rows, cols = A.shape
    out = np.empty((rows, cols + 1), dtype=object)
    scale = []
    for i in range(rows):
        vals = [_frac(v) for v in A[i]] + [_frac(b[i])]
        den = reduce(lcm, (v.denominator for v in vals), 1)
        out[i] = [int(v * den) for v in vals]
        scale.append(den)
    return out, scale


def linsys_solve(A, b) -> SolveOutcome:
    """Solve ``A y = b`` exactly.

    FEASIBLE carries a particular solution (free unknowns set to 0);
    INFEASIBLE carries ``y`` with ``y A = 0`` and ``y b != 0``.
    """
    A = np.asarray(A, dtype=object)
    if A.ndim != 2:
        raise ValueError("A must be 2-D")
    rows, cols = A.shape
    b = list(b)
    if len(b) != rows:
        raise ValueError("b has the wrong length")
    Ab, scale = _to_int_rows(A, b)
    aug = np.empty((rows, cols + 1 + rows), dtype=object)
    aug[:, : cols + 1] = Ab
    aug[:, cols + 1:] = 0
    for i in range(rows):
        aug[i, cols + 1 + i] = 1
    E, pivots = _bareiss(aug, cols + 1)
    if cols in pivots:
        r = pivots.index(cols)
        mult = [Fraction(int(E[r, cols + 1 + i])) * scale[i] for i in range(rows)]
        g = reduce(gcd, (int(v) for v in mult if v), 0) or 1
        cert = tuple(v / g for v in mult)
        # y A = 0 and y b != 0, checked exactly
        for j in range(cols):
            if sum((cert[i] * _frac(A[i, j]) for i in range(rows)), Fraction(0)) != 0:
                raise WitnessError("bad inconsistency certificate")
        if sum((cert[i] * _frac(b[i]) for i in range(rows)), Fraction(0)) == 0:
            raise WitnessError("bad inconsistency certificate")
        return SolveOutcome(Status.INFEASIBLE, certificate=cert)
    y = [Fraction(0)] * cols
    for r in range(len(pivots) - 1, -1, -1):
        c = pivots[r]
        acc = Fraction(int(E[r, cols]))
        for j in range(c + 1, cols):
            if E[r, j] and y[j]:
                acc -= int(E[r, j]) * y[j]
        y[c] = acc / int(E[r, c])
    for i in range(rows):
        if sum((_frac(A[i, j]) * y[j] for j in range(cols)), Fraction(0)) != _frac(b[i]):
            raise WitnessError("linear-system solution fails substitution")
    return SolveOutcome(Status.FEASIBLE, tuple(y))


# ---------------------------------------------------------------------------
# permutation-norm decision
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormDecision:
    """Outcome of maximising ``||X||^2 (+ ||Z||^2)`` against a target.

    ``verdict`` is YES/NO from the exact permutation search, or UNDECIDED
    when the search budget ran out.  ``heuristic_bounds`` is the nondecreasing
    sequence of squared norms from iterated linear maximisation.
    """

    verdict: str
    target: int
    witness: tuple | None
    nodes: int
    heuristic_bounds: tuple = ()
    notes: tuple = field(default=())

    @property
    def heuristic_best(self):
        return self.heuristic_bounds[-1] if self.heuristic_bounds else None


class _Propagator:
    """Interval bounds on every constraint under partial 0/1 assignment."""

    def __init__(self, sys: ConstraintSystem, free_vars):
        self.free = set(free_vars)
        cons = []
        for coeffs, rhs in sys.eq:
            ic, ir = _int_row(coeffs, rhs)
            cons.append((ic, ir, True))
        for coeffs, rhs in sys.le:
            ic, ir = _int_row(coeffs, rhs)
            cons.append((ic, ir, False))
        for j in free_vars:
            if sys.lower[j] > 0 or (sys.upper[j] is not None and sys.upper[j] < 1):
                # bounds that exclude 0 or 1 become unit constraints
                pass
        self.lower = [sys.lower[j] for j in range(sys.num_vars)]
        self.upper = [sys.upper[j] for j in range(sys.num_vars)]
        self.rhs = [c[1] for c in cons]
        self.is_eq = [c[2] for c in cons]
        self.fixed_sum = [0] * len(cons)
        self.pos = [sum(a for j, a in c[0].items() if a > 0) for c in cons]
        self.neg = [sum(a for j, a in c[0].items() if a < 0) for c in cons]
        self.by_var: dict = {}
        for ci, (ic, _, _) in enumerate(cons):
            for j, a in ic.items():
                self.by_var.setdefault(j, []).append((ci, a))
        others = set(self.by_var) - self.free
        if others:
            raise ValueError("norm decision needs every variable in a permutation block")
        self.value: dict = {}

    def ok(self, ci) -> bool:
        lo = self.fixed_sum[ci] + self.neg[ci]
        hi = self.fixed_sum[ci] + self.pos[ci]
        if self.is_eq[ci]:
            return lo <= self.rhs[ci] <= hi
        return lo <= self.rhs[ci]

    def fix(self, j, v, trail) -> bool:
        if j in self.value:
            return self.value[j] == v
        if v < self.lower[j] or (self.upper[j] is not None and v > self.upper[j]):
            return False
        self.value[j] = v
        trail.append(j)
        good = True
        for ci, a in self.by_var.get(j, ()):
            if a > 0:
                self.pos[ci] -= a
            else:
                self.neg[ci] -= a
            self.fixed_sum[ci] += a * v
            if good and not self.ok(ci):
                good = False
        return good

    def undo(self, trail, mark):
        while len(trail) > mark:
            j = trail.pop()
            v = self.value.pop(j)
            for ci, a in self.by_var.get(j, ()):
                if a > 0:
                    self.pos[ci] += a
                else:
                    self.neg[ci] += a
                self.fixed_sum[ci] -= a * v


def _perm_search(sys: ConstraintSystem, blocks, max_nodes):
    """Find 0/1 permutation values for ``blocks`` satisfying sys, or None.

    ``blocks`` is a list of ``(name, axis)``; axis 'row' assigns each row a
    column in turn, 'col' assigns each column a row.
    """
    free = [int(j) for name, _ in blocks for j in sys.block_indices(name).ravel()]
    prop = _Propagator(sys, free)
    steps = []
    for name, axis in blocks:
        idx = sys.block_indices(name)
        lines = idx if axis == "row" else idx.T
        for li in range(lines.shape[0]):
            steps.append((lines, li))
    trail: list = []
    nodes = 0

    def choose(si):
        nonlocal nodes
        if si == len(steps):
            return True
        lines, li = steps[si]
        line = lines[li]
        for pos in range(line.shape[0]):
            j = int(line[pos])
            if prop.value.get(j) == 0:
                continue
            nodes += 1
            if nodes > max_nodes:
                raise _Budget
            mark = len(trail)
            good = prop.fix(j, 1, trail)
            if good:
                for q in range(line.shape[0]):
                    if q != pos and not prop.fix(int(line[q]), 0, trail):
                        good = False
                        break
            if good:
                cross = lines[:, pos]
                for q in range(cross.shape[0]):
                    if q != li and not prop.fix(int(cross[q]), 0, trail):
                        good = False
                        break
            if good and choose(si + 1):
                return True
            prop.undo(trail, mark)
        return False

    try:
        found = choose(0)
    except _Budget:
        return "budget", None, nodes
    if not found:
        return "none", None, nodes
    witness = tuple(Fraction(prop.value.get(j, 0)) for j in range(sys.num_vars))
    return "found", witness, nodes


class _Budget(Exception):
    pass


def _norm_sq(sys, witness, names):
    return sum((euclidean_norm_sq(sys.block_value(witness, n)) for n in names), Fraction(0))


def norm_max_decide(sys: ConstraintSystem, target: int | None = None, heuristic: bool = True,
                    max_nodes: int = 2_000_000, max_rounds: int = 20) -> NormDecision:
    """Decide whether the squared norm of the permutation blocks reaches ``target``.

    Over doubly (sub)stochastic blocks the squared norm equals the block size
    only at permutation matrices, so the question is whether some
    permutation assignment is feasible; that is answered by backtracking
    with interval propagation.  Maximising a convex norm is not a convex
    program, so the iterated linear maximisation is reported only as a
    lower bound.
    """
    perm_blocks = sys.meta.get("perm_blocks")
    if not perm_blocks:
        raise ValueError("system does not declare its permutation blocks")
    names = [name for name, _ in perm_blocks]
    size = sum(sys.blocks[n][1][0] for n in names)
    target = size if target is None else target
    notes = ["norm maximisation is a convex maximisation; decided by exact permutation search"]

    bounds = []
    if heuristic:
        bounds = list(_heuristic_bounds(sys, names, max_rounds))

    state, witness, nodes = _perm_search(sys, perm_blocks, max_nodes)
    if state == "budget":
        return NormDecision("UNDECIDED", target, None, nodes, tuple(bounds),
                            tuple(notes + ["search budget exhausted"]))
    if state == "found":
        if not sys.check(witness):
            raise WitnessError("permutation witness fails substitution")
        nsq = _norm_sq(sys, witness, names)
        verdict = "YES" if nsq == target else "NO"
        return NormDecision(verdict, target, witness, nodes, tuple(bounds), tuple(notes))
    return NormDecision("NO", target, None, nodes, tuple(bounds), tuple(notes))


def _heuristic_bounds(sys: ConstraintSystem, names, max_rounds):
    idx = [int(j) for n in names for j in sys.block_indices(n).ravel()]
    first = lp_solve(sys.with_rows(objective=tuple((j, Fraction(1)) for j in idx), sense="max"))
    if not first.feasible:
        return
    w = first.witness
    best = _norm_sq(sys, w, names)
    yield best
    for _ in range(max_rounds):
        obj = tuple((j, w[j]) for j in idx if w[j])
        if not obj:
            return
        nxt = lp_solve(sys.with_rows(objective=obj, sense="max"))
        if not nxt.feasible:
            return
        val = _norm_sq(sys, nxt.witness, names)
        if val <= best:
            return
        best, w = val, nxt.witness
        yield best
