"""Constraint systems over the Birkhoff polytope, plus the procedural methods.

Vertex-relabeling convention: a permutation matrix ``X`` with
``X[a, p[a]] = 1`` satisfies ``G X >= X S`` exactly when
``G[a, b] >= S[p[a], p[b]]`` for all a, b, i.e. when ``X^T G X >= S``.
The incidence systems use the transposed matrix, so that row ``a`` of
``X O_G`` is the out-incidence row of the G-vertex that pattern vertex
``a`` lands on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from math import factorial

import numpy as np

from . import _kernels
from .incidence import IncidencePair, check_quadratic_condition, incidence_decompose
from .matcore import (
    PermMatrix,
    all_permutations,
    as_int_matrix,
    as_ratmatrix,
    bvn_decompose,
    bvn_extract_permutation,
    complete_to_doubly_stochastic,
    truncation,
)
from .oracle import relation_holds
from .reductions import InstancePair
from .solve import SolveOutcome, Status, linsys_solve, lp_solve, norm_max_decide
from .systems import ConstraintSystem, LinMat, SystemBuilder

SYMMETRIC_MAX_N = 6
INCIDENCE_CAP = 20000
NECESSARY_CAP = 20000


class Side(str, Enum):
    LEFT = "LEFT"
    RIGHT = "RIGHT"


def _padded(pair: InstancePair):
    if not pair.padded:
        raise ValueError("model needs a padded pair (m = n); use pad_pattern first")
    return pair.G, pair.S, pair.n


def _x_constraints(b: SystemBuilder, X, kind: str):
    b.add_sum(X, kind, 1, axis=1)
    b.add_sum(X, kind, 1, axis=0)


def _relaxation_builder(pair: InstancePair, side=Side.LEFT, stochastic: str = "sub"):
    G, S, n = _padded(pair)
    side = Side(side)
    b = SystemBuilder()
    X = b.add_block("x", (n, n))
    L = LinMat.var(X)
    if side is Side.LEFT:
        b.add_matrix(L.lmul(G) - L.rmul(S), ">=")
    else:
        b.add_matrix(L.T.rmul(G) - L.T.lmul(S), ">=")
    _x_constraints(b, X, "<=" if stochastic == "sub" else "=")
    return b, X


def build_relaxation(pair: InstancePair, side=Side.LEFT, stochastic: str = "sub") -> ConstraintSystem:
    """``G X >= X S`` (LEFT) or ``X^T G >= S X^T`` (RIGHT) with (sub)stochastic X.

    ``stochastic`` is "sub" (row/column sums <= 1) or "doubly" (= 1).
    """
    if stochastic not in ("sub", "doubly"):
        raise ValueError("stochastic must be 'sub' or 'doubly'")
    b, _ = _relaxation_builder(pair, side, stochastic)
    return b.build(model="relaxation", side=Side(side).value, stochastic=stochastic,
                   n=pair.n, perm_blocks=[("x", "row")])


def maximise_mass(sys: ConstraintSystem, block: str = "x") -> SolveOutcome:
    idx = sys.block_indices(block).ravel()
    return lp_solve(sys.with_rows(objective=tuple((int(j), Fraction(1)) for j in idx), sense="max"))


@dataclass(frozen=True)
class RelaxationVerdict:
    """The substochastic system is always feasible (X = 0); the informative
    question is whether it reaches the doubly stochastic face."""

    doubly_feasible: bool
    max_mass: Fraction
    witness: np.ndarray | None
    alpha: int | None = None


def relaxation_verdict(pair: InstancePair, side=Side.LEFT, decompose: bool = True) -> RelaxationVerdict:
    sys = build_relaxation(pair, side)
    out = maximise_mass(sys)
    X = sys.block_value(out.witness, "x")
    ok = out.objective == pair.n
    alpha = bvn_decompose(X).alpha if ok and decompose and pair.n else None
    return RelaxationVerdict(ok, out.objective, X, alpha)


def build_convex_check(pair: InstancePair, side=Side.LEFT):
    """The relaxation plus the norm target; returns ``(system, n)``."""
    sys = build_relaxation(pair, side)
    return sys.with_rows(meta={"model": "convex", "norm_target": pair.n}), pair.n


def convex_decide(pair: InstancePair, side=Side.LEFT, heuristic: bool = True, **kw):
    sys, target = build_convex_check(pair, side)
    return norm_max_decide(sys, target, heuristic=heuristic, **kw)


def build_anchored_system(pair: InstancePair, R: PermMatrix) -> ConstraintSystem:
    """Relaxation plus ``X >= R`` entrywise."""
    if R.n != pair.n:
        raise ValueError("anchor size does not match the pair")
    b, X = _relaxation_builder(pair)
    for i, j in enumerate(R.image):
        b.add({int(X[i, j]): Fraction(1)}, ">=", 1)
    return b.build(model="anchored", anchor=list(R.image), n=pair.n, perm_blocks=[("x", "row")])


def anchored_decide(pair: InstancePair):
    """Try every anchor in lexicographic order; YES with the first feasible one."""
    tried = 0
    for p in all_permutations(pair.n):
        R = PermMatrix(tuple(int(v) for v in p))
        tried += 1
        out = lp_solve(build_anchored_system(pair, R))
        if out.feasible:
            return "YES", R, tried
    return "NO", None, tried


def build_factored_system(pair: InstancePair, G1, G2, S1, S2) -> ConstraintSystem:
    """``G1 >= X S1``, ``G2 >= S2 X^T``, X doubly stochastic.

    Requires ``G >= G1 G2`` and ``S >= S1 S2``.  Feasibility certifies YES
    (for 0/1 patterns); infeasibility certifies nothing.
    """
    G, S, n = _padded(pair)
    G1, G2, S1, S2 = (as_ratmatrix(M) for M in (G1, G2, S1, S2))
    if G1.shape[0] != n or S1.shape[0] != n or G2.shape[1] != n or S2.shape[1] != n:
        raise ValueError("factor shapes do not match n")
    if G1.shape != S1.shape or G2.shape != S2.shape or G1.shape[1] != G2.shape[0]:
        raise ValueError("factor shapes are inconsistent")
    if any(v < 0 for M in (G1, G2, S1, S2) for v in M.flat):
        raise ValueError("factors must be nonnegative")
    if not np.all(as_ratmatrix(G) >= G1 @ G2):
        raise ValueError("G >= G1 G2 fails")
    if not np.all(as_ratmatrix(S) >= S1 @ S2):
        raise ValueError("S >= S1 S2 fails")
    b = SystemBuilder()
    X = b.add_block("x", (n, n))
    L = LinMat.var(X)
    b.add_matrix(LinMat.const(G1) - L.rmul(S1), ">=")
    b.add_matrix(LinMat.const(G2) - L.T.lmul(S2), ">=")
    _x_constraints(b, X, "=")
    return b.build(model="factored", n=n, perm_blocks=[("x", "row")])


# ---------------------------------------------------------------------------
# symmetric adjacency model
# ---------------------------------------------------------------------------

def relabel_images(S, perms) -> np.ndarray:
    """``X_i S X_i^T`` for each permutation row, shape (P, n, n)."""
    S = np.asarray(S, dtype=np.int64)
    return S[perms[:, :, None], perms[:, None, :]]


def _dedupe(stack):
    """First occurrence index of each distinct slice, in input order."""
    seen: dict = {}
    keep = []
    for i in range(stack.shape[0]):
        key = stack[i].tobytes()
        if key not in seen:
            seen[key] = i
            keep.append(i)
    return np.array(keep, dtype=np.int64)


def build_symmetric_lp(pair: InstancePair, objective: str = "COUNT", W=None,
                       cap: int = SYMMETRIC_MAX_N, dedupe: bool = True) -> ConstraintSystem:
    """``sum_i lam_i X_i S X_i^T <= G``, ``sum lam = 1``; one lam per distinct image.

    Objective COUNT minimises ``sum lam``; ATSP minimises ``(W, sum lam_i X_i S X_i^T)``.
    """
    G, S, n = _padded(pair)
    if n > cap:
        raise ValueError(f"symmetric model capped at n <= {cap}")
    perms = all_permutations(n)
    imgs = relabel_images(S, perms)
    keep = _dedupe(imgs) if dedupe else np.arange(perms.shape[0])
    b = SystemBuilder()
    lam = b.add_block("lam", (keep.size,), labels=[str(i + 1) for i in keep])
    for r in range(n):
        for c in range(n):
            form = {int(lam[q]): Fraction(int(imgs[i, r, c])) for q, i in enumerate(keep) if imgs[i, r, c]}
            if form:
                b.add(form, "<=", int(G[r, c]))
    b.add({int(j): Fraction(1) for j in lam}, "=", 1)
    if objective == "COUNT":
        b.set_objective({int(j): Fraction(1) for j in lam}, "min")
    elif objective == "ATSP":
        if W is None:
            raise ValueError("ATSP objective needs a weight matrix")
        Wr = as_ratmatrix(W)
        if Wr.shape != (n, n):
            raise ValueError("weight matrix must be n x n")
        b.set_objective({int(lam[q]): sum((Wr[r, c] * int(imgs[i, r, c]) for r in range(n) for c in range(n)),
                                            Fraction(0)) for q, i in enumerate(keep)}, "min")
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return b.build(model="symmetric", objective_kind=objective, n=n,
                   columns=[[int(v) for v in perms[i]] for i in keep])


def symmetric_integer_compatible(pair: InstancePair, cap: int = SYMMETRIC_MAX_N):
    """Nonzero 0/1 ``lam`` with ``sum lam_i X_i S X_i^T <= G``, or None.

    Depth-first over index sets in lexicographic order with the partial sum
    checked against G at every node.  Partial sums only grow, so the search
    is complete; it stops at the first admissible nonempty set.
    """
    G, S, n = _padded(pair)
    if n > cap:
        raise ValueError(f"symmetric model capped at n <= {cap}")
    imgs = relabel_images(S, all_permutations(n))

    def dfs(start, total, chosen):
        for i in range(start, imgs.shape[0]):
            nxt = total + imgs[i]
            if np.all(nxt <= G):
                return chosen + (i,)
        return None

    return dfs(0, np.zeros_like(G), ())


# ---------------------------------------------------------------------------
# incidence models
# ---------------------------------------------------------------------------

def incidence_term(pairG: IncidencePair, pairS: IncidencePair, X, Z, which: str = "O") -> np.ndarray:
    """``P_mn X M_G Z P_lk^T`` with M = O or I."""
    Xm = X.matrix() if isinstance(X, PermMatrix) else np.asarray(X, dtype=np.int64)
    Zm = Z.matrix() if isinstance(Z, PermMatrix) else np.asarray(Z, dtype=np.int64)
    M = pairG.O if which == "O" else pairG.I
    return truncation(pairS.n, pairG.n) @ Xm @ M @ Zm @ truncation(pairS.k, pairG.k).T


@dataclass(frozen=True)
class IncidenceExact:
    """The bilinear system in (X, Z); checked by substitution, never solved."""

    pairG: IncidencePair
    pairS: IncidencePair

    @property
    def padded(self) -> bool:
        return self.pairG.n == self.pairS.n

    def check(self, X, Z):
        from .oracle import incidence_witness_check
        return incidence_witness_check(self.pairG, self.pairS, X, Z)


def build_incidence_exact(pairG: IncidencePair, pairS: IncidencePair) -> IncidenceExact:
    if pairS.n > pairG.n:
        raise ValueError("pattern has more vertices than the instance")
    if pairS.k > pairG.k:
        raise ValueError("pattern has more arcs than the instance")
    return IncidenceExact(pairG, pairS)


def _sources(p: IncidencePair) -> np.ndarray:
    return p.O.argmax(axis=0).astype(np.int64) if p.k else np.zeros(0, dtype=np.int64)


def _targets(p: IncidencePair) -> np.ndarray:
    return p.I.argmax(axis=0).astype(np.int64) if p.k else np.zeros(0, dtype=np.int64)


def injections(k: int, l: int) -> np.ndarray:
    """All ordered choices of l distinct arcs out of k: the first l columns of Z."""
    rows = list(permutations(range(k), l))
    return np.array(rows, dtype=np.int64).reshape(len(rows), l)


def stacked_members(pairG: IncidencePair, perms, injs) -> np.ndarray:
    """``(X_i O_G Z_j P^T ; X_i I_G Z_j P^T)`` for all pairs, shape (P, J, 2n, l)."""
    src = _sources(pairG)[injs]  # (J, l)
    tgt = _targets(pairG)[injs]
    out = src[None, :, None, :] == perms[:, None, :, None]
    inn = tgt[None, :, None, :] == perms[:, None, :, None]
    return np.concatenate([out, inn], axis=2).astype(np.int64)


def _check_padded_incidence(pairG: IncidencePair, pairS: IncidencePair):
    if pairG.n != pairS.n:
        raise ValueError("incidence model needs a padded pattern (m = n)")


def _nominal(n: int, k: int) -> int:
    return factorial(n) * factorial(k)


def build_incidence_symmetric(pairG: IncidencePair, pairS: IncidencePair,
                              cap: int = INCIDENCE_CAP) -> ConstraintSystem:
    """``sum lam_ij (X_i O_G Z_j P^T ; X_i I_G Z_j P^T) = (O_S ; I_S)``, lam on the simplex.

    Terms depend on Z_j only through its first l columns, so one variable
    per distinct stacked matrix suffices.
    """
    _check_padded_incidence(pairG, pairS)
    n, k, l = pairG.n, pairG.k, pairS.k
    if _nominal(n, k) > cap:
        raise ValueError(f"n!k! = {_nominal(n, k)} exceeds cap {cap}")
    b = SystemBuilder()
    target = np.concatenate([pairS.O, pairS.I], axis=0)
    if l > k:
        b.add_block("lam", (0,))
        b.add({}, "=", 1)
        return b.build(model="incidence-symmetric", n=n, k=k, l=l, columns=[])
    perms = all_permutations(n)
    injs = injections(k, l)
    mem = stacked_members(pairG, perms, injs).reshape(perms.shape[0] * injs.shape[0], 2 * n, l)
    keep = _dedupe(mem)
    J = injs.shape[0]
    cols = [(int(q // J), int(q % J)) for q in keep]
    lam = b.add_block("lam", (keep.size,), labels=[f"{i + 1},{j + 1}" for i, j in cols])
    for r in range(2 * n):
        for c in range(l):
            form = {int(lam[q]): Fraction(1) for q, i in enumerate(keep) if mem[i, r, c]}
            b.add(form, "=", int(target[r, c]))
    b.add({int(j): Fraction(1) for j in lam}, "=", 1)
    return b.build(model="incidence-symmetric", n=n, k=k, l=l,
                   columns=[[[int(v) for v in perms[i]], [int(v) for v in injs[j]]] for i, j in cols])


@dataclass(frozen=True)
class PresolveResult:
    system: ConstraintSystem
    fixed: tuple  # names of variables fixed to 0
    decided: str | None  # "NO" when a row can no longer be met, else None


def presolve_zero_rhs(sys: ConstraintSystem) -> PresolveResult:
    """Fix to 0 every variable in an equality ``sum a_j x_j = 0`` with all a_j >= 0.

    Needs every variable lower-bounded by 0.  Iterates to a fixpoint and
    rebuilds the system over the surviving variables.
    """
    if any(lo != 0 for lo in sys.lower):
        raise ValueError("presolve needs every variable bounded below by 0")
    fixed: set = set()
    eq = [dict(c) for c, _ in sys.eq]
    rhs = [r for _, r in sys.eq]
    changed = True
    while changed:
        changed = False
        for row, r in zip(eq, rhs):
            live = {j: a for j, a in row.items() if j not in fixed}
            if r == 0 and live and all(a > 0 for a in live.values()):
                fixed.update(live)
                changed = True
    keep = [j for j in range(sys.num_vars) if j not in fixed]
    remap = {j: t for t, j in enumerate(keep)}

    def rows(src):
        out = []
        for coeffs, r in src:
            live = tuple((remap[j], a) for j, a in coeffs if j in remap)
            out.append((live, r))
        return tuple(out)

    new_eq, new_le = rows(sys.eq), rows(sys.le)
    decided = None
    if any(not c and r != 0 for c, r in new_eq) or any(not c and r < 0 for c, r in new_le):
        decided = "NO"
    blocks = {}
    for name, (start, shape) in sys.blocks.items():
        idx = list(range(start, start + int(np.prod(shape)) if shape else start + 1))
        alive = [remap[j] for j in idx if j in remap]
        if len(shape) == 1 and alive:
            blocks[name] = (alive[0], (len(alive),))
        elif len(alive) == len(idx) and alive:
            blocks[name] = (alive[0], shape)
    obj = None if sys.objective is None else tuple((remap[j], a) for j, a in sys.objective if j in remap)
    reduced = ConstraintSystem(
        tuple(sys.names[j] for j in keep), blocks, new_eq, new_le,
        tuple(sys.lower[j] for j in keep), tuple(sys.upper[j] for j in keep),
        obj, sys.sense, dict(sys.meta, presolved=True, kept=keep),
    )
    return PresolveResult(reduced, tuple(sys.names[j] for j in sorted(fixed)), decided)


def build_necessary_system(pairG: IncidencePair, pairS: IncidencePair,
                           cap: int = NECESSARY_CAP) -> ConstraintSystem:
    """``sum lam_j (O_G Z_j P^T ; I_G Z_j P^T) = sum mu_i (X_i O_S ; X_i I_S)``, both on simplices."""
    _check_padded_incidence(pairG, pairS)
    n, k, l = pairG.n, pairG.k, pairS.k
    if factorial(n) + factorial(k) > cap:
        raise ValueError(f"n! + k! exceeds cap {cap}")
    b = SystemBuilder()
    if l > k:
        b.add_block("lam", (0,))
        b.add({}, "=", 1)
        return b.build(model="necessary", n=n, k=k, l=l)
    ident = np.arange(n, dtype=np.int64)[None, :]
    injs = injections(k, l)
    left = stacked_members(pairG, ident, injs)[0]  # (J, 2n, l)
    kl = _dedupe(left)
    perms = all_permutations(n)
    # X_i acts on each half separately: row a of X_i M is row p[a] of M
    right = np.stack([np.concatenate([pairS.O[p], pairS.I[p]], axis=0) for p in perms])
    kr = _dedupe(right)
    lam = b.add_block("lam", (kl.size,), labels=[str(j + 1) for j in kl])
    mu = b.add_block("mu", (kr.size,), labels=[str(i + 1) for i in kr])
    for r in range(2 * n):
        for c in range(l):
            form = {int(lam[q]): Fraction(1) for q, j in enumerate(kl) if left[j, r, c]}
            for q, i in enumerate(kr):
                if right[i, r, c]:
                    form[int(mu[q])] = Fraction(-1)
            b.add(form, "=", 0)
    b.add({int(j): Fraction(1) for j in lam}, "=", 1)
    b.add({int(j): Fraction(1) for j in mu}, "=", 1)
    return b.build(model="necessary", n=n, k=k, l=l)


def build_incidence_convex_check(pairG: IncidencePair, pairS: IncidencePair):
    """``O_G Z P^T = X^T O_S``, ``I_G Z P^T = X^T I_S``, X and Z doubly stochastic.

    Returns ``(system, n + k)``.
    """
    _check_padded_incidence(pairG, pairS)
    n, k, l = pairG.n, pairG.k, pairS.k
    if l > k:
        raise ValueError("pattern has more arcs than the instance")
    b = SystemBuilder()
    X = b.add_block("x", (n, n))
    Z = b.add_block("z", (k, k))
    Lx, Lz = LinMat.var(X), LinMat.var(Z)
    Pt = truncation(l, k).T
    b.add_matrix(Lz.rmul(Pt).lmul(pairG.O) - Lx.T.rmul(pairS.O), "=")
    b.add_matrix(Lz.rmul(Pt).lmul(pairG.I) - Lx.T.rmul(pairS.I), "=")
    _x_constraints(b, X, "=")
    _x_constraints(b, Z, "=")
    sys = b.build(model="incidence-convex", n=n, k=k, l=l, norm_target=n + k,
                  perm_blocks=[("x", "row"), ("z", "col")])
    return sys, n + k


@dataclass(frozen=True)
class IncidenceConvexVerdict:
    feasible: bool
    condition: bool | None  # quadratic condition on the LP witness's Z
    witness: tuple | None

    @property
    def verdict(self) -> str:
        if not self.feasible:
            return "NO"
        return "YES" if self.condition else "UNDECIDED"


def incidence_convex_verdict(pairG: IncidencePair, pairS: IncidencePair) -> IncidenceConvexVerdict:
    """LP feasibility of the incidence system; YES only if the vertex found
    also meets the quadratic condition."""
    sys, _ = build_incidence_convex_check(pairG, pairS)
    out = maximise_mass(sys, "z")
    if not out.feasible:
        return IncidenceConvexVerdict(False, None, None)
    Z = sys.block_value(out.witness, "z")
    return IncidenceConvexVerdict(True, check_quadratic_condition(Z, pairS.k), out.witness)


# ---------------------------------------------------------------------------
# asymmetric linear model
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def side_basis(k: int, max_scan: int = 1_000_000):
    """Greedy lexicographic affine basis of k x k permutations (cached)."""
    perms, scanned, complete = _kernels.lex_perm_affine_basis(k, max_scan)
    perms.setflags(write=False)
    return perms, scanned, complete


@dataclass(frozen=True)
class AsymmetricModel:
    """Basis vectors are stored scaled by n: row i is ``n * B_i`` flattened."""

    n: int
    k: int
    l: int
    generator: str
    C: np.ndarray = field(compare=False)
    basis_scaled: np.ndarray = field(compare=False)
    rhs_scaled: np.ndarray = field(compare=False)
    pairs: tuple = ()
    family_size: int = 0
    spans_family: bool = True
    side_complete: bool = True

    @property
    def beta(self) -> int:
        return self.basis_scaled.shape[0]

    @property
    def basis(self) -> list:
        return [as_ratmatrix(r.reshape(2 * self.n, self.l)) / self.n for r in self.basis_scaled]

    @property
    def rhs(self) -> np.ndarray:
        return as_ratmatrix(self.rhs_scaled.reshape(2 * self.n, self.l)) / self.n


def center_closed_form(n: int, l: int) -> np.ndarray:
    return np.full((2 * n, l), Fraction(1, n), dtype=object)


def center_by_sums(pairG: IncidencePair, l: int) -> np.ndarray:
    """``(sum_i X_i) M_G (sum_j Z_j) P^T / (n! k!)`` with the sums in closed form."""
    n, k = pairG.n, pairG.k
    sx = np.full((n, n), factorial(n - 1), dtype=object)
    sz = np.full((k, k), factorial(k - 1), dtype=object)
    Pt = truncation(l, k).T.astype(object)
    top = sx @ pairG.O.astype(object) @ sz @ Pt
    bot = sx @ pairG.I.astype(object) @ sz @ Pt
    tot = factorial(n) * factorial(k)
    return np.vectorize(lambda v: Fraction(int(v), tot), otypes=[object])(np.concatenate([top, bot]))


def _select_basis(family: np.ndarray, target: np.ndarray):
    """Greedy basis of the family rows, then an exact solve for the target.

    Returns ``(basis_idx, outcome)``.  An INFEASIBLE outcome carries a
    certificate w with ``w . B_i = 0`` and ``w . target != 0``; any family
    row with ``w . row != 0`` was missed by the modular selection and is
    appended before trying again.
    """
    idx = list(_kernels.modp_independent_rows(family))
    while True:
        B = family[idx].T.astype(object) if idx else np.zeros((family.shape[1], 0), dtype=object)
        out = linsys_solve(B, list(target)) if family.shape[1] else SolveOutcome(Status.FEASIBLE, ())
        if out.status is Status.FEASIBLE:
            return idx, out
        w = np.array([int(v * _lcm_den(out.certificate)) for v in out.certificate], dtype=object)
        dots = family.astype(object) @ w
        extra = [i for i in range(family.shape[0]) if dots[i] != 0 and i not in idx]
        if not extra:
            return idx, out
        idx.append(extra[0])


def _lcm_den(vals):
    from math import lcm
    out = 1
    for v in vals:
        out = lcm(out, Fraction(v).denominator)
    return out


def build_asymmetric_model(pairG: IncidencePair, pairS: IncidencePair, generator: str = "GREEDY-POLY",
                           cap: int = INCIDENCE_CAP, max_scan: int = 1_000_000) -> AsymmetricModel:
    """Center C = J/n, basis of the shifted member set, and the right side.

    GREEDY-POLY uses the product of lexicographic greedy affine bases of
    the two permutation sides; EXHAUSTIVE uses every member.
    """
    _check_padded_incidence(pairG, pairS)
    n, k, l = pairG.n, pairG.k, pairS.k
    if k == 0:
        raise ValueError("degenerate instance: no arcs (k = 0)")
    if l > k:
        raise ValueError("pattern has more arcs than the instance")
    C = center_by_sums(pairG, l)
    if not np.array_equal(C, center_closed_form(n, l)):
        raise AssertionError("center differs from the closed form J/n")
    side_complete = True
    if generator == "GREEDY-POLY":
        xp, _, cx = side_basis(n, max_scan)
        zp, _, cz = side_basis(k, max_scan)
        side_complete = bool(cx and cz)
        # Z[a, zp[a]] = 1, so column s holds its 1 in row zp^-1(s)
        zinv = np.argsort(zp, axis=1)[:, :l]
        perms, injs = np.asarray(xp), zinv
    elif generator == "EXHAUSTIVE":
        if _nominal(n, k) > cap:
            raise ValueError(f"n!k! = {_nominal(n, k)} exceeds cap {cap}")
        perms, injs = all_permutations(n), injections(k, l)
    else:
        raise ValueError(f"unknown generator {generator!r}")
    mem = stacked_members(pairG, perms, injs)
    P, J = mem.shape[0], mem.shape[1]
    flat = mem.reshape(P * J, 2 * n * l)
    keep = _dedupe(flat)
    family = n * flat[keep] - 1
    target = n * np.concatenate([pairS.O, pairS.I], axis=0).ravel() - 1
    idx, _ = _select_basis(family, target)
    basis = family[idx]
    if basis.shape[0] > 2 * n * l:
        raise AssertionError("basis exceeds the 2nl bound")
    pairs = tuple((tuple(int(v) for v in perms[keep[i] // J]), tuple(int(v) for v in injs[keep[i] % J]))
                  for i in idx)
    return AsymmetricModel(n, k, l, generator, C, basis, target, pairs, int(keep.size),
                           True, side_complete)


def asymmetric_solve(model: AsymmetricModel) -> SolveOutcome:
    """Solve ``sum y_i B_i = (O_S; I_S) - C`` exactly."""
    if model.beta == 0:
        if any(model.rhs_scaled):
            return SolveOutcome(Status.INFEASIBLE, certificate=())
        return SolveOutcome(Status.FEASIBLE, ())
    return linsys_solve(model.basis_scaled.T.astype(object), list(model.rhs_scaled))


def span_rank(model: AsymmetricModel) -> int:
    return model.beta


def asymmetric_verdict(pair: InstancePair, generator: str = "GREEDY-POLY", **kw) -> str:
    pG, pS = incidence_decompose(pair.G), incidence_decompose(pair.S)
    if pS.k > pG.k:
        return "NO"
    if pG.k == 0:
        return "YES" if pS.k == 0 else "NO"
    model = build_asymmetric_model(pG, pS, generator, **kw)
    return "YES" if asymmetric_solve(model).feasible else "NO"


# ---------------------------------------------------------------------------
# clique depletion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DepletionResult:
    G: np.ndarray
    log: tuple  # ((round, ((i, j), ...)), ...)
    rounds: int
    emptied: bool
    inconclusive: bool

    @property
    def certifies_no(self) -> bool:
        return self.emptied and not self.inconclusive


def _offdiag_arcs(G) -> bool:
    A = G.copy()
    np.fill_diagonal(A, 0)
    return bool(A.any())


def clique_depletion(G, m: int, rounds: int | None = None) -> DepletionResult:
    """Remove arcs (i, j) whose 2-path counts a_ij or a_ji fall below m - 2.

    Only off-diagonal arcs are considered; loops play no role in cliques.
    """
    if m < 2:
        raise ValueError("depletion needs m >= 2")
    A = as_int_matrix(G).copy()
    if (A < 0).any():
        raise ValueError("G must be nonnegative")
    n = A.shape[0]
    rounds = max(n - m + 1, 1) if rounds is None else rounds
    had_arcs = _offdiag_arcs(A)
    log = []
    done = 0
    for r in range(rounds):
        sq = A @ A
        bad = (sq < m - 2) | (sq.T < m - 2)
        np.fill_diagonal(bad, False)
        hit = bad & (A > 0)
        done = r + 1
        if not hit.any():
            break
        cells = tuple((int(i), int(j)) for i, j in zip(*np.nonzero(hit)))
        A[hit] = 0
        log.append((r + 1, cells))
    return DepletionResult(A, tuple(log), done, not _offdiag_arcs(A), not had_arcs)


@dataclass(frozen=True)
class MaxCliqueReport:
    largest_surviving: int
    survived: dict
    inconclusive: bool


def max_clique_via_depletion(G, start_m: int | None = None) -> MaxCliqueReport:
    """Walk m down from start_m; the first m that is not emptied is reported.

    Emptying certifies NO for that m; survival certifies nothing.
    """
    A = as_int_matrix(G)
    n = A.shape[0]
    start_m = n if start_m is None else start_m
    if start_m > n:
        raise ValueError("start_m must not exceed n")
    survived = {}
    best = 1
    for m in range(start_m, 1, -1):
        res = clique_depletion(A, m)
        survived[m] = not res.emptied or res.inconclusive
        if survived[m]:
            best = m
            break
    return MaxCliqueReport(best, survived, not _offdiag_arcs(A))


# ---------------------------------------------------------------------------
# cut loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutLoopResult:
    verdict: str  # YES | NO | INCONCLUSIVE
    witness: PermMatrix | None
    cuts: tuple
    iterations: int


def cut_loop(pair: InstancePair, max_iters: int = 50, side=Side.LEFT) -> CutLoopResult:
    """Relax, extract a permutation from the witness, test it, cut it off, repeat.

    Each round maximises the total mass; a maximum below n means no doubly
    stochastic point survives the cuts, which certifies NO.
    """
    G, S, n = _padded(pair)
    base = build_relaxation(pair, side)
    X = base.block_indices("x")
    cuts: list = []
    for it in range(1, max_iters + 1):
        le = tuple((tuple((int(X[i, j]), Fraction(1)) for i, j in sorted(c)), Fraction(n - 2)) for c in cuts)
        out = maximise_mass(base.with_rows(le=le))
        if out.objective < n:
            return CutLoopResult("NO", None, tuple(cuts), it)
        W = complete_to_doubly_stochastic(base.block_value(out.witness, "x"))
        R, cells = bvn_extract_permutation(W)
        if relation_holds(pair, R):
            return CutLoopResult("YES", R, tuple(cuts), it)
        cuts.append(tuple(sorted(cells)))
    return CutLoopResult("INCONCLUSIVE", None, tuple(cuts), max_iters)
