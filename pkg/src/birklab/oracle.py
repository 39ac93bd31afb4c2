"""Brute-force ground truth for the matrix relation and the source problems."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from . import _kernels
from .incidence import IncidencePair, check_quadratic_condition, incidence_decompose
from .matcore import PermMatrix, truncation
from .problems import CnfFormula, DigraphInstance
from .reductions import InstancePair, Relation

MAX_SAT_VARS = 20
MAX_GRAPH_N = 10
SLOW_MAX_N = 8


@dataclass(frozen=True)
class OracleVerdict:
    answer: str  # "YES" | "NO"
    witness: object = None
    nodes_explored: int = 0

    @property
    def yes(self) -> bool:
        return self.answer == "YES"

    def to_json(self) -> dict:
        w = self.witness
        if isinstance(w, PermMatrix):
            w = w.to_json()
        elif isinstance(w, tuple):
            w = [list(x) if isinstance(x, tuple) else x for x in w]
        return {"answer": self.answer, "witness": w, "nodes_explored": self.nodes_explored}


class CapExceeded(ValueError):
    pass


# ---------------------------------------------------------------------------
# the matrix relation
# ---------------------------------------------------------------------------

def relation_holds(pair: InstancePair, X) -> bool:
    """Direct substitution: ``P X^T G X P^T`` (>= or ==) ``S``."""
    Xm = X.matrix() if isinstance(X, PermMatrix) else np.asarray(X, dtype=np.int64)
    P = truncation(pair.m, pair.n)
    lhs = P @ Xm.T @ pair.G @ Xm @ P.T
    if pair.relation is Relation.EQUAL:
        return bool(np.array_equal(lhs, pair.S))
    return bool(np.all(lhs >= pair.S))


def _witness_from_phi(phi, n) -> PermMatrix:
    """Extend phi (pattern -> G, partial) to a bijection and return X = phi^-1."""
    full = list(phi)
    used = set(full)
    spare = iter(v for v in range(n) if v not in used)
    full += [next(spare) for _ in range(n - len(full))]
    return PermMatrix(tuple(full)).inverse()


def _search_order(S, active):
    """Most-connected first, then greedily by links into the chosen prefix."""
    U = (S + S.T) > 0
    deg = S.sum(axis=0) + S.sum(axis=1)
    left = set(active)
    order = []
    while left:
        if order:
            links = {u: int(U[u, order].sum()) for u in left}
            u = min(left, key=lambda u: (-links[u], -deg[u], u))
        else:
            u = min(left, key=lambda u: (-deg[u], u))
        order.append(u)
        left.remove(u)
    return order


def subgi_oracle(pair: InstancePair, slow: bool = False) -> OracleVerdict:
    """Decide the relation by injective vertex-map search.

    The witness X satisfies the relation by direct substitution.  ``slow``
    enumerates every injection without pruning (n <= 8).
    """
    if slow:
        return _subgi_slow(pair)
    G, S = pair.G, pair.S
    n, m = pair.n, pair.m
    mode = _kernels.EQUAL if pair.relation is Relation.EQUAL else _kernels.COVER
    if mode == _kernels.EQUAL:
        active = list(range(m))
    else:
        active = [u for u in range(m) if S[u].any() or S[:, u].any()]
    order = _search_order(S, active)
    out_s, in_s = S.sum(axis=1), S.sum(axis=0)
    out_g, in_g = G.sum(axis=1), G.sum(axis=0)
    cand = np.zeros((len(order), n), dtype=bool)
    for t, u in enumerate(order):
        if mode == _kernels.EQUAL:
            cand[t] = (out_g == out_s[u]) & (in_g == in_s[u])
        else:
            cand[t] = (out_g >= out_s[u]) & (in_g >= in_s[u])
    found, phi, nodes = _kernels.embed_search(G, S, np.array(order, dtype=np.int64), cand, mode)
    if not found:
        return OracleVerdict("NO", None, nodes)
    # isolated pattern vertices take any unused G vertices, lowest first
    phi = [int(v) for v in phi[:m]]
    used = {v for v in phi if v >= 0}
    spare = iter(v for v in range(n) if v not in used)
    phi = [v if v >= 0 else next(spare) for v in phi]
    X = _witness_from_phi(phi, n)
    if not relation_holds(pair, X):
        raise AssertionError("oracle witness fails substitution")
    return OracleVerdict("YES", X, nodes)


def _subgi_slow(pair: InstancePair) -> OracleVerdict:
    n, m = pair.n, pair.m
    if n > SLOW_MAX_N:
        raise CapExceeded(f"slow path needs n <= {SLOW_MAX_N}")
    mode = _kernels.EQUAL if pair.relation is Relation.EQUAL else _kernels.COVER
    injections = np.array(list(permutations(range(n), m)), dtype=np.int64).reshape(-1, m)
    mask = _kernels._perm_mask_np(pair.G, pair.S, injections, mode)
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return OracleVerdict("NO", None, int(injections.shape[0]))
    X = _witness_from_phi([int(v) for v in injections[hits[0]]], n)
    if not relation_holds(pair, X):
        raise AssertionError("slow-path witness fails substitution")
    return OracleVerdict("YES", X, int(hits[0]) + 1)


# ---------------------------------------------------------------------------
# direct deciders for the source problems
# ---------------------------------------------------------------------------

def sat_oracle(f: CnfFormula) -> OracleVerdict:
    """Exhaustive truth table; the witness is the first satisfying assignment."""
    v = f.num_vars
    if v > MAX_SAT_VARS:
        raise CapExceeded(f"sat oracle needs <= {MAX_SAT_VARS} variables")
    rows = np.arange(2 ** v, dtype=np.int64)
    # assignment r gives variable j (1-based) the value of bit (v - j)
    bits = ((rows[:, None] >> (v - 1 - np.arange(v))[None, :]) & 1).astype(bool)
    sat = np.ones(rows.shape[0], dtype=bool)
    for c in f.clauses:
        lits = np.zeros(rows.shape[0], dtype=bool)
        for lit in c:
            col = bits[:, abs(lit) - 1]
            lits |= col if lit > 0 else ~col
        sat &= lits
    hits = np.flatnonzero(sat)
    if hits.size == 0:
        return OracleVerdict("NO", None, int(rows.shape[0]))
    assignment = tuple(bool(b) for b in bits[hits[0]])
    assert f.evaluate(assignment)
    return OracleVerdict("YES", assignment, int(hits[0]) + 1)


def _adj(g) -> np.ndarray:
    A = g.adjacency() if isinstance(g, DigraphInstance) else np.asarray(g, dtype=np.int64)
    if A.shape[0] > MAX_GRAPH_N:
        raise CapExceeded(f"graph oracles need n <= {MAX_GRAPH_N}")
    return A > 0


def _ham(A, cycle: bool):
    n = A.shape[0]
    nodes = 0
    starts = [0] if cycle else range(n)
    path: list = []
    seen = [False] * n

    def ext(v):
        nonlocal nodes
        nodes += 1
        path.append(v)
        seen[v] = True
        if len(path) == n:
            if not cycle or A[v, path[0]]:
                return True
        else:
            for w in range(n):
                if not seen[w] and A[v, w] and ext(w):
                    return True
        path.pop()
        seen[v] = False
        return False

    for s in starts:
        if ext(s):
            return tuple(path), nodes
    return None, nodes


def hc_oracle(g) -> OracleVerdict:
    """Directed Hamiltonian cycle; witness is the vertex sequence from vertex 0."""
    A = _adj(g)
    if A.shape[0] < 2:
        raise ValueError("Hamiltonian problems need n >= 2")
    path, nodes = _ham(A, cycle=True)
    return OracleVerdict("YES" if path else "NO", path, nodes)


def hp_oracle(g) -> OracleVerdict:
    A = _adj(g)
    if A.shape[0] < 2:
        raise ValueError("Hamiltonian problems need n >= 2")
    path, nodes = _ham(A, cycle=False)
    return OracleVerdict("YES" if path else "NO", path, nodes)


def clique_oracle(g, m: int) -> OracleVerdict:
    """m vertices joined by arcs in both directions (loops irrelevant)."""
    A = _adj(g)
    n = A.shape[0]
    if m < 1:
        raise ValueError("clique size must be at least 1")
    B = A & A.T
    nodes = 0
    for subset in combinations(range(n), m):
        nodes += 1
        if all(B[a, b] for a, b in combinations(subset, 2)):
            return OracleVerdict("YES", subset, nodes)
    return OracleVerdict("NO", None, nodes)


def matching_oracle(g, m: int) -> OracleVerdict:
    """m/2 vertex-disjoint non-loop arcs; witness lists them as (from, to)."""
    A = _adj(g)
    n = A.shape[0]
    if m % 2:
        raise ValueError("matching pattern size must be even")
    need = m // 2
    arcs = [(a, b) for a in range(n) for b in range(n) if a != b and A[a, b]]
    nodes = 0
    chosen: list = []
    used = [False] * n

    def rec(start):
        nonlocal nodes
        if len(chosen) == need:
            return True
        for t in range(start, len(arcs)):
            a, b = arcs[t]
            if used[a] or used[b]:
                continue
            nodes += 1
            used[a] = used[b] = True
            chosen.append((a, b))
            if rec(t + 1):
                return True
            chosen.pop()
            used[a] = used[b] = False
        return False

    if need > n // 2:
        return OracleVerdict("NO", None, 0)
    if rec(0):
        return OracleVerdict("YES", tuple(chosen), nodes)
    return OracleVerdict("NO", None, nodes)


def direct_oracle(problem: str, source, m: int | None = None) -> OracleVerdict:
    if problem == "clique":
        return clique_oracle(source, m)
    if problem == "hc":
        return hc_oracle(source)
    if problem == "hp":
        return hp_oracle(source)
    if problem == "matching":
        return matching_oracle(source, m)
    if problem == "perfect-matching":
        return matching_oracle(source, source.n)
    if problem in ("2sat", "3sat", "sat"):
        return sat_oracle(source)
    if problem in ("subgi", "gi"):
        return subgi_oracle(source)
    raise ValueError(f"no direct oracle for {problem!r}")


# ---------------------------------------------------------------------------
# incidence witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IncidenceCheck:
    out_equation: bool
    in_equation: bool
    quadratic_condition: bool

    @property
    def ok(self) -> bool:
        return self.out_equation and self.in_equation and self.quadratic_condition


def incidence_witness_check(pairG: IncidencePair, pairS: IncidencePair, X, Z) -> IncidenceCheck:
    """Substitute permutation X (n x n) and Z (k x k) into both equations.

    ``P_mn X O_G Z P_lk^T = O_S`` and the same with in-incidence matrices;
    also reports the quadratic condition on Z.
    """
    Xm = X.matrix() if isinstance(X, PermMatrix) else np.asarray(X, dtype=np.int64)
    Zm = Z.matrix() if isinstance(Z, PermMatrix) else np.asarray(Z, dtype=np.int64)
    n, k = pairG.n, pairG.k
    m, l = pairS.n, pairS.k
    if Xm.shape != (n, n) or Zm.shape != (k, k):
        raise ValueError("X must be n x n and Z must be k x k")
    if m > n or l > k:
        raise ValueError("pattern larger than instance")
    P = truncation(m, n)
    Q = truncation(l, k)
    out_eq = np.array_equal(P @ Xm @ pairG.O @ Zm @ Q.T, pairS.O)
    in_eq = np.array_equal(P @ Xm @ pairG.I @ Zm @ Q.T, pairS.I)
    return IncidenceCheck(bool(out_eq), bool(in_eq), check_quadratic_condition(Zm, l))


def arc_witness(pairG: IncidencePair, pairS: IncidencePair, phi):
    """Incidence witnesses (X, Z) from a vertex map phi (pattern -> G).

    Each pattern arc takes the lowest-labelled unused G arc between the
    image vertices; leftover G arcs fill the remaining columns in label order.
    Returns None when some pattern arc cannot be matched.
    """
    n, k = pairG.n, pairG.k
    phi = list(phi)
    used_v = set(phi)
    phi += [v for v in range(n) if v not in used_v][: n - len(phi)]
    src_g = pairG.O.argmax(axis=0) if k else np.zeros(0, dtype=np.int64)
    tgt_g = pairG.I.argmax(axis=0) if k else np.zeros(0, dtype=np.int64)
    taken = [False] * k
    image = []
    for s in range(pairS.k):
        a = int(pairS.O[:, s].argmax())
        b = int(pairS.I[:, s].argmax())
        hit = next((t for t in range(k) if not taken[t] and src_g[t] == phi[a] and tgt_g[t] == phi[b]), None)
        if hit is None:
            return None
        taken[hit] = True
        image.append(hit)
    image += [t for t in range(k) if not taken[t]]
    # Z[t, s] = 1 when G arc t plays pattern arc s
    Z = PermMatrix(tuple(image)).inverse()
    return PermMatrix(tuple(phi)), Z


def incidence_pairs(pair: InstancePair):
    return incidence_decompose(pair.G), incidence_decompose(pair.S)


def incidence_oracle_witness(pair: InstancePair):
    """(X, Z) for the incidence equations from the adjacency oracle, or None."""
    v = subgi_oracle(pair)
    if not v.yes:
        return None
    pG, pS = incidence_pairs(pair)
    phi = list(v.witness.inverse().image)[: pair.m]
    return arc_witness(pG, pS, phi)
