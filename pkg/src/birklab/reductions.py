"""Instance/pattern pairs (G, S) for the reduction catalog.

Every problem is phrased as: is there a relabeling X of the host digraph with
``P X^T G X P^T >= S`` (COVER) or ``= S`` (EQUAL, graph isomorphism)?
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .matcore import matrix_from_json, matrix_to_json
from .problems import CnfFormula, DigraphInstance


class Relation(str, Enum):
    COVER = "COVER"
    EQUAL = "EQUAL"


PROBLEMS = ("subgi", "gi", "clique", "hc", "hp", "matching", "perfect-matching",
            "2sat", "3sat", "sat")


@dataclass(frozen=True)
class InstancePair:
    G: np.ndarray = field(compare=False)
    S: np.ndarray = field(compare=False)
    relation: Relation = Relation.COVER
    provenance: str = "subgi"

    def __post_init__(self):
        G = np.asarray(self.G, dtype=np.int64)
        S = np.asarray(self.S, dtype=np.int64)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("G and S must be square")
        if (G < 0).any() or (S < 0).any():
            raise ValueError("G and S must be nonnegative")
        if S.shape[0] > G.shape[0]:
            raise ValueError(f"pattern has {S.shape[0]} vertices, instance only {G.shape[0]}")
        rel = Relation(self.relation)
        if rel is Relation.EQUAL and S.shape != G.shape:
            raise ValueError("EQUAL relation needs m = n")
        G.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "relation", rel)

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def m(self) -> int:
        return self.S.shape[0]

    @property
    def padded(self) -> bool:
        return self.m == self.n

    def same_as(self, other: "InstancePair") -> bool:
        return (np.array_equal(self.G, other.G) and np.array_equal(self.S, other.S)
                and self.relation == other.relation)

    def to_json(self) -> dict:
        return {
            "G": matrix_to_json(self.G),
            "S": matrix_to_json(self.S),
            "m": self.m,
            "relation": self.relation.value,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, obj) -> "InstancePair":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        G = matrix_from_json(obj["G"], integer=True)
        S = matrix_from_json(obj["S"], integer=True)
        if "m" in obj and int(obj["m"]) != S.shape[0]:
            raise ValueError("field m disagrees with the pattern size")
        return cls(G, S, Relation(obj.get("relation", "COVER")), obj.get("provenance", "subgi"))


@dataclass(frozen=True)
class SatCompatibility:
    """Box grid of a (k-)SAT reduction; ``boxes[i][j]`` is a 0/1 array."""

    boxes: tuple
    sizes: tuple

    def block(self) -> np.ndarray:
        return np.block([[np.asarray(b) for b in row] for row in self.boxes]).astype(np.int64)


# ---------------------------------------------------------------------------
# graph problems
# ---------------------------------------------------------------------------

def build_subgi_pair(g: DigraphInstance, s: DigraphInstance, mode: Relation = Relation.COVER) -> InstancePair:
    mode = Relation(mode)
    if s.n > g.n:
        raise ValueError("pattern has more vertices than the instance")
    if mode is Relation.EQUAL and s.n != g.n:
        raise ValueError("EQUAL mode needs equal vertex counts")
    return InstancePair(g.adjacency(), s.adjacency(), mode,
                        "gi" if mode is Relation.EQUAL else "subgi")


def build_clique_pattern(m: int) -> np.ndarray:
    if m < 1:
        raise ValueError("clique size must be at least 1")
    return np.ones((m, m), dtype=np.int64) - np.eye(m, dtype=np.int64)


def build_hc_pattern(n: int) -> np.ndarray:
    """Cycle matrix with ones at (1, n) and (i+1, i)."""
    if n < 2:
        raise ValueError("Hamiltonian patterns need n >= 2")
    S = np.zeros((n, n), dtype=np.int64)
    S[0, n - 1] = 1
    S[np.arange(1, n), np.arange(n - 1)] = 1
    return S


def build_hp_pattern(n: int) -> np.ndarray:
    S = build_hc_pattern(n)
    S[0, n - 1] = 0
    return S


def build_matching_pattern(m: int, perfect: bool = False, n: int | None = None) -> np.ndarray:
    """Ones at (1,2), (3,4), ..., (m-1,m)."""
    if m % 2:
        raise ValueError("matching pattern size must be even")
    if perfect and n is not None and m != n:
        raise ValueError("perfect matching needs m = n")
    S = np.zeros((m, m), dtype=np.int64)
    S[np.arange(0, m, 2), np.arange(1, m, 2)] = 1
    return S


def build_clique_pair(g: DigraphInstance, m: int) -> InstancePair:
    return InstancePair(g.adjacency(), build_clique_pattern(m), Relation.COVER, "clique")


def build_hc_pair(g: DigraphInstance) -> InstancePair:
    return InstancePair(g.adjacency(), build_hc_pattern(g.n), Relation.COVER, "hc")


def build_hp_pair(g: DigraphInstance) -> InstancePair:
    return InstancePair(g.adjacency(), build_hp_pattern(g.n), Relation.COVER, "hp")


def build_matching_pair(g: DigraphInstance, m: int, perfect: bool = False) -> InstancePair:
    if perfect:
        m = g.n
    S = build_matching_pattern(m, perfect, g.n)
    return InstancePair(g.adjacency(), S, Relation.COVER,
                        "perfect-matching" if perfect else "matching")


def pad_pattern(pair: InstancePair) -> InstancePair:
    """Append n - m isolated pattern vertices."""
    if pair.padded:
        return pair
    S = np.zeros((pair.n, pair.n), dtype=np.int64)
    S[: pair.m, : pair.m] = pair.S
    return InstancePair(pair.G, S, pair.relation, pair.provenance)


# ---------------------------------------------------------------------------
# satisfiability
# ---------------------------------------------------------------------------

def normalize_clause_width(f: CnfFormula, k: int) -> CnfFormula:
    """Repeat the last literal of short clauses until every clause has k."""
    out = []
    for c in f.clauses:
        if len(c) > k:
            raise ValueError(f"clause {c} is wider than {k}")
        out.append(tuple(c) + (c[-1],) * (k - len(c)))
    return CnfFormula(f.num_vars, tuple(out))


def _truth_rows(clause):
    """Rows of the clause truth table over its literal positions.

    Row r gives literal b the value of bit (w-1-b) of r, so row 0 is all
    false.  Each row yields ``(consistent, satisfied, assignment)`` where the
    assignment maps variable -> value, and a row that makes two occurrences
    of one variable disagree is inconsistent.
    """
    w = len(clause)
    rows = []
    for r in range(2 ** w):
        vals = [(r >> (w - 1 - b)) & 1 for b in range(w)]
        assign = {}
        consistent = True
        for lit, val in zip(clause, vals):
            var_val = bool(val) if lit > 0 else not val
            if assign.setdefault(abs(lit), var_val) != var_val:
                consistent = False
        rows.append((consistent, any(vals), assign))
    return rows


def _agree(a: dict, b: dict) -> bool:
    return all(b.get(v, val) == val for v, val in a.items())


def _corner_pattern(sizes) -> np.ndarray:
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    total = int(sum(sizes))
    S = np.zeros((total, total), dtype=np.int64)
    S[np.ix_(offsets, offsets)] = 1
    return S


def build_ksat_pair(f: CnfFormula, k: int):
    """Truth-table compatibility reduction for 2-SAT / 3-SAT."""
    if k not in (2, 3):
        raise ValueError("k must be 2 or 3")
    for c in f.clauses:
        if len(c) != k:
            raise ValueError(f"clause {c} has width {len(c)}, expected {k}")
    tables = [_truth_rows(c) for c in f.clauses]
    size = 2 ** k
    boxes = []
    for i, ti in enumerate(tables):
        row = []
        for j, tj in enumerate(tables):
            if i == j:
                row.append(np.eye(size, dtype=np.int64))
                continue
            B = np.zeros((size, size), dtype=np.int64)
            for a, (ca, sa, xa) in enumerate(ti):
                for b, (cb, sb, xb) in enumerate(tj):
                    B[a, b] = int(ca and cb and sa and sb and _agree(xa, xb))
            row.append(B)
        boxes.append(tuple(row))
    compat = SatCompatibility(tuple(boxes), (size,) * len(tables))
    pair = InstancePair(compat.block(), _corner_pattern(compat.sizes), Relation.COVER, f"{k}sat")
    return pair, compat


def build_sat_pair(f: CnfFormula):
    """Literal compatibility reduction: B_ij = 1 - [L_ia is the negation of L_jb]."""
    boxes = []
    for i, ci in enumerate(f.clauses):
        row = []
        for j, cj in enumerate(f.clauses):
            if i == j:
                row.append(np.eye(len(ci), dtype=np.int64))
            else:
                row.append(np.array([[0 if a == -b else 1 for b in cj] for a in ci], dtype=np.int64))
        boxes.append(tuple(row))
    compat = SatCompatibility(tuple(boxes), tuple(len(c) for c in f.clauses))
    pair = InstancePair(compat.block(), _corner_pattern(compat.sizes), Relation.COVER, "sat")
    return pair, compat


def build_pair(problem: str, source, m: int | None = None, pad: bool = False) -> InstancePair:
    """Dispatch used by the CLI: ``source`` is a digraph, a (g, s) tuple or a formula."""
    if problem in ("subgi", "gi"):
        g, s = source
        pair = build_subgi_pair(g, s, Relation.EQUAL if problem == "gi" else Relation.COVER)
    elif problem == "clique":
        if m is None:
            raise ValueError("clique needs --m")
        pair = build_clique_pair(source, m)
    elif problem == "hc":
        pair = build_hc_pair(source)
    elif problem == "hp":
        pair = build_hp_pair(source)
    elif problem == "matching":
        if m is None:
            raise ValueError("matching needs --m")
        pair = build_matching_pair(source, m)
    elif problem == "perfect-matching":
        pair = build_matching_pair(source, source.n, perfect=True)
    elif problem in ("2sat", "3sat"):
        pair, _ = build_ksat_pair(source, int(problem[0]))
    elif problem == "sat":
        pair, _ = build_sat_pair(source)
    else:
        raise ValueError(f"unknown problem {problem!r}")
    return pad_pattern(pair) if pad else pair
