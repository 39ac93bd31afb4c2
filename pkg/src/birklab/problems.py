"""Source instances: multi-digraphs, CNF formulas and weighted digraphs."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .matcore import _frac, _entry_str


@dataclass(frozen=True)
class DigraphInstance:
    """Multi-digraph on vertices 1..n; ``arcs`` holds (from, to, multiplicity)."""

    n: int
    arcs: tuple = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        merged: dict = {}
        for arc in self.arcs:
            if len(arc) == 2:
                a, b, mult = arc[0], arc[1], 1
            else:
                a, b, mult = arc
            a, b, mult = int(a), int(b), int(mult)
            if not (1 <= a <= self.n and 1 <= b <= self.n):
                raise ValueError(f"arc ({a},{b}) out of range 1..{self.n}")
            if mult < 1:
                raise ValueError(f"arc ({a},{b}) has multiplicity {mult} < 1")
            merged[(a, b)] = merged.get((a, b), 0) + mult
        object.__setattr__(self, "arcs", tuple((a, b, k) for (a, b), k in sorted(merged.items())))

    def adjacency(self) -> np.ndarray:
        G = np.zeros((self.n, self.n), dtype=np.int64)
        for a, b, k in self.arcs:
            G[a - 1, b - 1] += k
        return G

    @classmethod
    def from_adjacency(cls, G) -> "DigraphInstance":
        G = np.asarray(G)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError("adjacency matrix must be square")
        if (G < 0).any():
            raise ValueError("adjacency entries must be nonnegative")
        arcs = [(i + 1, j + 1, int(G[i, j])) for i, j in zip(*np.nonzero(G))]
        return cls(G.shape[0], tuple(arcs))

    @property
    def arc_count(self) -> int:
        return sum(k for _, _, k in self.arcs)

    def to_json(self) -> dict:
        return {"n": self.n, "arcs": [list(a) for a in self.arcs]}


@dataclass(frozen=True)
class WeightedDigraph:
    graph: DigraphInstance
    weights: np.ndarray = field(compare=False)

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=object)
        if W.shape != (self.graph.n, self.graph.n):
            raise ValueError(f"weights must be {self.graph.n}x{self.graph.n}")

    def to_json(self) -> dict:
        d = self.graph.to_json()
        d["weights"] = [_entry_str(v) for v in np.asarray(self.weights, dtype=object).flat]
        return d


@dataclass(frozen=True)
class CnfFormula:
    """Clauses are tuples of nonzero signed variable indices (1-based)."""

    num_vars: int
    clauses: tuple

    def __post_init__(self):
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        if not clauses:
            raise ValueError("formula has no clauses")
        for c in clauses:
            if not c:
                raise ValueError("empty clause")
            for lit in c:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValueError(f"literal {lit} outside 1..{self.num_vars}")
        object.__setattr__(self, "clauses", clauses)

    def evaluate(self, assignment) -> bool:
        """``assignment[v-1]`` is the truth value of variable v."""
        return all(any((lit > 0) == bool(assignment[abs(lit) - 1]) for lit in c)
                   for c in self.clauses)


# ---------------------------------------------------------------------------
# parsing / emitting
# ---------------------------------------------------------------------------

def parse_graph(text) -> DigraphInstance | WeightedDigraph:
    """Read graph-JSON ``{"n", "arcs": [[from, to, mult], ...], "weights"?}``."""
    try:
        obj = json.loads(text) if isinstance(text, (str, bytes)) else text
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed graph JSON: {exc}") from exc
    if not isinstance(obj, dict) or "n" not in obj:
        raise ValueError("graph JSON needs an 'n' field")
    arcs = []
    for arc in obj.get("arcs", []):
        if not isinstance(arc, (list, tuple)) or len(arc) not in (2, 3):
            raise ValueError(f"bad arc entry {arc!r}")
        arcs.append(tuple(arc))
    g = DigraphInstance(int(obj["n"]), tuple(arcs))
    if "weights" in obj:
        w = obj["weights"]
        if len(w) != g.n * g.n:
            raise ValueError("weights must have n*n entries")
        W = np.empty((g.n, g.n), dtype=object)
        W.flat[:] = [_frac(x) for x in w]
        return WeightedDigraph(g, W)
    return g


def emit_graph(g) -> str:
    return json.dumps(g.to_json(), sort_keys=True)


def parse_cnf(text: str) -> CnfFormula:
    """DIMACS CNF.  Clauses may span lines; each must end with 0."""
    header = None
    clauses = []
    current: list = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad header line: {line!r}")
            header = (int(parts[2]), int(parts[3]))
            continue
        if header is None:
            raise ValueError("clause before 'p cnf' header")
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if header is None:
        raise ValueError("missing 'p cnf' header")
    if current:
        raise ValueError("last clause is not terminated by 0")
    if len(clauses) != header[1]:
        raise ValueError(f"header declares {header[1]} clauses, found {len(clauses)}")
    return CnfFormula(header[0], tuple(clauses))


def emit_cnf(f: CnfFormula) -> str:
    lines = [f"p cnf {f.num_vars} {len(f.clauses)}"]
    lines += [" ".join(str(l) for l in c) + " 0" for c in f.clauses]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gen_random_digraph(n: int, arc_prob, seed: int, self_loops: bool = False,
                       symmetric: bool = False) -> DigraphInstance:
    """Each admissible arc present independently with probability ``arc_prob``.

    ``symmetric`` draws one coin per unordered pair and adds both directions.
    """
    p = _frac(arc_prob) if not isinstance(arc_prob, float) else Fraction(arc_prob).limit_denominator(10**6)
    if not 0 <= p <= 1:
        raise ValueError("arc_prob must lie in [0, 1]")
    rng = random.Random(seed)
    arcs = []
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j and not self_loops:
                continue
            if symmetric and j < i:
                continue
            if p == 1 or (p > 0 and rng.random() < p):
                arcs.append((i, j, 1))
                if symmetric and i != j:
                    arcs.append((j, i, 1))
    return DigraphInstance(n, tuple(arcs))


def gen_random_cnf(num_vars: int, num_clauses: int, width: int, seed: int,
                   min_width: int | None = None) -> CnfFormula:
    """Clauses over distinct variables with random signs.

    Width is fixed at ``width`` unless ``min_width`` is given, in which case
    each clause draws its width uniformly from ``min_width..width``.
    """
    if width > num_vars:
        raise ValueError("clause width exceeds variable count")
    lo = width if min_width is None else min_width
    if not 1 <= lo <= width:
        raise ValueError("need 1 <= min_width <= width")
    rng = random.Random(seed)
    clauses = []
    for _ in range(num_clauses):
        w = rng.randint(lo, width)
        vs = rng.sample(range(1, num_vars + 1), w)
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in vs))
    return CnfFormula(num_vars, tuple(clauses))
