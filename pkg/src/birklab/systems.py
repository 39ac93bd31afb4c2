"""Linear constraint systems over named matrix blocks, with exact coefficients."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .matcore import _entry_str, _frac


@dataclass(frozen=True)
class ConstraintSystem:
    """``eq``/``le`` rows are ``(((var, coeff), ...), rhs)`` with var indices.

    ``lower[j]`` is always finite; ``upper[j]`` may be None.  ``objective``
    is a row of the same form (without rhs) or None for pure feasibility.
    ``meta`` carries the builder's name and whatever a decision procedure
    needs to interpret the blocks (never used by the LP itself).
    """

    names: tuple
    blocks: dict = field(compare=False)
    eq: tuple = ()
    le: tuple = ()
    lower: tuple = ()
    upper: tuple = ()
    objective: tuple | None = None
    sense: str = "min"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def num_vars(self) -> int:
        return len(self.names)

    def block_indices(self, name: str) -> np.ndarray:
        start, shape = self.blocks[name]
        size = int(np.prod(shape)) if shape else 1
        return (start + np.arange(size)).reshape(shape)

    def block_value(self, witness, name: str) -> np.ndarray:
        idx = self.block_indices(name)
        out = np.empty(idx.shape, dtype=object)
        for pos, j in np.ndenumerate(idx):
            out[pos] = witness[int(j)]
        return out

    def residuals(self, witness):
        """Yield ``(kind, row_index, lhs, rhs)`` for every violated constraint."""
        w = [Fraction(v) for v in witness]
        if len(w) != self.num_vars:
            raise ValueError("witness length mismatch")
        for i, (coeffs, rhs) in enumerate(self.eq):
            lhs = sum((a * w[j] for j, a in coeffs), Fraction(0))
            if lhs != rhs:
                yield ("eq", i, lhs, rhs)
        for i, (coeffs, rhs) in enumerate(self.le):
            lhs = sum((a * w[j] for j, a in coeffs), Fraction(0))
            if lhs > rhs:
                yield ("le", i, lhs, rhs)
        for j, v in enumerate(w):
            if v < self.lower[j]:
                yield ("lower", j, v, self.lower[j])
            if self.upper[j] is not None and v > self.upper[j]:
                yield ("upper", j, v, self.upper[j])

    def check(self, witness) -> bool:
        return next(self.residuals(witness), None) is None

    def objective_value(self, witness) -> Fraction | None:
        if self.objective is None:
            return None
        return sum((a * Fraction(witness[j]) for j, a in self.objective), Fraction(0))

    def with_rows(self, le=(), eq=(), objective=None, sense=None, meta=None) -> "ConstraintSystem":
        """Copy with extra rows and optionally a new objective."""
        return ConstraintSystem(
            self.names, self.blocks, self.eq + tuple(eq), self.le + tuple(le),
            self.lower, self.upper,
            self.objective if objective is None else objective,
            self.sense if sense is None else sense,
            dict(self.meta, **(meta or {})),
        )

    def to_json(self) -> dict:
        def row(coeffs):
            return {self.names[j]: _entry_str(a) for j, a in coeffs}

        return {
            "vars": list(self.names),
            "eq": [{"coeffs": row(c), "rhs": _entry_str(b)} for c, b in self.eq],
            "le": [{"coeffs": row(c), "rhs": _entry_str(b)} for c, b in self.le],
            "bounds": [[_entry_str(lo), None if up is None else _entry_str(up)]
                       for lo, up in zip(self.lower, self.upper)],
            "objective": None if self.objective is None else
            {"sense": self.sense, "coeffs": row(self.objective)},
            "model": self.meta.get("model"),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


class LinMat:
    """Matrix whose entries are linear forms ``{var: coeff}``."""

    def __init__(self, forms):
        self.forms = forms  # object array of dicts

    @property
    def shape(self):
        return self.forms.shape

    @classmethod
    def var(cls, idx: np.ndarray) -> "LinMat":
        forms = np.empty(idx.shape, dtype=object)
        for pos, j in np.ndenumerate(idx):
            forms[pos] = {int(j): Fraction(1)}
        return cls(forms)

    @classmethod
    def const(cls, M) -> "LinMat":
        M = np.asarray(M, dtype=object)
        forms = np.empty(M.shape, dtype=object)
        for pos, v in np.ndenumerate(M):
            v = _frac(v)
            forms[pos] = {None: v} if v else {}
        return cls(forms)

    @staticmethod
    def _combine(terms):
        out: dict = {}
        for coeff, form in terms:
            if not coeff:
                continue
            for j, a in form.items():
                out[j] = out.get(j, Fraction(0)) + coeff * a
        return {j: a for j, a in out.items() if a}

    def lmul(self, A) -> "LinMat":
        """Constant matrix times self."""
        A = np.asarray(A, dtype=object)
        r, c = A.shape[0], self.shape[1]
        if A.shape[1] != self.shape[0]:
            raise ValueError("shape mismatch in lmul")
        forms = np.empty((r, c), dtype=object)
        for i in range(r):
            nz = [(k, _frac(A[i, k])) for k in range(A.shape[1]) if A[i, k]]
            for j in range(c):
                forms[i, j] = self._combine((a, self.forms[k, j]) for k, a in nz)
        return LinMat(forms)

    def rmul(self, B) -> "LinMat":
        """Self times constant matrix."""
        B = np.asarray(B, dtype=object)
        r, c = self.shape[0], B.shape[1]
        if self.shape[1] != B.shape[0]:
            raise ValueError("shape mismatch in rmul")
        forms = np.empty((r, c), dtype=object)
        cols = [[(k, _frac(B[k, j])) for k in range(B.shape[0]) if B[k, j]] for j in range(c)]
        for i in range(r):
            for j in range(c):
                forms[i, j] = self._combine((a, self.forms[i, k]) for k, a in cols[j])
        return LinMat(forms)

    @property
    def T(self) -> "LinMat":
        return LinMat(self.forms.T.copy())

    def __sub__(self, other: "LinMat") -> "LinMat":
        if self.shape != other.shape:
            raise ValueError("shape mismatch in subtraction")
        forms = np.empty(self.shape, dtype=object)
        for pos in np.ndindex(self.shape):
            forms[pos] = self._combine([(Fraction(1), self.forms[pos]), (Fraction(-1), other.forms[pos])])
        return LinMat(forms)

    def __add__(self, other: "LinMat") -> "LinMat":
        if self.shape != other.shape:
            raise ValueError("shape mismatch in addition")
        forms = np.empty(self.shape, dtype=object)
        for pos in np.ndindex(self.shape):
            forms[pos] = self._combine([(Fraction(1), self.forms[pos]), (Fraction(1), other.forms[pos])])
        return LinMat(forms)

    def vstack(self, other: "LinMat") -> "LinMat":
        return LinMat(np.vstack([self.forms, other.forms]))


class SystemBuilder:
    def __init__(self):
        self.names: list = []
        self.blocks: dict = {}
        self.eq: list = []
        self.le: list = []
        self.lower: list = []
        self.upper: list = []
        self.objective = None
        self.sense = "min"

    def add_block(self, name: str, shape, lower=0, upper=None, labels=None) -> np.ndarray:
        shape = tuple(shape)
        start = len(self.names)
        size = int(np.prod(shape)) if shape else 1
        if labels is None:
            for pos in np.ndindex(*shape):
                self.names.append(f"{name}[{','.join(str(p + 1) for p in pos)}]")
        else:
            if len(labels) != size:
                raise ValueError("label count mismatch")
            self.names.extend(f"{name}[{lab}]" for lab in labels)
        self.lower.extend([_frac(lower)] * size)
        self.upper.extend([None if upper is None else _frac(upper)] * size)
        self.blocks[name] = (start, shape)
        return (start + np.arange(size)).reshape(shape)

    @staticmethod
    def _split(form: dict):
        const = form.get(None, Fraction(0))
        coeffs = tuple(sorted((j, a) for j, a in form.items() if j is not None and a))
        return coeffs, const

    def add(self, form: dict, kind: str, rhs=0):
        """Add ``form kind rhs`` with kind in {'<=', '>=', '='}."""
        coeffs, const = self._split(form)
        rhs = _frac(rhs) - const
        if kind == ">=":
            coeffs = tuple((j, -a) for j, a in coeffs)
            rhs = -rhs
            kind = "<="
        if kind == "<=":
            self.le.append((coeffs, rhs))
        elif kind == "=":
            self.eq.append((coeffs, rhs))
        else:
            raise ValueError(f"unknown relation {kind!r}")

    def add_matrix(self, lhs: LinMat, kind: str, rhs=None):
        """Entrywise ``lhs kind rhs``; rhs is a constant matrix or zero."""
        R = np.zeros(lhs.shape, dtype=object) if rhs is None else np.asarray(rhs, dtype=object)
        if R.shape != lhs.shape:
            raise ValueError(f"rhs shape {R.shape} != lhs shape {lhs.shape}")
        for pos in np.ndindex(lhs.shape):
            self.add(lhs.forms[pos], kind, _frac(R[pos]))

    def add_sum(self, idx, kind: str, rhs, axis: int):
        """Row (axis=1) or column (axis=0) sums of a 2-D block."""
        idx = np.asarray(idx)
        lines = idx if axis == 1 else idx.T
        for line in lines:
            self.add({int(j): Fraction(1) for j in line}, kind, rhs)

    def set_objective(self, form: dict, sense: str = "min"):
        coeffs, _ = self._split(form)
        self.objective = coeffs
        self.sense = sense

    def build(self, **meta) -> ConstraintSystem:
        return ConstraintSystem(
            tuple(self.names), dict(self.blocks), tuple(self.eq), tuple(self.le),
            tuple(self.lower), tuple(self.upper), self.objective, self.sense, meta,
        )
