"""Experiment orchestration: corpora, model-vs-oracle records, hunts, reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import random
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import models as M
from .incidence import check_quadratic_condition, incidence_decompose
from .matcore import PermMatrix, _entry_str, is_doubly_stochastic
from .oracle import CapExceeded, direct_oracle, subgi_oracle
from .problems import DigraphInstance, gen_random_cnf, gen_random_digraph
from .reductions import (
    InstancePair,
    build_pair,
    build_subgi_pair,
    normalize_clause_width,
    pad_pattern,
)
from .solve import norm_max_decide

DEFAULT_CAPS = {
    "symmetric_n": 6,  # n! permutations materialised
    "incidence_nk": 20000,  # n! * k! for the incidence symmetric system
    "necessary": 20000,  # n! + k!
    "asymmetric_k": 9,  # arcs of G for the lexicographic side basis
    "exhaustive_nk": 20000,
    "incidence_convex_k": 12,
    "slow_n": 8,
    "norm_nodes": 2_000_000,
    "cut_iters": 50,
    "lp_n": 8,  # vertex count for the adjacency LP models
}

CLAIMS = {
    "convex-sufficiency": "relaxation",
    "asymmetric-sufficiency": "asymmetric",
    "incidence-convex-sufficiency": "incidence-convex",
}

MODELS = ("reduction", "relaxation", "relaxation-right", "convex", "anchored", "symmetric",
          "cutloop", "depletion", "incidence-symmetric", "presolve", "necessary",
          "incidence-convex", "incidence-convex-norm", "asymmetric", "asymmetric-exhaustive")

NORM_NOTE = ("norm maximisation over the relaxation maximises a convex function; "
             "it is decided here by exact permutation search, not by convex programming")


def caps_from_env(base: dict | None = None) -> dict:
    """Merge ``BIRKLAB_CAPS`` (a JSON object) over the defaults."""
    caps = dict(DEFAULT_CAPS)
    caps.update(base or {})
    raw = os.environ.get("BIRKLAB_CAPS")
    if raw:
        extra = json.loads(raw)
        unknown = set(extra) - set(DEFAULT_CAPS)
        if unknown:
            raise ValueError(f"unknown caps: {sorted(unknown)}")
        caps.update(extra)
    return caps


@dataclass(frozen=True)
class ExperimentConfig:
    problems: tuple = ("clique", "hc")
    sizes: tuple = (3, 5)  # inclusive vertex-count range
    densities: tuple = ("1/5", "4/5")  # inclusive arc-probability range
    seeds: int = 10
    seed_start: int = 0
    models: tuple = ("relaxation", "convex", "cutloop")
    caps: dict = field(default_factory=dict)
    sat_vars: tuple = (2, 4)
    sat_clauses: tuple = (1, 5)
    output: str | None = None
    include_timing: bool = False

    def __post_init__(self):
        for name in ("problems", "sizes", "densities", "models", "sat_vars", "sat_clauses"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.sizes[0] < 1 or self.sizes[0] > self.sizes[1]:
            raise ValueError("sizes must be a range lo..hi with 1 <= lo <= hi")
        lo, hi = (Fraction(str(d)) for d in self.densities)
        if not 0 <= lo <= hi <= 1:
            raise ValueError("densities must satisfy 0 <= lo <= hi <= 1")
        bad = [m for m in self.models if m not in MODELS]
        if bad:
            raise ValueError(f"unknown models {bad}")
        if self.seeds < 0:
            raise ValueError("seeds must be nonnegative")

    def resolved_caps(self) -> dict:
        return caps_from_env(self.caps)

    def to_json(self) -> dict:
        d = asdict(self)
        d["densities"] = [str(Fraction(str(x))) for x in self.densities]
        return d

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        return cls(**obj)


@dataclass(frozen=True)
class Instance:
    id: str
    seed: int
    problem: str
    n: int
    density: str | None
    pair: InstancePair
    source: object
    m: int | None = None


@dataclass(frozen=True)
class VerdictRecord:
    instance: str
    seed: int
    problem: str
    n: int
    model: str
    model_verdict: str
    oracle_verdict: str
    witness_digest: str | None = None
    iterations: int | None = None
    cuts: int | None = None
    alpha: int | None = None
    m: int | None = None
    density: str | None = None
    notes: tuple = ()
    extra: dict = field(default_factory=dict)
    timing: float | None = None

    @property
    def agreement(self) -> bool:
        return self.model_verdict == self.oracle_verdict

    def to_json(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        d["agreement"] = self.agreement
        if not include_timing:
            d.pop("timing")
        return d

    def dumps(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_json(include_timing), sort_keys=True)


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------

def _density(rng: random.Random, cfg: ExperimentConfig) -> Fraction:
    lo, hi = (Fraction(str(d)) for d in cfg.densities)
    return lo + (hi - lo) * Fraction(rng.randint(0, 20), 20)


def make_instance(problem: str, seed: int, cfg: ExperimentConfig) -> Instance | None:
    """Deterministic instance for (problem, seed); None if the sizes exclude it."""
    rng = random.Random(f"{problem}:{seed}")
    n = rng.randint(cfg.sizes[0], cfg.sizes[1])
    dens = _density(rng, cfg)
    sub = rng.randrange(2 ** 31)
    iid = f"{problem}:{seed:06d}"
    m = None
    if problem == "clique":
        g = gen_random_digraph(n, dens, sub, symmetric=True)
        m = rng.randint(2, n) if n >= 2 else 1
        return Instance(iid, seed, problem, n, str(dens), pad_pattern(build_pair("clique", g, m)), g, m)
    if problem in ("hc", "hp"):
        if n < 2:
            return None
        g = gen_random_digraph(n, dens, sub)
        return Instance(iid, seed, problem, n, str(dens), build_pair(problem, g), g)
    if problem == "matching":
        g = gen_random_digraph(n, dens, sub)
        m = 2 * rng.randint(1, max(n // 2, 1))
        if m > n:
            return None
        return Instance(iid, seed, problem, n, str(dens), pad_pattern(build_pair("matching", g, m)), g, m)
    if problem == "perfect-matching":
        if n % 2:
            n -= 1
        if n < 2:
            return None
        g = gen_random_digraph(n, dens, sub)
        return Instance(iid, seed, problem, n, str(dens), build_pair(problem, g), g, n)
    if problem in ("2sat", "3sat", "sat"):
        v = rng.randint(cfg.sat_vars[0], cfg.sat_vars[1])
        c = rng.randint(cfg.sat_clauses[0], cfg.sat_clauses[1])
        if problem == "sat":
            f = gen_random_cnf(v, c, min(3, v), sub, min_width=1)
        else:
            k = int(problem[0])
            if v < 1:
                return None
            f = normalize_clause_width(gen_random_cnf(v, c, min(k, v), sub, min_width=1), k)
        pair = build_pair(problem, f)
        return Instance(iid, seed, problem, pair.n, None, pair, f)
    if problem == "subgi":
        g = gen_random_digraph(n, dens, sub)
        m = rng.randint(1, n)
        s = gen_random_digraph(m, dens, rng.randrange(2 ** 31))
        pair = pad_pattern(build_subgi_pair(g, s))
        return Instance(iid, seed, problem, n, str(dens), pair, (g, s), m)
    if problem == "example1":
        pair = InstancePair([[0, 1], [1, 0]], np.eye(2, dtype=np.int64))
        return Instance(iid, seed, problem, 2, None, pair, None)
    raise ValueError(f"unknown problem {problem!r}")


def corpus(cfg: ExperimentConfig):
    for problem in cfg.problems:
        for seed in range(cfg.seed_start, cfg.seed_start + cfg.seeds):
            inst = make_instance(problem, seed, cfg)
            if inst is not None:
                yield inst


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def _fracs(values) -> list:
    return [_entry_str(Fraction(v)) for v in np.asarray(values, dtype=object).ravel()]


def digest(obj) -> str | None:
    if obj is None:
        return None
    if isinstance(obj, PermMatrix):
        obj = obj.to_json()
    elif isinstance(obj, np.ndarray) or isinstance(obj, tuple):
        obj = _fracs(obj)
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ModelRun:
    verdict: str
    witness: object = None
    iterations: int | None = None
    cuts: int | None = None
    alpha: int | None = None
    notes: tuple = ()
    extra: dict = field(default_factory=dict)


def run_model(name: str, inst: Instance, caps: dict) -> ModelRun | None:
    """One model on one instance; None when the model does not apply."""
    pair = inst.pair
    n = pair.n
    if name == "reduction":
        if inst.problem in ("subgi", "example1"):
            return None
        v = subgi_oracle(pair)
        return ModelRun(v.answer, v.witness, extra={"nodes": v.nodes_explored})
    if name in ("relaxation", "relaxation-right", "convex", "anchored", "cutloop", "symmetric") \
            and n > caps["lp_n"]:
        raise CapExceeded(f"n = {n} over lp_n")
    if name in ("relaxation", "relaxation-right"):
        side = M.Side.LEFT if name == "relaxation" else M.Side.RIGHT
        r = M.relaxation_verdict(pair, side)
        return ModelRun("YES" if r.doubly_feasible else "NO", r.witness, alpha=r.alpha,
                        extra={"max_mass": _entry_str(r.max_mass)})
    if name == "convex":
        d = M.convex_decide(pair, heuristic=True, max_nodes=caps["norm_nodes"])
        hb = d.heuristic_best
        return ModelRun("UNDECIDED" if d.verdict == "UNDECIDED" else d.verdict, d.witness,
                        iterations=d.nodes, notes=(NORM_NOTE,),
                        extra={"heuristic_best": None if hb is None else _entry_str(hb)})
    if name == "anchored":
        if n > caps["symmetric_n"]:
            raise CapExceeded("anchored search capped with the symmetric model")
        verdict, R, tried = M.anchored_decide(pair)
        return ModelRun(verdict, R, iterations=tried)
    if name == "symmetric":
        sys = M.build_symmetric_lp(pair, cap=caps["symmetric_n"])
        out = M.lp_solve(sys)
        return ModelRun("YES" if out.feasible else "NO", out.witness, iterations=out.iterations,
                        extra={"columns": sys.num_vars})
    if name == "cutloop":
        r = M.cut_loop(pair, caps["cut_iters"])
        return ModelRun(r.verdict, r.witness, iterations=r.iterations, cuts=len(r.cuts))
    if name == "depletion":
        if inst.problem != "clique":
            return None
        G = inst.source.adjacency()
        res = M.clique_depletion(G, inst.m) if inst.m >= 2 else None
        if res is None:
            return ModelRun("UNDECIDED", notes=("m < 2",))
        removed = sum(len(c) for _, c in res.log)
        return ModelRun("NO" if res.certifies_no else "UNDECIDED", iterations=res.rounds,
                        extra={"removed": removed, "inconclusive": res.inconclusive})
    pG, pS = incidence_decompose(pair.G), incidence_decompose(pair.S)
    if name in ("incidence-symmetric", "presolve"):
        sys = M.build_incidence_symmetric(pG, pS, cap=caps["incidence_nk"])
        if name == "presolve":
            pr = M.presolve_zero_rhs(sys)
            alive = pr.system.num_vars
            verdict = "NO" if pr.decided or alive == 0 else "YES"
            return ModelRun(verdict, extra={"fixed": len(pr.fixed), "alive": alive})
        out = M.lp_solve(sys)
        return ModelRun("YES" if out.feasible else "NO", out.witness, iterations=out.iterations)
    if name == "necessary":
        out = M.lp_solve(M.build_necessary_system(pG, pS, cap=caps["necessary"]))
        return ModelRun("YES" if out.feasible else "NO", out.witness, iterations=out.iterations)
    if name in ("incidence-convex", "incidence-convex-norm"):
        if pS.k > pG.k:
            return ModelRun("NO", notes=("pattern has more arcs than the instance",))
        if pG.k > caps["incidence_convex_k"]:
            raise CapExceeded(f"k = {pG.k} over incidence_convex_k")
        if name == "incidence-convex":
            r = M.incidence_convex_verdict(pG, pS)
            return ModelRun(r.verdict, r.witness, extra={"condition": r.condition})
        sys, target = M.build_incidence_convex_check(pG, pS)
        d = norm_max_decide(sys, target, heuristic=False, max_nodes=caps["norm_nodes"])
        return ModelRun(d.verdict, d.witness, iterations=d.nodes, notes=(NORM_NOTE,))
    if name in ("asymmetric", "asymmetric-exhaustive"):
        if pS.k > pG.k:
            return ModelRun("NO", notes=("pattern has more arcs than the instance",))
        if pG.k == 0:
            return ModelRun("YES" if pS.k == 0 else "NO", notes=("no arcs",))
        if name == "asymmetric":
            if pG.k > caps["asymmetric_k"]:
                raise CapExceeded(f"k = {pG.k} over asymmetric_k")
            model = M.build_asymmetric_model(pG, pS, "GREEDY-POLY")
        else:
            model = M.build_asymmetric_model(pG, pS, "EXHAUSTIVE", cap=caps["exhaustive_nk"])
        out = M.asymmetric_solve(model)
        return ModelRun("YES" if out.feasible else "NO", out.witness,
                        extra={"beta": model.beta, "bound": 2 * model.n * model.l,
                               "family": model.family_size, "side_complete": model.side_complete})
    raise ValueError(f"unknown model {name!r}")


def oracle_verdict(inst: Instance) -> str:
    if inst.problem in ("subgi", "example1"):
        return subgi_oracle(inst.pair).answer
    return direct_oracle(inst.problem, inst.source, inst.m).answer


def instance_records(inst: Instance, models, caps: dict) -> list:
    truth = oracle_verdict(inst)
    out = []
    for name in models:
        t0 = time.perf_counter()
        try:
            run = run_model(name, inst, caps)
        except (CapExceeded, ValueError) as exc:
            run = ModelRun("CAP", notes=(str(exc),))
        if run is None:
            continue
        out.append(VerdictRecord(
            inst.id, inst.seed, inst.problem, inst.n, name, run.verdict, truth,
            digest(run.witness), run.iterations, run.cuts, run.alpha, inst.m, inst.density,
            tuple(run.notes), dict(run.extra), time.perf_counter() - t0,
        ))
    return out


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> list:
    """All records for the corpus, sorted by (instance, model).

    Writes ``cfg.output`` as JSONL when set.  Timings are left out of the
    file unless ``include_timing`` is set, so reruns are byte-identical.
    """
    caps = cfg.resolved_caps()
    records = []
    for inst in corpus(cfg):
        records.extend(instance_records(inst, cfg.models, caps))
    records.sort(key=lambda r: (r.instance, r.model))
    if write and cfg.output:
        write_jsonl(records, cfg.output, cfg.include_timing)
    return records


def write_jsonl(records, path, include_timing: bool = False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.dumps(include_timing) + "\n")


# ---------------------------------------------------------------------------
# counterexample hunting
# ---------------------------------------------------------------------------

def _reverify(claim: str, inst: Instance, caps: dict) -> tuple:
    """Slow-path oracle plus exact substitution, both from a JSON round trip."""
    pair = InstancePair.from_json(json.dumps(inst.pair.to_json()))
    slow_no = False
    if pair.n <= caps["slow_n"]:
        slow_no = subgi_oracle(pair, slow=True).answer == "NO"
    model = CLAIMS[claim]
    if model == "relaxation":
        sys = M.build_relaxation(pair)
        out = M.maximise_mass(sys)
        X = sys.block_value(out.witness, "x")
        exact = sys.check(out.witness) and is_doubly_stochastic(X)
    elif model == "asymmetric":
        pG, pS = incidence_decompose(pair.G), incidence_decompose(pair.S)
        am = M.build_asymmetric_model(pG, pS, "GREEDY-POLY")
        out = M.asymmetric_solve(am)
        exact = False
        if out.feasible:
            lhs = sum((Fraction(y) * am.basis_scaled[i].astype(object) for i, y in enumerate(out.witness)),
                      np.zeros(am.basis_scaled.shape[1], dtype=object))
            exact = all(Fraction(a) == int(b) for a, b in zip(lhs, am.rhs_scaled))
    else:
        pG, pS = incidence_decompose(pair.G), incidence_decompose(pair.S)
        sys, _ = M.build_incidence_convex_check(pG, pS)
        r = M.incidence_convex_verdict(pG, pS)
        exact = bool(r.feasible and r.condition and sys.check(r.witness)
                     and check_quadratic_condition(sys.block_value(r.witness, "z"), pS.k))
    return slow_no, exact


@dataclass
class HuntResult:
    claim: str
    records: list
    findings: list
    unverified: list
    swept: dict

    def summary(self) -> dict:
        decided = [r for r in self.records if r.model_verdict in ("YES", "NO")]
        agree = sum(r.agreement for r in decided)
        return {
            "claim": self.claim,
            "model": CLAIMS[self.claim],
            "instances": len(self.records),
            "decided": len(decided),
            "agreement": f"{agree}/{len(decided)}",
            "breaches_verified": len(self.findings),
            "breaches_unverified": len(self.unverified),
            "swept": self.swept,
        }


def hunt_counterexamples(cfg: ExperimentConfig, claim: str, outdir=None) -> HuntResult:
    """Look for model-YES / oracle-NO instances of one sufficiency claim.

    A breach is persisted only after the slow-path oracle confirms NO and
    the model's witness passes exact substitution on a fresh rebuild.
    """
    if claim not in CLAIMS:
        raise ValueError(f"unknown claim {claim!r}")
    model = CLAIMS[claim]
    cfg = replace(cfg, models=(model,))
    caps = cfg.resolved_caps()
    records, findings, unverified = [], [], []
    by_id = {}
    for inst in corpus(cfg):
        recs = instance_records(inst, (model,), caps)
        records.extend(recs)
        for r in recs:
            if r.model_verdict == "YES" and r.oracle_verdict == "NO":
                by_id[r.instance] = (inst, r)
    records.sort(key=lambda r: (r.instance, r.model))
    for iid in sorted(by_id):
        inst, rec = by_id[iid]
        slow_no, exact = _reverify(claim, inst, caps)
        entry = {"instance": iid, "seed": inst.seed, "problem": inst.problem, "n": inst.n,
                 "slow_oracle_no": slow_no, "exact_substitution": exact}
        (findings if slow_no and exact else unverified).append(entry)
    swept = {"problems": list(cfg.problems), "sizes": list(cfg.sizes),
             "densities": [str(Fraction(str(d))) for d in cfg.densities],
             "seeds": [cfg.seed_start, cfg.seed_start + cfg.seeds - 1]}
    result = HuntResult(claim, records, findings, unverified, swept)
    if outdir is not None:
        _write_hunt(result, cfg, Path(outdir), by_id)
    return result


def _write_hunt(result: HuntResult, cfg: ExperimentConfig, outdir: Path, by_id: dict):
    outdir.mkdir(parents=True, exist_ok=True)
    write_jsonl(result.records, outdir / "records.jsonl", cfg.include_timing)
    with open(outdir / "findings.jsonl", "w") as fh:
        for f in result.findings:
            fh.write(json.dumps(f, sort_keys=True) + "\n")
    with open(outdir / "summary.json", "w") as fh:
        json.dump(result.summary(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    for f in result.findings:
        inst, _ = by_id[f["instance"]]
        d = outdir / "repro" / f["instance"].replace(":", "-")
        d.mkdir(parents=True, exist_ok=True)
        (d / "pair.json").write_text(json.dumps(inst.pair.to_json(), sort_keys=True) + "\n")
        snippet = replace(cfg, problems=(inst.problem,), seed_start=inst.seed, seeds=1, output=None)
        (d / "config.json").write_text(json.dumps({"claim": result.claim, "config": snippet.to_json()},
                                                  sort_keys=True, indent=1) + "\n")


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

@dataclass
class Report:
    rows: list
    skipped: int
    alpha_hist: dict
    alpha_ok: bool
    depletion: dict
    cutloop: dict
    notes: list

    def text(self) -> str:
        head = ["model", "records", "yes", "no", "other", "agree", "false_yes", "false_no"]
        lines = ["  ".join(f"{h:>20}" if i == 0 else f"{h:>9}" for i, h in enumerate(head))]
        for r in self.rows:
            lines.append("  ".join(f"{r[h]!s:>20}" if i == 0 else f"{r[h]!s:>9}" for i, h in enumerate(head)))
        lines.append(f"skipped malformed records: {self.skipped}")
        if self.alpha_hist:
            hist = ", ".join(f"{k}:{v}" for k, v in sorted(self.alpha_hist.items()))
            lines.append(f"BvN term counts (alpha): {hist}; within (n-1)^2+1: {self.alpha_ok}")
        if self.depletion:
            lines.append("depletion: " + ", ".join(f"{k}={v}" for k, v in sorted(self.depletion.items())))
        if self.cutloop:
            lines.append("cut loop: " + ", ".join(f"{k}={v}" for k, v in sorted(self.cutloop.items())))
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(self.rows[0]) if self.rows else ["model"], lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows)
        return buf.getvalue()


def load_records(path):
    good, bad = [], 0
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                obj.pop("agreement", None)
                obj["notes"] = tuple(obj.get("notes", ()))
                good.append(VerdictRecord(**obj))
            except (ValueError, TypeError):
                bad += 1
    return good, bad


def report(path) -> Report:
    records, skipped = load_records(path)
    by_model: dict = {}
    for r in records:
        by_model.setdefault(r.model, []).append(r)
    rows = []
    for name in sorted(by_model):
        rs = by_model[name]
        rows.append({
            "model": name,
            "records": len(rs),
            "yes": sum(r.model_verdict == "YES" for r in rs),
            "no": sum(r.model_verdict == "NO" for r in rs),
            "other": sum(r.model_verdict not in ("YES", "NO") for r in rs),
            "agree": sum(r.agreement for r in rs),
            "false_yes": sum(r.model_verdict == "YES" and r.oracle_verdict == "NO" for r in rs),
            "false_no": sum(r.model_verdict == "NO" and r.oracle_verdict == "YES" for r in rs),
        })
    hist: dict = {}
    alpha_ok = True
    for r in records:
        if r.alpha is not None:
            hist[r.alpha] = hist.get(r.alpha, 0) + 1
            alpha_ok &= 1 <= r.alpha <= (r.n - 1) ** 2 + 1
    dep = {}
    drs = by_model.get("depletion", [])
    if drs:
        dep = {"instances": len(drs), "certified_no": sum(r.model_verdict == "NO" for r in drs),
               "oracle_no": sum(r.oracle_verdict == "NO" for r in drs)}
    cut = {}
    crs = [r for r in by_model.get("cutloop", []) if r.iterations is not None]
    if crs:
        its = [r.iterations for r in crs]
        cut = {"instances": len(crs), "mean_iterations": f"{sum(its) / len(its):.2f}", "max_iterations": max(its),
               "inconclusive": sum(r.model_verdict == "INCONCLUSIVE" for r in crs)}
    notes = sorted({n for r in records for n in r.notes if n == NORM_NOTE})
    return Report(rows, skipped, hist, alpha_ok, dep, cut, notes)
