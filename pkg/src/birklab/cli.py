"""Command-line entry point: ``birklab <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import models as M
from .harness import CLAIMS, ExperimentConfig, NORM_NOTE, hunt_counterexamples, report, run_experiment
from .harness import caps_from_env
from .incidence import incidence_decompose
from .matcore import PermMatrix, _entry_str, matrix_from_json, matrix_to_json
from .oracle import direct_oracle, subgi_oracle
from .problems import parse_cnf, parse_graph
from .reductions import PROBLEMS, InstancePair, build_pair, pad_pattern

SOLVE_MODELS = ("relaxation", "convex", "anchored", "factored", "symmetric", "incidence-symmetric",
                "incidence-convex", "asymmetric", "cutloop", "depletion")


def _emit(obj, out):
    text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _range(text: str, cast=int):
    lo, sep, hi = text.partition("..")
    return (cast(lo), cast(hi if sep else lo))


def _load_pair(path) -> InstancePair:
    return InstancePair.from_json(Path(path).read_text())


def _witness_json(w, sys_=None):
    if w is None:
        return None
    if isinstance(w, PermMatrix):
        return w.to_json()
    if sys_ is not None:
        return {name: matrix_to_json(sys_.block_value(w, name)) if len(shape) == 2
                else [_entry_str(Fraction(v)) for v in sys_.block_value(w, name)]
                for name, (_, shape) in sys_.blocks.items()}
    if isinstance(w, np.ndarray):
        return matrix_to_json(w)
    return [_entry_str(Fraction(v)) for v in w]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_reduce(a):
    if a.problem in ("2sat", "3sat", "sat"):
        source = parse_cnf(Path(a.input).read_text())
    elif a.problem in ("subgi", "gi"):
        if not a.pattern:
            raise SystemExit("subgi/gi need --pattern")
        source = (parse_graph(Path(a.input).read_text()), parse_graph(Path(a.pattern).read_text()))
    else:
        source = parse_graph(Path(a.input).read_text())
    _emit(build_pair(a.problem, source, a.m, a.pad).to_json(), a.output)


def cmd_decompose(a):
    pair = _load_pair(a.input)
    _emit(incidence_decompose(pair.G if a.side == "G" else pair.S).to_json(), a.output)


def _solve(a) -> dict:
    pair = _load_pair(a.pair)
    caps = caps_from_env(json.loads(a.caps) if a.caps else None)
    m0 = pair.m
    pair = pad_pattern(pair)
    notes: list = []
    model = a.model
    out: dict = {"model": model}
    sys_ = None
    if model == "relaxation":
        sys_ = M.build_relaxation(pair, M.Side(a.side))
        r = M.maximise_mass(sys_)
        ok = r.objective == pair.n
        out.update(status="YES" if ok else "NO", witness=_witness_json(r.witness, sys_),
                   objective=_entry_str(r.objective), iterations=r.iterations)
        notes.append("X = 0 always satisfies the substochastic system; YES means a doubly "
                     "stochastic point exists (max total mass = n)")
    elif model == "convex":
        sys_, target = M.build_convex_check(pair, M.Side(a.side))
        d = M.norm_max_decide(sys_, target, max_nodes=caps["norm_nodes"])
        out.update(status=d.verdict, witness=_witness_json(d.witness, sys_) if d.witness else None,
                   objective=None if d.heuristic_best is None else _entry_str(d.heuristic_best),
                   iterations=d.nodes)
        notes += [NORM_NOTE, "objective is the heuristic lower bound on the squared norm"]
    elif model == "anchored":
        verdict, R, tried = M.anchored_decide(pair)
        out.update(status=verdict, witness=_witness_json(R), iterations=tried)
    elif model == "factored":
        n = pair.n
        if a.factors:
            f = json.loads(Path(a.factors).read_text())
            G1, G2, S1, S2 = (matrix_from_json(f[k]) for k in ("G1", "G2", "S1", "S2"))
        else:
            U = np.eye(n, dtype=np.int64)
            G1, G2, S1, S2 = pair.G, U, pair.S, U
            notes.append("default factors G1 = G, G2 = S2 = U, S1 = S")
        sys_ = M.build_factored_system(pair, G1, G2, S1, S2)
        r = M.lp_solve(sys_)
        out.update(status="YES" if r.feasible else "UNDECIDED", witness=_witness_json(r.witness, sys_),
                   iterations=r.iterations)
        notes.append("feasibility certifies YES; infeasibility certifies nothing")
    elif model == "symmetric":
        sys_ = M.build_symmetric_lp(pair, "ATSP" if a.weights else "COUNT",
                                    W=matrix_from_json(json.loads(Path(a.weights).read_text())) if a.weights else None,
                                    cap=caps["symmetric_n"])
        r = M.lp_solve(sys_)
        out.update(status="YES" if r.feasible else "NO", witness=_witness_json(r.witness, sys_),
                   objective=None if r.objective is None else _entry_str(r.objective), iterations=r.iterations)
    elif model in ("incidence-symmetric", "incidence-convex", "asymmetric"):
        pG, pS = incidence_decompose(pair.G), incidence_decompose(pair.S)
        if model == "incidence-symmetric":
            sys_ = M.build_incidence_symmetric(pG, pS, cap=caps["incidence_nk"])
            pr = M.presolve_zero_rhs(sys_)
            r = M.lp_solve(sys_)
            out.update(status="YES" if r.feasible else "NO", witness=_witness_json(r.witness, sys_),
                       iterations=r.iterations, presolve={"fixed": len(pr.fixed), "decided": pr.decided,
                                                          "alive": pr.system.num_vars})
        elif model == "incidence-convex":
            sys_, target = M.build_incidence_convex_check(pG, pS)
            r = M.incidence_convex_verdict(pG, pS)
            d = M.norm_max_decide(sys_, target, heuristic=False, max_nodes=caps["norm_nodes"])
            out.update(status=d.verdict, witness=_witness_json(d.witness, sys_) if d.witness else None,
                       iterations=d.nodes, lp={"feasible": r.feasible, "condition": r.condition,
                                               "verdict": r.verdict})
            notes.append(NORM_NOTE)
        elif pS.k > pG.k or pG.k == 0:
            ok = pS.k == 0 and pG.k == 0
            out.update(status="YES" if ok else "NO", witness=None, iterations=0)
            notes.append("decided by arc counts")
        else:
            am = M.build_asymmetric_model(pG, pS, a.generator, cap=caps["exhaustive_nk"])
            r = M.asymmetric_solve(am)
            out.update(status="YES" if r.feasible else "NO",
                       witness=None if r.witness is None else [_entry_str(Fraction(v)) for v in r.witness],
                       beta=am.beta, bound=2 * am.n * am.l, family=am.family_size,
                       side_complete=am.side_complete, iterations=0)
    elif model == "cutloop":
        r = M.cut_loop(pair, a.max_iters, M.Side(a.side))
        out.update(status=r.verdict, witness=_witness_json(r.witness), iterations=r.iterations,
                   cuts=[[[i + 1, j + 1] for i, j in c] for c in r.cuts])
    elif model == "depletion":
        m = a.m or m0
        r = M.clique_depletion(pair.G, m, a.rounds)
        out.update(status="NO" if r.certifies_no else "UNDECIDED", iterations=r.rounds,
                   removed=[[rd, [[i + 1, j + 1] for i, j in cells]] for rd, cells in r.log],
                   inconclusive=r.inconclusive)
    else:  # pragma: no cover - argparse restricts choices
        raise SystemExit(f"unknown model {model}")
    out["notes"] = notes
    if a.export_system and sys_ is not None:
        Path(a.export_system).write_text(sys_.dumps() + "\n")
    return out


def cmd_solve(a):
    _emit(_solve(a), a.output)


def cmd_oracle(a):
    if a.pair:
        v = subgi_oracle(_load_pair(a.pair), slow=a.slow)
    else:
        if not (a.problem and a.input):
            raise SystemExit("give --pair, or --problem with --input")
        text = Path(a.input).read_text()
        source = parse_cnf(text) if a.problem in ("2sat", "3sat", "sat") else parse_graph(text)
        v = direct_oracle(a.problem, source, a.m)
    _emit(v.to_json(), a.output)


def cmd_hunt(a):
    cfg = ExperimentConfig(problems=tuple(a.problems), sizes=_range(a.sizes),
                           densities=_range(a.density, str), seeds=a.seeds, seed_start=a.seed_start)
    res = hunt_counterexamples(cfg, a.claim, a.output)
    _emit(res.summary(), None)


def cmd_report(a):
    rep = report(a.records)
    sys.stdout.write(rep.text())
    if a.csv:
        Path(a.csv).write_text(rep.csv())


def cmd_run(a):
    cfg = ExperimentConfig.from_json(Path(a.config).read_text())
    if a.output:
        cfg = ExperimentConfig(**{**cfg.to_json(), "output": a.output})
    recs = run_experiment(cfg)
    if not cfg.output:
        for r in recs:
            sys.stdout.write(r.dumps(cfg.include_timing) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="birklab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reduce", help="build an instance/pattern pair")
    r.add_argument("--problem", required=True, choices=PROBLEMS)
    r.add_argument("--input", required=True, help="graph JSON or DIMACS CNF")
    r.add_argument("--pattern", help="pattern graph JSON (subgi/gi)")
    r.add_argument("--m", type=int)
    r.add_argument("--pad", action="store_true", help="pad the pattern to n vertices")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_reduce)

    d = sub.add_parser("decompose", help="incidence factorisation of G or S")
    d.add_argument("--input", required=True)
    d.add_argument("--side", choices=("G", "S"), default="G")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_decompose)

    s = sub.add_parser("solve", help="build and solve one model")
    s.add_argument("--model", required=True, choices=SOLVE_MODELS)
    s.add_argument("--pair", required=True)
    s.add_argument("--caps", help="JSON object of cap overrides")
    s.add_argument("--side", choices=("LEFT", "RIGHT"), default="LEFT")
    s.add_argument("--generator", choices=("GREEDY-POLY", "EXHAUSTIVE"), default="GREEDY-POLY")
    s.add_argument("--factors", help="JSON with G1, G2, S1, S2 matrices")
    s.add_argument("--weights", help="matrix JSON for the ATSP objective")
    s.add_argument("--max-iters", type=int, default=50)
    s.add_argument("--m", type=int)
    s.add_argument("--rounds", type=int)
    s.add_argument("--export-system", help="write the constraint system JSON here")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="brute-force decision")
    o.add_argument("--pair")
    o.add_argument("--problem", choices=PROBLEMS)
    o.add_argument("--input")
    o.add_argument("--m", type=int)
    o.add_argument("--slow", action="store_true")
    o.add_argument("-o", "--output")
    o.set_defaults(func=cmd_oracle)

    h = sub.add_parser("hunt", help="search for sufficiency counterexamples")
    h.add_argument("--claim", required=True, choices=sorted(CLAIMS))
    h.add_argument("--sizes", default="3..5")
    h.add_argument("--density", default="0.2..0.8")
    h.add_argument("--seeds", type=int, default=100)
    h.add_argument("--seed-start", type=int, default=0)
    h.add_argument("--problems", nargs="+", default=["subgi", "hc", "clique"])
    h.add_argument("-o", "--output", default="findings")
    h.set_defaults(func=cmd_hunt)

    rp = sub.add_parser("report", help="summarise a records file")
    rp.add_argument("records")
    rp.add_argument("--csv")
    rp.set_defaults(func=cmd_report)

    rn = sub.add_parser("run", help="run an experiment from a JSON config")
    rn.add_argument("--config", required=True)
    rn.add_argument("-o", "--output")
    rn.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
