import json

import pytest

from birklab.harness import (
    CLAIMS, DEFAULT_CAPS, ExperimentConfig, caps_from_env, corpus, hunt_counterexamples, load_records,
    make_instance, report, run_experiment, write_jsonl,
)


def small_cfg(**kw):
    base = dict(problems=("clique",), sizes=(4, 5), seeds=4, models=("relaxation", "convex", "cutloop"))
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation_and_round_trip():
    cfg = small_cfg(densities=("1/5", "0.8"))
    back = ExperimentConfig.from_json(json.dumps(cfg.to_json()))
    assert back.densities == ("1/5", "4/5") and back.models == cfg.models
    with pytest.raises(ValueError):
        small_cfg(models=("nope",))
    with pytest.raises(ValueError):
        small_cfg(sizes=(5, 3))
    with pytest.raises(ValueError):
        small_cfg(densities=("1/2", "2"))


def test_caps_env(monkeypatch):
    monkeypatch.setenv("BIRKLAB_CAPS", '{"lp_n": 3}')
    assert caps_from_env()["lp_n"] == 3
    monkeypatch.setenv("BIRKLAB_CAPS", '{"bogus": 1}')
    with pytest.raises(ValueError):
        caps_from_env()
    monkeypatch.delenv("BIRKLAB_CAPS")
    assert caps_from_env() == DEFAULT_CAPS


def test_instances_are_deterministic():
    cfg = small_cfg(problems=("clique", "hc", "subgi", "3sat", "matching"))
    a = [(i.id, i.pair.to_json()) for i in corpus(cfg)]
    b = [(i.id, i.pair.to_json()) for i in corpus(cfg)]
    assert a == b and len(a) > 0
    assert make_instance("example1", 0, cfg).pair.G.tolist() == [[0, 1], [1, 0]]


def test_run_experiment_records(tmp_path):
    cfg = small_cfg(output=str(tmp_path / "r.jsonl"))
    recs = run_experiment(cfg)
    assert {r.model for r in recs} == {"relaxation", "convex", "cutloop"}
    assert all(r.n in (4, 5) for r in recs)
    convex = [r for r in recs if r.model == "convex"]
    assert all(r.agreement for r in convex)
    first = (tmp_path / "r.jsonl").read_bytes()
    run_experiment(cfg)
    assert (tmp_path / "r.jsonl").read_bytes() == first
    assert "timing" not in json.loads(first.splitlines()[0])


def test_empty_config(tmp_path):
    cfg = small_cfg(seeds=0, output=str(tmp_path / "e.jsonl"))
    assert run_experiment(cfg) == []
    assert (tmp_path / "e.jsonl").read_text() == ""


def test_caps_recorded():
    recs = run_experiment(small_cfg(models=("symmetric",), sizes=(7, 7), seeds=1), write=False)
    assert recs[0].model_verdict == "CAP"


def test_hunt_example_one_breach(tmp_path):
    cfg = small_cfg(problems=("example1",), seeds=1)
    res = hunt_counterexamples(cfg, "convex-sufficiency", tmp_path)
    assert len(res.findings) == 1 and res.findings[0]["slow_oracle_no"] and res.findings[0]["exact_substitution"]
    repro = tmp_path / "repro" / "example1-000000"
    assert json.loads((repro / "pair.json").read_text())["G"]["entries"] == [0, 1, 1, 0]
    snippet = json.loads((repro / "config.json").read_text())
    again = ExperimentConfig(**snippet["config"])
    assert hunt_counterexamples(again, snippet["claim"]).findings == res.findings


def test_hunt_empty_findings_reports_sweep(tmp_path):
    cfg = small_cfg(problems=("clique",), sizes=(3, 3), seeds=2)
    res = hunt_counterexamples(cfg, "incidence-convex-sufficiency", tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["breaches_verified"] == len(res.findings) == 0
    assert summary["swept"]["sizes"] == [3, 3] and summary["swept"]["densities"] == ["1/5", "4/5"]
    with pytest.raises(ValueError):
        hunt_counterexamples(cfg, "nope")
    assert set(CLAIMS) == {"convex-sufficiency", "asymmetric-sufficiency", "incidence-convex-sufficiency"}


def test_report(tmp_path):
    recs = run_experiment(small_cfg(problems=("example1", "clique"), seeds=2,
                                    models=("relaxation", "cutloop", "depletion")), write=False)
    path = tmp_path / "r.jsonl"
    write_jsonl(recs, path)
    with open(path, "a") as fh:
        fh.write("{broken\n")
    rep = report(path)
    assert rep.skipped == 1 and {r["model"] for r in rep.rows} == {"relaxation", "cutloop", "depletion"}
    assert rep.alpha_ok and rep.alpha_hist
    text, csv = rep.text(), rep.csv()
    assert "skipped malformed records: 1" in text and csv.startswith("model,records")
    assert load_records(path)[1] == 1


def test_report_two_rows(tmp_path):
    cfg = ExperimentConfig(problems=("example1",), seeds=1, models=("relaxation",))
    yes = ExperimentConfig(problems=("clique",), sizes=(3, 3), densities=("1", "1"), seeds=1, models=("convex",))
    recs = run_experiment(cfg, write=False) + run_experiment(yes, write=False)
    write_jsonl(recs, tmp_path / "r.jsonl")
    rows = report(tmp_path / "r.jsonl").rows
    assert len(rows) == 2 and {r["model"] for r in rows} == {"relaxation", "convex"}
    assert {r.oracle_verdict for r in recs} == {"YES", "NO"}
