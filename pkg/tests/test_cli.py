import json

import pytest

from sinrconnect.cli import EXIT_INPUT, EXIT_OK, EXIT_VERIFY, main


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def workdir(tmp_path):
    assert run("gen", "--family", "uniform", "--n", 20, "--seed", 2, "--out", tmp_path / "inst.json") == EXIT_OK
    assert run("init", "--instance", tmp_path / "inst.json", "--seed", 1, "--out", tmp_path / "tree.json") == EXIT_OK
    return tmp_path


def test_init_tree_schema(workdir):
    d = json.loads((workdir / "tree.json").read_text())
    assert {"root", "links"} <= set(d)
    assert {"sender", "receiver", "slot", "direction"} <= set(d["links"][0])
    assert sum(l["direction"] == "up" for l in d["links"]) == 19


def test_analyze_report(workdir):
    assert run("analyze", "--tree", workdir / "tree.json", "--report", workdir / "r.json") == EXIT_OK
    rep = json.loads((workdir / "r.json").read_text())
    assert {"psi", "witness", "maxDegree", "classCount", "upsilon", "ordering"} <= set(rep)
    assert rep["ordering"] == "pass"


def test_reschedule_and_verify(workdir):
    assert run("reschedule", "--tree", workdir / "tree.json", "--power", "mean", "--seed", 3,
               "--out", workdir / "s.json") == EXIT_OK
    s = json.loads((workdir / "s.json").read_text())
    assert s["power"] == "mean" and all(isinstance(i, int) for g in s["slots"] for i in g)
    assert run("verify", "--tree", workdir / "tree.json", "--schedule", workdir / "s.json",
               "--out", workdir / "v.json") == EXIT_OK


def test_build_and_verify(workdir):
    assert run("build", "--instance", workdir / "inst.json", "--mode", "arbitrary", "--seed", 4,
               "--out", workdir / "b.json") == EXIT_OK
    d = json.loads((workdir / "b.json").read_text())
    assert {"tree", "schedule", "powers", "iterations", "retries"} <= set(d)
    assert run("verify", "--tree", workdir / "b.json", "--schedule", workdir / "b.json") == EXIT_OK


def test_verify_detects_tampering(workdir):
    d = json.loads((workdir / "tree.json").read_text())
    ups = [l for l in d["links"] if l["direction"] == "up"]
    top = max(l["slot"] for l in ups)
    for l in ups:
        l["slot"] = top + 1 - l["slot"]  # reverse the aggregation order
    (workdir / "bad.json").write_text(json.dumps(d))
    assert run("verify", "--tree", workdir / "bad.json") == EXIT_VERIFY


def test_oracle_command(workdir):
    t = json.loads((workdir / "tree.json").read_text())
    ups = [l for l in t["links"] if l["direction"] == "up"][:6]
    (workdir / "links.json").write_text(json.dumps({"nodes": t["nodes"], "links": ups}))
    assert run("oracle", "--links", workdir / "links.json", "--power-mode", "uniform",
               "--out", workdir / "o.json") == EXIT_OK
    o = json.loads((workdir / "o.json").read_text())
    assert 1 <= o["max_feasible"]["size"] <= 6 and o["min_schedule"]["slots"] >= 1


def test_bad_input_exit_code(tmp_path):
    assert run("init", "--instance", tmp_path / "missing.json") == EXIT_INPUT
    (tmp_path / "junk.json").write_text("{not json")
    assert run("analyze", "--tree", tmp_path / "junk.json") == EXIT_INPUT


def test_repeat_runs_are_byte_identical(workdir):
    for k in (1, 2):
        run("init", "--instance", workdir / "inst.json", "--seed", 5, "--out", workdir / f"t{k}.json",
            "--trace", workdir / f"tr{k}.jsonl")
        run("reschedule", "--tree", workdir / f"t{k}.json", "--seed", 5, "--out", workdir / f"s{k}.json")
        run("build", "--instance", workdir / "inst.json", "--mode", "mean", "--seed", 5,
            "--out", workdir / f"b{k}.json")
    for name in ("t", "tr", "s", "b"):
        ext = "jsonl" if name == "tr" else "json"
        assert (workdir / f"{name}1.{ext}").read_bytes() == (workdir / f"{name}2.{ext}").read_bytes()


def test_experiment_command(tmp_path):
    cfg = {"experiment": {"families": ["uniform"], "sizes": [8], "seeds": [0, 1, 2], "modes": ["init"]}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run("--config", tmp_path / "c.json", "experiment", "--out", tmp_path / "e") == EXIT_OK
    rows = (tmp_path / "e" / "runs.csv").read_text().splitlines()
    assert len(rows) == 4
    summ = json.loads((tmp_path / "e" / "summary.json").read_text())
    assert summ["cells"][0]["connected_rate"] == 1.0
    assert (tmp_path / "e" / "schedule_length.png").exists()
