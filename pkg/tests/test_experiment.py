from sinrconnect.config import Config
from sinrconnect.experiment import experiment, rows_to_csv, run_batch, run_one, summarize


def test_empty_seed_list(tmp_path):
    cfg = Config.from_dict({"experiment": {"seeds": []}})
    summ = experiment(cfg, tmp_path / "e", figures=True)
    assert summ == {"cells": [], "runs": 0}
    assert (tmp_path / "e" / "runs.csv").read_text().count("\n") == 1


def test_three_seed_init_rows():
    cfg = Config.from_dict({"experiment": {"sizes": [16], "seeds": [0, 1, 2], "modes": ["init"]}})
    rows = run_batch(cfg)
    assert len(rows) == 3 and all(r.connected and r.verified for r in rows)


def test_csv_is_reproducible_and_parallel_safe():
    cfg = Config.from_dict(
        {"experiment": {"families": ["uniform", "grid"], "sizes": [16], "seeds": {"start": 0, "count": 2},
                        "modes": ["init", "reschedule"]}}
    )
    a = rows_to_csv(run_batch(cfg, workers=1))
    b = rows_to_csv(run_batch(cfg, workers=2))
    assert a == b


def test_run_failure_is_recorded_not_raised():
    cfg = Config.from_dict({"init": {"p": 0.01, "lambda1": 0.05}})
    rep = run_one("uniform", 40, "init", 0, cfg, with_sparsity=False)
    assert rep.error.startswith("NotConnected") and not rep.connected
    summ = summarize([rep])
    assert summ["cells"][0]["failures"] == 1
