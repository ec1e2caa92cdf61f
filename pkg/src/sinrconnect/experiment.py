"""Seeded experiment batches: one row per (family, n, mode, seed), plus aggregates.

Outputs are deterministic: rows are sorted by cell key and seed, floats are
written with ``repr`` precision, and wall-clock time is kept out of the files.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .analysis import latency, sparsity, upsilon, verify_bitree
from .capacity import extract_low_degree, tree_via_capacity
from .config import Config
from .errors import SinrConnectError
from .generate import GeneratorSpec, generate
from .init_tree import degree_stats, run_init, slot_bound
from .scheduler import reschedule_mean, verify_schedule

log = logging.getLogger(__name__)

MODES = ("init", "reschedule", "arbitrary", "mean")


@dataclass
class RunReport:
    family: str
    n: int
    mode: str
    seed: int
    connected: bool = False
    verified: bool = False
    schedule_length: int = 0
    init_slots: int = 0
    slot_bound: int = 0
    iterations: int = 0
    psi: int = -1
    psi_tm: int = -1
    max_degree: int = 0
    distance_invariant: bool = False
    delta: float = 0.0
    upsilon: float = 0.0
    error: str = ""

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def run_one(family: str, n: int, mode: str, seed: int, cfg: Config, with_sparsity: bool) -> RunReport:
    rep = RunReport(family, n, mode, seed)
    try:
        inst = generate(GeneratorSpec(family, n, seed))
        rep.delta = inst.delta
        rep.upsilon = upsilon(n, inst.delta, cfg.capacity.upsilon_const)
        rep.slot_bound = slot_bound(cfg.init, n, inst.delta)
        if mode in ("init", "reschedule"):
            res = run_init(inst, cfg.init, cfg.model, seed)
            tree = res.tree
            rep.connected = True
            rep.init_slots = res.slots
            rep.distance_invariant = res.log.distance_invariant_ok
            rep.max_degree = degree_stats(tree).max_degree
            ok = verify_bitree(tree, cfg.model).ok
            if with_sparsity:
                rep.psi = sparsity(tree.up_linkset()).psi
                tm = extract_low_degree(tree, cfg.capacity.degree_threshold(cfg.init))
                rep.psi_tm = sparsity([tree.link(t) for t in tm]).psi
            if mode == "init":
                rep.schedule_length = tree.schedule_length
            else:
                sched = reschedule_mean(tree, cfg.scheduler, cfg.model, seed)
                ok = ok and verify_schedule(sched, cfg.model).ok
                rep.schedule_length = sched.length
            rep.verified = ok
        elif mode in ("arbitrary", "mean"):
            res = tree_via_capacity(inst, mode, cfg.init, cfg.capacity, cfg.model, seed)
            rep.connected = True
            rep.iterations = len(res.iterations)
            rep.init_slots = sum(r.init_slots for r in res.iterations)
            rep.max_degree = degree_stats(res.tree).max_degree
            rep.schedule_length = res.slots
            conv, bcast, pair = latency(res.tree)
            rep.verified = (
                verify_bitree(res.tree, cfg.model).ok
                and verify_schedule(res.schedule, cfg.model).ok
                and (conv, bcast, pair) == (res.slots, res.slots, 2 * res.slots)
            )
        else:
            raise ValueError(f"unknown mode {mode!r}")
    except SinrConnectError as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
    return rep


def _task(args):
    family, n, mode, seed, cfg_dict, with_sparsity = args
    return run_one(family, n, mode, seed, Config.from_dict(cfg_dict), with_sparsity)


def _seed_list(spec) -> list[int]:
    if isinstance(spec, dict):
        return list(range(int(spec.get("start", 0)), int(spec.get("start", 0)) + int(spec["count"])))
    return [int(s) for s in spec]


def run_batch(cfg: Config, workers: int = 1) -> list[RunReport]:
    ex = cfg.experiment
    modes = list(ex.get("modes", ["init"]))
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}")
    seeds = _seed_list(ex.get("seeds", []))
    cfg_dict = {k: v for k, v in cfg.to_dict().items() if k != "experiment"}
    if cfg.init.mode == "theory":
        cfg_dict["init"] = {"mode": "theory", "p_theory": cfg.init.p}
    tasks = [
        (fam, int(n), mode, seed, cfg_dict, bool(ex.get("sparsity", True)))
        for fam in ex.get("families", ["uniform"])
        for n in ex.get("sizes", [16])
        for mode in modes
        for seed in seeds
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_task, tasks, chunksize=4))
    else:
        rows = [_task(t) for t in tasks]
    rows.sort(key=lambda r: (r.family, r.n, r.mode, r.seed))
    return rows


def _stats(vals: list[float]) -> dict:
    if not vals:
        return {"mean": None, "median": None, "max": None}
    return {"mean": statistics.fmean(vals), "median": statistics.median(vals), "max": max(vals)}


def summarize(rows: list[RunReport]) -> dict:
    cells: dict[tuple, list[RunReport]] = {}
    for r in rows:
        cells.setdefault((r.family, r.n, r.mode), []).append(r)
    out = []
    for (fam, n, mode), rs in sorted(cells.items()):
        good = [r for r in rs if not r.error]
        entry = {
            "family": fam,
            "n": n,
            "mode": mode,
            "runs": len(rs),
            "failures": len(rs) - len(good),
            "connected_rate": sum(r.connected for r in rs) / len(rs),
            "verified_rate": sum(r.verified for r in rs) / len(rs),
            "distance_invariant_rate": sum(r.distance_invariant for r in good) / len(good) if good else None,
            "log2n": math.log2(n) if n > 1 else 0.0,
        }
        for key in ("schedule_length", "init_slots", "iterations", "max_degree", "psi", "psi_tm", "upsilon"):
            vals = [getattr(r, key) for r in good if getattr(r, key) is not None and getattr(r, key) >= 0]
            entry[key] = _stats(vals)
        out.append(entry)
    return {"cells": out, "runs": len(rows)}


def rows_to_csv(rows: list[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RunReport.columns(), lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = asdict(r)
        d["delta"] = repr(float(d["delta"]))
        d["upsilon"] = repr(float(d["upsilon"]))
        w.writerow(d)
    return buf.getvalue()


def experiment(cfg: Config, out_dir: str | Path, workers: int = 1, figures: bool = True) -> dict:
    """Run the batch described by ``cfg.experiment`` and write runs.csv, summary.json, figures."""
    from .io import write_json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_batch(cfg, workers)
    (out / "runs.csv").write_text(rows_to_csv(rows))
    summary = summarize(rows)
    write_json(out / "summary.json", summary)
    if figures and rows:
        from .plotting import plot_summary

        plot_summary(rows, summary, out)
    return summary
