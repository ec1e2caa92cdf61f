"""Command-line entry point: ``sinrconnect <command> ...``.

Exit codes: 0 success, 2 verification failure, 3 budget exceeded, 4 bad input.
Set SINRCONNECT_LOG (e.g. INFO, DEBUG) for log output on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import analysis, io
from .capacity import extract_low_degree, tree_via_capacity
from .config import Config
from .errors import (
    BudgetExceeded,
    DegenerateInstance,
    IterationBudgetExceeded,
    NotConnected,
    NotPowerFeasible,
    SlotBudgetExceeded,
)
from .generate import FAMILIES, GeneratorSpec, generate
from .init_tree import InitParams, degree_stats, run_init
from .oracle import OracleBudget, brute_max_feasible, brute_min_schedule
from .scheduler import Schedule, reschedule_mean, verify_schedule

EXIT_OK, EXIT_VERIFY, EXIT_BUDGET, EXIT_INPUT = 0, 2, 3, 4


def _emit(obj, out: str | None) -> None:
    if out:
        io.write_json(out, obj)
    else:
        sys.stdout.write(io.dumps(obj))


def cmd_gen(a, cfg: Config) -> int:
    spec = GeneratorSpec(
        a.family, a.n, a.seed, side=a.side, rows=a.rows, cols=a.cols,
        spacing=a.spacing, base=a.base, k=a.k, spread=a.spread,
    )
    _emit(generate(spec).to_dict(), a.out)
    return EXIT_OK


def cmd_init(a, cfg: Config) -> int:
    inst = io.load_instance(a.instance)
    if a.mode == "theory":
        init = InitParams.theory(cfg.model, a.p)
    else:
        init = InitParams(
            a.p if a.p is not None else cfg.init.p,
            a.lambda1 if a.lambda1 is not None else cfg.init.lambda1,
            "practical",
        )
    res = run_init(inst.normalized(), init, cfg.model, a.seed, record_trace=bool(a.trace))
    if a.trace:
        with open(a.trace, "w") as fh:
            fh.write(res.trace.to_jsonl())
    d = res.tree.to_dict(cfg.model)
    d["init"] = init.to_dict()
    d["slots"] = res.slots
    d["rounds"] = [
        {
            "round": r.round, "active": r.active, "min_active_dist": r.min_active_dist,
            "links_formed": r.links_formed, "stray_links": r.stray_links, "skipped": r.skipped,
        }
        for r in res.log.rounds
    ]
    _emit(d, a.out)
    return EXIT_OK if analysis.verify_bitree(res.tree, cfg.model).ok else EXIT_VERIFY


def cmd_reschedule(a, cfg: Config) -> int:
    if a.power != "mean":
        raise ValueError("only --power mean is supported")
    tree = io.load_tree(a.tree)
    sched = reschedule_mean(tree, cfg.scheduler, cfg.model, a.seed)
    d = sched.to_dict()
    d["simulated_slots"] = sched.simulated_slots
    _emit(d, a.out)
    return EXIT_OK if verify_schedule(sched, cfg.model).ok else EXIT_VERIFY


def cmd_build(a, cfg: Config) -> int:
    inst = io.load_instance(a.instance).normalized()
    res = tree_via_capacity(inst, a.mode, cfg.init, cfg.capacity, cfg.model, a.seed)
    _emit(res.to_dict(cfg.model), a.out)
    ok = analysis.verify_bitree(res.tree, cfg.model).ok and verify_schedule(res.schedule, cfg.model).ok
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_analyze(a, cfg: Config) -> int:
    tree = io.load_tree(a.tree)
    ups = tree.up_linkset()
    sp = analysis.sparsity(ups)
    tm = extract_low_degree(tree, cfg.capacity.degree_threshold(cfg.init))
    ver = analysis.verify_bitree(tree, cfg.model)
    rep = {
        "psi": sp.psi,
        "witness": sp.to_dict(),
        "maxDegree": degree_stats(tree).max_degree,
        "classCount": analysis.partition_independent([tree.link(t) for t in tm], a.C).class_count,
        "upsilon": analysis.upsilon(tree.instance.n, tree.instance.delta, cfg.capacity.upsilon_const),
        "ordering": "pass" if ver.ok else "fail",
        "failures": [list(f) for f in ver.failures],
        "latency": list(analysis.latency(tree)),
    }
    _emit(rep, a.report)
    return EXIT_OK if ver.ok else EXIT_VERIFY


def cmd_verify(a, cfg: Config) -> int:
    tree = io.load_tree(a.tree)
    ver = analysis.verify_bitree(tree, cfg.model)
    rep = {"tree": ver.to_dict()}
    ok = ver.ok
    if a.schedule:
        d = io.read_json(a.schedule)
        if "schedule" in d:
            d = d["schedule"]
        sched = Schedule.from_dict(d, tree.instance)
        sc = verify_schedule(sched, cfg.model)
        rep["schedule"] = {"ok": sc.ok, "slot": sc.slot, "reason": sc.reason}
        ok = ok and sc.ok
    _emit(rep, a.out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_oracle(a, cfg: Config) -> int:
    links = io.load_links(a.links)
    mode = a.power_mode
    budget = OracleBudget(a.max_links, a.max_schedule_links)
    best = brute_max_feasible(links, mode, cfg.model, budget, a.margin)
    rep = {
        "links": [[l.sender, l.receiver] for l in links],
        "power_mode": mode,
        "max_feasible": {"size": best.size, "witness": best.witness},
    }
    if len(links) <= budget.max_schedule_links:
        sched = brute_min_schedule(links, mode, cfg.model, budget, a.margin)
        rep["min_schedule"] = {"slots": sched.length, "partition": sched.slots}
    _emit(rep, a.out)
    return EXIT_OK


def cmd_experiment(a, cfg: Config) -> int:
    from .experiment import experiment

    summary = experiment(cfg, a.out, a.workers, figures=not a.no_figures)
    bad = sum(c["runs"] - round(c["verified_rate"] * c["runs"]) for c in summary["cells"])
    return EXIT_OK if bad == 0 else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sinrconnect", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON config with sections model/init/scheduler/capacity/experiment")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--family", choices=FAMILIES, default="uniform")
    g.add_argument("--n", type=int, default=16)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--side", type=float, default=1.0)
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--spacing", type=float, default=1.0)
    g.add_argument("--base", type=float, default=2.0)
    g.add_argument("--k", type=int, default=4)
    g.add_argument("--spread", type=float, default=0.05)
    g.add_argument("--out")
    g.set_defaults(fn=cmd_gen)

    i = sub.add_parser("init", help="run the distributed bi-tree construction")
    i.add_argument("--instance", required=True)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--mode", choices=("theory", "practical"), default="practical")
    i.add_argument("--p", type=float)
    i.add_argument("--lambda1", type=float)
    i.add_argument("--trace", help="write the slot trace as JSON lines")
    i.add_argument("--out")
    i.set_defaults(fn=cmd_init)

    r = sub.add_parser("reschedule", help="reschedule tree links under mean power")
    r.add_argument("--tree", required=True)
    r.add_argument("--power", default="mean")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(fn=cmd_reschedule)

    b = sub.add_parser("build", help="rebuild a bi-tree by capacity selection")
    b.add_argument("--instance", required=True)
    b.add_argument("--mode", choices=("mean", "arbitrary"), default="arbitrary")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(fn=cmd_build)

    an = sub.add_parser("analyze", help="sparsity, degree, independence and ordering report")
    an.add_argument("--tree", required=True)
    an.add_argument("--C", type=float, default=2.0, help="independence parameter")
    an.add_argument("--report")
    an.set_defaults(fn=cmd_analyze)

    v = sub.add_parser("verify", help="verify a tree and optionally a schedule")
    v.add_argument("--tree", required=True)
    v.add_argument("--schedule")
    v.add_argument("--out")
    v.set_defaults(fn=cmd_verify)

    o = sub.add_parser("oracle", help="brute-force capacity and scheduling on a small link set")
    o.add_argument("--links", required=True)
    o.add_argument("--power-mode", choices=("uniform", "mean", "linear", "arbitrary"), default="arbitrary")
    o.add_argument("--margin", type=float, default=0.0)
    o.add_argument("--max-links", type=int, default=15)
    o.add_argument("--max-schedule-links", type=int, default=12)
    o.add_argument("--out")
    o.set_defaults(fn=cmd_oracle)

    e = sub.add_parser("experiment", help="run a seeded batch from the config's experiment section")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--no-figures", action="store_true")
    e.set_defaults(fn=cmd_experiment)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SINRCONNECT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = Config.load(args.config)
        return args.fn(args, cfg)
    except (SlotBudgetExceeded, IterationBudgetExceeded, BudgetExceeded) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NotConnected, NotPowerFeasible) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (OSError, ValueError, KeyError, json.JSONDecodeError, DegenerateInstance) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
