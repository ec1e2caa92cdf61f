"""Measure the envelope constants kept in ``config.CALIBRATION``.

Run once with ``python -m sinrconnect.calibration``. It uses seeds from
``CALIBRATION_SEED_BASE`` upward, which the acceptance suite never touches.
Upper-bound constants get 25% headroom over the worst ratio observed, and
the lower-bound constant gets 20% slack below the observed ratio. The
printed values are then copied into ``config.py`` by hand.
"""

from __future__ import annotations

import argparse
import json
import math
import statistics
import sys

from .analysis import sparsity, upsilon
from .capacity import distr_cap, extract_low_degree, PhasePlan, sample_feasible_mean, tree_via_capacity
from .config import Config
from .errors import SinrConnectError
from .generate import GeneratorSpec, generate
from .init_tree import run_init
from .oracle import brute_max_feasible
from .scheduler import mean_power_for

CALIBRATION_SEED_BASE = 10_000
HEADROOM = 1.25
SLACK = 0.8


def oracle_instances(cfg: Config, count: int, seed_base: int, n: int = 13):
    """Yield (instance, T(M) tree links) for small uniform instances with |T(M)| <= 12."""
    rho = cfg.capacity.degree_threshold(cfg.init)
    seed = seed_base
    made = 0
    while made < count:
        inst = generate(GeneratorSpec("uniform", n, seed))
        seed += 1
        try:
            tree = run_init(inst, cfg.init, cfg.model, seed).tree
        except SinrConnectError:
            continue
        tm = extract_low_degree(tree, rho)
        if not tm or len(tm) > 12:
            continue
        made += 1
        yield inst, tree, tm, seed


def capacity_quality(cfg: Config, count: int, seed_base: int, trials: int = 20) -> dict:
    """Mean selected sizes against the exhaustive optimum on small instances."""
    cap_sizes, mean_sizes, opt_arb, opt_mean, opt_mean_over_ups = [], [], [], [], []
    for inst, tree, tm, s in oracle_instances(cfg, count, seed_base):
        links = [tree.link(t) for t in tm]
        ups = upsilon(inst.n, inst.delta, cfg.capacity.upsilon_const)
        mp = mean_power_for(inst.delta, cfg.model)
        oa = brute_max_feasible(links, "arbitrary", cfg.model).size
        om = brute_max_feasible(links, mp, cfg.model).size
        plan = PhasePlan.from_tree_links(tm)
        cap_sizes.append(statistics.fmean(
            len(distr_cap(links, plan, cfg.capacity, cfg.model, s * 1000 + k).selected) for k in range(trials)
        ))
        mean_sizes.append(statistics.fmean(
            len(sample_feasible_mean(links, ups, cfg.capacity.gamma1, cfg.model, s * 1000 + k, mp).selected)
            for k in range(trials)
        ))
        opt_arb.append(oa)
        opt_mean.append(om)
        opt_mean_over_ups.append(om / ups)
    return {
        "instances": len(cap_sizes),
        "distr_cap_mean": statistics.fmean(cap_sizes),
        "opt_arbitrary_mean": statistics.fmean(opt_arb),
        "distr_cap_ratio": statistics.fmean(cap_sizes) / statistics.fmean(opt_arb),
        "mean_select_mean": statistics.fmean(mean_sizes),
        "opt_mean_mean": statistics.fmean(opt_mean),
        "mean_select_ratio": statistics.fmean(mean_sizes) / statistics.fmean(opt_mean_over_ups),
    }


def sparsity_ratios(cfg: Config, sizes, families, seeds: int, seed_base: int) -> dict:
    rho = cfg.capacity.degree_threshold(cfg.init)
    worst_psi, worst_tm = 0.0, 0
    per_cell = {}
    for fam in families:
        for n in sizes:
            psis = []
            for s in range(seed_base, seed_base + seeds):
                inst = generate(GeneratorSpec(fam, n, s))
                try:
                    tree = run_init(inst, cfg.init, cfg.model, s).tree
                except SinrConnectError:
                    continue
                psi = sparsity(tree.up_linkset()).psi
                tm = sparsity([tree.link(t) for t in extract_low_degree(tree, rho)]).psi
                psis.append(psi)
                worst_psi = max(worst_psi, psi / math.log2(n))
                worst_tm = max(worst_tm, tm)
            per_cell[f"{fam}/{n}"] = {"max_psi": max(psis), "mean_psi": statistics.fmean(psis)}
    return {"cells": per_cell, "max_psi_over_log2n": worst_psi, "max_psi_tm": worst_tm}


def schedule_ratios(cfg: Config, sizes, families, seeds: int, seed_base: int) -> dict:
    out = {"arbitrary": {}, "mean": {}}
    worst = {"arbitrary": 0.0, "mean": 0.0}
    for mode in ("arbitrary", "mean"):
        for fam in families:
            for n in sizes:
                lens, ups = [], []
                for s in range(seed_base, seed_base + seeds):
                    inst = generate(GeneratorSpec(fam, n, s))
                    res = tree_via_capacity(inst, mode, cfg.init, cfg.capacity, cfg.model, s)
                    lens.append(res.slots)
                    ups.append(upsilon(n, inst.delta, cfg.capacity.upsilon_const))
                med = statistics.median(lens)
                norm = math.log2(n) * (statistics.median(ups) if mode == "mean" else 1.0)
                out[mode][f"{fam}/{n}"] = {"median_slots": med, "ratio": med / norm}
                worst[mode] = max(worst[mode], med / norm)
    out["max_ratio"] = worst
    return out


def _up(x: float) -> float:
    """Round up to two significant digits."""
    if x <= 0:
        return 0.0
    e = math.floor(math.log10(x)) - 1
    return round(math.ceil(x / 10 ** e) * 10 ** e, 12)


def _down(x: float) -> float:
    if x <= 0:
        return 0.0
    e = math.floor(math.log10(x)) - 1
    return round(math.floor(x / 10 ** e) * 10 ** e, 12)


def calibrate(cfg: Config, quick: bool = False) -> dict:
    base = CALIBRATION_SEED_BASE
    sizes = [16, 64, 256]
    families = ["uniform", "grid"]
    sp = sparsity_ratios(cfg, sizes, families, 10 if quick else 50, base)
    cq = capacity_quality(cfg, 20 if quick else 100, base + 5_000)
    sr = schedule_ratios(cfg, sizes, families, 1 if quick else 3, base + 10_000)
    constants = {
        "c_psi": _up(HEADROOM * sp["max_psi_over_log2n"]),
        "psi_tm": math.ceil(HEADROOM * sp["max_psi_tm"]),
        "c_mean_select": _down(SLACK * cq["mean_select_ratio"]),
        "c_a": _up(HEADROOM * sr["max_ratio"]["arbitrary"]),
        "c_m": _up(HEADROOM * sr["max_ratio"]["mean"]),
    }
    return {"constants": constants, "sparsity": sp, "capacity_quality": cq, "schedules": sr}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="measure envelope constants on calibration seeds")
    ap.add_argument("--quick", action="store_true", help="fewer seeds, for a dry run")
    args = ap.parse_args(argv)
    rep = calibrate(Config.from_dict(), args.quick)
    json.dump(rep, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
