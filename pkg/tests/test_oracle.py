import itertools

import numpy as np
import pytest

from sinrconnect.capacity import assign_power
from sinrconnect.errors import BudgetExceeded, NotPowerFeasible
from sinrconnect.generate import GeneratorSpec, generate
from sinrconnect.init_tree import InitParams, run_init
from sinrconnect.model import PowerAssignment, is_feasible
from sinrconnect.oracle import (
    OracleBudget,
    brute_max_feasible,
    brute_min_schedule,
    feasible_subsets,
    power_feasible,
    solve_powers,
    spectral_radius,
)
from sinrconnect.scheduler import verify_schedule

from conftest import mklink


def test_max_feasible_examples(params, far_pair, conflict_pair):
    assert brute_max_feasible(far_pair, "arbitrary", params).size == 2
    assert brute_max_feasible(conflict_pair, "uniform", params).size == 1
    assert brute_max_feasible([], "arbitrary", params).size == 0


def test_min_schedule_examples(params, conflict_pair):
    assert brute_min_schedule([], "uniform", params).length == 0
    s = brute_min_schedule(conflict_pair, "uniform", params)
    assert s.length == 2 and verify_schedule(s, params).ok
    far5 = [mklink(2 * i, 2 * i + 1, (100 * i, 0), (100 * i + 1, 0)) for i in range(5)]
    for mode in ("uniform", "arbitrary"):
        s = brute_min_schedule(far5, mode, params)
        assert s.length == 1 and verify_schedule(s, params).ok


def test_budget(params):
    links = [mklink(2 * i, 2 * i + 1, (10 * i, 0), (10 * i + 1, 0)) for i in range(16)]
    with pytest.raises(BudgetExceeded):
        brute_max_feasible(links, "uniform", params)
    with pytest.raises(BudgetExceeded):
        brute_min_schedule(links[:13], "uniform", params, OracleBudget())


def test_named_modes_match_is_feasible(params):
    inst = generate(GeneratorSpec("uniform", 24, 3))
    links = list(run_init(inst, InitParams(), params, 3).tree.up_linkset())[:9]
    for mode in ("uniform", "mean", "linear"):
        pa = PowerAssignment.noise_safe(mode, params, max(l.length for l in links))
        ok = feasible_subsets(links, pa, params)
        for mask in range(1 << len(links)):
            sub = [links[i] for i in range(len(links)) if mask >> i & 1]
            assert ok[mask] == bool(is_feasible(sub, pa, params))


def test_arbitrary_subsets_match_spectral_radius(params):
    inst = generate(GeneratorSpec("uniform", 20, 5))
    links = list(run_init(inst, InitParams(), params, 5).tree.up_linkset())[:8]
    ok = feasible_subsets(links, "arbitrary", params)
    for mask in range(1, 1 << len(links)):
        sub = [links[i] for i in range(len(links)) if mask >> i & 1]
        assert ok[mask] == power_feasible(sub, params)


def test_solve_powers_gives_feasible_set(params, far_pair):
    table = solve_powers(far_pair, params)
    assert is_feasible(far_pair, PowerAssignment.explicit(table), params)


def test_spectral_radius_of_capped_pair(params):
    a = mklink(0, 1, (0, 0), (1, 0))
    b = mklink(2, 3, (1.2, 0), (0.2, 0))
    assert spectral_radius([a, b], params) >= 1
    assert not power_feasible([a, b], params)
    with pytest.raises(NotPowerFeasible):
        assign_power([a, b], params)
    with pytest.raises(ValueError):
        assign_power([a], params, margin=0)


def test_assign_power_agrees_with_oracle_on_subsets(params):
    """Fixed-point iteration (target 2*beta) converges exactly where the eigenvalue test says rho < 1/2."""
    rng = np.random.default_rng(1)
    for trial in range(4):
        links = []
        for i in range(8):
            x, y = rng.random(2) * (4 + 4 * trial)
            t = rng.random() * 2 * np.pi
            d = 1 + rng.random()
            links.append(mklink(2 * i, 2 * i + 1, (x, y), (x + d * np.cos(t), y + d * np.sin(t))))
        ok = feasible_subsets(links, "arbitrary", params, margin=1.0)
        for mask in range(1, 1 << 8):
            sub = [links[i] for i in range(8) if mask >> i & 1]
            rho = spectral_radius(sub, params)
            if abs(2 * rho - 1) < 1e-3:
                continue  # too close to the boundary for a finite iteration budget
            try:
                assign_power(sub, params, margin=1.0)
                got = True
            except NotPowerFeasible:
                got = False
            assert got == bool(ok[mask]), (mask, rho)
