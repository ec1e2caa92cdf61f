"""Exhaustive ground truth for small link sets.

Subset feasibility is evaluated for all 2^m subsets at once: for a fixed
power assignment from the pairwise affectance matrix, for arbitrary power
from the spectral radius of the normalised gain matrix (eigenvalues, not the
fixed-point iteration used by ``capacity.assign_power``, so the two can be
cross-checked).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded
from .model import (
    FEAS_TOL,
    Link,
    ModelParams,
    PowerAssignment,
    affectance_matrix,
)
from .scheduler import Schedule


@dataclass(frozen=True)
class OracleBudget:
    max_links: int = 15
    max_schedule_links: int = 12


def _shares_node(links: Sequence[Link]) -> np.ndarray:
    m = len(links)
    out = np.zeros((m, m), dtype=bool)
    for i in range(m):
        a = {links[i].sender, links[i].receiver}
        for j in range(i + 1, m):
            if a & {links[j].sender, links[j].receiver}:
                out[i, j] = out[j, i] = True
    return out


def _same_sender(links: Sequence[Link]) -> np.ndarray:
    s = np.array([l.sender for l in links])
    out = s[:, None] == s[None, :]
    np.fill_diagonal(out, False)
    return out


def gain_matrix(links: Sequence[Link], params: ModelParams) -> np.ndarray:
    """G[i, j] = path gain from link j's sender to link i's receiver."""
    s = np.array([l.sender_pos for l in links], dtype=float).reshape(-1, 2)
    r = np.array([l.receiver_pos for l in links], dtype=float).reshape(-1, 2)
    d = np.sqrt(((r[:, None, :] - s[None, :, :]) ** 2).sum(-1))
    with np.errstate(divide="ignore"):
        return d ** (-params.alpha)


def normalized_interference(links: Sequence[Link], params: ModelParams) -> np.ndarray:
    """F[i, j] = beta * G[i, j] / G[i, i] off the diagonal, 0 on it."""
    G = gain_matrix(links, params)
    F = params.beta * G / np.diag(G)[:, None]
    np.fill_diagonal(F, 0.0)
    return F


def spectral_radius(links: Sequence[Link], params: ModelParams) -> float:
    links = list(links)
    if not links:
        return 0.0
    if _shares_node(links).any():
        return float("inf")
    return float(np.max(np.abs(np.linalg.eigvals(normalized_interference(links, params)))))


def power_feasible(links: Sequence[Link], params: ModelParams, margin: float = 0.0) -> bool:
    """Is there a power vector giving every link SINR >= beta*(1+margin)?

    Links that share a node can never coexist (one radio per node).
    """
    return spectral_radius(links, params) * (1.0 + margin) < 1.0


def _masks_members(m: int) -> np.ndarray:
    masks = np.arange(1 << m)
    return ((masks[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)


def feasible_subsets(
    links: Sequence[Link],
    mode: str | PowerAssignment,
    params: ModelParams,
    margin: float = 0.0,
    tol: float = FEAS_TOL,
) -> np.ndarray:
    """Boolean vector over bitmasks 0 .. 2^m - 1 (bit i = link i)."""
    links = list(links)
    m = len(links)
    member = _masks_members(m)
    ok = np.ones(1 << m, dtype=bool)
    if m == 0:
        return ok
    if isinstance(mode, str) and mode == "arbitrary":
        bad_pair = _shares_node(links)
        F = normalized_interference(links, params)
        pair_clash = np.zeros(1 << m, dtype=bool)
        for i, j in zip(*np.nonzero(np.triu(bad_pair))):
            pair_clash |= member[:, i] & member[:, j]
        ok &= ~pair_clash
        sizes = member.sum(1)
        for k in range(2, m + 1):
            idx = np.flatnonzero((sizes == k) & ok)
            if len(idx) == 0:
                continue
            cols = np.nonzero(member[idx])[1].reshape(len(idx), k)
            sub = F[cols[:, :, None], cols[:, None, :]]
            rho = np.abs(np.linalg.eigvals(sub)).max(axis=1)
            ok[idx] = rho * (1.0 + margin) < 1.0
        return ok
    power = mode if isinstance(mode, PowerAssignment) else _named_power(mode, links, params)
    p = power.resolve(links, params)
    lengths = np.array([l.length for l in links])
    alone = p > params.beta * params.noise * lengths ** params.alpha
    for i in np.flatnonzero(~alone):
        ok &= ~member[:, i]
    live = np.flatnonzero(alone)
    if len(live):
        A = np.zeros((m, m))
        A[np.ix_(live, live)] = affectance_matrix([links[i] for i in live], power, params)
        incoming = member.astype(float) @ A
        ok &= ~((incoming > 1.0 + tol) & member).any(axis=1)
    clash = _same_sender(links)
    for i, j in zip(*np.nonzero(np.triu(clash))):
        ok &= ~(member[:, i] & member[:, j])
    return ok


def _named_power(mode: str, links, params: ModelParams) -> PowerAssignment:
    top = max((l.length for l in links), default=1.0)
    if mode in ("uniform", "mean", "linear"):
        return PowerAssignment.noise_safe(mode, params, top)
    raise ValueError(f"unknown power mode {mode!r}")


@dataclass
class MaxFeasible:
    size: int
    witness: list[int]


def brute_max_feasible(
    links: Sequence[Link],
    mode: str | PowerAssignment,
    params: ModelParams,
    budget: OracleBudget = OracleBudget(),
    margin: float = 0.0,
) -> MaxFeasible:
    """Largest feasible subset (lowest bitmask among the largest)."""
    links = list(links)
    if len(links) > budget.max_links:
        raise BudgetExceeded(f"{len(links)} links exceed the oracle budget of {budget.max_links}")
    ok = feasible_subsets(links, mode, params, margin)
    sizes = _masks_members(len(links)).sum(1)
    sizes = np.where(ok, sizes, -1)
    best = int(np.argmax(sizes))
    return MaxFeasible(int(sizes[best]), [i for i in range(len(links)) if best >> i & 1])


def brute_min_schedule(
    links: Sequence[Link],
    mode: str | PowerAssignment,
    params: ModelParams,
    budget: OracleBudget = OracleBudget(),
    margin: float = 0.0,
) -> Schedule:
    """Fewest feasible slots covering all links, by dynamic programming over subsets.

    For arbitrary power each slot gets powers from solving its linear SINR
    system directly.
    """
    links = list(links)
    m = len(links)
    if m > budget.max_schedule_links:
        raise BudgetExceeded(f"{m} links exceed the scheduling budget of {budget.max_schedule_links}")
    arbitrary = isinstance(mode, str) and mode == "arbitrary"
    power = None if arbitrary else (mode if isinstance(mode, PowerAssignment) else _named_power(mode, links, params))
    if m == 0:
        return Schedule([], [], power or PowerAssignment.explicit({}))
    ok = feasible_subsets(links, mode, params, margin)
    full = (1 << m) - 1
    INF = m + 1
    cost = [INF] * (1 << m)
    pick = [0] * (1 << m)
    cost[0] = 0
    for mask in range(1, full + 1):
        low = mask & -mask
        rest = mask ^ low
        sub = rest
        best, choice = INF, 0
        # enumerate subsets of mask that contain its lowest bit
        while True:
            s = sub | low
            if ok[s] and cost[mask ^ s] + 1 < best:
                best, choice = cost[mask ^ s] + 1, s
            if sub == 0:
                break
            sub = (sub - 1) & rest
        cost[mask], pick[mask] = best, choice
    if cost[full] > m:
        raise ValueError("some link is infeasible even alone")
    slots, mask = [], full
    while mask:
        s = pick[mask]
        slots.append([i for i in range(m) if s >> i & 1])
        mask ^= s
    slots.sort()
    if arbitrary:
        table = {}
        for group in slots:
            table.update(solve_powers([links[i] for i in group], params))
        power = PowerAssignment.explicit(table)
    return Schedule(links, slots, power)


def solve_powers(links: Sequence[Link], params: ModelParams) -> dict[tuple[int, int], float]:
    """Powers meeting SINR = beta*(1+slack) with equality, from one linear solve.

    Requires the set to be power-feasible. ``slack`` is a small safety factor
    below the feasibility limit.
    """
    links = list(links)
    rho = spectral_radius(links, params)
    if not rho < 1:
        raise ValueError("set is not power-feasible")
    slack = min(1e-6, (1.0 / rho - 1.0) / 2) if rho > 0 else 1e-6
    G = gain_matrix(links, params)
    g = np.diag(G).copy()
    t = params.beta * (1 + slack)
    A = np.diag(g) - t * (G - np.diag(g))
    P = np.linalg.solve(A, np.full(len(links), t * params.noise_ref))
    return {l.key: float(p) for l, p in zip(links, P)}
