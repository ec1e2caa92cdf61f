"""Rebuilding a bi-tree by repeated capacity selection.

Each iteration runs Init on the surviving nodes, keeps the low-degree part
T(M) of the resulting tree, and picks a feasible subset T' of it. T' is
scheduled in one new slot and its senders drop out; the receivers carry on
to the next iteration. Two selectors are offered:

* ``sample_feasible_mean``: every link fires once with a small probability
  at mean power and keeps itself if it and its acknowledgement got through.
* ``distr_cap``: one slot-pair per Init round. Links measure the affectance
  they suffer under linear power in both directions and keep themselves if
  both readings are small; the kept set then admits a power assignment,
  which ``assign_power`` finds by fixed-point iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import PowerContext, upsilon
from .channel import RngStream, decode_matrix, derive_seed
from .errors import IterationBudgetExceeded, NotConnected, NotPowerFeasible
from .init_tree import InitParams, run_init
from .model import (
    Instance,
    Link,
    ModelParams,
    PowerAssignment,
    affectance_matrix,
    dual_link,
    incoming_affectance,
)
from .scheduler import Schedule, mean_power_for
from .tree import BiTree, TreeLink, reverse_dissemination_schedule

log = logging.getLogger(__name__)

KEY_MEAN = 3
KEY_CAP = 4


@dataclass(frozen=True)
class CapacityParams:
    rho: float | None = None  # None: 160/p^2 from the Init probability
    gamma1: float = 4.0
    gamma2: float = 0.5
    tau: float = 0.2
    p_cap: float = 0.5
    upsilon_const: float = 1.0
    margin: float = 1.0
    delta_hat_arbitrary: float = 1 / 128
    max_retries: int = 3
    power_tol: float = 1e-6
    power_max_iter: int = 10_000

    def __post_init__(self):
        if self.rho is not None and not self.rho >= 1:
            raise ValueError("rho must be at least 1")
        if not 0 < self.gamma2 < 1:
            raise ValueError("gamma2 must be in (0, 1)")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.p_cap <= 0.5:
            raise ValueError("p_cap must be in (0, 1/2]")
        if not self.gamma1 > 0:
            raise ValueError("gamma1 must be positive")
        if not self.margin > 0:
            raise ValueError("margin must be positive")

    def degree_threshold(self, init: InitParams) -> float:
        return self.rho if self.rho is not None else 160.0 / init.p ** 2

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# T(M)
# ---------------------------------------------------------------------------

def extract_low_degree(tree: BiTree, rho: float) -> list[TreeLink]:
    """Uplinks whose two endpoints both have tree degree <= rho."""
    deg = tree.degrees()
    return [tl for tl in tree.uplinks.values() if deg[tl.sender] <= rho and deg[tl.receiver] <= rho]


@dataclass
class PhasePlan:
    """Indices of the input links grouped by the Init round that formed them."""

    phases: list[tuple[int, list[int]]]

    @classmethod
    def from_tree_links(cls, tls: Sequence[TreeLink]) -> "PhasePlan":
        by_round: dict[int, list[int]] = {}
        for i, tl in enumerate(tls):
            by_round.setdefault(tl.round, []).append(i)
        return cls(sorted(by_round.items()))

    @classmethod
    def by_length_class(cls, links: Sequence[Link]) -> "PhasePlan":
        """Phases from length classes [2^(r-1), 2^r), for link sets without Init history."""
        by_round: dict[int, list[int]] = {}
        for i, l in enumerate(links):
            r = max(1, int(math.floor(math.log2(l.length))) + 1)
            by_round.setdefault(r, []).append(i)
        return cls(sorted(by_round.items()))

    def covers(self, m: int) -> bool:
        return sorted(i for _, idx in self.phases for i in idx) == list(range(m))


@dataclass
class SelectionResult:
    selected: list[int]
    measured: dict[int, tuple[float, ...]] = field(default_factory=dict)
    phase_log: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.selected)


# ---------------------------------------------------------------------------
# Mean-power sampling
# ---------------------------------------------------------------------------

def _delivered(tx_xy, rx_xy, powers, tx_nodes, rx_nodes, params):
    d = np.sqrt(((tx_xy[:, None, :] - rx_xy[None, :, :]) ** 2).sum(-1))
    with np.errstate(divide="ignore"):
        recv = powers[:, None] * d ** (-params.alpha)
    best, sinr = decode_matrix(recv, params.noise, params.beta)
    ok = (best == np.arange(len(tx_nodes))) & ~np.isin(rx_nodes, tx_nodes)
    return ok, sinr


def sample_feasible_mean(
    links: Sequence[Link],
    ups: float,
    gamma1: float,
    params: ModelParams,
    seed: int,
    power: PowerAssignment | None = None,
) -> SelectionResult:
    """One slot-pair of mean-power sampling with probability 1/(4*gamma1*ups)."""
    links = list(links)
    m = len(links)
    if m == 0:
        return SelectionResult([])
    power = power or mean_power_for(max(l.length for l in links), params)
    q = 1.0 / (4.0 * gamma1 * ups)
    coins = RngStream(seed).uniforms((KEY_MEAN,), 0, m, 1)[:, 0]
    tx = np.flatnonzero(coins < q)
    res = SelectionResult([], phase_log=[{"probability": q, "transmitted": int(len(tx))}])
    if len(tx) == 0:
        return res
    pw = power.resolve(links, params)
    S = np.array([l.sender_pos for l in links], dtype=float)
    R = np.array([l.receiver_pos for l in links], dtype=float)
    snd = np.array([l.sender for l in links])
    rcv = np.array([l.receiver for l in links])
    ok, sinr = _delivered(S[tx], R[tx], pw[tx], snd[tx], rcv[tx], params)
    fwd = tx[ok]
    if len(fwd):
        ok2, sinr2 = _delivered(R[fwd], S[fwd], pw[fwd], rcv[fwd], snd[fwd], params)
        for k, i in enumerate(fwd):
            res.measured[int(i)] = (float(sinr[np.flatnonzero(tx == i)[0]]), float(sinr2[k]))
        res.selected = sorted(int(i) for i in fwd[ok2])
    return res


# ---------------------------------------------------------------------------
# Distr-Cap
# ---------------------------------------------------------------------------

def linear_power(params: ModelParams) -> PowerAssignment:
    """Linear power with scale 2*beta*N, so every link has c = 2*beta."""
    return PowerAssignment.noise_safe("linear", params, 1.0)


def distr_cap(
    links: Sequence[Link],
    phases: PhasePlan,
    cp: CapacityParams,
    params: ModelParams,
    seed: int,
) -> SelectionResult:
    """Two-slot-per-phase selection on linear power.

    Slot 1: the selected set and each phase link (with probability p_cap)
    transmit; a transmitting phase link passes if its incoming affectance is
    at most tau/4. Slot 2: duals of the selected set and each passing link's
    dual (with probability gamma2^2 * p_cap) transmit; a dual passes if its
    incoming affectance is at most gamma2 * tau / 4. Links passing both join.
    """
    links = list(links)
    m = len(links)
    res = SelectionResult([])
    if m == 0:
        return res
    if not phases.covers(m):
        raise ValueError("phase plan does not cover the link set")
    lin = linear_power(params)
    pw = lin.resolve(links, params)
    duals = [dual_link(l) for l in links]
    S = np.array([l.sender_pos for l in links], dtype=float)
    R = np.array([l.receiver_pos for l in links], dtype=float)
    snd = np.array([l.sender for l in links])
    rcv = np.array([l.receiver for l in links])
    rng = RngStream(seed)
    th1 = cp.tau / 4
    th2 = cp.gamma2 * cp.tau / 4
    q2 = cp.gamma2 ** 2 * cp.p_cap
    chosen: list[int] = []
    for k, (rnd, idx) in enumerate(phases.phases):
        idx = np.asarray(idx)
        coins = rng.uniforms((KEY_CAP, k), 0, m, 2)
        Q = idx[coins[idx, 0] < cp.p_cap]
        entry = {"phase": k, "round": rnd, "offered": len(idx), "slot1": int(len(Q))}
        if len(Q) == 0:
            entry.update(passed1=0, slot2=0, joined=0)
            res.phase_log.append(entry)
            continue
        tx = np.concatenate([np.asarray(chosen, dtype=int), Q])
        a1 = incoming_affectance(snd[tx], S[tx], pw[tx], [links[i] for i in Q], pw[Q], params)
        Qt = Q[a1 <= th1]
        Q2 = Qt[coins[Qt, 1] < q2]
        joined = np.zeros(0, dtype=int)
        if len(Q2):
            tx2 = np.concatenate([np.asarray(chosen, dtype=int), Q2])
            a2 = incoming_affectance(rcv[tx2], R[tx2], pw[tx2], [duals[i] for i in Q2], pw[Q2], params)
            joined = Q2[a2 <= th2]
            a1_of = dict(zip(Q.tolist(), a1.tolist()))
            for i, v in zip(Q2.tolist(), a2.tolist()):
                res.measured[i] = (a1_of[i], v)
        chosen.extend(joined.tolist())
        entry.update(passed1=int(len(Qt)), slot2=int(len(Q2)), joined=int(len(joined)))
        res.phase_log.append(entry)
    res.selected = sorted(chosen)
    return res


@dataclass
class KesselheimReport:
    ok: bool
    values: np.ndarray
    worst: int | None

    def __bool__(self):
        return self.ok


def kesselheim_check(
    links: Sequence[Link],
    tau: float,
    params: ModelParams,
    ctx: PowerContext | None = None,
    tol: float = 1e-9,
) -> KesselheimReport:
    """For every link l: a^L_P(l) + a^U_l(P) <= tau, P = links not longer than l.

    Linear power uses scale 2*beta*N; the uniform power defaults to the
    smallest noise-safe level for the longest link in the set.
    """
    links = list(links)
    m = len(links)
    if m == 0:
        return KesselheimReport(True, np.zeros(0), None)
    ctx = ctx or PowerContext.for_links(links, params)
    A_lin = affectance_matrix(links, PowerAssignment.linear(ctx.linear_scale), params)
    A_uni = affectance_matrix(links, PowerAssignment.uniform(ctx.uniform), params)
    keys = [l.order_key() for l in links]
    rank = np.argsort(np.argsort(np.array(keys, dtype=[("a", float), ("b", int), ("c", int)])))
    before = rank[:, None] < rank[None, :]  # before[i, j]: link i precedes link j
    vals = (A_lin * before).sum(axis=0) + (A_uni.T * before).sum(axis=0)
    worst = int(np.argmax(vals))
    ok = bool(vals[worst] <= tau * (1 + tol))
    return KesselheimReport(ok, vals, None if ok else worst)


# ---------------------------------------------------------------------------
# Power assignment
# ---------------------------------------------------------------------------

@dataclass
class PowerSolution:
    power: PowerAssignment
    iterations: int
    min_sinr: float


def assign_power(
    links: Sequence[Link],
    params: ModelParams,
    margin: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> PowerSolution:
    """Fixed-point power control: each receiver asks for SINR beta*(1+margin).

    Starting from the noise-only powers the iterates increase monotonically;
    they converge iff the normalised interference matrix scaled by
    beta*(1+margin)/beta has spectral radius below 1. Convergence is declared
    when the geometric tail bound on the remaining change drops below ``tol``
    (relative). Divergence past 1e12 times the starting level, or running out
    of iterations, raises NotPowerFeasible.
    """
    if not margin > 0:
        # iterates approach the fixed point from below, so a zero margin would
        # stop a hair short of beta
        raise ValueError("margin must be positive")
    links = list(links)
    m = len(links)
    if m == 0:
        return PowerSolution(PowerAssignment.explicit({}), 0, math.inf)
    nodes = [l.sender for l in links] + [l.receiver for l in links]
    if len(set(nodes)) != len(nodes):
        raise NotPowerFeasible("links share a node")
    S = np.array([l.sender_pos for l in links], dtype=float)
    R = np.array([l.receiver_pos for l in links], dtype=float)
    d = np.sqrt(((R[:, None, :] - S[None, :, :]) ** 2).sum(-1))
    G = d ** (-params.alpha)  # G[i, j]: gain from sender j at receiver i
    g = np.diag(G).copy()
    np.fill_diagonal(G, 0.0)
    t = params.beta * (1.0 + margin)
    nref = params.noise_ref
    P = t * nref / g
    start = P.max()
    prev_step = None
    for it in range(1, max_iter + 1):
        new = t * (nref + G @ P) / g
        step = np.max(np.abs(new - P) / new)
        P = new
        if not np.all(np.isfinite(P)) or P.max() > 1e12 * start:
            raise NotPowerFeasible(f"powers diverge after {it} iterations")
        if step == 0.0:
            break
        if prev_step is not None and prev_step > 0:
            ratio = step / prev_step
            if ratio < 1 and step * ratio / (1 - ratio) <= tol:
                break
        prev_step = step
    else:
        raise NotPowerFeasible(f"no convergence within {max_iter} iterations")
    interference = G @ P
    sinr = P * g / (params.noise + interference)
    if not np.all(sinr >= params.beta * (1 - 1e-9)):
        raise NotPowerFeasible("iteration stopped with a link below beta")
    table = {l.key: float(p) for l, p in zip(links, P)}
    return PowerSolution(PowerAssignment.explicit(table), it, float(sinr.min()))


# ---------------------------------------------------------------------------
# Outer loop
# ---------------------------------------------------------------------------

@dataclass
class IterationRecord:
    iteration: int
    active: int
    tm_size: int
    selected: int
    init_slots: int
    attempts: int
    power_failures: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CapacityResult:
    tree: BiTree
    schedule: Schedule
    iterations: list[IterationRecord]
    retries: int
    mode: str

    def __iter__(self):
        return iter((self.tree, self.schedule, self.iterations))

    @property
    def slots(self) -> int:
        return self.schedule.length

    def to_dict(self, params: ModelParams | None = None) -> dict:
        return {
            "tree": self.tree.to_dict(params),
            "schedule": self.schedule.to_dict(),
            "powers": [
                {"sender": s, "receiver": r, "power": p}
                for (s, r), p in sorted(self.tree.powers().table.items())
            ],
            "iterations": len(self.iterations),
            "retries": self.retries,
            "mode": self.mode,
            "log": [r.to_dict() for r in self.iterations],
        }


def iteration_cap(n: int, delta_hat: float) -> int:
    return int(math.ceil(10.0 / delta_hat * max(1.0, math.log2(max(n, 2)))))


def tree_via_capacity(
    instance: Instance,
    mode: str,
    init: InitParams,
    cp: CapacityParams,
    params: ModelParams,
    seed: int,
) -> CapacityResult:
    """Build a bi-tree whose aggregation schedule has one slot per non-empty selection."""
    if mode not in ("mean", "arbitrary"):
        raise ValueError(f"mode must be mean or arbitrary, got {mode!r}")
    n = instance.n
    ups = upsilon(n, instance.delta, cp.upsilon_const)
    delta_hat = 1.0 / (4.0 * ups) if mode == "mean" else cp.delta_hat_arbitrary
    cap = iteration_cap(n, delta_hat)
    rho = cp.degree_threshold(init)
    mean_pw = mean_power_for(instance.delta, params)
    alive = list(instance.ids)
    up: dict[int, TreeLink] = {}
    down_power: dict[int, float] = {}
    slots: list[list[Link]] = []
    records: list[IterationRecord] = []
    retries = 0
    it = 0
    while len(alive) > 1:
        if it >= cap:
            partial = BiTree(instance, -1, up, {})
            raise IterationBudgetExceeded(
                f"{len(alive)} nodes left after {cap} iterations", partial=partial
            )
        it += 1
        sub = instance.subset(alive)
        attempt = 0
        power_failures = 0
        while True:
            s = derive_seed(seed, it, attempt)
            try:
                res = run_init(sub, init, params, s)
                tm = extract_low_degree(res.tree, rho)
                tm_links = [res.tree.link(t) for t in tm]
                if mode == "mean":
                    sel = sample_feasible_mean(tm_links, ups, cp.gamma1, params, derive_seed(s, 1), mean_pw)
                    chosen = [tm_links[i] for i in sel.selected]
                    up_p = {l.key: mean_pw.power(l, params) for l in chosen}
                    dn_p = {dual_link(l).key: mean_pw.power(l, params) for l in chosen}
                else:
                    sel = distr_cap(
                        tm_links, PhasePlan.from_tree_links(tm), cp, params, derive_seed(s, 2)
                    )
                    chosen = [tm_links[i] for i in sel.selected]
                    sol = assign_power(chosen, params, cp.margin, cp.power_tol, cp.power_max_iter)
                    sol_d = assign_power(
                        [dual_link(l) for l in chosen], params, cp.margin, cp.power_tol, cp.power_max_iter
                    )
                    up_p, dn_p = sol.power.table, sol_d.power.table
                break
            except (NotPowerFeasible, NotConnected) as exc:
                power_failures += isinstance(exc, NotPowerFeasible)
                attempt += 1
                retries += 1
                log.info("iteration %d attempt %d failed: %s", it, attempt, exc)
                if attempt > cp.max_retries:
                    raise
        records.append(
            IterationRecord(it, len(alive), len(tm), len(chosen), res.slots, attempt + 1, power_failures)
        )
        if not chosen:
            continue
        slot = len(slots) + 1
        slots.append(chosen)
        for l in chosen:
            up[l.sender] = TreeLink(l.sender, l.receiver, slot, "up", up_p[l.key], it)
            down_power[l.sender] = dn_p[(l.receiver, l.sender)]
        gone = {l.sender for l in chosen}
        alive = [u for u in alive if u not in gone]
    root = alive[0]
    tree = reverse_dissemination_schedule(BiTree(instance, root, up, {}))
    tree = tree.with_downlinks(
        {c: TreeLink(t.sender, t.receiver, t.slot, "down", down_power[c], t.round) for c, t in tree.downlinks.items()}
    )
    flat = [l for group in slots for l in group]
    index, k = [], 0
    for group in slots:
        index.append(list(range(k, k + len(group))))
        k += len(group)
    power = PowerAssignment.explicit({tl.key: tl.power for tl in up.values()}) if mode == "arbitrary" else mean_pw
    return CapacityResult(tree, Schedule(flat, index, power, len(records)), records, retries, mode)
