"""Sampling scheduler for a fixed link set under mean power, and schedule checks.

Every unassigned link transmits with its own probability; a link whose
message (and, when acks are modelled, whose dual's reply) is decoded takes
the current slot. Failed senders halve their probability down to a floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import RngStream, decode_matrix
from .errors import SlotBudgetExceeded
from .model import FEAS_TOL, Link, ModelParams, PowerAssignment, is_feasible
from .tree import BiTree

KEY_SCHED = 2


@dataclass(frozen=True)
class SchedulerParams:
    q0: float = 1 / 8
    backoff: float = 0.5
    max_slots: int = 1_000_000
    ack_modeled: bool = True

    def __post_init__(self):
        if not 0 < self.q0 <= 1:
            raise ValueError("q0 must be in (0, 1]")
        if not 0 < self.backoff <= 1:
            raise ValueError("backoff must be in (0, 1]")
        if self.max_slots <= 0:
            raise ValueError("max_slots must be positive")

    @property
    def floor(self) -> float:
        return self.q0 / 16

    def to_dict(self) -> dict:
        return {
            "q0": self.q0,
            "backoff": self.backoff,
            "max_slots": self.max_slots,
            "ack_modeled": self.ack_modeled,
        }


@dataclass
class Schedule:
    """Links plus a partition of their indices into slots."""

    links: list[Link]
    slots: list[list[int]]
    power: PowerAssignment
    simulated_slots: int = 0

    def __len__(self):
        return len(self.slots)

    @property
    def length(self) -> int:
        return len(self.slots)

    def slot_links(self, s: int) -> list[Link]:
        return [self.links[i] for i in self.slots[s]]

    def to_dict(self) -> dict:
        """``slots`` hold indices into ``links``; ``power`` names the power kind."""
        return {
            "slots": [list(map(int, s)) for s in self.slots],
            "links": [[l.sender, l.receiver] for l in self.links],
            "power": self.power.kind,
            "power_detail": self.power.to_json(),
        }

    @classmethod
    def from_dict(cls, d: dict, instance) -> "Schedule":
        links = [instance.link(int(s), int(r)) for s, r in d["links"]]
        return cls(links, [list(map(int, g)) for g in d["slots"]], PowerAssignment.from_json(d["power_detail"]))


@dataclass
class ScheduleCheck:
    ok: bool
    slot: int | None = None
    reason: str | None = None
    notes: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


def verify_schedule(schedule: Schedule, params: ModelParams, tol: float = FEAS_TOL) -> ScheduleCheck:
    """Every link used exactly once and every slot feasible under the schedule's powers."""
    m = len(schedule.links)
    used = sorted(i for s in schedule.slots for i in s)
    if used != list(range(m)):
        missing = sorted(set(range(m)) - set(used))
        return ScheduleCheck(False, None, f"links not scheduled exactly once (missing {missing[:5]})")
    for k, _ in enumerate(schedule.slots):
        fr = is_feasible(schedule.slot_links(k), schedule.power, params, tol)
        if not fr:
            return ScheduleCheck(False, k, fr.reason)
    return ScheduleCheck(True)


def mean_power_for(instance_delta: float, params: ModelParams) -> PowerAssignment:
    """Mean power with scale 2*beta*N*delta^(alpha/2): noise-safe for all lengths up to delta."""
    return PowerAssignment.noise_safe("mean", params, instance_delta)


def schedule_links(
    links: Sequence[Link],
    power: PowerAssignment,
    sp: SchedulerParams,
    params: ModelParams,
    seed: int,
) -> Schedule:
    links = list(links)
    m = len(links)
    if m == 0:
        return Schedule([], [], power)
    s_xy = np.array([l.sender_pos for l in links], dtype=float)
    r_xy = np.array([l.receiver_pos for l in links], dtype=float)
    senders = np.array([l.sender for l in links])
    receivers = np.array([l.receiver for l in links])
    pw = power.resolve(links, params)
    q = np.full(m, sp.q0)
    slot_of = np.full(m, -1)
    rng = RngStream(seed)
    order = np.arange(m)
    sim = 0
    while (slot_of < 0).any():
        if sim >= sp.max_slots:
            raise SlotBudgetExceeded(
                f"{int((slot_of < 0).sum())} links unassigned after {sp.max_slots} slots",
                partial=slot_of.copy(),
            )
        coins = rng.uniforms((KEY_SCHED,), sim, m, 1)[:, 0]
        sim += 1
        want = order[(slot_of < 0) & (coins < q)]
        if len(want) == 0:
            continue
        # one message per sender per slot: the first link in order goes, the rest wait
        _, first = np.unique(senders[want], return_index=True)
        tx = want[np.sort(first)]
        ok = _success(s_xy, r_xy, pw, tx, senders, receivers, params)
        if sp.ack_modeled and ok.any():
            back = tx[ok]
            ok_back = _success(r_xy, s_xy, pw, back, receivers, senders, params)
            ok[np.flatnonzero(ok)[~ok_back]] = False
        won = tx[ok]
        slot_of[won] = sim
        lost = tx[~ok]
        q[lost] = np.maximum(q[lost] * sp.backoff, sp.floor)
    used = sorted(set(slot_of.tolist()))
    slots = [sorted(np.flatnonzero(slot_of == s).tolist()) for s in used]
    return Schedule(links, slots, power, sim)


def _success(s_xy, r_xy, pw, tx, senders, receivers, params) -> np.ndarray:
    """Which of the concurrently transmitting links ``tx`` get through."""
    s = s_xy[tx]
    r = r_xy[tx]
    d = np.sqrt(((s[:, None, :] - r[None, :, :]) ** 2).sum(-1))
    with np.errstate(divide="ignore"):
        recv = pw[tx][:, None] * d ** (-params.alpha)
    best, _ = decode_matrix(recv, params.noise, params.beta)
    ok = best == np.arange(len(tx))
    busy = np.isin(receivers[tx], senders[tx])
    return ok & ~busy


def reschedule_mean(
    tree: BiTree,
    sp: SchedulerParams,
    params: ModelParams,
    seed: int,
    power: PowerAssignment | None = None,
) -> Schedule:
    """Schedule all tree links (uplinks then downlinks) under mean power."""
    power = power or mean_power_for(tree.instance.delta, params)
    links = [tree.link(t) for t in tree.tree_links()]
    return schedule_links(links, power, sp, params, seed)

