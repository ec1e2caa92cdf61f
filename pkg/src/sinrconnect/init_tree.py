"""Distributed initial bi-tree construction (algorithm "Init").

Rounds r = 1..R handle link lengths in [2^(r-1), 2^r). Each round has
lambda1 * ceil(log2 n) slot-pairs. In a slot-pair every active node
broadcasts with probability p (else listens); a listener that decoded an
in-class broadcaster acknowledges with probability p; a broadcaster that
decodes an acknowledgement addressed to it joins the listener's subtree and
goes inactive.

``run_init`` is the vectorised engine used everywhere. ``InitAgent`` is the
same protocol written as a per-node state machine for ``run_protocol``; the
two consume identical coin flips, which the tests exploit.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .channel import Decode, Message, RngStream, SlotAction, SlotOutcome, Trace, decode_matrix
from .errors import NotConnected
from .model import Instance, ModelParams
from .tree import BiTree, TreeLink, restamp_dense, reverse_dissemination_schedule

KEY_INIT = 1


def theory_p_max(model: ModelParams) -> float:
    a, b = model.alpha, model.beta
    return 1.0 / (64.0 * (1.0 + 6.0 * b * 2.0 ** a / (a - 2.0)))


@dataclass(frozen=True)
class InitParams:
    p: float = 0.25
    lambda1: float = 64.0
    mode: str = "practical"

    def __post_init__(self):
        if self.mode not in ("theory", "practical"):
            raise ValueError(f"mode must be theory or practical, got {self.mode!r}")
        if not 0 < self.p <= 0.5:
            raise ValueError(f"p must be in (0, 1/2], got {self.p}")
        if not self.lambda1 > 0:
            raise ValueError("lambda1 must be positive")

    @classmethod
    def practical(cls, p: float = 0.25, lambda1: float = 64.0) -> "InitParams":
        return cls(p, lambda1, "practical")

    @classmethod
    def theory(cls, model: ModelParams, p: float | None = None) -> "InitParams":
        p_max = theory_p_max(model)
        p = p_max if p is None else p
        if p > p_max * (1 + 1e-12):
            raise ValueError(f"theory mode needs p <= {p_max:.6g}, got {p}")
        return cls(p, 80.0 / p ** 2, "theory")

    def check(self, model: ModelParams):
        if self.mode == "theory":
            p_max = theory_p_max(model)
            if self.p > p_max * (1 + 1e-12):
                raise ValueError(f"theory mode needs p <= {p_max:.6g}")
            if not math.isclose(self.lambda1, 80.0 / self.p ** 2, rel_tol=1e-9):
                raise ValueError("theory mode needs lambda1 = 80/p^2")

    def slot_pairs_per_round(self, n: int) -> int:
        return int(math.ceil(self.lambda1 * log2_ceil(n)))

    def to_dict(self) -> dict:
        return {"p": self.p, "lambda1": self.lambda1, "mode": self.mode}


def log2_ceil(n: int) -> int:
    return 0 if n <= 1 else int(math.ceil(math.log2(n)))


def num_rounds(delta: float, n: int) -> int:
    """Number of length classes [2^(r-1), 2^r) needed to cover [1, delta]."""
    if n < 2:
        return 0
    return max(1, int(math.floor(math.log2(delta))) + 1)


def class_bounds(r: int) -> tuple[float, float]:
    """Length class of round r. Round 1 also takes lengths a hair under 1."""
    return (0.0 if r == 1 else 2.0 ** (r - 1)), 2.0 ** r


def round_power(r: int, model: ModelParams) -> float:
    """2*beta*N*2^(r*alpha): keeps c(u, v) <= 2*beta for every length below 2^r."""
    if r < 1:
        raise ValueError("rounds start at 1")
    return 2.0 * model.beta * model.noise_ref * 2.0 ** (r * model.alpha)


def slot_bound(init: InitParams, n: int, delta: float) -> int:
    """Hard cap on Init's running time: 2 * lambda1 * ceil(log2 n) * ceil(log2 delta)."""
    return int(2 * math.ceil(init.lambda1 * log2_ceil(n)) * max(0, math.ceil(math.log2(max(delta, 1.0)))))


@dataclass
class RoundRecord:
    round: int
    active: int
    min_active_dist: float
    links_formed: int = 0
    stray_links: int = 0
    skipped: bool = False

    @property
    def distance_ok(self) -> bool:
        return self.min_active_dist >= 2.0 ** (self.round - 1) * (1 - 1e-9)


@dataclass
class RoundLog:
    rounds: list[RoundRecord] = field(default_factory=list)

    @property
    def distance_invariant_ok(self) -> bool:
        return all(r.distance_ok for r in self.rounds)

    @property
    def violations(self) -> list[RoundRecord]:
        return [r for r in self.rounds if not r.distance_ok]

    @property
    def stray_links(self) -> int:
        return sum(r.stray_links for r in self.rounds)


@dataclass(frozen=True)
class StoreEntry:
    sender: int
    receiver: int
    slot: int
    round: int


@dataclass
class InitResult:
    tree: BiTree
    trace: Trace | None
    log: RoundLog
    slots: int
    stores: dict[int, list[StoreEntry]] | None = None

    def __iter__(self):
        return iter((self.tree, self.trace, self.log))


@dataclass(frozen=True)
class FormedLink:
    child: int
    parent: int
    slot: int  # broadcast slot of the slot-pair
    round: int


def reconcile_stray_links(stores: dict[int, list[StoreEntry]]) -> tuple[list[FormedLink], int]:
    """Keep only links recorded by both endpoints.

    A listener stores a link as soon as it acknowledges, without knowing if
    the ack got through; the broadcaster stores it only on decoding the ack.
    Returns the formed uplinks (child = broadcaster) and the number of
    listener-side records dropped.
    """
    held = {u: {(e.sender, e.receiver, e.slot) for e in es} for u, es in stores.items()}
    formed, stray = [], 0
    for v, es in stores.items():
        for e in es:
            # uplink records carry the broadcast slot (odd; slot-pairs start at
            # odd slots) and are stored by the acknowledging parent v
            if e.receiver != v or e.slot % 2 == 0:
                continue
            u = e.sender
            if (u, v, e.slot) in held.get(u, ()):
                formed.append(FormedLink(u, v, e.slot, e.round))
            else:
                stray += 1
    formed.sort(key=lambda f: (f.slot, f.child))
    return formed, stray


def build_bitree(
    instance: Instance, formed: list[FormedLink], root: int, model: ModelParams
) -> BiTree:
    ranks = restamp_dense(TreeLink(f.child, f.parent, f.slot, "up", 1.0) for f in formed)
    up, down = {}, {}
    for f in formed:
        p = round_power(f.round, model)
        s = ranks[f.slot]
        up[f.child] = TreeLink(f.child, f.parent, s, "up", p, f.round)
        down[f.child] = TreeLink(f.parent, f.child, s, "down", p, f.round)
    return BiTree(instance, root, up, down)


def run_init(
    instance: Instance,
    init: InitParams,
    model: ModelParams,
    seed: int,
    *,
    record_trace: bool = False,
    fast_forward: bool = True,
) -> InitResult:
    """Run Init on ``instance`` (minimum distance >= 1).

    With ``fast_forward`` the engine skips the rest of a round as soon as no
    two active nodes are at a distance inside the round's length class; no
    link can form there, and the coin flips are keyed by slot so later rounds
    are unaffected. The returned slot count includes skipped slots.
    """
    init.check(model)
    n = instance.n
    ids = instance.ids
    if n >= 2 and instance.min_dist < 1 - 1e-12:
        raise ValueError("Init expects a normalised instance (minimum distance 1)")
    rng = RngStream(seed)
    trace = Trace() if record_trace else None
    log = RoundLog()
    stores: dict[int, list[StoreEntry]] = {u: [] for u in ids}
    if n <= 1:
        tree = BiTree(instance, ids[0], {}, {}) if n == 1 else None
        if tree is None:
            raise ValueError("empty instance")
        return InitResult(tree, trace, log, 0, stores)

    D = instance.dist
    with np.errstate(divide="ignore"):
        G = D ** (-model.alpha)
    np.fill_diagonal(G, 0.0)
    R = num_rounds(instance.delta, n)
    K = init.slot_pairs_per_round(n)
    p = init.p
    noise, beta = model.noise, model.beta
    active = np.ones(n, dtype=bool)
    n_active = n
    base = 0
    last_slot = 0
    done = False

    for r in range(1, R + 1):
        lo, hi = class_bounds(r)
        P = round_power(r, model)
        act = np.flatnonzero(active)
        sub = D[np.ix_(act, act)]
        off = sub[~np.eye(len(act), dtype=bool)]
        rec = RoundRecord(r, len(act), float(off.min()) if off.size else math.inf)
        log.rounds.append(rec)
        inclass = (D >= lo) & (D < hi)
        np.fill_diagonal(inclass, False)
        pending = inclass[:, active].sum(axis=1)
        if fast_forward and not pending[active].any():
            rec.skipped = True
            base += 2 * K
            continue
        for t in range(K):
            s1 = base + 2 * t + 1
            coins = rng.uniforms((KEY_INIT, r), t, n, 2)
            act = np.flatnonzero(active)
            bmask = coins[act, 0] < p
            B = act[bmask]
            L = act[~bmask]
            best, _ = decode_matrix(P * G[np.ix_(B, L)], noise, beta)
            if trace is not None:
                out = SlotOutcome(
                    transmitters=[(ids[u], P, Message(ids[u], instance.pos(ids[u]))) for u in B]
                )
                for j in np.flatnonzero(best >= 0):
                    u = B[best[j]]
                    out.decoded[ids[L[j]]] = Decode(Message(ids[u], instance.pos(ids[u])), 0.0)
                trace.append(s1, out)
            got = np.flatnonzero(best >= 0)
            ackers = L[got]
            targets = B[best[got]]
            dd = D[targets, ackers]
            keep = (dd >= lo) & (dd < hi) & (coins[ackers, 1] < p)
            ackers, targets = ackers[keep], targets[keep]
            formed_now = []
            if len(ackers):
                for v, u in zip(ackers, targets):
                    stores[ids[v]].append(StoreEntry(ids[u], ids[v], s1, r))
                    stores[ids[v]].append(StoreEntry(ids[v], ids[u], s1 + 1, r))
                best2, _ = decode_matrix(P * G[np.ix_(ackers, B)], noise, beta)
                for j in np.flatnonzero(best2 >= 0):
                    b = B[j]
                    a = best2[j]
                    if targets[a] == b:
                        formed_now.append((b, ackers[a]))
                if trace is not None:
                    out = SlotOutcome(
                        transmitters=[
                            (ids[v], P, Message(ids[v], instance.pos(ids[v]), "ack", ids[u]))
                            for v, u in zip(ackers, targets)
                        ]
                    )
                    for j in np.flatnonzero(best2 >= 0):
                        v, u = ackers[best2[j]], targets[best2[j]]
                        out.decoded[ids[B[j]]] = Decode(
                            Message(ids[v], instance.pos(ids[v]), "ack", ids[u]), 0.0
                        )
                    trace.append(s1 + 1, out)
            elif trace is not None:
                trace.append(s1 + 1, SlotOutcome())
            if formed_now:
                for b, v in formed_now:
                    stores[ids[b]].append(StoreEntry(ids[b], ids[v], s1, r))
                    stores[ids[b]].append(StoreEntry(ids[v], ids[b], s1 + 1, r))
                    active[b] = False
                    pending -= inclass[:, b]
                n_active -= len(formed_now)
                rec.links_formed += len(formed_now)
                if n_active == 1:
                    last_slot = s1 + 1
                    done = True
                    break
                if fast_forward and not pending[active].any():
                    break
        if done:
            break
        base += 2 * K
        last_slot = base

    formed, stray = reconcile_stray_links(stores)
    per_round = Counter(
        e.round for u, es in stores.items() for e in es if e.receiver == u and e.slot % 2 == 1
    )
    kept = Counter(f.round for f in formed)
    for rec in log.rounds:
        rec.stray_links = per_round.get(rec.round, 0) - kept.get(rec.round, 0)
    if n_active > 1:
        partial = build_bitree(instance, formed, -1, model)
        raise NotConnected(
            f"{n_active} nodes still active after {R} rounds",
            partial=InitResult(partial, trace, log, last_slot, stores),
        )
    root = ids[int(np.flatnonzero(active)[0])]
    tree = reverse_dissemination_schedule(build_bitree(instance, formed, root, model))
    return InitResult(tree, trace, log, last_slot, stores)


class InitAgent:
    """One node's Init state machine for ``run_protocol``."""

    def __init__(self, node: int, index: int, n: int, delta: float, init: InitParams, model: ModelParams, pos):
        self.node = node
        self.index = index
        self.n = n
        self.init = init
        self.model = model
        self.pos = pos
        self.K = init.slot_pairs_per_round(n)
        self.R = num_rounds(delta, n)
        self.total = 2 * self.K * self.R
        self.active = True
        self.broadcaster = False
        self.store: list[StoreEntry] = []
        self.done = self.total == 0

    def _where(self, slot: int):
        r, within = divmod(slot - 1, 2 * self.K)
        t, half = divmod(within, 2)
        return r + 1, t, half

    def step(self, slot: int, rng: RngStream) -> SlotAction:
        if slot > self.total or not self.active:
            return SlotAction.idle(self.node)
        r, t, half = self._where(slot)
        power = round_power(r, self.model)
        coins = rng.uniforms((KEY_INIT, r), t, self.n, 2)[self.index]
        if half == 0:
            self.broadcaster = coins[0] < self.init.p
            self._heard_broadcast = None
            if self.broadcaster:
                return SlotAction.transmit(self.node, Message(self.node, self.pos), power)
            return SlotAction.listen(self.node)
        if self.broadcaster:
            return SlotAction.listen(self.node)
        m = self._heard_broadcast
        if m is not None and coins[1] < self.init.p:
            d = math.dist(self.pos, m.sender_pos)
            lo, hi = class_bounds(r)
            if lo <= d < hi:
                self.store.append(StoreEntry(m.sender, self.node, slot - 1, r))
                self.store.append(StoreEntry(self.node, m.sender, slot, r))
                return SlotAction.transmit(
                    self.node, Message(self.node, self.pos, "ack", m.sender), power
                )
        return SlotAction.idle(self.node)

    def receive(self, slot: int, heard: Decode | None):
        if slot <= self.total and self.active:
            r, _t, half = self._where(slot)
            if half == 0:
                self._heard_broadcast = heard.message if heard is not None else None
            elif self.broadcaster and heard is not None:
                m = heard.message
                if m.tag == "ack" and m.target == self.node:
                    self.store.append(StoreEntry(self.node, m.sender, slot - 1, r))
                    self.store.append(StoreEntry(m.sender, self.node, slot, r))
                    self.active = False
        if slot >= self.total:
            self.done = True


def init_agents(instance: Instance, init: InitParams, model: ModelParams) -> list[InitAgent]:
    return [
        InitAgent(u, i, instance.n, instance.delta, init, model, instance.pos(u))
        for i, u in enumerate(instance.ids)
    ]


def tree_from_agents(instance: Instance, agents: list[InitAgent], model: ModelParams) -> BiTree:
    stores = {a.node: a.store for a in agents}
    formed, _ = reconcile_stray_links(stores)
    still = [a.node for a in agents if a.active]
    if len(still) != 1:
        raise NotConnected(f"{len(still)} nodes still active")
    return reverse_dissemination_schedule(build_bitree(instance, formed, still[0], model))


@dataclass
class DegreeStats:
    degrees: dict[int, int]
    histogram: dict[int, int]
    max_degree: int

    def exceedance(self) -> list[tuple[int, float]]:
        """Fraction of nodes with degree >= d, for d = 0..max_degree."""
        n = len(self.degrees)
        vals = np.array(sorted(self.degrees.values()))
        return [(d, float((vals >= d).sum()) / n) for d in range(self.max_degree + 1)]

    @staticmethod
    def tail_bound(d: float, p: float) -> float:
        return math.exp(-p * p * d / 8.0)


def degree_stats(tree: BiTree) -> DegreeStats:
    deg = tree.degrees()
    hist = Counter(deg.values())
    return DegreeStats(deg, dict(sorted(hist.items())), max(deg.values(), default=0))
