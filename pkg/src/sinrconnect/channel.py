"""Deterministic slotted radio channel.

Given what every node does in a slot, ``resolve_slot`` works out who decodes
what. ``run_protocol`` drives per-node agents slot by slot and records a
``Trace``. Randomness comes from ``RngStream``, whose draws depend only on
(seed, key, step, node index) so that skipping or instrumenting slots never
shifts anybody's coin flips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol

import numpy as np

from .errors import SlotBudgetExceeded
from .model import Instance, ModelParams


@dataclass(frozen=True)
class Message:
    sender: int
    sender_pos: tuple[float, float]
    tag: str = "broadcast"  # broadcast | ack | data
    target: int | None = None
    payload: object = None


@dataclass(frozen=True)
class SlotAction:
    node: int
    kind: str = "idle"  # transmit | listen | idle
    message: Message | None = None
    power: float = 0.0

    @classmethod
    def transmit(cls, node, message, power):
        return cls(node, "transmit", message, float(power))

    @classmethod
    def listen(cls, node):
        return cls(node, "listen")

    @classmethod
    def idle(cls, node):
        return cls(node, "idle")


@dataclass(frozen=True)
class Decode:
    message: Message
    sinr: float


@dataclass
class SlotOutcome:
    decoded: dict[int, Decode] = field(default_factory=dict)
    transmitters: list[tuple[int, float, Message]] = field(default_factory=list)


class RngStream:
    """Seeded source of per-node uniforms.

    ``uniforms(key, step, n, width)`` returns an (n, width) array whose row i
    belongs to the i-th node (in id order) at ``step`` under ``key``. Blocks
    of steps are generated together and cached.
    """

    CHUNK = 32

    def __init__(self, seed: int):
        self.seed = int(seed) % (1 << 64)
        self._cache: dict = {}

    def uniforms(self, key: tuple[int, ...], step: int, n: int, width: int = 1) -> np.ndarray:
        chunk, off = divmod(int(step), self.CHUNK)
        ck = (tuple(key), chunk, n, width)
        block = self._cache.get(ck)
        if block is None:
            rng = np.random.default_rng([self.seed, *key, chunk])
            block = rng.random((self.CHUNK, n, width))
            if len(self._cache) > 16:
                self._cache.clear()
            self._cache[ck] = block
        return block[off]


def derive_seed(seed: int, *key: int) -> int:
    """Child seed for a sub-run, deterministic in (seed, key)."""
    ss = np.random.SeedSequence([int(seed) % (1 << 64), *key])
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def decode_matrix(received: np.ndarray, noise: float, beta: float):
    """Decode rule on a (transmitters x listeners) received-power matrix.

    Each listener decodes its strongest transmitter (lowest row on ties) if
    that transmitter's SINR reaches beta. Returns (row index or -1, sinr).
    """
    n_rx = received.shape[1]
    if received.shape[0] == 0 or n_rx == 0:
        return np.full(n_rx, -1, dtype=int), np.zeros(n_rx)
    best = received.argmax(axis=0)
    cols = np.arange(n_rx)
    signal = received[best, cols]
    total = received.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # a co-located transmitter gives an infinite signal; such columns end up 0
        interference = np.maximum(total - signal, 0.0)
        denom = noise + interference
        sinr = np.where(denom > 0, signal / np.where(denom > 0, denom, 1.0), np.inf)
    sinr = np.where(np.isfinite(signal), sinr, 0.0)
    ok = sinr >= beta
    return np.where(ok, best, -1), sinr


def path_gain(tx_pos: np.ndarray, rx_pos: np.ndarray, alpha: float) -> np.ndarray:
    d = np.sqrt(((tx_pos[:, None, :] - rx_pos[None, :, :]) ** 2).sum(axis=-1))
    with np.errstate(divide="ignore"):
        g = d ** (-alpha)
    return g


def resolve_slot(
    actions: Iterable[SlotAction], instance: Instance, params: ModelParams
) -> SlotOutcome:
    """Compute every listener's decode for one slot.

    Half-duplex: a transmitting node decodes nothing in the same slot.
    """
    seen = set()
    txs, listeners = [], []
    for a in actions:
        if a.node in seen:
            raise ValueError(f"node {a.node} has more than one action in a slot")
        seen.add(a.node)
        if a.kind == "transmit":
            txs.append(a)
        elif a.kind == "listen":
            listeners.append(a.node)
    txs.sort(key=lambda a: a.node)
    listeners.sort()
    out = SlotOutcome(transmitters=[(a.node, a.power, a.message) for a in txs])
    if not txs or not listeners:
        return out
    tx_pos = np.array([instance.pos(a.node) for a in txs])
    rx_pos = np.array([instance.pos(v) for v in listeners])
    power = np.array([a.power for a in txs])
    received = power[:, None] * path_gain(tx_pos, rx_pos, params.alpha)
    best, sinr = decode_matrix(received, params.noise, params.beta)
    for j, v in enumerate(listeners):
        if best[j] >= 0:
            out.decoded[v] = Decode(txs[best[j]].message, float(sinr[j]))
    return out


# --------------------------------------------------------------------------
# Traces
# --------------------------------------------------------------------------

@dataclass
class SlotRecord:
    slot: int
    transmitters: list[tuple[int, float, str, int | None]]
    decodes: list[tuple[int, int, str, int | None]]

    def to_json(self) -> dict:
        return {
            "slot": self.slot,
            "transmitters": [
                {"id": u, "power": p, "tag": tag, **({"target": t} if t is not None else {})}
                for u, p, tag, t in self.transmitters
            ],
            "decodes": [
                {"listener": v, "sender": u, "tag": tag, **({"target": t} if t is not None else {})}
                for v, u, tag, t in self.decodes
            ],
        }


@dataclass
class Trace:
    records: list[SlotRecord] = field(default_factory=list)
    slots: int = 0

    def __len__(self):
        return len(self.records)

    def append(self, slot: int, outcome: SlotOutcome):
        txs = [(u, p, m.tag, m.target) for u, p, m in outcome.transmitters]
        decs = [
            (v, d.message.sender, d.message.tag, d.message.target)
            for v, d in sorted(outcome.decoded.items())
        ]
        self.records.append(SlotRecord(slot, txs, decs))
        self.slots = max(self.slots, slot)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        t = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            t.records.append(
                SlotRecord(
                    d["slot"],
                    [(x["id"], x["power"], x["tag"], x.get("target")) for x in d["transmitters"]],
                    [(x["listener"], x["sender"], x["tag"], x.get("target")) for x in d["decodes"]],
                )
            )
            t.slots = max(t.slots, d["slot"])
        return t


def check_decode_soundness(trace: Trace, instance: Instance, params: ModelParams, tol=1e-9):
    """Re-derive every recorded decode from the transmitter list.

    Returns a list of (slot, listener, problem) tuples; empty when sound.
    """
    problems = []
    for rec in trace.records:
        tx_nodes = {u for u, *_ in rec.transmitters}
        for v, u, _tag, _t in rec.decodes:
            if v in tx_nodes:
                problems.append((rec.slot, v, "decoded while transmitting"))
                continue
            vx, vy = instance.pos(v)
            signal, interference = 0.0, 0.0
            for w, p, *_ in rec.transmitters:
                wx, wy = instance.pos(w)
                g = p / ((wx - vx) ** 2 + (wy - vy) ** 2) ** (params.alpha / 2)
                if w == u:
                    signal = g
                else:
                    interference += g
            denom = params.noise + interference
            ratio = np.inf if denom == 0 else signal / denom
            if ratio < params.beta * (1 - tol):
                problems.append((rec.slot, v, f"sinr {ratio:.6g} < beta"))
        seen = set()
        for v, *_ in rec.decodes:
            if v in seen:
                problems.append((rec.slot, v, "two decodes in one slot"))
            seen.add(v)
    return problems


# --------------------------------------------------------------------------
# Protocol harness
# --------------------------------------------------------------------------

class Agent(Protocol):
    """A node's protocol logic.

    ``step`` chooses the node's action for a slot; ``receive`` then reports
    what the node decoded in that slot (None if nothing). The harness stops
    once every agent reports ``done``.
    """

    node: int
    done: bool

    def step(self, slot: int, rng: RngStream) -> SlotAction:
        ...

    def receive(self, slot: int, heard: Decode | None) -> None:
        ...


def run_protocol(
    agents: Mapping[int, Agent] | Iterable[Agent],
    instance: Instance,
    params: ModelParams,
    seed: int,
    max_slots: int,
) -> Trace:
    """Drive agents slot by slot until all are done.

    Raises SlotBudgetExceeded (carrying the trace) if ``max_slots`` runs out
    first.
    """
    if max_slots <= 0:
        raise ValueError("max_slots must be positive")
    if not isinstance(agents, Mapping):
        agents = {a.node: a for a in agents}
    order = sorted(agents)
    rng = RngStream(seed)
    trace = Trace()
    slot = 0
    while not all(agents[u].done for u in order):
        if slot >= max_slots:
            raise SlotBudgetExceeded(f"protocol still running after {max_slots} slots", trace)
        slot += 1
        actions = [agents[u].step(slot, rng) for u in order]
        out = resolve_slot(actions, instance, params)
        for u in order:
            agents[u].receive(slot, out.decoded.get(u))
        trace.append(slot, out)
    return trace
