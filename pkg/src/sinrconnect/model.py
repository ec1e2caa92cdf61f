"""Geometry, links, power assignments, affectance and feasibility.

Every other module goes through these functions when it needs to know
whether a set of simultaneous transmissions works under the SINR model.
Two equivalent views are provided and kept separate on purpose:

* ``sinr_ratio`` evaluates the physical ratio signal / (noise + interference);
* ``affectance`` / ``is_feasible`` use the normalised, capped affectance form,
  where a set is feasible iff each link's incoming affectance is at most 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import NoiseDominated

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 3.0
    beta: float = 1.0
    noise: float = 1.0
    epsilon: float = 0.1

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError(f"alpha must be > 2, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.noise >= 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    @property
    def cap(self) -> float:
        return 1.0 + self.epsilon

    @property
    def noise_ref(self) -> float:
        """Noise level used to scale powers; 1 when the model is noiseless."""
        return self.noise if self.noise > 0 else 1.0

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "noise": self.noise, "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "ModelParams":
        d = dict(d or {})
        return cls(**{k: float(d[k]) for k in ("alpha", "beta", "noise", "epsilon") if k in d})


class Instance:
    """Immutable planar point set keyed by integer node id.

    Nodes are stored sorted by id; ``index(id)`` gives the row in ``xy``.
    """

    def __init__(self, ids: Iterable[int], xy):
        ids = [int(i) for i in ids]
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if len(ids) != len(xy):
            raise ValueError("ids and coordinates differ in length")
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        order = np.argsort(ids, kind="stable")
        self.ids: tuple[int, ...] = tuple(ids[i] for i in order)
        self.xy = xy[order].copy()
        self.xy.setflags(write=False)
        self._index = {u: i for i, u in enumerate(self.ids)}
        self._dist = None

    def __len__(self):
        return len(self.ids)

    @property
    def n(self) -> int:
        return len(self.ids)

    def __repr__(self):
        return f"Instance(n={self.n}, min_dist={self.min_dist:.4g}, delta={self.delta:.4g})"

    def __eq__(self, other):
        return (
            isinstance(other, Instance)
            and self.ids == other.ids
            and np.array_equal(self.xy, other.xy)
        )

    def __hash__(self):
        return hash((self.ids, self.xy.tobytes()))

    def index(self, node: int) -> int:
        return self._index[node]

    def __contains__(self, node) -> bool:
        return node in self._index

    def pos(self, node: int) -> tuple[float, float]:
        x, y = self.xy[self._index[node]]
        return (float(x), float(y))

    @property
    def dist(self) -> np.ndarray:
        """Pairwise distance matrix (cached, read-only)."""
        if self._dist is None:
            diff = self.xy[:, None, :] - self.xy[None, :, :]
            d = np.sqrt((diff ** 2).sum(axis=-1))
            d.setflags(write=False)
            self._dist = d
        return self._dist

    def d(self, u: int, v: int) -> float:
        return float(self.dist[self._index[u], self._index[v]])

    @property
    def min_dist(self) -> float:
        if self.n < 2:
            return 1.0
        d = self.dist + np.diag(np.full(self.n, np.inf))
        return float(d.min())

    @property
    def delta(self) -> float:
        """Largest pairwise distance; 1 by convention for a single node."""
        if self.n < 2:
            return 1.0
        return float(self.dist.max())

    def normalized(self) -> "Instance":
        """Rescale so that the minimum pairwise distance is exactly 1."""
        if self.n < 2:
            return Instance(self.ids, self.xy)
        md = self.min_dist
        if md <= 0:
            raise ValueError("instance has coincident points")
        xy = self.xy / md
        out = Instance(self.ids, xy)
        # division can land one ulp below 1; nudge the scale up until it doesn't
        k = 1
        while out.min_dist < 1.0:
            out = Instance(self.ids, xy * (1.0 + k * 2.0 ** -52))
            k *= 2
        return out

    def subset(self, nodes: Iterable[int]) -> "Instance":
        idx = [self._index[u] for u in nodes]
        return Instance([self.ids[i] for i in idx], self.xy[idx])

    def link(self, u: int, v: int) -> "Link":
        return Link(u, v, self.pos(u), self.pos(v))

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": u, "x": float(x), "y": float(y)} for u, (x, y) in zip(self.ids, self.xy)
            ]
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Instance":
        nodes = d["nodes"]
        return cls([nd["id"] for nd in nodes], [(nd["x"], nd["y"]) for nd in nodes])


@dataclass(frozen=True)
class Link:
    """Directed sender -> receiver pair with endpoint coordinates."""

    sender: int
    receiver: int
    sender_pos: tuple[float, float] = field(compare=False)
    receiver_pos: tuple[float, float] = field(compare=False)

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError("sender and receiver must differ")
        if self.length <= 0:
            raise ValueError(f"link {self.sender}->{self.receiver} has zero length")

    @property
    def length(self) -> float:
        return math.dist(self.sender_pos, self.receiver_pos)

    @property
    def key(self) -> tuple[int, int]:
        return (self.sender, self.receiver)

    def order_key(self) -> tuple[float, int, int]:
        """Global ascending-length order, ties broken by (sender, receiver)."""
        return (self.length, self.sender, self.receiver)

    def __repr__(self):
        return f"Link({self.sender}->{self.receiver}, len={self.length:.4g})"


def dual_link(link: Link) -> Link:
    return Link(link.receiver, link.sender, link.receiver_pos, link.sender_pos)


class LinkSet(Sequence):
    """Ordered, immutable collection of links."""

    def __init__(self, links: Iterable[Link] = ()):
        self.links: tuple[Link, ...] = tuple(links)

    def __getitem__(self, i):
        return self.links[i]

    def __len__(self):
        return len(self.links)

    def __iter__(self) -> Iterator[Link]:
        return iter(self.links)

    def __eq__(self, other):
        if isinstance(other, LinkSet):
            return self.links == other.links
        return NotImplemented

    def __hash__(self):
        return hash(self.links)

    def __repr__(self):
        return f"LinkSet({list(self.links)!r})"

    @property
    def senders(self) -> frozenset[int]:
        return frozenset(l.sender for l in self.links)

    @property
    def receivers(self) -> frozenset[int]:
        return frozenset(l.receiver for l in self.links)

    def degree(self, node: int) -> int:
        return sum(1 for l in self.links if node in (l.sender, l.receiver))

    def degrees(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for l in self.links:
            out[l.sender] = out.get(l.sender, 0) + 1
            out[l.receiver] = out.get(l.receiver, 0) + 1
        return out

    def sorted(self) -> "LinkSet":
        return LinkSet(sorted(self.links, key=Link.order_key))

    def lengths(self) -> np.ndarray:
        return np.array([l.length for l in self.links], dtype=float)


def dual_set(links: Iterable[Link]) -> LinkSet:
    return LinkSet(dual_link(l) for l in links)


# --------------------------------------------------------------------------
# Power assignments
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerAssignment:
    """Per-link transmit power.

    ``uniform`` uses ``scale`` as the common power; ``mean`` resolves to
    ``scale * d**(alpha/2)`` and ``linear`` to ``scale * d**alpha``;
    ``explicit`` looks the link up in ``table`` keyed by (sender, receiver).
    """

    kind: str
    scale: float = 1.0
    table: Mapping[tuple[int, int], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("uniform", "mean", "linear", "explicit"):
            raise ValueError(f"unknown power kind {self.kind!r}")
        if self.kind == "explicit":
            if self.table is None:
                raise ValueError("explicit power assignment needs a table")
            if any(not p > 0 for p in self.table.values()):
                raise ValueError("explicit powers must be strictly positive")
        elif not self.scale > 0:
            raise ValueError("power scale must be strictly positive")

    @classmethod
    def uniform(cls, power: float) -> "PowerAssignment":
        return cls("uniform", float(power))

    @classmethod
    def mean(cls, scale: float = 1.0) -> "PowerAssignment":
        return cls("mean", float(scale))

    @classmethod
    def linear(cls, scale: float = 1.0) -> "PowerAssignment":
        return cls("linear", float(scale))

    @classmethod
    def explicit(cls, table: Mapping[tuple[int, int], float]) -> "PowerAssignment":
        return cls("explicit", 1.0, {tuple(k): float(v) for k, v in table.items()})

    @classmethod
    def noise_safe(cls, kind: str, params: ModelParams, max_length: float) -> "PowerAssignment":
        """Oblivious assignment scaled so c(u, v) <= 2*beta for links up to ``max_length``."""
        base = 2.0 * params.beta * params.noise_ref
        max_length = max(float(max_length), 1.0)
        if kind == "uniform":
            return cls.uniform(base * max_length ** params.alpha)
        if kind == "mean":
            return cls.mean(base * max_length ** (params.alpha / 2.0))
        if kind == "linear":
            return cls.linear(base)
        raise ValueError(f"no noise-safe form for {kind!r}")

    def power(self, link: Link, params: ModelParams) -> float:
        if self.kind == "uniform":
            return self.scale
        if self.kind == "mean":
            return self.scale * link.length ** (params.alpha / 2.0)
        if self.kind == "linear":
            return self.scale * link.length ** params.alpha
        try:
            return self.table[link.key]
        except KeyError:
            raise KeyError(f"no explicit power for link {link.key}") from None

    def resolve(self, links: Iterable[Link], params: ModelParams) -> np.ndarray:
        return np.array([self.power(l, params) for l in links], dtype=float)

    def to_json(self):
        if self.kind == "explicit":
            return {
                "kind": "explicit",
                "table": [[s, r, p] for (s, r), p in sorted(self.table.items())],
            }
        return {"kind": self.kind, "scale": self.scale}

    @classmethod
    def from_json(cls, d) -> "PowerAssignment":
        if d["kind"] == "explicit":
            return cls.explicit({(int(s), int(r)): p for s, r, p in d["table"]})
        return cls(d["kind"], float(d["scale"]))


# --------------------------------------------------------------------------
# Affectance
# --------------------------------------------------------------------------

class Transmitter(NamedTuple):
    node: int
    pos: tuple[float, float]
    power: float


def c_factor(link: Link, power: float, params: ModelParams) -> float:
    """beta / (1 - beta*N*d^alpha / P); raises NoiseDominated when P <= beta*N*d^alpha."""
    need = params.beta * params.noise * link.length ** params.alpha
    if not power > need:
        raise NoiseDominated(link, power)
    return params.beta / (1.0 - need / power)


def affectance(w: Transmitter, link: Link, link_power: float, params: ModelParams) -> float:
    """Capped affectance of sender ``w`` on ``link``; 0 when ``w`` is the link's own sender."""
    c = c_factor(link, link_power, params)
    if w.node == link.sender:
        return 0.0
    dwv = math.dist(w.pos, link.receiver_pos)
    if dwv == 0.0:
        return params.cap
    raw = c * (w.power / link_power) * (link.length / dwv) ** params.alpha
    return min(params.cap, raw)


def affectance_sum(
    transmitters: Iterable[Transmitter], link: Link, link_power: float, params: ModelParams
) -> float:
    return sum(affectance(w, link, link_power, params) for w in transmitters)


def _link_arrays(links: Sequence[Link]):
    s = np.array([l.sender_pos for l in links], dtype=float).reshape(-1, 2)
    r = np.array([l.receiver_pos for l in links], dtype=float).reshape(-1, 2)
    lengths = np.sqrt(((s - r) ** 2).sum(axis=1))
    return s, r, lengths


def c_factors(links: Sequence[Link], powers: np.ndarray, params: ModelParams) -> np.ndarray:
    """Vectorised ``c_factor``; raises NoiseDominated for the first failing link."""
    _, _, lengths = _link_arrays(links)
    need = params.beta * params.noise * lengths ** params.alpha
    bad = ~(powers > need)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NoiseDominated(links[i], float(powers[i]))
    return params.beta / (1.0 - need / powers)


def incoming_affectance(
    tx_nodes: np.ndarray,
    tx_pos: np.ndarray,
    tx_power: np.ndarray,
    links: Sequence[Link],
    link_powers: np.ndarray,
    params: ModelParams,
) -> np.ndarray:
    """Total capped affectance on each link from a set of concurrent transmitters.

    A transmitter that is the link's own sender contributes nothing.
    """
    m = len(links)
    if m == 0:
        return np.zeros(0)
    link_powers = np.asarray(link_powers, dtype=float)
    c = c_factors(links, link_powers, params)
    tx_nodes = np.asarray(tx_nodes)
    if len(tx_nodes) == 0:
        return np.zeros(m)
    tx_pos = np.asarray(tx_pos, dtype=float).reshape(-1, 2)
    tx_power = np.asarray(tx_power, dtype=float)
    _, r, lengths = _link_arrays(links)
    senders = np.array([l.sender for l in links])
    dwv = np.sqrt(((tx_pos[:, None, :] - r[None, :, :]) ** 2).sum(axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = (
            c[None, :]
            * (tx_power[:, None] / link_powers[None, :])
            * (lengths[None, :] / dwv) ** params.alpha
        )
    raw = np.where(dwv == 0.0, np.inf, raw)
    a = np.minimum(params.cap, raw)
    a[tx_nodes[:, None] == senders[None, :]] = 0.0
    return a.sum(axis=0)


def affectance_matrix(
    links: Sequence[Link], power: PowerAssignment, params: ModelParams
) -> np.ndarray:
    """Entry (i, j) is the affectance of link i's sender on link j; diagonal is 0."""
    links = list(links)
    m = len(links)
    if m == 0:
        return np.zeros((0, 0))
    p = power.resolve(links, params)
    c = c_factors(links, p, params)
    s, r, lengths = _link_arrays(links)
    dwv = np.sqrt(((s[:, None, :] - r[None, :, :]) ** 2).sum(axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = c[None, :] * (p[:, None] / p[None, :]) * (lengths[None, :] / dwv) ** params.alpha
    raw = np.where(dwv == 0.0, np.inf, raw)
    a = np.minimum(params.cap, raw)
    senders = np.array([l.sender for l in links])
    a[senders[:, None] == senders[None, :]] = 0.0
    return a


@dataclass
class FeasibilityReport:
    feasible: bool
    incoming: np.ndarray
    reason: str | None = None
    worst: int | None = None

    def __bool__(self):
        return self.feasible


def is_feasible(
    links: Sequence[Link], power: PowerAssignment, params: ModelParams, tol: float = FEAS_TOL
) -> FeasibilityReport:
    """Check that every link's incoming affectance from the others is at most 1.

    A node can send only one message per slot, so two links with a common
    sender are reported infeasible ("sender-conflict").
    """
    links = list(links)
    m = len(links)
    if m == 0:
        return FeasibilityReport(True, np.zeros(0))
    senders = [l.sender for l in links]
    if len(set(senders)) != m:
        seen: dict[int, int] = {}
        for i, s in enumerate(senders):
            if s in seen:
                return FeasibilityReport(
                    False, np.full(m, np.nan), f"sender-conflict: node {s} sends twice", i
                )
            seen[s] = i
    try:
        a = affectance_matrix(links, power, params)
    except NoiseDominated as exc:
        i = links.index(exc.link)
        return FeasibilityReport(False, np.full(m, np.nan), f"noise-dominated: {exc}", i)
    incoming = a.sum(axis=0)
    worst = int(np.argmax(incoming))
    ok = bool(incoming[worst] <= 1.0 + tol)
    reason = None if ok else f"link {links[worst].key} has affectance {incoming[worst]:.6g} > 1"
    return FeasibilityReport(ok, incoming, reason, None if ok else worst)


def sinr_ratio(
    link: Link, transmitters: Iterable[Transmitter], link_power: float, params: ModelParams
) -> float:
    """Left-hand side of the SINR condition at ``link.receiver``.

    Returns 0 when the link's sender is not among the transmitters; the
    sender's own entry is ignored in favour of ``link_power``.
    """
    txs = list(transmitters)
    if not any(t.node == link.sender for t in txs):
        return 0.0
    signal = link_power / link.length ** params.alpha
    interference = 0.0
    for t in txs:
        if t.node == link.sender:
            continue
        dwv = math.dist(t.pos, link.receiver_pos)
        if dwv == 0.0:
            return 0.0
        interference += t.power / dwv ** params.alpha
    denom = params.noise + interference
    if denom == 0.0:
        return math.inf
    return signal / denom


def transmitters_of(links: Sequence[Link], power: PowerAssignment, params: ModelParams):
    return [Transmitter(l.sender, l.sender_pos, power.power(l, params)) for l in links]
