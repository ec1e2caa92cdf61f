"""Structural measures of link sets and the bi-tree verifier.

Sparsity of a link set L is the largest number of links of length at least
8*rad(B) having an endpoint inside some closed ball B. Two exact routes are
provided: ``sparsity`` sweeps link lengths and solves a weighted maximum
disc-coverage problem per length; ``sparsity_bruteforce`` enumerates the
minimum enclosing balls of all endpoint subsets of size <= 3. They share no
code beyond the counting tolerance, so the tests compare them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    FEAS_TOL,
    Link,
    ModelParams,
    PowerAssignment,
    Transmitter,
    affectance,
    dual_link,
    is_feasible,
)
from .tree import BiTree

# relative slack when deciding whether a point lies in a closed ball
BALL_TOL = 1e-9


# ---------------------------------------------------------------------------
# Sparsity
# ---------------------------------------------------------------------------

@dataclass
class SparsityReport:
    psi: int
    center: tuple[float, float] | None = None
    radius: float = 0.0
    links: list[int] = field(default_factory=list)  # indices into the input

    def to_dict(self) -> dict:
        return {
            "psi": self.psi,
            "center": None if self.center is None else list(self.center),
            "radius": self.radius,
            "links": self.links,
        }


def _inside(d, radius):
    return d <= radius * (1 + BALL_TOL) + 1e-12


def _endpoints(links: Sequence[Link]):
    s = np.array([l.sender_pos for l in links], dtype=float).reshape(-1, 2)
    r = np.array([l.receiver_pos for l in links], dtype=float).reshape(-1, 2)
    return s, r, np.sqrt(((s - r) ** 2).sum(axis=1))


def _count_links(center, radius, s, r, lengths, t):
    """Indices of links with length >= t and an endpoint in the ball."""
    ds = np.hypot(*(s - center).T)
    dr = np.hypot(*(r - center).T)
    hit = (lengths >= t * (1 - BALL_TOL)) & (_inside(ds, radius) | _inside(dr, radius))
    return np.flatnonzero(hit)


def sparsity(links: Sequence[Link]) -> SparsityReport:
    """Exact sparsity via a sweep over link lengths.

    For a threshold t (a link length), a ball of radius t/8 is the largest
    ball whose qualifying set is still L(t), so it suffices to maximise the
    number of links of L(t) touched by a disc of radius t/8. A link of length
    t cannot have both endpoints in such a disc, so this is a weighted point
    coverage problem over the distinct endpoints; an optimal disc can be
    moved until it is centred on a point or has two points on its boundary.
    """
    links = list(links)
    if not links:
        return SparsityReport(0)
    s, r, lengths = _endpoints(links)
    best = SparsityReport(0)
    thresholds = sorted(set(lengths.tolist()), reverse=True)
    for t in thresholds:
        q = lengths >= t * (1 - BALL_TOL)
        if q.sum() <= best.psi:
            continue
        R = t / 8.0
        pts = np.concatenate([s[q], r[q]])
        pts, weight = np.unique(pts, axis=0, return_counts=True)
        k = len(pts)
        centers = [pts]
        if k > 1:
            diff = pts[:, None, :] - pts[None, :, :]
            dist = np.sqrt((diff ** 2).sum(-1))
            i, j = np.nonzero(np.triu(dist <= 2 * R * (1 + BALL_TOL), 1))
            if len(i):
                a, b = pts[i], pts[j]
                mid = (a + b) / 2
                half = dist[i, j] / 2
                h = np.sqrt(np.maximum(R * R - half * half, 0.0))
                u = (b - a) / dist[i, j][:, None]
                perp = np.stack([-u[:, 1], u[:, 0]], axis=1)
                centers += [mid + h[:, None] * perp, mid - h[:, None] * perp]
        centers = np.concatenate(centers)
        # chunk so the centre x point matrix stays small
        for lo in range(0, len(centers), 4096):
            c = centers[lo : lo + 4096]
            d = np.sqrt(((c[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
            cover = (_inside(d, R) * weight[None, :]).sum(axis=1)
            m = int(cover.argmax())
            if cover[m] > best.psi:
                center = c[m]
                idx = _count_links(center, R, s, r, lengths, t)
                best = SparsityReport(len(idx), (float(center[0]), float(center[1])), R, idx.tolist())
    return best


def min_enclosing_ball(points) -> tuple[np.ndarray, float]:
    """Smallest disc containing up to three points.

    For a triangle this is the circumcircle when the triangle is acute and
    the diameter circle of the longest side otherwise (which also covers the
    collinear case).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 1:
        return pts[0].copy(), 0.0
    if len(pts) == 2:
        return (pts[0] + pts[1]) / 2, float(np.linalg.norm(pts[0] - pts[1])) / 2
    if len(pts) != 3:
        raise ValueError("min_enclosing_ball takes 1 to 3 points")
    best = None
    for i, j in ((0, 1), (0, 2), (1, 2)):
        c = (pts[i] + pts[j]) / 2
        rad = float(np.linalg.norm(pts[i] - pts[j])) / 2
        k = 3 - i - j
        if np.linalg.norm(pts[k] - c) <= rad * (1 + 1e-12) and (best is None or rad < best[1]):
            best = (c, rad)
    if best is not None:
        return best
    (ax, ay), (bx, by), (cx, cy) = pts
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    c = np.array([ux, uy])
    return c, float(max(np.linalg.norm(p - c) for p in pts))


def sparsity_bruteforce(links: Sequence[Link]) -> SparsityReport:
    """Exact sparsity by enumerating minimum enclosing balls of <= 3 endpoints. O(m^4)."""
    links = list(links)
    if not links:
        return SparsityReport(0)
    s, r, lengths = _endpoints(links)
    pts = np.unique(np.concatenate([s, r]), axis=0)
    best = SparsityReport(0)
    for k in (1, 2, 3):
        for combo in itertools.combinations(range(len(pts)), k):
            c, rad = min_enclosing_ball(pts[list(combo)])
            idx = _count_links(c, rad, s, r, lengths, 8 * rad)
            if len(idx) > best.psi:
                best = SparsityReport(len(idx), (float(c[0]), float(c[1])), rad, idx.tolist())
    return best


# ---------------------------------------------------------------------------
# Independence
# ---------------------------------------------------------------------------

def independence_check(l: Link, lp: Link, q: float) -> bool:
    """d(x,y')*d(y,x') >= q^2 * d(x,y) * d(x',y') for l=(x,y), l'=(x',y')."""
    lhs = math.dist(l.sender_pos, lp.receiver_pos) * math.dist(l.receiver_pos, lp.sender_pos)
    return lhs >= q * q * l.length * lp.length * (1 - 1e-12)


@dataclass
class IndependencePartition:
    C: float
    classes: list[list[int]]  # indices into the input
    assignment: dict[int, int]

    @property
    def class_count(self) -> int:
        return len(self.classes)


def partition_independent(links: Sequence[Link], C: float) -> IndependencePartition:
    """Greedy colouring in ascending length order; every class is C-independent."""
    if not C > 0:
        raise ValueError("C must be positive")
    links = list(links)
    order = sorted(range(len(links)), key=lambda i: links[i].order_key())
    classes: list[list[int]] = []
    assign = {}
    for i in order:
        for ci, members in enumerate(classes):
            if all(independence_check(links[i], links[j], C) for j in members):
                members.append(i)
                assign[i] = ci
                break
        else:
            assign[i] = len(classes)
            classes.append([i])
    return IndependencePartition(C, classes, assign)


# ---------------------------------------------------------------------------
# Amenability and Upsilon
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerContext:
    """Uniform power and linear scale used to compare link pairs.

    ``for_links`` picks the smallest noise-safe values: linear 2*beta*N
    (so c = 2*beta for every link) and uniform 2*beta*N*maxlen^alpha.
    """

    uniform: float
    linear_scale: float

    @classmethod
    def for_links(cls, links: Sequence[Link], params: ModelParams) -> "PowerContext":
        top = max((l.length for l in links), default=1.0)
        base = 2.0 * params.beta * params.noise_ref
        return cls(base * max(top, 1.0) ** params.alpha, base)

    def linear_power(self, l: Link, params: ModelParams) -> float:
        return self.linear_scale * l.length ** params.alpha


def f_value(l: Link, lp: Link, ctx: PowerContext, params: ModelParams) -> float:
    """a^U_{l'}(l) + a^L_l(l') when l precedes l' in length order, else 0."""
    if l.order_key() > lp.order_key() or l.key == lp.key:
        return 0.0
    up = affectance(Transmitter(lp.sender, lp.sender_pos, ctx.uniform), l, ctx.uniform, params)
    lin = affectance(
        Transmitter(l.sender, l.sender_pos, ctx.linear_power(l, params)),
        lp,
        ctx.linear_power(lp, params),
        params,
    )
    return up + lin


def amenability(links: Sequence[Link], params: ModelParams, ctx: PowerContext | None = None) -> float:
    links = list(links)
    if not links:
        return 0.0
    ctx = ctx or PowerContext.for_links(links, params)
    return max(sum(f_value(l, lp, ctx, params) for lp in links) for l in links)


def upsilon(n: int, delta: float, const: float = 1.0) -> float:
    """const * max(1, log2 log2 max(delta, 4) + log2 n)."""
    return const * max(1.0, math.log2(math.log2(max(delta, 4.0))) + math.log2(max(n, 1)))


# ---------------------------------------------------------------------------
# Bi-tree verification
# ---------------------------------------------------------------------------

@dataclass
class VerifyReport:
    ok: bool = True
    failures: list[tuple[str, str]] = field(default_factory=list)

    def fail(self, check: str, detail: str):
        self.ok = False
        self.failures.append((check, detail))

    def __bool__(self):
        return self.ok

    @property
    def first(self) -> tuple[str, str] | None:
        return self.failures[0] if self.failures else None

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failures": [list(f) for f in self.failures]}


def _slot_groups(tls):
    groups: dict[int, list] = {}
    for tl in tls:
        groups.setdefault(tl.slot, []).append(tl)
    return dict(sorted(groups.items()))


def verify_bitree(
    tree: BiTree,
    params: ModelParams,
    power: PowerAssignment | None = None,
    tol: float = FEAS_TOL,
    check_feasibility: bool = True,
) -> VerifyReport:
    """Check spanning, aggregation order, dissemination order, duality and slot feasibility.

    ``power`` defaults to the per-link powers recorded in the tree.
    """
    rep = VerifyReport()
    inst = tree.instance
    nodes = set(inst.ids)
    if tree.root not in nodes:
        rep.fail("span", f"root {tree.root} is not a node")
        return rep
    if tree.root in tree.uplinks:
        rep.fail("span", "root has an uplink")
    for u in nodes - {tree.root}:
        if u not in tree.uplinks:
            rep.fail("span", f"node {u} has no uplink")
    for c, tl in tree.uplinks.items():
        if tl.sender != c or tl.receiver not in nodes or tl.direction != "up":
            rep.fail("span", f"malformed uplink {tl}")
        if tl.slot < 1:
            rep.fail("span", f"uplink of {c} has non-positive stamp {tl.slot}")
    if not rep.ok:
        return rep
    for u in nodes:
        seen, x = set(), u
        while x != tree.root:
            if x in seen:
                rep.fail("span", f"cycle through node {x}")
                return rep
            seen.add(x)
            x = tree.uplinks[x].receiver

    # aggregation: a child's uplink precedes its parent's uplink
    for c, tl in tree.uplinks.items():
        p = tl.receiver
        if p != tree.root and not tl.slot < tree.uplinks[p].slot:
            rep.fail(
                "aggregation-order",
                f"node {p}: child {c} stamped {tl.slot}, own uplink {tree.uplinks[p].slot}",
            )

    # duality and dissemination
    if set(tree.downlinks) != set(tree.uplinks):
        rep.fail("duality", "downlinks do not match uplinks")
    else:
        for c, dl in tree.downlinks.items():
            up = tree.uplinks[c]
            if (dl.sender, dl.receiver) != (up.receiver, up.sender) or dl.direction != "down":
                rep.fail("duality", f"downlink of {c} is not the dual of its uplink")
            if dl.slot < 1:
                rep.fail("dissemination-order", f"downlink to {c} has non-positive stamp")
        for c, dl in tree.downlinks.items():
            p = dl.sender
            if p != tree.root and p in tree.downlinks and not tree.downlinks[p].slot < dl.slot:
                rep.fail(
                    "dissemination-order",
                    f"node {p}: downlink to {c} stamped {dl.slot}, own downlink {tree.downlinks[p].slot}",
                )

    if check_feasibility:
        pa = power or tree.powers()
        for name, tls in (("up", tree.uplinks.values()), ("down", tree.downlinks.values())):
            for slot, group in _slot_groups(tls).items():
                fr = is_feasible([tree.link(t) for t in group], pa, params, tol)
                if not fr:
                    rep.fail("feasibility", f"{name} slot {slot}: {fr.reason}")
    return rep


def latency(tree: BiTree) -> tuple[int, int, int]:
    """(convergecast, broadcast, worst node-to-node) slot counts."""
    s = tree.schedule_length
    return s, s, 2 * s


def uplink_duals_match(tree: BiTree) -> bool:
    ups = {dual_link(tree.link(t)).key for t in tree.uplinks.values()}
    return ups == {tree.link(t).key for t in tree.downlinks.values()}


__all__ = [
    "SparsityReport",
    "sparsity",
    "sparsity_bruteforce",
    "min_enclosing_ball",
    "independence_check",
    "IndependencePartition",
    "partition_independent",
    "PowerContext",
    "f_value",
    "amenability",
    "upsilon",
    "VerifyReport",
    "verify_bitree",
    "latency",
    "uplink_duals_match",
]
