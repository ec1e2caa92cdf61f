"""Bi-tree container: an aggregation tree plus its mirrored dissemination tree."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import Instance, Link, LinkSet, ModelParams, PowerAssignment


@dataclass(frozen=True)
class TreeLink:
    sender: int
    receiver: int
    slot: int
    direction: str  # "up" (child -> parent) or "down" (parent -> child)
    power: float
    round: int = 0

    @property
    def key(self) -> tuple[int, int]:
        return (self.sender, self.receiver)

    def to_json(self) -> dict:
        return {
            "sender": self.sender,
            "receiver": self.receiver,
            "slot": self.slot,
            "direction": self.direction,
            "power": self.power,
            "round": self.round,
        }


class BiTree:
    """Rooted spanning structure over ``instance``.

    ``uplinks[c]`` is child c's link to its parent, ``downlinks[c]`` the
    parent's link to c. Slot stamps are 1-based.
    """

    def __init__(
        self,
        instance: Instance,
        root: int,
        uplinks: Mapping[int, TreeLink],
        downlinks: Mapping[int, TreeLink],
    ):
        self.instance = instance
        self.root = root
        self.uplinks = dict(sorted(uplinks.items()))
        self.downlinks = dict(sorted(downlinks.items()))

    def __repr__(self):
        return (
            f"BiTree(n={self.instance.n}, root={self.root}, links={len(self.uplinks)}, "
            f"slots={self.schedule_length})"
        )

    @property
    def nodes(self) -> tuple[int, ...]:
        return self.instance.ids

    def parent(self, u: int) -> int | None:
        l = self.uplinks.get(u)
        return None if l is None else l.receiver

    def children(self) -> dict[int, list[int]]:
        ch: dict[int, list[int]] = {u: [] for u in self.instance.ids}
        for c, l in self.uplinks.items():
            ch.setdefault(l.receiver, []).append(c)
        return ch

    @property
    def schedule_length(self) -> int:
        up = {l.slot for l in self.uplinks.values()}
        down = {l.slot for l in self.downlinks.values()}
        return max(len(up), len(down))

    @property
    def max_stamp(self) -> int:
        return max((l.slot for l in self.uplinks.values()), default=0)

    def tree_links(self) -> list[TreeLink]:
        return list(self.uplinks.values()) + list(self.downlinks.values())

    def link(self, tl: TreeLink) -> Link:
        return self.instance.link(tl.sender, tl.receiver)

    def up_linkset(self) -> LinkSet:
        return LinkSet(self.link(l) for l in self.uplinks.values())

    def down_linkset(self) -> LinkSet:
        return LinkSet(self.link(l) for l in self.downlinks.values())

    def all_linkset(self) -> LinkSet:
        return LinkSet(self.link(l) for l in self.tree_links())

    def powers(self) -> PowerAssignment:
        return PowerAssignment.explicit({l.key: l.power for l in self.tree_links()})

    def degrees(self) -> dict[int, int]:
        """Number of tree neighbours of every node."""
        deg = {u: 0 for u in self.instance.ids}
        for c, l in self.uplinks.items():
            deg[c] += 1
            deg[l.receiver] += 1
        return deg

    def with_downlinks(self, downlinks: Mapping[int, TreeLink]) -> "BiTree":
        return BiTree(self.instance, self.root, self.uplinks, downlinks)

    def to_dict(self, params: ModelParams | None = None) -> dict:
        d = {
            "root": self.root,
            "nodes": self.instance.to_dict()["nodes"],
            "links": [l.to_json() for l in self.tree_links()],
            "schedule_length": self.schedule_length,
        }
        if params is not None:
            d["model"] = params.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "BiTree":
        inst = Instance.from_dict(d)
        up, down = {}, {}
        for x in d["links"]:
            tl = TreeLink(
                int(x["sender"]),
                int(x["receiver"]),
                int(x["slot"]),
                x["direction"],
                float(x.get("power", 1.0)),
                int(x.get("round", 0)),
            )
            if tl.direction == "up":
                up[tl.sender] = tl
            elif tl.direction == "down":
                down[tl.receiver] = tl
            else:
                raise ValueError(f"bad link direction {tl.direction!r}")
        return cls(inst, int(d["root"]), up, down)


def restamp_dense(links: Iterable[TreeLink]) -> dict[int, int]:
    """Map raw slot numbers to consecutive ranks 1..S preserving order."""
    raw = sorted({l.slot for l in links})
    return {s: i + 1 for i, s in enumerate(raw)}


def reverse_dissemination_schedule(tree: BiTree) -> BiTree:
    """Stamp each downlink with maxStamp + 1 - (stamp of its uplink)."""
    top = tree.max_stamp
    down = {}
    for c, up in tree.uplinks.items():
        old = tree.downlinks.get(c)
        power = old.power if old is not None else up.power
        rnd = old.round if old is not None else up.round
        down[c] = TreeLink(up.receiver, up.sender, top + 1 - up.slot, "down", power, rnd)
    return tree.with_downlinks(down)


def chain_tree(instance: Instance, order: list[int], stamps: list[int], power: float = 1.0) -> BiTree:
    """Path tree: order[0] -> order[1] -> ... -> order[-1] (root), uplink i stamped stamps[i]."""
    up = {}
    for (u, v), s in zip(zip(order, order[1:]), stamps):
        up[u] = TreeLink(u, v, s, "up", power)
    tree = BiTree(instance, order[-1], up, {})
    return reverse_dissemination_schedule(tree)
