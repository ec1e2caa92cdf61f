"""JSON and JSON-lines persistence with stable, byte-reproducible formatting."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .model import Instance, Link
from .tree import BiTree


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path: str | Path) -> Any:
    with open(path) as fh:
        return json.load(fh)


def load_instance(path: str | Path) -> Instance:
    return Instance.from_dict(read_json(path))


def load_tree(path: str | Path) -> BiTree:
    d = read_json(path)
    # result.json from ``build`` wraps the tree
    return BiTree.from_dict(d["tree"] if "tree" in d and "root" not in d else d)


def load_links(path: str | Path) -> list[Link]:
    """Links from ``{"nodes": [...], "links": [{"sender", "receiver"}, ...]}``.

    tree.json files qualify; with a ``direction`` field only uplinks are kept.
    """
    d = read_json(path)
    if "tree" in d and "nodes" not in d:
        d = d["tree"]
    inst = Instance.from_dict(d)
    out = []
    for x in d["links"]:
        if x.get("direction", "up") != "up":
            continue
        out.append(inst.link(int(x["sender"]), int(x["receiver"])))
    return out
