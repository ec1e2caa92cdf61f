"""Figures for experiment summaries (matplotlib, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def plot_schedule_lengths(summary: dict, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    series: dict[tuple, list] = {}
    for c in summary["cells"]:
        if c["schedule_length"]["median"] is None:
            continue
        series.setdefault((c["family"], c["mode"]), []).append((c["n"], c["schedule_length"]["median"]))
    for (fam, mode), pts in sorted(series.items()):
        pts.sort()
        ns, ys = zip(*pts)
        ax.plot(ns, ys, marker="o", label=f"{mode} / {fam}")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("median schedule length (slots)")
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def plot_degree_exceedance(rows, path: Path) -> None:
    """Fraction of runs whose maximum degree is at least d, one curve per n."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    by_n: dict[int, list[int]] = {}
    for r in rows:
        if r.mode == "init" and not r.error:
            by_n.setdefault(r.n, []).append(r.max_degree)
    for n, degs in sorted(by_n.items()):
        degs = np.array(degs)
        d = np.arange(0, degs.max() + 2)
        ax.step(d, [(degs >= x).mean() for x in d], where="post", label=f"n={n}")
    ax.set_xlabel("d")
    ax.set_ylabel("P(max degree >= d)")
    ax.grid(True, alpha=0.3)
    if by_n:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def plot_summary(rows, summary: dict, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [out_dir / "schedule_length.png", out_dir / "degree_exceedance.png"]
    plot_schedule_lengths(summary, paths[0])
    plot_degree_exceedance(rows, paths[1])
    return paths
