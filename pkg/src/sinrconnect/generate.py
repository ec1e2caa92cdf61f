"""Instance generators. Every output is normalised to minimum distance 1."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateInstance
from .model import Instance

FAMILIES = ("uniform", "grid", "expline", "clusters")
MAX_RESAMPLE = 100


@dataclass(frozen=True)
class GeneratorSpec:
    family: str = "uniform"
    n: int = 16
    seed: int = 0
    side: float = 1.0  # uniform / clusters bounding square
    rows: int | None = None  # grid; defaults to a near-square layout for n
    cols: int | None = None
    spacing: float = 1.0
    base: float = 2.0  # expline gap ratio
    k: int = 4  # clusters
    spread: float = 0.05

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 1:
            raise ValueError("n must be at least 1")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def grid_shape(n: int) -> tuple[int, int]:
    rows = int(np.floor(np.sqrt(n)))
    while n % rows:
        rows -= 1
    return rows, n // rows


def _points(spec: GeneratorSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.n
    if spec.family == "uniform":
        return rng.random((n, 2)) * spec.side
    if spec.family == "grid":
        rows, cols = (spec.rows, spec.cols) if spec.rows and spec.cols else grid_shape(n)
        if rows * cols != n:
            raise ValueError(f"grid {rows}x{cols} does not have {n} points")
        yy, xx = np.mgrid[0:rows, 0:cols]
        return np.stack([xx.ravel(), yy.ravel()], axis=1).astype(float) * spec.spacing
    if spec.family == "expline":
        gaps = spec.base ** np.arange(n - 1, dtype=float)
        x = np.concatenate([[0.0], np.cumsum(gaps)])
        return np.stack([x, np.zeros(n)], axis=1)
    centres = rng.random((max(1, spec.k), 2)) * spec.side
    which = rng.integers(0, len(centres), n)
    return centres[which] + rng.normal(0.0, spec.spread, (n, 2))


def generate(spec: GeneratorSpec) -> Instance:
    """Deterministic in ``spec``; duplicate points trigger a resample."""
    for attempt in range(MAX_RESAMPLE):
        rng = np.random.default_rng([spec.seed, attempt])
        xy = _points(spec, rng)
        if spec.n == 1:
            return Instance([0], xy)
        inst = Instance(range(spec.n), xy)
        if inst.min_dist > 0:
            return inst.normalized()
        if spec.family in ("grid", "expline"):
            break
    raise DegenerateInstance(f"{spec.family} generator kept producing coincident points")
