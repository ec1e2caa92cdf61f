"""Configuration: one JSON document with sections model, init, scheduler, capacity, experiment.

Missing keys fall back to ``DEFAULTS``. ``CALIBRATION`` holds the envelope
constants measured once by ``sinrconnect.calibration`` on seeds disjoint
from the acceptance seeds; they are frozen here and never refit.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .capacity import CapacityParams
from .init_tree import InitParams
from .model import ModelParams
from .scheduler import SchedulerParams

DEFAULTS: dict[str, dict[str, Any]] = {
    "model": {"alpha": 3.0, "beta": 1.0, "noise": 1.0, "epsilon": 0.1},
    "init": {"mode": "practical", "p": 0.25, "lambda1": 64.0},
    "scheduler": {"q0": 0.125, "backoff": 0.5, "max_slots": 1_000_000, "ack_modeled": True},
    "capacity": {
        "rho": None,
        "gamma1": 4.0,
        "gamma2": 0.5,
        "tau": 0.2,
        "p_cap": 0.5,
        "upsilon_const": 1.0,
        "margin": 1.0,
        "delta_hat_arbitrary": 1 / 128,
        "max_retries": 3,
        "power_tol": 1e-6,
        "power_max_iter": 10_000,
    },
    "experiment": {
        "families": ["uniform"],
        "sizes": [16],
        "seeds": [0, 1, 2],
        "modes": ["init"],
        "sparsity": True,
    },
}

# Envelope constants (see module docstring). Values are written by hand
# from the calibration run output.
CALIBRATION: dict[str, float] = {
    "c_psi": 2.2,  # psi(T) <= c_psi * log2 n
    "psi_tm": 15,  # psi(T(M)) <= psi_tm
    "c_mean_select": 0.12,  # E|T'| (mean sampling) >= (c / Upsilon) * OPT(mean)
    "c_a": 40.0,  # median arbitrary-mode slots <= c_a * log2 n
    "c_m": 2.9,  # median mean-mode slots <= c_m * Upsilon * log2 n
}


def _merge(base: dict, extra: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if k not in out:
            raise ValueError(f"unknown config section {k!r}")
        if not isinstance(v, Mapping):
            raise ValueError(f"config section {k!r} must be an object")
        out[k].update(v)
    return out


@dataclass
class Config:
    model: ModelParams
    init: InitParams
    scheduler: SchedulerParams
    capacity: CapacityParams
    experiment: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Mapping | None = None) -> "Config":
        raw = _merge(DEFAULTS, d or {})
        model = ModelParams.from_dict(raw["model"])
        ini = raw["init"]
        if ini.get("mode") == "theory":
            init = InitParams.theory(model, ini.get("p_theory"))
        else:
            init = InitParams(float(ini["p"]), float(ini["lambda1"]), "practical")
        cap = dict(raw["capacity"])
        return cls(
            model,
            init,
            SchedulerParams(**raw["scheduler"]),
            CapacityParams(**cap),
            raw["experiment"],
        )

    @classmethod
    def load(cls, path: str | Path | None) -> "Config":
        if path is None:
            return cls.from_dict()
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "init": self.init.to_dict(),
            "scheduler": self.scheduler.to_dict(),
            "capacity": self.capacity.to_dict(),
            "experiment": self.experiment,
        }
