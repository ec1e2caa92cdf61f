import json
import math

import pytest

from sinrconnect.config import CALIBRATION, DEFAULTS, Config
from sinrconnect.generate import GeneratorSpec, generate, grid_shape
from sinrconnect import io


def test_grid_two_by_two():
    inst = generate(GeneratorSpec("grid", 4, 0, rows=2, cols=2, spacing=1))
    assert inst.n == 4 and inst.delta == pytest.approx(math.sqrt(2))


def test_expline_points():
    inst = generate(GeneratorSpec("expline", 4, 0, base=2))
    assert [x for x, _ in inst.xy] == pytest.approx([0, 1, 3, 7])
    assert inst.delta == pytest.approx(7)


def test_single_point():
    inst = generate(GeneratorSpec("uniform", 1, 0))
    assert inst.n == 1 and inst.delta == 1.0


@pytest.mark.parametrize("fam", ["uniform", "grid", "expline", "clusters"])
def test_generators_are_normalised_and_seeded(fam):
    a = generate(GeneratorSpec(fam, 16, 4))
    b = generate(GeneratorSpec(fam, 16, 4))
    assert a == b
    assert 1.0 <= a.min_dist < 1 + 1e-9


def test_generator_validation():
    with pytest.raises(ValueError):
        GeneratorSpec("spiral", 4)
    with pytest.raises(ValueError):
        GeneratorSpec("uniform", 0)
    with pytest.raises(ValueError):
        generate(GeneratorSpec("grid", 6, 0, rows=4, cols=4))
    assert grid_shape(16) == (4, 4) and grid_shape(64) == (8, 8) and grid_shape(12) == (3, 4)


def test_config_round_trip(tmp_path):
    cfg = Config.from_dict({"capacity": {"tau": 0.3}, "experiment": {"sizes": [8]}})
    assert cfg.capacity.tau == 0.3 and cfg.model.alpha == DEFAULTS["model"]["alpha"]
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert Config.load(p).to_dict() == cfg.to_dict()
    with pytest.raises(ValueError):
        Config.from_dict({"bogus": {}})
    th = Config.from_dict({"init": {"mode": "theory"}})
    assert th.init.mode == "theory"


def test_calibration_constants_are_frozen():
    assert set(CALIBRATION) == {"c_psi", "psi_tm", "c_mean_select", "c_a", "c_m"}
    assert all(v > 0 for v in CALIBRATION.values())


def test_io_round_trips(tmp_path):
    inst = generate(GeneratorSpec("uniform", 5, 1))
    io.write_json(tmp_path / "i.json", inst.to_dict())
    assert io.load_instance(tmp_path / "i.json") == inst
    assert io.dumps({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'
