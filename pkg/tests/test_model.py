import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sinrconnect.errors import NoiseDominated
from sinrconnect.model import (
    Instance,
    LinkSet,
    ModelParams,
    PowerAssignment,
    Transmitter,
    affectance,
    affectance_matrix,
    affectance_sum,
    c_factor,
    dual_link,
    dual_set,
    incoming_affectance,
    is_feasible,
    sinr_ratio,
    transmitters_of,
)

from conftest import mklink

UNIT = mklink(0, 1, (0, 0), (1, 0))


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(alpha=2.0)
    with pytest.raises(ValueError):
        ModelParams(beta=0)
    with pytest.raises(ValueError):
        ModelParams(noise=-1)
    with pytest.raises(ValueError):
        ModelParams(epsilon=0)
    assert ModelParams().cap == pytest.approx(1.1)


def test_dual_is_involution():
    d = dual_link(UNIT)
    assert d.key == (1, 0)
    assert dual_link(d) == UNIT
    ls = LinkSet([UNIT, mklink(2, 3, (5, 5), (6, 5))])
    assert dual_set(dual_set(ls)) == ls


def test_link_rejects_degenerate():
    with pytest.raises(ValueError):
        mklink(1, 1, (0, 0), (1, 0))
    with pytest.raises(ValueError):
        mklink(1, 2, (0, 0), (0, 0))


def test_c_factor_examples(params):
    assert c_factor(UNIT, 2.0, params) == pytest.approx(2.0)
    assert c_factor(UNIT, 1e12, params) == pytest.approx(params.beta)
    with pytest.raises(NoiseDominated):
        c_factor(UNIT, 1.0, params)


def test_affectance_hand_values(params):
    w = Transmitter(9, (1.0, 2.0), 2.0)  # distance 2 from receiver (1, 0)
    assert affectance(w, UNIT, 2.0, params) == pytest.approx(0.25)
    close = Transmitter(9, (1.0, 0.5), 2.0)
    assert affectance(close, UNIT, 2.0, params) == pytest.approx(1.1)
    assert affectance_sum([], UNIT, 2.0, params) == 0.0
    own = Transmitter(0, (0.0, 0.0), 2.0)
    assert affectance(own, UNIT, 2.0, params) == 0.0


def test_affectance_is_additive(params):
    ws = [Transmitter(8, (1.0, 2.0), 2.0), Transmitter(9, (1.0, -2.0), 2.0)]
    assert affectance_sum(ws, UNIT, 2.0, params) == pytest.approx(0.5)
    vec = incoming_affectance(
        np.array([8, 9]), np.array([w.pos for w in ws]), np.array([2.0, 2.0]), [UNIT], np.array([2.0]), params
    )
    assert vec[0] == pytest.approx(0.5)


def test_affectance_matrix_shapes(params, far_pair):
    assert affectance_matrix([UNIT], PowerAssignment.uniform(2), params).shape == (1, 1)
    assert affectance_matrix([UNIT], PowerAssignment.uniform(2), params)[0, 0] == 0.0
    A = affectance_matrix(far_pair, PowerAssignment.uniform(2), params)
    assert A[0, 1] == pytest.approx(2 * (1 / 101) ** 3)  # sender 0 to receiver at x=101
    assert A[1, 0] == pytest.approx(2 * (1 / 99) ** 3)


def test_feasibility_examples(params, far_pair, conflict_pair):
    uni = PowerAssignment.uniform(2.0)
    assert is_feasible([UNIT], uni, params)
    assert is_feasible(far_pair, uni, params)
    rep = is_feasible(conflict_pair, uni, params)
    assert not rep and rep.incoming.max() > 1.0
    assert is_feasible([], uni, params)


def test_sender_conflict_is_infeasible(params):
    a = mklink(0, 1, (0, 0), (1, 0))
    b = mklink(0, 2, (0, 0), (-1, 0))
    rep = is_feasible([a, b], PowerAssignment.uniform(100.0), params)
    assert not rep and "sender-conflict" in rep.reason


def test_noise_dominated_reported(params):
    rep = is_feasible([UNIT], PowerAssignment.uniform(0.5), params)
    assert not rep and "noise" in rep.reason


def test_sinr_ratio_examples(params):
    l = mklink(0, 1, (0, 0), (1.5, 0))
    assert sinr_ratio(l, [Transmitter(0, (0.0, 0.0), 16.0)], 16.0, params) == pytest.approx(16 / 1.5 ** 3)
    assert sinr_ratio(l, [], 16.0, params) == 0.0
    a = mklink(0, 2, (-1, 0), (0, 0))
    b = mklink(1, 2, (1, 0), (0, 0))
    txs = transmitters_of([a, b], PowerAssignment.uniform(5.0), params)
    assert sinr_ratio(a, txs, 5.0, params) < 1
    assert sinr_ratio(b, txs, 5.0, params) < 1


def test_power_assignment_kinds(params):
    l = mklink(0, 1, (0, 0), (2, 0))
    assert PowerAssignment.uniform(3).power(l, params) == 3
    assert PowerAssignment.mean(1).power(l, params) == pytest.approx(2 ** 1.5)
    assert PowerAssignment.linear(1).power(l, params) == pytest.approx(8)
    ex = PowerAssignment.explicit({(0, 1): 7.0})
    assert ex.power(l, params) == 7.0
    with pytest.raises(KeyError):
        ex.power(dual_link(l), params)
    for pa in (PowerAssignment.uniform(3), ex):
        assert PowerAssignment.from_json(pa.to_json()).to_json() == pa.to_json()
    with pytest.raises(ValueError):
        PowerAssignment.uniform(0)


def test_noise_safe_keeps_c_at_most_two_beta(params):
    for kind in ("uniform", "mean", "linear"):
        pa = PowerAssignment.noise_safe(kind, params, 8.0)
        for d in (1.0, 3.0, 8.0):
            l = mklink(0, 1, (0, 0), (d, 0))
            assert c_factor(l, pa.power(l, params), params) <= 2 * params.beta + 1e-12


def test_instance_basics():
    inst = Instance([3, 1, 2], [(0, 0), (2, 0), (0, 1)])
    assert inst.ids == (1, 2, 3)
    assert inst.pos(3) == (0.0, 0.0)
    assert inst.delta == pytest.approx(math.sqrt(5))
    assert inst.min_dist == pytest.approx(1.0)
    assert Instance.from_dict(inst.to_dict()) == inst
    single = Instance([0], [(5, 5)])
    assert single.delta == 1.0
    with pytest.raises(ValueError):
        Instance([1, 1], [(0, 0), (1, 1)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=2, max_size=12, unique=True))
def test_normalized_min_distance_is_at_least_one(pts):
    inst = Instance(range(len(pts)), pts)
    if inst.min_dist <= 1e-6:
        return
    norm = inst.normalized()
    assert 1.0 <= norm.min_dist < 1.0 + 1e-9


@settings(max_examples=80, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(1, 3), st.floats(0, 6.28)),
        min_size=1,
        max_size=6,
    )
)
def test_affectance_and_sinr_views_agree(specs):
    """Uncapped affectance sum <= 1 exactly when SINR >= beta, under noise-safe uniform power."""
    params = ModelParams()
    links = [
        mklink(2 * i, 2 * i + 1, (x, y), (x + d * math.cos(t), y + d * math.sin(t)))
        for i, (x, y, d, t) in enumerate(specs)
    ]
    pa = PowerAssignment.noise_safe("uniform", params, 3.0)
    big = ModelParams(epsilon=1e9)  # effectively no cap
    rep = is_feasible(links, pa, big, tol=0)
    txs = transmitters_of(links, pa, params)
    for i, l in enumerate(links):
        s = sinr_ratio(l, txs, pa.power(l, params), params)
        if abs(rep.incoming[i] - 1.0) > 1e-6:
            assert (rep.incoming[i] <= 1.0) == (s >= params.beta)
