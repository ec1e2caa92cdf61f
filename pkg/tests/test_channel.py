import numpy as np
import pytest

from sinrconnect.channel import (
    Message,
    RngStream,
    SlotAction,
    Trace,
    check_decode_soundness,
    decode_matrix,
    derive_seed,
    resolve_slot,
    run_protocol,
)
from sinrconnect.errors import SlotBudgetExceeded
from sinrconnect.init_tree import InitParams, init_agents
from sinrconnect.model import Instance, ModelParams


def _tx(inst, u, power):
    return SlotAction.transmit(u, Message(u, inst.pos(u)), power)


def test_no_transmitters_no_decodes(params):
    inst = Instance([0, 1], [(0, 0), (1, 0)])
    out = resolve_slot([SlotAction.listen(0), SlotAction.listen(1)], inst, params)
    assert out.decoded == {}


def test_single_transmitter_decoded(params):
    inst = Instance([0, 1], [(0, 0), (1.5, 0)])
    out = resolve_slot([_tx(inst, 0, 16.0), SlotAction.listen(1)], inst, params)
    assert out.decoded[1].message.sender == 0
    assert out.decoded[1].sinr == pytest.approx(16 / 1.5 ** 3)


def test_symmetric_transmitters_block_each_other(params):
    inst = Instance([0, 1, 2], [(-1, 0), (1, 0), (0, 0)])
    out = resolve_slot([_tx(inst, 0, 50.0), _tx(inst, 1, 50.0), SlotAction.listen(2)], inst, params)
    assert 2 not in out.decoded


def test_half_duplex_and_duplicate_actions(params):
    inst = Instance([0, 1], [(0, 0), (1, 0)])
    out = resolve_slot([_tx(inst, 0, 100.0), _tx(inst, 1, 100.0)], inst, params)
    assert out.decoded == {}
    with pytest.raises(ValueError):
        resolve_slot([SlotAction.listen(0), SlotAction.idle(0)], inst, params)


def test_decode_matrix_picks_strongest():
    rec = np.array([[10.0, 1.0], [1.0, 1.0]])
    best, sinr = decode_matrix(rec, 1.0, 1.0)
    assert best[0] == 0 and sinr[0] == pytest.approx(10 / 2)
    assert best[1] == -1


def test_rng_stream_is_keyed_and_repeatable():
    a, b = RngStream(5), RngStream(5)
    assert np.array_equal(a.uniforms((1, 2), 40, 7, 2), b.uniforms((1, 2), 40, 7, 2))
    assert not np.array_equal(a.uniforms((1, 2), 40, 7, 2), a.uniforms((1, 3), 40, 7, 2))
    assert not np.array_equal(a.uniforms((1,), 0, 4), a.uniforms((1,), 1, 4))
    assert derive_seed(3, 1) == derive_seed(3, 1) != derive_seed(3, 2)


class Silent:
    def __init__(self, node):
        self.node, self.done = node, False

    def step(self, slot, rng):
        return SlotAction.idle(self.node)

    def receive(self, slot, heard):
        pass


def test_run_protocol_budget_and_empty(params):
    inst = Instance([0, 1], [(0, 0), (1, 0)])
    assert len(run_protocol([], inst, params, 0, 5)) == 0
    with pytest.raises(SlotBudgetExceeded) as ei:
        run_protocol([Silent(0), Silent(1)], inst, params, 0, 5)
    assert len(ei.value.partial) == 5


def test_init_agents_trace_is_deterministic(params):
    inst = Instance([0, 1], [(0, 0), (1, 0)])
    init = InitParams()
    t1 = run_protocol(init_agents(inst, init, params), inst, params, 11, 10**6)
    t2 = run_protocol(init_agents(inst, init, params), inst, params, 11, 10**6)
    assert t1.to_jsonl() == t2.to_jsonl()
    assert Trace.from_jsonl(t1.to_jsonl()).to_jsonl() == t1.to_jsonl()
    assert check_decode_soundness(t1, inst, params) == []


def test_decode_soundness_flags_bad_record(params):
    inst = Instance([0, 1, 2], [(-1, 0), (1, 0), (0, 0)])
    t = Trace.from_jsonl(
        '{"slot": 1, "transmitters": [{"id": 0, "power": 5.0, "tag": "broadcast"},'
        ' {"id": 1, "power": 5.0, "tag": "broadcast"}],'
        ' "decodes": [{"listener": 2, "sender": 0, "tag": "broadcast"}]}\n'
    )
    assert check_decode_soundness(t, inst, params)
