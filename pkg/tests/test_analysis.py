import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sinrconnect.analysis import (
    PowerContext,
    amenability,
    f_value,
    independence_check,
    latency,
    min_enclosing_ball,
    partition_independent,
    sparsity,
    sparsity_bruteforce,
    upsilon,
    verify_bitree,
)
from sinrconnect.generate import GeneratorSpec, generate
from sinrconnect.init_tree import InitParams, run_init
from sinrconnect.model import Instance, ModelParams, Transmitter, affectance
from sinrconnect.tree import chain_tree

from conftest import mklink


def test_sparsity_small_cases():
    assert sparsity([]).psi == 0
    one = sparsity([mklink(0, 1, (0, 0), (1, 0))])
    # any ball of radius <= length/8 touching an endpoint is a witness
    assert one.psi == 1 and one.radius <= 1 / 8
    star = [mklink(0, i, (0, 0), (math.cos(i), math.sin(i))) for i in range(1, 7)]
    rep = sparsity(star)
    assert rep.psi == 6 and rep.radius <= 1 / 8
    assert sorted(rep.links) == list(range(6))


def test_sparsity_witness_is_valid():
    inst = generate(GeneratorSpec("uniform", 48, 4))
    tree = run_init(inst, InitParams(), ModelParams(), 4).tree
    links = list(tree.up_linkset())
    rep = sparsity(links)
    c = np.array(rep.center)
    for i in rep.links:
        l = links[i]
        assert l.length >= 8 * rep.radius - 1e-9
        near = min(np.linalg.norm(c - l.sender_pos), np.linalg.norm(c - l.receiver_pos))
        assert near <= rep.radius + 1e-9
    assert len(rep.links) == rep.psi


def _random_links(draw_pts, lens):
    out = []
    for i, ((x, y), (d, t)) in enumerate(zip(draw_pts, lens)):
        out.append(mklink(2 * i, 2 * i + 1, (x, y), (x + d * math.cos(t), y + d * math.sin(t))))
    return out


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=1, max_size=7),
    st.lists(st.tuples(st.sampled_from([1.0, 2.0, 5.0, 16.0, 40.0]), st.floats(0, 6.28)), min_size=7, max_size=7),
)
def test_sparsity_matches_bruteforce(pts, lens):
    links = _random_links(pts, lens)
    assert sparsity(links).psi == sparsity_bruteforce(links).psi


def test_min_enclosing_ball():
    c, r = min_enclosing_ball(np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.1]]))
    assert r == pytest.approx(1.0)
    assert np.allclose(c, [1.0, 0.0])
    c, r = min_enclosing_ball(np.array([[0.0, 0.0], [2.0, 0.0], [1.0, math.sqrt(3)]]))
    assert r == pytest.approx(2 / math.sqrt(3))


def test_independence_examples():
    a = mklink(0, 1, (0, 0), (1, 0))
    b = mklink(2, 3, (10, 0), (11, 0))
    assert independence_check(a, b, 3.0)  # 11 * 9 = 99 >= 9
    c = mklink(1, 4, (1, 0), (2, 0))
    assert not independence_check(a, c, 0.1)
    assert partition_independent([a, c], 0.1).class_count == 2
    assert partition_independent([], 2.0).class_count == 0


def test_partition_classes_are_independent():
    inst = generate(GeneratorSpec("uniform", 40, 1))
    tree = run_init(inst, InitParams(), ModelParams(), 1).tree
    links = list(tree.up_linkset())
    part = partition_independent(links, 2.0)
    for cls in part.classes:
        for i in cls:
            for j in cls:
                if i != j:
                    assert independence_check(links[i], links[j], 2.0)
    assert sorted(i for c in part.classes for i in c) == list(range(len(links)))


def test_f_value_and_amenability(params):
    short = mklink(0, 1, (0, 0), (1, 0))
    longer = mklink(2, 3, (50, 0), (53, 0))
    ctx = PowerContext.for_links([short, longer], params)
    assert f_value(longer, short, ctx, params) == 0.0
    far = mklink(2, 3, (100, 0), (101, 0))
    ctx = PowerContext.for_links([short, far], params)
    expect = affectance(Transmitter(2, far.sender_pos, ctx.uniform), short, ctx.uniform, params) + affectance(
        Transmitter(0, short.sender_pos, ctx.linear_power(short, params)),
        far,
        ctx.linear_power(far, params),
        params,
    )
    got = f_value(short, far, ctx, params)
    assert got == pytest.approx(expect)
    assert got < 1e-4
    assert amenability([short], params) == 0.0


def test_upsilon_shape():
    assert upsilon(1, 1.0) == 1.0
    assert upsilon(256, 16.0) == pytest.approx(8 + 2)
    assert upsilon(256, 16.0, const=2.0) == pytest.approx(20)


def test_latency_formula(params):
    inst = Instance(range(8), [(i, 0) for i in range(8)])
    t = chain_tree(inst, list(range(8)), [1, 2, 3, 4, 5, 6, 7])
    assert t.schedule_length == 7
    assert latency(t) == (7, 7, 14)


@pytest.mark.parametrize("fam", ["uniform", "grid", "clusters", "expline"])
def test_init_outputs_verify(params, fam):
    n = 10 if fam == "expline" else 36
    inst = generate(GeneratorSpec(fam, n, 7))
    assert verify_bitree(run_init(inst, InitParams(), params, 7).tree, params).ok
