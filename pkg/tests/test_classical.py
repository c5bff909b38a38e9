import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shallowsep.classical import (
    AND,
    XOR,
    BlockSimulator,
    BoolGate,
    BooleanCircuit,
    affected_bound,
    affected_per_block,
    affected_qubits,
    block_sample_success,
    block_simulate,
    block_success,
    evaluate,
    light_cone,
    partition_blocks,
    random_circuit,
    random_guess_success,
    used_gates,
)
from shallowsep.geometry import V2, VSTAR, extended_gd
from shallowsep.oracle import graph_state_circuit
from shallowsep.relation import make_instance, random_input
from shallowsep.stabcore import conditional_guess_probability, extract_affine_subspace, member, simulate


@pytest.fixture(scope="module")
def d2():
    return make_instance(2, random_input(2, np.random.default_rng(31)))


def parity_tree():
    return BooleanCircuit(4, [[BoolGate(XOR, (0, 1)), BoolGate(XOR, (2, 3))], [BoolGate(XOR, (4, 5))]], K=2)


def test_evaluate_examples():
    ident = BooleanCircuit(3, [], K=2)
    assert evaluate(ident, [1, 0, 1]).tolist() == [1, 0, 1]
    andc = BooleanCircuit(2, [[BoolGate(AND, (0, 1))]], K=2)
    assert evaluate(andc, [1, 1]).tolist() == [1]
    assert evaluate(andc, [[1, 0], [0, 1], [1, 1]]).tolist() == [[0], [0], [1]]
    assert evaluate(parity_tree(), [1, 0, 1, 0]).tolist() == [0]
    assert evaluate(parity_tree(), [1, 0, 0, 0]).tolist() == [1]
    with pytest.raises(ValueError):
        evaluate(andc, [1, 0, 1])


def test_random_wires():
    bc = BooleanCircuit(1, [[BoolGate(XOR, (0, 1))]], K=2, n_random=1)
    assert evaluate(bc, [1], [1]).tolist() == [0]
    assert light_cone(bc, 0) == {0, 1}


def test_circuit_validation():
    with pytest.raises(ValueError):
        BooleanCircuit(3, [[BoolGate((0,) * 8, (0, 1, 2))]], K=2)
    with pytest.raises(ValueError):
        BooleanCircuit(2, [[BoolGate(AND, (0, 2))]], K=2)
    with pytest.raises(ValueError):
        BoolGate((0, 1, 1), (0, 1))


def test_light_cone_examples():
    assert light_cone(BooleanCircuit(3, [], K=2), 1) == {1}
    assert light_cone(parity_tree(), 0) == {0, 1, 2, 3}
    tree = BooleanCircuit(
        8,
        [
            [BoolGate(XOR, (2 * i, 2 * i + 1)) for i in range(4)],
            [BoolGate(AND, (8, 9)), BoolGate(AND, (10, 11))],
            [BoolGate(XOR, (12, 13))],
        ],
        K=2,
    )
    assert len(light_cone(tree, 0)) <= 2**3


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_light_cone_bound(arity, depth, width, K, seed):
    bc = random_circuit(arity, depth, width, K, np.random.default_rng(seed))
    for i in range(bc.n_outputs):
        assert len(light_cone(bc, i)) <= K**depth


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_light_cone_soundness(seed):
    rng = np.random.default_rng(seed)
    bc = random_circuit(8, 4, 6, 2, rng)
    keep = used_gates(bc)
    # replace every gate outside all light cones by a constant: outputs must not move
    layers = [
        [g if (li, k) in keep else BoolGate((1,) * len(g.table), g.inputs) for k, g in enumerate(layer)]
        for li, layer in enumerate(bc.layers)
    ]
    pruned = BooleanCircuit(bc.arity, layers, bc.K)
    xs = rng.integers(0, 2, size=(32, 8), dtype=np.uint8)
    assert (evaluate(bc, xs) == evaluate(pruned, xs)).all()
    # flipping an input outside an output's cone never changes that output
    for i in range(bc.n_outputs):
        outside = [w for w in range(8) if w not in light_cone(bc, i)]
        if outside:
            ys = xs.copy()
            ys[:, outside] ^= 1
            assert (evaluate(bc, xs)[:, i] == evaluate(bc, ys)[:, i]).all()


def test_random_guess_success(d2):
    c = graph_state_circuit(3, [(0, 1), (1, 2), (0, 2)])
    c.measure = ("X",) * 3
    assert random_guess_success(extract_affine_subspace(simulate(c))) == 0.5
    c0 = graph_state_circuit(2, [(0, 1)])
    c0.measure = ("X", "X")
    assert random_guess_success(extract_affine_subspace(simulate(c0))) == 1.0
    s = d2.subspace
    assert random_guess_success(d2) == 2.0**-s.r
    assert random_guess_success(d2) == conditional_guess_probability(s, {}, range(s.m))


def test_partition_examples():
    eg = extended_gd(2)
    one = partition_blocks(2, 8)
    assert one.n_blocks == 1 and one.inter_edges == ()
    assert partition_blocks(2, 100).n_blocks == 1
    assert partition_blocks(2, 1).n_blocks == 64
    four = partition_blocks(2, 4)
    assert four.n_blocks == 4 and len(four.inter_edges) > 0
    # every vertex lands in exactly one block, with the ownership rules
    assert four.assignment.shape == (eg.n,)
    for w, (u, _) in eg.host.items():
        assert four.assignment[w] == four.assignment[u]
    for v in np.flatnonzero(eg.vclass == V2):
        x, y = np.floor(eg.coords[v]).astype(int)
        assert four.assignment[v] == (y // 4) * 2 + x // 4
    assert all(eg.vclass[u] != VSTAR or eg.vclass[v] != VSTAR for u, v in four.inter_edges)
    with pytest.raises(ValueError):
        partition_blocks(2, 0)


def test_affected_qubits(d2):
    assert affected_qubits(d2, partition_blocks(2, 8)).size == 0
    aff4 = affected_qubits(d2, partition_blocks(2, 4))
    assert 0 < aff4.size < d2.m
    depth = d2.circuit.depth
    for b in (2, 4, 8):
        assert affected_per_block(d2, partition_blocks(2, b)).max() <= affected_bound(depth, b)


def test_affected_monotone_on_nested_partitions(d2):
    # blocks of side 2 refine blocks of side 4, so their cut set contains the coarser one
    fine, coarse = partition_blocks(2, 2), partition_blocks(2, 4)
    assert set(coarse.inter_edges) <= set(fine.inter_edges)
    assert set(affected_qubits(d2, coarse)) <= set(affected_qubits(d2, fine))


def test_block_simulate_examples(d2):
    rng = np.random.default_rng(0)
    single = partition_blocks(2, 8)
    zs = block_simulate(d2, single, rng, shots=50)
    assert all(member(d2.subspace, z) for z in zs)
    part = partition_blocks(2, 4)
    sim = BlockSimulator(d2, part)
    zs = sim.sample(rng, 100)
    aff = set(sim.affected.tolist())
    for z in zs[:10]:
        fixed = {q: int(z[q]) for q in range(d2.m) if q not in aff}
        exact = conditional_guess_probability(d2.subspace, fixed, sorted(aff))
        assert exact > 0
        assert exact >= 2.0 ** -len(aff)
        assert block_sample_success(d2, part, z) == exact == sim.success(z[None, :])[0]
    assert sim.extendable(zs).all()
    assert block_simulate(d2, part, rng).shape == (d2.m,)


def test_block_success(d2):
    rng = np.random.default_rng(1)
    assert block_success(d2, partition_blocks(2, 8), 20, rng) == (1.0, 0.0)
    guess = random_guess_success(d2)
    means = {}
    for b in (8, 4, 2):
        part = partition_blocks(2, b)
        mean, se = block_success(d2, part, 200, rng)
        n_aff = affected_qubits(d2, part).size
        assert math.log(mean) >= -n_aff * math.log(2) - 3 * se / mean
        means[b] = (mean, se)
    assert means[8][0] >= means[4][0] >= means[2][0]
    assert means[4][0] > guess and means[2][0] > guess
    with pytest.raises(ValueError):
        block_success(d2, partition_blocks(2, 4), 0, rng)
