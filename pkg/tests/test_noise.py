import itertools
import math
from dataclasses import dataclass

import numpy as np
import pytest

from shallowsep.circuit import GateKind, LayeredCircuit, gate
from shallowsep.geometry import enumerate_disjoint_triangles, extended_gd
from shallowsep.noise import (
    NoiseModel,
    bsc_crossover,
    bsc_flip_experiment,
    cycle_satisfaction_rate,
    estimate_success,
    fault_codes,
    fidelity_lower_bound,
    frame_success,
    inject,
    localized_constraint,
    no_fault_probability,
    propagate_frames,
    slot_syndromes,
    success_probability_given_faults,
    theorem2_bound,
)
from shallowsep.oracle import graph_state_circuit, success_probability_dense
from shallowsep.relation import make_instance, random_input, sample_quantum
from shallowsep.stabcore import PauliOp, extract_affine_subspace, member, simulate


@dataclass
class Mini:
    """Just enough of a relation instance for the noise routines."""

    circuit: LayeredCircuit
    subspace: object
    column_order: object = None


def mini(c: LayeredCircuit) -> Mini:
    z = c.with_basis_change()
    return Mini(z, extract_affine_subspace(simulate(z)))


def bell():
    return mini(LayeredCircuit(2, [[gate(GateKind.H, 0)], [gate(GateKind.CNOT, 0, 1)]]))


def triangle(bases=("X", "X", "X")):
    c = graph_state_circuit(3, [(0, 1), (1, 2), (0, 2)])
    c.measure = tuple(bases)
    return mini(c)


@pytest.fixture(scope="module")
def d2():
    return make_instance(2, random_input(2, np.random.default_rng(21)))


def test_noise_model_domain():
    with pytest.raises(ValueError):
        NoiseModel(0.8)
    with pytest.raises(ValueError):
        NoiseModel(-0.1)


def test_inject_examples():
    c = LayeredCircuit(50, [[] for _ in range(4)])
    rng = np.random.default_rng(0)
    assert inject(c, NoiseModel(0.0), rng) == {}
    codes = fault_codes(c, NoiseModel(0.75), rng, 1000)
    assert abs((codes > 0).mean() - 0.75) < 0.01
    codes = fault_codes(LayeredCircuit(100, [[]] * 10), NoiseModel(0.1), rng, 100)
    hits = codes[codes > 0]
    n = codes.size
    assert abs(hits.size / n - 0.1) < 3 * math.sqrt(0.1 * 0.9 / n)
    counts = np.bincount(hits, minlength=4)[1:]
    expected = hits.size / 3
    assert (np.abs(counts - expected) < 3 * math.sqrt(expected * 2 / 3)).all()
    pattern = inject(c, NoiseModel(0.5), rng)
    assert all(0 <= layer < 4 and 0 <= q < 50 and p != PauliOp.I for (layer, q), p in pattern.items())


def test_idle_flag():
    c = LayeredCircuit(3, [[gate(GateKind.H, 0)], [gate(GateKind.CZ, 1, 2)]])
    codes = fault_codes(c, NoiseModel(0.75, idle=False), np.random.default_rng(1), 2000)
    assert not codes[0][:, 1:].any() and not codes[1][:, 0].any()
    assert no_fault_probability(c, NoiseModel(0.1, idle=False)) == pytest.approx(0.9**3)
    assert no_fault_probability(c, NoiseModel(0.1)) == pytest.approx(0.9**6)


def test_success_given_faults_examples(d2):
    s = d2.subspace
    last = d2.circuit.depth - 1
    assert success_probability_given_faults(d2, {}) == 1.0
    # a pivot column of the reduced system lies in exactly one constraint row
    red, _, piv = s.echelon_form()
    from shallowsep import gf2

    dense = gf2.unpack_bits(gf2.echelon(s.C, s.m, reduced=True)[0], s.m)
    q = next(c for c in range(s.m) if dense[:, c].sum() == 1)
    assert success_probability_given_faults(d2, {(last, q): PauliOp.X}) == 0.0
    assert success_probability_given_faults(d2, {(last, q): PauliOp.Z}) == 1.0


def test_frames_match_tableau(d2):
    rng = np.random.default_rng(3)
    for _ in range(15):
        faults = inject(d2.circuit, NoiseModel(0.004), rng)
        assert frame_success(d2, faults) == success_probability_given_faults(d2, faults)


@pytest.mark.parametrize("make", [bell, triangle, lambda: triangle(("X", "Y", "Z"))])
def test_exactness_against_dense_oracle(make):
    inst = make()
    c = inst.circuit
    valid = {tuple(int(v) for v in y) for y in inst.subspace.enumerate()}
    rng = np.random.default_rng(5)
    for _ in range(25):
        faults = inject(c, NoiseModel(0.3), rng)
        got = success_probability_given_faults(inst, faults)
        assert got == pytest.approx(success_probability_dense(c, valid, faults), abs=1e-9)
        assert frame_success(inst, faults) == got


def test_readout_fault_is_a_bit_flip(d2):
    rng = np.random.default_rng(7)
    last = d2.circuit.depth - 1
    y = sample_quantum(d2, rng)[0]
    for _ in range(20):
        codes = np.zeros((d2.circuit.depth, 1, d2.m), np.uint8)
        codes[last, 0] = np.where(rng.random(d2.m) < 0.02, rng.integers(1, 4, d2.m), 0)
        flips = propagate_frames(d2.circuit, codes)[0]
        assert (flips == (codes[last, 0] & 1)).all()
        faults = {(last, int(q)): PauliOp(int(codes[last, 0, q])) for q in np.flatnonzero(codes[last, 0])}
        assert frame_success(d2, faults) == float(member(d2.subspace, y ^ flips))


def _exact_noisy_success(inst, p):
    """Sum over every fault pattern of a tiny circuit."""
    c = inst.circuit
    n_slots = c.depth * c.qubit_count
    pats = np.array(list(itertools.product(range(4), repeat=n_slots)), dtype=np.uint8)
    codes = pats.reshape(-1, c.depth, c.qubit_count).transpose(1, 0, 2)
    flips = propagate_frames(c, codes)
    C = inst.subspace.matrix.astype(int)
    ok = ~((flips.astype(int) @ C.T) % 2).any(axis=1)
    k = (pats > 0).sum(axis=1)
    w = (p / 3) ** k * (1 - p) ** (n_slots - k)
    return float(w[ok].sum())


@pytest.mark.parametrize("p", [0.05, 0.3, 0.75])
def test_twirl_decomposition_is_exact(p):
    inst = bell()
    rows, slots = slot_syndromes(inst, NoiseModel(p))
    from shallowsep import gf2

    n = len(slots)
    twirl = 4 * p / 3
    total = 0.0
    for mask in itertools.product([0, 1], repeat=n):
        hit = np.flatnonzero(mask)
        sel = rows[np.concatenate([2 * hit, 2 * hit + 1])] if hit.size else rows[:0]
        rk = gf2.rank(sel, inst.subspace.r) if sel.size else 0
        total += twirl ** hit.size * (1 - twirl) ** (n - hit.size) * 2.0**-rk
    assert total == pytest.approx(_exact_noisy_success(inst, p), rel=1e-9)


def test_estimator_unbiased_on_mini():
    inst = bell()
    exact = _exact_noisy_success(inst, 0.1)
    rng = np.random.default_rng(0)
    for method in ("twirl", "plain"):
        mean, se = estimate_success(inst, NoiseModel(0.1), 20000, rng, method=method)
        assert abs(mean - exact) < 4 * se


def test_estimate_success_examples(d2):
    rng = np.random.default_rng(1)
    assert estimate_success(d2, NoiseModel(0.0), 10, rng) == (1.0, 0.0)
    lo, se_lo = estimate_success(d2, NoiseModel(0.01), 2000, rng)
    hi, se_hi = estimate_success(d2, NoiseModel(0.02), 2000, rng)
    assert hi < lo and lo - hi > 3 * math.hypot(se_lo, se_hi)
    with pytest.raises(ValueError):
        estimate_success(d2, NoiseModel(0.01), 0, rng)
    with pytest.raises(ValueError):
        estimate_success(d2, NoiseModel(0.01), 5, rng, method="nope")


def test_bound_chain(d2):
    rng = np.random.default_rng(2)
    guess = 2.0**-d2.subspace.r
    for p in (0.002, 0.01, 0.1):
        nm = NoiseModel(p)
        mean, se = estimate_success(d2, nm, 1000, rng)
        assert no_fault_probability(d2.circuit, nm) <= mean + 3 * se
        assert mean <= theorem2_bound(guess, p) + 3 * se


def test_bsc():
    assert bsc_crossover(0) == 0 and bsc_crossover(0.75) == 0.5
    rate, se = bsc_flip_experiment(0.3, 20000, np.random.default_rng(0))
    assert abs(rate - 0.2) < 3 * math.sqrt(0.2 * 0.8 / 20000)
    with pytest.raises(ValueError):
        bsc_crossover(0.9)


def test_theorem2_bound_examples():
    assert theorem2_bound(0.3, 0) == 1.0
    assert theorem2_bound(0.3, 0.75) == pytest.approx(0.3)
    assert theorem2_bound(2.0**-10, 0.3) == pytest.approx(2.0 ** (-10 * math.log2(1 / 0.8)))
    with pytest.raises(ValueError):
        theorem2_bound(1.5, 0.1)
    with pytest.raises(ValueError):
        theorem2_bound(0.5, 0.9)


def test_fidelity_lower_bound():
    assert fidelity_lower_bound(0, 256, 18) == 1
    assert fidelity_lower_bound(0.01, 256, 18) == pytest.approx(0.99**4608)
    assert fidelity_lower_bound(0.01, 256, 18) == pytest.approx(7.7086e-21, rel=1e-4)


def test_localized_constraints_on_cycles(d2):
    eg = extended_gd(2)
    for cyc in enumerate_disjoint_triangles(eg):
        row, beta = localized_constraint(d2.subspace, cyc)
        support = set(np.flatnonzero(row).tolist())
        assert support and support <= set(cyc)
        # the vertices it lands on are the three subdivision vertices
        assert all(eg.vclass[v] == 2 for v in support)
    assert localized_constraint(d2.subspace, [0]) is None


def test_cycle_rates(d2):
    cycles = enumerate_disjoint_triangles(extended_gd(2))
    rng = np.random.default_rng(4)
    clean = cycle_satisfaction_rate(d2, NoiseModel(0.0), cycles, 200, rng)
    assert len(clean) == len(cycles) and all(r["rate"] == 1.0 for r in clean)
    noisy = cycle_satisfaction_rate(d2, NoiseModel(0.2), cycles, 3000, rng)
    for r in noisy:
        assert r["rate"] <= r["bound"] + 3 * r["stderr"]
    # disjoint cycles: overall success is at most the product of cycle rates (with slack)
    both = np.all([r["satisfied"] for r in noisy[:2]], axis=0).mean()
    assert both <= noisy[0]["rate"] * noisy[1]["rate"] + 0.05
