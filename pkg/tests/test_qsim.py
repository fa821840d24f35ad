import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qattest.errors import ResourceError
from qattest.qsim import (
    GATES,
    BellOutcome,
    StateVector,
    UnitaryOp,
    amplitude_encode,
    apply_gate,
    bell_state,
    fidelity,
    inner_product,
    make_basis_state,
    make_rng,
    measure_bell,
    measure_computational,
    qubit_state,
    random_state,
    random_unitary,
    ry,
    states_equal,
    swap_test,
    swap_test_many,
    tensor_product,
    tomography_estimate,
)

S = 1 / math.sqrt(2)


def sigma(p, n):
    return math.sqrt(p * (1 - p) / n)


angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


@st.composite
def states(draw, n_qubits=1):
    re = draw(st.lists(st.floats(-1, 1), min_size=2**n_qubits, max_size=2**n_qubits))
    im = draw(st.lists(st.floats(-1, 1), min_size=2**n_qubits, max_size=2**n_qubits))
    v = np.array(re) + 1j * np.array(im)
    if np.linalg.norm(v) < 1e-3:
        v[0] = 1.0
    return StateVector.normalized(v)


class TestStateVector:
    def test_rejects_unnormalized_and_bad_lengths(self):
        with pytest.raises(ValueError):
            StateVector([1, 1])
        with pytest.raises(ValueError):
            StateVector([1, 0, 0])
        with pytest.raises(ValueError):
            StateVector.normalized([0, 0])

    def test_is_read_only(self):
        s = make_basis_state(1, 0)
        with pytest.raises(ValueError):
            s.amps[0] = 0

    @pytest.mark.parametrize("n,idx,bits", [(1, 0, "0"), (2, 3, "11"), (3, 5, "101")])
    def test_basis_states(self, n, idx, bits):
        s = make_basis_state(n, idx)
        assert s.n_qubits == n
        assert s.amps[int(bits, 2)] == 1
        assert np.count_nonzero(s.amps) == 1

    def test_basis_state_index_out_of_range(self):
        with pytest.raises(ValueError):
            make_basis_state(2, 4)


class TestTensorAndInner:
    def test_separable_products(self):
        zero, one = make_basis_state(1, 0), make_basis_state(1, 1)
        assert states_equal(tensor_product(zero, one), make_basis_state(2, 1))
        plus = qubit_state(S, S)
        assert np.allclose(tensor_product(zero, plus).amps, [S, S, 0, 0])

    def test_teleport_composite_expansion(self):
        a, b = 0.6, 0.8
        comp = tensor_product(qubit_state(a, b), bell_state(BellOutcome.PHI_PLUS))
        expected = np.zeros(8)
        expected[[0b000, 0b011]] = a * S
        expected[[0b100, 0b111]] = b * S
        assert np.allclose(comp.amps, expected)

    def test_inner_product_is_conjugate_linear_in_first(self):
        a = qubit_state(1j * S, S)
        b = make_basis_state(1, 0)
        assert inner_product(a, b) == pytest.approx(-1j * S)

    def test_worked_overlaps(self):
        five = inner_product(amplitude_encode([1, 0, 1, 1, 0]), amplitude_encode([0, 0, 1, 1, 0]))
        six = inner_product(amplitude_encode([1, 0, 1, 1, 0, 1]), amplitude_encode([0, 0, 1, 1, 0, 1]))
        assert abs(five - 0.8166) < 1e-3
        assert abs(six - 0.8661) < 1e-3

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(make_basis_state(1, 0), make_basis_state(2, 0))


class TestGates:
    def test_hadamard_and_cnot(self):
        assert np.allclose(apply_gate(make_basis_state(1, 0), "H", 0).amps, [S, S])
        assert states_equal(apply_gate(make_basis_state(2, 0b10), "CNOT", [0, 1]), make_basis_state(2, 0b11))

    @given(angles)
    def test_ry_convention_on_one(self, theta):
        out = apply_gate(make_basis_state(1, 1), ry(theta), 0)
        assert np.allclose(out.amps, [math.sin(theta / 2), math.cos(theta / 2)], atol=1e-12)

    @given(angles, angles)
    def test_ry_composes_additively(self, a, b):
        assert np.allclose(ry(a).matrix @ ry(b).matrix, ry(a + b).matrix, atol=1e-12)

    @settings(max_examples=50)
    @given(states(3), st.sampled_from(["H", "X", "Y", "Z"]), st.integers(0, 2))
    def test_norm_preserved(self, s, g, q):
        out = apply_gate(s, g, q)
        assert abs(np.linalg.norm(out.amps) - 1) < 1e-9

    def test_gate_on_inner_qubit_matches_kron(self):
        rng = make_rng(4)
        s = random_state(3, rng)
        full = np.kron(np.kron(np.eye(2), GATES["H"].matrix), np.eye(2))
        assert np.allclose(apply_gate(s, "H", 1).amps, full @ s.amps)

    def test_cnot_reversed_targets(self):
        # control qubit 1, target qubit 0: |01> -> |11>
        assert states_equal(apply_gate(make_basis_state(2, 0b01), "CNOT", [1, 0]), make_basis_state(2, 0b11))

    @pytest.mark.parametrize("targets", [[0, 0], [3], [-1]])
    def test_bad_targets(self, targets):
        with pytest.raises(ValueError):
            apply_gate(make_basis_state(2, 0), "CNOT" if len(targets) == 2 else "X", targets)

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError):
            UnitaryOp(np.array([[1, 1], [0, 1]]))


class TestMeasurement:
    def test_basis_state_is_deterministic(self):
        rng = make_rng(0)
        for _ in range(100):
            (bit,), post = measure_computational(make_basis_state(1, 1), 0, rng)
            assert bit == 1 and states_equal(post, make_basis_state(1, 1))

    def test_plus_state_frequency(self):
        rng = make_rng(1)
        n = 100_000
        zeros = sum(measure_computational(qubit_state(S, S), 0, rng)[0][0] == 0 for _ in range(n))
        assert abs(zeros / n - 0.5) <= 3 * sigma(0.5, n)

    def test_entangled_halves_agree(self):
        rng = make_rng(2)
        for label in BellOutcome:
            for _ in range(200):
                (a,), post = measure_computational(bell_state(label), 0, rng)
                (b,), _ = measure_computational(post, 1, rng)
                equal = label in (BellOutcome.PHI_PLUS, BellOutcome.PHI_MINUS)
                assert (a == b) == equal

    def test_born_rule_three_qubits(self):
        rng = make_rng(3)
        s = random_state(3, rng)
        n = 100_000
        counts = np.zeros(8)
        for _ in range(n):
            bits, _ = measure_computational(s, [0, 1, 2], rng)
            counts[int("".join(map(str, bits)), 2)] += 1
        p = s.probabilities()
        assert np.all(np.abs(counts / n - p) <= 4 * np.sqrt(p * (1 - p) / n))

    def test_outcome_order_follows_argument(self):
        rng = make_rng(0)
        bits, _ = measure_computational(make_basis_state(2, 0b10), [1, 0], rng)
        assert bits == (0, 1)

    def test_same_seed_same_outcomes(self):
        s = random_state(2, make_rng(9))
        ra, rb = make_rng(11), make_rng(11)
        seq_a = [measure_computational(s, [0, 1], ra)[0] for _ in range(50)]
        seq_b = [measure_computational(s, [0, 1], rb)[0] for _ in range(50)]
        assert seq_a == seq_b


class TestBellMeasurement:
    def test_phi_plus_certain(self):
        rng = make_rng(0)
        assert all(measure_bell(bell_state(BellOutcome.PHI_PLUS), (0, 1), rng)[0] is BellOutcome.PHI_PLUS for _ in range(100))

    @pytest.mark.parametrize("label", list(BellOutcome))
    def test_each_bell_state_identified(self, label):
        assert measure_bell(label.state(), (0, 1), make_rng(0))[0] is label

    def test_teleport_composite_uniform(self):
        rng = make_rng(1)
        comp = tensor_product(qubit_state(0.6, 0.8), bell_state(BellOutcome.PHI_PLUS))
        n = 100_000
        counts = {o: 0 for o in BellOutcome}
        for _ in range(n):
            counts[measure_bell(comp, (0, 1), rng)[0]] += 1
        for c in counts.values():
            assert abs(c / n - 0.25) <= 3 * sigma(0.25, n)

    def test_01_splits_between_psi_states(self):
        rng = make_rng(2)
        n = 20_000
        outs = [measure_bell(make_basis_state(2, 1), (0, 1), rng)[0] for _ in range(n)]
        assert set(outs) == {BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS}
        frac = outs.count(BellOutcome.PSI_PLUS) / n
        assert abs(frac - 0.5) <= 3 * sigma(0.5, n)

    def test_bits_bijection(self):
        assert {o.bits for o in BellOutcome} == {(0, 0), (0, 1), (1, 0), (1, 1)}
        for o in BellOutcome:
            assert BellOutcome.from_bits(o.bits) is o


class TestSwapTest:
    def test_identical_states_always_zero(self):
        rng = make_rng(0)
        s = random_state(2, rng)
        assert swap_test_many(s, s, 10_000, rng).sum() == 0

    def test_orthogonal_states_half(self):
        rng = make_rng(1)
        n = 100_000
        f = 1 - swap_test_many(make_basis_state(1, 0), make_basis_state(1, 1), n, rng).mean()
        assert abs(f - 0.5) <= 3 * sigma(0.5, n)

    def test_worked_pair_detection(self):
        rng = make_rng(2)
        a, b = amplitude_encode([1, 0, 1, 1, 0]), amplitude_encode([0, 0, 1, 1, 0])
        n = 100_000
        det = swap_test_many(a, b, n, rng).mean()
        p = 0.5 - fidelity(a, b) / 2
        assert abs(p - (0.5 - 0.8166**2 / 2)) < 1e-3
        assert abs(det - p) <= 3 * sigma(p, n)

    def test_single_and_batched_agree_in_law(self):
        rng = make_rng(3)
        a, b = random_state(1, rng), random_state(1, rng)
        n = 20_000
        single = np.mean([swap_test(a, b, rng) for _ in range(n)])
        batched = swap_test_many(a, b, n, rng).mean()
        assert abs(single - batched) <= 4 * math.sqrt(2) * sigma(batched, n)


class TestAmplitudeEncoding:
    def test_examples(self):
        assert states_equal(amplitude_encode([1, 0, 0, 0]), make_basis_state(2, 0))
        v = amplitude_encode([1, 0, 1, 1, 0])
        assert v.dim == 8
        assert np.allclose(v.amps, np.array([1, 0, 1, 1, 0, 0, 0, 0]) / math.sqrt(3))
        assert np.allclose(amplitude_encode([3, 4]).amps, [0.6, 0.8])

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            amplitude_encode([0, 0, 0])


class TestTomography:
    def test_basis_source(self):
        est = tomography_estimate(iter([make_basis_state(1, 0)] * 1000), 1000, make_rng(0))
        assert np.array_equal(est, [1, 0])

    def test_plus_source(self):
        est = tomography_estimate(iter([qubit_state(S, S)] * 10_000), 10_000, make_rng(1))
        assert np.all(np.abs(est - S) < 0.02)

    def test_exhaustion_raises(self):
        with pytest.raises(ResourceError):
            tomography_estimate(iter([make_basis_state(1, 0)] * 3), 4, make_rng(0))

    def test_consumes_exactly_n(self):
        it = iter([make_basis_state(1, 0)] * 10)
        tomography_estimate(it, 7, make_rng(0))
        assert len(list(it)) == 3

    def test_error_shrinks_as_inverse_sqrt(self):
        rng = make_rng(2)
        s = random_state(4, rng)
        ns = [1_000, 4_000, 16_000, 64_000]
        med = []
        for n in ns:
            errs = [np.max(np.abs(tomography_estimate(iter([s] * n), n, rng) - np.abs(s.amps))) for _ in range(200)]
            med.append(np.median(errs))
        slope = np.polyfit(np.log(ns), np.log(med), 1)[0]
        assert abs(slope + 0.5) <= 0.1


class TestRandomUnitary:
    def test_unitary(self):
        u = random_unitary(2, make_rng(0)).matrix
        assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-9)

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4, 8]))
    def test_preserves_overlap(self, seed, dim):
        rng = make_rng(seed)
        n = dim.bit_length() - 1
        u = random_unitary(dim, rng)
        a, b = random_state(n, rng), random_state(n, rng)
        assert abs(abs(inner_product(u(a), u(b))) - abs(inner_product(a, b))) < 1e-9

    def test_haar_second_moment(self):
        rng = make_rng(1)
        vals = np.array([abs(random_unitary(4, rng).matrix[0, 0]) ** 2 for _ in range(1000)])
        assert abs(vals.mean() - 0.25) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            random_unitary(3, make_rng(0))
