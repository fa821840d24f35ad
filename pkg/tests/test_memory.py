import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from qattest.memory import (
    ClassicalMemory,
    QuantumMemory,
    angle_qubit,
    checksum_chain,
    checksum_to_angle,
    chk,
    gen,
    quantum_memory_read,
    random_bitstring,
    read,
)
from qattest.qsim import StateVector, make_basis_state, make_rng, random_state, states_equal


def test_gen_is_deterministic():
    nonce = bytes(range(16))
    assert gen(nonce, (1, 0), 1024) == gen(nonce, (1, 0), 1024)


def test_gen_sensitive_to_chained_bits():
    rng = make_rng(0)
    trials = 1000
    differ = 0
    for _ in range(trials):
        n = random_bitstring(128, rng)
        differ += gen(n, (0, 0), 1024)[1] != gen(n, (0, 1), 1024)[1]
    assert differ / trials >= 1 - 2 / 1024


def test_gen_addresses_uniform():
    rng = make_rng(1)
    nonce = random_bitstring(128, rng)
    counts = np.zeros(256)
    for _ in range(100_000):
        nonce, a = gen(nonce, (), 256)
        counts[a] += 1
    assert chisquare(counts).pvalue > 0.001


def test_gen_nonce_length_matches():
    nxt, a = gen(bytes(16), (), 7)
    assert len(nxt) == 16 and 0 <= a < 7


def test_read_bounds():
    mem = ClassicalMemory([11, 22], width=32)
    assert read(mem, 0) == 11
    assert read(mem, mem.m - 1) == 22
    with pytest.raises(ValueError):
        read(mem, mem.m)


def test_chk_deterministic_and_rot_sensitive():
    rng = make_rng(2)
    for _ in range(1000):
        prev = random_bitstring(128, rng)
        word = int(rng.integers(2**32))
        assert chk(prev, word, (0, 1)) == chk(prev, word, (0, 1))
        assert chk(prev, word, (0, 1)) != chk(prev, word, (1, 0))


GOLDEN_CHECKSUM = "4095eadd5030f8d25d4d752285bffc10"
GOLDEN_ADDRESSES = [0, 6, 6, 2, 7, 2, 6, 5]


def test_chain_golden_value():
    mem = ClassicalMemory([0x01234567, 0x89ABCDEF, 0xDEADBEEF, 0x0BADF00D, 0, 1, 2, 0xFFFFFFFF])
    res = checksum_chain(mem, bytes(16), bytes([0xA5] * 16), (1, 0), (0, 1), 16)
    assert res.checksum.hex() == GOLDEN_CHECKSUM
    assert res.addresses[:8] == GOLDEN_ADDRESSES


def test_chain_matches_stepwise_primitives():
    rng = make_rng(3)
    mem = ClassicalMemory.random(64, rng)
    nonce, m = random_bitstring(128, rng), random_bitstring(128, rng)
    res = checksum_chain(mem, nonce, m, (1, 1), (0, 1), 20)
    for _ in range(20):
        nonce, a = gen(nonce, (1, 1), mem.m)
        m = chk(m, read(mem, a), (0, 1))
    assert (res.nonce, res.checksum) == (nonce, m)


def test_single_bit_flip_changes_visited_checksum():
    rng = make_rng(4)
    for _ in range(1000):
        mem = ClassicalMemory.random(16, rng, width=8)
        nonce, m = random_bitstring(128, rng), random_bitstring(128, rng)
        res = checksum_chain(mem, nonce, m, (0, 0), (0, 0), 64)
        a = res.addresses[int(rng.integers(len(res.addresses)))]
        bad = mem.flip_bits([a * 8 + int(rng.integers(8))])
        assert checksum_chain(bad, nonce, m, (0, 0), (0, 0), 64).checksum != res.checksum


def test_coverage_after_m_log_m_draws():
    rng = make_rng(5)
    m = 256
    unvisited = []
    for _ in range(50):
        res = checksum_chain(ClassicalMemory.random(m, rng), random_bitstring(128, rng), bytes(16), (), (), int(m * math.log(m)))
        unvisited.append(m - len(set(res.addresses)))
    # expected m(1 - 1/m)^{m ln m} ~ 1 word
    assert np.mean(unvisited) <= 1.5


def test_angle_bounds_and_examples():
    assert checksum_to_angle(bytes(16)) == 0.0
    top = checksum_to_angle(b"\xff" * 16)
    # one quantization step below pi, plus float rounding
    assert top < math.pi and math.pi - top <= 2 * math.pi * 2**-52
    with pytest.raises(ValueError):
        checksum_to_angle(bytes(6))


@given(st.binary(min_size=7, max_size=32))
def test_angle_always_in_range(b):
    assert 0.0 <= checksum_to_angle(b) <= math.pi


def test_equal_checksums_give_identical_qubits():
    m = bytes(range(16))
    assert np.array_equal(angle_qubit(checksum_to_angle(m)).amps, angle_qubit(checksum_to_angle(bytes(m))).amps)


def test_angle_qubit_form():
    th = 1.234
    assert np.allclose(angle_qubit(th).amps, [math.sin(th / 2), math.cos(th / 2)])


class TestClassicalMemory:
    @pytest.mark.parametrize("width", [8, 16, 32, 64])
    def test_save_load_round_trip(self, tmp_path, width):
        mem = ClassicalMemory.random(37, make_rng(6), width)
        mem.save(tmp_path / "m.bin")
        back = ClassicalMemory.load(tmp_path / "m.bin")
        assert back.width == width and np.array_equal(back.words, mem.words)

    def test_image_layout(self, tmp_path):
        ClassicalMemory([1, 2], width=16).save(tmp_path / "m.bin")
        data = (tmp_path / "m.bin").read_bytes()
        assert data == b"QMEM" + (16).to_bytes(2, "little") + (2).to_bytes(4, "little") + b"\x01\x00\x02\x00"

    def test_load_rejects_garbage(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"nope")
        with pytest.raises(ValueError):
            ClassicalMemory.load(tmp_path / "bad.bin")

    def test_flip_bits_and_distances(self):
        mem = ClassicalMemory([0, 0, 0, 0], width=8)
        bad = mem.flip_bits([0, 9])
        assert list(bad.words) == [1, 2, 0, 0]
        assert bad.hamming(mem) == 2 / 32
        assert bad.word_distance(mem) == 0.5
        assert list(mem.words) == [0, 0, 0, 0]

    def test_invalid(self):
        with pytest.raises(ValueError):
            ClassicalMemory([], width=32)
        with pytest.raises(ValueError):
            ClassicalMemory([1], width=12)


class TestQuantumMemory:
    def test_basis_index_gives_word(self):
        rng = make_rng(7)
        qmem = QuantumMemory(tuple(random_state(1, rng) for _ in range(4)))
        out = quantum_memory_read(qmem, make_basis_state(2, 2))
        assert states_equal(out, StateVector(np.kron(make_basis_state(2, 2).amps, qmem.stored[2].amps)))

    def test_uniform_index_two_words(self):
        qmem = QuantumMemory((make_basis_state(1, 0), make_basis_state(1, 1)))
        idx = StateVector([1 / math.sqrt(2)] * 2)
        out = quantum_memory_read(qmem, idx)
        assert np.allclose(out.amps, np.array([1, 0, 0, 1]) / math.sqrt(2))

    def test_output_normalized(self):
        rng = make_rng(8)
        for _ in range(20):
            qmem = QuantumMemory(tuple(random_state(1, rng) for _ in range(8)))
            out = quantum_memory_read(qmem, random_state(3, rng))
            assert abs(np.linalg.norm(out.amps) - 1) < 1e-9

    def test_dimension_mismatch(self):
        qmem = QuantumMemory(tuple(make_basis_state(1, 0) for _ in range(4)))
        with pytest.raises(ValueError):
            quantum_memory_read(qmem, make_basis_state(3, 0))

    def test_weight_beyond_memory_rejected(self):
        qmem = QuantumMemory(tuple(make_basis_state(1, 0) for _ in range(3)))
        with pytest.raises(ValueError):
            quantum_memory_read(qmem, make_basis_state(2, 3))


def test_honest_parties_compute_identical_chains():
    rng = make_rng(9)
    mem = ClassicalMemory.random(1024, rng)
    copy = ClassicalMemory(mem.words.copy(), mem.width)
    nonce, m = random_bitstring(128, rng), random_bitstring(128, rng)
    a, b = (nonce, m), (nonce, m)
    for i in range(4):
        ra = checksum_chain(mem, *a, (i & 1, i >> 1), (0, 1), 64)
        rb = checksum_chain(copy, *b, (i & 1, i >> 1), (0, 1), 64)
        assert ra == rb
        a, b = (ra.nonce, ra.checksum), (rb.nonce, rb.checksum)
