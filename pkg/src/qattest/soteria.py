"""The Soteria baseline: ideal QPUF, quantum- and classical-memory variants.

The QPUF is a lazily filled random-oracle table keyed on the classical
amplitude vector that prepared the challenge state.
"""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .errors import DecodeError
from .memory import (
    DEFAULT_LAMBDA,
    ClassicalMemory,
    QuantumMemory,
    checksum_chain,
    prf_stream,
    quantum_memory_read,
)
from .qsim import (
    Rng,
    StateVector,
    amplitude_encode,
    random_state,
    swap_test,
    tomography_estimate,
)

HAAR, BITSTRING = "haar", "bitstring"


def _descriptor(challenge: StateVector) -> tuple[float, ...]:
    a = challenge.amps
    key = np.round(a.real, 12) + 0.0  # drop negative zeros
    if np.any(np.abs(a.imag) > 1e-12):
        key = np.concatenate([key, np.round(a.imag, 12) + 0.0])
    return tuple(float(x) for x in key)


@dataclass(eq=False)
class QpufTable:
    """Ideal QPUF: each challenge descriptor maps to one fixed random response.

    ``kind="haar"`` gives Haar-random responses on ``response_qubits`` qubits;
    ``kind="bitstring"`` gives the amplitude encoding of a random
    ``kappa``-bit string of Hamming weight ``weight``, the form the classical
    variant has to decode.
    """

    kappa: int
    seed: int = 0
    kind: str = HAAR
    response_qubits: int | None = None
    weight: int | None = None
    responses: dict[tuple[float, ...], StateVector] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kappa < 2:
            raise ValueError("kappa must be >= 2")
        if self.kind not in (HAAR, BITSTRING):
            raise ValueError(f"unknown QPUF kind {self.kind!r}")
        if self.response_qubits is None:
            self.response_qubits = (self.kappa - 1).bit_length()
        if self.kind == BITSTRING:
            self.weight = self.kappa // 2 if self.weight is None else self.weight
            if not 1 <= self.weight <= self.kappa:
                raise ValueError("weight must be in [1, kappa]")
        self._lock = threading.Lock()

    @property
    def norm(self) -> float:
        """Normalizing factor of bitstring responses, public to both parties."""
        if self.kind != BITSTRING:
            raise ValueError("only bitstring responses carry a normalizing factor")
        return float(np.sqrt(self.weight))

    def _fresh_response(self, key: tuple[float, ...]) -> StateVector:
        digest = hashlib.sha256(repr(key).encode()).digest()
        rng = np.random.default_rng([self.seed, int.from_bytes(digest[:8], "big")])
        if self.kind == HAAR:
            return random_state(self.response_qubits, rng)
        bits = np.zeros(self.kappa)
        bits[rng.choice(self.kappa, size=self.weight, replace=False)] = 1
        return amplitude_encode(bits)

    def lookup(self, challenge: StateVector) -> StateVector:
        key = _descriptor(challenge)
        resp = self.responses.get(key)
        if resp is None:
            with self._lock:
                resp = self.responses.setdefault(key, self._fresh_response(key))
        return resp

    def to_json(self) -> dict:
        return {
            "kappa": self.kappa,
            "seed": self.seed,
            "kind": self.kind,
            "response_qubits": self.response_qubits,
            "weight": self.weight,
            "responses": [
                {"descriptor": list(k), "re": v.amps.real.tolist(), "im": v.amps.imag.tolist()}
                for k, v in self.responses.items()
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "QpufTable":
        table = cls(doc["kappa"], doc["seed"], doc["kind"], doc["response_qubits"], doc["weight"])
        for entry in doc["responses"]:
            amps = np.asarray(entry["re"]) + 1j * np.asarray(entry["im"])
            table.responses[tuple(float(x) for x in entry["descriptor"])] = StateVector(amps)
        return table

    def save(self, path: str | PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str | PathLike) -> "QpufTable":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def qpuf_eval(table: QpufTable, challenge: StateVector) -> StateVector:
    """Response to one copy of ``challenge``; the copy is used up by the call."""
    return table.lookup(challenge)


def random_challenge_bits(kappa: int, rng: Rng) -> np.ndarray:
    """Uniform nonzero ``kappa``-bit string."""
    while True:
        bits = rng.integers(0, 2, size=kappa)
        if bits.any():
            return bits


def encode_bits(bits: Sequence[int]) -> StateVector:
    return amplitude_encode(np.asarray(bits, dtype=float))


def soteria_setup(table: QpufTable, n_pairs: int, rng: Rng) -> list[tuple[StateVector, StateVector]]:
    """Challenge/response pairs recorded by the verifier during setup."""
    pairs = []
    for _ in range(n_pairs):
        c = encode_bits(random_challenge_bits(table.kappa, rng))
        pairs.append((c, qpuf_eval(table, c)))
    return pairs


@dataclass(frozen=True)
class SoteriaParams:
    kappa: int = 8
    copies: int = 1
    swap_trials: int = 1
    steps: int = 64
    lam: int = DEFAULT_LAMBDA

    def __post_init__(self) -> None:
        if self.kappa < 2:
            raise ValueError("kappa must be >= 2")
        if self.copies < 1:
            raise ValueError("copies must be >= 1")
        if self.swap_trials < 1:
            raise ValueError("swap_trials must be >= 1")


def round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(x) + 0.5).astype(np.int64)


def extract_string(
    table: QpufTable, challenge_copies: Iterable[StateVector], n_copies: int, rng: Rng
) -> np.ndarray:
    """Query the QPUF on each challenge copy and decode ``r_i = round(N * |alpha_i|)``.

    The result is an integer vector; it is a valid bitstring only when every
    entry is 0 or 1.
    """
    responses = (qpuf_eval(table, c) for c in challenge_copies)
    est = tomography_estimate(responses, n_copies, rng)
    return round_half_up(table.norm * est)[: table.kappa]


def _pack(bits: Sequence[int]) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def soteria_checksum(mem: ClassicalMemory, seed_bits: Sequence[int], steps: int, lam: int = DEFAULT_LAMBDA) -> bytes:
    """Partial memory checksum seeded by ``seed_bits`` (``r xor R_w``)."""
    nonce = prf_stream(b"S", _pack(seed_bits), lam // 8)
    return checksum_chain(mem, nonce, bytes(lam // 8), (), (), steps).checksum


def encode_checksum(sigma: bytes) -> StateVector:
    return encode_bits(np.unpackbits(np.frombuffer(sigma, dtype=np.uint8)))


def soteria_respond_classical(
    mem: ClassicalMemory,
    challenge_copies: Sequence[StateVector],
    R_w: Sequence[int],
    table: QpufTable,
    rng: Rng,
    steps: int = 64,
    lam: int = DEFAULT_LAMBDA,
) -> StateVector:
    """Prover side of classical-memory Soteria.

    Raises :class:`DecodeError` when tomography on the available copies does
    not yield a bitstring.
    """
    r = extract_string(table, challenge_copies, len(challenge_copies), rng)
    if np.any((r != 0) & (r != 1)):
        raise DecodeError(f"decoded string is not binary: {r.tolist()}")
    seed = np.bitwise_xor(r, np.asarray(R_w, dtype=np.int64))
    return encode_checksum(soteria_checksum(mem, seed, steps, lam))


def soteria_verify(response: StateVector, expected: StateVector, swap_trials: int, rng: Rng) -> bool:
    """Pass unless one of ``swap_trials`` SWAP tests outputs 1."""
    return not any(swap_test(response, expected, rng) for _ in range(swap_trials))


def soteria_respond_quantum(qmem: QuantumMemory, challenge: StateVector, table: QpufTable) -> StateVector:
    """Quantum-memory Soteria: the QPUF output indexes the memory directly."""
    return quantum_memory_read(qmem, qpuf_eval(table, challenge))


# ------------------------------------------------------------------ analysis


def single_copy_agreement(response: StateVector) -> float:
    """Probability that two single-shot measurements of ``response`` coincide."""
    return float(np.sum(response.probabilities() ** 2))


def detection_probability(overlap_sq: float, swap_trials: int = 1) -> float:
    """Chance that ``swap_trials`` SWAP tests catch states with ``|<a|b>|^2 = overlap_sq``."""
    return 1.0 - (0.5 + overlap_sq / 2) ** swap_trials


def agreement_rate(
    response: StateVector, norm: float, copies: int, trials: int, rng: Rng, kappa: int | None = None
) -> float:
    """Fraction of trials where prover and verifier decode the same string.

    Vectorized equivalent of calling :func:`extract_string` twice with
    ``copies`` fresh copies each.
    """
    p = response.probabilities()
    p = p / p.sum()
    kappa = response.dim if kappa is None else kappa
    decoded = [
        round_half_up(norm * np.sqrt(rng.multinomial(copies, p, size=trials) / copies))[:, :kappa]
        for _ in range(2)
    ]
    return float(np.mean(np.all(decoded[0] == decoded[1], axis=1)))


def l2_accuracy_rate(response: StateVector, norm: float, copies: int, trials: int, rng: Rng) -> float:
    """Fraction of tomography runs whose amplitude estimate is within ``1/(2N)`` in 2-norm."""
    p = response.probabilities()
    p = p / p.sum()
    est = np.sqrt(rng.multinomial(copies, p, size=trials) / copies)
    err = np.linalg.norm(est - np.sqrt(p), axis=1)
    return float(np.mean(err < 1.0 / (2.0 * norm)))


def min_copies(rate_fn, target: float = 0.95, limit: int = 1 << 20) -> int:
    """Smallest ``n`` with ``rate_fn(n) >= target`` by doubling then bisection."""
    hi = 1
    while rate_fn(hi) < target:
        hi *= 2
        if hi > limit:
            raise RuntimeError(f"no copy count up to {limit} reaches {target}")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rate_fn(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def sampled_overlap_sq(b: int, eps: float, trials: int, rng: Rng) -> np.ndarray:
    """``|<psi_sigma|psi_sigma*>|^2`` for ``b`` sampled bits, each flipped with probability ``eps``.

    True bits are uniform. Draws where either encoding would be the zero
    vector are rejected and redrawn.
    """
    out = np.empty(0)
    while out.size < trials:
        need = trials - out.size
        true = rng.integers(0, 2, size=(need, b), dtype=np.int8)
        flipped = true ^ (rng.random((need, b)) < eps).astype(np.int8)
        both = np.count_nonzero(true & flipped, axis=1).astype(float)
        m_true = np.count_nonzero(true, axis=1)
        m_flip = np.count_nonzero(flipped, axis=1)
        ok = (m_true > 0) & (m_flip > 0)
        out = np.concatenate([out, both[ok] ** 2 / (m_true[ok] * m_flip[ok])])
    return out[:trials]
