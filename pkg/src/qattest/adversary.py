"""Attack models and the adversary-win experiment.

A trial corrupts the prover's memory (or perturbs its quantum memory), lets
the corrupted prover answer a fresh challenge, and counts a win when the
protocol's own verification accepts the answer.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from scipy.special import gammaln

from .attest import ProtocolParams, default_network, replay_prover_angles, run_full_protocol
from .channels import Endpoint, NetworkConfig
from .errors import DecodeError
from .memory import ClassicalMemory, QuantumMemory, checksum_to_angle
from .qsim import (
    GATES,
    Rng,
    StateVector,
    UnitaryOp,
    derive_seed,
    inner_product,
    make_rng,
    random_state,
    swap_test_many,
)
from .soteria import (
    BITSTRING,
    QpufTable,
    encode_bits,
    encode_checksum,
    qpuf_eval,
    random_challenge_bits,
    soteria_checksum,
    soteria_respond_classical,
    soteria_respond_quantum,
    soteria_verify,
)

HAMMING, WORD = "hamming", "word"
BALL, FRACTION, ORTHOGONAL, NONE = "ball", "fraction", "orthogonal", "none"
PROTOCOLS = ("soteria_classical", "soteria_quantum", "attest")


@dataclass(frozen=True)
class AdversaryConfig:
    """Attack parameters.

    ``strategy`` picks the memory corruption: ``ball`` samples uniformly from
    ``{x : 0 < d(x, mem) < delta}``, ``fraction`` rewrites ``round(p * m)``
    random words, ``orthogonal`` ignores memory and answers Soteria with a
    state orthogonal to the expected one, ``none`` leaves memory intact
    (honest baseline, useful with ``proxy_distance``).
    """

    distance: str = HAMMING
    delta: float = 0.01
    p: float = 0.0
    eps: float = 0.0
    proxy_distance: float = 0.0
    strategy: str = BALL

    def __post_init__(self) -> None:
        if self.distance not in (HAMMING, WORD):
            raise ValueError(f"unknown distance {self.distance!r}")
        if self.strategy not in (BALL, FRACTION, ORTHOGONAL, NONE):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        if abs(self.eps) > 1.0:
            raise ValueError("|eps| must be <= 1")
        if self.proxy_distance < 0:
            raise ValueError("proxy_distance must be >= 0")


def _ball_radius(delta: float, units: int) -> int:
    """Largest integer k with k / units < delta."""
    return math.ceil(delta * units - 1e-9) - 1


def corrupt_memory(mem: ClassicalMemory, cfg: AdversaryConfig, rng: Rng) -> ClassicalMemory:
    """Draw a memory that differs from ``mem`` (see :class:`AdversaryConfig`).

    The ball sampler weights each radius ``k`` by the number of memories at
    that distance, then picks the differing positions uniformly.
    """
    if cfg.strategy == NONE:
        raise ValueError("strategy 'none' does not corrupt memory")
    if cfg.strategy == FRACTION:
        k = max(1, round(cfg.p * mem.m))
        return _rewrite_words(mem, rng.choice(mem.m, size=k, replace=False), rng)

    units = mem.total_bits if cfg.distance == HAMMING else mem.m
    kmax = min(_ball_radius(cfg.delta, units), units)
    if kmax < 1:
        raise ValueError(f"no memory lies at distance in (0, {cfg.delta}) under {cfg.distance}")
    ks = np.arange(1, kmax + 1)
    logw = gammaln(units + 1) - gammaln(ks + 1) - gammaln(units - ks + 1)
    if cfg.distance == WORD:
        logw = logw + ks * math.log(2.0**mem.width - 1)
    w = np.exp(logw - logw.max())
    k = int(rng.choice(ks, p=w / w.sum()))
    positions = rng.choice(units, size=k, replace=False)
    if cfg.distance == HAMMING:
        return mem.flip_bits(positions)
    return _rewrite_words(mem, positions, rng)


def _rewrite_words(mem: ClassicalMemory, addrs: np.ndarray, rng: Rng) -> ClassicalMemory:
    """Replace each addressed word by a uniformly chosen different value."""
    words = mem.words.astype(np.uint64)
    offsets = rng.integers(1, 2**mem.width, size=len(addrs), dtype=np.uint64)
    mask = np.uint64(2**mem.width - 1) if mem.width < 64 else np.uint64(2**64 - 1)
    words[addrs] = (words[addrs] + offsets) & mask
    return ClassicalMemory(words.astype(mem.words.dtype), mem.width)


def displacement_unitary(eps: float, rng: Rng) -> UnitaryOp:
    """Rotation about a random Bloch axis moving any qubit by exactly ``|eps|`` in 2-norm."""
    a = 2.0 * math.asin(abs(eps) / 2.0)
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    sigma = n[0] * GATES["X"].matrix + n[1] * GATES["Y"].matrix + n[2] * GATES["Z"].matrix
    return UnitaryOp(math.cos(a) * np.eye(2) - 1j * math.sin(a) * sigma)


def perturb_quantum_memory(qmem: QuantumMemory, p: float, eps: float, rng: Rng) -> QuantumMemory:
    if abs(eps) > 1.0:
        raise ValueError("|eps| must be <= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    out = []
    for s in qmem.stored:
        if rng.random() < p:
            s = StateVector.normalized(displacement_unitary(eps, rng).matrix @ s.amps)
        out.append(s)
    return QuantumMemory(tuple(out))


def orthogonal_state(state: StateVector, rng: Rng) -> StateVector:
    v = rng.normal(size=state.dim) + 1j * rng.normal(size=state.dim)
    return StateVector.normalized(v - np.vdot(state.amps, v) * state.amps)


def proxy_wrap(prover: Endpoint, colluder: Endpoint, net: NetworkConfig) -> Endpoint:
    """The prover endpoint as seen through a relaying colluder."""
    net.check(colluder)
    net.check(prover)
    return replace(prover, relay=colluder)


# ------------------------------------------------------------- experiment


def _soteria_classical_trial(cfg: AdversaryConfig, rng: Rng, kw: dict[str, Any]) -> tuple[int, float]:
    kappa = kw.get("kappa", 8)
    copies = kw.get("copies", 1)
    swap_trials = kw.get("swap_trials", 1)
    steps = kw.get("steps", 64)
    table = QpufTable(kappa, seed=int(rng.integers(2**32)), kind=BITSTRING, weight=kw.get("weight", 1))
    mem = kw["memory"] if kw.get("memory") is not None else ClassicalMemory.random(kw.get("m", 256), rng)
    challenge = encode_bits(random_challenge_bits(kappa, rng))
    R_w = rng.integers(0, 2, size=kappa)
    # the verifier knows the QPUF's bitstring from setup
    r = np.rint(table.norm * np.abs(qpuf_eval(table, challenge).amps[:kappa])).astype(np.int64)
    expected = encode_checksum(soteria_checksum(mem, np.bitwise_xor(r, R_w), steps))

    if cfg.strategy == ORTHOGONAL:
        response = orthogonal_state(expected, rng)
    else:
        bad = mem if cfg.strategy == NONE else corrupt_memory(mem, cfg, rng)
        try:
            response = soteria_respond_classical(bad, [challenge] * copies, R_w, table, rng, steps)
        except DecodeError:
            return 0, 0.0
    q = abs(inner_product(response, expected)) ** 2
    return int(soteria_verify(response, expected, swap_trials, rng)), (0.5 + q / 2) ** swap_trials


def _soteria_quantum_trial(cfg: AdversaryConfig, rng: Rng, kw: dict[str, Any]) -> tuple[float, float]:
    """Mean pass rate over ``shots`` SWAP tests for one memory/challenge draw."""
    m = kw.get("m", 16)
    shots = kw.get("shots", 1)
    qmem = kw["qmemory"] if kw.get("qmemory") is not None else QuantumMemory(tuple(random_state(1, rng) for _ in range(m)))
    table = QpufTable(qmem.m, seed=int(rng.integers(2**32)), response_qubits=qmem.index_qubits)
    challenge = random_state(table.response_qubits, rng)
    expected = soteria_respond_quantum(qmem, challenge, table)
    if cfg.strategy == ORTHOGONAL:
        response = orthogonal_state(expected, rng)
    else:
        p = 0.0 if cfg.strategy == NONE else cfg.p
        response = soteria_respond_quantum(perturb_quantum_memory(qmem, p, cfg.eps, rng), challenge, table)
    q = abs(inner_product(response, expected)) ** 2
    passed = 1.0 - swap_test_many(response, expected, shots, rng).mean()
    return float(passed), 0.5 + q / 2


def _attest_trial(cfg: AdversaryConfig, rng: Rng, kw: dict[str, Any]) -> tuple[int, float]:
    params: ProtocolParams = kw.get("params") or ProtocolParams()
    mem = kw["memory"] if kw.get("memory") is not None else ClassicalMemory.random(kw.get("m", 1024), rng)
    net = default_network(kw.get("prover_position", 50.0), params.c, kw.get("processing_delay", 0.0))
    endpoint = None
    if cfg.proxy_distance > 0:
        colluder = Endpoint("colluder", net.endpoints["prover"].position + cfg.proxy_distance)
        net.add(colluder)
        endpoint = proxy_wrap(net.endpoints["prover"], colluder, net)
    if cfg.strategy == ORTHOGONAL:
        raise ValueError("the orthogonal strategy applies to Soteria only")
    bad = mem if cfg.strategy == NONE else corrupt_memory(mem, cfg, rng)
    t = run_full_protocol(bad, mem, params, net, rng, prover_endpoint=endpoint)
    # acceptance the angle algebra predicts given the transcript's timing verdict
    if t.verdict.kind == "abort_timing":
        return 0, 0.0
    sent = replay_prover_angles(bad, t)
    expected = [checksum_to_angle(r.verifier_checksum) for r in t.rounds]
    analytic = float(np.prod([math.cos((a - b) / 2) ** 2 for a, b in zip(sent, expected)]))
    return int(t.verdict.accepted), analytic


_TRIALS = {
    "soteria_classical": _soteria_classical_trial,
    "soteria_quantum": _soteria_quantum_trial,
    "attest": _attest_trial,
}


def _run_chunk(protocol: str, cfg: AdversaryConfig, seeds: list[int], kw: dict[str, Any]) -> list[tuple[float, float]]:
    fn = _TRIALS[protocol]
    return [fn(cfg, make_rng(s), kw) for s in seeds]


@dataclass(frozen=True)
class SecurityResult:
    """Per-trial win values (0/1, or a pass rate) and predicted pass probabilities."""

    outcomes: np.ndarray
    predicted: np.ndarray

    @property
    def trials(self) -> int:
        return self.outcomes.size

    @property
    def wins(self) -> float:
        return float(self.outcomes.sum())

    @property
    def freq(self) -> float:
        return float(self.outcomes.mean())

    @property
    def se(self) -> float:
        if self.trials < 2:
            return 0.0
        return float(self.outcomes.std(ddof=1) / math.sqrt(self.trials))

    @property
    def analytic(self) -> float:
        return float(self.predicted.mean())


def run_security_experiment(
    protocol: str,
    cfg: AdversaryConfig,
    trials: int,
    rng: Rng,
    workers: int = 1,
    **kw: Any,
) -> SecurityResult:
    """Repeat corrupt -> respond -> verify ``trials`` times.

    Trial ``i`` runs on ``derive_seed(base, i)`` with ``base`` drawn from
    ``rng``, so results do not depend on ``workers``. For
    ``soteria_quantum`` each trial is one memory/challenge draw scored over
    ``shots`` SWAP tests. ``predicted`` holds each trial's analytic pass
    probability given the states or angles involved.
    """
    if protocol not in _TRIALS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    base = int(rng.integers(2**63))
    seeds = [derive_seed(base, i) for i in range(trials)]
    if workers <= 1:
        rows = _run_chunk(protocol, cfg, seeds, kw)
    else:
        chunks = [seeds[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, [protocol] * workers, [cfg] * workers, chunks, [kw] * workers))
        rows = [None] * trials
        for w, part in enumerate(parts):
            rows[w::workers] = part
    arr = np.asarray(rows, dtype=float)
    return SecurityResult(arr[:, 0], arr[:, 1])
