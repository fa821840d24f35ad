"""Attestation with superdense-coded challenges and teleported responses.

One run is a proximity check followed by ``K`` challenge rounds:

* proximity: the verifier sends two nonces ``(n, m)``; the prover teleports
  the angle-encoded ``m`` straight back. Only channel latency is allowed.
* round ``i``: the verifier superdense-codes two random bits to the prover,
  which runs ``N`` gen/read/chk steps seeded by them, teleports the
  angle-encoded checksum, and returns the rotation bits. The verifier times
  the round trip, recomputes the checksum from its reference memory, undoes
  the expected rotation, and expects to measure ``|1>``.

Round index 0 in a verdict refers to the proximity check.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from os import PathLike
from typing import IO, Iterable, Sequence

from .channels import (
    BellPairStore,
    Endpoint,
    Network,
    NetworkConfig,
    apply_correction,
    superdense_decode,
    superdense_encode,
    take_teleported,
    teleport_send,
)
from .errors import ResourceError
from .memory import (
    DEFAULT_LAMBDA,
    ClassicalMemory,
    angle_qubit,
    checksum_chain,
    checksum_to_angle,
    random_bitstring,
)
from .qsim import Rng, StateVector, apply_gate, measure_computational, ry

VERIFIER, PROVER = "verifier", "prover"


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol tunables.

    ``max_distance`` is the allowed prover distance in metres and ``c`` the
    signal speed the verifier assumes. ``time_budget`` is the processing
    allowance added to ``max_distance / c`` for a challenge round; by default
    it covers the honest chain time with a 10% margin plus the return leg.
    """

    lam: int = DEFAULT_LAMBDA
    K: int = 4
    N: int = 64
    max_distance: float = 100.0
    c: float = 3.0e8
    step_time: float = 50e-9
    time_budget: float | None = None
    clock_eps: float = 1e-9

    def __post_init__(self) -> None:
        if self.lam % 8 or self.lam < 64:
            raise ValueError("lam must be a multiple of 8 and at least 64")
        if self.K < 1 or self.N < 1:
            raise ValueError("K and N must be >= 1")
        if self.max_distance <= 0 or self.c <= 0:
            raise ValueError("max_distance and c must be positive")
        if self.step_time < 0 or self.clock_eps < 0:
            raise ValueError("step_time and clock_eps must be >= 0")
        if self.time_budget is not None and self.time_budget < self.compute_time:
            raise ValueError("time_budget is below the honest compute time")

    @property
    def compute_time(self) -> float:
        return self.N * self.step_time

    @property
    def allowance(self) -> float:
        if self.time_budget is not None:
            return self.time_budget
        return 1.1 * self.compute_time + self.max_distance / self.c

    @property
    def round_threshold(self) -> float:
        """Round trips at or above this abort the run."""
        return self.allowance + self.max_distance / self.c

    @property
    def proximity_threshold(self) -> float:
        return 2 * self.max_distance / self.c + self.clock_eps

    @property
    def pairs_needed(self) -> int:
        return 2 * self.K + 1


@dataclass
class ProximityRecord:
    nonce: bytes
    checksum: bytes
    sent_at: float
    received_at: float
    rotation_bits: tuple[int, int]
    verdict: int

    @property
    def rtt(self) -> float:
        return self.received_at - self.sent_at


@dataclass
class RoundRecord:
    round: int
    challenge_bits: tuple[int, int]
    sent_at: float
    received_at: float
    rotation_bits: tuple[int, int]
    verdict: int
    verifier_checksum: bytes

    @property
    def rtt(self) -> float:
        return self.received_at - self.sent_at


@dataclass(frozen=True)
class Verdict:
    kind: str  # "accept" | "abort_timing" | "abort_checksum"
    round: int | None = None

    @property
    def accepted(self) -> bool:
        return self.kind == "accept"

    def __str__(self) -> str:
        return self.kind if self.round is None else f"{self.kind}({self.round})"


@dataclass
class Transcript:
    params: ProtocolParams
    proximity: ProximityRecord
    rounds: list[RoundRecord] = field(default_factory=list)
    verdict: Verdict = Verdict("accept")


class Prover:
    """Honest prover. Subclass and override steps to model misbehaviour."""

    def __init__(self, memory: ClassicalMemory, endpoint: Endpoint, params: ProtocolParams) -> None:
        self.memory = memory
        self.endpoint = endpoint
        self.params = params
        self.nonce = b""
        self.checksum = b""
        self.last_rotation: tuple[int, int] = (0, 0)

    def on_setup(self, nonce: bytes, checksum: bytes) -> None:
        self.nonce, self.checksum = nonce, checksum

    def reflect(self, checksum: bytes) -> StateVector:
        return angle_qubit(checksum_to_angle(checksum))

    def decode_challenge(self, pair, rng: Rng) -> tuple[int, int]:
        return superdense_decode(pair, rng)

    def compute(self, bits: tuple[int, int]) -> bytes:
        res = checksum_chain(self.memory, self.nonce, self.checksum, bits, self.last_rotation, self.params.N)
        self.nonce, self.checksum = res.nonce, res.checksum
        return res.checksum

    def respond(self, checksum: bytes, pair, rng: Rng) -> tuple[int, int]:
        bits = teleport_send(angle_qubit(checksum_to_angle(checksum)), pair, rng)
        self.last_rotation = bits
        return bits


class Verifier:
    def __init__(self, memory: ClassicalMemory, endpoint: Endpoint, params: ProtocolParams) -> None:
        self.memory = memory
        self.endpoint = endpoint
        self.params = params
        self.nonce = b""
        self.checksum = b""
        self.last_rotation: tuple[int, int] = (0, 0)

    def start(self, rng: Rng) -> tuple[bytes, bytes]:
        self.nonce = random_bitstring(self.params.lam, rng)
        self.checksum = random_bitstring(self.params.lam, rng)
        return self.nonce, self.checksum

    def expected(self, bits: tuple[int, int]) -> bytes:
        res = checksum_chain(self.memory, self.nonce, self.checksum, bits, self.last_rotation, self.params.N)
        self.nonce, self.checksum = res.nonce, res.checksum
        return res.checksum


def verify_response_qubit(
    qubit: StateVector, rotation_bits: Sequence[int], expected_checksum: bytes, rng: Rng
) -> int:
    """Teleport correction, inverse rotation by the expected angle, measure.

    Returns 1 when ``|1>`` is observed (consistent) and 0 otherwise.
    """
    return rotation_check(apply_correction(qubit, rotation_bits), checksum_to_angle(expected_checksum), rng)


def rotation_check(qubit: StateVector, theta: float, rng: Rng) -> int:
    """Undo ``Ry(theta)`` and measure; 1 means the qubit was ``Ry(theta)|1>``."""
    (bit,), _ = measure_computational(apply_gate(qubit, ry(-theta), 0), 0, rng)
    return bit


def _local(e: Endpoint) -> Endpoint:
    return Endpoint(e.id, e.position) if e.relay is not None else e


def run_setup_proximity(
    prover: Prover,
    verifier: Verifier,
    net: Network,
    store: BellPairStore,
    rng: Rng,
    endpoint: Endpoint | None = None,
) -> ProximityRecord:
    """Nonce exchange plus the latency-only reflection of ``m``.

    Traffic goes to ``endpoint`` (the prover's own endpoint by default).
    """
    local = endpoint if endpoint is not None else prover.endpoint
    nonce, checksum = verifier.start(rng)
    pair = store.take(prover.endpoint.id, verifier.endpoint.id)
    t0 = net.clock
    net.send((nonce, checksum), verifier.endpoint, local)
    n_rx, m_rx = net.receive(local).payload
    prover.on_setup(n_rx, m_rx)
    r0 = teleport_send(prover.reflect(m_rx), pair, rng)
    prover.last_rotation = r0
    net.send(r0, local, verifier.endpoint)
    r_rx = net.receive(verifier.endpoint).payload
    t0_reply = net.clock
    verdict = verify_response_qubit(take_teleported(pair), r_rx, checksum, rng)
    verifier.last_rotation = r_rx
    return ProximityRecord(nonce, checksum, t0, t0_reply, tuple(r_rx), verdict)


def run_challenge_round(
    i: int,
    prover: Prover,
    verifier: Verifier,
    net: Network,
    store: BellPairStore,
    rng: Rng,
    challenge_bits: Sequence[int] | None = None,
) -> RoundRecord:
    p_id, v_id = prover.endpoint.id, verifier.endpoint.id
    sd_pair = store.take(v_id, p_id)
    tp_pair = store.take(p_id, v_id)
    bits = tuple(int(b) for b in (challenge_bits if challenge_bits is not None else rng.integers(0, 2, size=2)))

    superdense_encode(bits, sd_pair)
    t_i = net.clock
    net.send(sd_pair, verifier.endpoint, prover.endpoint)
    net.receive(prover.endpoint).payload.move_half(0, p_id)
    decoded = prover.decode_challenge(sd_pair, rng)
    m_n = prover.compute(decoded)
    net.advance(prover.params.compute_time)
    r_i = prover.respond(m_n, tp_pair, rng)
    net.send(r_i, prover.endpoint, verifier.endpoint)
    r_rx = tuple(net.receive(verifier.endpoint).payload)
    t_reply = net.clock

    expected = verifier.expected(bits)
    verdict = verify_response_qubit(take_teleported(tp_pair), r_rx, expected, rng)
    verifier.last_rotation = r_rx
    return RoundRecord(i, bits, t_i, t_reply, r_rx, verdict, expected)


def decide(params: ProtocolParams, proximity: ProximityRecord, rounds: Iterable[RoundRecord]) -> Verdict:
    if proximity.rtt > params.proximity_threshold:
        return Verdict("abort_timing", 0)
    if proximity.verdict != 1:
        return Verdict("abort_checksum", 0)
    rounds = list(rounds)
    late = [r.round for r in rounds if r.rtt >= params.round_threshold]
    if late:
        return Verdict("abort_timing", min(late))
    bad = [r.round for r in rounds if r.verdict != 1]
    if bad:
        return Verdict("abort_checksum", min(bad))
    return Verdict("accept")


def default_network(prover_position: float = 50.0, c: float = 3.0e8, processing_delay: float = 0.0) -> NetworkConfig:
    return NetworkConfig(c=c, processing_delay=processing_delay).add(
        Endpoint(VERIFIER, 0.0), Endpoint(PROVER, prover_position)
    )


def run_full_protocol(
    prover_mem: ClassicalMemory,
    verifier_mem: ClassicalMemory,
    params: ProtocolParams,
    net: NetworkConfig | None,
    rng: Rng,
    *,
    prover_endpoint: Endpoint | None = None,
    prover_cls: type[Prover] = Prover,
    challenges: Sequence[Sequence[int]] | None = None,
    store: BellPairStore | None = None,
) -> Transcript:
    """Proximity check, ``K`` rounds, then the abort scan.

    Timing aborts take precedence over checksum aborts; within a kind the
    lowest round is reported. A failed proximity check ends the run before
    any challenge round.
    """
    config = net if net is not None else default_network()
    network = Network(config)
    p_end = prover_endpoint if prover_endpoint is not None else config.endpoints[PROVER]
    v_end = config.endpoints[VERIFIER]
    prover = prover_cls(prover_mem, p_end, params)
    verifier = Verifier(verifier_mem, v_end, params)
    if store is None:
        store = BellPairStore()
        store.provision(params.K + 1, p_end.id, v_end.id)
        store.provision(params.K, v_end.id, p_end.id)
    if store.available(p_end.id, v_end.id) < params.K + 1 or store.available(v_end.id, p_end.id) < params.K:
        raise ResourceError(f"need {params.K + 1} teleport and {params.K} superdense Bell pairs")
    if challenges is not None and len(challenges) != params.K:
        raise ValueError(f"expected {params.K} challenges, got {len(challenges)}")

    # the device in the verifier's vicinity answers the reflection itself
    proximity = run_setup_proximity(prover, verifier, network, store, rng, _local(p_end))
    transcript = Transcript(params, proximity)
    transcript.verdict = decide(params, proximity, [])
    if not transcript.verdict.accepted:
        return transcript
    for i in range(1, params.K + 1):
        bits = challenges[i - 1] if challenges is not None else None
        transcript.rounds.append(run_challenge_round(i, prover, verifier, network, store, rng, bits))
    transcript.verdict = decide(params, proximity, transcript.rounds)
    return transcript


def replay_prover_angles(mem: ClassicalMemory, transcript: Transcript) -> list[float]:
    """Angles an honest prover holding ``mem`` would have sent in each round."""
    p = transcript.params
    nonce, checksum = transcript.proximity.nonce, transcript.proximity.checksum
    rot = transcript.proximity.rotation_bits
    out = []
    for rec in transcript.rounds:
        res = checksum_chain(mem, nonce, checksum, rec.challenge_bits, rot, p.N)
        nonce, checksum, rot = res.nonce, res.checksum, rec.rotation_bits
        out.append(checksum_to_angle(checksum))
    return out


# ------------------------------------------------------------ serialization


def _bits_str(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def transcript_records(t: Transcript) -> list[dict]:
    px = t.proximity
    recs = [
        {"record": "params", **asdict(t.params)},
        {
            "record": "proximity",
            "nonce": px.nonce.hex(),
            "checksum": px.checksum.hex(),
            "sent_at": px.sent_at,
            "received_at": px.received_at,
            "rotation_bits": _bits_str(px.rotation_bits),
            "verdict": px.verdict,
        },
    ]
    for r in t.rounds:
        recs.append(
            {
                "record": "round",
                "round": r.round,
                "challenge_bits": _bits_str(r.challenge_bits),
                "sent_at": r.sent_at,
                "received_at": r.received_at,
                "rotation_bits": _bits_str(r.rotation_bits),
                "verdict": r.verdict,
                "verifier_checksum": r.verifier_checksum.hex(),
            }
        )
    recs.append({"record": "verdict", "verdict": t.verdict.kind, "round": t.verdict.round})
    return recs


def write_transcript(t: Transcript, dest: str | PathLike | IO[str]) -> None:
    """One JSON object per line: params, proximity, each round, verdict."""
    lines = "".join(json.dumps(r) + "\n" for r in transcript_records(t))
    if hasattr(dest, "write"):
        dest.write(lines)
    else:
        with open(dest, "w") as fh:
            fh.write(lines)


def _bits_tuple(s: str) -> tuple[int, int]:
    return tuple(int(ch) for ch in s)


def read_transcript(src: str | PathLike | IO[str]) -> Transcript:
    if hasattr(src, "read"):
        text = src.read()
    else:
        with open(src) as fh:
            text = fh.read()
    recs = [json.loads(line) for line in text.splitlines() if line.strip()]
    params = ProtocolParams(**{k: v for k, v in recs[0].items() if k != "record"})
    px = recs[1]
    proximity = ProximityRecord(
        bytes.fromhex(px["nonce"]),
        bytes.fromhex(px["checksum"]),
        px["sent_at"],
        px["received_at"],
        _bits_tuple(px["rotation_bits"]),
        px["verdict"],
    )
    t = Transcript(params, proximity)
    for r in recs[2:]:
        if r["record"] == "round":
            t.rounds.append(
                RoundRecord(
                    r["round"],
                    _bits_tuple(r["challenge_bits"]),
                    r["sent_at"],
                    r["received_at"],
                    _bits_tuple(r["rotation_bits"]),
                    r["verdict"],
                    bytes.fromhex(r["verifier_checksum"]),
                )
            )
        elif r["record"] == "verdict":
            t.verdict = Verdict(r["verdict"], r["round"])
    return t
