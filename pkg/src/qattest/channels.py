"""Bell pairs, teleportation, superdense coding and a logical-clock network."""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .errors import ProtocolError, ResourceError
from .qsim import (
    BellOutcome,
    Rng,
    StateVector,
    apply_gate,
    bell_state,
    factor_qubit,
    make_rng,
    measure_bell,
    tensor_product,
)

# Bell outcome of the sender -> gates applied (in order) by the receiver
TELEPORT_CORRECTIONS: dict[BellOutcome, tuple[str, ...]] = {
    BellOutcome.PHI_PLUS: (),
    BellOutcome.PHI_MINUS: ("Z",),
    BellOutcome.PSI_PLUS: ("X",),
    BellOutcome.PSI_MINUS: ("X", "Z"),
}

# bits -> gates the sender applies to its half of |Phi+>
SUPERDENSE_ENCODINGS: dict[tuple[int, int], tuple[str, ...]] = {
    (0, 0): (),
    (0, 1): ("Z",),
    (1, 0): ("X",),
    (1, 1): ("X", "Z"),
}

FRESH, SENT, ENCODED, CONSUMED = "fresh", "sent", "encoded", "consumed"


@dataclass(eq=False)
class BellPair:
    """A shared |Phi+> pair. ``owners[k]`` holds qubit ``k``.

    After :func:`teleport_send` the pair's register grows to three qubits
    (teleported qubit, sender half, receiver half).
    """

    id: int
    owners: list[str]
    state: StateVector = field(default_factory=lambda: bell_state(BellOutcome.PHI_PLUS))
    status: str = FRESH

    def move_half(self, half: int, to: str) -> None:
        self.owners[half] = to

    def _require(self, status: str, action: str) -> None:
        if self.status != status:
            raise ProtocolError(f"cannot {action}: Bell pair {self.id} is {self.status}")


class BellPairStore:
    """Pre-shared Bell pairs, each consumed exactly once."""

    def __init__(self) -> None:
        self.pairs: list[BellPair] = []
        self._ids = itertools.count()

    def provision(self, count: int, owner_a: str, owner_b: str) -> list[BellPair]:
        return [make_bell_pair(self, owner_a, owner_b) for _ in range(count)]

    def available(self, owner_a: str, owner_b: str) -> int:
        return sum(1 for p in self.pairs if p.status == FRESH and p.owners == [owner_a, owner_b])

    def take(self, owner_a: str, owner_b: str) -> BellPair:
        for p in self.pairs:
            if p.status == FRESH and p.owners == [owner_a, owner_b]:
                return p
        raise ResourceError(f"no fresh Bell pair shared by {owner_a!r} and {owner_b!r}")


def make_bell_pair(store: BellPairStore, owner_a: str = "a", owner_b: str = "b") -> BellPair:
    pair = BellPair(next(store._ids), [owner_a, owner_b])
    store.pairs.append(pair)
    return pair


def teleport_send(qubit: StateVector, pair: BellPair, rng: Rng) -> tuple[int, int]:
    """Bell-measure ``qubit`` with the sender half; return the 2 rotation bits."""
    if qubit.n_qubits != 1:
        raise ValueError("only single-qubit states can be teleported")
    pair._require(FRESH, "teleport")
    composite = tensor_product(qubit, pair.state)
    outcome, collapsed = measure_bell(composite, (0, 1), rng)
    pair.state = collapsed
    pair.status = SENT
    return outcome.bits


def take_teleported(pair: BellPair) -> StateVector:
    """Receiver's half after a teleport send, before any correction."""
    pair._require(SENT, "receive")
    pair.status = CONSUMED
    return factor_qubit(pair.state, 2)


def apply_correction(qubit: StateVector, rotation_bits: Sequence[int]) -> StateVector:
    for g in TELEPORT_CORRECTIONS[BellOutcome.from_bits(rotation_bits)]:
        qubit = apply_gate(qubit, g, 0)
    return qubit


def teleport_receive(pair: BellPair, rotation_bits: Sequence[int]) -> StateVector:
    return apply_correction(take_teleported(pair), rotation_bits)


def superdense_encode(bits: Sequence[int], pair: BellPair) -> BellPair:
    """Rotate the sender half so |Phi+> becomes the Bell state indexed by ``bits``.

    Returns the pair as the handle of the qubit in flight; move it with
    ``pair.move_half(0, receiver)`` on delivery.
    """
    key = tuple(int(b) for b in bits)
    if key not in SUPERDENSE_ENCODINGS:
        raise ValueError(f"expected two bits, got {bits!r}")
    pair._require(FRESH, "superdense-encode")
    s = pair.state
    for g in SUPERDENSE_ENCODINGS[key]:
        s = apply_gate(s, g, 0)
    pair.state = s
    pair.status = ENCODED
    return pair


def superdense_decode(pair: BellPair, rng: Rng | None = None) -> tuple[int, int]:
    """CNOT + H + measurement of both halves; deterministic for encoded pairs."""
    pair._require(ENCODED, "superdense-decode")
    if pair.owners[0] != pair.owners[1]:
        raise ProtocolError(f"Bell pair {pair.id}: both halves must be held by the decoder, owners are {pair.owners}")
    outcome, _ = measure_bell(pair.state, (0, 1), rng if rng is not None else make_rng(0))
    pair.status = CONSUMED
    return outcome.bits


# ---------------------------------------------------------------- timing


@dataclass(frozen=True)
class Endpoint:
    """A party on a line; ``position`` is its distance from the verifier in metres.

    ``relay`` is set on proxied endpoints: traffic to and from this endpoint
    detours through the relay.
    """

    id: str
    position: float
    relay: "Endpoint | None" = None

    def __post_init__(self) -> None:
        if self.position < 0:
            raise ValueError(f"endpoint {self.id!r}: position must be >= 0")


@dataclass
class NetworkConfig:
    c: float = 3.0e8
    processing_delay: float = 0.0
    endpoints: dict[str, Endpoint] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError("signal speed c must be positive")
        if self.processing_delay < 0:
            raise ValueError("processing_delay must be >= 0")

    def add(self, *endpoints: Endpoint) -> "NetworkConfig":
        for e in endpoints:
            self.endpoints[e.id] = e
        return self

    def check(self, e: Endpoint) -> None:
        if e.id not in self.endpoints:
            raise ValueError(f"unknown endpoint {e.id!r}")
        if e.relay is not None and e.relay.id not in self.endpoints:
            raise ValueError(f"unknown relay endpoint {e.relay.id!r}")

    @staticmethod
    def distance(a: Endpoint, b: Endpoint) -> float:
        return abs(a.position - b.position)

    def route(self, src: Endpoint, dst: Endpoint) -> tuple[float, int]:
        """Path length in metres and number of hops from ``src`` to ``dst``."""
        length, hops = self.distance(src, dst), 1
        for e in (src, dst):
            if e.relay is not None:
                length += self.distance(e, e.relay)
                hops += 1
        return length, hops

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, Any]) -> "NetworkConfig":
        """Build the standard verifier/prover(/colluder) line from flat keys.

        Recognized keys: ``c``, ``processing_delay``, ``prover_position``,
        ``colluder_position``.
        """
        net = cls(c=float(cfg.get("c", 3.0e8)), processing_delay=float(cfg.get("processing_delay", 0.0)))
        net.add(Endpoint("verifier", 0.0), Endpoint("prover", float(cfg.get("prover_position", 50.0))))
        if "colluder_position" in cfg:
            net.add(Endpoint("colluder", float(cfg["colluder_position"])))
        return net


@dataclass(frozen=True)
class TimedMessage:
    payload: Any
    sent_at: float
    arrives_at: float
    src: str
    dst: str


def timed_send(payload: Any, src: Endpoint, dst: Endpoint, clock: float, net: NetworkConfig) -> TimedMessage:
    net.check(src)
    net.check(dst)
    length, hops = net.route(src, dst)
    arrives = clock + length / net.c + hops * net.processing_delay
    return TimedMessage(payload, clock, arrives, src.id, dst.id)


class Network:
    """Single-threaded discrete-event message queue over one logical clock."""

    def __init__(self, config: NetworkConfig) -> None:
        self.config = config
        self.clock = 0.0
        self.log: list[TimedMessage] = []
        self._queue: list[tuple[float, int, TimedMessage]] = []
        self._seq = itertools.count()

    def send(self, payload: Any, src: Endpoint, dst: Endpoint) -> TimedMessage:
        msg = timed_send(payload, src, dst, self.clock, self.config)
        heapq.heappush(self._queue, (msg.arrives_at, next(self._seq), msg))
        self.log.append(msg)
        return msg

    def receive(self, dst: Endpoint | str) -> TimedMessage:
        """Deliver the earliest pending message for ``dst`` and advance the clock."""
        dst_id = dst if isinstance(dst, str) else dst.id
        pending = [e for e in self._queue if e[2].dst == dst_id]
        if not pending:
            raise ProtocolError(f"no message pending for {dst_id!r}")
        entry = min(pending)
        self._queue.remove(entry)
        heapq.heapify(self._queue)
        msg = entry[2]
        self.clock = max(self.clock, msg.arrives_at)
        return msg

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("cannot move the clock backwards")
        self.clock += dt
        return self.clock
