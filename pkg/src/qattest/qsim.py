"""Dense statevector simulator.

Qubit 0 is the most significant bit of a basis index, so the basis state
``|b0 b1 ... b(n-1)>`` sits at index ``int("b0b1...b(n-1)", 2)``.

Randomness always comes from a caller-supplied :class:`numpy.random.Generator`;
identical seeds give identical outcome sequences.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import ResourceError

ATOL = 1e-9
MAX_QUBITS = 12

Rng = np.random.Generator


def make_rng(seed: int | None = None) -> Rng:
    return np.random.default_rng(seed)


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for trial ``index`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector over ``n_qubits`` qubits. Immutable."""

    amps: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.size == 0 or amps.size & (amps.size - 1):
            raise ValueError(f"amplitude vector length must be a power of two, got {amps.shape}")
        if amps.size > 2**MAX_QUBITS:
            raise ValueError(f"register larger than {MAX_QUBITS} qubits")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def normalized(cls, amps: Iterable[complex]) -> "StateVector":
        v = np.asarray(list(amps) if not isinstance(amps, np.ndarray) else amps, dtype=complex)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / norm)

    @property
    def n_qubits(self) -> int:
        return self.amps.size.bit_length() - 1

    @property
    def dim(self) -> int:
        return self.amps.size

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits}, amps={np.round(self.amps, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] & (m.shape[0] - 1):
            raise ValueError(f"unitary must be square with power-of-two size, got {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=ATOL, rtol=0):
            raise ValueError("matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def dagger(self) -> "UnitaryOp":
        return UnitaryOp(self.matrix.conj().T)

    def __call__(self, state: StateVector) -> StateVector:
        """Apply to a whole register of matching size."""
        if state.dim != self.dim:
            raise ValueError(f"unitary of dim {self.dim} cannot act on state of dim {state.dim}")
        return StateVector(self.matrix @ state.amps)


_S = 1 / np.sqrt(2)
GATES: dict[str, UnitaryOp] = {
    "I": UnitaryOp(np.eye(2)),
    "H": UnitaryOp(np.array([[_S, _S], [_S, -_S]])),
    "X": UnitaryOp(np.array([[0, 1], [1, 0]])),
    "Y": UnitaryOp(np.array([[0, -1j], [1j, 0]])),
    "Z": UnitaryOp(np.array([[1, 0], [0, -1]])),
    "CNOT": UnitaryOp(np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])),
}


def ry(theta: float) -> UnitaryOp:
    """Y rotation with the convention ``Ry(t)|1> = sin(t/2)|0> + cos(t/2)|1>``.

    Rotations compose additively, ``ry(a) @ ry(b) == ry(a + b)``, so ``ry(-t)``
    inverts ``ry(t)``.
    """
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return UnitaryOp(np.array([[c, s], [-s, c]]))


GateLike = Union[str, UnitaryOp, np.ndarray]


def _as_unitary(gate: GateLike) -> UnitaryOp:
    if isinstance(gate, UnitaryOp):
        return gate
    if isinstance(gate, str):
        try:
            return GATES[gate.upper()]
        except KeyError:
            raise ValueError(f"unknown gate {gate!r}") from None
    return UnitaryOp(gate)


def _check_targets(n: int, targets: Sequence[int]) -> list[int]:
    t = [int(q) for q in targets]
    if len(set(t)) != len(t):
        raise ValueError(f"target qubits must be distinct, got {t}")
    for q in t:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n} qubits")
    return t


def apply_gate(state: StateVector, gate: GateLike, targets: int | Sequence[int]) -> StateVector:
    """Apply a k-qubit gate to ``targets`` (in the gate's own qubit order).

    For ``CNOT`` the first target is the control.
    """
    u = _as_unitary(gate)
    if isinstance(targets, (int, np.integer)):
        targets = [int(targets)]
    t = _check_targets(state.n_qubits, targets)
    k = len(t)
    if u.n_qubits != k:
        raise ValueError(f"{u.n_qubits}-qubit gate given {k} targets")
    n = state.n_qubits
    psi = state.amps.reshape([2] * n)
    mat = u.matrix.reshape([2] * (2 * k))
    out = np.tensordot(mat, psi, axes=(list(range(k, 2 * k)), t))
    out = np.moveaxis(out, list(range(k)), t)
    return StateVector(out.reshape(-1))


def make_basis_state(n_qubits: int, index: int) -> StateVector:
    if n_qubits < 0 or n_qubits > MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [0, {MAX_QUBITS}]")
    if not 0 <= index < 2**n_qubits:
        raise ValueError(f"index {index} out of range for {n_qubits} qubits")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps)


def qubit_state(alpha: complex, beta: complex) -> StateVector:
    """``alpha|0> + beta|1>``."""
    return StateVector([alpha, beta])


def tensor_product(a: StateVector, b: StateVector) -> StateVector:
    return StateVector(np.kron(a.amps, b.amps))


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(inner_product(a, b)) ** 2


def states_equal(a: StateVector, b: StateVector, atol: float = ATOL) -> bool:
    """Equality up to global phase."""
    return a.dim == b.dim and abs(1.0 - abs(inner_product(a, b))) < atol


def _draw(probs: np.ndarray, rng: Rng) -> int:
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, probs.size - 1)


def measure_computational(
    state: StateVector, qubits: int | Sequence[int], rng: Rng
) -> tuple[tuple[int, ...], StateVector]:
    """Projective measurement of ``qubits`` in the computational basis.

    Returns the outcome bits (in the order of ``qubits``) and the renormalized
    post-measurement state over the full register.
    """
    if isinstance(qubits, (int, np.integer)):
        qubits = [int(qubits)]
    q = _check_targets(state.n_qubits, qubits)
    n = state.n_qubits
    probs = state.probabilities().reshape([2] * n)
    rest = tuple(i for i in range(n) if i not in q)
    marginal = probs.sum(axis=rest) if rest else probs
    # sum() keeps measured axes in ascending order; reorder to match ``q``
    order = sorted(q)
    marginal = np.transpose(marginal, [order.index(x) for x in q]).reshape(-1)
    outcome = _draw(marginal, rng)
    bits = tuple((outcome >> (len(q) - 1 - j)) & 1 for j in range(len(q)))

    psi = state.amps.reshape([2] * n).copy()
    for qubit, bit in zip(q, bits):
        sl = [slice(None)] * n
        sl[qubit] = 1 - bit
        psi[tuple(sl)] = 0
    return bits, StateVector.normalized(psi.reshape(-1))


class BellOutcome(enum.Enum):
    """Bell-basis label with its fixed 2-bit encoding."""

    PHI_PLUS = (0, 0)
    PHI_MINUS = (0, 1)
    PSI_PLUS = (1, 0)
    PSI_MINUS = (1, 1)

    @property
    def bits(self) -> tuple[int, int]:
        return self.value

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BellOutcome":
        b = tuple(int(x) for x in bits)
        if len(b) != 2 or any(x not in (0, 1) for x in b):
            raise ValueError(f"Bell bits must be two bits, got {bits!r}")
        return cls(b)

    def state(self) -> StateVector:
        return _BELL_STATES[self]


_BELL_STATES = {
    BellOutcome.PHI_PLUS: StateVector([_S, 0, 0, _S]),
    BellOutcome.PHI_MINUS: StateVector([_S, 0, 0, -_S]),
    BellOutcome.PSI_PLUS: StateVector([0, _S, _S, 0]),
    BellOutcome.PSI_MINUS: StateVector([0, _S, -_S, 0]),
}


def bell_state(label: BellOutcome) -> StateVector:
    return label.state()


def measure_bell(
    state: StateVector, qubit_pair: Sequence[int], rng: Rng
) -> tuple[BellOutcome, StateVector]:
    """Projective Bell-basis measurement of two qubits.

    The returned state has the measured pair in the observed Bell state and the
    remaining qubits collapsed accordingly.
    """
    q0, q1 = _check_targets(state.n_qubits, qubit_pair)
    s = apply_gate(state, "CNOT", [q0, q1])
    s = apply_gate(s, "H", q0)
    (phase, parity), s = measure_computational(s, [q0, q1], rng)
    s = apply_gate(s, "H", q0)
    s = apply_gate(s, "CNOT", [q0, q1])
    return BellOutcome((parity, phase)), s


def factor_qubit(state: StateVector, qubit: int) -> StateVector:
    """Single-qubit state of ``qubit`` when it is unentangled with the rest."""
    (q,) = _check_targets(state.n_qubits, [qubit])
    n = state.n_qubits
    psi = np.moveaxis(state.amps.reshape([2] * n), q, -1).reshape(-1, 2)
    row = psi[np.argmax(np.linalg.norm(psi, axis=1))]
    local = row / np.linalg.norm(row)
    # product check: every row must be parallel to ``local``
    residual = psi - np.outer(psi @ local.conj(), local)
    if np.linalg.norm(residual) > 1e-7:
        raise ValueError(f"qubit {qubit} is entangled with the rest of the register")
    return StateVector(local)


def swap_test_probability(a: StateVector, b: StateVector) -> float:
    """Probability that the SWAP test outputs 0."""
    return 0.5 + 0.5 * fidelity(a, b)


def swap_test(a: StateVector, b: StateVector, rng: Rng) -> int:
    """Destructive SWAP test on one copy of each state.

    Sampled from the test's output law (0 with probability 1/2 + |<a|b>|^2/2)
    instead of simulating the ancilla circuit.
    """
    return int(rng.random() >= swap_test_probability(a, b))


def swap_test_many(a: StateVector, b: StateVector, shots: int, rng: Rng) -> np.ndarray:
    """Outcomes of ``shots`` SWAP tests on fresh copies of ``a`` and ``b``."""
    return (rng.random(int(shots)) >= swap_test_probability(a, b)).astype(np.int8)


def amplitude_encode(x: Sequence[float]) -> StateVector:
    """Amplitude-encode a real vector, zero-padded to the next power of two."""
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("cannot encode an empty vector")
    norm = float(np.sqrt(np.sum(v * v)))
    if norm == 0:
        raise ValueError("cannot amplitude-encode the all-zero vector")
    dim = 1 << max(0, (v.size - 1).bit_length())
    padded = np.zeros(dim)
    padded[: v.size] = v / norm
    return StateVector(padded)


def tomography_estimate(source: Iterable[StateVector] | Iterator[StateVector], n_samples: int, rng: Rng) -> np.ndarray:
    """Estimate amplitude magnitudes from ``n_samples`` fresh copies.

    Each copy is measured once in the computational basis; the estimate for
    ``|alpha_i|`` is the square root of the empirical frequency of ``i``.
    Raises :class:`ResourceError` if the source runs dry.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    it = iter(source)
    groups: dict[bytes, list] = {}
    dim = None
    for k in range(n_samples):
        try:
            s = next(it)
        except StopIteration:
            raise ResourceError(f"state source exhausted after {k} of {n_samples} copies") from None
        if dim is None:
            dim = s.dim
        elif s.dim != dim:
            raise ValueError("tomography source yielded states of different dimension")
        key = s.amps.tobytes()
        if key in groups:
            groups[key][1] += 1
        else:
            groups[key] = [s, 1]
    counts = np.zeros(dim, dtype=np.int64)
    for s, n in groups.values():
        p = s.probabilities()
        counts += rng.multinomial(n, p / p.sum())
    return np.sqrt(counts / n_samples)


def random_unitary(dim: int, rng: Rng) -> UnitaryOp:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fix."""
    if dim < 1 or dim & (dim - 1):
        raise ValueError(f"dim must be a power of two, got {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return UnitaryOp(q)


def random_state(n_qubits: int, rng: Rng) -> StateVector:
    """Haar-random pure state."""
    dim = 2**n_qubits
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector.normalized(v)
