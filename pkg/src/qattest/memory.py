"""Attestable memories and the checksum primitives run over them.

``gen`` and ``chk`` are SHA-256 in counter mode. Nonces and checksums are
``bytes`` of length ``lam // 8``.

Memory images on disk are ``b"QMEM"`` followed by ``<HI`` (word width in
bits, word count) and then the words, little-endian.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from os import PathLike
from typing import NamedTuple, Sequence

import numpy as np

from .qsim import Rng, StateVector, ry

DEFAULT_LAMBDA = 128
DEFAULT_WIDTH = 32
DEFAULT_WORDS = 1024
ANGLE_BITS = 52

_DTYPES = {8: "<u1", 16: "<u2", 32: "<u4", 64: "<u8"}
_MAGIC = b"QMEM"
_HEADER = struct.Struct("<HI")


@dataclass(eq=False)
class ClassicalMemory:
    """``m`` fixed-width words. Treated as immutable; corruption returns a copy."""

    words: np.ndarray
    width: int = DEFAULT_WIDTH

    def __post_init__(self) -> None:
        if self.width not in _DTYPES:
            raise ValueError(f"word width must be one of {sorted(_DTYPES)}, got {self.width}")
        words = np.array(self.words, dtype=_DTYPES[self.width]).reshape(-1)
        if words.size < 1:
            raise ValueError("memory needs at least one word")
        words.setflags(write=False)
        self.words = words
        self._word_bytes = [w.tobytes() for w in words]

    @classmethod
    def random(cls, m: int = DEFAULT_WORDS, rng: Rng | None = None, width: int = DEFAULT_WIDTH) -> "ClassicalMemory":
        rng = rng if rng is not None else np.random.default_rng()
        raw = rng.integers(0, 2**width, size=m, dtype=np.uint64)
        return cls(raw.astype(_DTYPES[width]), width)

    @property
    def m(self) -> int:
        return self.words.size

    @property
    def total_bits(self) -> int:
        return self.m * self.width

    def word_bytes(self, addr: int) -> bytes:
        return self._word_bytes[addr]

    def to_bits(self) -> np.ndarray:
        """Bits in address order, least-significant bit of each word first."""
        return np.unpackbits(self.words.view(np.uint8), bitorder="little")

    def flip_bits(self, positions: Sequence[int]) -> "ClassicalMemory":
        bits = self.to_bits().copy()
        pos = np.asarray(positions, dtype=np.int64)
        if pos.size and (pos.min() < 0 or pos.max() >= self.total_bits):
            raise ValueError("bit position out of range")
        bits[pos] ^= 1
        packed = np.packbits(bits, bitorder="little")
        return ClassicalMemory(packed.view(_DTYPES[self.width]), self.width)

    def hamming(self, other: "ClassicalMemory") -> float:
        """Normalized Hamming distance over all memory bits."""
        if other.m != self.m or other.width != self.width:
            raise ValueError("memories differ in shape")
        return float(np.count_nonzero(self.to_bits() != other.to_bits())) / self.total_bits

    def word_distance(self, other: "ClassicalMemory") -> float:
        """Fraction of words that differ."""
        if other.m != self.m or other.width != self.width:
            raise ValueError("memories differ in shape")
        return float(np.count_nonzero(self.words != other.words)) / self.m

    def save(self, path: str | PathLike) -> None:
        with open(path, "wb") as fh:
            fh.write(_MAGIC + _HEADER.pack(self.width, self.m))
            fh.write(self.words.astype(_DTYPES[self.width]).tobytes())

    @classmethod
    def load(cls, path: str | PathLike) -> "ClassicalMemory":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != _MAGIC:
            raise ValueError(f"{path}: not a memory image")
        width, m = _HEADER.unpack_from(data, 4)
        body = data[4 + _HEADER.size :]
        if width not in _DTYPES or len(body) != m * width // 8:
            raise ValueError(f"{path}: corrupt memory image header")
        return cls(np.frombuffer(body, dtype=_DTYPES[width]), width)


def prf_stream(tag: bytes, data: bytes, nbytes: int) -> bytes:
    out = bytearray()
    ctr = 0
    while len(out) < nbytes:
        out += hashlib.sha256(tag + data + ctr.to_bytes(4, "big")).digest()
        ctr += 1
    return bytes(out[:nbytes])


def _bits_bytes(bits: Sequence[int]) -> bytes:
    return bytes(int(b) & 1 for b in bits)


def gen(nonce: bytes, chained_bits: Sequence[int], m: int) -> tuple[bytes, int]:
    """Next nonce and a memory address in ``[0, m)``.

    The address is the first 64 stream bits mod ``m``; the next nonce is the
    following ``len(nonce)`` bytes.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    stream = prf_stream(b"G", nonce + _bits_bytes(chained_bits), 8 + len(nonce))
    return stream[8:], int.from_bytes(stream[:8], "big") % m


def read(mem: ClassicalMemory, addr: int) -> int:
    if not 0 <= addr < mem.m:
        raise ValueError(f"address {addr} out of range [0, {mem.m})")
    return int(mem.words[addr])


def chk(prev: bytes, word: int | bytes, rot_bits: Sequence[int], width: int = DEFAULT_WIDTH) -> bytes:
    """Digest of ``prev || word || rot_bits`` truncated to ``len(prev)`` bytes."""
    wb = word if isinstance(word, bytes) else int(word).to_bytes(width // 8, "little")
    return prf_stream(b"C", prev + wb + _bits_bytes(rot_bits), len(prev))


class ChainResult(NamedTuple):
    nonce: bytes
    checksum: bytes
    addresses: list[int]


def checksum_chain(
    mem: ClassicalMemory,
    nonce: bytes,
    checksum: bytes,
    chained_bits: Sequence[int],
    rot_bits: Sequence[int],
    steps: int,
) -> ChainResult:
    """``steps`` rounds of gen -> read -> chk starting from ``(nonce, checksum)``."""
    cb = _bits_bytes(chained_bits)
    rb = _bits_bytes(rot_bits)
    nlen, clen, m = len(nonce), len(checksum), mem.m
    addrs = []
    for _ in range(steps):
        stream = prf_stream(b"G", nonce + cb, 8 + nlen)
        nonce, a = stream[8:], int.from_bytes(stream[:8], "big") % m
        addrs.append(a)
        checksum = prf_stream(b"C", checksum + mem.word_bytes(a) + rb, clen)
    return ChainResult(nonce, checksum, addrs)


def random_bitstring(lam: int, rng: Rng) -> bytes:
    if lam % 8:
        raise ValueError("lambda must be a multiple of 8")
    return rng.bytes(lam // 8)


def checksum_to_angle(m: bytes) -> float:
    """Map the top 52 bits of a checksum onto ``[0, pi)``."""
    if len(m) * 8 < ANGLE_BITS:
        raise ValueError(f"checksum needs at least {ANGLE_BITS} bits")
    top = int.from_bytes(m, "big") >> (len(m) * 8 - ANGLE_BITS)
    return math.pi * top / 2**ANGLE_BITS


def angle_qubit(theta: float) -> StateVector:
    """``sin(theta/2)|0> + cos(theta/2)|1>``."""
    return StateVector(ry(theta).matrix[:, 1])


@dataclass(frozen=True, eq=False)
class QuantumMemory:
    stored: tuple[StateVector, ...]

    def __post_init__(self) -> None:
        stored = tuple(self.stored)
        if not stored:
            raise ValueError("quantum memory needs at least one word")
        if any(s.n_qubits != 1 for s in stored):
            raise ValueError("quantum memory words must be single qubits")
        object.__setattr__(self, "stored", stored)

    @property
    def m(self) -> int:
        return len(self.stored)

    @property
    def index_qubits(self) -> int:
        return (self.m - 1).bit_length()


def quantum_memory_read(qmem: QuantumMemory, index: StateVector) -> StateVector:
    """``sum_i alpha_i |i>_index (x) |psi_i>_word`` for ``index = sum_i alpha_i |i>``."""
    if index.n_qubits != qmem.index_qubits:
        raise ValueError(f"index must have {qmem.index_qubits} qubits for {qmem.m} words, got {index.n_qubits}")
    alphas = index.amps
    if np.any(np.abs(alphas[qmem.m :]) > 1e-12):
        raise ValueError("index has weight on addresses beyond the memory")
    words = np.stack([s.amps for s in qmem.stored])
    out = np.zeros((index.dim, 2), dtype=complex)
    out[: qmem.m] = alphas[: qmem.m, None] * words
    return StateVector.normalized(out.reshape(-1))
