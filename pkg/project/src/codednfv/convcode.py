"""
The (n, k) linear channel code every frame is encoded with.

`ConvCode` is a feedforward convolutional code decoded by a hard-decision Viterbi
decoder, `BlockCode` a small generator-matrix code decoded by exhaustive search.
Both implement `LinearCode`, which is all the estimators need.
"""

import logging
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property
from typing import Protocol, Self

import numba as nb
import numpy as np

from .crc import CRC_BITS, append_crc, crc_passes
from .errors import InvalidArgumentError, LengthMismatchError, TooLargeError
from .gf2 import BitMatrix, BitVec

log = logging.getLogger(__name__)

MAX_CONSTRAINT_LENGTH = 16
MAX_OUTPUTS = 8
MAX_BLOCK_MESSAGE_BITS = 12
"Exhaustive ML decoding of a `BlockCode` compares against all 2^k codewords."


class Termination(StrEnum):
    UNTERMINATED = "unterminated"
    ZERO_TAIL = "zero_tail"


class DetectionMode(StrEnum):
    GENIE = "genie"
    CRC16 = "crc16"


class LinearCode(Protocol):
    """
    A binary linear code working on batches of frames.

    Messages are `(frames, k)` and codewords `(frames, n)` arrays of `uint8` bits.
    """

    @property
    def k(self) -> int: ...

    @property
    def n(self) -> int: ...

    def encode_batch(self, messages: np.ndarray) -> np.ndarray: ...

    def decode_batch(self, received: np.ndarray) -> np.ndarray: ...


@nb.njit(cache=True)
def _encode_kernel(messages, next_state, output_bits, tail):
    frames, k = messages.shape
    n_out = output_bits.shape[2]
    steps = k + tail
    encoded = np.zeros((frames, steps * n_out), dtype=np.uint8)
    for f in range(frames):
        state = 0
        for step in range(steps):
            bit = messages[f, step] if step < k else 0
            for o in range(n_out):
                encoded[f, step * n_out + o] = output_bits[state, bit, o]
            state = next_state[state, bit]
    return encoded


@nb.njit(cache=True)
def _viterbi_kernel(received, outputs, popcount, memory, k, tail):
    frames = received.shape[0]
    n_states = 1 << memory
    mask = n_states - 1
    steps = k + tail
    n_out = received.shape[1] // steps
    unreachable = np.int64(1) << 40

    decoded = np.zeros((frames, k), dtype=np.uint8)
    decisions = np.zeros((steps, n_states), dtype=np.uint8)
    metrics = np.empty(n_states, dtype=np.int64)
    updated = np.empty(n_states, dtype=np.int64)

    for f in range(frames):
        metrics[:] = unreachable
        metrics[0] = 0
        for step in range(steps):
            symbol = 0
            for o in range(n_out):
                symbol = (symbol << 1) | received[f, step * n_out + o]
            for state in range(n_states):
                bit = state >> (memory - 1)
                if step >= k and bit == 1:
                    updated[state] = unreachable
                    decisions[step, state] = 0
                    continue
                # the two predecessors differ only in the register bit leaving the
                # window, ties keep the one where it is 0
                low = (state << 1) & mask
                best = metrics[low] + popcount[outputs[low, bit] ^ symbol]
                other = metrics[low | 1] + popcount[outputs[low | 1, bit] ^ symbol]
                if other < best:
                    best = other
                    decisions[step, state] = 1
                else:
                    decisions[step, state] = 0
                updated[state] = best
            metrics[:] = updated

        state = 0 if tail > 0 else int(np.argmin(metrics))
        for step in range(steps - 1, -1, -1):
            if step < k:
                decoded[f, step] = state >> (memory - 1)
            state = ((state << 1) & mask) | decisions[step, state]
    return decoded


@dataclass(frozen=True)
class Trellis:
    next_state: np.ndarray
    "`next_state[s, b]`: state after feeding bit `b` in state `s`."
    outputs: np.ndarray
    "`outputs[s, b]`: output symbol packed as an integer, first tap most significant."
    output_bits: np.ndarray
    "`output_bits[s, b, o]`: output bit of tap `o`."


@dataclass(frozen=True)
class ConvCode:
    """
    Rate 1/`len(taps)` feedforward convolutional code.

    The shift register holds `constraint_length` bits with the newest input bit most
    significant, so the octal tap `171` reads `1111001` from the current input back to
    the oldest one.
    `k` is the number of message bits per frame; with zero-tail termination
    `constraint_length - 1` zero bits are appended before encoding.
    """

    constraint_length: int = 7
    taps: tuple[int, ...] = (0o171, 0o133)
    k: int = 70
    termination: Termination = Termination.UNTERMINATED

    def __post_init__(self):
        if not 2 <= self.constraint_length <= MAX_CONSTRAINT_LENGTH:
            raise InvalidArgumentError(
                f"constraint length must be in [2, {MAX_CONSTRAINT_LENGTH}], "
                f"got {self.constraint_length}"
            )
        if not 1 <= len(self.taps) <= MAX_OUTPUTS:
            raise InvalidArgumentError(f"between 1 and {MAX_OUTPUTS} taps are required")
        limit = 1 << self.constraint_length
        if any(not 0 < tap < limit for tap in self.taps):
            raise InvalidArgumentError(
                f"taps must have at most {self.constraint_length} significant bits"
            )
        if not any(tap >> (self.constraint_length - 1) for tap in self.taps):
            raise InvalidArgumentError("at least one tap has to use the current input bit")
        if self.k < 1:
            raise InvalidArgumentError(f"k must be positive, got {self.k}")
        object.__setattr__(self, "termination", Termination(self.termination))

    @classmethod
    def from_octal(
        cls,
        taps: str,
        *,
        constraint_length: int = 7,
        k: int = 70,
        termination: Termination | str = Termination.UNTERMINATED,
    ) -> Self:
        """Build a code from taps written in octal, e.g. `"171,133"`."""
        try:
            parsed = tuple(int(tap.strip(), 8) for tap in taps.split(",") if tap.strip())
        except ValueError as e:
            raise InvalidArgumentError(f"taps must be octal numbers: {taps!r}") from e
        return cls(
            constraint_length=constraint_length,
            taps=parsed,
            k=k,
            termination=Termination(termination),
        )

    @property
    def rate_inverse(self) -> int:
        return len(self.taps)

    @property
    def tail_bits(self) -> int:
        if self.termination is Termination.ZERO_TAIL:
            return self.constraint_length - 1
        return 0

    @property
    def n(self) -> int:
        return self.rate_inverse * (self.k + self.tail_bits)

    @property
    def octal_taps(self) -> str:
        return ",".join(f"{tap:o}" for tap in self.taps)

    @cached_property
    def trellis(self) -> Trellis:
        memory = self.constraint_length - 1
        n_states = 1 << memory
        next_state = np.zeros((n_states, 2), dtype=np.int64)
        outputs = np.zeros((n_states, 2), dtype=np.int64)
        output_bits = np.zeros((n_states, 2, self.rate_inverse), dtype=np.uint8)
        for state in range(n_states):
            for bit in (0, 1):
                register = (bit << memory) | state
                next_state[state, bit] = register >> 1
                for o, tap in enumerate(self.taps):
                    out = (register & tap).bit_count() & 1
                    output_bits[state, bit, o] = out
                    outputs[state, bit] = (outputs[state, bit] << 1) | out
        return Trellis(next_state=next_state, outputs=outputs, output_bits=output_bits)

    def encode_batch(self, messages: np.ndarray) -> np.ndarray:
        messages = np.ascontiguousarray(messages, dtype=np.uint8)
        if messages.shape[-1] != self.k:
            raise LengthMismatchError(messages.shape[-1], self.k)
        trellis = self.trellis
        return _encode_kernel(
            messages.reshape(-1, self.k),
            trellis.next_state,
            trellis.output_bits,
            self.tail_bits,
        ).reshape(*messages.shape[:-1], self.n)

    def decode_batch(self, received: np.ndarray) -> np.ndarray:
        received = np.ascontiguousarray(received, dtype=np.uint8)
        if received.shape[-1] != self.n:
            raise LengthMismatchError(received.shape[-1], self.n)
        popcount = np.array(
            [v.bit_count() for v in range(1 << self.rate_inverse)], dtype=np.int64
        )
        return _viterbi_kernel(
            received.reshape(-1, self.n),
            self.trellis.outputs,
            popcount,
            self.constraint_length - 1,
            self.k,
            self.tail_bits,
        ).reshape(*received.shape[:-1], self.k)


@dataclass(frozen=True)
class BlockCode:
    """
    Linear block code `x = u · G` with maximum-likelihood decoding by enumeration.

    Among the codewords nearest to the received word, the decoder picks the one whose
    error pattern is smallest as an integer.
    That choice only depends on the coset of the noise, so whether a frame is decoded
    correctly does not depend on the message that was sent.
    """

    generator: BitMatrix

    def __post_init__(self):
        if self.generator.rows > MAX_BLOCK_MESSAGE_BITS:
            raise TooLargeError("block code message", self.generator.rows, MAX_BLOCK_MESSAGE_BITS)

    @classmethod
    def repetition(cls, n: int) -> Self:
        return cls(BitMatrix(np.ones((1, n), dtype=np.uint8)))

    @property
    def k(self) -> int:
        return self.generator.rows

    @property
    def n(self) -> int:
        return self.generator.cols

    @cached_property
    def codebook(self) -> np.ndarray:
        """All `2^k` codewords, row `i` encoding message `i` (first bit most significant)."""
        indices = np.arange(1 << self.k)
        messages = (indices[:, None] >> np.arange(self.k - 1, -1, -1)) & 1
        return self.encode_batch(messages.astype(np.uint8))

    def encode_batch(self, messages: np.ndarray) -> np.ndarray:
        messages = np.asarray(messages, dtype=np.uint8)
        if messages.shape[-1] != self.k:
            raise LengthMismatchError(messages.shape[-1], self.k)
        product = messages.astype(np.int64) @ self.generator.entries.astype(np.int64)
        return (product & 1).astype(np.uint8)

    def decode_batch(self, received: np.ndarray, chunk: int = 4096) -> np.ndarray:
        received = np.asarray(received, dtype=np.uint8)
        if received.shape[-1] != self.n:
            raise LengthMismatchError(received.shape[-1], self.n)
        flat = received.reshape(-1, self.n)
        place = 1 << np.arange(self.n - 1, -1, -1, dtype=np.int64)
        chosen = np.empty(flat.shape[0], dtype=np.int64)
        for start in range(0, flat.shape[0], chunk):
            errors = flat[start : start + chunk, None, :] ^ self.codebook[None, :, :]
            weight = errors.sum(axis=-1, dtype=np.int64)
            key = (weight << self.n) | (errors.astype(np.int64) @ place)
            chosen[start : start + chunk] = np.argmin(key, axis=1)
        messages = (chosen[:, None] >> np.arange(self.k - 1, -1, -1)) & 1
        return messages.astype(np.uint8).reshape(*received.shape[:-1], self.k)


def encode(code: LinearCode, u: BitVec) -> BitVec:
    if u.length != code.k:
        raise LengthMismatchError(u.length, code.k)
    return BitVec.from_bits(code.encode_batch(u.to_array()[None, :])[0])


def decode(code: LinearCode, y: BitVec) -> BitVec:
    if y.length != code.n:
        raise LengthMismatchError(y.length, code.n)
    return BitVec.from_bits(code.decode_batch(y.to_array()[None, :])[0])


def viterbi_decode(code: ConvCode, y: BitVec) -> BitVec:
    """
    Message whose codeword is closest to `y` in Hamming distance.

    This is the maximum-likelihood decision on a BSC with crossover below 1/2.
    """
    return decode(code, y)


def draw_messages(
    generator: np.random.Generator,
    shape: tuple[int, ...],
    k: int,
    detection: DetectionMode = DetectionMode.GENIE,
) -> np.ndarray:
    """
    Random messages of `k` bits.

    In CRC mode the last 16 of the `k` bits are the checksum of the others.
    """
    if detection is DetectionMode.CRC16:
        if k <= CRC_BITS:
            raise InvalidArgumentError(f"k must exceed {CRC_BITS} to carry a CRC, got {k}")
        payloads = generator.integers(0, 2, size=(*shape, k - CRC_BITS), dtype=np.uint8)
        return append_crc(payloads)
    return generator.integers(0, 2, size=(*shape, k), dtype=np.uint8)


def passes_batch(
    mode: DetectionMode, decoded: np.ndarray, truth: np.ndarray | None = None
) -> np.ndarray:
    if mode is DetectionMode.GENIE:
        if truth is None:
            raise InvalidArgumentError("genie detection needs the true messages")
        return np.all(decoded == truth, axis=-1)
    return crc_passes(decoded)


def detect_error(mode: DetectionMode, decoded: BitVec, truth: BitVec | None = None) -> bool:
    """
    Error detection at a decoding server.

    Returns `True` when the decoded message is judged correct: by comparison with the
    true message in genie mode, by its embedded checksum in CRC mode.
    A wrong message passes the CRC with a probability of about 2^-16.
    """
    if mode is DetectionMode.GENIE:
        if truth is None:
            raise InvalidArgumentError("genie detection needs the true message")
        return decoded == truth
    return bool(crc_passes(decoded.to_array()))
