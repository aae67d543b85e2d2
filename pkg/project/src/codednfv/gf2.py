"""
Exact arithmetic over GF(2).

`BitVec` stores bits packed into bytes together with an explicit length, `BitMatrix`
stores a small K×N matrix of bits.
Both are immutable once constructed, which makes them safe to share between trial
workers.
"""

import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import Self

import numpy as np

from .errors import (
    InconsistentSystemError,
    InvalidArgumentError,
    LengthMismatchError,
    RankDeficientError,
    TooLargeError,
    ZeroMatrixError,
)

MAX_ENUMERATION_ROWS = 20
"Largest number of matrix rows for which codewords are enumerated exhaustively."

_ROW_SEPARATORS = re.compile(r"[\n/;]+")


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def _as_bits(bits: Iterable[int] | np.ndarray) -> np.ndarray:
    array = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
    array = array.astype(np.uint8, copy=False).ravel()
    if array.size and array.max() > 1:
        raise InvalidArgumentError("bits must be 0 or 1")
    return array


@dataclass(frozen=True, eq=False)
class BitVec:
    """
    Ordered sequence of binary symbols.

    The bits are packed eight to a byte, most significant bit first, and padded with
    zeros at the end so that XOR and equality can work on the packed bytes directly.
    """

    words: np.ndarray
    length: int

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray) -> Self:
        array = _as_bits(bits)
        return cls(words=_readonly(np.packbits(array)), length=int(array.size))

    @classmethod
    def from_str(cls, text: str) -> Self:
        text = text.strip()
        if set(text) - {"0", "1"}:
            raise InvalidArgumentError(f"not a bit string: {text!r}")
        return cls.from_bits(np.frombuffer(text.encode(), dtype=np.uint8) - ord("0"))

    @classmethod
    def zeros(cls, length: int) -> Self:
        return cls.from_bits(np.zeros(length, dtype=np.uint8))

    def to_array(self) -> np.ndarray:
        """Unpacked copy of the bits as a `uint8` array."""
        return np.unpackbits(self.words, count=self.length)

    @property
    def weight(self) -> int:
        return int(np.unpackbits(self.words).sum())

    def __len__(self):
        return self.length

    def __iter__(self) -> Iterator[int]:
        return iter(int(bit) for bit in self.to_array())

    def __getitem__(self, index: int) -> int:
        return int(self.to_array()[index])

    def __xor__(self, other: "BitVec") -> "BitVec":
        return xor(self, other)

    def __eq__(self, other: object):
        if isinstance(other, BitVec):
            return self.length == other.length and bool(
                np.array_equal(self.words, other.words)
            )
        return NotImplemented

    def __hash__(self):
        return hash((self.length, self.words.tobytes()))

    def __str__(self):
        return "".join(str(bit) for bit in self.to_array())

    def __repr__(self):
        return f"{self.__class__.__name__}({self})"


def xor(a: BitVec, b: BitVec) -> BitVec:
    if a.length != b.length:
        raise LengthMismatchError(a.length, b.length)
    return BitVec(words=_readonly(np.bitwise_xor(a.words, b.words)), length=a.length)


@dataclass(frozen=True, eq=False)
class BitMatrix:
    """
    K×N matrix over GF(2).

    Columns are also handled as K-bit integers where row `i` maps to bit `K - 1 - i`,
    so sorting columns as integers sorts them as binary numbers read top to bottom.
    """

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.uint8, ndmin=2)
        if entries.ndim != 2:
            raise InvalidArgumentError("a bit matrix needs exactly two dimensions")
        if entries.size and entries.max() > 1:
            raise InvalidArgumentError("matrix entries must be 0 or 1")
        object.__setattr__(self, "entries", _readonly(entries))

    @classmethod
    def parse(cls, text: str) -> Self:
        """
        Parse rows of '0'/'1' characters.

        Rows are separated by newlines; '/' and ';' are accepted as well so that a
        matrix fits on a command line, e.g. `101/011`.
        """
        rows = [row.strip() for row in _ROW_SEPARATORS.split(text.strip()) if row.strip()]
        if not rows:
            raise InvalidArgumentError("empty matrix")
        if len({len(row) for row in rows}) != 1:
            raise InvalidArgumentError(f"rows of unequal length in {text!r}")
        if any(set(row) - {"0", "1"} for row in rows):
            raise InvalidArgumentError(f"matrix rows must consist of 0 and 1: {text!r}")
        return cls(np.array([[int(c) for c in row] for row in rows], dtype=np.uint8))

    @classmethod
    def identity(cls, size: int) -> Self:
        return cls(np.eye(size, dtype=np.uint8))

    @classmethod
    def from_column_ints(cls, columns: Sequence[int], rows: int) -> Self:
        entries = np.zeros((rows, len(columns)), dtype=np.uint8)
        for j, column in enumerate(columns):
            for i in range(rows):
                entries[i, j] = (column >> (rows - 1 - i)) & 1
        return cls(entries)

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])

    def column_weight(self, j: int) -> int:
        return int(self.entries[:, j].sum())

    @property
    def column_weights(self) -> tuple[int, ...]:
        return tuple(int(w) for w in self.entries.sum(axis=0))

    @property
    def column_ints(self) -> tuple[int, ...]:
        weights = 1 << np.arange(self.rows - 1, -1, -1, dtype=np.int64)
        return tuple(int(v) for v in weights @ self.entries.astype(np.int64))

    def select_columns(self, columns: Iterable[int]) -> "BitMatrix":
        return BitMatrix(self.entries[:, list(columns)].reshape(self.rows, -1))

    def canonical(self) -> "BitMatrix":
        """Same matrix with its columns sorted as binary numbers."""
        return BitMatrix.from_column_ints(sorted(self.column_ints), self.rows)

    def to_flag(self) -> str:
        return "/".join("".join(str(b) for b in row) for row in self.entries)

    def __eq__(self, other: object):
        if isinstance(other, BitMatrix):
            return bool(np.array_equal(self.entries, other.entries))
        return NotImplemented

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes()))

    def __str__(self):
        return "\n".join("".join(str(b) for b in row) for row in self.entries)

    def __repr__(self):
        return f"{self.__class__.__name__}({self.to_flag()})"


def rank_of_ints(values: Iterable[int]) -> int:
    """Rank over GF(2) of vectors given as integer bitsets."""
    basis: list[int] = []
    for value in values:
        # basis is kept sorted descending, so every element has its own leading bit
        for element in basis:
            value = min(value, value ^ element)
        if value:
            basis.append(value)
            basis.sort(reverse=True)
    return len(basis)


def rank(m: BitMatrix) -> int:
    return rank_of_ints(m.column_ints)


def _row_reduce(matrix: np.ndarray, pivot_columns: int) -> tuple[np.ndarray, list[int]]:
    """
    Reduced row echelon form over GF(2), pivoting only on the first `pivot_columns`.
    """
    mat = matrix.copy()
    m = mat.shape[0]
    pivots: list[int] = []
    row = 0
    for col in range(pivot_columns):
        if row == m:
            break
        candidates = np.flatnonzero(mat[row:, col]) + row
        if candidates.size == 0:
            continue
        pivot = int(candidates[0])
        if pivot != row:
            mat[[row, pivot]] = mat[[pivot, row]]
        hits = np.flatnonzero(mat[:, col])
        hits = hits[hits != row]
        mat[hits] ^= mat[row]
        pivots.append(col)
        row += 1
    return mat, pivots


def solve(m: BitMatrix, rhs: Sequence[BitVec]) -> list[BitVec]:
    """
    Solve `u · m = rhs` for the K message rows `u`.

    `rhs[j]` is the vector expected at column `j` of `m`, i.e. the XOR of the messages
    selected by that column.
    A single elimination on `[mᵀ | rhs]` solves all bit positions at once.
    Extra columns make the system overdetermined; a contradiction between them raises
    `InconsistentSystemError`.
    """
    if len(rhs) != m.cols:
        raise LengthMismatchError(len(rhs), m.cols)
    lengths = sorted({v.length for v in rhs})
    if len(lengths) > 1:
        raise LengthMismatchError(lengths[0], lengths[-1])
    width = lengths[0] if lengths else 0

    targets = (
        np.stack([v.to_array() for v in rhs])
        if rhs
        else np.zeros((0, width), dtype=np.uint8)
    )
    augmented = np.concatenate([m.entries.T, targets], axis=1)
    reduced, pivots = _row_reduce(augmented, m.rows)
    if len(pivots) < m.rows:
        raise RankDeficientError(len(pivots), m.rows)
    if reduced[len(pivots) :, m.rows :].any():
        raise InconsistentSystemError()
    return [BitVec.from_bits(reduced[i, m.rows :]) for i in range(m.rows)]


def _parity(values: np.ndarray) -> np.ndarray:
    for shift in (16, 8, 4, 2, 1):
        values = values ^ (values >> shift)
    return values & 1


def min_distance(m: BitMatrix) -> int:
    """Minimum Hamming weight over all nonzero codewords `u · m`, by enumeration."""
    if m.rows > MAX_ENUMERATION_ROWS:
        raise TooLargeError("message space", m.rows, MAX_ENUMERATION_ROWS)
    if not m.entries.any():
        raise ZeroMatrixError()

    messages = np.arange(1, 1 << m.rows, dtype=np.uint32)
    weights = np.zeros(messages.size, dtype=np.int32)
    for column in m.column_ints:
        weights += _parity(messages & np.uint32(column)).astype(np.int32)
    return int(weights.min())
