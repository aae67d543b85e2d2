"""
Mapping of received frames onto decoding servers.

An NFV scheme is a K×N generator matrix over GF(2): server `j` decodes the XOR of the
frames `i` with `G[i][j] = 1`.
Because the channel code is linear, that XOR of received frames is a noisy codeword of
the XOR of the messages, so server `j` decodes `⊕ᵢ G[i][j]·uᵢ` over the same code.
The controller recovers all K messages from any set of trusted servers whose columns
span GF(2)^K.

Server sets are handled as bitmasks with bit `j` standing for server `j` (0-based).
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cache
from itertools import combinations
from typing import Self

import numpy as np

from .convcode import DetectionMode
from .errors import (
    InconsistentSystemError,
    InvalidArgumentError,
    LengthMismatchError,
    RankDeficientError,
    TooLargeError,
)
from .gf2 import BitMatrix, BitVec, min_distance, rank, rank_of_ints, solve

log = logging.getLogger(__name__)

MAX_ENUMERATION_SERVERS = 20
MAX_WITNESS_SERVERS = 12


@dataclass(frozen=True)
class NfvScheme:
    g_nfv: BitMatrix
    name: str = "matrix"

    def __post_init__(self):
        matrix_rank = rank(self.g_nfv)
        if matrix_rank != self.g_nfv.rows:
            raise RankDeficientError(matrix_rank, self.g_nfv.rows)
        if 0 in self.g_nfv.column_weights:
            raise InvalidArgumentError(f"scheme {self.name} has a server without input")

    @property
    def n_frames(self) -> int:
        return self.g_nfv.rows

    @property
    def n_servers(self) -> int:
        return self.g_nfv.cols

    def __str__(self):
        return self.name


def _check_sizes(n_servers: int, n_frames: int):
    if n_frames < 1:
        raise InvalidArgumentError(f"at least one frame is required, got {n_frames}")
    if n_servers < n_frames:
        raise InvalidArgumentError(
            f"{n_servers} servers cannot decode {n_frames} frames"
        )


def build_diversity(n_servers: int, n_frames: int) -> NfvScheme:
    """
    Duplicate the last frame onto every server beyond the first K.

    With N=3, K=2 this gives `[[1,0,0],[0,1,1]]`: frame 2 goes to servers 2 and 3.
    """
    _check_sizes(n_servers, n_frames)
    entries = np.zeros((n_frames, n_servers), dtype=np.uint8)
    entries[:, :n_frames] = np.eye(n_frames, dtype=np.uint8)
    entries[n_frames - 1, n_frames:] = 1
    return NfvScheme(BitMatrix(entries), name="diversity")


def build_coded_xor(n_servers: int, n_frames: int) -> NfvScheme:
    """
    Systematic servers for every frame plus parity servers decoding the XOR of all
    frames.
    """
    _check_sizes(n_servers, n_frames)
    entries = np.ones((n_frames, n_servers), dtype=np.uint8)
    entries[:, :n_frames] = np.eye(n_frames, dtype=np.uint8)
    return NfvScheme(BitMatrix(entries), name="coded")


def parse_scheme(spec: str, n_servers: int = 3, n_frames: int = 2) -> NfvScheme:
    """
    Scheme from its name: `diversity`, `coded` or `matrix:<rows>` (e.g. `matrix:101/011`).

    The sizes only apply to the named schemes, a matrix carries its own.
    """
    spec = spec.strip()
    match spec.split(":", 1):
        case ["diversity"]:
            return build_diversity(n_servers, n_frames)
        case ["coded"]:
            return build_coded_xor(n_servers, n_frames)
        case ["matrix", rows]:
            return NfvScheme(BitMatrix.parse(rows), name=f"matrix:{rows.strip()}")
        case _:
            raise InvalidArgumentError(f"unknown scheme {spec!r}")


def combine(g: BitMatrix, frames: np.ndarray) -> np.ndarray:
    """
    Apply `g` to stacked frames: `(..., K, n)` becomes `(..., N, n)`.

    Works for received frames (server inputs) as well as for messages (the targets the
    servers are supposed to decode).
    """
    if frames.shape[-2] != g.rows:
        raise LengthMismatchError(frames.shape[-2], g.rows)
    summed = np.einsum("...kn,kj->...jn", frames.astype(np.int64), g.entries.astype(np.int64))
    return (summed & 1).astype(np.uint8)


def server_inputs(scheme: NfvScheme, received: Sequence[BitVec]) -> list[BitVec]:
    if len(received) != scheme.n_frames:
        raise LengthMismatchError(len(received), scheme.n_frames)
    lengths = sorted({frame.length for frame in received})
    if len(lengths) > 1:
        raise LengthMismatchError(lengths[0], lengths[-1])
    stacked = np.stack([frame.to_array() for frame in received])
    return [BitVec.from_bits(row) for row in combine(scheme.g_nfv, stacked)]


class RecoveryStatus(StrEnum):
    RECOVERED = "recovered"
    FAILURE = "failure"
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class ServerOutcome:
    available: bool
    decoded: None | BitVec = None
    "Only present if the server was available."
    correct: bool = False
    "Verdict of the genie or of the CRC on `decoded`."

    @property
    def trusted(self) -> bool:
        return self.available and self.decoded is not None and self.correct


@dataclass(frozen=True)
class RecoveryResult:
    status: RecoveryStatus
    messages: None | tuple[BitVec, ...] = None
    servers: frozenset[int] = field(default_factory=frozenset)
    "Servers whose outputs entered the solution."

    @property
    def recovered(self) -> bool:
        return self.status is RecoveryStatus.RECOVERED


def _spanning_subset(columns: Sequence[int], candidates: Sequence[int]) -> list[int]:
    """Greedily pick candidates whose columns are linearly independent."""
    chosen: list[int] = []
    for j in candidates:
        if rank_of_ints(columns[c] for c in [*chosen, j]) == len(chosen) + 1:
            chosen.append(j)
    return chosen


def recover(
    scheme: NfvScheme,
    outcomes: Sequence[ServerOutcome],
    trust: DetectionMode = DetectionMode.GENIE,
) -> RecoveryResult:
    """
    Recover all K messages at the controller from the trusted server outputs.

    Genie verdicts are exact, so K independent servers suffice.
    CRC verdicts can be wrong; then every trusted output enters the system, and a
    contradiction between them is reported as `INCONSISTENT` instead of a recovery.
    A wrong output that does not contradict the others is still returned as
    `RECOVERED`; only the caller knows the true messages.
    """
    if len(outcomes) != scheme.n_servers:
        raise LengthMismatchError(len(outcomes), scheme.n_servers)

    trusted = [j for j, outcome in enumerate(outcomes) if outcome.trusted]
    columns = scheme.g_nfv.column_ints
    independent = _spanning_subset(columns, trusted)
    if len(independent) < scheme.n_frames:
        return RecoveryResult(RecoveryStatus.FAILURE, servers=frozenset(trusted))

    used = independent if trust is DetectionMode.GENIE else trusted
    system = scheme.g_nfv.select_columns(used)
    rhs = [outcomes[j].decoded for j in used]
    try:
        messages = solve(system, [v for v in rhs if v is not None])
    except InconsistentSystemError:
        log.debug("trusted outputs of servers %s contradict each other", used)
        return RecoveryResult(RecoveryStatus.INCONSISTENT, servers=frozenset(used))
    return RecoveryResult(
        RecoveryStatus.RECOVERED, messages=tuple(messages), servers=frozenset(used)
    )


@cache
def recoverable_masks(g: BitMatrix) -> np.ndarray:
    """
    `table[mask]` tells whether the servers in `mask` can recover all messages.
    """
    if g.cols > MAX_ENUMERATION_SERVERS:
        raise TooLargeError("server set", g.cols, MAX_ENUMERATION_SERVERS)
    columns = g.column_ints
    table = np.zeros(1 << g.cols, dtype=bool)
    for mask in range(1 << g.cols):
        selected = (columns[j] for j in range(g.cols) if mask >> j & 1)
        table[mask] = rank_of_ints(selected) == g.rows
    table.flags.writeable = False
    return table


def mfr(scheme: NfvScheme) -> int:
    """
    Minimum number of servers whose removal makes recovery impossible.

    Removing a set of servers kills recovery exactly when some nonzero message
    combination is only seen by those servers, so this is the minimum distance of G.
    """
    return min_distance(scheme.g_nfv)


def mfr_witness(scheme: NfvScheme) -> tuple[int, ...]:
    """Smallest removal set (0-based servers) found by direct subset search."""
    if scheme.n_servers > MAX_WITNESS_SERVERS:
        raise TooLargeError("server set", scheme.n_servers, MAX_WITNESS_SERVERS)
    table = recoverable_masks(scheme.g_nfv)
    everyone = (1 << scheme.n_servers) - 1
    for size in range(1, scheme.n_servers + 1):
        for removed in combinations(range(scheme.n_servers), size):
            remaining = everyone & ~sum(1 << j for j in removed)
            if not table[remaining]:
                return removed
    return tuple(range(scheme.n_servers))
