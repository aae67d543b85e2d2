"""
CRC-16 with generator x^16 + x^12 + x^5 + 1.

The register starts at zero and no final XOR is applied, so the checksum is a GF(2)
linear function of the payload: the CRC of `u1 ⊕ u2` is the XOR of both CRCs.
A server that decodes the XOR of two frames can therefore check its output as well.
"""

from functools import cache

import numpy as np

CRC16_POLY = 0x1021
CRC_BITS = 16


def crc16(payload: np.ndarray) -> np.ndarray:
    """Checksum of a single payload, most significant bit first."""
    register = 0
    for bit in payload:
        feedback = ((register >> (CRC_BITS - 1)) & 1) ^ int(bit)
        register = (register << 1) & 0xFFFF
        if feedback:
            register ^= CRC16_POLY
    return np.array(
        [(register >> (CRC_BITS - 1 - i)) & 1 for i in range(CRC_BITS)], dtype=np.uint8
    )


@cache
def crc_matrix(payload_length: int) -> np.ndarray:
    """
    Matrix `C` with `crc16(u) == u · C` over GF(2), one row per payload bit.
    """
    rows = np.zeros((payload_length, CRC_BITS), dtype=np.uint8)
    for i in range(payload_length):
        unit = np.zeros(payload_length, dtype=np.uint8)
        unit[i] = 1
        rows[i] = crc16(unit)
    rows.flags.writeable = False
    return rows


def _checksums(payloads: np.ndarray) -> np.ndarray:
    matrix = crc_matrix(payloads.shape[-1]).astype(np.int64)
    return ((payloads.astype(np.int64) @ matrix) & 1).astype(np.uint8)


def append_crc(payloads: np.ndarray) -> np.ndarray:
    """Append the checksum to every row of a `(frames, payload)` array."""
    return np.concatenate([payloads, _checksums(payloads)], axis=-1)


def crc_passes(frames: np.ndarray) -> np.ndarray:
    """Whether the trailing 16 bits of every row match the checksum of the rest."""
    payloads, checks = frames[..., :-CRC_BITS], frames[..., -CRC_BITS:]
    return np.all(_checksums(payloads) == checks, axis=-1)
