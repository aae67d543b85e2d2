"""
Coded network function virtualization.

Frames received over a binary symmetric channel are XOR-combined according to a
generator matrix and decoded on separate servers, so that the loss of some servers can
be tolerated.
This package simulates such schemes, estimates their end-to-end error probability and
searches for good generator matrices.
"""

from .convcode import BlockCode, ConvCode, DetectionMode, Termination
from .errors import NfvError
from .gf2 import BitMatrix, BitVec
from .schemes import NfvScheme, build_coded_xor, build_diversity, parse_scheme

__all__ = [
    "BitMatrix",
    "BitVec",
    "BlockCode",
    "ConvCode",
    "DetectionMode",
    "NfvError",
    "NfvScheme",
    "Termination",
    "build_coded_xor",
    "build_diversity",
    "parse_scheme",
]
