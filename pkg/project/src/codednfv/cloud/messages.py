from dataclasses import dataclass

from ..gf2 import BitVec
from .ids import MessageId, TrialId


@dataclass(frozen=True)
class Message:
    """Every message has its own id and names the trial it belongs to."""

    mid: MessageId
    trial: TrialId


@dataclass(frozen=True)
class DecodeRequest(Message):
    """
    Controller to server: decode this combined frame.

    `target` is what the server should decode to; it is only set when correctness is
    judged by the genie, a CRC check needs nothing but the decoded frame.
    """

    server: int
    frame: BitVec
    target: None | BitVec = None


@dataclass(frozen=True)
class DecodeResponse(Message):
    """
    Server to controller: the decoded message and whether it passed error detection.

    Servers answer even when detection failed, the controller decides what to trust.
    """

    server: int
    decoded: BitVec
    passed: bool
