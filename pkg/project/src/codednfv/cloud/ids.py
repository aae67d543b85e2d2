import uuid
from functools import total_ordering
from typing import Self

from ..errors import NfvError


@total_ordering
class Id:
    """
    Random, typed identifier.

    Ids of different subclasses must never meet: comparing a `MessageId` with a
    `TrialId` raises `IncompatibleIdError` instead of quietly returning `False`.
    """

    _value: str

    def __init__(self, prefix: str):
        self._value = f"{prefix}-{uuid.uuid4().hex[:8]}"

    def __str__(self):
        return self._value

    def __repr__(self):
        return f"{type(self).__name__}({self._value})"

    def _comparable(self, other: object) -> bool:
        if type(self) is type(other):
            return True
        if isinstance(other, Id):
            raise IncompatibleIdError(self, other)
        return False

    def __eq__(self, other: object):
        if not self._comparable(other):
            return NotImplemented
        assert isinstance(other, Id)
        return self._value == other._value

    def __lt__(self, other: Self):
        if not self._comparable(other):
            return NotImplemented
        return self._value < other._value

    def __hash__(self):
        return hash(self._value)


class IncompatibleIdError(NfvError, TypeError):
    def __init__(self, left: Id, right: Id):
        super().__init__(
            f"cannot compare {type(left).__name__} with {type(right).__name__}"
        )
        self._left = left
        self._right = right

    @property
    def left(self) -> Id:
        return self._left

    @property
    def right(self) -> Id:
        return self._right


class MessageId(Id):
    def __init__(self):
        super().__init__("message")


class TrialId(Id):
    """One frame group travelling through the cloud; all its requests share it."""

    def __init__(self):
        super().__init__("trial")
