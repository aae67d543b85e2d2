class NfvError(Exception):
    """Base class of every error raised by `codednfv`."""


class LengthMismatchError(NfvError):
    """
    Two bit sequences that have to line up do not.

    Raised by XOR of unequal vectors, by encoders and decoders receiving a frame of the
    wrong length and by solvers whose right-hand sides disagree in length.
    """

    _left: int
    _right: int

    def __init__(self, left: int, right: int):
        super().__init__(f"lengths do not match, got {left} and {right}")
        self._left = left
        self._right = right

    @property
    def left(self):
        return self._left

    @property
    def right(self):
        return self._right


class RankDeficientError(NfvError):
    _rank: int
    _required: int

    def __init__(self, rank: int, required: int):
        super().__init__(f"matrix has rank {rank}, but rank {required} is required")
        self._rank = rank
        self._required = required

    @property
    def rank(self):
        return self._rank

    @property
    def required(self):
        return self._required


class TooLargeError(NfvError):
    """An exhaustive enumeration would exceed its budget."""

    _size: int
    _limit: int

    def __init__(self, what: str, size: int, limit: int):
        super().__init__(f"{what} of size {size} exceeds the enumeration limit {limit}")
        self._size = size
        self._limit = limit

    @property
    def size(self):
        return self._size

    @property
    def limit(self):
        return self._limit


class ZeroMatrixError(NfvError):
    def __init__(self):
        super().__init__("matrix has no nonzero codeword")


class InconsistentSystemError(NfvError):
    """
    An overdetermined GF(2) system has no solution.

    This only happens when some right-hand side is wrong, e.g. a decoder output that
    passed its CRC although it was decoded incorrectly.
    """

    def __init__(self):
        super().__init__("linear system over GF(2) is inconsistent")


class InvalidArgumentError(NfvError, ValueError):
    pass


class ConfigError(NfvError):
    """A configuration value is missing, unknown or out of range."""

    _field: str
    _line: None | int

    def __init__(self, field: str, message: str, line: None | int = None):
        location = f"{field} (line {line})" if line is not None else field
        super().__init__(f"{location}: {message}")
        self._field = field
        self._line = line

    @property
    def field(self):
        return self._field

    @property
    def line(self):
        return self._line
