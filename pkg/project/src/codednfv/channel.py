"""
Binary symmetric channel, server failures and the random streams driving both.
"""

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .gf2 import BitVec


def _check_probability(name: str, value: float):
    if not 0.0 <= value <= 1.0:
        raise InvalidArgumentError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class BscChannel:
    p: float

    def __post_init__(self):
        _check_probability("p", self.p)

    def noise(self, generator: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        """Independent Bernoulli(p) bits of the given shape."""
        return (generator.random(shape) < self.p).astype(np.uint8)


@dataclass(frozen=True)
class ServerFailureModel:
    q: float
    n_servers: int

    def __post_init__(self):
        _check_probability("q", self.q)
        if self.n_servers < 1:
            raise InvalidArgumentError(f"at least one server is required, got {self.n_servers}")

    def availability(self, generator: np.random.Generator, trials: int) -> np.ndarray:
        """`(trials, n_servers)` booleans, `True` where the server is up."""
        return generator.random((trials, self.n_servers)) >= self.q


@dataclass(frozen=True)
class RngStream:
    """
    Counter-based random stream identified by `(master_seed, stream_id)`.

    The stream id is a block index and a purpose tag such as `"noise"`.
    Each stream is a Philox generator keyed by these values, so the same id always
    produces the same bits no matter which worker draws them or in which order.
    """

    master_seed: int
    stream_id: tuple[int, str]

    def generator(self) -> np.random.Generator:
        index, purpose = self.stream_id
        tag = zlib.crc32(purpose.encode())
        sequence = np.random.SeedSequence(
            entropy=self.master_seed & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(index, tag)
        )
        return np.random.Generator(np.random.Philox(sequence))


def sample_noise(channel: BscChannel, length: int, stream: RngStream) -> BitVec:
    return BitVec.from_bits(channel.noise(stream.generator(), (length,)))


def sample_availability(model: ServerFailureModel, stream: RngStream) -> np.ndarray:
    return model.availability(stream.generator(), 1)[0]


def effective_p(p: float, d: int) -> float:
    """
    Crossover probability seen after XORing `d` frames that crossed a BSC(p).

    This is the probability that the XOR of `d` independent Bernoulli(p) bits is one.
    """
    if d < 1:
        raise InvalidArgumentError(f"d must be at least 1, got {d}")
    _check_probability("p", p)
    match d:
        case 1:
            return p
        case 2:
            return 2 * p * (1 - p)
        case _:
            return (1 - (1 - 2 * p) ** d) / 2
