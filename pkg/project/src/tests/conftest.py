import numpy as np
import pytest
from codednfv.convcode import BlockCode, ConvCode, Termination
from codednfv.gf2 import BitMatrix


@pytest.fixture
def shortened_hamming() -> BlockCode:
    """[6, 3] code with minimum distance 3, small enough to enumerate all noise."""
    return BlockCode(BitMatrix.parse("100110/010101/001011"))


@pytest.fixture
def short_conv_code() -> ConvCode:
    return ConvCode(k=24, termination=Termination.ZERO_TAIL)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
