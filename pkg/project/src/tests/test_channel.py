import math

import numpy as np
import pytest
from codednfv.channel import (
    BscChannel,
    RngStream,
    ServerFailureModel,
    effective_p,
    sample_availability,
    sample_noise,
)
from codednfv.errors import InvalidArgumentError


def test_effective_p():
    assert effective_p(0.05, 1) == 0.05
    assert effective_p(0.05, 2) == pytest.approx(0.095)
    # odd number of ones among three Bernoulli(p)
    p = 0.1
    assert effective_p(p, 3) == pytest.approx(3 * p * (1 - p) ** 2 + p**3)
    assert effective_p(0.0, 5) == 0.0


def test_effective_p_invalid():
    with pytest.raises(InvalidArgumentError):
        effective_p(0.1, 0)
    with pytest.raises(InvalidArgumentError):
        effective_p(1.5, 1)


@pytest.mark.parametrize("p", [-0.1, 1.1])
def test_invalid_crossover(p):
    with pytest.raises(InvalidArgumentError):
        BscChannel(p)


def test_extreme_crossover():
    stream = RngStream(0, (0, "noise"))
    assert sample_noise(BscChannel(0.0), 500, stream).weight == 0
    assert sample_noise(BscChannel(1.0), 500, stream).weight == 500


def test_xor_noise_rate():
    """Two independent BSC(p) noises XOR to a BSC(2p(1-p)) noise."""
    p, bits = 0.05, 1_000_000
    channel = BscChannel(p)
    a = channel.noise(RngStream(7, (0, "first")).generator(), (bits,))
    b = channel.noise(RngStream(7, (0, "second")).generator(), (bits,))
    rate = np.mean(a ^ b)
    expected = 2 * p * (1 - p)
    sigma = math.sqrt(expected * (1 - expected) / bits)
    assert abs(rate - expected) < 3 * sigma


def test_streams_reproducible():
    first = RngStream(42, (3, "noise")).generator().random(10)
    again = RngStream(42, (3, "noise")).generator().random(10)
    assert np.array_equal(first, again)


@pytest.mark.parametrize(
    "other", [RngStream(43, (3, "noise")), RngStream(42, (4, "noise")), RngStream(42, (3, "messages"))]
)
def test_streams_independent(other):
    reference = RngStream(42, (3, "noise")).generator().random(10)
    assert not np.array_equal(reference, other.generator().random(10))


def test_server_failures():
    stream = RngStream(0, (0, "availability"))
    assert sample_availability(ServerFailureModel(0.0, 3), stream).all()
    assert not sample_availability(ServerFailureModel(1.0, 3), stream).any()

    up = ServerFailureModel(0.2, 4).availability(stream.generator(), 50_000)
    assert up.shape == (50_000, 4)
    assert np.mean(up) == pytest.approx(0.8, abs=0.01)


def test_invalid_failure_model():
    with pytest.raises(InvalidArgumentError):
        ServerFailureModel(0.5, 0)
    with pytest.raises(InvalidArgumentError):
        ServerFailureModel(-0.5, 3)


def test_effective_p_grows_towards_one_half():
    for p in (0.0, 0.001, 0.01, 0.05, 0.2, 0.45, 0.5):
        values = [effective_p(p, d) for d in range(1, 12)]
        assert values == sorted(values)
        assert all(v <= 0.5 + 1e-12 for v in values)


def test_sample_noise_rate():
    p, bits = 0.05, 1_000_000
    noise = sample_noise(BscChannel(p), bits, RngStream(3, (0, "noise")))
    assert len(noise) == bits
    sigma = math.sqrt(p * (1 - p) / bits)
    assert abs(noise.weight / bits - p) < 3 * sigma
