import numpy as np
import pytest
from codednfv.convcode import (
    BlockCode,
    ConvCode,
    DetectionMode,
    Termination,
    decode,
    detect_error,
    draw_messages,
    encode,
    passes_batch,
    viterbi_decode,
)
from codednfv.crc import CRC_BITS, append_crc, crc16, crc_passes
from codednfv.errors import InvalidArgumentError, LengthMismatchError
from codednfv.gf2 import BitVec


def test_impulse_response():
    code = ConvCode(k=7)
    assert str(encode(code, BitVec.from_str("1000000"))) == "11101111000111"


def test_lengths():
    assert ConvCode().n == 140
    assert ConvCode(k=64, termination=Termination.ZERO_TAIL).n == 140
    assert ConvCode.from_octal("7,5", constraint_length=3, k=10).n == 20
    assert ConvCode.from_octal("171,133,165", k=10).rate_inverse == 3


def test_from_octal():
    code = ConvCode.from_octal("171, 133", k=70, termination="zero_tail")
    assert code.taps == (0o171, 0o133)
    assert code.termination is Termination.ZERO_TAIL
    assert code.octal_taps == "171,133"


@pytest.mark.parametrize(
    ("taps", "constraint_length"),
    [("19,5", 3), ("17,5", 3), ("3,1", 3), ("", 3), ("7,5", 1)],
)
def test_invalid_codes(taps, constraint_length):
    with pytest.raises(InvalidArgumentError):
        ConvCode.from_octal(taps, constraint_length=constraint_length, k=8)


def test_linearity(rng):
    code = ConvCode()
    u1 = rng.integers(0, 2, size=(1000, code.k), dtype=np.uint8)
    u2 = rng.integers(0, 2, size=(1000, code.k), dtype=np.uint8)
    assert np.array_equal(
        code.encode_batch(u1 ^ u2), code.encode_batch(u1) ^ code.encode_batch(u2)
    )


@pytest.mark.parametrize("termination", list(Termination))
def test_noiseless_decoding(rng, termination):
    code = ConvCode(k=40, termination=termination)
    messages = rng.integers(0, 2, size=(200, code.k), dtype=np.uint8)
    assert np.array_equal(code.decode_batch(code.encode_batch(messages)), messages)


@pytest.mark.parametrize("seed", range(3))
def test_single_flip_corrected_at_every_position(seed):
    code = ConvCode(k=64, termination=Termination.ZERO_TAIL)
    message = np.random.default_rng(seed).integers(0, 2, size=code.k, dtype=np.uint8)
    received = np.repeat(code.encode_batch(message)[None], code.n, axis=0)
    received[np.arange(code.n), np.arange(code.n)] ^= 1

    decoded = code.decode_batch(received)
    assert np.array_equal(decoded, np.broadcast_to(message, decoded.shape))
    assert viterbi_decode(code, BitVec.from_bits(received[-1])) == BitVec.from_bits(message)


def test_unterminated_last_symbol_flip_ties():
    """
    Without a tail the last message bit only reaches the last output symbol, which it
    flips entirely. One flipped bit there leaves both values at distance 1, and the tie
    goes to the lower state, i.e. a last bit of 0.
    """
    code = ConvCode(k=40)
    messages = np.random.default_rng(5).integers(0, 2, size=(20, code.k), dtype=np.uint8)
    messages[:10, -1] = 0
    messages[10:, -1] = 1
    codewords = code.encode_batch(messages)
    last_symbol = code.n - code.rate_inverse

    for position in range(code.n):
        received = codewords.copy()
        received[:, position] ^= 1
        decoded = code.decode_batch(received)
        if position < last_symbol:
            assert np.array_equal(decoded, messages), position
        else:
            assert np.array_equal(decoded[:, :-1], messages[:, :-1])
            assert not decoded[:, -1].any()


def test_two_flips_far_apart_corrected(rng):
    code = ConvCode(k=64, termination=Termination.ZERO_TAIL)
    u = BitVec.from_bits(rng.integers(0, 2, size=code.k))
    y = encode(code, u).to_array()
    y[[10, 90]] ^= 1
    assert decode(code, BitVec.from_bits(y)) == u


def test_batch_shapes(rng):
    code = ConvCode(k=12)
    messages = rng.integers(0, 2, size=(5, 3, code.k), dtype=np.uint8)
    codewords = code.encode_batch(messages)
    assert codewords.shape == (5, 3, code.n)
    assert code.decode_batch(codewords).shape == (5, 3, code.k)


def test_length_mismatch():
    code = ConvCode(k=8)
    with pytest.raises(LengthMismatchError):
        encode(code, BitVec.zeros(9))
    with pytest.raises(LengthMismatchError):
        decode(code, BitVec.zeros(15))


def test_block_code_repetition():
    code = BlockCode.repetition(3)
    assert (code.k, code.n) == (1, 3)
    assert str(encode(code, BitVec.from_str("1"))) == "111"
    assert str(decode(code, BitVec.from_str("110"))) == "1"
    assert str(decode(code, BitVec.from_str("100"))) == "0"


def test_block_code_correctness_depends_on_noise_only(shortened_hamming):
    code = shortened_hamming
    messages = np.array(
        [[(m >> 2) & 1, (m >> 1) & 1, m & 1] for m in range(8)], dtype=np.uint8
    )
    codewords = code.encode_batch(messages)
    for e in range(1 << code.n):
        noise = np.array([(e >> (code.n - 1 - i)) & 1 for i in range(code.n)], dtype=np.uint8)
        correct = np.all(code.decode_batch(codewords ^ noise) == messages, axis=-1)
        assert correct.all() or not correct.any()


def test_crc_check_value():
    payload = np.unpackbits(np.frombuffer(b"123456789", dtype=np.uint8))
    value = int("".join(map(str, crc16(payload))), 2)
    assert value == 0x31C3


def test_crc_survives_xor(rng):
    frames = append_crc(rng.integers(0, 2, size=(2, 100, 54), dtype=np.uint8))
    assert crc_passes(frames).all()
    assert crc_passes(frames[0] ^ frames[1]).all()


def test_crc_catches_flips(rng):
    frames = append_crc(rng.integers(0, 2, size=(100, 54), dtype=np.uint8))
    frames[:, 7] ^= 1
    assert not crc_passes(frames).any()


def test_draw_messages_with_crc(rng):
    messages = draw_messages(rng, (50, 2), 70, DetectionMode.CRC16)
    assert messages.shape == (50, 2, 70)
    assert passes_batch(DetectionMode.CRC16, messages).all()
    with pytest.raises(InvalidArgumentError):
        draw_messages(rng, (1,), CRC_BITS, DetectionMode.CRC16)


def test_detect_error():
    u = BitVec.from_bits(append_crc(np.array([[1, 0, 1, 1] * 5], dtype=np.uint8))[0])
    flipped = u ^ BitVec.from_bits([1] + [0] * (len(u) - 1))

    assert detect_error(DetectionMode.CRC16, u)
    assert not detect_error(DetectionMode.CRC16, flipped)
    assert detect_error(DetectionMode.GENIE, u, u)
    assert not detect_error(DetectionMode.GENIE, flipped, u)
    with pytest.raises(InvalidArgumentError):
        detect_error(DetectionMode.GENIE, u)


def test_crc_detects_random_corruptions(rng):
    frames = append_crc(rng.integers(0, 2, size=(1000, 54), dtype=np.uint8))
    corrupted = frames.copy()
    weights = rng.integers(2, 9, size=len(frames))
    for frame, weight in zip(corrupted, weights):
        frame[rng.choice(frames.shape[1], size=weight, replace=False)] ^= 1

    missed = crc_passes(corrupted)
    # the generator has the factor x + 1, so every odd number of flips is caught
    assert not missed[weights % 2 == 1].any()
    assert missed.sum() <= 2


def test_crc_detects_short_bursts(rng):
    frames = append_crc(rng.integers(0, 2, size=(500, 54), dtype=np.uint8))
    for frame in frames:
        length = int(rng.integers(2, 17))
        start = int(rng.integers(0, frames.shape[1] - length + 1))
        burst = rng.integers(0, 2, size=length, dtype=np.uint8)
        burst[[0, -1]] = 1
        frame[start : start + length] ^= burst
    assert not crc_passes(frames).any()
