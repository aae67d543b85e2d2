"""
End-to-end error probability of an NFV scheme.

The expensive part, decoding, is simulated once per `(scheme, p)` to obtain the joint
distribution of which servers decode correctly (`JointDecodePmf`).
Server failures then enter analytically: `exact_enum_perr` enumerates availability
patterns exactly, `paper_formula_perr` applies the closed forms for N=3, K=2 as
published.
`full_mc_perr` simulates everything, including failures and recovery, and serves as a
cross-check; `oracle_perr_tiny` enumerates all noise patterns of a tiny block code.
"""

import logging
import math
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from functools import partial
from typing import Self

import numpy as np
from scipy.stats import norm

from .channel import BscChannel, RngStream, ServerFailureModel
from .convcode import BlockCode, DetectionMode, LinearCode, draw_messages, passes_batch
from .errors import InvalidArgumentError, LengthMismatchError, TooLargeError
from .gf2 import BitVec, rank_of_ints
from .parallel import parallel_map, trial_blocks
from .schemes import (
    MAX_ENUMERATION_SERVERS,
    NfvScheme,
    RecoveryStatus,
    ServerOutcome,
    build_diversity,
    combine,
    mfr,
    recover,
    recoverable_masks,
)

log = logging.getLogger(__name__)

CONFIDENCE = 0.95
Z = float(norm.ppf(0.5 + CONFIDENCE / 2))
WILSON_BELOW = 10
"Failure counts below this use the Wilson interval instead of the normal one."

ORACLE_MAX_NOISE_BITS = 28
ORACLE_CHUNK = 1 << 18


class Estimator(StrEnum):
    EXACT_ENUM = "exact"
    PAPER_FORMULA = "paper"
    FULL_MC = "mc"


class PaperScheme(StrEnum):
    DIVERSITY_3X2 = "diversity3x2"
    CODED_3X2 = "coded3x2"


@dataclass(frozen=True)
class JointDecodePmf:
    """
    Empirical distribution of decode-correctness masks.

    `counts[mask]` is the number of trials in which exactly the servers in `mask`
    decoded their input correctly.
    """

    n_servers: int
    counts: Mapping[int, int]
    trials: int

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.trials:
            raise InvalidArgumentError(f"counts sum to {total}, expected {self.trials}")
        if any(not 0 <= mask < 1 << self.n_servers for mask in self.counts):
            raise InvalidArgumentError(f"mask out of range for {self.n_servers} servers")

    @classmethod
    def from_masks(cls, n_servers: int, masks: np.ndarray) -> Self:
        values, counts = np.unique(masks, return_counts=True)
        return cls(
            n_servers=n_servers,
            counts={int(v): int(c) for v, c in zip(values, counts)},
            trials=int(masks.size),
        )

    @classmethod
    def perfect(cls, n_servers: int, trials: int = 1) -> Self:
        """Every server always decodes correctly."""
        return cls(n_servers, {(1 << n_servers) - 1: trials}, trials)

    def probability(self, mask: int) -> float:
        return self.counts.get(mask, 0) / self.trials

    def marginal(self, server: int) -> float:
        """Probability that `server` decodes correctly."""
        hits = sum(c for mask, c in self.counts.items() if mask >> server & 1)
        return hits / self.trials

    def __add__(self, other: "JointDecodePmf") -> "JointDecodePmf":
        if self.n_servers != other.n_servers:
            raise LengthMismatchError(self.n_servers, other.n_servers)
        merged = Counter(self.counts)
        merged.update(other.counts)
        return JointDecodePmf(self.n_servers, dict(merged), self.trials + other.trials)


@dataclass(frozen=True)
class ErrEstimate:
    p_err: float
    ci_halfwidth: float
    trials: int
    estimator: Estimator
    undetected: int = field(default=0, compare=False)
    "Recoveries that returned wrong messages without noticing (CRC trust only)."
    inconsistent: int = field(default=0, compare=False)
    "Recoveries stopped by contradicting server outputs (CRC trust only)."


@dataclass(frozen=True)
class FerEstimate:
    """Frame-error rate of one decoder on one link; no NFV mapping involved."""

    p: float
    fer: float
    ci_halfwidth: float
    trials: int


def wilson_halfwidth(failures: int, trials: int) -> float:
    p = failures / trials
    denominator = 1 + Z**2 / trials
    spread = Z * math.sqrt(p * (1 - p) / trials + Z**2 / (4 * trials**2))
    return spread / denominator


def binomial_halfwidth(failures: int, trials: int) -> float:
    if failures < WILSON_BELOW:
        return wilson_halfwidth(failures, trials)
    p = failures / trials
    return Z * math.sqrt(p * (1 - p) / trials)


def _popcount(mask: int) -> int:
    return mask.bit_count()


def _weighted_estimate(
    pmf: JointDecodePmf, success_weight: Mapping[int, float], estimator: Estimator
) -> ErrEstimate:
    """
    `P_err = 1 - E[w(C)]` over the correctness mask `C`.

    The half-width comes from the spread of `w(C)` across trials, which is the
    sampling error of the pmf the estimate is built on.
    """
    mean = sum(pmf.probability(mask) * w for mask, w in success_weight.items())
    second = sum(pmf.probability(mask) * w * w for mask, w in success_weight.items())
    variance = max(second - mean * mean, 0.0) / pmf.trials
    return ErrEstimate(
        p_err=min(max(1.0 - mean, 0.0), 1.0),
        ci_halfwidth=Z * math.sqrt(variance),
        trials=pmf.trials,
        estimator=estimator,
    )


def _simulate_block(
    code: LinearCode,
    scheme: NfvScheme,
    p: float,
    seed: int,
    block: tuple[int, int],
    detection: DetectionMode = DetectionMode.GENIE,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Run one block of trials through encoding, the BSC, the NFV mapping and decoding.

    Returns the messages `(T, K, k)`, the server outputs `(T, N, k)` and the targets the
    servers should have decoded `(T, N, k)`.
    """
    index, size = block
    messages = draw_messages(
        RngStream(seed, (index, "messages")).generator(),
        (size, scheme.n_frames),
        code.k,
        detection,
    )
    codewords = code.encode_batch(messages)
    noise = BscChannel(p).noise(RngStream(seed, (index, "noise")).generator(), codewords.shape)
    received = codewords ^ noise
    decoded = code.decode_batch(combine(scheme.g_nfv, received))
    targets = combine(scheme.g_nfv, messages)
    return messages, decoded, targets


def _to_masks(flags: np.ndarray) -> np.ndarray:
    return flags.astype(np.int64) @ (1 << np.arange(flags.shape[-1], dtype=np.int64))


def _pmf_block(
    code: LinearCode, scheme: NfvScheme, p: float, seed: int, block: tuple[int, int]
) -> Counter[int]:
    _, decoded, targets = _simulate_block(code, scheme, p, seed, block)
    masks = _to_masks(np.all(decoded == targets, axis=-1))
    values, counts = np.unique(masks, return_counts=True)
    return Counter({int(v): int(c) for v, c in zip(values, counts)})


def estimate_joint_pmf(
    code: LinearCode,
    scheme: NfvScheme,
    p: float,
    trials: int,
    seed: int,
    workers: None | int = None,
) -> JointDecodePmf:
    """
    Monte Carlo estimate of the joint decode-correctness distribution.

    Masks are recorded jointly per trial: in the coded scheme the parity server shares
    noise with the systematic ones, so their outcomes are dependent.
    """
    if trials < 1:
        raise InvalidArgumentError(f"trials must be at least 1, got {trials}")
    BscChannel(p)
    partials = parallel_map(
        partial(_pmf_block, code, scheme, p, seed), trial_blocks(trials), workers
    )
    merged: Counter[int] = Counter()
    for counts in partials:
        merged.update(counts)
    log.debug("joint pmf for %s at p=%g over %d trials: %s", scheme, p, trials, dict(merged))
    return JointDecodePmf(scheme.n_servers, dict(merged), trials)


def paper_formula_perr(
    pmf: JointDecodePmf, q: float, scheme_kind: PaperScheme
) -> ErrEstimate:
    """
    Closed-form error probability for N=3 servers and K=2 frames as published.

    Diversity: `1 - Σ Pr(S)(1-q)^|S|` over sets with |S| ≥ 2 containing server 1.
    Coded: the same sum over all sets with |S| ≥ 2.
    The coded formula is printed without the leading `1 -`; the complement is used here
    since the sum itself is a success probability.
    Only the correct servers' availability is weighted, so success through a subset of
    them while another one is down is not counted; the result is therefore never below
    `exact_enum_perr`.
    """
    if pmf.n_servers != 3:
        raise InvalidArgumentError(
            f"the closed forms only cover N=3, K=2, got {pmf.n_servers} servers"
        )
    ServerFailureModel(q, pmf.n_servers)
    weights: dict[int, float] = {}
    for mask in pmf.counts:
        size = _popcount(mask)
        counted = size >= 2
        if scheme_kind is PaperScheme.DIVERSITY_3X2:
            counted = counted and bool(mask & 1)
        weights[mask] = (1 - q) ** size if counted else 0.0
    return _weighted_estimate(pmf, weights, Estimator.PAPER_FORMULA)


def paper_scheme_kind(scheme: NfvScheme) -> None | PaperScheme:
    """
    Which closed form applies to `scheme`, if any.

    The diversity form assumes server 1 is the only one decoding frame 1, the coded
    form that any two servers suffice.
    """
    if (scheme.n_frames, scheme.n_servers) != (2, 3):
        return None
    if scheme.g_nfv == build_diversity(3, 2).g_nfv:
        return PaperScheme.DIVERSITY_3X2
    if mfr(scheme) == 2:
        return PaperScheme.CODED_3X2
    return None


def availability_success(mask: int, q: float, table: np.ndarray, all_masks: np.ndarray) -> float:
    """
    Probability that the servers of `mask` still allow recovery after each of them
    failed independently with probability `q`.
    """
    survivors = all_masks[(all_masks & ~mask) == 0]
    up = np.array([_popcount(int(s)) for s in survivors])
    down = _popcount(mask) - up
    probabilities = np.power(1 - q, up) * np.power(q, down)
    return float(np.sum(probabilities[table[survivors]]))


def exact_enum_perr(pmf: JointDecodePmf, q: float, scheme: NfvScheme) -> ErrEstimate:
    """
    Exact error probability given the decode-correctness distribution.

    For every correctness mask `C` all availability patterns are enumerated; a trial
    succeeds when the available correct servers span all K messages.
    """
    if scheme.n_servers > MAX_ENUMERATION_SERVERS:
        raise TooLargeError("server set", scheme.n_servers, MAX_ENUMERATION_SERVERS)
    if pmf.n_servers != scheme.n_servers:
        raise LengthMismatchError(pmf.n_servers, scheme.n_servers)
    ServerFailureModel(q, scheme.n_servers)
    table = recoverable_masks(scheme.g_nfv)
    all_masks = np.arange(1 << scheme.n_servers, dtype=np.int64)
    weights = {mask: availability_success(mask, q, table, all_masks) for mask in pmf.counts}
    return _weighted_estimate(pmf, weights, Estimator.EXACT_ENUM)


def _full_mc_block(
    code: LinearCode,
    scheme: NfvScheme,
    p: float,
    q: float,
    seed: int,
    trust: DetectionMode,
    block: tuple[int, int],
) -> tuple[int, int, int]:
    messages, decoded, targets = _simulate_block(code, scheme, p, seed, block, trust)
    index, size = block
    available = ServerFailureModel(q, scheme.n_servers).availability(
        RngStream(seed, (index, "availability")).generator(), size
    )
    correct = np.all(decoded == targets, axis=-1)
    verdict = passes_batch(trust, decoded, targets)
    trusted = available & verdict
    success = recoverable_masks(scheme.g_nfv)[_to_masks(trusted)]

    undetected = inconsistent = 0
    suspicious = np.flatnonzero(success & np.any(trusted & ~correct, axis=-1))
    for t in suspicious:
        outcomes = [
            ServerOutcome(
                available=bool(available[t, j]),
                decoded=BitVec.from_bits(decoded[t, j]) if available[t, j] else None,
                correct=bool(verdict[t, j]),
            )
            for j in range(scheme.n_servers)
        ]
        result = recover(scheme, outcomes, trust)
        truth = tuple(BitVec.from_bits(m) for m in messages[t])
        if result.status is RecoveryStatus.INCONSISTENT:
            inconsistent += 1
            success[t] = False
        elif result.status is RecoveryStatus.RECOVERED and result.messages != truth:
            undetected += 1
            success[t] = False
    return size - int(success.sum()), undetected, inconsistent


def full_mc_perr(
    code: LinearCode,
    scheme: NfvScheme,
    p: float,
    q: float,
    trials: int,
    seed: int,
    trust: DetectionMode = DetectionMode.GENIE,
    workers: None | int = None,
) -> ErrEstimate:
    """
    Simulate the whole pipeline including server failures and controller recovery.

    In CRC mode the servers' own checks decide which outputs the controller trusts;
    wrong outputs that slip through end as inconsistent or silently wrong recoveries,
    both counted as failures and reported separately.
    """
    if trials < 1:
        raise InvalidArgumentError(f"trials must be at least 1, got {trials}")
    BscChannel(p)
    ServerFailureModel(q, scheme.n_servers)
    partials = parallel_map(
        partial(_full_mc_block, code, scheme, p, q, seed, trust),
        trial_blocks(trials),
        workers,
    )
    failures = sum(f for f, _, _ in partials)
    undetected = sum(u for _, u, _ in partials)
    inconsistent = sum(i for _, _, i in partials)
    return ErrEstimate(
        p_err=failures / trials,
        ci_halfwidth=binomial_halfwidth(failures, trials),
        trials=trials,
        estimator=Estimator.FULL_MC,
        undetected=undetected,
        inconsistent=inconsistent,
    )


def _fer_block(code: LinearCode, p: float, seed: int, block: tuple[int, int]) -> int:
    index, size = block
    messages = draw_messages(
        RngStream(seed, (index, "fer-messages")).generator(), (size,), code.k
    )
    codewords = code.encode_batch(messages)
    noise = BscChannel(p).noise(
        RngStream(seed, (index, "fer-noise")).generator(), codewords.shape
    )
    decoded = code.decode_batch(codewords ^ noise)
    return int(np.any(decoded != messages, axis=-1).sum())


def frame_error_rate(
    code: LinearCode, p: float, trials: int, seed: int, workers: None | int = None
) -> FerEstimate:
    """
    Decoder frame-error rate on a single BSC(p) link, without any NFV mapping.

    Calls with different `p` but the same seed reuse the same uniforms, so the noise at
    a larger `p` contains the noise at a smaller one.
    """
    if trials < 1:
        raise InvalidArgumentError(f"trials must be at least 1, got {trials}")
    BscChannel(p)
    failures = sum(
        parallel_map(partial(_fer_block, code, p, seed), trial_blocks(trials), workers)
    )
    return FerEstimate(
        p=p,
        fer=failures / trials,
        ci_halfwidth=binomial_halfwidth(failures, trials),
        trials=trials,
    )


def _bit_weights(bits: int) -> np.ndarray:
    values = np.arange(1 << bits, dtype=np.int64)
    weights = np.zeros(values.size, dtype=np.int64)
    for b in range(bits):
        weights += (values >> b) & 1
    return weights


def oracle_perr_tiny(code: BlockCode, scheme: NfvScheme, p: float, q: float) -> float:
    """
    Exact error probability for a tiny block code by enumerating every noise pattern.

    The decoder's tie-breaking makes correctness a function of the noise alone, so all
    messages can be taken as zero: server `j` is correct iff its combined noise
    decodes to the zero message.
    Availability patterns are enumerated for every noise pattern as well.
    """
    noise_bits = scheme.n_frames * code.n
    if noise_bits > ORACLE_MAX_NOISE_BITS:
        raise TooLargeError("noise pattern", noise_bits, ORACLE_MAX_NOISE_BITS)
    if scheme.n_servers > MAX_ENUMERATION_SERVERS:
        raise TooLargeError("server set", scheme.n_servers, MAX_ENUMERATION_SERVERS)
    BscChannel(p)
    ServerFailureModel(q, scheme.n_servers)

    n, n_frames, n_servers = code.n, scheme.n_frames, scheme.n_servers
    patterns = np.arange(1 << n, dtype=np.int64)
    pattern_bits = ((patterns[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
    decodes_to_zero = ~np.any(code.decode_batch(pattern_bits), axis=-1)
    weights = _bit_weights(n)

    # probability that the available servers among the correct ones can recover
    columns = scheme.g_nfv.column_ints
    success = np.zeros(1 << n_servers)
    for correct in range(1 << n_servers):
        for available in range(1 << n_servers):
            up = available.bit_count()
            usable = (columns[j] for j in range(n_servers) if (correct & available) >> j & 1)
            if rank_of_ints(usable) == n_frames:
                success[correct] += (1 - q) ** up * q ** (n_servers - up)

    frame_mask = (1 << n) - 1
    total_success = 0.0
    for start in range(0, 1 << noise_bits, ORACLE_CHUNK):
        tuples = np.arange(start, min(start + ORACLE_CHUNK, 1 << noise_bits), dtype=np.int64)
        frame_noise = [(tuples >> (n * i)) & frame_mask for i in range(n_frames)]
        weight = sum(weights[z] for z in frame_noise)
        probability = np.power(p, weight) * np.power(1 - p, noise_bits - weight)
        correct = np.zeros(tuples.size, dtype=np.int64)
        for j in range(n_servers):
            server_noise = np.zeros(tuples.size, dtype=np.int64)
            for i in range(n_frames):
                if scheme.g_nfv.entries[i, j]:
                    server_noise ^= frame_noise[i]
            correct |= decodes_to_zero[server_noise].astype(np.int64) << j
        total_success += float(np.sum(probability * success[correct]))
    return min(max(1.0 - total_success, 0.0), 1.0)
