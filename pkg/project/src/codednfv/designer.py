"""
Design of NFV generator matrices.

Every server is modeled as an erasure: it is lost with probability
`e_d = q + (1 - q)·f(d)`, where `d` is the weight of its column and `f(d)` the decoder
error rate after XORing `d` received frames.
Heavy columns buy minimum distance at the price of noisier server inputs; ranking by the
exact erasure failure probability weighs both.
"""

import csv
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import partial
from itertools import combinations_with_replacement
from math import comb
from pathlib import Path
from typing import Any, Self

import numpy as np

from .channel import RngStream, ServerFailureModel, effective_p
from .convcode import LinearCode
from .errors import InvalidArgumentError, TooLargeError
from .estimators import frame_error_rate
from .gf2 import BitMatrix, min_distance, rank_of_ints
from .parallel import parallel_map
from .schemes import MAX_ENUMERATION_SERVERS, NfvScheme, mfr, recoverable_masks

log = logging.getLogger(__name__)

EVALUATION_CHUNK = 256


@dataclass(frozen=True)
class ErasureModel:
    q: float
    f_table: Mapping[int, float]

    def __post_init__(self):
        ServerFailureModel(self.q, 1)
        if not self.f_table:
            raise InvalidArgumentError("f_table is empty")
        values = [self.f_table[d] for d in sorted(self.f_table)]
        if any(not 0.0 <= f <= 1.0 for f in values):
            raise InvalidArgumentError("f values must be probabilities")
        if any(a > b for a, b in zip(values, values[1:])):
            raise InvalidArgumentError(f"f must be non-decreasing in d, got {dict(self.f_table)}")

    @classmethod
    def constant(cls, q: float, f: float, d_max: int) -> Self:
        return cls(q, {d: f for d in range(1, d_max + 1)})

    def erasure_probability(self, d: int) -> float:
        if d not in self.f_table:
            raise InvalidArgumentError(f"f_table has no entry for d={d}")
        return self.q + (1 - self.q) * self.f_table[d]


@dataclass(frozen=True)
class DesignReport:
    matrix: BitMatrix
    p_err: float
    min_dist: int
    max_col_weight: int
    mfr: int

    def to_json(self) -> dict[str, Any]:
        return {
            "matrix": self.matrix.to_flag(),
            "p_err": self.p_err,
            "min_dist": self.min_dist,
            "max_col_weight": self.max_col_weight,
            "mfr": self.mfr,
        }


def measure_f(
    code: LinearCode,
    p: float,
    d_max: int,
    trials: int,
    seed: int,
    workers: None | int = None,
) -> dict[int, float]:
    """
    Decoder frame-error rate after XORing `d = 1..d_max` received frames.

    The XOR of `d` frames is a codeword seen through a BSC with crossover
    `effective_p(p, d)`.
    All `d` share the same random draws, and a running maximum removes what Monte Carlo
    noise is left, so the table is non-decreasing.
    """
    if d_max < 1:
        raise InvalidArgumentError(f"d_max must be at least 1, got {d_max}")
    measured = [
        frame_error_rate(code, effective_p(p, d), trials, seed, workers).fer
        for d in range(1, d_max + 1)
    ]
    table = np.maximum.accumulate(measured)
    log.info("measured f(d) at p=%g: %s", p, [f"{f:.3g}" for f in table])
    return {d: float(f) for d, f in enumerate(table, start=1)}


def erasure_perr(g: BitMatrix, model: ErasureModel) -> float:
    """Exact probability that the servers surviving erasure cannot recover."""
    if g.cols > MAX_ENUMERATION_SERVERS:
        raise TooLargeError("server set", g.cols, MAX_ENUMERATION_SERVERS)
    erasures = [model.erasure_probability(d) for d in g.column_weights]
    masks = np.arange(1 << g.cols, dtype=np.int64)
    probabilities = np.ones(masks.size)
    for j, e in enumerate(erasures):
        survives = (masks >> j) & 1
        probabilities *= np.where(survives == 1, 1 - e, e)
    return float(probabilities[~recoverable_masks(g)].sum())


def _evaluate(
    n_frames: int, model: ErasureModel, chunk: Sequence[tuple[int, ...]]
) -> list[DesignReport]:
    reports = []
    for columns in chunk:
        if rank_of_ints(columns) != n_frames:
            continue
        matrix = BitMatrix.from_column_ints(columns, n_frames)
        reports.append(
            DesignReport(
                matrix=matrix,
                p_err=erasure_perr(matrix, model),
                min_dist=min_distance(matrix),
                max_col_weight=max(matrix.column_weights),
                mfr=mfr(NfvScheme(matrix)),
            )
        )
    return reports


def _candidates(
    n_frames: int, n_servers: int, budget: int, seed: int
) -> list[tuple[int, ...]]:
    """
    Column multisets to evaluate, each as a sorted tuple of column integers.

    Column order only relabels servers, so sorted tuples cover every design once.
    """
    nonzero = (1 << n_frames) - 1
    space = comb(nonzero + n_servers - 1, n_servers)
    if space <= budget:
        log.info("searching all %d designs for K=%d, N=%d", space, n_frames, n_servers)
        return list(combinations_with_replacement(range(1, nonzero + 1), n_servers))

    log.info(
        "design space of %d exceeds budget %d, sampling at random", space, budget
    )
    generator = RngStream(seed, (0, "design")).generator()
    draws = generator.integers(1, nonzero + 1, size=(budget, n_servers))
    return sorted({tuple(sorted(int(c) for c in row)) for row in draws})


def search_gnfv(
    n_frames: int,
    n_servers: int,
    model: ErasureModel,
    budget: int,
    seed: int = 0,
    workers: None | int = None,
) -> list[DesignReport]:
    """
    Rank all (or a random sample of) K×N generator matrices of rank K.

    Ordered by erasure failure probability, then by maximum column weight, then by the
    sorted columns.
    """
    if budget < 1:
        raise InvalidArgumentError(f"budget must be positive, got {budget}")
    if not 1 <= n_frames <= n_servers:
        raise InvalidArgumentError(
            f"need 1 <= K <= N, got K={n_frames}, N={n_servers}"
        )
    candidates = _candidates(n_frames, n_servers, budget, seed)
    chunks = [
        candidates[i : i + EVALUATION_CHUNK]
        for i in range(0, len(candidates), EVALUATION_CHUNK)
    ]
    evaluated = parallel_map(partial(_evaluate, n_frames, model), chunks, workers)
    reports = [report for chunk in evaluated for report in chunk]
    reports.sort(key=lambda r: (r.p_err, r.max_col_weight, r.matrix.column_ints))
    return reports


def write_f_table(path: Path, table: Mapping[int, float]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["d", "f"])
        for d in sorted(table):
            writer.writerow([d, repr(float(table[d]))])


def read_f_table(path: Path) -> dict[int, float]:
    with open(path, newline="") as f:
        return {int(row["d"]): float(row["f"]) for row in csv.DictReader(f)}
