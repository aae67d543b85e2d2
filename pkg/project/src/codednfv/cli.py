"""
Command line entry point: parameter sweeps, generator-matrix design and a few debugging
helpers.

    codednfv sweep --config project/configs/three_servers.toml --output curves.csv
    codednfv design --n-frames 2 --n-servers 3 --p 0.05 --q 0.01
    codednfv mfr coded
"""

import argparse
import csv
import json
import logging
import sys
from collections.abc import Iterator, Sequence
from concurrent.futures import BrokenExecutor
from contextlib import contextmanager, suppress
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

from .config import OutputFormat, SweepConfig, build_config, read_config_file
from .convcode import ConvCode, DetectionMode, Termination, decode, encode
from .designer import (
    DesignReport,
    ErasureModel,
    measure_f,
    read_f_table,
    search_gnfv,
    write_f_table,
)
from .errors import InvalidArgumentError, NfvError
from .estimators import (
    ErrEstimate,
    Estimator,
    JointDecodePmf,
    estimate_joint_pmf,
    exact_enum_perr,
    frame_error_rate,
    full_mc_perr,
    paper_formula_perr,
    paper_scheme_kind,
)
from .gf2 import BitVec
from .schemes import NfvScheme, mfr, mfr_witness, parse_scheme

log = logging.getLogger(__name__)

COLUMNS = (
    "scheme",
    "p",
    "q",
    "estimator",
    "trials",
    "p_err",
    "ci_halfwidth",
    "detection_mode",
    "seed",
)
PARTIAL_MARKER = "# partial"


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    p: float
    q: float
    estimate: ErrEstimate
    detection_mode: DetectionMode
    seed: int

    def values(self) -> tuple[Any, ...]:
        # repr keeps floats exact, so reruns produce identical bytes
        return (
            self.scheme,
            repr(self.p),
            repr(self.q),
            self.estimate.estimator.value,
            self.estimate.trials,
            repr(self.estimate.p_err),
            repr(self.estimate.ci_halfwidth),
            self.detection_mode.value,
            self.seed,
        )

    def record(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme,
            "p": self.p,
            "q": self.q,
            "estimator": self.estimate.estimator.value,
            "trials": self.estimate.trials,
            "p_err": self.estimate.p_err,
            "ci_halfwidth": self.estimate.ci_halfwidth,
            "detection_mode": self.detection_mode.value,
            "seed": self.seed,
        }


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    complete: bool = True


class _RowWriter:
    def __init__(self, stream: TextIO, output_format: OutputFormat):
        self.stream = stream
        self.format = output_format
        if output_format is OutputFormat.CSV:
            self.csv = csv.writer(stream, lineterminator="\n")
            self.csv.writerow(COLUMNS)

    def write(self, row: SweepRow):
        if self.format is OutputFormat.CSV:
            self.csv.writerow(row.values())
        else:
            self.stream.write(json.dumps(row.record()) + "\n")
        self.stream.flush()

    def mark_partial(self):
        self.stream.write(PARTIAL_MARKER + "\n")
        self.stream.flush()


@contextmanager
def _open_output(path: None | Path) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", newline="") as f:
        yield f


def _sweep_point(
    config: SweepConfig,
    code: ConvCode,
    scheme: NfvScheme,
    p: float,
    q: float,
    estimator: Estimator,
    pmf: None | JointDecodePmf,
) -> None | ErrEstimate:
    match estimator:
        case Estimator.EXACT_ENUM:
            assert pmf is not None
            return exact_enum_perr(pmf, q, scheme)
        case Estimator.PAPER_FORMULA:
            kind = paper_scheme_kind(scheme)
            if kind is None:
                return None
            assert pmf is not None
            return paper_formula_perr(pmf, q, kind)
        case Estimator.FULL_MC:
            return full_mc_perr(
                code, scheme, p, q, config.trials, config.seed, config.detection, config.workers
            )


def run_sweep(config: SweepConfig) -> SweepResult:
    """
    Evaluate every selected estimator on the grid `schemes × p × q`.

    The joint pmf is estimated once per `(scheme, p)` and reused along the `q` grid.
    Rows are written as they complete; if the sweep breaks off, the rows so far are kept
    and a `# partial` line is appended.
    """
    result = SweepResult()
    code = config.code()
    schemes = config.scheme_list()
    q_grid = config.q_grid()
    analytic = {Estimator.EXACT_ENUM, Estimator.PAPER_FORMULA} & set(config.estimators)

    with _open_output(config.output) as stream:
        writer = _RowWriter(stream, config.format)
        try:
            for scheme in schemes:
                if Estimator.PAPER_FORMULA in config.estimators and paper_scheme_kind(scheme) is None:
                    log.warning("no closed form for scheme %s, writing no closed-form rows", scheme)
                for p in config.p:
                    log.info("sweeping %s at p=%g over %d values of q", scheme, p, len(q_grid))
                    pmf = None
                    if analytic:
                        pmf = estimate_joint_pmf(code, scheme, p, config.trials, config.seed, config.workers)
                    for q in q_grid:
                        for estimator in config.estimators:
                            estimate = _sweep_point(config, code, scheme, p, q, estimator, pmf)
                            if estimate is None:
                                continue
                            detection = (
                                config.detection
                                if estimator is Estimator.FULL_MC
                                else DetectionMode.GENIE
                            )
                            row = SweepRow(str(scheme), p, q, estimate, detection, config.seed)
                            writer.write(row)
                            result.rows.append(row)
                            log.debug("%s", row)
        except (NfvError, BrokenExecutor, OSError, KeyboardInterrupt) as e:
            log.error("sweep stopped after %d rows: %s", len(result.rows), str(e) or type(e).__name__)
            # the output itself may be what failed
            with suppress(OSError):
                writer.mark_partial()
            result.complete = False
    return result


def run_design(
    n_frames: int,
    n_servers: int,
    p: float,
    q: float,
    trials: int,
    budget: int,
    seed: int,
    code: None | ConvCode = None,
    f_table: None | dict[int, float] = None,
    output: None | Path = None,
    workers: None | int = None,
    save_f_table: None | Path = None,
) -> list[DesignReport]:
    """
    Rank generator matrices under the erasure model and write them as JSON lines.

    `f(d)` is measured with `code` unless a table is given.
    """
    if budget < 1:
        raise InvalidArgumentError(f"budget must be positive, got {budget}")
    if f_table is None:
        f_table = measure_f(code or ConvCode(), p, n_frames, trials, seed, workers)
        if save_f_table is not None:
            write_f_table(save_f_table, f_table)
    model = ErasureModel(q, f_table)
    reports = search_gnfv(n_frames, n_servers, model, budget, seed, workers)
    with _open_output(output) as stream:
        for report in reports:
            stream.write(json.dumps(report.to_json()) + "\n")
    if reports:
        log.info("best design %s with p_err=%.3g", reports[0].matrix.to_flag(), reports[0].p_err)
    return reports


def run_mfr(spec: str, n_servers: int = 3, n_frames: int = 2) -> tuple[int, tuple[int, ...]]:
    """MFR of a scheme and a smallest removal set, servers numbered from 1."""
    scheme = parse_scheme(spec, n_servers, n_frames)
    witness = tuple(j + 1 for j in mfr_witness(scheme))
    return mfr(scheme), witness


def _code_from_args(args: argparse.Namespace) -> ConvCode:
    defaults = SweepConfig()
    return ConvCode.from_octal(
        args.taps or defaults.taps,
        constraint_length=args.constraint_length or defaults.constraint_length,
        k=args.k or defaults.k,
        termination=args.termination or defaults.termination,
    )


def _sweep(args: argparse.Namespace) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {name: getattr(args, name) for name in SweepConfig.__dataclass_fields__}
    config = build_config(file_values, overrides)
    return 0 if run_sweep(config).complete else 1


def _design(args: argparse.Namespace) -> int:
    run_design(
        args.n_frames,
        args.n_servers,
        args.p,
        args.q,
        args.trials,
        args.budget,
        args.seed,
        code=_code_from_args(args),
        f_table=read_f_table(args.f_table) if args.f_table else None,
        output=args.output,
        workers=args.workers,
        save_f_table=args.save_f_table,
    )
    return 0


def _mfr(args: argparse.Namespace) -> int:
    count, witness = run_mfr(args.scheme, args.n_servers, args.n_frames)
    print(f"mfr: {count}")
    print("witness: {" + ", ".join(map(str, witness)) + "}")
    return 0


def _encode(args: argparse.Namespace) -> int:
    print(encode(_code_from_args(args), BitVec.from_str(args.bits)))
    return 0


def _decode(args: argparse.Namespace) -> int:
    print(decode(_code_from_args(args), BitVec.from_str(args.bits)))
    return 0


def _fer(args: argparse.Namespace) -> int:
    estimate = frame_error_rate(_code_from_args(args), args.p, args.trials, args.seed, args.workers)
    print(f"fer: {estimate.fer!r} ± {estimate.ci_halfwidth!r}")
    return 0


def _emulate(args: argparse.Namespace) -> int:
    from .cloud import run_emulation

    scheme = parse_scheme(args.scheme, args.n_servers, args.n_frames)
    outcome = run_emulation(
        _code_from_args(args),
        scheme,
        args.p,
        args.q,
        args.seed,
        trust=args.detection,
        deadline=args.deadline,
        trace_path=args.trace,
    )
    up = [j + 1 for j, available in enumerate(outcome.available) if available]
    print(f"available servers: {up}")
    print(f"status: {outcome.result.status}")
    print(f"messages correct: {outcome.correct}")
    return 0


def _code_arguments() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("channel code")
    group.add_argument("--taps", help='octal generator taps, e.g. "171,133"')
    group.add_argument("--constraint-length", type=int)
    group.add_argument("--k", type=int, help="message bits per frame")
    group.add_argument("--termination", choices=[t.value for t in Termination])
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codednfv", description=__doc__.splitlines()[1])
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
    )
    code = _code_arguments()
    commands = parser.add_subparsers(dest="command", required=True)

    sweep = commands.add_parser("sweep", parents=[code], help="error probability over (scheme, p, q)")
    sweep.set_defaults(run=_sweep)
    sweep.add_argument("--config", type=Path, help="TOML file, overridden by the flags below")
    sweep.add_argument("--schemes", nargs="+")
    sweep.add_argument("--n-servers", type=int)
    sweep.add_argument("--n-frames", type=int)
    sweep.add_argument("--p", nargs="+", type=float)
    sweep.add_argument("--q", nargs="+", type=float)
    sweep.add_argument("--q-log", nargs=3, type=float, metavar=("START", "STOP", "COUNT"))
    sweep.add_argument("--trials", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--detection", choices=[d.value for d in DetectionMode])
    sweep.add_argument("--estimators", nargs="+", choices=[e.value for e in Estimator])
    sweep.add_argument("--output", type=Path)
    sweep.add_argument("--format", choices=[f.value for f in OutputFormat])
    sweep.add_argument("--workers", type=int)

    design = commands.add_parser("design", parents=[code], help="rank generator matrices")
    design.set_defaults(run=_design)
    design.add_argument("--n-frames", type=int, default=2)
    design.add_argument("--n-servers", type=int, default=3)
    design.add_argument("--p", type=float, default=0.05)
    design.add_argument("--q", type=float, default=1e-2)
    design.add_argument("--trials", type=int, default=20_000)
    design.add_argument("--budget", type=int, default=100_000)
    design.add_argument("--seed", type=int, default=0)
    design.add_argument("--f-table", type=Path, help="CSV with columns d,f instead of measuring")
    design.add_argument("--save-f-table", type=Path)
    design.add_argument("--output", type=Path)
    design.add_argument("--workers", type=int)

    mfr_command = commands.add_parser("mfr", help="minimum failure removal of a scheme")
    mfr_command.set_defaults(run=_mfr)
    mfr_command.add_argument("scheme", help="diversity, coded or matrix:<rows>")
    mfr_command.add_argument("--n-servers", type=int, default=3)
    mfr_command.add_argument("--n-frames", type=int, default=2)

    for name, run, what in (("encode", _encode, "message"), ("decode", _decode, "received word")):
        command = commands.add_parser(name, parents=[code], help=f"{name} a {what}")
        command.set_defaults(run=run)
        command.add_argument("--bits", required=True, help=f"{what} as a 0/1 string")

    fer = commands.add_parser("fer", parents=[code], help="decoder frame-error rate on one link")
    fer.set_defaults(run=_fer)
    fer.add_argument("--p", type=float, default=0.05)
    fer.add_argument("--trials", type=int, default=100_000)
    fer.add_argument("--seed", type=int, default=0)
    fer.add_argument("--workers", type=int)

    emulate = commands.add_parser("emulate", parents=[code], help="run one trial through agents")
    emulate.set_defaults(run=_emulate)
    emulate.add_argument("--scheme", default="coded")
    emulate.add_argument("--n-servers", type=int, default=3)
    emulate.add_argument("--n-frames", type=int, default=2)
    emulate.add_argument("--p", type=float, default=0.05)
    emulate.add_argument("--q", type=float, default=0.1)
    emulate.add_argument("--seed", type=int, default=0)
    emulate.add_argument(
        "--detection", type=DetectionMode, default=DetectionMode.GENIE, choices=list(DetectionMode)
    )
    emulate.add_argument("--deadline", type=float, default=1.0, help="seconds to wait for answers")
    emulate.add_argument("--trace", type=Path, help="write the message trace as TOML")
    return parser


def main(argv: None | Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(encoding="utf-8", level=args.log_level)
    try:
        return args.run(args)
    except NfvError as e:
        log.error("%s", e)
        return 2
