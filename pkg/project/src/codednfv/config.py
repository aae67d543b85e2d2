"""
Sweep configuration.

A configuration file is flat TOML, e.g.

    taps = "171,133"
    schemes = ["diversity", "coded"]
    p = [0.05]
    q_log = [1e-4, 1e-1, 10]
    trials = 100000

Every key can be overridden on the command line by the flag of the same name
(`--q-log 1e-4 1e-1 10`); command line beats file beats default.
"""

import re
import tomllib
from collections.abc import Callable, Mapping
from dataclasses import dataclass, fields, replace
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np

from .convcode import ConvCode, DetectionMode, Termination
from .errors import ConfigError, NfvError
from .estimators import Estimator
from .schemes import NfvScheme, parse_scheme


class OutputFormat(StrEnum):
    CSV = "csv"
    JSONL = "jsonl"


@dataclass(frozen=True)
class SweepConfig:
    taps: str = "171,133"
    constraint_length: int = 7
    k: int = 70
    termination: Termination = Termination.UNTERMINATED
    schemes: tuple[str, ...] = ("diversity", "coded")
    n_servers: int = 3
    n_frames: int = 2
    p: tuple[float, ...] = (0.05,)
    q: tuple[float, ...] = ()
    q_log: None | tuple[float, float, int] = None
    trials: int = 100_000
    seed: int = 0
    detection: DetectionMode = DetectionMode.GENIE
    estimators: tuple[Estimator, ...] = (Estimator.EXACT_ENUM, Estimator.PAPER_FORMULA)
    output: None | Path = None
    "Standard output when unset."
    format: OutputFormat = OutputFormat.CSV
    workers: None | int = None
    "`NFV_WORKERS` or 1 when unset."

    def code(self) -> ConvCode:
        return ConvCode.from_octal(
            self.taps,
            constraint_length=self.constraint_length,
            k=self.k,
            termination=self.termination,
        )

    def scheme_list(self) -> list[NfvScheme]:
        return [parse_scheme(s, self.n_servers, self.n_frames) for s in self.schemes]

    def q_grid(self) -> list[float]:
        """Explicit `q` values merged with the log-spaced grid, ascending."""
        grid = list(self.q)
        if self.q_log is not None:
            start, stop, count = self.q_log
            grid += [float(v) for v in np.geomspace(start, stop, int(count))]
        return sorted(set(grid))


def _probabilities(name: str, value: Any) -> tuple[float, ...]:
    values = value if isinstance(value, list | tuple) else [value]
    try:
        parsed = tuple(float(v) for v in values)
    except (TypeError, ValueError) as e:
        raise ConfigError(name, f"expected numbers, got {value!r}") from e
    if any(not 0.0 <= v <= 1.0 for v in parsed):
        raise ConfigError(name, f"probabilities must be in [0, 1], got {list(parsed)}")
    return parsed


def _q_log(name: str, value: Any) -> tuple[float, float, int]:
    if not isinstance(value, list | tuple) or len(value) != 3:
        raise ConfigError(name, f"expected [start, stop, count], got {value!r}")
    start, stop = _probabilities(name, value[:2])
    count = _positive(name, value[2])
    if start <= 0 or stop <= 0:
        raise ConfigError(name, "log-spaced bounds must be positive")
    return start, stop, count


def _positive(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int | str | float):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    try:
        parsed = int(value)
    except ValueError as e:
        raise ConfigError(name, f"expected an integer, got {value!r}") from e
    if parsed != value and not isinstance(value, str):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if parsed < 1:
        raise ConfigError(name, f"must be at least 1, got {parsed}")
    return parsed


def _integer(name: str, value: Any) -> int:
    try:
        return int(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(name, f"expected an integer, got {value!r}") from e


def _choice[E: StrEnum](kind: type[E]) -> Callable[[str, Any], E]:
    def convert(name: str, value: Any) -> E:
        try:
            return kind(value)
        except ValueError as e:
            allowed = ", ".join(member.value for member in kind)
            raise ConfigError(name, f"expected one of {allowed}, got {value!r}") from e

    return convert


def _strings(name: str, value: Any) -> tuple[str, ...]:
    values = value if isinstance(value, list | tuple) else [value]
    if not values or any(not isinstance(v, str) for v in values):
        raise ConfigError(name, f"expected a non-empty list of strings, got {value!r}")
    return tuple(values)


def _estimators(name: str, value: Any) -> tuple[Estimator, ...]:
    convert = _choice(Estimator)
    return tuple(convert(name, v) for v in _strings(name, value))


def _text(name: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ConfigError(name, f"expected a string, got {value!r}")
    return value


CONVERTERS: dict[str, Callable[[str, Any], Any]] = {
    "taps": _text,
    "constraint_length": _positive,
    "k": _positive,
    "termination": _choice(Termination),
    "schemes": _strings,
    "n_servers": _positive,
    "n_frames": _positive,
    "p": _probabilities,
    "q": _probabilities,
    "q_log": _q_log,
    "trials": _positive,
    "seed": _integer,
    "detection": _choice(DetectionMode),
    "estimators": _estimators,
    "output": lambda name, value: Path(_text(name, value)),
    "format": _choice(OutputFormat),
    "workers": _positive,
}

assert set(CONVERTERS) == {f.name for f in fields(SweepConfig)}

_TOML_LINE = re.compile(r"line (\d+)")


def read_config_file(path: Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        match = _TOML_LINE.search(str(e))
        raise ConfigError(str(path), str(e), int(match[1]) if match else None) from e
    except OSError as e:
        raise ConfigError(str(path), e.strerror or str(e)) from e


def build_config(
    file_values: Mapping[str, Any], overrides: Mapping[str, Any]
) -> SweepConfig:
    """
    Merge file values and command-line overrides onto the defaults and validate.

    Overrides set to `None` are treated as not given.
    """
    merged = dict(file_values)
    merged.update({key: value for key, value in overrides.items() if value is not None})
    unknown = sorted(set(merged) - set(CONVERTERS))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")

    config = replace(
        SweepConfig(), **{key: CONVERTERS[key](key, value) for key, value in merged.items()}
    )
    if not config.q_grid():
        raise ConfigError("q", "no server failure probabilities given (q or q_log)")
    if not config.p:
        raise ConfigError("p", "no crossover probabilities given")
    try:
        config.code()
    except NfvError as e:
        raise ConfigError("taps", str(e)) from e
    try:
        config.scheme_list()
    except NfvError as e:
        raise ConfigError("schemes", str(e)) from e
    return config
