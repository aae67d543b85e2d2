"""
Error probability against server failure probability, N=3 servers and K=2 frames.

Runs the shipped configuration with fewer trials; the full run is
`codednfv sweep --config project/configs/three_servers.toml`.
"""

import csv
from collections import defaultdict
from pathlib import Path

import pytest
from codednfv.cli import run_sweep
from codednfv.config import build_config, read_config_file

CONFIGS = Path(__file__).parents[2] / "configs"


@pytest.mark.slow
def test_error_curves(tmp_path):
    values = read_config_file(CONFIGS / "three_servers.toml")
    values.update(trials=20_000, output=str(tmp_path / "curves.csv"))
    config = build_config(values, {})
    assert run_sweep(config).complete

    curves: dict[tuple[str, str], list[tuple[float, float]]] = defaultdict(list)
    with open(config.output, newline="") as f:
        for row in csv.DictReader(f):
            curves[row["scheme"], row["estimator"]].append((float(row["q"]), float(row["p_err"])))

    assert set(curves) == {
        ("diversity", "exact"),
        ("diversity", "paper"),
        ("coded", "exact"),
        ("coded", "paper"),
    }
    for points in curves.values():
        assert len(points) == 10
        errors = [p_err for _, p_err in sorted(points)]
        assert errors == sorted(errors)

    for scheme in ("diversity", "coded"):
        for (_, paper), (_, exact) in zip(curves[scheme, "paper"], curves[scheme, "exact"]):
            assert paper >= exact - 1e-12

    # server 1 alone carries frame 1, so its failures cost the diversity scheme about q
    diversity = dict(curves["diversity", "exact"])
    q_min, q_max = min(diversity), max(diversity)
    assert diversity[q_max] - diversity[q_min] > 0.5 * (q_max - q_min)

    # at ten times the failure probability the coded scheme is still no worse
    def at(curve, q):
        return min(curve, key=lambda point: abs(point[0] - q))[1]

    assert at(curves["coded", "paper"], 1e-3) <= at(curves["diversity", "paper"], 1e-4)
