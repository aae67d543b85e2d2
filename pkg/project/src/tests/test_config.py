from pathlib import Path

import pytest
from codednfv.config import OutputFormat, SweepConfig, build_config, read_config_file
from codednfv.convcode import DetectionMode, Termination
from codednfv.errors import ConfigError
from codednfv.estimators import Estimator

CONFIGS = Path(__file__).parents[2] / "configs"


def test_defaults():
    config = build_config({}, {"q": [0.01]})
    assert config.taps == "171,133"
    assert config.code().n == 140
    assert config.estimators == (Estimator.EXACT_ENUM, Estimator.PAPER_FORMULA)
    assert config.format is OutputFormat.CSV
    assert [str(s) for s in config.scheme_list()] == ["diversity", "coded"]


def test_precedence():
    config = build_config(
        {"p": [0.1], "trials": 500, "q": [0.1]}, {"p": [0.2], "trials": None, "q": None}
    )
    assert config.p == (0.2,)
    assert config.trials == 500
    assert config.q == (0.1,)


def test_conversions():
    config = build_config(
        {
            "termination": "zero_tail",
            "detection": "crc16",
            "estimators": ["mc"],
            "p": 0.05,
            "q": [0.1],
            "output": "out.csv",
        },
        {},
    )
    assert config.termination is Termination.ZERO_TAIL
    assert config.detection is DetectionMode.CRC16
    assert config.estimators == (Estimator.FULL_MC,)
    assert config.p == (0.05,)
    assert config.output == Path("out.csv")


def test_q_grid():
    config = build_config({"q": [0.5], "q_log": [1e-4, 1e-1, 4]}, {})
    assert config.q_grid() == pytest.approx([1e-4, 1e-3, 1e-2, 1e-1, 0.5])


@pytest.mark.parametrize(
    ("values", "field"),
    [
        ({"colour": "blue"}, "colour"),
        ({"q": [1.5]}, "q"),
        ({"q": [0.1], "p": ["high"]}, "p"),
        ({"q": [0.1], "trials": 0}, "trials"),
        ({"q": [0.1], "trials": 2.5}, "trials"),
        ({"q": [0.1], "q_log": [0, 1, 3]}, "q_log"),
        ({"q": [0.1], "detection": "oracle"}, "detection"),
        ({"q": [0.1], "schemes": ["fountain"]}, "schemes"),
        ({"q": [0.1], "taps": "171,999"}, "taps"),
        ({}, "q"),
    ],
)
def test_invalid_values(values, field):
    with pytest.raises(ConfigError) as e:
        build_config(values, {})
    assert e.value.field == field


def test_toml_syntax_error(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text('taps = "171,133"\np = [0.05\nq = [0.1]\n')
    with pytest.raises(ConfigError) as e:
        read_config_file(path)
    assert e.value.field == str(path)
    assert e.value.line is not None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.toml")


def test_shipped_config():
    config = build_config(read_config_file(CONFIGS / "three_servers.toml"), {})
    assert config.code().n == 140
    assert config.code().k == 64
    assert len(config.q_grid()) == 10
    assert config.q_grid()[0] == pytest.approx(1e-4)
    assert isinstance(config, SweepConfig)
