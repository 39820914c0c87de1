"""
Run Tests on Experiment Configs and Runtime Settings
"""

import logging
from pathlib import Path

import pytest

from ergojump._config import FileConfig, RunConfig
from ergojump._config.experiment_config import (
    EXPERIMENTS,
    ExperimentConfig,
    default_config,
    dump_config,
    load_config,
    parse_config,
)
from ergojump.exceptions import ConfigError, EnvironmentVariableError, UsageError
from ergojump.models.families import LinearSpec

logger = logging.getLogger(__name__)

SIMULATE_YAML = """\
experiment: simulate
seed: 7
model:
  family: linear
  jump_gain: 0.5
simulate:
  x0: [2.0]
  horizon: 0.5
  n_paths: 20
"""


def test_parse_simulate_config():
    """
    Model and section settings are parsed into their models
    """
    config = parse_config(SIMULATE_YAML)
    assert config.experiment == "simulate"
    assert config.seed == 7
    assert isinstance(config.model, LinearSpec)
    assert config.model.jump_gain == 0.5
    assert config.settings.x0 == [2.0]
    assert config.settings.step == 0.01
    assert config.couple is None


def test_config_round_trip():
    """
    dump_config is inverted by parse_config
    """
    for experiment in EXPERIMENTS:
        config = default_config(experiment, seed=3)
        assert parse_config(dump_config(config)) == config


def test_active_section_defaults():
    """
    A missing section of the selected experiment is filled with defaults
    """
    config = parse_config("experiment: couple\n")
    assert config.couple is not None
    assert config.settings.delta == 0.1
    assert config.settings.coupling_params().beta == pytest.approx(0.5**0.25)


def test_unknown_key_reports_its_line():
    """
    Unknown keys are rejected with the field path and the line
    """
    text = "experiment: simulate\nsimulate:\n  horizon: 1.0\n  deltt: 0.1\n"
    with pytest.raises(ConfigError) as error:
        parse_config(text)
    problems = error.value.errors
    assert len(problems) == 1
    assert problems[0].field == "simulate.deltt"
    assert problems[0].line == 4
    assert "line 4: simulate.deltt" in str(error.value)


def test_delta_range_is_explained():
    """
    δ = 0.5 is rejected with the admissible interval
    """
    with pytest.raises(ConfigError) as error:
        parse_config("experiment: couple\ncouple:\n  delta: 0.5\n  y0: [0.3]\n")
    messages = [problem.message for problem in error.value.errors]
    assert any("e^-1" in message for message in messages)
    assert error.value.errors[0].field == "couple.delta"


def test_every_problem_is_collected():
    """
    All validation problems are reported at once
    """
    text = "experiment: simulate\nsimulate:\n  step: -1.0\n  n_paths: 0\n"
    with pytest.raises(ConfigError) as error:
        parse_config(text)
    fields = sorted(problem.field for problem in error.value.errors)
    assert fields == ["simulate.n_paths", "simulate.step"]
    assert [problem.line for problem in error.value.errors] == [3, 4]


def test_malformed_documents():
    """
    Broken YAML and non-mapping documents are configuration errors
    """
    with pytest.raises(ConfigError) as error:
        parse_config("experiment: [simulate\n")
    assert error.value.errors[0].line is not None
    with pytest.raises(ConfigError):
        parse_config("- simulate\n")
    with pytest.raises(ConfigError):
        parse_config("seed: 1\n")


def test_couple_times_inside_horizon():
    """
    Tail times may not lie beyond the horizon
    """
    with pytest.raises(ConfigError) as error:
        parse_config("experiment: couple\ncouple:\n  horizon: 1.0\n  times: [0.5, 2.0]\n")
    assert "beyond the horizon" in str(error.value)


def test_overrides_and_echo():
    """
    Command line overrides, reproducible echo without output and threads
    """
    config = default_config("check").with_overrides(seed=9, output="out", threads=4)
    assert (config.seed, config.output, config.threads) == (9, "out", 4)
    echo = config.echo(reproducible=True)
    assert "output" not in echo
    assert "threads" not in echo
    assert echo["seed"] == 9
    with pytest.raises(UsageError):
        default_config("invent")


def test_load_config(tmp_path: Path):
    """
    Configs are read from files
    """
    path = tmp_path / "experiment.yaml"
    path.write_text(SIMULATE_YAML, encoding="utf-8")
    assert isinstance(load_config(path), ExperimentConfig)


def test_threads_resolution(monkeypatch: pytest.MonkeyPatch):
    """
    Argument -> ERGOJUMP_THREADS -> default
    """
    assert RunConfig.get_threads() == RunConfig.DEFAULT_THREADS
    monkeypatch.setenv("ERGOJUMP_THREADS", "3")
    assert RunConfig.get_threads() == 3
    assert RunConfig.get_threads(2) == 2


@pytest.mark.parametrize("value", ["many", "0", "-2"])
def test_bad_environment_values(monkeypatch: pytest.MonkeyPatch, value: str):
    """
    Non-integer and non-positive environment values are refused
    """
    monkeypatch.setenv("ERGOJUMP_CHUNK_SIZE", value)
    with pytest.raises(EnvironmentVariableError):
        RunConfig.get_chunk_size()
    assert RunConfig.get_chunk_size(16) == 16


def test_output_dir_resolution(output_dir: Path, monkeypatch: pytest.MonkeyPatch):
    """
    Argument -> ERGOJUMP_OUTPUT_DIR -> default
    """
    assert RunConfig.get_output_dir() == output_dir
    assert RunConfig.get_output_dir("elsewhere") == Path("elsewhere")
    monkeypatch.delenv("ERGOJUMP_OUTPUT_DIR")
    assert RunConfig.get_output_dir() == FileConfig.DEFAULT_OUTPUT_DIR
