"""
Test cases for the command line interface.
"""

import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from ergojump._cli import cli
from ergojump._config.experiment_config import EXPERIMENTS

SIMULATE_YAML = """\
experiment: simulate
seed: 5
simulate:
  x0: [1.0]
  horizon: 0.2
  step: 0.01
  n_paths: 40
  record_paths: 2
"""

CHECK_YAML = """\
experiment: check
seed: 1
check:
  sampler:
    pairs: 512
    near_diagonal: 64
    marks: 2000
    lipschitz_marks: 32
"""

LEMMA21_YAML = """\
experiment: lemma21
lemma21:
  n_pairs: 100
  lambdas: [1.0]
  dim: 2
"""


@pytest.fixture
def runner() -> CliRunner:
    """
    Fixture for invoking command-line interfaces.
    """
    return CliRunner()


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.yaml"
    path.write_text(text, encoding="utf-8")
    return path


def _read(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def test_main_succeeds(runner: CliRunner) -> None:
    """
    It exits with a status code of zero and lists the experiments.
    """
    result = runner.invoke(cli)
    assert result.exit_code == 0
    for experiment in EXPERIMENTS:
        assert experiment in result.output


def test_version(runner: CliRunner) -> None:
    """
    --version names the application.
    """
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "ergojump" in result.output


def test_config_show_defaults(runner: CliRunner) -> None:
    """
    The defaults of an experiment kind are printed as YAML.
    """
    result = runner.invoke(cli, ["config", "show", "--experiment", "couple", "--seed", "4"])
    assert result.exit_code == 0
    shown = yaml.safe_load(result.output)
    assert shown["experiment"] == "couple"
    assert shown["seed"] == 4
    assert shown["couple"]["delta"] == 0.1
    assert shown["model"]["family"] == "jump-ou"


def test_config_show_needs_a_source(runner: CliRunner) -> None:
    """
    Either --config or --experiment is required.
    """
    result = runner.invoke(cli, ["config", "show"])
    assert result.exit_code == 2


def test_simulate_writes_its_files(runner: CliRunner, tmp_path: Path, output_dir: Path) -> None:
    """
    Report, manifest, series and paths land in the output directory.
    """
    result = runner.invoke(cli, ["simulate", "--config", str(_write(tmp_path, SIMULATE_YAML))])
    assert result.exit_code == 0, result.output
    report = _read(output_dir / "report.json")
    assert report["experiment"] == "simulate"
    assert report["seed"] == 5
    assert "threads" not in report["config"]
    assert report["model"]["label"] == "jump-ou"
    manifest = _read(output_dir / "manifest.json")
    assert manifest["files"] == ["report.json", "series.csv", "paths.csv"]
    assert manifest["threads"] == 1
    assert "wall_time_seconds" in manifest
    assert (output_dir / "series.csv").read_text().startswith("time,second_moment,stderr")
    assert not (output_dir / "failure.json").exists()


def test_reports_do_not_depend_on_threads(runner: CliRunner, tmp_path: Path) -> None:
    """
    The same config and seed give the same report.json for any thread count.
    """
    config = str(_write(tmp_path, SIMULATE_YAML))
    reports = []
    for threads in ("1", "3"):
        out = tmp_path / f"threads-{threads}"
        result = runner.invoke(
            cli, ["simulate", "--config", config, "--threads", threads, "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        reports.append((out / "report.json").read_text(encoding="utf-8"))
        assert _read(out / "manifest.json")["threads"] == int(threads)
    assert reports[0] == reports[1]


def test_check_run(runner: CliRunner, tmp_path: Path, output_dir: Path) -> None:
    """
    The hypothesis audit of the default model passes.
    """
    result = runner.invoke(cli, ["check", "--config", str(_write(tmp_path, CHECK_YAML))])
    assert result.exit_code == 0, result.output
    results = _read(output_dir / "report.json")["results"]
    assert results["all_satisfied"] is True


def test_lemma21_run(runner: CliRunner, tmp_path: Path, output_dir: Path) -> None:
    """
    The commuting-pair suite reports a summary.
    """
    result = runner.invoke(cli, ["lemma21", "--config", str(_write(tmp_path, LEMMA21_YAML))])
    assert result.exit_code == 0, result.output
    results = _read(output_dir / "report.json")["results"]
    assert isinstance(results["summary"], str)


def test_bad_config_writes_failure(runner: CliRunner, tmp_path: Path, output_dir: Path) -> None:
    """
    An unknown key exits 1 with a failure record naming the field and line.
    """
    text = "experiment: simulate\nsimulate:\n  deltt: 0.1\n"
    result = runner.invoke(cli, ["simulate", "--config", str(_write(tmp_path, text))])
    assert result.exit_code == 1
    failure = _read(output_dir / "failure.json")
    assert failure["status"] == "failed"
    assert failure["error"] == "ConfigError"
    assert failure["errors"][0]["field"] == "simulate.deltt"
    assert failure["errors"][0]["line"] == 3
    assert not (output_dir / "report.json").exists()


def test_config_of_another_experiment(runner: CliRunner, tmp_path: Path, output_dir: Path) -> None:
    """
    A config naming another experiment is a usage error.
    """
    result = runner.invoke(cli, ["couple", "--config", str(_write(tmp_path, SIMULATE_YAML))])
    assert result.exit_code == 1
    assert _read(output_dir / "failure.json")["error"] == "UsageError"


def test_blow_up_is_a_failed_run(runner: CliRunner, tmp_path: Path, output_dir: Path) -> None:
    """
    A diverging ensemble leaves failure.json with the blow-up time.
    """
    text = (
        "experiment: simulate\n"
        "model:\n  family: polynomial-drift\n  power: 2.0\n"
        "simulate:\n  x0: [100.0]\n  horizon: 20.0\n  step: 1.0\n  n_paths: 2\n"
    )
    result = runner.invoke(cli, ["simulate", "--config", str(_write(tmp_path, text))])
    assert result.exit_code == 1
    failure = _read(output_dir / "failure.json")
    assert failure["error"] == "BlowUpError"
    assert failure["time"] > 0.0
    assert failure["experiment"] == "simulate"
