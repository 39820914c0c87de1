"""
Experiment Runner

Executes one `ExperimentConfig` and writes its files with a single writer
once every reduction is done:

* report.json: the deterministic report (config echo, seed, results)
* series.csv: time series of the experiment, 17 significant digits
* paths.csv / measure.txt: the simulation and measure exports
* manifest.json: the report files plus versions, threads and wall time
* failure.json: a machine-readable failure record instead of the report
"""

import csv
import json
import logging
import platform
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pydantic
import scipy

from ergojump._config import FileConfig, RunConfig
from ergojump._config.experiment_config import ExperimentConfig
from ergojump._version import __application__, __version__
from ergojump.exceptions import ConfigError, ErgoJumpError, InsufficientSignalError
from ergojump.models._lab import ErgoLab
from ergojump.models.coupling import (
    distance_moment_bound,
    estimate_exit_before_coupling,
    estimate_tail,
    exit_probability_bound,
    proof_alpha,
    reflected_brownian_tail,
)
from ergojump.models.ergodic import (
    drift_ode_bound,
    rate_fit,
    tightness_bound,
    write_measure,
)
from ergojump.models.simulation import (
    estimate_sup_second_moment,
    gronwall_second_moment_bound,
    moment_curve,
    write_ensemble,
)

logger = logging.getLogger(__name__)

Row = Dict[str, Any]
Outcome = Tuple[Dict[str, Any], List[Row]]


def _fmt(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return value


def write_series(rows: Sequence[Row], path: Path) -> Path:
    """
    CSV table with a header row and 17 significant digit floats
    """
    fieldnames: List[str] = []
    for row in rows:
        fieldnames.extend(key for key in row if key not in fieldnames)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _fmt(value) for key, value in row.items()})
    return path


def _write_json(path: Path, payload: Dict[str, Any]) -> Path:
    text = json.dumps(payload, indent=2, sort_keys=True, default=str)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _dump(model: Any) -> Any:
    return model.model_dump(mode="json")


def _run_simulate(config: ExperimentConfig, lab: ErgoLab, out: Path) -> Outcome:
    settings = config.simulate
    assert settings is not None
    coeffs = lab.coeffs
    ensemble = lab.simulate_ensemble(
        settings.x0,
        settings.horizon,
        settings.step,
        settings.n_paths,
        checkpoints=settings.checkpoints,
        record_paths=settings.record_paths,
        strict=settings.strict,
    )
    write_ensemble(ensemble, out / FileConfig.PATHS_FILE)
    curve = moment_curve(ensemble)
    x0sq = float(np.sum(np.square(ensemble.x0)))
    ode = None
    if coeffs.r > 2:
        ode = drift_ode_bound(coeffs.r, coeffs.lambda3, coeffs.lambda4, x0sq, curve.times)
    rows = []
    for i, t in enumerate(curve.times):
        row: Row = {
            "time": t,
            "second_moment": curve.estimates[i],
            "stderr": curve.stderrs[i],
        }
        if ode is not None:
            row["drift_ode_bound"] = float(ode[i])
        rows.append(row)
    results = {
        "sup_second_moment": _dump(estimate_sup_second_moment(ensemble)),
        "gronwall_bound": gronwall_second_moment_bound(
            ensemble.x0, settings.horizon, coeffs.lambda1
        ),
        "moment_curve": _dump(curve),
        "mean_jumps": float(np.mean(ensemble.jump_counts)),
        "compensator_stderr": float(np.max(ensemble.compensator_stderr, initial=0.0)),
    }
    if ode is not None:
        results["below_drift_ode_bound"] = bool(
            all(row["second_moment"] <= row["drift_ode_bound"] + 3 * row["stderr"] for row in rows)
        )
    return results, rows


def _run_couple(config: ExperimentConfig, lab: ErgoLab, out: Path) -> Outcome:
    settings = config.couple
    assert settings is not None
    coeffs = lab.coeffs
    params = settings.coupling_params()
    times = sorted(set(settings.times))
    ensemble = lab.simulate_coupled_ensemble(
        params,
        settings.horizon,
        settings.step,
        settings.n_paths,
        checkpoints=times,
        record_paths=settings.record_paths,
        strict=settings.strict,
    )
    reference = None
    if coeffs.label == "brownian" and coeffs.dim == 1 and params.beta == 1.0:
        reference = float(coeffs.sigma(np.zeros(1))[0, 0, 0] ** 2)
    rows = []
    for t in times:
        tail = estimate_tail(ensemble, t)
        row: Row = {
            "time": t,
            "tail": tail.estimate,
            "tail_lower": tail.lower,
            "tail_upper": tail.upper,
        }
        if 2 * t <= settings.horizon:
            row["exit_before_coupling"] = estimate_exit_before_coupling(ensemble, t).estimate
        if reference is not None:
            row["reflected_brownian_tail"] = reflected_brownian_tail(params.distance, t, reference)
        if settings.bound_constant is not None:
            args = (params.x0, params.y0, params.delta, coeffs.lambda0, settings.bound_constant, t)
            row["distance_moment_bound"] = distance_moment_bound(*args)
            row["exit_probability_bound"] = exit_probability_bound(*args)
            row["proof_alpha"] = proof_alpha(
                t, settings.bound_constant, coeffs.lambda0, params.delta
            )
        rows.append(row)
    modulus = [
        _dump(
            lab.strong_feller_modulus(
                params,
                t,
                phi,
                settings.n_paths,
                settings.step,
                estimator=settings.estimator,
                strict=settings.strict,
            )
        )
        for phi in settings.observables
        for t in times
    ]
    results: Dict[str, Any] = {
        "distance": params.distance,
        "beta": params.beta,
        "eps": params.eps,
        "coupled_fraction": float(np.mean(np.isfinite(ensemble.tau))),
        "strong_feller": modulus,
        "strong_feller_holds": all(entry["holds"] for entry in modulus),
    }
    if settings.marginal_check:
        results["marginal_ks"] = _dump(
            lab.marginal_ks(params, times, settings.n_paths, settings.step, strict=settings.strict)
        )
    return results, rows


def _run_irreducibility(config: ExperimentConfig, lab: ErgoLab, out: Path) -> Outcome:
    settings = config.irreducibility
    assert settings is not None
    report = lab.irreducibility_probe(
        settings.x0,
        settings.target,
        settings.radius,
        settings.horizon,
        settings.step,
        settings.n_paths,
        t0=settings.t0,
        n=settings.n,
        strict=settings.strict,
    )
    return {"probe": _dump(report), "demonstrated": report.demonstrated}, []


def _run_ergodicity(config: ExperimentConfig, lab: ErgoLab, out: Path) -> Outcome:
    settings = config.ergodicity
    assert settings is not None
    coeffs = lab.coeffs
    mu_hat = lab.krylov_bogoliubov(
        settings.x0,
        settings.horizon,
        settings.step,
        burn_in=settings.burn_in,
        mode=settings.mode,
        n_paths=settings.measure_paths,
        bins=settings.bins,
        strict=settings.strict,
    )
    write_measure(mu_hat, out / FileConfig.MEASURE_FILE)
    rows: List[Row] = []
    decays = []
    for index, start in enumerate(settings.starts):
        decay = lab.tv_decay(
            start,
            mu_hat,
            settings.decay_times,
            settings.n_paths,
            settings.step,
            strict=settings.strict,
        )
        entry: Dict[str, Any] = {"decay": _dump(decay), "fit": None, "note": None}
        try:
            fit = rate_fit(
                decay.times,
                decay.distances,
                decay.stderrs,
                bootstrap=settings.bootstrap,
                seed=config.seed,
            )
            entry["fit"] = _dump(fit)
            entry["excludes_zero"] = fit.excludes_zero
        except InsufficientSignalError as ise:
            logger.warning("no rate fit for start %s: %s", start, ise)
            entry["note"] = str(ise)
        decays.append(entry)
        rows.extend(
            {"start": index, "time": t, "distance": d, "stderr": s}
            for t, d, s in zip(decay.times, decay.distances, decay.stderrs)
        )
    results: Dict[str, Any] = {
        "measure": {
            "n": mu_hat.n,
            "mean": mu_hat.mean().tolist(),
            "variance": mu_hat.variance().tolist(),
            "overflow_mass": mu_hat.overflow_mass,
            "grid": _dump(mu_hat.grid),
        },
        "tightness": {
            "radius": settings.tightness_radius,
            "empirical_mass_outside": mu_hat.mass_outside(settings.tightness_radius),
            "bound": tightness_bound(
                settings.x0,
                coeffs.lambda3,
                coeffs.lambda4,
                coeffs.r,
                settings.horizon,
                settings.tightness_radius,
            ),
        },
        "decays": decays,
    }
    if settings.spectral is not None:
        spectral = settings.spectral
        results["spectral"] = _dump(
            lab.spectral_probe(
                mu_hat,
                spectral.phi,
                spectral.times or settings.decay_times,
                spectral.n_starts,
                spectral.paths_per_start,
                settings.step,
                gammas=spectral.gammas,
                strict=settings.strict,
            )
        )
    return results, rows


def _run_check(config: ExperimentConfig, lab: ErgoLab, out: Path) -> Outcome:
    settings = config.check
    assert settings is not None
    report = lab.check_hypotheses(which=settings.hypotheses, sampler=settings.sampler)
    return {"hypotheses": _dump(report), "all_satisfied": report.all_satisfied}, []


def _run_lemma21(config: ExperimentConfig, lab: ErgoLab, out: Path) -> Outcome:
    settings = config.lemma21
    assert settings is not None
    report = lab.lemma21_suite(
        n_pairs=settings.n_pairs,
        lambdas=settings.lambdas,
        dim=settings.dim,
        upper=settings.upper,
    )
    return {"suite": _dump(report), "summary": report.summary}, []


EXPERIMENT_RUNNERS: Dict[str, Callable[[ExperimentConfig, ErgoLab, Path], Outcome]] = {
    "simulate": _run_simulate,
    "couple": _run_couple,
    "irreducibility": _run_irreducibility,
    "ergodicity": _run_ergodicity,
    "check": _run_check,
    "lemma21": _run_lemma21,
}


def build_report(config: ExperimentConfig, lab: ErgoLab, results: Dict[str, Any]) -> Dict[str, Any]:
    """
    Deterministic report: everything needed to re-run plus the results
    """
    return {
        "application": __application__,
        "experiment": config.experiment,
        "seed": config.seed,
        "config": config.echo(reproducible=True),
        "model": {
            "label": lab.coeffs.label,
            "fingerprint": lab.coeffs.fingerprint(),
            "constants": lab.coeffs.constants(),
        },
        "results": results,
    }


def _versions() -> Dict[str, str]:
    return {
        __application__: __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "python": platform.python_version(),
    }


def failure_record(error: BaseException, config: Optional[ExperimentConfig] = None) -> Dict[str, Any]:
    """
    Machine-readable description of a failed run

    Parameters
    ----------
    error: BaseException
    config: Optional[ExperimentConfig]

    Returns
    -------
    Dict[str, Any]
    """
    record: Dict[str, Any] = {
        "status": "failed",
        "error": type(error).__name__,
        "message": str(error),
        "ergojump_error": isinstance(error, ErgoJumpError),
    }
    for attribute in ("time", "point", "eigenvalue", "x", "y"):
        if hasattr(error, attribute):
            record[attribute] = getattr(error, attribute)
    if isinstance(error, ConfigError):
        record["errors"] = [
            problem.model_dump() if hasattr(problem, "model_dump") else str(problem)
            for problem in error.errors
        ]
    if config is not None:
        record["experiment"] = config.experiment
        record["seed"] = config.seed
        record["config"] = config.echo(reproducible=True)
    return record


def write_failure(
    error: BaseException,
    output_dir: Optional[Path] = None,
    config: Optional[ExperimentConfig] = None,
) -> Path:
    """
    Write failure.json into the output directory
    """
    out = RunConfig.get_output_dir(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _write_json(out / FileConfig.FAILURE_FILE, failure_record(error, config))


def run_experiment(config: ExperimentConfig) -> int:
    """
    Run an Experiment and Write its Files

    Parameters
    ----------
    config: ExperimentConfig

    Returns
    -------
    int
        Exit status: 0 on success, 1 when a failure record was written
    """
    out = RunConfig.get_output_dir(config.output)
    out.mkdir(parents=True, exist_ok=True)
    stale = out / FileConfig.FAILURE_FILE
    if stale.exists():
        stale.unlink()
    started = time.perf_counter()
    try:
        lab = ErgoLab(
            config.model.build(),
            seed=config.seed,
            threads=config.threads,
            chunk_size=config.chunk_size,
        )
        logger.info("running %s on %r with seed %s", config.experiment, lab.coeffs.label, config.seed)
        results, rows = EXPERIMENT_RUNNERS[config.experiment](config, lab, out)
        files = [FileConfig.REPORT_FILE]
        if rows:
            write_series(rows, out / FileConfig.SERIES_FILE)
            files.append(FileConfig.SERIES_FILE)
        if config.experiment == "simulate":
            files.append(FileConfig.PATHS_FILE)
        if config.experiment == "ergodicity":
            files.append(FileConfig.MEASURE_FILE)
        _write_json(out / FileConfig.REPORT_FILE, build_report(config, lab, results))
    except Exception as exc:
        logger.error("%s failed: %s", config.experiment, exc)
        write_failure(exc, out, config)
        return 1
    elapsed = time.perf_counter() - started
    _write_json(
        out / FileConfig.MANIFEST_FILE,
        {
            "experiment": config.experiment,
            "seed": config.seed,
            "config": config.echo(),
            "files": files,
            "versions": _versions(),
            "threads": lab.threads,
            "chunk_size": lab.chunk_size,
            "wall_time_seconds": elapsed,
        },
    )
    logger.info("wrote %s to %s in %.2fs", ", ".join(files), out, elapsed)
    return 0
