"""
Experiment Configuration Files

Experiments are described by YAML documents parsed into the strict
`ExperimentConfig` model. Unknown keys are rejected at every level and every
validation problem is reported at once, with its dotted field path and the
line of the YAML document it points at.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union, get_args

import yaml
from pydantic import (
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from ergojump._config.run_config import RunConfig
from ergojump.exceptions import ConfigError, UsageError
from ergojump.models._base import ErgoModel
from ergojump.models.coefficients import SamplerSpec
from ergojump.models.coupling import CouplingParams
from ergojump.models.families import JumpOUSpec, ModelSpec
from ergojump.models.observables import Observable, TanhObservable

logger = logging.getLogger(__name__)

ExperimentKind = Literal["simulate", "couple", "irreducibility", "ergodicity", "check", "lemma21"]

EXPERIMENTS: Sequence[str] = get_args(ExperimentKind)


class SimulateSettings(ErgoModel):
    """
    Euler-Maruyama Ensemble
    """

    x0: List[float] = [1.0]
    horizon: PositiveFloat = 1.0
    step: PositiveFloat = 0.01
    n_paths: PositiveInt = 1000
    checkpoints: Optional[List[float]] = None
    record_paths: NonNegativeInt = 5
    strict: bool = True


class CoupleSettings(CouplingParams):
    """
    Reflection Coupling Runs

    The coupling parameters sit next to the run parameters; `bound_constant`
    enables the analytic distance and exit bounds.
    """

    delta: float = 0.1
    x0: List[float] = [0.0]
    y0: List[float] = [0.05]
    horizon: PositiveFloat = 2.0
    step: PositiveFloat = 0.01
    n_paths: PositiveInt = 10_000
    times: List[PositiveFloat] = [0.5, 1.0, 2.0]
    observables: List[Observable] = Field(default_factory=lambda: [TanhObservable()])
    estimator: Literal["paired", "independent"] = "paired"
    record_paths: NonNegativeInt = 0
    marginal_check: bool = False
    bound_constant: Optional[PositiveFloat] = None
    strict: bool = True

    @model_validator(mode="after")
    def _times_inside_horizon(self) -> "CoupleSettings":
        late = [t for t in self.times if t > self.horizon]
        if late:
            raise ValueError(f"times {late} lie beyond the horizon {self.horizon}")
        return self

    def coupling_params(self) -> CouplingParams:
        """
        The coupling parameters alone
        """
        return CouplingParams(**self.model_dump(include=set(CouplingParams.model_fields)))


class IrreducibilitySettings(ErgoModel):
    """
    Girsanov Bridge Probe
    """

    x0: List[float] = [0.0]
    target: List[float] = [3.0]
    radius: PositiveFloat = 0.5
    horizon: PositiveFloat = 1.0
    step: PositiveFloat = 0.01
    n_paths: PositiveInt = 10_000
    t0: Optional[float] = Field(None, ge=0.0)
    n: Optional[PositiveFloat] = None
    strict: bool = True


class SpectralSettings(ErgoModel):
    """
    Spectral Gap Probe of one Observable
    """

    phi: Observable = Field(default_factory=TanhObservable)
    n_starts: PositiveInt = 64
    paths_per_start: PositiveInt = 256
    times: Optional[List[PositiveFloat]] = None
    gammas: List[PositiveFloat] = [2.0, 4.0]


class ErgodicitySettings(ErgoModel):
    """
    Invariant Measure and TV Decay
    """

    x0: List[float] = [0.0]
    horizon: PositiveFloat = 1000.0
    step: PositiveFloat = 0.01
    burn_in: Optional[float] = Field(None, ge=0.0)
    mode: Literal["single", "ensemble"] = "single"
    measure_paths: PositiveInt = 1
    bins: Optional[PositiveInt] = None
    starts: List[List[float]] = [[2.0]]
    decay_times: List[float] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0]
    n_paths: PositiveInt = 10_000
    bootstrap: PositiveInt = RunConfig.BOOTSTRAP_SAMPLES
    tightness_radius: PositiveFloat = 5.0
    spectral: Optional[SpectralSettings] = None
    strict: bool = True


class CheckSettings(ErgoModel):
    """
    Hypothesis Audit
    """

    hypotheses: Optional[List[str]] = None
    sampler: SamplerSpec = Field(default_factory=SamplerSpec)


class Lemma21Settings(ErgoModel):
    """
    Commuting-Pair Property Run
    """

    n_pairs: PositiveInt = 10_000
    lambdas: List[PositiveFloat] = [0.5, 1.0, 2.0]
    dim: PositiveInt = 3
    upper: PositiveFloat = 10.0


class ExperimentConfig(ErgoModel):
    """
    A Complete, Reproducible Experiment Description

    Only the section of the selected experiment is used; it is filled with
    defaults when absent.
    """

    experiment: ExperimentKind
    seed: NonNegativeInt = 0
    output: Optional[str] = None
    threads: Optional[PositiveInt] = None
    chunk_size: Optional[PositiveInt] = None
    model: ModelSpec = Field(default_factory=JumpOUSpec)
    simulate: Optional[SimulateSettings] = None
    couple: Optional[CoupleSettings] = None
    irreducibility: Optional[IrreducibilitySettings] = None
    ergodicity: Optional[ErgodicitySettings] = None
    check: Optional[CheckSettings] = None
    lemma21: Optional[Lemma21Settings] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_active_section(cls, data: Any) -> Any:
        if isinstance(data, dict):
            kind = data.get("experiment")
            if kind in EXPERIMENTS and data.get(kind) is None:
                data = {**data, kind: {}}
        return data

    @property
    def settings(self) -> ErgoModel:
        """
        Settings section of the selected experiment
        """
        return getattr(self, self.experiment)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        output: Optional[Union[str, Path]] = None,
        threads: Optional[int] = None,
    ) -> "ExperimentConfig":
        """
        Copy with command line overrides applied

        Returns
        -------
        ExperimentConfig
        """
        update: Dict[str, Any] = {}
        if seed is not None:
            update["seed"] = seed
        if output is not None:
            update["output"] = str(output)
        if threads is not None:
            update["threads"] = threads
        if not update:
            return self
        return parse_mapping({**self.echo(), **update})

    def echo(self, reproducible: bool = False) -> Dict[str, Any]:
        """
        JSON-ready mapping of the configuration

        Parameters
        ----------
        reproducible: bool
            Drop the settings that do not change results (output, threads)

        Returns
        -------
        Dict[str, Any]
        """
        exclude = {"output", "threads"} if reproducible else set()
        return self.model_dump(mode="json", exclude_none=True, exclude=exclude)


class ConfigProblem(ErgoModel):
    """
    One Validation Problem of a Config Document
    """

    field: str
    message: str
    line: Optional[int] = None

    def __str__(self) -> str:
        """
        line 3: simulate.deltt: Extra inputs are not permitted
        """
        location = f"line {self.line}: " if self.line is not None else ""
        return f"{location}{self.field or '<root>'}: {self.message}"


def _node_line(root: Optional[yaml.Node], loc: Sequence[Union[str, int]]) -> Optional[int]:
    """
    Line of the deepest YAML node reached by a pydantic error location
    """
    if root is None:
        return None
    node = root
    line = node.start_mark.line + 1
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            match = [pair for pair in node.value if pair[0].value == part]
            if not match:
                continue
            key, node = match[0]
            line = key.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if part >= len(node.value):
                break
            node = node.value[part]
            line = node.start_mark.line + 1
    return line


def _problems(error: ValidationError, root: Optional[yaml.Node]) -> List[ConfigProblem]:
    problems = []
    for item in error.errors():
        loc = item["loc"]
        problems.append(
            ConfigProblem(
                field=".".join(str(part) for part in loc),
                message=item["msg"],
                line=_node_line(root, loc),
            )
        )
    return problems


def parse_mapping(data: Any, root: Optional[yaml.Node] = None) -> ExperimentConfig:
    """
    Validate an already loaded mapping

    Parameters
    ----------
    data: Any
        Mapping loaded from a config document
    root: Optional[yaml.Node]
        Composed YAML node tree, used for line numbers

    Returns
    -------
    ExperimentConfig

    Raises
    ------
    ConfigError
        With every problem found
    """
    if not isinstance(data, dict):
        raise ConfigError(
            [ConfigProblem(field="", message="the config document must be a mapping", line=1)]
        )
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as ve:
        problems = _problems(ve, root)
        logger.debug("config rejected with %s problem(s)", len(problems))
        raise ConfigError(problems) from ve


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse a YAML Experiment Config

    Parameters
    ----------
    text: str
        YAML document

    Returns
    -------
    ExperimentConfig

    Raises
    ------
    ConfigError
        On malformed YAML, unknown keys, missing keys or out-of-range values
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as ye:
        mark = getattr(ye, "problem_mark", None)
        raise ConfigError(
            [
                ConfigProblem(
                    field="",
                    message=str(getattr(ye, "problem", None) or ye),
                    line=mark.line + 1 if mark is not None else None,
                )
            ]
        ) from ye
    return parse_mapping(data, root)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and parse a config file
    """
    config_path = Path(path)
    logger.debug("Loading experiment config from %s", config_path)
    return parse_config(config_path.read_text(encoding="utf-8"))


def dump_config(config: ExperimentConfig) -> str:
    """
    Serialise a config back to YAML; parse_config inverts it

    Parameters
    ----------
    config: ExperimentConfig

    Returns
    -------
    str
    """
    return yaml.safe_dump(config.echo(), sort_keys=False, allow_unicode=True)


def default_config(
    experiment: str,
    seed: Optional[int] = None,
    output: Optional[Union[str, Path]] = None,
    threads: Optional[int] = None,
) -> ExperimentConfig:
    """
    Default config of an experiment kind, with overrides

    Raises
    ------
    UsageError
        For an unknown experiment kind
    """
    if experiment not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {experiment!r}")
    return parse_mapping({"experiment": experiment}).with_overrides(
        seed=seed, output=output, threads=threads
    )
