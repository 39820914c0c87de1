"""
Run Configuration Helper
"""

import logging
import math
from os import getenv
from pathlib import Path
from typing import Optional, Union

from ergojump._config.file_config import FileConfig
from ergojump.exceptions import EnvironmentVariableError

logger = logging.getLogger(__name__)


class RunConfig:
    """
    Runtime Defaults and Numerical Constants

    Values resolve in the order: explicit argument -> environment variable -> default.
    """

    DEFAULT_THREADS: int = 1
    DEFAULT_CHUNK_SIZE: int = 2048

    # hypothesis checker point cloud
    CLOUD_PAIRS: int = 4096
    CLOUD_RADIUS: float = 10.0
    CLOUD_NEAR_DIAGONAL: int = 256
    CLOUD_MIN_GAP: float = 1e-8
    CLOUD_MARKS: int = 100_000
    CHECK_TOLERANCE: float = 1e-9
    INCONCLUSIVE_STDERRS: float = 3.0
    KAPPA_GRID_FLOOR: float = 1e-12

    # matrix algebra
    CLIP_TOLERANCE: float = 1e-10
    COMMUTATION_TOLERANCE: float = 1e-9

    # simulation
    COMPENSATOR_MARKS: int = 64
    STEP_GUARD_FACTOR: float = 4.0

    # coupling
    COUPLE_EPS_FACTOR: float = 1e-4
    MAX_COUPLE_EPS_FACTOR: float = 1e-3
    DEFAULT_ALPHA: float = 0.5
    DELTA_UPPER: float = math.exp(-1.0)

    # girsanov
    T0_FRACTION: float = 0.9
    CONDITION_LIMIT: float = 1e12

    # ergodic
    HISTOGRAM_BINS: int = 100
    BOX_COVERAGE: float = 0.999
    BURN_IN_FRACTION: float = 0.1
    GRIDDED_TV_MAX_DIM: int = 3
    NOISE_FLOOR_STDERRS: float = 3.0
    KNEE_FRACTION: float = 0.9
    BOOTSTRAP_SAMPLES: int = 1000

    _threads_environment_variable = "ERGOJUMP_THREADS"
    _chunk_size_environment_variable = "ERGOJUMP_CHUNK_SIZE"
    _output_dir_environment_variable = "ERGOJUMP_OUTPUT_DIR"

    @staticmethod
    def _positive_int(name: str, value: Optional[str]) -> Optional[int]:
        if value is None:
            return None
        try:
            parsed = int(value)
        except ValueError as ve:
            raise EnvironmentVariableError(
                f"{name} must be a positive integer, got {value!r}"
            ) from ve
        if parsed < 1:
            raise EnvironmentVariableError(
                f"{name} must be a positive integer, got {value!r}"
            )
        return parsed

    @staticmethod
    def get_threads(threads: Optional[int] = None) -> int:
        """
        Resolve the Worker Thread Count

        Parameters
        ----------
        threads: Optional[int]
            Explicit thread count, takes precedence over ERGOJUMP_THREADS

        Returns
        -------
        int
        """
        if threads is not None:
            return max(1, int(threads))
        from_env = RunConfig._positive_int(
            RunConfig._threads_environment_variable,
            getenv(RunConfig._threads_environment_variable, None),
        )
        return from_env if from_env is not None else RunConfig.DEFAULT_THREADS

    @staticmethod
    def get_chunk_size(chunk_size: Optional[int] = None) -> int:
        """
        Resolve the Number of Paths per Vectorised Batch

        The chunk size fixes how paths are grouped, so results never depend on
        the number of threads.

        Parameters
        ----------
        chunk_size: Optional[int]
            Explicit chunk size, takes precedence over ERGOJUMP_CHUNK_SIZE

        Returns
        -------
        int
        """
        if chunk_size is not None:
            return max(1, int(chunk_size))
        from_env = RunConfig._positive_int(
            RunConfig._chunk_size_environment_variable,
            getenv(RunConfig._chunk_size_environment_variable, None),
        )
        return from_env if from_env is not None else RunConfig.DEFAULT_CHUNK_SIZE

    @staticmethod
    def get_output_dir(output_dir: Optional[Union[str, Path]] = None) -> Path:
        """
        Resolve the Output Directory: Argument -> ERGOJUMP_OUTPUT_DIR -> Default

        Parameters
        ----------
        output_dir: Optional[Union[str, Path]]
            Explicit output directory

        Returns
        -------
        Path
        """
        if output_dir is None:
            logger.debug("Loading output directory from environment")
            output_dir = getenv(RunConfig._output_dir_environment_variable, None)
        if output_dir is None:
            return FileConfig.DEFAULT_OUTPUT_DIR
        return Path(output_dir)
