"""
Pytest Fixtures Shared Across all Unit Tests
"""

from pathlib import Path

import pytest

from ergojump import ErgoLab
from ergojump.models.coefficients import CoefficientSet
from ergojump.models.families import build_family

module_scope = pytest.fixture(scope="module")


@pytest.fixture(autouse=True)
def clear_ergojump_env_vars(monkeypatch: pytest.MonkeyPatch) -> None:
    """
    Keep the tests independent of any ERGOJUMP_* variables in the shell
    """
    for env_var in ("ERGOJUMP_THREADS", "ERGOJUMP_CHUNK_SIZE", "ERGOJUMP_OUTPUT_DIR"):
        monkeypatch.delenv(env_var, raising=False)


@pytest.fixture
def output_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """
    Output directory inside pytest's tmp_path
    """
    out = tmp_path / "ergojump-output"
    monkeypatch.setenv("ERGOJUMP_OUTPUT_DIR", str(out))
    return out


@module_scope
def jump_ou() -> CoefficientSet:
    """
    Jump OU reference model: θ = 1, σ = 1, rate 1, uniform marks on [-1, 1]
    """
    return build_family("jump-ou")


@module_scope
def jump_ou_2d() -> CoefficientSet:
    """
    Two-dimensional jump OU
    """
    return build_family("jump-ou", dim=2)


@module_scope
def brownian() -> CoefficientSet:
    """
    Standard Brownian motion in one dimension
    """
    return build_family("brownian")


@module_scope
def superlinear() -> CoefficientSet:
    """
    b(x) = -x|x|, r = 3
    """
    return build_family("polynomial-drift", power=2.0)


@module_scope
def log_modulus() -> CoefficientSet:
    """
    Non-Lipschitz monotone drift with a log modulus
    """
    return build_family("log-modulus-perturbed")


@pytest.fixture
def lab(jump_ou: CoefficientSet) -> ErgoLab:
    """
    Lab around the jump OU model with small chunks
    """
    return ErgoLab(jump_ou, seed=11, chunk_size=64)
