"""
ergojump Models, Experiments and Associated Objects
"""

from ._base import ArrayModel, ErgoModel
from ._lab import ErgoLab
from ._stats import MonteCarloEstimate, Proportion
from .coefficients import (
    CoefficientSet,
    HypothesisReport,
    JumpKernel,
    ModulusKappa,
    SamplerSpec,
    check_hypotheses,
)
from .coupling import (
    CoupledEnsemble,
    CouplingParams,
    MarginalKSReport,
    StrongFellerReport,
    coupling_matrix,
    simulate_coupled,
    simulate_coupled_ensemble,
)
from .ergodic import (
    EmpiricalMeasure,
    HistogramGrid,
    RateFit,
    SpectralProbeReport,
    TVDecay,
    krylov_bogoliubov,
    rate_fit,
    tv_distance,
)
from .families import FAMILIES, ModelSpec, build_family
from .girsanov import (
    BridgeControl,
    BridgePlan,
    ControlledEnsemble,
    IrreducibilityReport,
    irreducibility_probe,
    make_bridge,
    simulate_controlled,
)
from .matops import SymmetricMatrix, hs_norm, lemma21_gap, sigma_lambda, sqrt_psd
from .observables import (
    BallIndicator,
    ConstantObservable,
    CoordinateObservable,
    CosineObservable,
    Observable,
    TanhObservable,
)
from .simulation import (
    Ball,
    Box,
    EmptySet,
    Event,
    PathEnsemble,
    PathRecord,
    estimate_transition,
    simulate_ensemble,
    simulate_path,
)
from .timegrid import TimeGrid

__all__ = [
    "ArrayModel",
    "Ball",
    "BallIndicator",
    "Box",
    "BridgeControl",
    "BridgePlan",
    "CoefficientSet",
    "ConstantObservable",
    "ControlledEnsemble",
    "CoordinateObservable",
    "CosineObservable",
    "CoupledEnsemble",
    "CouplingParams",
    "EmpiricalMeasure",
    "EmptySet",
    "ErgoLab",
    "ErgoModel",
    "Event",
    "FAMILIES",
    "HistogramGrid",
    "HypothesisReport",
    "IrreducibilityReport",
    "JumpKernel",
    "MarginalKSReport",
    "ModelSpec",
    "ModulusKappa",
    "MonteCarloEstimate",
    "Observable",
    "PathEnsemble",
    "PathRecord",
    "Proportion",
    "RateFit",
    "SamplerSpec",
    "SpectralProbeReport",
    "StrongFellerReport",
    "SymmetricMatrix",
    "TVDecay",
    "TanhObservable",
    "TimeGrid",
    "build_family",
    "check_hypotheses",
    "coupling_matrix",
    "estimate_transition",
    "hs_norm",
    "irreducibility_probe",
    "krylov_bogoliubov",
    "lemma21_gap",
    "make_bridge",
    "rate_fit",
    "sigma_lambda",
    "simulate_controlled",
    "simulate_coupled",
    "simulate_coupled_ensemble",
    "simulate_ensemble",
    "simulate_path",
    "sqrt_psd",
    "tv_distance",
]
