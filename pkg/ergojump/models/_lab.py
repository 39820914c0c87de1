"""
ergojump Lab Facade

Experiments are spread across a series of mixins that all inherit from
ergojump.models._core.LabCore, which binds a coefficient set to a master seed
and to the worker settings.

For example: to see source code on the coupling experiments you will refer to
the CouplingLab object.
"""

from typing import Any, Iterable, Optional, Sequence

from ergojump.models._core import LabCore
from ergojump.models.coefficients import (
    CoefficientSet,
    HypothesisReport,
    SamplerSpec,
    check_hypotheses,
)
from ergojump.models.coupling import CouplingLab
from ergojump.models.ergodic import ErgodicLab
from ergojump.models.families import build_family
from ergojump.models.girsanov import GirsanovLab
from ergojump.models.matops import Lemma21SuiteReport, lemma21_suite
from ergojump.models.simulation import SimulationLab


class CheckLab(LabCore):
    """
    Hypothesis and Matrix Checks
    """

    def check_hypotheses(
        self, which: Optional[Iterable[str]] = None, sampler: Optional[SamplerSpec] = None
    ) -> HypothesisReport:
        """
        Audit the model's hypotheses on a point cloud drawn from the lab's seed

        Parameters
        ----------
        which: Optional[Iterable[str]]
            Hypotheses to audit, defaults to the declared ones
        sampler: Optional[SamplerSpec]

        Returns
        -------
        HypothesisReport
        """
        return check_hypotheses(self.coeffs, which=which, sampler=sampler, seed=self.seed)

    def lemma21_suite(
        self,
        n_pairs: int = 10_000,
        lambdas: Sequence[float] = (0.5, 1.0, 2.0),
        dim: int = 3,
        upper: float = 10.0,
    ) -> Lemma21SuiteReport:
        """
        Commuting-pair square-root inequality on seeded random pairs
        """
        return lemma21_suite(
            n_pairs=n_pairs,
            lambdas=lambdas,
            dim=dim,
            seed=self.seed,
            upper=upper,
        )


class ErgoLab(
    CheckLab,
    SimulationLab,
    CouplingLab,
    GirsanovLab,
    ErgodicLab,
):
    """
    Jump SDE Ergodicity Lab.

    This class bundles every experiment of the package around one model:
    hypothesis audits, Euler-Maruyama simulation, the reflection coupling,
    the Girsanov bridge probe and the invariant measure estimators. All
    randomness flows from a single master seed, so results never depend on
    the worker thread count.

    Examples
    --------
    ```python
    from ergojump import ErgoLab

    lab = ErgoLab.from_family("jump-ou", seed=7, dim=1)
    report = lab.check_hypotheses()
    ensemble = lab.simulate_ensemble(x0=[1.0], horizon=5.0, step=0.01, n_paths=1000)
    mu_hat = lab.krylov_bogoliubov(x0=[0.0], horizon=200.0, step=0.01)
    ```
    """

    def __init__(
        self,
        coeffs: CoefficientSet,
        seed: int = 0,
        threads: Optional[int] = None,
        chunk_size: Optional[int] = None,
    ):
        """
        Initialize a Lab around a coefficient set

        Parameters
        ----------
        coeffs: CoefficientSet
            Model under study
        seed: int
            Master seed
        threads: Optional[int]
            Worker threads, inherited from ERGOJUMP_THREADS if not provided
        chunk_size: Optional[int]
            Paths per batch, inherited from ERGOJUMP_CHUNK_SIZE if not provided
        """
        super(ErgoLab, self).__init__(
            coeffs=coeffs, seed=seed, threads=threads, chunk_size=chunk_size
        )

    @classmethod
    def from_family(cls, family: str, seed: int = 0, **parameters: Any) -> "ErgoLab":
        """
        Build a lab around a built-in model family

        Parameters
        ----------
        family: str
            Family name, e.g. "jump-ou"
        seed: int
            Master seed
        **parameters: Any
            Family parameters

        Returns
        -------
        ErgoLab
        """
        return cls(build_family(family, **parameters), seed=seed)
