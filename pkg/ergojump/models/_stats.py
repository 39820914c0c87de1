"""
Monte Carlo Estimates and Binomial Intervals
"""

import math
from typing import Any, Tuple

import numpy as np
from pydantic import Field
from scipy import stats

from ergojump.models._base import ErgoModel

WILSON_LEVEL = 0.95


class MonteCarloEstimate(ErgoModel):
    """
    Sample Mean with its Standard Error
    """

    estimate: float
    stderr: float = Field(ge=0.0)
    n: int = Field(ge=0)

    @classmethod
    def from_samples(cls, samples: Any) -> "MonteCarloEstimate":
        """
        Mean and standard error (ddof = 1) of a one-dimensional sample

        Parameters
        ----------
        samples: Any
            Finite sample values

        Returns
        -------
        MonteCarloEstimate
        """
        values = np.asarray(samples, dtype=float).reshape(-1)
        n = int(values.size)
        if n == 0:
            return cls(estimate=math.nan, stderr=0.0, n=0)
        mean = float(np.mean(values))
        stderr = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(estimate=mean, stderr=stderr, n=n)

    def interval(self, stderrs: float = 3.0) -> Tuple[float, float]:
        """
        estimate ± stderrs·stderr
        """
        return self.estimate - stderrs * self.stderr, self.estimate + stderrs * self.stderr

    def contains(self, value: float, stderrs: float = 3.0) -> bool:
        """
        Whether a value lies within stderrs standard errors of the estimate
        """
        lower, upper = self.interval(stderrs)
        return lower <= value <= upper


class Proportion(ErgoModel):
    """
    Binomial Proportion with a 95% Wilson Score Interval
    """

    successes: int = Field(ge=0)
    n: int = Field(ge=1)
    estimate: float
    lower: float
    upper: float

    @property
    def stderr(self) -> float:
        """
        Plug-in binomial standard error sqrt(p(1-p)/n)
        """
        return math.sqrt(self.estimate * (1.0 - self.estimate) / self.n)


def wilson_interval(successes: int, n: int) -> Tuple[float, float]:
    """
    95% Wilson score interval of a binomial proportion

    Parameters
    ----------
    successes: int
    n: int

    Returns
    -------
    Tuple[float, float]
    """
    interval = stats.binomtest(successes, n).proportion_ci(
        confidence_level=WILSON_LEVEL, method="wilson"
    )
    lower = 0.0 if successes == 0 else float(interval.low)
    upper = 1.0 if successes == n else float(interval.high)
    return lower, upper


def proportion(successes: int, n: int, exact_interval: bool = False) -> Proportion:
    """
    Build a Proportion

    Parameters
    ----------
    successes: int
    n: int
        Number of trials, at least one
    exact_interval: bool
        The event is known to hold (or fail) on every sample path, e.g. the whole
        space or the empty set; the interval then collapses to the point estimate

    Returns
    -------
    Proportion
    """
    estimate = successes / n
    if exact_interval:
        lower = upper = estimate
    else:
        lower, upper = wilson_interval(successes, n)
    return Proportion(successes=successes, n=n, estimate=estimate, lower=lower, upper=upper)
