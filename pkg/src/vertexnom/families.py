"""Bounded canonical exponential families for edge weights.

Density h(x) exp(T(x) theta - A(theta)). Only the pieces nomination needs are
exposed: the sufficient statistic, the log-partition, its derivative (the
mean of T) and a sampler.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ExpFamily:
    name: str
    trials: int = 1  # N for Binomial(N); 1 gives Bernoulli

    @property
    def binary(self) -> bool:
        return self.trials == 1

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, float(self.trials))

    def sufficient_stat(self, x):
        return np.asarray(x, dtype=float)

    def log_partition(self, theta):
        return self.trials * np.logaddexp(0.0, np.asarray(theta, dtype=float))

    def mean(self, theta):
        """dA/dtheta = E[T(X)]."""
        return self.trials / (1.0 + np.exp(-np.asarray(theta, dtype=float)))

    def natural_param(self, p):
        p = np.asarray(p, dtype=float)
        return np.log(p) - np.log1p(-p)

    def sample(self, theta, rng: np.random.Generator):
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta outside the natural-parameter domain")
        p = 1.0 / (1.0 + np.exp(-theta))
        if self.binary:
            return (rng.random(theta.shape) < p).astype(float)
        return rng.binomial(self.trials, p).astype(float)


BERNOULLI = ExpFamily("bernoulli", 1)


def binomial(trials: int) -> ExpFamily:
    if trials < 1:
        raise ValueError("binomial family needs at least one trial")
    return ExpFamily("binomial", int(trials))


def get_family(name: str, trials: int = 1) -> ExpFamily:
    if name == "bernoulli":
        return BERNOULLI
    if name == "binomial":
        return binomial(trials)
    raise ValueError(f"unsupported family {name!r}")
