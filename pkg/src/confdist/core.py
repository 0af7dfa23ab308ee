"""Observations, datasets and the step-distribution algebra.

A split or cross-conformal predictive distribution is determined by a sorted
multiset of jump points ``C_(1) <= ... <= C_(N)`` and a denominator ``D``
(``n - m + 1`` for split, ``n + 1`` for cross-conformal).  The fuzzy
(``tau``-parameterised) and crisp evaluations of that object live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np


class ConfdistError(Exception):
    """Base class for errors raised by this package."""


class DataError(ConfdistError, ValueError):
    """Malformed or inconsistent input data."""


class ScoreNotAttainable(ConfdistError):
    """A conformity score cannot be inverted at the requested test object."""


@dataclass(frozen=True)
class Observation:
    """A single observation ``z = (x, y)``."""

    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if x.ndim != 1 or x.size == 0:
            raise DataError("object x must be a nonempty 1-d vector")
        if not np.all(np.isfinite(x)) or not math.isfinite(self.y):
            raise DataError("observation contains non-finite values")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class Dataset:
    """An ordered sequence of observations stored column-wise.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
        Objects.  A 1-d array is read as a single feature.
    y : array-like of shape (n_samples,)
        Labels.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError("X must be 2-d")
        if X.shape[0] != y.shape[0]:
            raise DataError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] > 0 and X.shape[1] == 0:
            raise DataError("objects must have at least one feature")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        X = X.copy()
        y = y.copy()
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_observations(cls, observations) -> "Dataset":
        observations = list(observations)
        if not observations:
            raise DataError("no observations")
        dims = {obs.x.size for obs in observations}
        if len(dims) != 1:
            raise DataError("observations have differing feature dimensions")
        X = np.vstack([obs.x for obs in observations])
        y = np.array([obs.y for obs in observations])
        return cls(X, y)

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, index) -> "Observation | Dataset":
        if isinstance(index, (int, np.integer)):
            return Observation(self.X[index], self.y[index])
        return Dataset(self.X[index], self.y[index])

    def __iter__(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield Observation(self.X[i], self.y[i])

    @property
    def observations(self) -> list[Observation]:
        return list(self)


@dataclass(frozen=True)
class StepDistribution:
    """Predictive distribution given by sorted jumps and a denominator.

    The number of jumps is always ``denominator - 1``; the sentinels
    ``C_(0) = -inf`` and ``C_(N+1) = +inf`` are implicit.
    """

    jumps: np.ndarray
    denominator: int

    def __post_init__(self):
        jumps = np.sort(np.asarray(self.jumps, dtype=float).ravel())
        if np.any(np.isnan(jumps)):
            raise ValueError("jumps must not be NaN")
        denominator = int(self.denominator)
        if denominator < 1:
            raise ValueError("denominator must be positive")
        if jumps.size != denominator - 1:
            raise ValueError(
                f"expected {denominator - 1} jumps, got {jumps.size}")
        jumps.setflags(write=False)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "denominator", denominator)

    @classmethod
    def from_jumps(cls, jumps) -> "StepDistribution":
        jumps = np.asarray(jumps, dtype=float).ravel()
        return cls(jumps, jumps.size + 1)

    @property
    def size(self) -> int:
        return self.jumps.size

    def fuzzy(self, y, tau):
        return eval_fuzzy(self, y, tau)

    def crisp(self, y):
        return eval_crisp(self, y)

    def quantile(self, level: float, tau: float) -> float:
        return quantile(self, level, tau)


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any((tau < 0) | (tau > 1)) or np.any(np.isnan(tau)):
        raise ValueError("tau must lie in [0, 1]")
    return tau


def eval_fuzzy(dist: StepDistribution, y, tau):
    """Evaluate the fuzzy predictive distribution at ``y`` for a given ``tau``.

    Between jumps the value is ``(i + tau) / D`` where ``i`` counts the jumps
    below ``y``; at a jump with tied indices ``i'..i''`` it is
    ``(i' - 1 + (i'' - i' + 2) tau) / D``.  Broadcasts over ``y`` and ``tau``.
    """
    tau = _check_tau(tau)
    y = np.asarray(y, dtype=float)
    below = np.searchsorted(dist.jumps, y, side="left")
    at_or_below = np.searchsorted(dist.jumps, y, side="right")
    # ties = 0 off the jumps, giving (i + tau) / D
    value = transducer_value(below, at_or_below - below, tau, dist.denominator)
    return value[()] if np.ndim(value) == 0 else value


def transducer_value(strict, ties, tau, denominator):
    """``(strict + tau * ties + tau) / denominator`` in one fixed float order."""
    return (strict + tau * (ties + 1)) / denominator


def eval_crisp(dist: StepDistribution, y):
    """Crisp modification: ``|{j : C_(j) <= y}| / (D - 1)``."""
    if dist.denominator < 2:
        raise ValueError("no calibration points")
    y = np.asarray(y, dtype=float)
    value = np.searchsorted(dist.jumps, y, side="right") / (dist.denominator - 1)
    return value[()] if np.ndim(value) == 0 else value


def quantile(dist: StepDistribution, level: float, tau: float) -> float:
    """Smallest ``y`` (as an infimum) with ``eval_fuzzy(dist, y, tau) >= level``.

    Returns ``-inf`` when the left tail already reaches ``level`` and ``+inf``
    when the distribution never does.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    _check_tau(tau)
    D = dist.denominator
    # smallest i with (i + tau) / D >= level; fix up float rounding of ceil
    i = math.ceil(level * D - tau)
    while i > 0 and (i - 1 + tau) / D >= level:
        i -= 1
    while (i + tau) / D < level:
        i += 1
    if i <= 0:
        return -math.inf
    if i > dist.size:
        return math.inf
    return float(dist.jumps[i - 1])


@dataclass
class TauSource:
    """Seeded stream of ``tau ~ U[0, 1]`` draws (one per test object)."""

    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        self._rng = np.random.default_rng(self.seed)

    def draw(self, size: int | None = None):
        return self._rng.random(size)

    def spawn(self, n: int) -> list["TauSource"]:
        """Independent child sources for parallel tasks."""
        seeds = np.random.SeedSequence(self.seed).spawn(n)
        return [TauSource(int(s.generate_state(1)[0])) for s in seeds]
