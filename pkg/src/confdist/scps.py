"""Split conformal predictive systems.

The training sequence is split deterministically: the first ``m``
observations form the proper training set, the remaining ``n - m`` the
calibration set.  Predictions are available in two equivalent forms: a
:class:`~confdist.core.StepDistribution` obtained by inverting the
calibration scores at the test object, and direct evaluation of the
transducer by counting calibration scores below/equal to the test score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .conformity import ConformityMeasureSpec, TrainedMeasure, train_measure
from .core import (
    Dataset,
    DataError,
    ScoreNotAttainable,
    StepDistribution,
    _check_tau,
    transducer_value,
)


def _as_objects(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.reshape(1, -1) if X.ndim <= 1 else X


def split_index(n: int, split: float | int) -> int:
    """Size ``m`` of the proper training set.

    A float in ``(0, 1)`` is a fraction (``m = floor(split * n)``); an int is
    taken as ``m`` itself.
    """
    if isinstance(split, (int, np.integer)) and not isinstance(split, bool):
        m = int(split)
    else:
        if not 0 < split < 1:
            raise ValueError("split fraction must lie in (0, 1)")
        m = math.floor(split * n)
    if not 1 <= m <= n - 1:
        raise DataError(f"split gives m={m}, need 1 <= m <= {n - 1}")
    return m


@dataclass(frozen=True, eq=False)
class ScpsModel:
    """A fitted split conformal predictive system."""

    measure: TrainedMeasure
    calibration_scores: np.ndarray
    calibration_labels: np.ndarray | None = None

    def __post_init__(self):
        scores = np.asarray(self.calibration_scores, dtype=float)
        if scores.size < 1:
            raise DataError("calibration set is empty")
        if not np.all(np.isfinite(scores)):
            raise DataError("calibration scores must be finite")
        scores.setflags(write=False)
        object.__setattr__(self, "calibration_scores", scores)
        object.__setattr__(self, "_sorted", np.sort(scores))

    @property
    def calibration_size(self) -> int:
        return self.calibration_scores.size

    def _counts(self, X, y):
        alpha_y = self.measure.scores(_as_objects(X), y)
        strict = np.searchsorted(self._sorted, alpha_y, side="left")
        at_most = np.searchsorted(self._sorted, alpha_y, side="right")
        return strict, at_most

    def q(self, X, y, tau):
        """Transducer value for each (object, label, tau), vectorised."""
        tau = _check_tau(tau)
        strict, at_most = self._counts(X, y)
        return transducer_value(strict, at_most - strict, tau, self.calibration_size + 1)

    def q_crisp(self, X, y):
        _, at_most = self._counts(X, y)
        return at_most / self.calibration_size

    def predict(self, x) -> StepDistribution:
        return predict_scps(self, x)

    def q_grid(self, x, grid=None, tau: float = 0.0, num: int = 201):
        """Evaluate the transducer on a label grid at a single object.

        This is the fallback when the conformity measure cannot be inverted.
        Without an explicit grid, the range of the calibration labels is
        padded by 10% on either side.
        """
        x = _as_objects(x)[0]
        if grid is None:
            if self.calibration_labels is None:
                raise ValueError("no calibration labels stored; pass a grid")
            lo = float(np.min(self.calibration_labels))
            hi = float(np.max(self.calibration_labels))
            pad = 0.1 * (hi - lo if hi > lo else 1.0)
            grid = np.linspace(lo - pad, hi + pad, num)
        grid = np.asarray(grid, dtype=float)
        X = np.repeat(x[None, :], grid.size, axis=0)
        return grid, self.q(X, grid, tau)


def fit_scps(train: Dataset, split: float | int,
             spec: ConformityMeasureSpec | None = None,
             measure: TrainedMeasure | None = None) -> ScpsModel:
    """Train on the first ``m`` observations and score the rest.

    Parameters
    ----------
    train : Dataset
        Training sequence of length ``n``.
    split : float or int
        Fraction ``alpha`` (``m = floor(alpha n)``) or explicit ``m``.
    spec : ConformityMeasureSpec, optional
        Conformity measure to train on the proper training set.
    measure : TrainedMeasure, optional
        An already trained measure; overrides ``spec``.
    """
    m = split_index(len(train), split)
    proper, calibration = train[:m], train[m:]
    if measure is None:
        measure = train_measure(spec or ConformityMeasureSpec(), proper)
    scores = measure.scores(calibration.X, calibration.y)
    return ScpsModel(measure, scores, np.asarray(calibration.y))


def predict_scps(model: ScpsModel, x) -> StepDistribution:
    """Predictive distribution at ``x`` via inversion of calibration scores."""
    try:
        jumps = model.measure.invert(_as_objects(x)[0], model.calibration_scores)
    except ScoreNotAttainable as exc:
        raise ScoreNotAttainable(
            f"{exc}; evaluate the transducer directly with ScpsModel.q_grid") from exc
    return StepDistribution(jumps, model.calibration_size + 1)


def predict_jumps(model: ScpsModel, X) -> np.ndarray:
    """Unsorted jump points for many test objects, one row each."""
    return model.measure.invert_many(_as_objects(X), model.calibration_scores)


def scps_q(model: ScpsModel, x, y: float, tau: float) -> float:
    return float(model.q(_as_objects(x), np.array([y], dtype=float), tau)[0])


def scps_q_crisp(model: ScpsModel, x, y: float) -> float:
    return float(model.q_crisp(_as_objects(x), np.array([y], dtype=float))[0])


@dataclass(frozen=True, eq=False)
class IdealConformalPredictor:
    """Conformal predictive system with a known conformity function.

    Scores are ``(y - f(x)) / sigma(x)`` with ``sigma = 1`` by default; the
    whole training sequence serves as calibration sequence, so the
    predictive distribution at ``x`` has denominator ``n + 1``.
    """

    location: Callable[[np.ndarray], np.ndarray]
    train_scores: np.ndarray
    scale: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def fit(cls, train: Dataset, location, scale=None) -> "IdealConformalPredictor":
        X = np.asarray(train.X)
        sigma = 1.0 if scale is None else np.asarray(scale(X), dtype=float)
        scores = (np.asarray(train.y) - np.asarray(location(X), dtype=float)) / sigma
        return cls(location, scores, scale)

    def predict(self, x) -> StepDistribution:
        X = _as_objects(x)
        f = float(np.asarray(self.location(X), dtype=float).ravel()[0])
        if self.scale is None:
            jumps = f + self.train_scores
        else:
            s = float(np.asarray(self.scale(X), dtype=float).ravel()[0])
            jumps = f + s * self.train_scores
        return StepDistribution(jumps, self.train_scores.size + 1)
