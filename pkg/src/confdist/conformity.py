"""Split conformity measures and their inverses.

Three families are provided:

* ``simple``: ``y - y_hat``
* ``normalized``: ``(y - y_hat) / sigma_hat``
* ``nadaraya_watson``: the kernel estimate of the conditional distribution
  function ``F(y | x)`` computed from the proper training set.

A trained measure maps an observation to a real score and can be inverted:
given a test object ``x`` and a target score it returns the label ``C`` with
``score(x, C) = target``.  This is what turns calibration scores into the
jump points of a predictive distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import Dataset, DataError, Observation, ScoreNotAttainable
from .regressors import FittedRegressor, RegressorSpec, fit as fit_regressor

MEASURE_KINDS = ("simple", "normalized", "nadaraya_watson")


@dataclass(frozen=True)
class ConformityMeasureSpec:
    kind: str = "simple"
    regressor: RegressorSpec = field(default_factory=RegressorSpec)
    bandwidth_x: float = 1.0
    bandwidth_y: float = 1.0
    sigmoid_smoothing: bool = True

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValueError(f"unknown conformity measure {self.kind!r}")
        if self.bandwidth_x <= 0 or self.bandwidth_y <= 0:
            raise ValueError("bandwidths must be positive")


def _object_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.reshape(1, -1) if X.ndim <= 1 else X


class TrainedMeasure:
    """Base class for a conformity measure trained on a proper training set.

    Subclasses implement :meth:`scores` (vectorised over objects and labels)
    and :meth:`invert`.  Scores must be nondecreasing in the label for the
    resulting split conformal transducer to be a predictive system.
    """

    proper_training_size: int = 0

    def scores(self, X, y) -> np.ndarray:
        raise NotImplementedError

    def invert(self, x, target):
        raise NotImplementedError

    def invert_many(self, X, targets) -> np.ndarray:
        """Inverse labels, one row per object and one column per target."""
        return np.vstack([np.atleast_1d(self.invert(x, targets)) for x in _object_matrix(X)])

    def score(self, obs: Observation | np.ndarray, y: float | None = None) -> float:
        if isinstance(obs, Observation):
            x, y = obs.x, obs.y
        else:
            x = obs
        return float(self.scores(_object_matrix(x), np.array([y]))[0])

    def check_isotonic(self, x, y_grid) -> bool:
        y_grid = np.asarray(y_grid, dtype=float)
        if np.any(np.diff(y_grid) < 0):
            raise ValueError("y_grid must be sorted")
        X = np.repeat(_object_matrix(x), y_grid.size, axis=0)
        return bool(np.all(np.diff(self.scores(X, y_grid)) >= 0))


@dataclass(frozen=True, eq=False)
class SimpleMeasure(TrainedMeasure):
    regressor: FittedRegressor

    @property
    def proper_training_size(self) -> int:
        return self.regressor.training_size

    def scores(self, X, y):
        return np.asarray(y, dtype=float) - self.regressor.predict_many(_object_matrix(X))

    def invert(self, x, target):
        y_hat = self.regressor.predict_many(_object_matrix(x))[0]
        return y_hat + np.asarray(target, dtype=float)

    def invert_many(self, X, targets):
        y_hat = self.regressor.predict_many(_object_matrix(X))
        return y_hat[:, None] + np.asarray(targets, dtype=float)[None, :]


@dataclass(frozen=True, eq=False)
class NormalizedMeasure(TrainedMeasure):
    regressor: FittedRegressor

    @property
    def proper_training_size(self) -> int:
        return self.regressor.training_size

    def scores(self, X, y):
        y_hat, sigma = self.regressor.predict_with_scale_many(_object_matrix(X))
        return (np.asarray(y, dtype=float) - y_hat) / sigma

    def invert(self, x, target):
        y_hat, sigma = self.regressor.predict_with_scale_many(_object_matrix(x))
        return y_hat[0] + sigma[0] * np.asarray(target, dtype=float)

    def invert_many(self, X, targets):
        y_hat, sigma = self.regressor.predict_with_scale_many(_object_matrix(X))
        return y_hat[:, None] + sigma[:, None] * np.asarray(targets, dtype=float)[None, :]


@dataclass(frozen=True, eq=False)
class NadarayaWatsonMeasure(TrainedMeasure):
    """Kernel estimate of ``F(y | x)`` with a Gaussian kernel in ``x``.

    ``sigmoid_smoothing`` selects the logistic distribution function for the
    label kernel; otherwise the Heaviside step ``1{u >= 0}`` is used, which
    makes the score only weakly increasing in ``y`` and not balanced.
    """

    X_train: np.ndarray
    y_train: np.ndarray
    bandwidth_x: float
    bandwidth_y: float
    sigmoid_smoothing: bool = True

    @property
    def proper_training_size(self) -> int:
        return self.y_train.size

    def weights(self, X) -> np.ndarray:
        """Normalised kernel weights, one row per object."""
        X = _object_matrix(X)
        if X.shape[1] != self.X_train.shape[1]:
            raise DataError(
                f"expected {self.X_train.shape[1]} features, got {X.shape[1]}")
        with np.errstate(over="ignore", invalid="ignore"):
            d2 = ((X[:, None, :] - self.X_train[None, :, :]) ** 2).sum(axis=2)
            log_w = -0.5 * d2 / self.bandwidth_x ** 2
            # subtracting the row max keeps the largest weight at 1
            w = np.exp(log_w - log_w.max(axis=1, keepdims=True))
        total = w.sum(axis=1, keepdims=True)
        bad = ~np.isfinite(total[:, 0]) | (total[:, 0] <= 0)
        if np.any(bad):
            # kernel mass lost: fall back to the unweighted empirical distribution
            w[bad] = 1.0
            total[bad] = self.y_train.size
        return w / total

    def _label_kernel(self, u):
        if self.sigmoid_smoothing:
            return expit(u)
        return (u >= 0).astype(float)

    def _cdf(self, w_row: np.ndarray, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        u = (y[..., None] - self.y_train) / self.bandwidth_y
        return self._label_kernel(u) @ w_row

    def _cdf_and_density(self, w_row: np.ndarray, y):
        u = (np.asarray(y, dtype=float)[..., None] - self.y_train) / self.bandwidth_y
        k = self._label_kernel(u)
        return k @ w_row, (k * (1.0 - k)) @ w_row / self.bandwidth_y

    def scores(self, X, y):
        W = self.weights(X)
        y = np.broadcast_to(np.asarray(y, dtype=float), (W.shape[0],))
        u = (y[:, None] - self.y_train[None, :]) / self.bandwidth_y
        return np.einsum("ij,ij->i", self._label_kernel(u), W)

    def invert(self, x, target):
        w = self.weights(x)[0]
        target = np.asarray(target, dtype=float)
        if self.sigmoid_smoothing:
            return self._invert_sigmoid(w, target)
        return self._invert_heaviside(w, target)

    def _invert_heaviside(self, w, target):
        order = np.argsort(self.y_train, kind="stable")
        labels = self.y_train[order]
        cum = np.cumsum(w[order])
        cum[-1] = 1.0
        if np.any(target <= 0) or np.any(target > 1):
            raise ScoreNotAttainable("score not attainable")
        idx = np.searchsorted(cum, target, side="left")
        return labels[np.minimum(idx, labels.size - 1)]

    def _invert_sigmoid(self, w, target, max_doublings: int = 60):
        flat = np.atleast_1d(target).ravel()
        # the logistic kernel saturates, so calibration scores of exactly 1.0
        # occur; the supremum here may fall short of them by a few ulps
        eps = np.finfo(float).eps
        top = float(np.ones_like(self.y_train) @ w)
        # summation order differs between code paths, so stay a little below
        near_top = np.abs(flat - top) <= 16 * eps
        flat = np.where(near_top, top - 16 * eps, flat)
        if np.any(flat <= 0) or np.any(flat > top):
            raise ScoreNotAttainable("score not attainable")
        pad = 10 * self.bandwidth_y
        lo = np.full(flat.shape, self.y_train.min() - pad)
        hi = np.full(flat.shape, self.y_train.max() + pad)
        width = hi[0] - lo[0]
        for _ in range(max_doublings):
            low_ok = self._cdf(w, lo) < flat
            high_ok = self._cdf(w, hi) >= flat
            if np.all(low_ok) and np.all(high_ok):
                break
            width *= 2
            lo = np.where(low_ok, lo, lo - width)
            hi = np.where(high_ok, hi, hi + width)
        else:
            raise ScoreNotAttainable("score not attainable")

        # narrow every bracket to one cell of a shared grid
        grid = np.linspace(lo.min(), hi.max(), 257)
        F_grid = np.maximum.accumulate(self._cdf(w, grid))
        idx = np.clip(np.searchsorted(F_grid, flat, side="left"), 1, grid.size - 1)
        lo = np.maximum(lo, grid[idx - 1])
        hi = np.minimum(hi, grid[idx])

        # safeguarded Newton, on log F in the lower half where F decays like exp;
        # F(lo) < target <= F(hi) holds throughout
        step_tol = 4 * eps * max(1.0, float(np.max(np.abs(np.concatenate([lo, hi])))))
        y = 0.5 * (lo + hi)
        active = np.arange(flat.size)
        for _ in range(200):
            t, a_lo, a_hi, a_y = flat[active], lo[active], hi[active], y[active]
            F_y, f_y = self._cdf_and_density(w, a_y)
            above = F_y >= t
            a_hi = np.where(above, a_y, a_hi)
            a_lo = np.where(above, a_lo, a_y)
            lo[active], hi[active] = a_lo, a_hi
            open_ = a_hi - a_lo > 8 * step_tol
            if not np.any(open_):
                break
            with np.errstate(divide="ignore", invalid="ignore"):
                tail = (t < 0.5) & (F_y > 0)
                gap = np.where(tail, (np.log(F_y) - np.log(t)) * F_y, F_y - t)
                newton = a_y - gap / f_y
            # once Newton has converged, step just past the root to close the bracket
            newton = np.where(np.abs(newton - a_y) <= step_tol,
                              np.where(above, newton - step_tol, newton + step_tol), newton)
            good = np.isfinite(newton) & (newton > a_lo) & (newton < a_hi)
            y[active] = np.where(good, newton, 0.5 * (a_lo + a_hi))
            active = active[open_]
        out = hi.reshape(np.shape(target))
        return out[()] if out.ndim == 0 else out


def train_measure(spec: ConformityMeasureSpec, proper_train: Dataset) -> TrainedMeasure:
    """Train a conformity measure on the proper training set."""
    if len(proper_train) == 0:
        raise DataError("proper training set is empty")
    if spec.kind == "nadaraya_watson":
        return NadarayaWatsonMeasure(
            X_train=np.asarray(proper_train.X),
            y_train=np.asarray(proper_train.y),
            bandwidth_x=spec.bandwidth_x,
            bandwidth_y=spec.bandwidth_y,
            sigmoid_smoothing=spec.sigmoid_smoothing,
        )
    model = fit_regressor(spec.regressor, proper_train)
    if spec.kind == "simple":
        return SimpleMeasure(model)
    return NormalizedMeasure(model)


def is_balanced_unbounded(measure: TrainedMeasure, x, huge: float = 1e12,
                          bound: float = 1e6) -> bool:
    """Whether scores at ``x`` escape ``[-bound, bound]`` at ``y = -/+ huge``."""
    X = np.repeat(_object_matrix(x), 2, axis=0)
    lo, hi = measure.scores(X, np.array([-huge, huge]))
    return bool(lo < -bound and hi > bound and math.isfinite(lo) and math.isfinite(hi))
