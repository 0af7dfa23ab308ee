"""Underlying point predictors: least squares, ridge and k-nearest neighbours.

Each fitted model predicts a label and, for the normalized conformity
measure, a positive scale estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, DataError

KINDS = ("least_squares", "ridge", "knn")


@dataclass(frozen=True)
class RegressorSpec:
    kind: str = "least_squares"
    ridge_lambda: float = 0.0
    knn_k: int = 5
    fit_intercept: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regressor kind {self.kind!r}")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be nonnegative")
        if self.knn_k < 1:
            raise ValueError("knn_k must be at least 1")


def _scale_floor(y: np.ndarray) -> float:
    spread = float(np.ptp(y)) if y.size else 0.0
    return 1e-8 * (spread if spread > 0 else 1.0)


@dataclass(frozen=True, eq=False)
class FittedRegressor:
    """Immutable fitted model.

    For the linear kinds ``weights`` and ``intercept`` hold the solution and
    ``scale`` the in-sample residual standard deviation.  For k-NN the
    training data itself is kept.
    """

    spec: RegressorSpec
    training_size: int
    feature_dim: int
    scale_floor: float
    weights: np.ndarray | None = None
    intercept: float = 0.0
    scale: float = 1.0
    X_train: np.ndarray | None = None
    y_train: np.ndarray | None = None

    def _as_matrix(self, X) -> tuple[np.ndarray, bool]:
        X = np.asarray(X, dtype=float)
        single = X.ndim <= 1
        if single:
            X = X.reshape(1, -1)
        if X.shape[1] != self.feature_dim:
            raise DataError(
                f"expected {self.feature_dim} features, got {X.shape[1]}")
        return X, single

    def _neighbours(self, X: np.ndarray) -> np.ndarray:
        d2 = ((X[:, None, :] - self.X_train[None, :, :]) ** 2).sum(axis=2)
        # stable sort keeps the lower training index first among ties
        order = np.argsort(d2, axis=1, kind="stable")
        return order[:, : self.spec.knn_k]

    def predict_many(self, X) -> np.ndarray:
        X, _ = self._as_matrix(X)
        if self.spec.kind == "knn":
            return self.y_train[self._neighbours(X)].mean(axis=1)
        return X @ self.weights + self.intercept

    def predict_with_scale_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        X, _ = self._as_matrix(X)
        if self.spec.kind == "knn":
            labels = self.y_train[self._neighbours(X)]
            y_hat = labels.mean(axis=1)
            sigma = np.abs(labels - y_hat[:, None]).mean(axis=1)
        else:
            y_hat = X @ self.weights + self.intercept
            sigma = np.full(X.shape[0], self.scale)
        return y_hat, np.maximum(sigma, self.scale_floor)

    def predict(self, x) -> float:
        X, single = self._as_matrix(x)
        if not single or X.shape[0] != 1:
            raise DataError("predict expects a single object; use predict_many")
        return float(self.predict_many(X)[0])

    def predict_with_scale(self, x) -> tuple[float, float]:
        X, single = self._as_matrix(x)
        if not single or X.shape[0] != 1:
            raise DataError("expects a single object")
        y_hat, sigma = self.predict_with_scale_many(X)
        return float(y_hat[0]), float(sigma[0])


def _solve_linear(X: np.ndarray, y: np.ndarray, lam: float, intercept: bool):
    if intercept:
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc, yc = X - x_mean, y - y_mean
    else:
        Xc, yc = X, y
    if lam > 0:
        d = X.shape[1]
        w = np.linalg.solve(Xc.T @ Xc + lam * np.eye(d), Xc.T @ yc)
    else:
        # SVD-based least squares gives the minimum-norm solution when rank deficient
        w = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    b = float(y_mean - x_mean @ w) if intercept else 0.0
    return w, b


def fit(spec: RegressorSpec, train: Dataset) -> FittedRegressor:
    """Fit the regressor described by ``spec`` on ``train``."""
    if len(train) == 0:
        raise DataError("cannot fit on an empty training set")
    X, y = np.asarray(train.X), np.asarray(train.y)
    floor = _scale_floor(y)
    common = dict(spec=spec, training_size=len(train),
                  feature_dim=train.feature_dim, scale_floor=floor)
    if spec.kind == "knn":
        if spec.knn_k > len(train):
            raise DataError(
                f"knn_k={spec.knn_k} exceeds training size {len(train)}")
        return FittedRegressor(X_train=X, y_train=y, **common)
    lam = spec.ridge_lambda if spec.kind == "ridge" else 0.0
    w, b = _solve_linear(X, y, lam, spec.fit_intercept)
    residuals = y - (X @ w + b)
    scale = max(float(np.sqrt(np.mean(residuals ** 2))), floor)
    return FittedRegressor(weights=w, intercept=b, scale=scale, **common)
