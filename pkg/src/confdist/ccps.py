"""Cross-conformal predictive systems.

The training sequence is cut into ``K`` contiguous folds.  For each fold a
conformity measure is trained on the complement and used to score the fold,
so every training observation serves as a calibration point exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conformity import ConformityMeasureSpec, TrainedMeasure, train_measure
from .core import Dataset, DataError, ScoreNotAttainable, StepDistribution, _check_tau, transducer_value


def _as_objects(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.reshape(1, -1) if X.ndim <= 1 else X


def make_folds(n: int, K: int) -> list[np.ndarray]:
    """Contiguous fold index arrays (0-based).

    Fold ``k`` (1-based) holds positions ``ceil((k-1) n / K) + 1`` through
    ``ceil(k n / K)``, so earlier folds are the larger ones when ``K`` does
    not divide ``n``.
    """
    if not 2 <= K <= n:
        raise ValueError(f"need 2 <= K <= n, got K={K}, n={n}")
    bounds = [-(-k * n // K) for k in range(K + 1)]
    return [np.arange(bounds[k], bounds[k + 1]) for k in range(K)]


@dataclass(frozen=True, eq=False)
class CcpsModel:
    """A fitted cross-conformal predictive system.

    ``measures[k]`` is trained on every observation outside ``folds[k]``;
    ``fold_scores[k]`` are the scores it assigns to the observations of
    ``folds[k]`` (in fold order).
    """

    measures: tuple[TrainedMeasure, ...]
    folds: tuple[np.ndarray, ...]
    fold_scores: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not len(self.measures) == len(self.folds) == len(self.fold_scores):
            raise ValueError("measures, folds and scores must align")
        for fold, scores in zip(self.folds, self.fold_scores):
            if len(fold) == 0 or len(fold) != len(scores):
                raise DataError("each fold needs one score per observation")
        object.__setattr__(self, "_sorted", tuple(np.sort(s) for s in self.fold_scores))

    @property
    def n(self) -> int:
        return sum(len(f) for f in self.folds)

    @property
    def K(self) -> int:
        return len(self.folds)

    def fold_counts(self, k: int, X, y):
        """Strict and tied counts of fold ``k`` scores against the test scores."""
        alpha_y = self.measures[k].scores(_as_objects(X), y)
        strict = np.searchsorted(self._sorted[k], alpha_y, side="left")
        at_most = np.searchsorted(self._sorted[k], alpha_y, side="right")
        return strict, at_most - strict

    def _total_counts(self, X, y):
        strict = 0
        ties = 0
        for k in range(self.K):
            s, t = self.fold_counts(k, X, y)
            strict = strict + s
            ties = ties + t
        return strict, ties

    def q(self, X, y, tau):
        tau = _check_tau(tau)
        strict, ties = self._total_counts(X, y)
        return transducer_value(strict, ties, tau, self.n + 1)

    def q_crisp(self, X, y):
        strict, ties = self._total_counts(X, y)
        return (strict + ties) / self.n

    def fold_p(self, k: int, X, y, tau):
        tau = _check_tau(tau)
        strict, ties = self.fold_counts(k, X, y)
        return transducer_value(strict, ties, tau, len(self.folds[k]) + 1)

    def predict(self, x) -> StepDistribution:
        return predict_ccps(self, x)


def fit_ccps(train: Dataset, K: int, spec: ConformityMeasureSpec | None = None) -> CcpsModel:
    """Train one measure per fold complement and score each fold."""
    spec = spec or ConformityMeasureSpec()
    n = len(train)
    folds = make_folds(n, K)
    measures, scores = [], []
    for fold in folds:
        rest = np.setdiff1d(np.arange(n), fold, assume_unique=True)
        measure = train_measure(spec, train[rest])
        held_out = train[fold]
        measures.append(measure)
        scores.append(np.asarray(measure.scores(held_out.X, held_out.y), dtype=float))
    return CcpsModel(tuple(measures), tuple(folds), tuple(scores))


def predict_ccps(model: CcpsModel, x) -> StepDistribution:
    """Pool the inverted fold scores into one distribution with ``D = n + 1``."""
    x = _as_objects(x)[0]
    try:
        jumps = np.concatenate([
            np.atleast_1d(measure.invert(x, scores))
            for measure, scores in zip(model.measures, model.fold_scores)
        ])
    except ScoreNotAttainable as exc:
        raise ScoreNotAttainable(
            f"{exc}; evaluate the transducer directly with ccps_q") from exc
    return StepDistribution(jumps, model.n + 1)


def predict_jumps(model: CcpsModel, X) -> np.ndarray:
    """Unsorted pooled jump points for many test objects, one row each."""
    X = _as_objects(X)
    return np.hstack([measure.invert_many(X, scores)
                      for measure, scores in zip(model.measures, model.fold_scores)])


def ccps_q(model: CcpsModel, x, y: float, tau: float) -> float:
    return float(model.q(_as_objects(x), np.array([y], dtype=float), tau)[0])


def ccps_q_crisp(model: CcpsModel, x, y: float) -> float:
    return float(model.q_crisp(_as_objects(x), np.array([y], dtype=float))[0])


def fold_p_value(model: CcpsModel, k: int, x, y: float, tau: float) -> float:
    """Per-fold p-value for fold ``k`` (0-based)."""
    if not 0 <= k < model.K:
        raise IndexError(f"fold index {k} out of range for K={model.K}")
    return float(model.fold_p(k, _as_objects(x), np.array([y], dtype=float), tau)[0])


def recombine_identity_check(model: CcpsModel, x, y: float, tau: float) -> float:
    """Residual of writing the pooled p-value through the per-fold p-values.

    Returns ``p - (sum_k (|S_k| + 1) / (n + 1) p_k - (K - 1) / (n + 1) tau)``,
    which is zero up to rounding.
    """
    n, K = model.n, model.K
    p = ccps_q(model, x, y, tau)
    combined = sum((len(model.folds[k]) + 1) / (n + 1) * fold_p_value(model, k, x, y, tau)
                   for k in range(K))
    return p - (combined - (K - 1) / (n + 1) * tau)


def crisp_rewrite(model: CcpsModel, x, y: float) -> float:
    """Crisp value as the fold-size weighted mean of per-fold fractions."""
    X, yy = _as_objects(x), np.array([y], dtype=float)
    total = 0.0
    for k in range(model.K):
        strict, ties = model.fold_counts(k, X, yy)
        size = len(model.folds[k])
        total += size / model.n * float((strict + ties)[0]) / size
    return total


def conservative_p(p):
    """Doubled p-value, clipped to 1: valid though possibly conservative."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    out = np.minimum(2 * p, 1.0)
    return float(out) if out.ndim == 0 else out
