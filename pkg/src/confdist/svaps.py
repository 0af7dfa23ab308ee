"""Split Venn-Abers predictive systems (types 1, 2 and 3).

For a candidate label ``y`` the labels are binarised as ``y*_i = 1{y_i > y}``
and an isotonic regression of ``y*`` on the regressor outputs ``s_i`` is fit
by pool-adjacent-violators.  The predictive value is one minus the fraction
of calibration points that share the test object's isotonic level and have
``y*_i = 1``, with ``tau`` in ``{0, 1}`` giving the lower and upper curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset, DataError
from .regressors import RegressorSpec, fit as fit_regressor
from .scps import split_index


@dataclass(frozen=True, eq=False)
class IsotonicFit:
    """Nondecreasing step function produced by :func:`pava`.

    ``breakpoints`` are the distinct inputs, ``levels`` the fitted values at
    them and ``block_ids`` the index of the pooled block each belongs to.
    Between breakpoints the function takes the value of the breakpoint on the
    left (and the first level below the first breakpoint).
    """

    breakpoints: np.ndarray
    levels: np.ndarray
    block_ids: np.ndarray

    def _index(self, t):
        idx = np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.breakpoints.size - 1)

    def __call__(self, t):
        return self.levels[self._index(t)]

    def block_of(self, t):
        return self.block_ids[self._index(t)]


def pava(s, targets, weights=None) -> IsotonicFit:
    """Weighted isotonic least squares by pool-adjacent-violators.

    Points with equal ``s`` are merged first (weighted mean of targets), so
    the fit is a function of ``s``.
    """
    s = np.asarray(s, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    if s.size == 0 or s.size != targets.size:
        raise ValueError("need equally many (nonzero) inputs and targets")
    weights = np.ones_like(s) if weights is None else np.asarray(weights, dtype=float).ravel()
    if weights.size != s.size or np.any(weights <= 0):
        raise ValueError("weights must be positive, one per point")

    order = np.argsort(s, kind="stable")
    s, targets, weights = s[order], targets[order], weights[order]
    breakpoints, first = np.unique(s, return_index=True)
    w = np.add.reduceat(weights, first)
    wy = np.add.reduceat(weights * targets, first)

    # each block: [sum of w*y, sum of w, number of breakpoints]
    blocks: list[list[float]] = []
    for j in range(breakpoints.size):
        blocks.append([wy[j], w[j], 1])
        while len(blocks) > 1 and blocks[-2][0] / blocks[-2][1] >= blocks[-1][0] / blocks[-1][1]:
            top = blocks.pop()
            blocks[-1][0] += top[0]
            blocks[-1][1] += top[1]
            blocks[-1][2] += top[2]

    sizes = np.array([b[2] for b in blocks], dtype=int)
    means = np.array([b[0] / b[1] for b in blocks])
    return IsotonicFit(breakpoints, np.repeat(means, sizes),
                       np.repeat(np.arange(len(blocks)), sizes))


@dataclass(frozen=True)
class SvapsConfig:
    type: int = 1
    regressor: RegressorSpec = field(default_factory=RegressorSpec)
    split: float | int = 0.5

    def __post_init__(self):
        if self.type not in (1, 2, 3):
            raise ValueError("SVAPS type must be 1, 2 or 3")


@dataclass(frozen=True, eq=False)
class SvapsModel:
    """Regressor outputs on the proper training and calibration parts."""

    config: SvapsConfig
    score: Callable[[np.ndarray], np.ndarray]
    s_proper: np.ndarray
    y_proper: np.ndarray
    s_cal: np.ndarray
    y_cal: np.ndarray

    def __post_init__(self):
        if self.s_cal.size == 0:
            raise DataError("calibration set is empty")
        if self.config.type == 2:
            object.__setattr__(self, "_nn_cal", self._nearest_proper(self.s_cal))

    def _nearest_proper(self, t) -> np.ndarray:
        # argmin returns the first (smallest j) among ties
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.argmin(np.abs(t[:, None] - self.s_proper[None, :]), axis=1)

    def _same_level(self, y: float, tau: int, s: float) -> np.ndarray:
        kind = self.config.type
        if kind == 2:
            fit = pava(self.s_proper, (self.y_proper > y).astype(float))
            own = fit.block_ids[np.searchsorted(fit.breakpoints, self.s_proper[self._nearest_proper(s)])]
            cal = fit.block_ids[np.searchsorted(fit.breakpoints, self.s_proper[self._nn_cal])]
            return cal == own[0]
        if kind == 1:
            xs, ys = self.s_cal, (self.y_cal > y).astype(float)
        else:
            xs = np.concatenate([self.s_proper, self.s_cal])
            ys = (np.concatenate([self.y_proper, self.y_cal]) > y).astype(float)
        fit = pava(np.append(xs, s), np.append(ys, float(tau)))
        return fit.block_of(self.s_cal) == fit.block_of(s)

    def q(self, x, y: float, tau: int) -> float:
        if tau not in (0, 1):
            raise ValueError("tau must be 0 or 1")
        s = float(np.asarray(self.score(np.atleast_2d(np.asarray(x, dtype=float)))).ravel()[0])
        same = self._same_level(y, tau, s)
        exceed = self.y_cal > y
        return 1.0 - (np.count_nonzero(same & exceed) + tau) / (np.count_nonzero(same) + 1)


def fit_svaps(config: SvapsConfig, train: Dataset,
              score: Callable[[np.ndarray], np.ndarray] | None = None) -> SvapsModel:
    """Compute regressor outputs for a split Venn-Abers predictive system.

    ``score`` replaces the fitted regressor when given (a function of the
    object matrix); otherwise ``config.regressor`` is trained on the proper
    training part.
    """
    m = split_index(len(train), config.split)
    proper, cal = train[:m], train[m:]
    if score is None:
        score = fit_regressor(config.regressor, proper).predict_many
    s_proper = np.asarray(score(proper.X), dtype=float).ravel()
    s_cal = np.asarray(score(cal.X), dtype=float).ravel()
    return SvapsModel(config, score, s_proper, np.asarray(proper.y), s_cal, np.asarray(cal.y))


def svaps_q(config: SvapsConfig, train: Dataset, x, y: float, tau: int,
            score: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    return fit_svaps(config, train, score).q(x, y, tau)


def svaps_band(model: SvapsModel, x, y_grid) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper curves over a sorted grid.

    Adding ``(s, 1)`` to the isotonic fit can only raise the estimated
    exceedance probability, so ``q(., 1)`` is the lower curve and ``q(., 0)``
    the upper one.  For type 1 the lower curve tends to 0 as ``y -> -inf``
    and the upper curve to 1 as ``y -> +inf``.
    """
    y_grid = np.asarray(y_grid, dtype=float)
    if np.any(np.diff(y_grid) < 0):
        raise ValueError("y_grid must be sorted")
    lower = np.array([model.q(x, y, 1) for y in y_grid])
    upper = np.array([model.q(x, y, 0) for y in y_grid])
    return lower, upper


EXAMPLE1_SUPPORT = (-1.0, 0.0, 1.0)


def example1_sample(n: int, rng: np.random.Generator) -> Dataset:
    """``x`` uniform on {0, 1}; ``y = 0`` given ``x = 0``, ``y = +/-1`` given ``x = 1``."""
    x = rng.integers(0, 2, size=n)
    signs = rng.choice([-1.0, 1.0], size=n)
    y = np.where(x == 1, signs, 0.0)
    return Dataset(x.reshape(-1, 1).astype(float), y)


def example1_asymptotics(n_calibration: int, a0: float, a1: float, seed: int = 0,
                         svaps_type: int = 1) -> dict[int, np.ndarray]:
    """Atom weights on (-1, 0, 1) of the predictive distribution for x = 0 and x = 1.

    The regressor is constant per class (``a0`` for ``x = 0``, ``a1`` for
    ``x = 1``).  Weights are read off the midpoint of the lower and upper
    curves, which differ only by ``O(1 / n_calibration)``.
    """
    if n_calibration < 100:
        raise ValueError("n_calibration must be at least 100")
    rng = np.random.default_rng(seed)
    data = example1_sample(2 * n_calibration, rng)

    def score(X):
        return np.where(np.asarray(X)[:, 0] == 1, a1, a0)

    model = fit_svaps(SvapsConfig(type=svaps_type, split=n_calibration), data, score)
    probes = np.array([-1.5, -0.5, 0.5, 1.5])
    out = {}
    for x in (0, 1):
        lower, upper = svaps_band(model, np.array([float(x)]), probes)
        cdf = 0.5 * (lower + upper)
        out[x] = np.diff(cdf)
    return out
