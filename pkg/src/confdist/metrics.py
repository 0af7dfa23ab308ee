"""Scoring and calibration diagnostics for piecewise-constant predictive CDFs.

Includes the exact CRPS of a step CDF, PIT values and calibration curves,
and the Kolmogorov distance together with its shift-invariant and
shift-and-scale-invariant modifications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import kstest

from .core import Dataset, StepDistribution, TauSource


@dataclass(frozen=True, eq=False)
class StepCDF:
    """Piecewise-constant function on the real line.

    ``levels[0]`` is the value left of ``points[0]``, ``levels[j + 1]`` the
    value on ``(points[j], points[j + 1])``.  ``point_values[j]`` is the value
    at ``points[j]`` itself (right-continuous by default).
    """

    points: np.ndarray
    levels: np.ndarray
    point_values: np.ndarray | None = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).ravel()
        levels = np.asarray(self.levels, dtype=float).ravel()
        if levels.size != points.size + 1:
            raise ValueError("need one more level than points")
        if np.any(np.diff(points) <= 0):
            raise ValueError("points must be strictly increasing")
        pv = levels[1:] if self.point_values is None else np.asarray(self.point_values, dtype=float).ravel()
        if pv.size != points.size:
            raise ValueError("need one point value per point")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "point_values", pv)

    @classmethod
    def from_atoms(cls, locations, weights) -> "StepCDF":
        """Right-continuous CDF of a discrete distribution (weights need not be normalised)."""
        locations = np.asarray(locations, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        points, inverse = np.unique(locations, return_inverse=True)
        mass = np.bincount(inverse, weights=weights, minlength=points.size)
        levels = np.concatenate([[0.0], np.cumsum(mass)])
        return cls(points, levels)

    @classmethod
    def from_distribution(cls, dist: StepDistribution, tau: float | None = None) -> "StepCDF":
        """Crisp CDF (``tau=None``) or the fuzzy CDF at a fixed ``tau``."""
        points, first = np.unique(dist.jumps, return_index=True)
        counts = np.diff(np.append(first, dist.size))
        below = np.concatenate([[0], np.cumsum(counts)])
        if tau is None:
            if dist.denominator < 2:
                raise ValueError("no calibration points")
            levels = below / (dist.denominator - 1)
            return cls(points, levels)
        D = dist.denominator
        levels = (below + tau) / D
        at_points = (below[:-1] + tau * (counts + 1)) / D
        return cls(points, levels, at_points)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        left = np.searchsorted(self.points, u, side="left")
        right = np.searchsorted(self.points, u, side="right")
        on_point = right > left
        value = np.where(on_point,
                         self.point_values[np.minimum(left, max(self.points.size - 1, 0))]
                         if self.points.size else 0.0,
                         self.levels[right])
        return value[()] if value.ndim == 0 else value

    def transformed(self, shift: float = 0.0, scale: float = 1.0) -> "StepCDF":
        """The function ``u -> F((u - shift) / scale)``."""
        if scale <= 0:
            raise ValueError("scale must be positive")
        return StepCDF(shift + scale * self.points, self.levels, self.point_values)


def _as_cdf(F) -> StepCDF:
    if isinstance(F, StepCDF):
        return F
    if isinstance(F, StepDistribution):
        return StepCDF.from_distribution(F)
    raise TypeError(f"expected StepCDF or StepDistribution, got {type(F).__name__}")


def _crps_pieces(points: np.ndarray, levels: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise CRPS of step CDFs with sorted ``points`` (rows) and ``levels``.

    ``int_{-inf}^{y} F^2 + int_{y}^{inf} (1 - F)^2`` where both integrands
    are constant on each piece, clipped at ``y``.
    """
    y = y[:, None]
    with np.errstate(invalid="ignore"):
        return _crps_terms(points, levels, y).sum(axis=1)


def _crps_terms(points, levels, y):
    inf = np.full((points.shape[0], 1), np.inf)
    upper = np.concatenate([points, inf], axis=1)
    lower = np.concatenate([-inf, points], axis=1)
    below = np.minimum(upper, y) - np.minimum(lower, y)
    above = np.maximum(upper, y) - np.maximum(lower, y)
    # pieces that are empty on one side contribute 0 * level, never inf * 0
    below = np.where(below > 0, below, 0.0)
    above = np.where(above > 0, above, 0.0)
    left = np.where(levels > 0, below * levels ** 2, 0.0)
    right = np.where(levels < 1, above * (1.0 - levels) ** 2, 0.0)
    return left + right


def crps_step(F, y_true: float) -> float:
    """Exact CRPS of a piecewise-constant CDF at the outcome ``y_true``.

    A :class:`StepDistribution` is crisped first.  The integrand
    ``(F(y) - 1{y >= y_true})^2`` is constant between consecutive points, so
    the integral is a finite sum.
    """
    F = _as_cdf(F)
    if F.levels[0] != 0 or not math.isclose(F.levels[-1], 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("improper distribution: CDF must run from 0 to 1")
    levels = F.levels.copy()
    levels[-1] = 1.0
    return float(_crps_pieces(F.points[None, :], levels[None, :], np.array([float(y_true)]))[0])


def crps_crisp_rows(jumps, y_true) -> np.ndarray:
    """CRPS of crisp distributions, one row of sorted jumps per outcome."""
    jumps = np.sort(np.atleast_2d(np.asarray(jumps, dtype=float)), axis=1)
    N = jumps.shape[1]
    if N == 0:
        raise ValueError("no calibration points")
    levels = np.broadcast_to(np.arange(N + 1) / N, (jumps.shape[0], N + 1))
    return _crps_pieces(jumps, levels, np.asarray(y_true, dtype=float).ravel())


def pit_values(system, test: Dataset, taus: TauSource | None = None, crisp: bool = False) -> np.ndarray:
    """Predictive CDF at the realised label for each test observation.

    ``system`` needs a vectorised ``q(X, y, tau)`` (and ``q_crisp(X, y)`` when
    ``crisp`` is set); one ``tau`` is drawn per test observation.
    """
    if crisp:
        return np.asarray(system.q_crisp(test.X, test.y), dtype=float)
    taus = taus or TauSource(0)
    return np.asarray(system.q(test.X, test.y, taus.draw(len(test))), dtype=float)


@dataclass(frozen=True, eq=False)
class CalibrationCurve:
    alphas: np.ndarray
    empirical_cdf: np.ndarray

    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.empirical_cdf - self.alphas)))


def calibration_curve(pit, alphas=None) -> CalibrationCurve:
    """Fraction of PIT values not exceeding each level."""
    pit = np.sort(np.asarray(pit, dtype=float).ravel())
    if pit.size == 0:
        raise ValueError("no PIT values")
    alphas = np.linspace(0.01, 0.99, 99) if alphas is None else np.asarray(alphas, dtype=float)
    if np.any(np.diff(alphas) < 0):
        raise ValueError("alphas must be sorted")
    F = np.searchsorted(pit, alphas, side="right") / pit.size
    return CalibrationCurve(alphas, F)


def ks_uniform(pit) -> float:
    """Kolmogorov-Smirnov distance between the PIT sample and U[0, 1]."""
    return float(kstest(np.asarray(pit, dtype=float).ravel(), "uniform").statistic)


def _default_tol(*cdfs: StepCDF) -> float:
    scale = max([1.0] + [float(np.max(np.abs(F.points))) for F in cdfs if F.points.size])
    return 1e-10 * scale


def _sup_distance(F: StepCDF, G: StepCDF, tol: float) -> float:
    """``sup_u |F(u) - G(u)|`` with points closer than ``tol`` treated as one."""
    pts = np.sort(np.concatenate([F.points, G.points]))
    if pts.size == 0:
        return float(abs(F.levels[0] - G.levels[0]))
    # cluster points closer than tol; one representative per cluster
    keep = np.concatenate([[True], np.diff(pts) > tol])
    reps = pts[keep]
    mids = np.concatenate([[reps[0] - 1.0], 0.5 * (reps[:-1] + reps[1:]), [reps[-1] + 1.0]])

    def at(H: StepCDF, u):
        lo = np.searchsorted(H.points, u - tol, side="left")
        hi = np.searchsorted(H.points, u + tol, side="right")
        hit = hi > lo
        idx = np.minimum(lo, max(H.points.size - 1, 0))
        on = H.point_values[idx] if H.points.size else np.zeros_like(u)
        return np.where(hit, on, H.levels[np.searchsorted(H.points, u, side="right")])

    gaps = np.abs(F(mids) - G(mids))
    jumps = np.abs(at(F, reps) - at(G, reps))
    return float(max(gaps.max(), jumps.max()))


def kolmogorov(F, G, tol: float | None = None) -> float:
    """Kolmogorov distance ``sup_u |F(u) - G(u)|``."""
    F, G = _as_cdf(F), _as_cdf(G)
    return _sup_distance(F, G, _default_tol(F, G) if tol is None else tol)


def _shift_candidates(F: StepCDF, G: StepCDF) -> np.ndarray:
    c = np.unique((G.points[:, None] - F.points[None, :]).ravel())
    if c.size == 0:
        return np.array([0.0])
    between = 0.5 * (c[:-1] + c[1:])
    return np.concatenate([c, between, [c[0] - 1.0, c[-1] + 1.0]])


def kolmogorov_shift(F, G, tol: float | None = None) -> tuple[float, float]:
    """``inf_c sup_u |F(u - c) - G(u)|`` and a minimising shift.

    The objective is piecewise constant in ``c`` and only changes where a
    point of the shifted ``F`` meets a point of ``G``, so evaluating at every
    alignment and between consecutive alignments is exact.
    """
    F, G = _as_cdf(F), _as_cdf(G)
    tol = _default_tol(F, G) if tol is None else tol
    best, best_c = math.inf, 0.0
    for c in _shift_candidates(F, G):
        d = _sup_distance(F.transformed(shift=c), G, tol)
        if d < best:
            best, best_c = d, float(c)
            if best == 0.0:
                break
    return best, best_c


def kolmogorov_shift_scale(F, G, tol: float | None = None) -> tuple[float, float, float]:
    """``inf_{c, s > 0} sup_u |F((u - c) / s) - G(u)|`` (approximate).

    Candidates align the smallest and largest points of ``F`` with a pair of
    points of ``G``; the best few are refined by Nelder-Mead on
    ``(c, log s)``.  The shift-only optimum is included, so the result never
    exceeds :func:`kolmogorov_shift`.
    """
    F, G = _as_cdf(F), _as_cdf(G)
    tol = _default_tol(F, G) if tol is None else tol
    best, best_c = kolmogorov_shift(F, G, tol)
    best_s = 1.0
    if best == 0.0 or F.points.size < 2 or G.points.size < 1:
        return best, best_c, best_s

    def objective(c, s):
        return _sup_distance(F.transformed(shift=c, scale=s), G, tol)

    f_lo, f_hi = F.points[0], F.points[-1]
    g = G.points
    trials = []
    for a in range(g.size):
        for b in range(a + 1, g.size):
            s = (g[b] - g[a]) / (f_hi - f_lo)
            c = g[a] - s * f_lo
            d = objective(c, s)
            trials.append((d, c, s))
            if d == 0.0:
                return 0.0, float(c), float(s)
    trials.sort(key=lambda t: t[0])
    for d, c, s in trials[:5]:
        if d < best:
            best, best_c, best_s = d, float(c), float(s)
        res = minimize(lambda p: objective(p[0], math.exp(p[1])), [c, math.log(s)],
                       method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
        if res.fun < best:
            best, best_c, best_s = float(res.fun), float(res.x[0]), float(math.exp(res.x[1]))
    return best, best_c, best_s
