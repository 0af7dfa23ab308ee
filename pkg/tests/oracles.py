"""Independent reference computations used by the tests.

Nothing here imports the implementation except plain data containers.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.integrate import quad


def transducer_by_count(cal_scores, test_score, tau):
    """Split transducer evaluated by literally counting calibration scores."""
    lower = sum(1 for a in cal_scores if a < test_score)
    equal = sum(1 for a in cal_scores if a == test_score)
    return (lower + tau * equal + tau) / (len(cal_scores) + 1)


def step_cdf_value(points, masses, u):
    """Right-continuous CDF of atoms ``masses`` at ``points`` (unsorted ok)."""
    return float(sum(m for p, m in zip(points, masses) if p <= u))


def crps_quadrature(points, masses, y):
    """CRPS by adaptive quadrature of ``(F(u) - 1{u >= y})^2``."""
    pts = sorted(set(float(p) for p in points) | {float(y)})
    lo, hi = pts[0] - 1.0, pts[-1] + 1.0

    def integrand(u):
        return (step_cdf_value(points, masses, u) - (1.0 if u >= y else 0.0)) ** 2

    total = 0.0
    # integrate piece by piece so every discontinuity is an endpoint
    edges = [lo] + pts + [hi]
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            val, _ = quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
            total += val
    return total


def crps_energy(points, y):
    """CRPS of the empirical distribution of ``points`` via its energy form."""
    c = np.asarray(points, dtype=float)
    n = c.size
    return float(np.mean(np.abs(c - y)) - np.abs(c[:, None] - c[None, :]).sum() / (2 * n * n))


def isotonic_brute_force(s, targets, weights=None):
    """Weighted isotonic least squares by enumerating contiguous block partitions.

    Returns fitted values at each input, in input order.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(targets, dtype=float)
    w = np.ones_like(s) if weights is None else np.asarray(weights, dtype=float)
    distinct = sorted(set(s.tolist()))
    groups = [np.flatnonzero(s == v) for v in distinct]
    gw = np.array([w[g].sum() for g in groups])
    gy = np.array([(w[g] * t[g]).sum() for g in groups])
    k = len(distinct)
    best, best_fit = np.inf, None
    for cuts in itertools.product((False, True), repeat=k - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [k]
        means = [gy[a:b].sum() / gw[a:b].sum() for a, b in zip(bounds[:-1], bounds[1:])]
        if any(m2 < m1 for m1, m2 in zip(means[:-1], means[1:])):
            continue
        fit = np.concatenate([[m] * (b - a) for m, a, b in zip(means, bounds[:-1], bounds[1:])])
        sse = 0.0
        for gi, g in enumerate(groups):
            sse += float((w[g] * (t[g] - fit[gi]) ** 2).sum())
        if sse < best - 1e-15:
            best, best_fit = sse, fit
    out = np.empty_like(s)
    for gi, g in enumerate(groups):
        out[g] = best_fit[gi]
    return out


def sup_distance_grid(F, G, points):
    """``sup |F - G|`` over the given points and the midpoints/ends around them."""
    pts = np.unique(np.asarray(points, dtype=float))
    probes = np.concatenate([pts, 0.5 * (pts[:-1] + pts[1:]), [pts[0] - 1, pts[-1] + 1]])
    return float(max(abs(F(u) - G(u)) for u in probes))
