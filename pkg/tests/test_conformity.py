import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confdist.conformity import (
    ConformityMeasureSpec,
    NadarayaWatsonMeasure,
    TrainedMeasure,
    is_balanced_unbounded,
    train_measure,
)
from confdist.core import Dataset, ScoreNotAttainable
from confdist.regressors import RegressorSpec

LS = RegressorSpec("least_squares")


class NegatedLabel(TrainedMeasure):
    """Conformity measure ``A := -y``: decreasing in the label."""

    def scores(self, X, y):
        return -np.broadcast_to(np.asarray(y, dtype=float), (np.atleast_2d(X).shape[0],))

    def invert(self, x, target):
        return -np.asarray(target, dtype=float)


def const_data(ys, x=0.0):
    return Dataset(np.full((len(ys), 1), x), np.asarray(ys, dtype=float))


def test_simple_on_interpolating_fit():
    m = train_measure(ConformityMeasureSpec("simple", LS), Dataset(np.array([[0.0], [1.0]]), np.array([1.0, 3.0])))
    assert m.score(np.array([2.0]), 10.0) == pytest.approx(10.0 - 5.0)


def test_simple_and_normalized_values():
    # constant labels mean 3, residuals -2 and 2 -> sigma 2
    proper = const_data([1.0, 5.0])
    simple = train_measure(ConformityMeasureSpec("simple", LS), proper)
    norm = train_measure(ConformityMeasureSpec("normalized", LS), proper)
    assert simple.score(np.array([0.0]), 5.0) == pytest.approx(2.0)
    assert norm.score(np.array([0.0]), 5.0) == pytest.approx(1.0)
    assert simple.invert(np.array([0.0]), 2.0) == pytest.approx(5.0)
    assert norm.invert(np.array([0.0]), 1.0) == pytest.approx(5.0)


def test_normalized_floor_on_perfect_fit():
    proper = Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 2.0, 4.0]))
    m = train_measure(ConformityMeasureSpec("normalized", LS), proper)
    assert m.score(np.array([1.0]), 3.0) == pytest.approx(1.0 / (1e-8 * 4))


def test_nw_heaviside_score_and_inverse():
    proper = const_data([0.0, 1.0])
    for h in (0.1, 1.0, 7.0):
        m = train_measure(ConformityMeasureSpec("nadaraya_watson", bandwidth_x=h, bandwidth_y=h,
                                                sigmoid_smoothing=False), proper)
        assert m.score(np.array([0.0]), 0.5) == pytest.approx(0.5)
        assert m.invert(np.array([0.0]), 0.5) == 0.0
    with pytest.raises(ScoreNotAttainable, match="score not attainable"):
        m.invert(np.array([0.0]), 0.0)


def test_nw_sigmoid_inverse_round_trip(rng):
    proper = Dataset(rng.normal(size=(20, 2)), rng.normal(size=20))
    m = train_measure(ConformityMeasureSpec("nadaraya_watson", bandwidth_x=0.7, bandwidth_y=0.3), proper)
    x = rng.normal(size=2)
    targets = np.array([1e-6, 0.2, 0.5, 0.9, 1 - 1e-6])
    ys = m.invert(x, targets)
    X = np.repeat(x[None, :], targets.size, axis=0)
    assert m.scores(X, ys) == pytest.approx(targets, abs=1e-9)
    # a saturated score of exactly 1.0 is reached at a finite label
    top = m.invert(x, 1.0)
    assert np.isfinite(top) and m.scores(x[None], np.array([top]))[0] >= 1 - 1e-14
    for bad in (0.0, 1.5):
        with pytest.raises(ScoreNotAttainable):
            m.invert(x, bad)


def test_nw_weights_underflow_fall_back_to_uniform():
    proper = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
    m = NadarayaWatsonMeasure(np.asarray(proper.X), np.asarray(proper.y), 1e-300, 1.0, False)
    w = m.weights(np.array([[1e300]]))
    assert np.all(np.isfinite(w)) and w.sum() == pytest.approx(1.0)


def test_nw_far_object_equal_kernel_mass_still_normalised():
    # all kernel values underflow in plain arithmetic, log-space keeps the nearest
    m = NadarayaWatsonMeasure(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), 0.01, 1.0, False)
    w = m.weights(np.array([[100.0]]))
    assert w[0] == pytest.approx([0.0, 1.0])


def test_isotonic_checks(rng):
    grid = np.linspace(-5, 5, 101)
    proper = Dataset(rng.normal(size=(15, 1)), rng.normal(size=15))
    x = np.array([0.3])
    assert train_measure(ConformityMeasureSpec("simple", LS), proper).check_isotonic(x, grid)
    assert train_measure(ConformityMeasureSpec("nadaraya_watson"), proper).check_isotonic(x, grid)
    assert not NegatedLabel().check_isotonic(x, grid)


def test_balanced():
    proper = const_data([0.0, 1.0, 3.0])
    x = np.array([0.0])
    assert is_balanced_unbounded(train_measure(ConformityMeasureSpec("simple", LS), proper), x)
    nw = train_measure(ConformityMeasureSpec("nadaraya_watson"), proper)
    assert not is_balanced_unbounded(nw, x)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["simple", "normalized"]), st.integers(0, 2**31))
def test_inverse_is_exact_for_linear_measures(kind, seed):
    rng = np.random.default_rng(seed)
    proper = Dataset(rng.normal(size=(10, 2)), rng.normal(size=10))
    m = train_measure(ConformityMeasureSpec(kind, LS), proper)
    X = rng.normal(size=(4, 2))
    targets = rng.normal(size=6)
    ys = m.invert_many(X, targets)
    for row, x in enumerate(X):
        back = m.scores(np.repeat(x[None], 6, axis=0), ys[row])
        assert back == pytest.approx(targets, rel=1e-9, abs=1e-9)
        assert ys[row] == pytest.approx(m.invert(x, targets), rel=1e-12, abs=1e-12)


def test_nw_sigmoid_saturated_scores_invert(rng):
    # scores a hair above 1 arise from rounding once the kernel saturates
    proper = Dataset(rng.normal(size=(30, 2)), rng.normal(size=30) * 3)
    m = train_measure(ConformityMeasureSpec("nadaraya_watson", bandwidth_y=0.05), proper)
    x = rng.normal(size=2)
    ys = m.invert(x, np.array([np.nextafter(1.0, 2.0), 1.0, 1e-200]))
    assert np.all(np.isfinite(ys)) and ys[0] == ys[1] and ys[2] < ys[1]
