import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confdist.core import Dataset, DataError
from confdist.regressors import RegressorSpec, fit


def data(xs, ys):
    return Dataset(np.asarray(xs, dtype=float).reshape(len(xs), -1), np.asarray(ys, dtype=float))


def test_least_squares_interpolates_two_points():
    model = fit(RegressorSpec("least_squares"), data([0, 1], [0, 1]))
    assert model.predict(np.array([0.5])) == pytest.approx(0.5)


def test_knn_one_neighbour():
    model = fit(RegressorSpec("knn", knn_k=1), data([0, 10], [0, 5]))
    assert model.predict(np.array([1.0])) == 0.0


def test_ridge_without_intercept_closed_form():
    model = fit(RegressorSpec("ridge", ridge_lambda=1.0, fit_intercept=False), data([1], [1]))
    assert model.predict(np.array([1.0])) == pytest.approx(0.5)


def test_ridge_matches_normal_equations(rng):
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    lam = 2.5
    model = fit(RegressorSpec("ridge", ridge_lambda=lam), Dataset(X, y))
    Xc, yc = X - X.mean(0), y - y.mean()
    w = np.linalg.solve(Xc.T @ Xc + lam * np.eye(3), Xc.T @ yc)
    x = rng.normal(size=3)
    expected = y.mean() + (x - X.mean(0)) @ w
    assert model.predict(x) == pytest.approx(expected, rel=1e-10)


def test_singular_system_uses_minimum_norm():
    # duplicated column: any split of the weight fits, minimum norm splits evenly
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    model = fit(RegressorSpec("least_squares"), Dataset(X, np.array([0.0, 2.0, 4.0])))
    assert model.weights == pytest.approx([1.0, 1.0])
    assert model.predict(np.array([3.0, 3.0])) == pytest.approx(6.0)


def test_knn_scale_is_mean_absolute_deviation():
    model = fit(RegressorSpec("knn", knn_k=2), data([0, 1], [0, 2]))
    assert model.predict_with_scale(np.array([0.5])) == pytest.approx((1.0, 1.0))


def test_perfect_fit_scale_is_floored():
    model = fit(RegressorSpec("least_squares"), data([0, 1, 2], [0, 1, 2]))
    _, sigma = model.predict_with_scale(np.array([5.0]))
    assert sigma == pytest.approx(1e-8 * 2)


def test_residuals_plus_minus_one_scale_one():
    # constant design: fitted mean 0, residuals -1 and +1
    model = fit(RegressorSpec("least_squares"), data([0, 0], [-1, 1]))
    assert model.predict_with_scale(np.array([0.0]))[1] == pytest.approx(1.0)


def test_knn_ties_broken_by_index():
    model = fit(RegressorSpec("knn", knn_k=1), data([-1, 1], [10, 20]))
    assert model.predict(np.array([0.0])) == 10.0


def test_errors():
    with pytest.raises(DataError):
        fit(RegressorSpec("least_squares"), Dataset(np.zeros((0, 1)), np.zeros(0)))
    with pytest.raises(DataError):
        fit(RegressorSpec("knn", knn_k=3), data([0, 1], [0, 1]))
    model = fit(RegressorSpec("least_squares"), data([0, 1], [0, 1]))
    with pytest.raises(DataError):
        model.predict(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        RegressorSpec("forest")


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 4), st.integers(0, 2**31))
def test_predictions_are_finite_and_scales_positive(n, d, seed):
    rng = np.random.default_rng(seed)
    train = Dataset(rng.normal(size=(n, d)), rng.normal(size=n))
    for spec in (RegressorSpec("least_squares"), RegressorSpec("ridge", ridge_lambda=0.1),
                 RegressorSpec("knn", knn_k=min(3, n))):
        mu, sigma = fit(spec, train).predict_with_scale_many(rng.normal(size=(5, d)))
        assert np.all(np.isfinite(mu)) and np.all(sigma > 0)
