import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confdist.conformity import ConformityMeasureSpec, train_measure
from confdist.core import Dataset, DataError, ScoreNotAttainable, eval_crisp, eval_fuzzy
from confdist.regressors import RegressorSpec
from confdist.scps import (
    IdealConformalPredictor,
    ScpsModel,
    fit_scps,
    predict_jumps,
    predict_scps,
    scps_q,
    scps_q_crisp,
    split_index,
)
from oracles import transducer_by_count

LS = RegressorSpec("least_squares")
SIMPLE = ConformityMeasureSpec("simple", LS)


def const_data(ys):
    return Dataset(np.zeros((len(ys), 1)), np.asarray(ys, dtype=float))


def constant_model(y_hat, scores, kind="simple", spread=None):
    # proper labels chosen so the least-squares fit is the constant y_hat
    ys = [y_hat, y_hat] if spread is None else [y_hat - spread, y_hat + spread]
    measure = train_measure(ConformityMeasureSpec(kind, LS), const_data(ys))
    return ScpsModel(measure, np.asarray(scores, dtype=float))


class TestFit:
    def test_split_fraction(self):
        model = fit_scps(const_data([0, 1, 2, 3]), 0.5, SIMPLE)
        assert split_index(4, 0.5) == 2 and model.calibration_size == 2

    def test_minimal_split(self):
        assert fit_scps(const_data([0, 1]), 1, SIMPLE).calibration_size == 1

    def test_calibration_scores(self):
        # proper part predicts 1 everywhere; calibration labels 0 and 2
        model = fit_scps(const_data([1, 1, 0, 2]), 2, SIMPLE)
        assert sorted(model.calibration_scores) == [-1.0, 1.0]

    @pytest.mark.parametrize("split", [0, 4, 0.1])
    def test_bad_split(self, split):
        with pytest.raises(DataError):
            fit_scps(const_data([0, 1, 2, 3]), split, SIMPLE)

    def test_proper_training_is_the_prefix(self):
        data = Dataset(np.arange(6.0).reshape(-1, 1), np.array([0, 1, 2, 100, 200, 300.0]))
        model = fit_scps(data, 3, SIMPLE)
        assert model.measure.regressor.predict(np.array([1.0])) == pytest.approx(1.0)


class TestPredict:
    def test_jumps_simple(self):
        dist = predict_scps(constant_model(2.0, [-1, 1]), np.array([0.0]))
        assert dist.jumps.tolist() == [1.0, 3.0] and dist.denominator == 3

    def test_single_score(self):
        dist = predict_scps(constant_model(5.0, [0.0]), np.array([0.0]))
        assert dist.jumps.tolist() == [5.0] and dist.denominator == 2

    def test_normalized(self):
        # residuals -2 and 2 give sigma 2
        dist = predict_scps(constant_model(0.0, [1.0], kind="normalized", spread=2.0), np.array([0.0]))
        assert dist.jumps == pytest.approx([2.0])

    def test_unattainable_points_to_direct_evaluation(self):
        nw = train_measure(ConformityMeasureSpec("nadaraya_watson", sigmoid_smoothing=False), const_data([0, 1]))
        model = ScpsModel(nw, np.array([0.0, 0.5]))
        with pytest.raises(ScoreNotAttainable, match="q_grid"):
            predict_scps(model, np.array([0.0]))
        grid, q = model.q_grid(np.array([0.0]), np.array([-1.0, 0.5, 2.0]), tau=0.0)
        assert q == pytest.approx([0.0, 1 / 3, 2 / 3])


class TestDirect:
    def test_one_score_below(self):
        model = constant_model(0.0, [0.0])
        assert scps_q(model, [0.0], 1.0, 0.0) == 0.5
        assert scps_q(model, [0.0], 1.0, 0.4) == pytest.approx(0.7)

    def test_below_all(self):
        assert scps_q(constant_model(0.0, [0.0]), [0.0], -1.0, 0.0) == 0.0

    def test_equal(self):
        assert scps_q(constant_model(0.0, [0.0]), [0.0], 0.0, 1.0) == 1.0

    @pytest.mark.parametrize("y, expected", [(0.0, 0.5), (5.0, 1.0), (-5.0, 0.0)])
    def test_crisp(self, y, expected):
        assert scps_q_crisp(constant_model(0.0, [-1, 1]), [0.0], y) == expected


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**31), st.floats(0, 1))
def test_inversion_agrees_with_counting(n, seed, tau):
    # integer data with 1-NN keeps every score and jump exact
    rng = np.random.default_rng(seed)
    data = Dataset(rng.integers(0, 5, size=(n, 1)).astype(float), rng.integers(-5, 6, size=n).astype(float))
    model = fit_scps(data, max(1, n // 2), ConformityMeasureSpec("simple", RegressorSpec("knn", knn_k=1)))
    x = np.array([float(rng.integers(0, 5))])
    dist = predict_scps(model, x)
    for y in np.arange(-12.0, 13.0, 0.5):
        direct = scps_q(model, x, y, tau)
        alpha_y = model.measure.score(x, y)
        assert direct == pytest.approx(transducer_by_count(model.calibration_scores, alpha_y, tau), abs=1e-15)
        assert eval_fuzzy(dist, y, tau) == direct
        assert eval_crisp(dist, y) == scps_q_crisp(model, x, y)


def test_batched_jumps_match_single(rng):
    data = Dataset(rng.normal(size=(40, 2)), rng.normal(size=40))
    model = fit_scps(data, 0.5, ConformityMeasureSpec("normalized", LS))
    X = rng.normal(size=(5, 2))
    rows = predict_jumps(model, X)
    for x, row in zip(X, rows):
        assert np.sort(row) == pytest.approx(predict_scps(model, x).jumps, rel=1e-12)


def test_ideal_predictor():
    train = Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([1.0, 1.5, 3.0]))
    icp = IdealConformalPredictor.fit(train, lambda X: X[:, 0])
    dist = icp.predict(np.array([10.0]))
    assert dist.denominator == 4
    assert dist.jumps.tolist() == [10.5, 11.0, 11.0]
