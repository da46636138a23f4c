import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from layergauge import svm
from layergauge.errors import DimensionError, ValidationError
from layergauge.svm import FeatureMatrix, SvmConfig

FAST = SvmConfig(c_grid=(0.1, 1.0, 10.0), folds=3, epochs=200, tolerance=1e-6)


def blobs(rng, per_class=10, dim=2, sep=10.0, classes=2):
    centers = rng.normal(size=(classes, dim))
    centers *= sep / np.linalg.norm(centers[0] - centers[1])
    x = np.concatenate([c + rng.normal(size=(per_class, dim)) for c in centers])
    y = np.repeat(np.arange(classes), per_class)
    return x.astype(np.float32), y


def linearly_separable(x, y):
    """LP feasibility: exists (w, b) with y_i (w.x_i + b) >= 1."""
    s = np.where(y == 1, 1.0, -1.0)
    a = -s[:, None] * np.hstack([x, np.ones((len(x), 1))])
    res = linprog(np.zeros(x.shape[1] + 1), A_ub=a, b_ub=-np.ones(len(x)), bounds=(None, None))
    return res.status == 0


class TestSeparable:
    def test_oracle_agrees_blobs_are_separable(self, rng):
        x, y = blobs(rng)
        assert linearly_separable(x, y)

    def test_oracle_rejects_xor(self):
        x = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], np.float64)
        assert not linearly_separable(x, np.array([0, 0, 1, 1]))

    def test_training_accuracy_one(self, rng, backend):
        x, y = blobs(rng)
        model = svm.train(FeatureMatrix(x, y), FAST, backend=backend)
        assert svm.accuracy(svm.predict_batch(model, x), y) == 1.0

    def test_hard_margin_at_large_c(self, rng, backend):
        x, y = blobs(rng)
        s = np.where(y == 1, 1.0, -1.0)
        fit = svm.fit_binary(x, s, C=1e4, epochs=2000, tolerance=1e-9, backend=backend)
        margins = s * (x.astype(np.float64) @ fit.w + fit.b)
        assert margins.min() >= 1 - 1e-3

    def test_dual_objective_monotone(self, rng, backend):
        x, y = blobs(rng, per_class=30, dim=5, sep=2.0)
        s = np.where(y == 1, 1.0, -1.0)
        fit = svm.fit_binary(x, s, C=1.0, epochs=50, tolerance=0.0, backend=backend)
        assert np.all(np.diff(fit.objective) >= -1e-9)
        assert fit.sweeps == len(fit.objective)

    def test_kkt_box(self, rng):
        x, y = blobs(rng, sep=1.0)
        fit = svm.fit_binary(x, np.where(y == 1, 1.0, -1.0), C=0.5)
        assert fit.alpha.min() >= 0 and fit.alpha.max() <= 0.5


def test_backends_agree(rng):
    x, y = blobs(rng, per_class=15, dim=6, sep=3.0, classes=3)
    a = svm.train(FeatureMatrix(x, y), FAST, backend="numba")
    b = svm.train(FeatureMatrix(x, y), FAST, backend="numpy")
    assert a.C == b.C
    np.testing.assert_allclose(a.weights, b.weights, rtol=0, atol=1e-6)


class TestValidation:
    def test_single_class(self):
        with pytest.raises(ValidationError, match="single class"):
            svm.train(FeatureMatrix(np.ones((6, 2)), np.zeros(6, int)), FAST)

    def test_nan(self):
        x = np.ones((4, 2))
        x[1, 1] = np.nan
        with pytest.raises(ValidationError, match="NaN"):
            FeatureMatrix(x, [0, 1, 0, 1])

    def test_too_few_rows_for_folds(self):
        with pytest.raises(ValidationError, match="folds"):
            svm.train(FeatureMatrix(np.eye(2), [0, 1]), FAST)

    def test_label_count(self):
        with pytest.raises(DimensionError):
            FeatureMatrix(np.ones((3, 2)), [0, 1])

    def test_config(self):
        with pytest.raises(ValidationError):
            SvmConfig(c_grid=(0.0,))
        with pytest.raises(ValidationError):
            SvmConfig(folds=1)

    def test_predict_dimension(self, rng):
        x, y = blobs(rng)
        model = svm.train(FeatureMatrix(x, y), FAST)
        with pytest.raises(DimensionError):
            svm.predict(model, np.zeros(3))


def test_retraining_is_bit_identical(rng):
    x, y = blobs(rng, per_class=12, dim=4, sep=2.0, classes=3)
    a = svm.train(FeatureMatrix(x, y), FAST)
    b = svm.train(FeatureMatrix(x, y), FAST)
    assert a.weights.tobytes() == b.weights.tobytes() and a.biases.tobytes() == b.biases.tobytes()
    assert a.cv_accuracy == b.cv_accuracy


class TestOneVsRest:
    def test_two_classes_match_binary_fit(self, rng):
        x, y = blobs(rng, sep=3.0)
        cfg = SvmConfig(c_grid=(1.0,), folds=2, epochs=100, tolerance=1e-6)
        model = svm.train(FeatureMatrix(x, y), cfg)
        xs = svm.standardize(x, model.mean, model.scale)
        fit = svm.fit_binary(xs, np.where(y == 1, 1.0, -1.0), 1.0, 100, 1e-6, seed=cfg.seed)
        direct = (xs.astype(np.float64) @ fit.w + fit.b > 0).astype(int)
        np.testing.assert_array_equal(svm.predict_batch(model, x), direct)
        # shared sweep orders make the two one-vs-rest machines mirror images
        np.testing.assert_array_equal(model.weights[0], -model.weights[1])

    def test_tie_goes_to_smaller_class(self):
        model = svm.LinearSvmModel(np.zeros((3, 2), np.float32), np.array([0.5, 0.5, 0.1], np.float32),
                                   np.zeros(2, np.float32), np.ones(2, np.float32), 1.0)
        assert svm.predict(model, np.array([1.0, -1.0])) == 0

    def test_cv_picks_smaller_c_on_ties(self, rng):
        x, y = blobs(rng, sep=20.0)
        model = svm.train(FeatureMatrix(x, y), SvmConfig(c_grid=(10.0, 0.1, 1.0), folds=2))
        assert set(model.cv_accuracy.values()) == {1.0}
        assert model.C == 0.1

    def test_groups_stay_in_one_fold(self):
        groups = np.repeat(np.arange(10), 4)
        folds = svm.assign_folds(groups, 5, seed=1)
        for g in range(10):
            assert len(set(folds[groups == g])) == 1
        assert set(folds) == set(range(5))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.25, 8.0), st.floats(-5, 5))
def test_prediction_invariant_under_column_affine_map(seed, scale, shift):
    rng = np.random.default_rng(seed)
    x, y = blobs(rng, per_class=10, dim=3, sep=6.0)
    cfg = SvmConfig(c_grid=(1.0,), folds=2)
    a = svm.train(FeatureMatrix(x, y), cfg)
    x2 = x * np.float32(scale) + np.float32(shift)
    b = svm.train(FeatureMatrix(x2, y), cfg)
    sa = svm.decision_scores(a, x)
    sb = svm.decision_scores(b, x2)
    np.testing.assert_allclose(sa, sb, atol=1e-3)
    confident = np.abs(sa[:, 1] - sa[:, 0]) > 1e-2
    np.testing.assert_array_equal(svm.predict_batch(a, x)[confident], svm.predict_batch(b, x2)[confident])


class TestAccuracy:
    def test_examples(self):
        assert svm.accuracy([0, 1, 2, 2], [0, 1, 2, 1]) == 0.75
        assert svm.accuracy([1], [0]) == 0.0

    def test_empty(self):
        with pytest.raises(ValidationError, match="empty"):
            svm.accuracy([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            svm.accuracy([0, 1], [0])

    def test_confusion(self):
        cm = svm.confusion_matrix([0, 1, 1], [0, 0, 1], 2)
        np.testing.assert_array_equal(cm, [[1, 1], [0, 1]])


def test_zero_variance_column_is_harmless(rng):
    x, y = blobs(rng, sep=8.0)
    x = np.hstack([x, np.full((len(x), 1), 3.0, np.float32)])
    model = svm.train(FeatureMatrix(x, y), FAST)
    assert model.scale[-1] == 1.0
    assert svm.accuracy(svm.predict_batch(model, x), y) == 1.0


def test_save_load_round_trip(rng, tmp_path):
    x, y = blobs(rng, per_class=8, dim=5, classes=3)
    model = svm.train(FeatureMatrix(x, y), FAST)
    svm.save_model(model, tmp_path / "m.otsw")
    back = svm.load_model(tmp_path / "m.otsw")
    assert back.C == model.C
    for attr in ("weights", "biases", "mean", "scale"):
        assert getattr(back, attr).tobytes() == getattr(model, attr).tobytes()
    np.testing.assert_array_equal(svm.predict_batch(back, x), svm.predict_batch(model, x))
