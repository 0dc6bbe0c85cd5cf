import math

import numpy as np
import pytest
from oracles import input_gradient_fd_check

from robustids import surrogate
from robustids.errors import DegenerateTrainingWarning, EmptyInputError
from robustids.preprocess import FeatureMatrix
from robustids.surrogate import (
    SurrogateParams,
    SurrogateTrainCfg,
    input_gradient,
    input_gradient_batch,
    surrogate_loss,
    train_surrogate,
)


def zero_params(d=4, k=10):
    return SurrogateParams(W=np.zeros((d, k)), b=np.zeros(k))


def separable_toy(n=200, seed=13):
    """Two classes split cleanly by the sign of x0 - x1."""
    rng = np.random.default_rng(seed)
    lo = lambda m: rng.uniform(0.0, 0.35, m)
    hi = lambda m: rng.uniform(0.65, 1.0, m)
    x0 = np.concatenate([lo(n // 2), hi(n - n // 2)])
    x1 = np.concatenate([hi(n // 2), lo(n - n // 2)])
    y = np.concatenate([np.zeros(n // 2, dtype=int), np.ones(n - n // 2, dtype=int)])
    perm = rng.permutation(n)
    return FeatureMatrix.from_array(np.column_stack([x0, x1])[perm]), y[perm]


class TestLoss:
    def test_zero_model_gives_ln10(self):
        params = zero_params(k=10)
        assert surrogate_loss(params, np.zeros(4), 3) == pytest.approx(math.log(10), abs=1e-12)

    def test_saturated_scores_drive_loss_to_zero(self):
        params = SurrogateParams(W=np.zeros((2, 3)), b=np.array([50.0, 0.0, 0.0]))
        assert surrogate_loss(params, np.ones(2), 0) < 1e-15

    def test_matches_extended_precision(self):
        rng = np.random.default_rng(21)
        params = SurrogateParams(W=rng.normal(0, 1, (5, 4)), b=rng.normal(0, 1, 4))
        for _ in range(50):
            x = rng.random(5)
            y = int(rng.integers(0, 4))
            s = np.asarray(x @ params.W + params.b, dtype=np.longdouble)
            m = s.max()
            expected = float((m + np.log(np.exp(s - m).sum())) - s[y])
            assert surrogate_loss(params, x, y) == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            surrogate_loss(zero_params(d=4), np.zeros(5), 0)
        with pytest.raises(ValueError):
            surrogate_loss(zero_params(k=3), np.zeros(4), 7)


class TestInputGradient:
    def test_zero_gradient_at_saturated_prediction(self):
        # score gap far beyond exp underflow, so softmax is exactly one-hot
        params = SurrogateParams(W=np.array([[500.0, -500.0], [500.0, -500.0]]), b=np.zeros(2))
        grad = input_gradient(params, np.ones(2), 0)
        assert np.all(grad == 0.0)

    def test_two_class_gradient_collinear_with_weight_difference(self):
        w = np.array([[1.0, -1.0], [2.0, 0.5], [-0.3, 0.7]])
        params = SurrogateParams(W=w, b=np.zeros(2))
        x = np.array([0.2, 0.4, 0.9])
        grad = input_gradient(params, x, 0)
        direction = w[:, 1] - w[:, 0]
        cos = grad @ direction / (np.linalg.norm(grad) * np.linalg.norm(direction))
        assert cos == pytest.approx(1.0, abs=1e-12)

    def test_finite_difference_subset(self):
        assert input_gradient_fd_check(n_cases=60, seed=31) < 1e-4

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        params = SurrogateParams(W=rng.normal(0, 1, (4, 3)), b=rng.normal(0, 1, 3))
        X = rng.random((10, 4))
        y = rng.integers(0, 3, 10)
        batch = input_gradient_batch(params, X, y)
        for i in range(10):
            assert np.allclose(batch[i], input_gradient(params, X[i], int(y[i])), atol=1e-14)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            input_gradient(zero_params(d=3), np.zeros(4), 0)


class TestTraining:
    def test_separable_toy_reaches_high_accuracy(self):
        X, y = separable_toy()
        params = train_surrogate(X, y, SurrogateTrainCfg(epochs=30, seed=1), n_classes=2)
        pred = surrogate.predict_class(params, X)
        assert (pred == y).mean() >= 0.99

    def test_zero_step_size_keeps_initialization(self):
        X, y = separable_toy(n=50)
        params = train_surrogate(X, y, SurrogateTrainCfg(epochs=5, step_size=0.0, seed=2), n_classes=2)
        assert np.all(params.W == 0.0) and np.all(params.b == 0.0)

    def test_deterministic_parameter_bytes(self):
        X, y = separable_toy(n=120)
        cfg = SurrogateTrainCfg(epochs=8, seed=44)
        a = train_surrogate(X, y, cfg, n_classes=2)
        b = train_surrogate(X, y, cfg, n_classes=2)
        assert a.content_hash() == b.content_hash()

    def test_final_loss_not_above_initial(self, small_matrix):
        _, X, y = small_matrix
        params = train_surrogate(X, y, SurrogateTrainCfg(epochs=10, seed=5), n_classes=3)
        assert params.epoch_losses[-1] <= params.epoch_losses[0]

    def test_loss_non_increasing_across_epochs(self, small_matrix):
        _, X, y = small_matrix
        params = train_surrogate(X, y, SurrogateTrainCfg(epochs=20, seed=5), n_classes=3)
        diffs = np.diff(params.epoch_losses)
        assert np.max(diffs) <= 1e-6

    def test_single_class_warns(self):
        X = FeatureMatrix.from_array(np.random.default_rng(0).random((30, 2)))
        with pytest.warns(DegenerateTrainingWarning):
            train_surrogate(X, np.zeros(30, dtype=int), SurrogateTrainCfg(epochs=2, seed=0), n_classes=2)

    def test_empty_rejected(self):
        X = FeatureMatrix.from_array(np.empty((0, 2)))
        with pytest.raises(EmptyInputError):
            train_surrogate(X, np.empty(0, dtype=int), SurrogateTrainCfg(seed=0))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        X, y = separable_toy(n=80)
        params = train_surrogate(X, y, SurrogateTrainCfg(epochs=4, seed=6), n_classes=2)
        path = tmp_path / "surrogate.json"
        surrogate.save_params(params, path)
        restored = surrogate.load_params(path)
        assert restored.content_hash() == params.content_hash()
        assert np.array_equal(restored.W, params.W) and np.array_equal(restored.b, params.b)
