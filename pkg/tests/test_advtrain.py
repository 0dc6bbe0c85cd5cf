import numpy as np
import pytest

from robustids import advtrain, flowdata, gbdt, surrogate
from robustids.advtrain import PROVENANCE_ADVERSARIAL, PROVENANCE_CLEAN, augment
from robustids.attack import AttackConfig
from robustids.gbdt import Hyperparams
from robustids.metrics import accuracy
from robustids.preprocess import FeatureMatrix
from robustids.surrogate import SurrogateTrainCfg


def blocks(n=30, d=4, seed=0):
    rng = np.random.default_rng(seed)
    X = FeatureMatrix.from_array(rng.random((n, d)))
    y = rng.integers(0, 3, n)
    Xa = FeatureMatrix.from_array(rng.random((n, d)))
    return X, y, Xa


class TestAugment:
    def test_doubles_row_count(self):
        X, y, Xa = blocks()
        combined = augment(X, y, Xa, y, source_epsilon=0.1)
        assert combined.X.n_rows == 2 * X.n_rows
        assert combined.n_clean == X.n_rows and combined.n_adversarial == X.n_rows
        assert combined.source_epsilon == 0.1

    def test_clean_block_comes_first_unshuffled(self):
        X, y, Xa = blocks()
        combined = augment(X, y, Xa, y)
        assert np.array_equal(combined.X.values[: X.n_rows], X.values)
        assert np.array_equal(combined.X.values[X.n_rows :], Xa.values)
        assert list(combined.provenance[: X.n_rows]) == [PROVENANCE_CLEAN] * X.n_rows
        assert list(combined.provenance[X.n_rows :]) == [PROVENANCE_ADVERSARIAL] * X.n_rows

    def test_empty_adversarial_block_is_clean_set(self):
        X, y, _ = blocks()
        empty = FeatureMatrix.from_array(np.empty((0, X.n_features)))
        combined = augment(X, y, empty, np.empty(0, dtype=int))
        assert combined.X.n_rows == X.n_rows
        assert np.array_equal(combined.y, y)

    def test_per_class_counts_add(self):
        X, y, Xa = blocks(n=200, seed=3)
        y_adv = np.random.default_rng(4).integers(0, 3, 200)
        combined = augment(X, y, Xa, y_adv)
        for cls in range(3):
            expected = int((y == cls).sum() + (y_adv == cls).sum())
            assert int((combined.y == cls).sum()) == expected

    def test_adversarial_label_multiset_preserved(self):
        X, y, Xa = blocks(n=50, seed=5)
        combined = augment(X, y, Xa, y)
        adv_labels = combined.y[combined.provenance == PROVENANCE_ADVERSARIAL]
        assert np.array_equal(np.sort(adv_labels), np.sort(y))

    def test_dimension_mismatch_rejected(self):
        X, y, _ = blocks()
        bad = FeatureMatrix.from_array(np.random.random((30, X.n_features + 2)))
        with pytest.raises(ValueError):
            augment(X, y, bad, y)


@pytest.fixture(scope="module")
def pipeline_run():
    spec = flowdata.SynthSpec(
        n_rows=4000, n_numeric=8, n_categorical=2, missing_rate=0.02, separation=2.0, seed=101
    )
    table = flowdata.synth_generate(spec)
    hp = Hyperparams(n_classes=10, rounds=15)
    scfg = SurrogateTrainCfg(epochs=20, seed=55)
    acfg = AttackConfig(epsilon=0.1)
    return advtrain.adversarial_training_pipeline(
        table, hp, scfg, acfg, split_seed=17, workers=2, chunk_rows=512
    )


class TestPipeline:
    def test_combined_set_doubles_train_rows(self, pipeline_run):
        _, _, result = pipeline_run
        assert result.combined.X.n_rows == 2 * result.X_train.n_rows

    def test_robust_beats_baseline_under_attack(self, pipeline_run):
        _, _, result = pipeline_run
        assert (
            result.metric_pairs["robust_adversarial"][0]
            > result.metric_pairs["baseline_adversarial"][0]
        )

    def test_robust_clean_accuracy_stays_close(self, pipeline_run):
        _, _, result = pipeline_run
        gap = result.metric_pairs["baseline_clean"][0] - result.metric_pairs["robust_clean"][0]
        assert gap < 0.02

    def test_reports_present_for_all_four_evaluations(self, pipeline_run):
        _, _, result = pipeline_run
        expected = {"baseline_clean", "baseline_adversarial", "robust_clean", "robust_adversarial"}
        assert set(result.metric_pairs) == expected
        assert set(result.reports) == expected
        assert set(result.confusions) == expected
        for name, (acc, f1) in result.metric_pairs.items():
            assert result.reports[name].accuracy == pytest.approx(acc)
            assert result.reports[name].weighted_f1 == pytest.approx(f1)

    def test_manifest_carries_hashes_and_pairs(self, pipeline_run):
        baseline, robust, result = pipeline_run
        man = result.manifest
        assert man["model_hashes"]["baseline"] == baseline.content_hash()
        assert man["model_hashes"]["robust"] == robust.content_hash()
        assert man["n_combined"] == 2 * man["n_train"]
        assert set(man["metric_pairs"]) == set(result.metric_pairs)

    def test_metric_pairs_recomputable_from_bundle(self, pipeline_run):
        baseline, robust, result = pipeline_run
        acc = accuracy(result.y_test, gbdt.predict_class(baseline, result.X_test))
        assert acc == pytest.approx(result.metric_pairs["baseline_clean"][0])
        acc_adv = accuracy(result.y_test, gbdt.predict_class(robust, result.X_adv_test))
        assert acc_adv == pytest.approx(result.metric_pairs["robust_adversarial"][0])

    def test_attack_fraction_controls_adversarial_block(self):
        spec = flowdata.SynthSpec(
            n_rows=600, n_numeric=4, n_categorical=1,
            class_names=("a", "b"), class_priors=(0.6, 0.4), seed=9,
        )
        table = flowdata.synth_generate(spec)
        hp = Hyperparams(n_classes=2, rounds=3)
        _, _, result = advtrain.adversarial_training_pipeline(
            table, hp, SurrogateTrainCfg(epochs=3, seed=1), AttackConfig(epsilon=0.05),
            split_seed=2, attack_fraction=0.5,
        )
        assert result.combined.n_adversarial == int(0.5 * result.X_train.n_rows)

    def test_hyperparams_match_between_models(self, pipeline_run):
        baseline, robust, _ = pipeline_run
        assert baseline.hyperparams == robust.hyperparams

    def test_fit_on_train_only_flag_keeps_matrix_in_domain(self):
        spec = flowdata.SynthSpec(
            n_rows=800, n_numeric=4, n_categorical=1,
            class_names=("a", "b"), class_priors=(0.6, 0.4), seed=3,
        )
        table = flowdata.synth_generate(spec)
        _, _, result = advtrain.adversarial_training_pipeline(
            table, Hyperparams(n_classes=2, rounds=3), SurrogateTrainCfg(epochs=3, seed=1),
            AttackConfig(epsilon=0.05), split_seed=4, fit_on_train_only=True,
        )
        assert result.manifest["fit_on_train_only"] is True
        for matrix in (result.X_train, result.X_test, result.X_adv_test):
            assert matrix.values.min() >= 0.0 and matrix.values.max() <= 1.0
