"""Clean+adversarial training-set construction and robust retraining.

The pipeline runs the whole procedure in order: preprocess, 70/30 split,
train the baseline booster on the clean train split, train the surrogate on
the same split, attack the clean train rows, append the adversarial block
(same labels) to form the combined set, retrain the booster with unchanged
hyperparameters, and evaluate both models on the clean test set and on a
test set attacked once with the same surrogate. Robust-model results are
reported for both test sets, labeled explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import gbdt, metrics, preprocess, surrogate
from .attack import AttackConfig, fgsm_batch
from .flowdata import FlowTable
from .gbdt import Ensemble, Hyperparams
from .preprocess import FeatureMatrix, PreprocessStats, SplitIndices
from .surrogate import SurrogateParams, SurrogateTrainCfg

PROVENANCE_CLEAN = "clean"
PROVENANCE_ADVERSARIAL = "adversarial"


@dataclass
class CombinedTrainSet:
    X: FeatureMatrix
    y: np.ndarray
    provenance: np.ndarray  # per-row "clean" | "adversarial"
    source_epsilon: float

    @property
    def n_clean(self) -> int:
        return int((self.provenance == PROVENANCE_CLEAN).sum())

    @property
    def n_adversarial(self) -> int:
        return int((self.provenance == PROVENANCE_ADVERSARIAL).sum())


def augment(
    X_train: FeatureMatrix,
    y_train,
    X_adv: FeatureMatrix,
    y_adv,
    source_epsilon: float = 0.0,
) -> CombinedTrainSet:
    """Concatenate the clean block then the adversarial block, labels verbatim."""
    if X_train.n_features != X_adv.n_features:
        raise ValueError("clean and adversarial blocks must share feature dimensionality")
    yt = np.asarray(y_train, dtype=np.int64)
    ya = np.asarray(y_adv, dtype=np.int64)
    if yt.shape[0] != X_train.n_rows or ya.shape[0] != X_adv.n_rows:
        raise ValueError("label vectors must match their matrices row-for-row")
    values = np.vstack([X_train.values, X_adv.values])
    provenance = np.array(
        [PROVENANCE_CLEAN] * X_train.n_rows + [PROVENANCE_ADVERSARIAL] * X_adv.n_rows
    )
    combined = FeatureMatrix(values, X_train.column_names, X_train.column_kinds)
    return CombinedTrainSet(
        X=combined,
        y=np.concatenate([yt, ya]),
        provenance=provenance,
        source_epsilon=float(source_epsilon),
    )


@dataclass
class PipelineResult:
    stats: PreprocessStats
    split: SplitIndices
    baseline: Ensemble
    robust: Ensemble
    surrogate_params: SurrogateParams
    combined: CombinedTrainSet
    X_train: FeatureMatrix
    y_train: np.ndarray
    X_test: FeatureMatrix
    y_test: np.ndarray
    X_adv_test: FeatureMatrix
    metric_pairs: dict[str, tuple[float, float]]  # name -> (accuracy, weighted F1)
    reports: dict[str, metrics.ClassReport]
    confusions: dict[str, metrics.ConfusionMatrix]
    manifest: dict


def _evaluate(model: Ensemble, X: FeatureMatrix, y, class_names):
    pred = gbdt.predict_class(model, X)
    cm = metrics.confusion(y, pred, len(class_names), class_names)
    rep = metrics.report(cm)
    return (rep.accuracy, rep.weighted_f1), rep, cm


def adversarial_training_pipeline(
    table: FlowTable,
    hp: Hyperparams,
    scfg: SurrogateTrainCfg,
    acfg: AttackConfig,
    split_seed: int,
    train_fraction: float = 0.7,
    fit_on_train_only: bool = False,
    chunk_rows: int | None = None,
    workers: int = 1,
    attack_fraction: float = 1.0,
    stratified: bool = False,
) -> tuple[Ensemble, Ensemble, PipelineResult]:
    """Run the full robust-training procedure on one flow table.

    Returns (baseline booster, adversarially trained booster, result bundle)
    where the bundle carries the four evaluation pairs: baseline_clean,
    baseline_adversarial, robust_clean, robust_adversarial.
    """
    if not 0.0 <= attack_fraction <= 1.0:
        raise ValueError("attack_fraction must lie in [0, 1]")
    n = table.n_rows
    label_for_split = None
    if stratified:
        label_for_split = np.asarray(table.labels)
    sp = preprocess.split(n, train_fraction, split_seed, labels=label_for_split, stratified=stratified)

    fit_table = table.select(sp.train) if fit_on_train_only else table
    stats = preprocess.fit_stats(fit_table)
    chunk = chunk_rows if chunk_rows is not None else max(n, 1)
    X, y = preprocess.transform_parallel(table, stats, chunk_rows=chunk, workers=workers)

    k = stats.n_classes
    hp = replace(hp, n_classes=k)
    X_train, y_train = X.take(sp.train), y[sp.train]
    X_test, y_test = X.take(sp.test), y[sp.test]

    baseline = gbdt.train(X_train, y_train, hp)
    sur = surrogate.train_surrogate(X_train, y_train, scfg, n_classes=k)

    n_attack = int(attack_fraction * X_train.n_rows)
    X_adv_train = fgsm_batch(sur, X_train.take(np.arange(n_attack)), y_train[:n_attack], acfg)
    combined = augment(X_train, y_train, X_adv_train, y_train[:n_attack], source_epsilon=acfg.epsilon)
    robust = gbdt.train(combined.X, combined.y, hp)

    X_adv_test = fgsm_batch(sur, X_test, y_test, acfg)

    class_names = stats.class_names
    pairs: dict[str, tuple[float, float]] = {}
    reports: dict[str, metrics.ClassReport] = {}
    confusions: dict[str, metrics.ConfusionMatrix] = {}
    for name, model, Xe in (
        ("baseline_clean", baseline, X_test),
        ("baseline_adversarial", baseline, X_adv_test),
        ("robust_clean", robust, X_test),
        ("robust_adversarial", robust, X_adv_test),
    ):
        pairs[name], reports[name], confusions[name] = _evaluate(model, Xe, y_test, class_names)

    manifest = {
        "split_seed": split_seed,
        "train_fraction": train_fraction,
        "fit_on_train_only": fit_on_train_only,
        "stratified": stratified,
        "attack_fraction": attack_fraction,
        "n_rows": n,
        "n_train": int(sp.train.size),
        "n_test": int(sp.test.size),
        "n_combined": combined.X.n_rows,
        "class_names": list(class_names),
        "booster": {**hp.__dict__},
        "surrogate": {**scfg.__dict__},
        "attack": acfg.to_dict(),
        "model_hashes": {
            "baseline": baseline.content_hash(),
            "robust": robust.content_hash(),
            "surrogate": sur.content_hash(),
        },
        "metric_pairs": {k2: {"accuracy": a, "f1_weighted": f} for k2, (a, f) in pairs.items()},
    }
    result = PipelineResult(
        stats=stats,
        split=sp,
        baseline=baseline,
        robust=robust,
        surrogate_params=sur,
        combined=combined,
        X_train=X_train,
        y_train=y_train,
        X_test=X_test,
        y_test=y_test,
        X_adv_test=X_adv_test,
        metric_pairs=pairs,
        reports=reports,
        confusions=confusions,
        manifest=manifest,
    )
    return baseline, robust, result
