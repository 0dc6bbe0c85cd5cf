"""Evaluation outputs: confusion matrices and classification reports.

Reports carry per-class precision/recall/F1/support plus accuracy and the
macro and support-weighted aggregates. Undefined ratios (a class never
predicted, or absent from the truth) are reported as 0 and flagged rather
than propagated as NaN. The headline F1 of a model is the weighted F1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, PipelineError


@dataclass
class ConfusionMatrix:
    """counts[i, j] = rows of true class i predicted as class j."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = self.counts.shape[0]
        if self.counts.ndim != 2 or self.counts.shape[1] != k:
            raise ValueError("confusion matrix must be square")
        if len(self.class_names) != k:
            raise ValueError("class_names length must match matrix size")

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)


@dataclass
class ClassRow:
    name: str
    precision: float
    recall: float
    f1: float
    support: int
    flags: tuple[str, ...] = ()


@dataclass
class ClassReport:
    rows: list[ClassRow]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    total_support: int

    def to_dict(self) -> dict:
        return {
            "classes": {
                r.name: {
                    "precision": r.precision,
                    "recall": r.recall,
                    "f1": r.f1,
                    "support": r.support,
                    "flags": list(r.flags),
                }
                for r in self.rows
            },
            "accuracy": self.accuracy,
            "macro_avg": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "weighted_avg": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "total_support": self.total_support,
        }


def confusion(y_true, y_pred, n_classes: int, class_names=None) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if t.size and (t.min() < 0 or t.max() >= n_classes or p.min() < 0 or p.max() >= n_classes):
        raise ValueError("labels must lie in [0, n_classes)")
    counts = np.bincount(t * n_classes + p, minlength=n_classes * n_classes).reshape(
        n_classes, n_classes
    )
    if class_names is None:
        class_names = tuple(str(i) for i in range(n_classes))
    return ConfusionMatrix(counts=counts, class_names=tuple(class_names))


def report(cm: ConfusionMatrix) -> ClassReport:
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise EmptyInputError("cannot build a report from an all-zero confusion matrix")
    diag = np.diag(counts).astype(np.float64)
    col = counts.sum(axis=0).astype(np.float64)
    row = counts.sum(axis=1).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag), where=denom > 0)

    rows = []
    for i, name in enumerate(cm.class_names):
        flags = []
        if col[i] == 0:
            flags.append("no-predictions")
        if row[i] == 0:
            flags.append("no-support")
        rows.append(
            ClassRow(
                name=name,
                precision=float(precision[i]),
                recall=float(recall[i]),
                f1=float(f1[i]),
                support=int(row[i]),
                flags=tuple(flags),
            )
        )
    weights = row / total
    return ClassReport(
        rows=rows,
        accuracy=float(diag.sum() / total),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float((weights * precision).sum()),
        weighted_recall=float((weights * recall).sum()),
        weighted_f1=float((weights * f1).sum()),
        total_support=int(total),
    )


def accuracy(y_true, y_pred) -> float:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if t.size == 0:
        raise ValueError("cannot score empty prediction vectors")
    return float((t == p).mean())


def f1_weighted(y_true, y_pred) -> float:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if t.size == 0:
        raise ValueError("cannot score empty prediction vectors")
    k = int(max(t.max(), p.max())) + 1
    return report(confusion(t, p, k)).weighted_f1


def render_text(rep: ClassReport, digits: int = 2) -> str:
    """Fixed-width classification report: class rows first (label order),
    then accuracy, macro avg, and weighted avg rows."""
    name_width = max(len("weighted avg"), max(len(r.name) for r in rep.rows))
    header = f"{'':>{name_width}}  {'precision':>9}  {'recall':>9}  {'f1-score':>9}  {'support':>9}"
    lines = [header, ""]
    fmt = f"{{:>{digits + 2}.{digits}f}}"
    for r in rep.rows:
        lines.append(
            f"{r.name:>{name_width}}  {fmt.format(r.precision):>9}  {fmt.format(r.recall):>9}  "
            f"{fmt.format(r.f1):>9}  {r.support:>9}"
        )
    lines.append("")
    lines.append(
        f"{'accuracy':>{name_width}}  {'':>9}  {'':>9}  {fmt.format(rep.accuracy):>9}  "
        f"{rep.total_support:>9}"
    )
    lines.append(
        f"{'macro avg':>{name_width}}  {fmt.format(rep.macro_precision):>9}  "
        f"{fmt.format(rep.macro_recall):>9}  {fmt.format(rep.macro_f1):>9}  {rep.total_support:>9}"
    )
    lines.append(
        f"{'weighted avg':>{name_width}}  {fmt.format(rep.weighted_precision):>9}  "
        f"{fmt.format(rep.weighted_recall):>9}  {fmt.format(rep.weighted_f1):>9}  "
        f"{rep.total_support:>9}"
    )
    return "\n".join(lines) + "\n"


def confusion_to_csv(cm: ConfusionMatrix, path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["class"] + list(cm.class_names))
            for name, row in zip(cm.class_names, cm.counts):
                writer.writerow([name] + [int(v) for v in row])
    except OSError as exc:
        raise PipelineError(f"cannot write {path}: {exc}") from exc
