"""Fit/apply preprocessing and produce the train/test split.

Numeric columns: mean imputation over present values, then min-max scaling
into [0, 1]. Categorical columns: label-encoded against a sorted codebook
that always contains a reserved "missing" placeholder, then rescaled by the
codebook range so every feature lands on the same [0, 1] scale. Attack
labels are mapped to contiguous class indices in lexicographic order.

``transform_parallel`` is the concurrency contract of this module: workers
share read-only stats, own disjoint row chunks, and write into disjoint
slices of a preallocated output, so the result is bit-identical to the
sequential path for any (chunk_rows, workers).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, InvalidSpecError, PipelineError, UnknownLabelError
from .flowdata import NUMERIC, FlowSchema, FlowTable

MISSING_CATEGORY = "missing"


@dataclass(frozen=True)
class PreprocessStats:
    """Fitted per-column statistics plus the label codebook."""

    schema: FlowSchema
    numeric: dict[str, tuple[float, float, float]]  # name -> (mean, min, max)
    categorical: dict[str, dict[str, int]]  # name -> category -> code
    label_codebook: dict[str, int]

    @property
    def n_classes(self) -> int:
        return len(self.label_codebook)

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(self.label_codebook)

    def decode_label(self, code: int) -> str:
        return self.class_names[code]

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "numeric": {n: {"mean": m, "min": lo, "max": hi} for n, (m, lo, hi) in self.numeric.items()},
            "categorical": self.categorical,
            "label_codebook": self.label_codebook,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessStats":
        return cls(
            schema=FlowSchema.from_dict(d["schema"]),
            numeric={n: (v["mean"], v["min"], v["max"]) for n, v in d["numeric"].items()},
            categorical={n: {c: int(code) for c, code in cb.items()} for n, cb in d["categorical"].items()},
            label_codebook={lab: int(code) for lab, code in d["label_codebook"].items()},
        )


@dataclass
class FeatureMatrix:
    """Dense model input: unit-scaled float64 values with column metadata."""

    values: np.ndarray
    column_names: tuple[str, ...]
    column_kinds: tuple[str, ...]

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2-dimensional")
        if self.values.shape[1] != len(self.column_names) or len(self.column_names) != len(self.column_kinds):
            raise ValueError("column metadata does not match matrix width")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(self.values[idx], self.column_names, self.column_kinds)

    @classmethod
    def from_array(cls, values, column_names=None, column_kinds=None) -> "FeatureMatrix":
        values = np.asarray(values, dtype=np.float64)
        d = values.shape[1]
        if column_names is None:
            column_names = tuple(f"f{i}" for i in range(d))
        if column_kinds is None:
            column_kinds = (NUMERIC,) * d
        return cls(values, tuple(column_names), tuple(column_kinds))


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/test row indices covering every row."""

    train: np.ndarray
    test: np.ndarray
    seed: int
    train_fraction: float


def fit_stats(table: FlowTable) -> PreprocessStats:
    """Fit means, ranges, category codebooks, and the label codebook.

    Means and ranges are computed over present values only; an all-missing
    numeric column degenerates to (0, 0, 0). Category codebooks are the
    sorted observed categories plus the "missing" placeholder.
    """
    if table.n_rows == 0:
        raise EmptyInputError("cannot fit preprocessing stats on an empty table")
    numeric: dict[str, tuple[float, float, float]] = {}
    for name in table.schema.numeric_columns:
        col = table.numeric[name]
        present = col[~np.isnan(col)]
        if present.size == 0:
            numeric[name] = (0.0, 0.0, 0.0)
        else:
            numeric[name] = (float(present.mean()), float(present.min()), float(present.max()))
    categorical: dict[str, dict[str, int]] = {}
    for name in table.schema.categorical_columns:
        observed = {v for v in table.categorical[name] if v is not None}
        observed.add(MISSING_CATEGORY)
        categorical[name] = {cat: i for i, cat in enumerate(sorted(observed))}
    label_codebook = {lab: i for i, lab in enumerate(sorted(set(table.labels)))}
    return PreprocessStats(
        schema=table.schema, numeric=numeric, categorical=categorical, label_codebook=label_codebook
    )


def _prepare(table: FlowTable, stats: PreprocessStats):
    """Precompute the per-column transform plan shared by every chunk."""
    if table.schema != stats.schema:
        raise PipelineError("table schema does not match fitted stats")
    schema = stats.schema
    num_names = schema.numeric_columns
    num_positions = []
    cat_plan = []  # (output position, column list, codebook, missing code, scale)
    for pos, (name, kind) in enumerate(schema.feature_columns):
        if kind == NUMERIC:
            num_positions.append(pos)
        else:
            codebook = stats.categorical[name]
            scale = float(len(codebook) - 1)
            cat_plan.append((pos, table.categorical[name], codebook, codebook[MISSING_CATEGORY], scale))
    if num_names:
        num_block = np.column_stack([table.numeric[n] for n in num_names])
        means = np.array([stats.numeric[n][0] for n in num_names])
        mins = np.array([stats.numeric[n][1] for n in num_names])
        ranges = np.array([stats.numeric[n][2] - stats.numeric[n][1] for n in num_names])
        degenerate = ranges == 0.0
        safe_ranges = np.where(degenerate, 1.0, ranges)
    else:
        num_block = means = mins = degenerate = safe_ranges = None
    return num_block, np.asarray(num_positions), means, mins, degenerate, safe_ranges, cat_plan


def _transform_chunk(start, stop, plan, label_codebook, labels, out, label_out):
    num_block, num_positions, means, mins, degenerate, safe_ranges, cat_plan = plan
    if num_block is not None:
        v = num_block[start:stop]
        filled = np.where(np.isnan(v), means, v)
        scaled = (filled - mins) / safe_ranges
        scaled = np.where(degenerate, 0.0, scaled)
        # Out-of-range values can only appear when stats were fitted on a
        # row subset; clamp to preserve the [0, 1] matrix invariant.
        np.clip(scaled, 0.0, 1.0, out=scaled)
        out[start:stop, num_positions] = scaled
    for pos, col, codebook, missing_code, scale in cat_plan:
        get = codebook.get
        codes = np.fromiter(
            (get(x, missing_code) for x in col[start:stop]), dtype=np.float64, count=stop - start
        )
        out[start:stop, pos] = codes / scale if scale > 0 else 0.0
    lget = label_codebook.get
    for i in range(start, stop):
        code = lget(labels[i])
        if code is None:
            raise UnknownLabelError(f"label {labels[i]!r} was not present when stats were fitted")
        label_out[i] = code


def transform_parallel(
    table: FlowTable, stats: PreprocessStats, chunk_rows: int, workers: int
) -> tuple[FeatureMatrix, np.ndarray]:
    """Chunked transform; bit-identical to ``transform`` for any settings."""
    if chunk_rows < 1 or workers < 1:
        raise ValueError("chunk_rows and workers must both be >= 1")
    n = table.n_rows
    schema = stats.schema
    d = len(schema.feature_columns)
    out = np.empty((n, d), dtype=np.float64)
    label_out = np.empty(n, dtype=np.int64)
    plan = _prepare(table, stats)
    bounds = [(s, min(s + chunk_rows, n)) for s in range(0, n, chunk_rows)]

    def run_shard(shard):
        for start, stop in shard:
            _transform_chunk(start, stop, plan, stats.label_codebook, table.labels, out, label_out)

    if workers == 1 or len(bounds) <= 1:
        run_shard(bounds)
    else:
        shards = [bounds[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_shard, shard) for shard in shards if shard]
            for fut in futures:
                fut.result()

    names = tuple(name for name, _ in schema.feature_columns)
    kinds = tuple(kind for _, kind in schema.feature_columns)
    return FeatureMatrix(out, names, kinds), label_out


def transform(table: FlowTable, stats: PreprocessStats) -> tuple[FeatureMatrix, np.ndarray]:
    """Sequential transform of a whole table (the oracle for the chunked path)."""
    return transform_parallel(table, stats, chunk_rows=max(table.n_rows, 1), workers=1)


def split(
    n_rows: int,
    train_fraction: float,
    seed: int,
    labels=None,
    stratified: bool = False,
) -> SplitIndices:
    """Seeded uniform shuffle split; optional stratification by label.

    The plain split takes the first floor(train_fraction * n) entries of a
    seeded permutation. Stratified mode allocates per-class train counts by
    largest remainder so each class stays within one row of its target while
    the total train size matches the plain split exactly.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    if n_rows < 2:
        raise ValueError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_rows)
    n_train = int(math.floor(train_fraction * n_rows))
    if not stratified:
        train, test = perm[:n_train], perm[n_train:]
    else:
        if labels is None:
            raise ValueError("stratified split needs labels")
        y = np.asarray(labels)
        if y.shape[0] != n_rows:
            raise ValueError("labels length must equal n_rows")
        classes = np.unique(y)
        targets = train_fraction * np.array([(y == c).sum() for c in classes], dtype=np.float64)
        base = np.floor(targets).astype(np.int64)
        leftover = n_train - int(base.sum())
        order = sorted(range(len(classes)), key=lambda i: (-(targets[i] - base[i]), i))
        for i in order[:leftover]:
            base[i] += 1
        train_parts, test_parts = [], []
        y_perm = y[perm]
        for c, take in zip(classes, base):
            members = perm[y_perm == c]
            train_parts.append(members[:take])
            test_parts.append(members[take:])
        train = np.concatenate(train_parts)
        test = np.concatenate(test_parts)
    return SplitIndices(train=train, test=test, seed=seed, train_fraction=train_fraction)


def encode_labels(labels, codebook: dict[str, int]) -> np.ndarray:
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        code = codebook.get(lab)
        if code is None:
            raise UnknownLabelError(f"label {lab!r} not in codebook")
        out[i] = code
    return out


def decode_labels(codes, codebook: dict[str, int]) -> list[str]:
    names = list(codebook)
    return [names[int(c)] for c in codes]


def write_matrix_csv(matrix: FeatureMatrix, labels, path) -> None:
    """Persist a feature matrix with its integer labels as CSV."""
    import csv as _csv

    y = np.asarray(labels)
    if y.shape[0] != matrix.n_rows:
        raise ValueError("labels length must match matrix rows")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(list(matrix.column_names) + ["label"])
            values = matrix.values
            for i in range(matrix.n_rows):
                writer.writerow([repr(float(v)) for v in values[i]] + [str(int(y[i]))])
    except OSError as exc:
        raise PipelineError(f"cannot write {path}: {exc}") from exc


def read_matrix_csv(path, column_kinds=None) -> tuple[FeatureMatrix, np.ndarray]:
    import csv as _csv

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise PipelineError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path}: file is empty")
        if header[-1] != "label":
            raise PipelineError(f"{path}: last column must be 'label'")
        names = tuple(header[:-1])
        rows, labels = [], []
        for row in reader:
            rows.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    values = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
    if column_kinds is None:
        column_kinds = (NUMERIC,) * len(names)
    if len(column_kinds) != len(names):
        raise InvalidSpecError("column_kinds length must match the file header")
    return FeatureMatrix(values, names, tuple(column_kinds)), np.asarray(labels, dtype=np.int64)
