"""Flow-record schema, CSV ingestion/serialization, and seeded synthetic data.

The pipeline starts from NetFlow-style CSV exports: one header row, one flow
per line, numeric and categorical attribute columns plus a string attack
label. Missing values are empty cells. A seeded generator produces
schema-compatible synthetic corpora whose class mix defaults to the
NF-ToN-IoT-v2 evaluation-split class proportions.
"""

from __future__ import annotations

import csv
import math
import sys
from array import array
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, InvalidSpecError, PipelineError, SchemaMismatchError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# Ten-class NetFlow attack taxonomy with the class mix observed in the
# NF-ToN-IoT-v2 corpus (per-class record counts of its evaluation split).
DEFAULT_CLASS_NAMES = (
    "Benign",
    "backdoor",
    "ddos",
    "dos",
    "injection",
    "mitm",
    "password",
    "ransomware",
    "scanning",
    "xss",
)
DEFAULT_CLASS_SUPPORTS = (
    1080385,
    4878,
    523977,
    196308,
    198140,
    2317,
    298115,
    1007,
    900651,
    734987,
)

_CATEGORY_ALPHABET = tuple(f"v{i}" for i in range(6))


def default_class_priors() -> tuple[float, ...]:
    total = float(sum(DEFAULT_CLASS_SUPPORTS))
    return tuple(s / total for s in DEFAULT_CLASS_SUPPORTS)


@dataclass(frozen=True)
class FlowSchema:
    """Ordered feature columns (name, kind) plus the label column name."""

    feature_columns: tuple[tuple[str, str], ...]
    label_column: str = "Attack"

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(tuple(c) for c in self.feature_columns))
        if not self.feature_columns:
            raise InvalidSpecError("schema needs at least one feature column")
        names = [name for name, _ in self.feature_columns]
        if len(set(names)) != len(names):
            raise InvalidSpecError("schema feature names must be unique")
        if self.label_column in names:
            raise InvalidSpecError(f"label column {self.label_column!r} collides with a feature")
        for name, kind in self.feature_columns:
            if kind not in (NUMERIC, CATEGORICAL):
                raise InvalidSpecError(f"column {name!r} has unknown kind {kind!r}")

    @property
    def numeric_columns(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.feature_columns if k == NUMERIC)

    @property
    def categorical_columns(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.feature_columns if k == CATEGORICAL)

    def to_dict(self) -> dict:
        return {
            "feature_columns": [list(c) for c in self.feature_columns],
            "label_column": self.label_column,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlowSchema":
        return cls(
            feature_columns=tuple((str(n), str(k)) for n, k in d["feature_columns"]),
            label_column=str(d.get("label_column", "Attack")),
        )


@dataclass
class FlowTable:
    """Parsed flow records, column-oriented.

    Numeric columns are float64 arrays with NaN marking a missing cell;
    categorical columns are lists with None marking a missing cell. Tables
    are treated as immutable once constructed.
    """

    schema: FlowSchema
    numeric: dict[str, np.ndarray]
    categorical: dict[str, list]
    labels: list[str]

    def __post_init__(self):
        n = len(self.labels)
        for name in self.schema.numeric_columns:
            col = self.numeric[name]
            if len(col) != n:
                raise InvalidSpecError(f"numeric column {name!r} length {len(col)} != {n} rows")
        for name in self.schema.categorical_columns:
            if len(self.categorical[name]) != n:
                raise InvalidSpecError(f"categorical column {name!r} length mismatch")
        if any(not lab for lab in self.labels):
            raise InvalidSpecError("every row needs a nonempty label")

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def equals(self, other: "FlowTable") -> bool:
        if self.schema != other.schema or self.labels != other.labels:
            return False
        for name in self.schema.numeric_columns:
            if not np.array_equal(self.numeric[name], other.numeric[name], equal_nan=True):
                return False
        for name in self.schema.categorical_columns:
            if self.categorical[name] != other.categorical[name]:
                return False
        return True

    def select(self, indices) -> "FlowTable":
        """Row subset in the given index order."""
        idx = np.asarray(indices, dtype=np.int64)
        return FlowTable(
            schema=self.schema,
            numeric={n: col[idx] for n, col in self.numeric.items()},
            categorical={n: [col[i] for i in idx] for n, col in self.categorical.items()},
            labels=[self.labels[i] for i in idx],
        )


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a seeded synthetic flow corpus.

    Numeric features are class-conditional Gaussian clusters (unit noise,
    cluster centers drawn with standard deviation ``separation``), so larger
    ``separation`` means more separable classes. Categorical features draw
    from class-skewed distributions over a small value alphabet.
    """

    n_rows: int
    n_numeric: int
    n_categorical: int
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES
    class_priors: tuple[float, ...] | None = None
    missing_rate: float = 0.0
    separation: float = 2.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.class_priors is not None:
            object.__setattr__(self, "class_priors", tuple(float(p) for p in self.class_priors))
        if self.n_rows <= 0:
            raise InvalidSpecError("n_rows must be positive")
        if self.n_numeric + self.n_categorical <= 0:
            raise InvalidSpecError("need at least one feature column")
        if not 0.0 <= self.missing_rate < 1.0:
            raise InvalidSpecError("missing_rate must lie in [0, 1)")
        if self.separation <= 0:
            raise InvalidSpecError("separation must be positive")
        priors = self.priors
        if len(priors) != len(self.class_names):
            raise InvalidSpecError("class_priors length must match class_names")
        if abs(sum(priors) - 1.0) > 1e-9:
            raise InvalidSpecError("class_priors must sum to 1")

    @property
    def priors(self) -> tuple[float, ...]:
        if self.class_priors is not None:
            return self.class_priors
        return default_class_priors()

    @property
    def schema(self) -> FlowSchema:
        cols = [(f"f{i}", NUMERIC) for i in range(self.n_numeric)]
        cols += [(f"f{self.n_numeric + i}", CATEGORICAL) for i in range(self.n_categorical)]
        return FlowSchema(feature_columns=tuple(cols))

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_numeric": self.n_numeric,
            "n_categorical": self.n_categorical,
            "class_names": list(self.class_names),
            "class_priors": None if self.class_priors is None else list(self.class_priors),
            "missing_rate": self.missing_rate,
            "separation": self.separation,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        kwargs = dict(d)
        if kwargs.get("class_names") is None:
            kwargs.pop("class_names", None)
        return cls(**kwargs)


def synth_generate(spec: SynthSpec) -> FlowTable:
    """Deterministically generate a synthetic FlowTable from ``spec``.

    The draw order is fixed (labels, cluster centers, numeric noise,
    category distributions, category values, missing masks) so identical
    specs produce bit-identical tables.
    """
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_rows, len(spec.class_names)
    priors = np.asarray(spec.priors, dtype=np.float64)

    label_idx = rng.choice(k, size=n, p=priors)

    numeric: dict[str, np.ndarray] = {}
    if spec.n_numeric:
        centers = rng.normal(0.0, spec.separation, size=(k, spec.n_numeric))
        values = centers[label_idx] + rng.standard_normal((n, spec.n_numeric))
        for j in range(spec.n_numeric):
            numeric[f"f{j}"] = np.ascontiguousarray(values[:, j])

    categorical: dict[str, list] = {}
    n_alpha = len(_CATEGORY_ALPHABET)
    for j in range(spec.n_categorical):
        pmf = rng.dirichlet(np.full(n_alpha, 0.5), size=k)
        u = rng.random(n)
        cdf = np.cumsum(pmf[label_idx], axis=1)
        idx = np.minimum((cdf < u[:, None]).sum(axis=1), n_alpha - 1)
        categorical[f"f{spec.n_numeric + j}"] = [_CATEGORY_ALPHABET[i] for i in idx]

    if spec.missing_rate > 0:
        if spec.n_numeric:
            mask = rng.random((n, spec.n_numeric)) < spec.missing_rate
            for j in range(spec.n_numeric):
                col = numeric[f"f{j}"]
                col[mask[:, j]] = np.nan
        if spec.n_categorical:
            mask = rng.random((n, spec.n_categorical)) < spec.missing_rate
            for j in range(spec.n_categorical):
                name = f"f{spec.n_numeric + j}"
                col = categorical[name]
                hit = np.nonzero(mask[:, j])[0]
                for i in hit:
                    col[i] = None

    labels = [spec.class_names[i] for i in label_idx]
    return FlowTable(schema=spec.schema, numeric=numeric, categorical=categorical, labels=labels)


def load_csv(path, schema: FlowSchema) -> FlowTable:
    """Parse a flow CSV into a FlowTable, streaming row by row.

    Empty or unparseable numeric cells (including non-finite values) become
    missing; empty categorical cells become missing; columns not named by
    the schema are ignored.
    """
    num_names = schema.numeric_columns
    cat_names = schema.categorical_columns
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise PipelineError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path}: file is empty (no header row)")
        positions = {name: i for i, name in enumerate(header)}
        for name in (*num_names, *cat_names, schema.label_column):
            if name not in positions:
                raise SchemaMismatchError(f"{path}: header is missing column {name!r}")
        num_pos = [positions[n] for n in num_names]
        cat_pos = [positions[n] for n in cat_names]
        label_pos = positions[schema.label_column]
        width = max([label_pos, *num_pos, *cat_pos]) + 1

        num_acc = [array("d") for _ in num_names]
        cat_acc: list[list] = [[] for _ in cat_names]
        labels: list[str] = []
        nan = math.nan
        isfinite = math.isfinite
        intern = sys.intern
        for lineno, row in enumerate(reader, start=2):
            if len(row) < width:
                row = row + [""] * (width - len(row))
            for acc, pos in zip(num_acc, num_pos):
                cell = row[pos]
                if not cell:
                    acc.append(nan)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    v = nan
                acc.append(v if isfinite(v) else nan)
            for acc, pos in zip(cat_acc, cat_pos):
                cell = row[pos]
                acc.append(intern(cell) if cell else None)
            label = row[label_pos]
            if not label:
                raise PipelineError(f"{path}: empty label at line {lineno}")
            labels.append(intern(label))

    numeric = {name: np.asarray(acc, dtype=np.float64) for name, acc in zip(num_names, num_acc)}
    categorical = {name: acc for name, acc in zip(cat_names, cat_acc)}
    return FlowTable(schema=schema, numeric=numeric, categorical=categorical, labels=labels)


def write_csv(table: FlowTable, path) -> None:
    """Write a FlowTable as CSV: features in schema order, label last.

    Missing slots serialize as empty cells; numeric values use shortest
    round-trip decimal formatting so load_csv recovers them exactly.
    """
    schema = table.schema
    columns = []
    for name, kind in schema.feature_columns:
        if kind == NUMERIC:
            columns.append((table.numeric[name], True))
        else:
            columns.append((table.categorical[name], False))
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([name for name, _ in schema.feature_columns] + [schema.label_column])
            labels = table.labels
            for i in range(table.n_rows):
                row = []
                for col, is_num in columns:
                    v = col[i]
                    if is_num:
                        row.append("" if math.isnan(v) else repr(float(v)))
                    else:
                        row.append("" if v is None else v)
                row.append(labels[i])
                writer.writerow(row)
    except OSError as exc:
        raise PipelineError(f"cannot write {path}: {exc}") from exc
