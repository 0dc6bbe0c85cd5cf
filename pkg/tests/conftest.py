import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from robustids import flowdata, preprocess  # noqa: E402

THREE_CLASS_SPEC = dict(
    n_rows=2000,
    n_numeric=5,
    n_categorical=2,
    class_names=("benign", "dos", "scan"),
    class_priors=(0.5, 0.3, 0.2),
    missing_rate=0.05,
    separation=2.0,
    seed=42,
)


@pytest.fixture(scope="session")
def small_table():
    return flowdata.synth_generate(flowdata.SynthSpec(**THREE_CLASS_SPEC))


@pytest.fixture(scope="session")
def small_matrix(small_table):
    stats = preprocess.fit_stats(small_table)
    X, y = preprocess.transform(small_table, stats)
    return stats, X, y


@pytest.fixture(scope="session")
def ten_class_matrix():
    """Mid-size seeded dataset with the default ten-class mix."""
    spec = flowdata.SynthSpec(
        n_rows=6000, n_numeric=8, n_categorical=2, missing_rate=0.01, separation=2.0, seed=7
    )
    table = flowdata.synth_generate(spec)
    stats = preprocess.fit_stats(table)
    X, y = preprocess.transform(table, stats)
    return stats, X, y


def make_matrix(values):
    return preprocess.FeatureMatrix.from_array(np.asarray(values, dtype=np.float64))
