import hashlib
import math

import numpy as np
import pytest

from robustids import flowdata
from robustids.errors import EmptyInputError, InvalidSpecError, SchemaMismatchError
from robustids.flowdata import FlowSchema, FlowTable, SynthSpec


def schema_2num_1cat():
    return FlowSchema(feature_columns=(("f0", "numeric"), ("f1", "numeric"), ("f2", "categorical")))


class TestSchema:
    def test_duplicate_names_rejected(self):
        with pytest.raises(InvalidSpecError):
            FlowSchema(feature_columns=(("a", "numeric"), ("a", "numeric")))

    def test_label_collision_rejected(self):
        with pytest.raises(InvalidSpecError):
            FlowSchema(feature_columns=(("Attack", "numeric"),))

    def test_needs_a_feature(self):
        with pytest.raises(InvalidSpecError):
            FlowSchema(feature_columns=())

    def test_dict_round_trip(self):
        s = schema_2num_1cat()
        assert FlowSchema.from_dict(s.to_dict()) == s


class TestLoadCsv:
    def test_blank_numeric_cell_becomes_missing(self, tmp_path):
        p = tmp_path / "flows.csv"
        p.write_text("f0,f1,f2,Attack\n1.5,2.0,tcp,benign\n,3.0,udp,dos\n9.0,4.0,tcp,benign\n")
        t = flowdata.load_csv(p, schema_2num_1cat())
        assert t.n_rows == 3
        assert math.isnan(t.numeric["f0"][1])
        assert t.numeric["f0"][0] == 1.5
        assert t.categorical["f2"] == ["tcp", "udp", "tcp"]
        assert t.labels == ["benign", "dos", "benign"]

    def test_unparseable_numeric_becomes_missing(self, tmp_path):
        p = tmp_path / "flows.csv"
        p.write_text("f0,f1,f2,Attack\nwhat,2.0,tcp,benign\n")
        t = flowdata.load_csv(p, schema_2num_1cat())
        assert math.isnan(t.numeric["f0"][0])

    def test_missing_label_column_is_schema_mismatch(self, tmp_path):
        p = tmp_path / "flows.csv"
        p.write_text("f0,f1,f2\n1,2,tcp\n")
        with pytest.raises(SchemaMismatchError, match="Attack"):
            flowdata.load_csv(p, schema_2num_1cat())

    def test_missing_feature_column_named(self, tmp_path):
        p = tmp_path / "flows.csv"
        p.write_text("f0,f2,Attack\n1,tcp,benign\n")
        with pytest.raises(SchemaMismatchError, match="f1"):
            flowdata.load_csv(p, schema_2num_1cat())

    def test_empty_file_is_empty_input(self, tmp_path):
        p = tmp_path / "flows.csv"
        p.write_text("")
        with pytest.raises(EmptyInputError):
            flowdata.load_csv(p, schema_2num_1cat())

    def test_extra_columns_ignored(self, tmp_path):
        p = tmp_path / "flows.csv"
        p.write_text("junk,f0,f1,f2,Attack,more\nx,1,2,tcp,benign,y\n")
        t = flowdata.load_csv(p, schema_2num_1cat())
        assert t.n_rows == 1 and t.numeric["f0"][0] == 1.0


class TestWriteCsv:
    def test_empty_rows_gives_header_only(self, tmp_path):
        t = FlowTable(
            schema=schema_2num_1cat(),
            numeric={"f0": np.empty(0), "f1": np.empty(0)},
            categorical={"f2": []},
            labels=[],
        )
        p = tmp_path / "out.csv"
        flowdata.write_csv(t, p)
        assert p.read_text() == "f0,f1,f2,Attack\n"

    def test_missing_slot_serializes_empty(self, tmp_path):
        t = FlowTable(
            schema=schema_2num_1cat(),
            numeric={"f0": np.array([np.nan]), "f1": np.array([2.5])},
            categorical={"f2": [None]},
            labels=["dos"],
        )
        p = tmp_path / "out.csv"
        flowdata.write_csv(t, p)
        assert p.read_text().splitlines()[1] == ",2.5,,dos"


class TestRoundTrip:
    def test_synthetic_100_rows(self, tmp_path):
        spec = SynthSpec(
            n_rows=100, n_numeric=3, n_categorical=2,
            class_names=("a", "b"), class_priors=(0.6, 0.4),
            missing_rate=0.1, separation=1.0, seed=5,
        )
        t = flowdata.synth_generate(spec)
        p = tmp_path / "rt.csv"
        flowdata.write_csv(t, p)
        t2 = flowdata.load_csv(p, spec.schema)
        assert t.equals(t2)

    def test_1000_rows_round_trip(self, tmp_path):
        spec = SynthSpec(n_rows=1000, n_numeric=4, n_categorical=1, missing_rate=0.03, seed=11)
        t = flowdata.synth_generate(spec)
        p = tmp_path / "rt.csv"
        flowdata.write_csv(t, p)
        assert flowdata.load_csv(p, spec.schema).equals(t)


class TestSynthGenerate:
    def test_invalid_spec_rejected(self):
        with pytest.raises(InvalidSpecError):
            SynthSpec(n_rows=0, n_numeric=2, n_categorical=0)
        with pytest.raises(InvalidSpecError):
            SynthSpec(n_rows=10, n_numeric=0, n_categorical=0)
        with pytest.raises(InvalidSpecError):
            SynthSpec(n_rows=10, n_numeric=1, n_categorical=0,
                      class_names=("a", "b"), class_priors=(0.7, 0.4))

    def test_missing_rate_zero_means_no_missing(self):
        spec = SynthSpec(n_rows=300, n_numeric=3, n_categorical=2, missing_rate=0.0, seed=3)
        t = flowdata.synth_generate(spec)
        for col in t.numeric.values():
            assert not np.isnan(col).any()
        for col in t.categorical.values():
            assert None not in col

    def test_same_seed_gives_identical_csv_bytes(self, tmp_path):
        spec = SynthSpec(n_rows=500, n_numeric=3, n_categorical=2, missing_rate=0.05, seed=77)
        digests = []
        for name in ("a.csv", "b.csv"):
            t = flowdata.synth_generate(spec)
            p = tmp_path / name
            flowdata.write_csv(t, p)
            digests.append(hashlib.sha256(p.read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_class_fractions_match_default_priors(self):
        # Default priors follow the NF-ToN-IoT-v2 class mix.
        n = 40000
        spec = SynthSpec(n_rows=n, n_numeric=2, n_categorical=0, seed=2718)
        t = flowdata.synth_generate(spec)
        counts = {name: 0 for name in spec.class_names}
        for lab in t.labels:
            counts[lab] += 1
        for name, p in zip(spec.class_names, spec.priors):
            se = math.sqrt(p * (1 - p) / n)
            assert abs(counts[name] / n - p) <= 3 * se, name

    def test_separation_moves_cluster_centers_apart(self):
        def spread(sep):
            spec = SynthSpec(n_rows=4000, n_numeric=4, n_categorical=0,
                             class_names=("a", "b"), class_priors=(0.5, 0.5),
                             separation=sep, seed=9)
            t = flowdata.synth_generate(spec)
            labs = np.asarray(t.labels)
            mats = np.column_stack([t.numeric[f"f{j}"] for j in range(4)])
            mu_a = mats[labs == "a"].mean(axis=0)
            mu_b = mats[labs == "b"].mean(axis=0)
            return float(np.linalg.norm(mu_a - mu_b))

        assert spread(4.0) > spread(0.5)


class TestFlowTable:
    def test_select_orders_rows(self, small_table):
        sub = small_table.select([5, 1, 3])
        assert sub.n_rows == 3
        assert sub.labels == [small_table.labels[i] for i in (5, 1, 3)]
        for name in small_table.schema.numeric_columns:
            expected = small_table.numeric[name][[5, 1, 3]]
            assert np.array_equal(sub.numeric[name], expected, equal_nan=True)

    def test_empty_label_rejected(self):
        with pytest.raises(InvalidSpecError):
            FlowTable(
                schema=schema_2num_1cat(),
                numeric={"f0": np.array([1.0]), "f1": np.array([2.0])},
                categorical={"f2": ["tcp"]},
                labels=[""],
            )
