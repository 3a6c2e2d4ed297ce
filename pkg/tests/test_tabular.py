import logging

import numpy as np
import pytest

from conftest import ADULT_COLUMNS, adult_like_rows, write_csv
from divjudge.errors import DataError
from divjudge.tabular import (
    MISSING_CATEGORY,
    RawTable,
    Schema,
    align,
    decode_categorical,
    encode,
    infer_schema,
    load_csv,
    write_report,
)


def table(header, rows):
    return RawTable(header, rows)


class TestLoadCsv:
    def test_adult_format(self, adult_csv):
        t = load_csv(adult_csv)
        assert t.header == ADULT_COLUMNS and len(t) == 3000
        assert None in t.column("workclass")
        assert "?" not in t.column("occupation")

    def test_strips_and_custom_tokens(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a, b\n 1 ,NA\n2,x\n", encoding="utf-8")
        t = load_csv(p, missing_tokens=("NA",))
        assert t.header == ["a", "b"]
        assert t.rows == [["1", None], ["2", "x"]]

    def test_ragged_row_names_line(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n3\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 3"):
            load_csv(p)

    @pytest.mark.parametrize("content", [b"", b"a,a\n1,2\n", b"a\n\xff\xfe\n"])
    def test_bad_files(self, tmp_path, content):
        p = tmp_path / "x.csv"
        p.write_bytes(content)
        with pytest.raises(DataError):
            load_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv")


class TestSchema:
    def test_kinds(self):
        t = table(["c", "i", "b", "k"], [["1.5", "3", "yes", "red"], ["2.0", "4", "no", "blue"],
                                         ["0.1", "5", "yes", "green"]])
        kinds = [c.kind for c in infer_schema(t).columns]
        assert kinds == ["continuous", "integer", "binary", "categorical"]

    def test_adult_schema(self, adult_csv):
        s = infer_schema(load_csv(adult_csv))
        by = {c.name: c for c in s.columns}
        assert by["age"].kind == "integer" and by["sex"].kind == "binary"
        assert by["workclass"].kind == "categorical"
        assert MISSING_CATEGORY in by["workclass"].vocabulary

    def test_numeric_stats_from_real(self):
        s = infer_schema(table(["x"], [["1"], ["2"], ["3"], [None]]))
        col = s.columns[0]
        assert col.mean == pytest.approx(2.0) and col.std == pytest.approx(np.std([1, 2, 3]))
        assert col.missing_indicator

    def test_constant_numeric_std_one(self):
        s = infer_schema(table(["x", "y"], [["5", "a"], ["5", "b"]]))
        assert s.columns[0].std == 1.0

    def test_round_trip(self, adult_csv):
        s = infer_schema(load_csv(adult_csv))
        assert Schema.from_dict(s.to_dict()) == s

    def test_all_missing_column(self):
        with pytest.raises(DataError):
            infer_schema(table(["x"], [[None], [None]]))


class TestEncode:
    def test_width_matches_schema(self, adult_csv):
        t = load_csv(adult_csv)
        s = infer_schema(t)
        m = encode(t, s)
        assert m.shape == (3000, s.width) and len(m.feature_names) == s.width
        assert np.all(np.isfinite(m.values))

    def test_one_hot_blocks_sum_to_one(self, adult_csv):
        t = load_csv(adult_csv)
        s = infer_schema(t)
        m = encode(t, s)
        start = 0
        for col in s.columns:
            if col.kind == "categorical":
                np.testing.assert_array_equal(m.values[:, start:start + col.width].sum(axis=1), 1.0)
            start += col.width

    def test_categorical_round_trip(self):
        t = table(["k"], [["a"], [None], ["b"], ["a"]])
        s = infer_schema(table(["k"], [["a"], [None], ["b"], ["c"]]))
        m = encode(t, s)
        back = [decode_categorical(row, s.columns[0]) for row in m.values]
        assert back == ["a", MISSING_CATEGORY, "b", "a"]

    def test_standardized_numeric(self):
        real = table(["x"], [["1"], ["2"], ["3"]])
        m = encode(real, infer_schema(real))
        np.testing.assert_allclose(m.values.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(m.values.std(axis=0), 1, atol=1e-12)

    def test_unknown_category_zero_block(self, caplog):
        real = table(["k"], [["a"], ["b"], ["c"]])
        s = infer_schema(real)
        with caplog.at_level(logging.WARNING):
            m = encode(table(["k"], [["z"], ["a"]]), s, "synthetic")
        np.testing.assert_array_equal(m.values[0], 0)
        assert decode_categorical(m.values[0], s.columns[0]) is None
        assert m.report["k"]["unknown"] == 1
        assert "outside the real-data schema" in caplog.text

    def test_missing_binary_imputes_share(self):
        real = table(["b"], [["y"], ["n"], ["n"], ["n"], [None]])
        s = infer_schema(real)
        m = encode(real, s)
        col = s.columns[0]
        share = col.mean
        assert col.vocabulary == ["y", "n"] and share == pytest.approx(0.75)
        assert m.values[4, 0] == pytest.approx(share)
        assert m.values[4, 1] == 1.0  # missing indicator

    def test_missing_numeric_gets_mean_and_indicator(self):
        real = table(["x"], [["1"], ["3"], ["5"], [None]])
        m = encode(real, infer_schema(real))
        np.testing.assert_array_equal(m.values[3], [0.0, 1.0])
        assert m.report["x"]["missing"] == 1

    def test_permuted_columns_encode_identically(self):
        rows = adult_like_rows(200, seed=1)
        t = table(ADULT_COLUMNS, rows)
        perm = list(reversed(range(len(ADULT_COLUMNS))))
        shuffled = table([ADULT_COLUMNS[j] for j in perm], [[r[j] for j in perm] for r in rows])
        s = infer_schema(t)
        np.testing.assert_array_equal(encode(t, s).values, encode(shuffled, s).values)

    def test_column_name_mismatch(self):
        s = infer_schema(table(["a", "b"], [["1", "x"], ["2", "y"]]))
        with pytest.raises(DataError, match="missing"):
            align(table(["a", "c"], [["1", "x"]]), s)

    def test_array_protocol(self):
        real = table(["x"], [["1"], ["2"], ["4"]])
        m = encode(real, infer_schema(real))
        assert np.asarray(m).shape == (3, 1)


def test_ragged_raw_table_rejected():
    with pytest.raises(DataError):
        RawTable(["a", "b"], [["1"]])


def test_write_report(tmp_path):
    p = tmp_path / "r.json"
    write_report({"x": {"missing": 1, "unknown": 0}}, p)
    assert '"missing": 1' in p.read_text()


def test_adult_csv_fixture_writes_header(tmp_path):
    p = write_csv(tmp_path / "t.csv", ["a"], [["1"]])
    assert p.read_text().splitlines() == ["a", "1"]


def test_encode_is_deterministic(adult_csv):
    t = load_csv(adult_csv)
    s = infer_schema(t)
    np.testing.assert_array_equal(encode(t, s).values, encode(t, s).values)
