"""Column-table semantics plus Parquet/CSV round-trips."""

import numpy as np
import pytest

from tidysim import Column, SchemaError, Table, concat_tables, read_table, write_table
from tidysim.tableio import column_from_values


def mixed_table():
    return Table({
        "row_id": Column("uint64", np.array([0, 1, 2, 3], dtype=np.uint64)),
        "est": column_from_values("real", [1.5, None, -0.25, float("nan")]),
        "count": column_from_values("integer", [3, 4, None, 0]),
        "flag": column_from_values("boolean", [True, None, False, True]),
        "label": column_from_values("categorical", ["a", "b", None, "a"],
                                    categories=("a", "b")),
        "status": column_from_values("text", ["ok", "error: boom", "ok", None]),
    }, metadata={"origin": "unit-test"})


class TestTableBasics:
    def test_row_access_with_nulls(self):
        t = mixed_table()
        assert t.row(1) == {"row_id": 1, "est": None, "count": 4, "flag": None,
                            "label": "b", "status": "error: boom"}

    def test_take_and_sort(self):
        t = mixed_table().take([2, 0])
        assert t.column("row_id").to_pylist() == [2, 0]
        assert t.sort_by("row_id").column("row_id").to_pylist() == [0, 2]

    def test_equals_detects_value_change(self):
        a, b = mixed_table(), mixed_table()
        assert a.equals(b)
        b.columns["count"].values[0] = 99
        assert not a.equals(b)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(SchemaError):
            Table({"a": column_from_values("integer", [1]),
                   "b": column_from_values("integer", [1, 2])})

    def test_concat(self):
        t = mixed_table()
        cc = concat_tables([t, t])
        assert cc.n_rows == 8
        assert cc.slice(0, 4).equals(t) and cc.slice(4, 8).equals(t)

    def test_unknown_column_error_names_options(self):
        with pytest.raises(SchemaError, match="row_id"):
            mixed_table().column("missing")


class TestRoundTrips:
    @pytest.mark.parametrize("fmt", ["parquet", "csv"])
    def test_round_trip(self, tmp_path, fmt):
        t = mixed_table()
        path = tmp_path / f"t.{fmt}"
        write_table(t, path)
        back = read_table(path)
        assert back.equals(t)
        assert back.metadata == {"origin": "unit-test"}

    def test_round_trip_float_precision_csv(self, tmp_path):
        values = [0.1 + 0.2, 1e-17, -3.141592653589793, 2.0**-1074]
        t = Table({"v": column_from_values("real", values)})
        write_table(t, tmp_path / "v.csv")
        assert read_table(tmp_path / "v.csv").column("v").to_pylist() == values

    def test_uint64_full_range(self, tmp_path):
        values = np.array([0, 2**63, 2**64 - 1], dtype=np.uint64)
        t = Table({"seed": Column("uint64", values)})
        for name in ("s.parquet", "s.csv"):
            write_table(t, tmp_path / name)
            got = read_table(tmp_path / name).column("seed").values
            assert np.array_equal(got, values)

    def test_csv_header_mismatch_rejected(self, tmp_path):
        t = mixed_table()
        write_table(t, tmp_path / "t.csv")
        other = Table({"x": column_from_values("integer", [1])})
        write_table(other, tmp_path / "other.csv")
        (tmp_path / "t.schema.json").write_text(
            (tmp_path / "other.schema.json").read_text())
        with pytest.raises(SchemaError):
            read_table(tmp_path / "t.csv")

    def test_atomic_write_keeps_old_file_on_failure(self, tmp_path):
        path = tmp_path / "out.parquet"
        write_table(mixed_table(), path)
        before = path.read_bytes()
        with pytest.raises(SchemaError):
            write_table(mixed_table(), path, format="nope")
        assert path.read_bytes() == before

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="no such file"):
            read_table(tmp_path / "absent.parquet")
