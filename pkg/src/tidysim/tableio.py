"""Minimal columnar table with Parquet and CSV(+schema sidecar) round-trips.

Everything tidysim stores or exchanges on disk (grids, results, aggregates)
is a :class:`Table`: an ordered mapping of name -> :class:`Column`, where a
column is a numpy array plus an optional validity mask.  Parquet is the
primary format; CSV is supported through a JSON schema sidecar
(``<stem>.schema.json``) so that types and categorical dictionaries survive
the text round-trip.

Column dtypes: ``integer`` (int64), ``real`` (float64), ``boolean``,
``text`` (object array of str), ``categorical`` (int32 codes + string
levels) and ``uint64`` (row ids and seeds).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pyarrow as pa
import pyarrow.parquet as pq

from .errors import SchemaError

DTYPES = ("integer", "real", "boolean", "text", "categorical", "uint64")

_NUMPY_DTYPE = {
    "integer": np.int64,
    "real": np.float64,
    "boolean": np.bool_,
    "uint64": np.uint64,
}

_ARROW_TYPE = {
    "integer": pa.int64(),
    "real": pa.float64(),
    "boolean": pa.bool_(),
    "text": pa.string(),
    "uint64": pa.uint64(),
}

_META_KEY = b"tidysim_meta"


@dataclass
class Column:
    """One typed column; ``mask`` is True where the value is valid."""

    dtype: str
    values: np.ndarray
    categories: tuple[str, ...] | None = None
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.dtype not in DTYPES:
            raise SchemaError(f"unknown column dtype {self.dtype!r}")
        if self.dtype == "categorical":
            if self.categories is None:
                raise SchemaError("categorical column requires categories")
            self.values = np.asarray(self.values, dtype=np.int32)
        elif self.dtype == "text":
            self.values = np.asarray(self.values, dtype=object)
        else:
            self.values = np.asarray(self.values, dtype=_NUMPY_DTYPE[self.dtype])
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise SchemaError("mask shape does not match values")
            if self.mask.all():
                self.mask = None
            else:
                # canonical fill so equal tables are bytewise equal
                self.values = self.values.copy()
                self.values[~self.mask] = _null_fill(self.dtype)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(len(self.values), dtype=bool)
        return self.mask

    def take(self, idx: np.ndarray) -> "Column":
        mask = None if self.mask is None else self.mask[idx]
        return Column(self.dtype, self.values[idx], self.categories, mask)

    def item(self, i: int) -> Any:
        """The Python value at row ``i`` (None when invalid)."""
        if self.mask is not None and not self.mask[i]:
            return None
        v = self.values[i]
        if self.dtype == "categorical":
            return self.categories[int(v)]
        if self.dtype == "integer":
            return int(v)
        if self.dtype == "uint64":
            return int(v)
        if self.dtype == "real":
            return float(v)
        if self.dtype == "boolean":
            return bool(v)
        return v

    def to_pylist(self) -> list:
        return [self.item(i) for i in range(len(self))]

    def equals(self, other: "Column") -> bool:
        if self.dtype != other.dtype or len(self) != len(other):
            return False
        if self.categories != other.categories:
            return False
        if not np.array_equal(self.valid, other.valid):
            return False
        if self.dtype == "real":
            return np.array_equal(self.values, other.values, equal_nan=True)
        return bool(np.all(self.values == other.values))


def _null_fill(dtype: str) -> Any:
    if dtype == "text":
        return ""
    if dtype == "boolean":
        return False
    if dtype == "real":
        return 0.0
    return 0


def column_from_values(dtype: str, values: Iterable[Any],
                       categories: Sequence[str] | None = None) -> Column:
    """Build a column from Python values, treating None as null."""
    vals = list(values)
    mask = np.array([v is not None for v in vals], dtype=bool)
    fill = _null_fill(dtype)
    if dtype == "categorical":
        if categories is None:
            seen: dict[str, int] = {}
            for v in vals:
                if v is not None and v not in seen:
                    seen[v] = len(seen)
            categories = tuple(seen)
        lookup = {c: i for i, c in enumerate(categories)}
        data = np.array([lookup[v] if v is not None else 0 for v in vals],
                        dtype=np.int32)
        return Column("categorical", data, tuple(categories), mask)
    if dtype == "text":
        data = np.array([v if v is not None else fill for v in vals], dtype=object)
    else:
        data = np.array([v if v is not None else fill for v in vals],
                        dtype=_NUMPY_DTYPE[dtype])
    return Column(dtype, data, None, mask)


class Table:
    """Ordered collection of equal-length named columns."""

    def __init__(self, columns: dict[str, Column],
                 metadata: dict[str, str] | None = None):
        if columns:
            lengths = {len(c) for c in columns.values()}
            if len(lengths) > 1:
                raise SchemaError(f"column lengths differ: {sorted(lengths)}")
        self.columns = dict(columns)
        self.metadata = dict(metadata or {})

    # -- basic accessors ---------------------------------------------------

    @property
    def n_rows(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def column(self, name: str) -> Column:
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(
                f"no column {name!r}; available: {', '.join(self.columns)}"
            ) from None

    def row(self, i: int) -> dict[str, Any]:
        return {name: col.item(i) for name, col in self.columns.items()}

    # -- transforms ----------------------------------------------------------

    def take(self, idx: np.ndarray | Sequence[int]) -> "Table":
        idx = np.asarray(idx)
        return Table({n: c.take(idx) for n, c in self.columns.items()},
                     self.metadata)

    def slice(self, start: int, stop: int) -> "Table":
        return self.take(np.arange(start, stop))

    def sort_by(self, name: str) -> "Table":
        order = np.argsort(self.column(name).values, kind="stable")
        return self.take(order)

    def with_column(self, name: str, col: Column) -> "Table":
        cols = dict(self.columns)
        cols[name] = col
        return Table(cols, self.metadata)

    def equals(self, other: "Table") -> bool:
        if self.names != other.names:
            return False
        return all(self.columns[n].equals(other.columns[n]) for n in self.names)

    # -- Arrow bridge --------------------------------------------------------

    def to_arrow(self) -> pa.Table:
        arrays = []
        for name, col in self.columns.items():
            null_mask = None if col.mask is None else ~col.mask
            if col.dtype == "categorical":
                codes = pa.array(col.values, pa.int32(), mask=null_mask)
                arr = pa.DictionaryArray.from_arrays(
                    codes, pa.array(list(col.categories), pa.string()))
            elif col.dtype == "text":
                arr = pa.array(list(col.values), pa.string(), mask=null_mask)
            else:
                arr = pa.array(col.values, _ARROW_TYPE[col.dtype], mask=null_mask)
            arrays.append(arr)
        meta = {_META_KEY: json.dumps(self.metadata).encode()} if self.metadata else None
        return pa.table(dict(zip(self.columns, arrays))).replace_schema_metadata(meta)

    @classmethod
    def from_arrow(cls, at: pa.Table) -> "Table":
        cols: dict[str, Column] = {}
        for name in at.column_names:
            arr = at.column(name).combine_chunks()
            cols[name] = _column_from_arrow(arr)
        meta: dict[str, str] = {}
        if at.schema.metadata and _META_KEY in at.schema.metadata:
            meta = json.loads(at.schema.metadata[_META_KEY].decode())
        return cls(cols, meta)


def _column_from_arrow(arr: pa.Array) -> Column:
    mask = None
    if arr.null_count:
        mask = np.asarray(arr.is_valid())
    t = arr.type
    if pa.types.is_dictionary(t):
        cats = tuple(arr.dictionary.to_pylist())
        codes = arr.indices.fill_null(0).to_numpy(zero_copy_only=False)
        return Column("categorical", codes, cats, mask)
    if pa.types.is_uint64(t):
        vals = arr.fill_null(0).to_numpy(zero_copy_only=False)
        return Column("uint64", vals, None, mask)
    if pa.types.is_integer(t):
        vals = arr.fill_null(0).to_numpy(zero_copy_only=False).astype(np.int64)
        return Column("integer", vals, None, mask)
    if pa.types.is_floating(t):
        vals = arr.fill_null(0.0).to_numpy(zero_copy_only=False).astype(np.float64)
        return Column("real", vals, None, mask)
    if pa.types.is_boolean(t):
        vals = arr.fill_null(False).to_numpy(zero_copy_only=False)
        return Column("boolean", vals, None, mask)
    if pa.types.is_string(t) or pa.types.is_large_string(t):
        vals = np.array([v if v is not None else "" for v in arr.to_pylist()],
                        dtype=object)
        return Column("text", vals, None, mask)
    raise SchemaError(f"unsupported arrow type {t}")


def concat_tables(tables: Sequence[Table]) -> Table:
    """Stack tables with identical schemas (names, dtypes, categories)."""
    tables = [t for t in tables]
    if not tables:
        raise SchemaError("cannot concatenate zero tables")
    first = tables[0]
    for t in tables[1:]:
        if t.names != first.names:
            raise SchemaError("cannot concatenate tables with different columns")
    out: dict[str, Column] = {}
    for name in first.names:
        parts = [t.columns[name] for t in tables]
        dtypes = {p.dtype for p in parts}
        if len(dtypes) > 1:
            raise SchemaError(f"column {name!r} has mixed dtypes {sorted(dtypes)}")
        cats = {p.categories for p in parts}
        if len(cats) > 1:
            raise SchemaError(f"column {name!r} has mixed categorical levels")
        values = np.concatenate([p.values for p in parts])
        mask = None
        if any(p.mask is not None for p in parts):
            mask = np.concatenate([p.valid for p in parts])
        out[name] = Column(parts[0].dtype, values, parts[0].categories, mask)
    return Table(out, first.metadata)


# -- on-disk formats ---------------------------------------------------------

def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    """Write via a temp file + rename so readers never see partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def sidecar_path(path: Path | str) -> Path:
    """``data/grid.csv`` -> ``data/grid.schema.json``."""
    path = Path(path)
    return path.with_name(path.stem + ".schema.json")


def infer_format(path: Path | str) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".parquet", ".pq"):
        return "parquet"
    if suffix == ".csv":
        return "csv"
    raise SchemaError(f"cannot infer format from {path!r}; pass format explicitly")


def write_table(table: Table, path: Path | str, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt == "parquet":
        sink = pa.BufferOutputStream()
        pq.write_table(table.to_arrow(), sink)
        atomic_write_bytes(path, sink.getvalue().to_pybytes())
    elif fmt == "csv":
        _write_csv(table, path)
    else:
        raise SchemaError(f"unknown format {fmt!r}")


def read_table(path: Path | str, format: str | None = None) -> Table:
    path = Path(path)
    fmt = format or infer_format(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    if fmt == "parquet":
        return Table.from_arrow(pq.read_table(path))
    if fmt == "csv":
        return _read_csv(path)
    raise SchemaError(f"unknown format {fmt!r}")


def _cell_to_text(col: Column, i: int) -> str:
    if col.mask is not None and not col.mask[i]:
        return ""
    v = col.values[i]
    if col.dtype == "categorical":
        return col.categories[int(v)]
    if col.dtype == "boolean":
        return "true" if v else "false"
    if col.dtype == "real":
        return repr(float(v))
    if col.dtype == "text":
        return str(v)
    return str(int(v))


def _write_csv(table: Table, path: Path) -> None:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.names)
    cols = list(table.columns.values())
    for i in range(table.n_rows):
        writer.writerow([_cell_to_text(c, i) for c in cols])
    schema = {
        "version": 1,
        "columns": [
            {"name": name, "dtype": col.dtype,
             **({"categories": list(col.categories)} if col.dtype == "categorical" else {})}
            for name, col in table.columns.items()
        ],
        "metadata": table.metadata,
    }
    atomic_write_text(sidecar_path(path), json.dumps(schema, indent=2) + "\n")
    atomic_write_text(path, buf.getvalue())


def _text_to_value(dtype: str, text: str) -> Any:
    if dtype == "integer" or dtype == "uint64":
        return int(text)
    if dtype == "real":
        return float(text)
    if dtype == "boolean":
        if text not in ("true", "false"):
            raise SchemaError(f"invalid boolean cell {text!r}")
        return text == "true"
    return text


def _read_csv(path: Path) -> Table:
    import csv

    side = sidecar_path(path)
    if not side.exists():
        raise SchemaError(f"CSV table {path} is missing its schema sidecar {side.name}")
    schema = json.loads(side.read_text())
    specs = {c["name"]: c for c in schema["columns"]}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"CSV table {path} is empty") from None
        if set(header) != set(specs):
            raise SchemaError(
                f"CSV header {header} does not match schema sidecar columns "
                f"{list(specs)}")
        rows = list(reader)
    cols: dict[str, Column] = {}
    for j, name in enumerate(header):
        spec = specs[name]
        dtype = spec["dtype"]
        raw = [r[j] for r in rows]
        values = [None if cell == "" else _text_to_value(dtype, cell) for cell in raw]
        cols[name] = column_from_values(dtype, values, spec.get("categories"))
    # keep the sidecar's column order, not the file's
    ordered = {c["name"]: cols[c["name"]] for c in schema["columns"]}
    return Table(ordered, schema.get("metadata", {}))
