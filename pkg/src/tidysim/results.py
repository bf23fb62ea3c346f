"""Results-table shaping: join back to the grid, reshape wide to long, sidecars.

Analysis starts from the left join of grid and results on ``row_id``: every
grid row appears exactly once, rows without results carry null outcomes.
Wide-format results (analysis factors encoded in column names like
``post_uncorrected_pvalue``) pivot back to long with parsed factor columns;
the separator is a single underscore, so level and value names must not
contain one.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SchemaError
from .grid import Grid, RESERVED_COLUMN_NAMES
from .tableio import Column, Table

_ALWAYS_ID = RESERVED_COLUMN_NAMES | {"status"}


def join_grid_results(grid: Grid, results: Table) -> Table:
    """Left join of grid columns and result columns keyed by ``row_id``."""
    if "row_id" not in results:
        raise SchemaError("results table has no row_id column")
    grid_table = grid.materialize()
    grid_rids = grid_table.column("row_id").values
    res_rids = results.column("row_id").values.astype(np.uint64)

    order = np.argsort(res_rids, kind="stable")
    sorted_rids = res_rids[order]
    if len(sorted_rids) > 1 and np.any(sorted_rids[1:] == sorted_rids[:-1]):
        dup = int(sorted_rids[:-1][sorted_rids[1:] == sorted_rids[:-1]][0])
        raise SchemaError(f"duplicate row_id {dup} in results "
                          "(one result row per grid row)")

    pos = np.searchsorted(sorted_rids, grid_rids)
    pos_clipped = np.minimum(pos, max(len(sorted_rids) - 1, 0))
    if len(sorted_rids):
        found = sorted_rids[pos_clipped] == grid_rids
    else:
        found = np.zeros(len(grid_rids), dtype=bool)
    if int(found.sum()) != len(res_rids):
        raise SchemaError("results contain row_ids that are absent from the grid")

    src = order[pos_clipped] if len(sorted_rids) else np.zeros(len(grid_rids), int)
    cols = dict(grid_table.columns)
    for name in results.names:
        if name == "row_id":
            continue
        if name in cols:
            raise SchemaError(f"result column {name!r} collides with a grid column")
        col = results.column(name)
        if len(sorted_rids):
            values = col.values[src]
            mask = found & col.valid[src]
        else:
            values = np.full(len(grid_rids), col.values.dtype.type(0)
                             if col.dtype != "text" else "", dtype=col.values.dtype)
            mask = found
        cols[name] = Column(col.dtype, values, col.categories, mask)
    return Table(cols, grid_table.metadata)


def parse_wide_name(name: str, n_factors: int) -> tuple[tuple[str, ...], str] | None:
    """Split ``level_..._value``; None when the shape does not match."""
    if name in _ALWAYS_ID:
        return None
    parts = name.split("_")
    if len(parts) != n_factors + 1 or any(not p for p in parts):
        return None
    return tuple(parts[:-1]), parts[-1]


def pivot_long(wide: Table, value_names: Sequence[str],
               factor_names: Sequence[str]) -> Table:
    """Turn wide analysis columns into rows, one per analysis-factor combination.

    Every non-id column must parse as ``<level>_..._<value>`` with one level
    per entry of ``factor_names`` and a value name from ``value_names``; the
    parsed levels become categorical columns.  The long row id is
    synthesized as ``wide_row_id * n_combinations + combination_index``.
    """
    value_names = list(value_names)
    factor_names = list(factor_names)
    if not value_names or not factor_names:
        raise SchemaError("pivot_long needs at least one value and one factor name")
    if "row_id" not in wide:
        raise SchemaError("wide table has no row_id column")
    for f in factor_names:
        if f in wide:
            raise SchemaError(f"factor column {f!r} already exists in the table")

    id_cols: list[str] = []
    combos: list[tuple[str, ...]] = []
    by_combo: dict[tuple[str, ...], dict[str, str]] = {}
    for name in wide.names:
        parsed = parse_wide_name(name, len(factor_names))
        if parsed is None:
            id_cols.append(name)
            continue
        levels, value = parsed
        if value not in value_names:
            raise SchemaError(
                f"cannot parse wide column {name!r}: value name {value!r} is not "
                f"one of {value_names}")
        if levels not in by_combo:
            combos.append(levels)
            by_combo[levels] = {}
        if value in by_combo[levels]:
            raise SchemaError(f"duplicate wide column for {name!r}")
        by_combo[levels][value] = name
    if not combos:
        raise SchemaError("no wide value columns found")
    for levels in combos:
        missing = set(value_names) - set(by_combo[levels])
        if missing:
            raise SchemaError(
                f"analysis combination {'_'.join(levels)} is missing value "
                f"columns {sorted(missing)}")

    n_in = wide.n_rows
    n_combos = len(combos)
    out: dict[str, Column] = {}

    wide_rids = wide.column("row_id").values.astype(np.uint64)
    long_rids = np.repeat(wide_rids, n_combos) * np.uint64(n_combos)
    long_rids += np.tile(np.arange(n_combos, dtype=np.uint64), n_in)
    out["row_id"] = Column("uint64", long_rids)

    for name in id_cols:
        if name == "row_id":
            continue
        col = wide.column(name)
        idx = np.repeat(np.arange(n_in), n_combos)
        out[name] = col.take(idx)

    for j, fname in enumerate(factor_names):
        levels_in_order: list[str] = []
        for combo in combos:
            if combo[j] not in levels_in_order:
                levels_in_order.append(combo[j])
        lookup = {lv: i for i, lv in enumerate(levels_in_order)}
        per_combo = np.array([lookup[c[j]] for c in combos], dtype=np.int32)
        out[fname] = Column("categorical", np.tile(per_combo, n_in),
                            tuple(levels_in_order))

    for value in value_names:
        sources = [wide.column(by_combo[c][value]) for c in combos]
        dtypes = {s.dtype for s in sources}
        if len(dtypes) > 1:
            raise SchemaError(
                f"wide columns for value {value!r} have mixed dtypes "
                f"{sorted(dtypes)}")
        first = sources[0]
        if any(s.categories != first.categories for s in sources):
            raise SchemaError(
                f"wide columns for value {value!r} have mixed categorical levels")
        values = np.empty(n_in * n_combos, dtype=first.values.dtype)
        mask = np.empty(n_in * n_combos, dtype=bool)
        for c, src in enumerate(sources):
            values[c::n_combos] = src.values
            mask[c::n_combos] = src.valid
        out[value] = Column(first.dtype, values, first.categories, mask)

    return Table(out)


def attach_sidecar(results: Table, column: str,
                   base_dir: Path | str | None = None) -> Table:
    """Check that per-row sidecar files exist; missing files are reported, not raised."""
    col = results.column(column)
    if col.dtype != "text":
        raise SchemaError(f"sidecar column {column!r} must be text, is {col.dtype}")
    base = Path(base_dir) if base_dir is not None else None
    exists = []
    for i in range(results.n_rows):
        value = col.item(i)
        if value is None:
            exists.append(False)
            continue
        path = Path(value)
        if base is not None and not path.is_absolute():
            path = base / path
        exists.append(path.exists())
    out: dict[str, Column] = {}
    if "row_id" in results:
        out["row_id"] = results.column("row_id")
    out[column] = col
    out["exists"] = Column("boolean", np.array(exists, dtype=bool))
    return Table(out)
