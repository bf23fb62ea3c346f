"""Simulation grids: full-factorial factor combinations stacked over iterations.

A grid row is one simulation: ``row_id``, the factor values, the iteration
number, and a derived seed.  Rows follow a fixed ordering contract: the
first-listed factor varies fastest, iteration varies slowest.  Row values
are computed on demand by mixed-radix decomposition of ``row_id``, so grids
of hundreds of millions of rows cost nothing to hold; materialization and
lazy access are guaranteed to agree.

Seeds are part of the grid (``seed = splitmix64(master_seed + row_id)``),
which makes any row replayable from the stored grid alone, and makes
filtered or sliced grids keep their original identities.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import tableio
from .errors import GridError, SchemaError
from .numerics import splitmix64, splitmix64_array
from .tableio import Column, Table

_MASK64 = 0xFFFFFFFFFFFFFFFF
_NAME_RE = re.compile(r"\A[a-z_][a-z0-9_]*\Z")

RESERVED_COLUMN_NAMES = frozenset({"row_id", "iteration", "seed"})

FACTOR_KINDS = ("integer", "real", "categorical", "boolean")

_GRID_META_KEY = "grid_spec"


def derive_seed(master_seed: int, row_id: int) -> int:
    """Per-row seed: ``splitmix64(master_seed + row_id)``, wrapping at 2^64."""
    return splitmix64((master_seed + row_id) & _MASK64)


# -- factor and grid specifications -------------------------------------------

@dataclass(frozen=True)
class FactorSpec:
    """One varied input: a name, a kind, and its ordered levels."""

    name: str
    kind: str
    levels: tuple

    def __post_init__(self) -> None:
        if not _NAME_RE.match(self.name):
            raise GridError(
                f"invalid factor name {self.name!r}: must match [a-z_][a-z0-9_]*")
        if self.name in RESERVED_COLUMN_NAMES:
            raise GridError(f"factor name {self.name!r} is reserved")
        if self.kind not in FACTOR_KINDS:
            raise GridError(
                f"factor {self.name!r}: unknown kind {self.kind!r} "
                f"(expected one of {', '.join(FACTOR_KINDS)})")
        levels = tuple(self._coerce(v) for v in self.levels)
        if not levels:
            raise GridError(f"factor {self.name!r} has no levels")
        if len(set(levels)) != len(levels):
            raise GridError(f"factor {self.name!r} has duplicate levels")
        object.__setattr__(self, "levels", levels)

    def _coerce(self, v: Any) -> Any:
        kind = self.kind
        if kind == "integer":
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise GridError(f"factor {self.name!r}: level {v!r} is not an integer")
            return int(v)
        if kind == "real":
            if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
                raise GridError(f"factor {self.name!r}: level {v!r} is not a real number")
            f = float(v)
            if not math.isfinite(f):
                raise GridError(f"factor {self.name!r}: level {v!r} is not finite")
            return f
        if kind == "boolean":
            if not isinstance(v, (bool, np.bool_)):
                raise GridError(f"factor {self.name!r}: level {v!r} is not a boolean")
            return bool(v)
        if not isinstance(v, str) or not v:
            raise GridError(
                f"factor {self.name!r}: categorical level {v!r} must be a "
                "non-empty string")
        if "_" in v:
            raise GridError(
                f"factor {self.name!r}: categorical level {v!r} may not contain "
                "'_' (reserved as the wide-name separator)")
        return v


def infer_factor(name: str, levels: Sequence[Any]) -> FactorSpec:
    """Build a FactorSpec from plain values, inferring the kind."""
    vals = list(levels)
    if not vals:
        raise GridError(f"factor {name!r} has no levels")
    if all(isinstance(v, bool) for v in vals):
        return FactorSpec(name, "boolean", tuple(vals))
    if all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
        return FactorSpec(name, "integer", tuple(vals))
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        return FactorSpec(name, "real", tuple(vals))
    if all(isinstance(v, str) for v in vals):
        return FactorSpec(name, "categorical", tuple(vals))
    raise GridError(f"factor {name!r} mixes level types: {vals!r}")


@dataclass(frozen=True)
class GridSpec:
    """Factors to cross, iteration count, master seed, optional row filter."""

    factors: tuple[FactorSpec, ...]
    iterations: int
    master_seed: int
    filter: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise GridError("grid needs at least one factor")
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise GridError(f"duplicate factor names: {sorted(names)}")
        if not isinstance(self.iterations, int) or self.iterations < 1:
            raise GridError(f"iterations must be a positive integer, got {self.iterations!r}")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed <= _MASK64:
            raise GridError(f"master_seed must be an unsigned 64-bit integer, "
                            f"got {self.master_seed!r}")

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def cells_per_iteration(self) -> int:
        return math.prod(len(f.levels) for f in self.factors)

    def total_rows(self) -> int:
        return self.cells_per_iteration() * self.iterations


@dataclass(frozen=True)
class GridRow:
    """One simulation setting."""

    row_id: int
    values: dict[str, Any]
    iteration: int
    seed: int


class UnknownFactorError(GridError, KeyError):
    """Predicate asked for a factor the grid does not have."""

    def __str__(self) -> str:  # KeyError repr-quotes its message
        return self.args[0]


class _FactorValues(Mapping):
    """Read-only factor-value view handed to row predicates."""

    __slots__ = ("_values",)

    def __init__(self, values: dict[str, Any]):
        self._values = values

    def __getitem__(self, key: str) -> Any:
        try:
            return self._values[key]
        except KeyError:
            raise UnknownFactorError(
                f"unknown factor {key!r}; available factors: "
                f"{', '.join(self._values)}") from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)


# -- filter expressions --------------------------------------------------------

_ALLOWED_COMPARES = (ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq)


def compile_filter_expression(expr: str,
                              factor_names: Sequence[str]) -> Callable[[Mapping], bool]:
    """Compile a restricted boolean expression over factor names.

    Supports comparisons (``<, <=, >, >=, ==, !=``), ``and``/``or``/``not``,
    literals, and factor names; anything else is rejected.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as e:
        raise GridError(f"invalid filter expression {expr!r}: {e.msg}") from None
    names = set(factor_names)

    def check(node: ast.AST) -> None:
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BoolOp) and isinstance(node.op, (ast.And, ast.Or)):
            for v in node.values:
                check(v)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.Not):
            check(node.operand)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            if not isinstance(node.operand, ast.Constant):
                raise GridError(f"filter {expr!r}: unary minus only on literals")
        elif isinstance(node, ast.Compare):
            if not all(isinstance(op, _ALLOWED_COMPARES) for op in node.ops):
                raise GridError(f"filter {expr!r}: only <, <=, >, >=, ==, != allowed")
            check(node.left)
            for c in node.comparators:
                check(c)
        elif isinstance(node, ast.Name):
            if node.id not in names:
                raise GridError(
                    f"filter {expr!r} references unknown factor {node.id!r}; "
                    f"available: {', '.join(factor_names)}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float, str, bool)):
                raise GridError(f"filter {expr!r}: unsupported literal {node.value!r}")
        else:
            raise GridError(
                f"filter {expr!r}: unsupported syntax ({type(node).__name__})")

    check(tree)
    code = compile(tree, "<grid filter>", "eval")

    def predicate(values: Mapping) -> bool:
        return bool(eval(code, {"__builtins__": {}}, dict(values)))

    return predicate


# -- the grid ------------------------------------------------------------------

class Grid:
    """Addressable, immutable collection of grid rows.

    Either spec-backed (rows computed on demand from a :class:`GridSpec`
    plus a row-id selection) or table-backed (rows read from a stored
    table).  Both answer the same interface with identical contents.
    """

    def __init__(self, *, spec: GridSpec | None = None,
                 row_ids: np.ndarray | None = None,
                 table: Table | None = None,
                 factors: tuple[FactorSpec, ...] | None = None,
                 iterations: int | None = None,
                 master_seed: int | None = None):
        if (spec is None) == (table is None):
            raise GridError("grid needs exactly one of spec or table")
        self._spec = spec
        self._row_ids = row_ids
        self._table = table
        if spec is not None:
            self.factors = spec.factors
            self.iterations = spec.iterations
            self.master_seed: int | None = spec.master_seed
            sizes = [len(f.levels) for f in spec.factors]
            self._sizes = sizes
            self._block = math.prod(sizes)
        else:
            self.factors = factors
            self.iterations = iterations
            self.master_seed = master_seed

    # .. construction ..........................................................

    @classmethod
    def from_spec(cls, spec: GridSpec) -> "Grid":
        total = spec.total_rows()
        if total > _MASK64:
            raise GridError(
                f"grid of {total} rows does not fit in 64-bit row ids")
        grid = cls(spec=spec, row_ids=None)
        if spec.filter is not None:
            predicate = compile_filter_expression(spec.filter, spec.factor_names)
            grid = grid.filter(predicate)
        return grid

    @classmethod
    def from_table(cls, table: Table, factors: tuple[FactorSpec, ...] | None = None,
                   iterations: int | None = None,
                   master_seed: int | None = None) -> "Grid":
        for required in ("row_id", "iteration", "seed"):
            if required not in table:
                raise SchemaError(f"grid table is missing the {required!r} column")
        ordered = ["row_id"]
        ordered += [n for n in table.names if n not in RESERVED_COLUMN_NAMES]
        ordered += ["iteration", "seed"]
        table = Table({n: _as_grid_column(n, table.column(n)) for n in ordered},
                      table.metadata)
        return cls(table=table, factors=factors, iterations=iterations,
                   master_seed=master_seed)

    # .. size and identity ......................................................

    def __len__(self) -> int:
        if self._table is not None:
            return self._table.n_rows
        if self._row_ids is not None:
            return len(self._row_ids)
        return self._spec.total_rows()

    @property
    def total_rows(self) -> int:
        return len(self)

    @property
    def factor_names(self) -> tuple[str, ...]:
        if self.factors is not None:
            return tuple(f.name for f in self.factors)
        return tuple(n for n in self._table.names
                     if n not in RESERVED_COLUMN_NAMES)

    def row_ids(self) -> np.ndarray:
        if self._table is not None:
            return self._table.column("row_id").values
        if self._row_ids is not None:
            return self._row_ids
        return np.arange(len(self), dtype=np.uint64)

    # .. row access ..............................................................

    def _decode(self, row_id: int) -> tuple[dict[str, Any], int]:
        r = row_id
        values: dict[str, Any] = {}
        for f, size in zip(self._spec.factors, self._sizes):
            values[f.name] = f.levels[r % size]
            r //= size
        return values, r + 1

    def row(self, position: int) -> GridRow:
        n = len(self)
        if not 0 <= position < n:
            raise GridError(f"row position {position} out of range [0, {n})")
        if self._table is not None:
            t = self._table
            values = {name: t.column(name).item(position)
                      for name in self.factor_names}
            return GridRow(row_id=t.column("row_id").item(position),
                           values=values,
                           iteration=t.column("iteration").item(position),
                           seed=t.column("seed").item(position))
        rid = int(self._row_ids[position]) if self._row_ids is not None else position
        values, iteration = self._decode(rid)
        return GridRow(rid, values, iteration,
                       derive_seed(self._spec.master_seed, rid))

    def iter_rows(self) -> Iterator[GridRow]:
        if self._table is not None:
            t = self._table
            names = self.factor_names
            cols = [t.column(n).to_pylist() for n in names]
            rids = t.column("row_id").to_pylist()
            its = t.column("iteration").to_pylist()
            seeds = t.column("seed").to_pylist()
            for i in range(t.n_rows):
                values = {n: c[i] for n, c in zip(names, cols)}
                yield GridRow(rids[i], values, its[i], seeds[i])
            return
        master = self._spec.master_seed
        rids = self._row_ids
        for position in range(len(self)):
            rid = position if rids is None else int(rids[position])
            values, iteration = self._decode(rid)
            yield GridRow(rid, values, iteration, derive_seed(master, rid))

    # .. subsetting ..............................................................

    def take_positions(self, positions: np.ndarray) -> "Grid":
        positions = np.asarray(positions, dtype=np.int64)
        if self._table is not None:
            return Grid(table=self._table.take(positions), factors=self.factors,
                        iterations=self.iterations, master_seed=self.master_seed)
        if self._row_ids is None:
            rids = positions.astype(np.uint64)
        else:
            rids = self._row_ids[positions]
        return Grid(spec=self._spec, row_ids=rids)

    def slice_rows(self, start: int, end: int) -> "Grid":
        n = len(self)
        if not (0 <= start <= end <= n):
            raise GridError(
                f"slice [{start}, {end}) out of range for grid of {n} rows")
        return self.take_positions(np.arange(start, end))

    def filter(self, predicate: Callable[[Mapping], bool]) -> "Grid":
        keep = []
        if self._table is not None:
            names = self.factor_names
            cols = [self._table.column(n).to_pylist() for n in names]
            for i in range(len(self)):
                values = _FactorValues({n: c[i] for n, c in zip(names, cols)})
                if predicate(values):
                    keep.append(i)
        else:
            rids = self._row_ids
            for position in range(len(self)):
                rid = position if rids is None else int(rids[position])
                values, _ = self._decode(rid)
                if predicate(_FactorValues(values)):
                    keep.append(position)
        return self.take_positions(np.array(keep, dtype=np.int64))

    def subset_iterations(self, iterations: Iterable[int]) -> "Grid":
        wanted = sorted({int(i) for i in iterations})
        if not wanted:
            return self.take_positions(np.empty(0, dtype=np.int64))
        if wanted[0] < 1:
            raise GridError(f"iteration numbers start at 1, got {wanted[0]}")
        if self.iterations is not None and wanted[-1] > self.iterations:
            raise GridError(
                f"iteration {wanted[-1]} out of range [1, {self.iterations}]")
        if self._table is not None:
            its = self._table.column("iteration").values
        else:
            its = (self.row_ids() // np.uint64(self._block)).astype(np.int64) + 1
        mask = np.isin(its, np.asarray(wanted, dtype=its.dtype))
        return self.take_positions(np.flatnonzero(mask))

    # .. materialization and storage .............................................

    def materialize(self) -> Table:
        """All rows as a table: row_id, one column per factor, iteration, seed."""
        if self._table is not None:
            return self._table
        spec = self._spec
        rids = self.row_ids()
        cols: dict[str, Column] = {"row_id": Column("uint64", rids)}
        r = rids.copy()
        for f in spec.factors:
            size = np.uint64(len(f.levels))
            codes = (r % size).astype(np.int64)
            r //= size
            if f.kind == "categorical":
                cols[f.name] = Column("categorical", codes.astype(np.int32),
                                      tuple(f.levels))
            elif f.kind == "integer":
                cols[f.name] = Column("integer",
                                      np.asarray(f.levels, dtype=np.int64)[codes])
            elif f.kind == "real":
                cols[f.name] = Column("real",
                                      np.asarray(f.levels, dtype=np.float64)[codes])
            else:
                cols[f.name] = Column("boolean",
                                      np.asarray(f.levels, dtype=bool)[codes])
        cols["iteration"] = Column("integer", r.astype(np.int64) + 1)
        seeds = splitmix64_array(np.uint64(spec.master_seed) + rids)
        cols["seed"] = Column("uint64", seeds)
        return Table(cols, metadata={_GRID_META_KEY: self._meta_json()})

    def _meta_json(self) -> str:
        import json

        payload: dict[str, Any] = {}
        if self.factors is not None:
            payload["factors"] = [
                {"name": f.name, "kind": f.kind, "levels": list(f.levels)}
                for f in self.factors]
        if self.iterations is not None:
            payload["iterations"] = self.iterations
        if self.master_seed is not None:
            payload["master_seed"] = self.master_seed
        return json.dumps(payload)

    def write(self, path: Path | str, format: str | None = None) -> None:
        tableio.write_table(self.materialize(), path, format)


def _as_grid_column(name: str, col: Column) -> Column:
    if name in ("row_id", "seed"):
        if col.dtype == "uint64":
            return col
        if col.dtype == "integer":
            if col.mask is not None or (len(col.values) and col.values.min() < 0):
                raise SchemaError(f"grid column {name!r} must be non-null unsigned")
            return Column("uint64", col.values.astype(np.uint64))
        raise SchemaError(f"grid column {name!r} must be an unsigned integer column")
    if name == "iteration":
        if col.dtype != "integer" or col.mask is not None:
            raise SchemaError("grid column 'iteration' must be non-null integer")
    return col


# -- module-level operation forms ---------------------------------------------

def expand_grid(spec: GridSpec) -> Grid:
    """Cross all factor levels, stacked ``spec.iterations`` times.

    Total rows = (product of level counts) x iterations.  The first-listed
    factor varies fastest and iteration varies slowest.
    """
    return Grid.from_spec(spec)


def filter_grid(grid: Grid, predicate: Callable[[Mapping], bool]) -> Grid:
    """Keep rows whose factor values satisfy ``predicate``.

    Surviving rows keep their original ``row_id`` and seed, in order, so
    results always join back unambiguously and any row can be replayed.
    """
    return grid.filter(predicate)


def slice_rows(grid: Grid, start: int, end: int) -> Grid:
    """Positional slice [start, end); row ids and seeds are preserved."""
    return grid.slice_rows(start, end)


def subset_iterations(grid: Grid, iterations: Iterable[int]) -> Grid:
    """Keep exactly the rows whose iteration number is in ``iterations``."""
    return grid.subset_iterations(iterations)


def write_grid(grid: Grid, path: Path | str, format: str | None = None) -> None:
    grid.write(path, format)


def read_grid(path: Path | str, format: str | None = None) -> Grid:
    """Load a stored grid; factor metadata is restored when present."""
    import json

    table = tableio.read_table(path, format)
    factors = iterations = master_seed = None
    raw = table.metadata.get(_GRID_META_KEY)
    if raw:
        meta = json.loads(raw)
        if "factors" in meta:
            factors = tuple(FactorSpec(f["name"], f["kind"], tuple(f["levels"]))
                            for f in meta["factors"])
        iterations = meta.get("iterations")
        master_seed = meta.get("master_seed")
    return Grid.from_table(table, factors=factors, iterations=iterations,
                           master_seed=master_seed)
