"""Execute a study over a grid: worker pool, row-level error capture, resume.

Each selected grid row is one task: ``generate(values, seed)`` then
``analyze(dataset, values)``.  Exceptions raised by either function are
caught and recorded in the row's ``status`` column instead of aborting the
run; probabilistic failures are expected outcomes of a simulation, not
crashes (``fail_fast`` flips this for debugging).

Because every row owns a seed from the grid, the multiset of results is
independent of worker count and scheduling.  The final table is sorted by
``row_id``, so runs with 1 or 16 workers are value-identical.

Checkpointing appends one JSON object per finished row to
``<name>.checkpoint.ndjson``; on restart, rows already present are skipped
and corrupt lines are ignored with a warning (their rows re-execute).
"""

from __future__ import annotations

import json
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from .errors import RunError, StudyError
from .grid import Grid, GridRow, RESERVED_COLUMN_NAMES
from .tableio import Column, Table, column_from_values

STATUS_OK = "ok"

OUTCOME_DTYPES = ("real", "integer", "boolean", "text")

_DEFAULT_BATCH_SIZE = 512


# -- study definitions and registry -------------------------------------------

@dataclass(frozen=True)
class StudyDefinition:
    """The pluggable pair of functions plus the declared outcome schema.

    ``generate`` maps (factor values, seed) to a dataset bundle of any
    shape; ``analyze`` maps (bundle, factor values) to a mapping whose keys
    must equal ``outcome_schema`` exactly.  ``dataset_table`` optionally
    renders a bundle as a table so single rows can be dumped for debugging.
    """

    name: str
    generate: Callable[[Mapping, int], Any]
    analyze: Callable[[Any, Mapping], Mapping[str, Any]]
    outcome_schema: dict[str, str]
    dataset_table: Callable[[Any], Table] | None = None

    def __post_init__(self) -> None:
        if not self.outcome_schema:
            raise StudyError(f"study {self.name!r} declares no outcomes")
        for name, dtype in self.outcome_schema.items():
            if dtype not in OUTCOME_DTYPES:
                raise StudyError(
                    f"study {self.name!r}: outcome {name!r} has unknown type "
                    f"{dtype!r} (expected one of {', '.join(OUTCOME_DTYPES)})")
            if name in RESERVED_COLUMN_NAMES or name == "status":
                raise StudyError(
                    f"study {self.name!r}: outcome name {name!r} is reserved")


_REGISTRY: dict[str, StudyDefinition] = {}


def register_study(study: StudyDefinition, replace: bool = False) -> StudyDefinition:
    if study.name in _REGISTRY and not replace:
        raise StudyError(f"study {study.name!r} is already registered")
    _REGISTRY[study.name] = study
    return study


def registered_studies() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def get_study(name: str) -> StudyDefinition:
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(registered_studies()) or "(none)"
        raise RunError(f"unknown study {name!r}; registered studies: {known}") from None


# -- run configuration ---------------------------------------------------------

@dataclass
class RunConfig:
    """How to execute a run; defaults give a serial, in-memory run."""

    jobs: int = 1
    num_chunks: int | None = None
    chunk_index: int | None = None
    checkpoint_path: str | Path | None = None
    row_range: tuple[int, int] | None = None
    iterations: Iterable[int] | None = None
    fail_fast: bool = False
    progress: bool = False
    batch_size: int = _DEFAULT_BATCH_SIZE

    def validate(self) -> None:
        if self.jobs < 1:
            raise RunError(f"jobs must be >= 1, got {self.jobs}")
        if (self.num_chunks is None) != (self.chunk_index is None):
            raise RunError("chunk_index and num_chunks must be given together")
        if self.num_chunks is not None:
            if self.num_chunks < 1:
                raise RunError(f"num_chunks must be >= 1, got {self.num_chunks}")
            if not 0 <= self.chunk_index < self.num_chunks:
                raise RunError(
                    f"chunk_index {self.chunk_index} out of range "
                    f"[0, {self.num_chunks})")
        if self.row_range is not None:
            start, end = self.row_range
            if not 0 <= start <= end:
                raise RunError(f"invalid row range [{start}, {end})")
        if self.batch_size < 1:
            raise RunError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class ResultRow:
    """Outcome of one executed grid row."""

    row_id: int
    outcomes: dict[str, Any] | None
    status: str

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def chunk_rows(total: int, num_chunks: int, chunk_index: int) -> range:
    """Positional row range of chunk ``chunk_index`` under a ceil-split.

    Chunks partition [0, total); trailing chunks may be empty.
    """
    if num_chunks < 1:
        raise RunError(f"num_chunks must be >= 1, got {num_chunks}")
    if not 0 <= chunk_index < num_chunks:
        raise RunError(f"chunk_index {chunk_index} out of range [0, {num_chunks})")
    size = -(-total // num_chunks)
    start = min(chunk_index * size, total)
    end = min((chunk_index + 1) * size, total)
    return range(start, end)


# -- row execution (module level so worker processes can unpickle it) ----------

def _coerce_outcome(dtype: str, value: Any, name: str) -> Any:
    if value is None:
        return None
    try:
        if dtype == "real":
            return float(value)
        if dtype == "integer":
            return int(value)
        if dtype == "boolean":
            return bool(value)
        return str(value)
    except (TypeError, ValueError):
        raise StudyError(
            f"outcome {name!r} value {value!r} is not coercible to {dtype}") from None


def _exec_row(study: StudyDefinition, row: GridRow, fail_fast: bool) -> ResultRow:
    try:
        bundle = study.generate(row.values, row.seed)
        raw = dict(study.analyze(bundle, row.values))
        if set(raw) != set(study.outcome_schema):
            raise StudyError(
                f"analyze returned outcomes {sorted(raw)}, expected "
                f"{sorted(study.outcome_schema)}")
        outcomes = {name: _coerce_outcome(dtype, raw[name], name)
                    for name, dtype in study.outcome_schema.items()}
        return ResultRow(row.row_id, outcomes, STATUS_OK)
    except Exception as exc:
        if fail_fast:
            raise
        return ResultRow(row.row_id, None,
                         f"error: {type(exc).__name__}: {exc}")


def _exec_batch(batch: Grid, study: StudyDefinition,
                fail_fast: bool) -> list[ResultRow]:
    return [_exec_row(study, row, fail_fast) for row in batch.iter_rows()]


# -- progress reporting --------------------------------------------------------

class _Progress:
    """Rows/sec and ETA on standard error, throttled to twice a second."""

    def __init__(self, total: int, enabled: bool):
        self.total = total
        self.enabled = enabled and total > 0
        self.done = 0
        self.start = time.monotonic()
        self._last = 0.0

    def update(self, n: int) -> None:
        self.done += n
        if not self.enabled:
            return
        now = time.monotonic()
        if now - self._last < 0.5 and self.done < self.total:
            return
        self._last = now
        elapsed = max(now - self.start, 1e-9)
        rate = self.done / elapsed
        eta = (self.total - self.done) / rate if rate > 0 else float("inf")
        sys.stderr.write(
            f"\r{self.done}/{self.total} rows  {rate:,.0f} rows/s  "
            f"ETA {eta:,.0f}s ")
        sys.stderr.flush()

    def finish(self) -> None:
        if not self.enabled:
            return
        elapsed = max(time.monotonic() - self.start, 1e-9)
        sys.stderr.write(
            f"\r{self.done}/{self.total} rows in {elapsed:,.1f}s "
            f"({self.done / elapsed:,.0f} rows/s)\n")
        sys.stderr.flush()


# -- checkpoint log ------------------------------------------------------------

def _checkpoint_line(result: ResultRow) -> str:
    return json.dumps({"row_id": result.row_id, "outcomes": result.outcomes,
                       "status": result.status}, separators=(",", ":")) + "\n"


def read_checkpoint(path: Path | str,
                    outcome_schema: dict[str, str]) -> dict[int, ResultRow]:
    """Completed rows from an append log; corrupt lines are skipped with a warning."""
    out: dict[int, ResultRow] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                row_id = obj["row_id"]
                status = obj["status"]
                outcomes = obj["outcomes"]
                if not isinstance(row_id, int) or row_id < 0:
                    raise ValueError("bad row_id")
                if not isinstance(status, str):
                    raise ValueError("bad status")
                if status == STATUS_OK:
                    if set(outcomes) != set(outcome_schema):
                        raise ValueError("outcome keys do not match schema")
                    outcomes = {name: _coerce_outcome(dtype, outcomes[name], name)
                                for name, dtype in outcome_schema.items()}
                else:
                    outcomes = None
            except (json.JSONDecodeError, KeyError, TypeError, ValueError,
                    StudyError):
                warnings.warn(
                    f"ignoring corrupt checkpoint line {lineno} in {path}; "
                    "its row will be re-executed")
                continue
            out[row_id] = ResultRow(row_id, outcomes, status)
    return out


# -- the run itself --------------------------------------------------------------

def _select(grid: Grid, config: RunConfig) -> Grid:
    selected = grid
    if config.iterations is not None:
        selected = selected.subset_iterations(config.iterations)
    if config.row_range is not None:
        start, end = config.row_range
        selected = selected.slice_rows(start, end)
    if config.num_chunks is not None:
        chunk = chunk_rows(len(selected), config.num_chunks, config.chunk_index)
        selected = selected.slice_rows(chunk.start, chunk.stop)
    return selected


def results_table(study: StudyDefinition, results: Iterable[ResultRow]) -> Table:
    """Tidy results: row_id, one column per declared outcome, status."""
    rows = sorted(results, key=lambda r: r.row_id)
    cols: dict[str, Column] = {
        "row_id": Column("uint64", np.array([r.row_id for r in rows],
                                            dtype=np.uint64))
    }
    for name, dtype in study.outcome_schema.items():
        values = [r.outcomes.get(name) if r.outcomes is not None else None
                  for r in rows]
        cols[name] = column_from_values(dtype, values)
    cols["status"] = column_from_values("text", [r.status for r in rows])
    return Table(cols)


def run(grid: Grid, study: StudyDefinition, config: RunConfig | None = None) -> Table:
    """Run ``study`` over the selected rows of ``grid``; see module docstring."""
    config = config if config is not None else RunConfig()
    config.validate()

    clash = set(study.outcome_schema) & set(grid.factor_names)
    if clash:
        raise RunError(
            f"outcome names collide with factor names: {sorted(clash)}")

    selected = _select(grid, config)
    row_ids = selected.row_ids()

    completed: dict[int, ResultRow] = {}
    checkpoint = None
    if config.checkpoint_path is not None:
        path = Path(config.checkpoint_path)
        if path.exists():
            wanted = set(int(r) for r in row_ids)
            loaded = read_checkpoint(path, study.outcome_schema)
            completed = {rid: res for rid, res in loaded.items() if rid in wanted}
        path.parent.mkdir(parents=True, exist_ok=True)
        checkpoint = open(path, "a", encoding="utf-8")

    if completed:
        pending = np.flatnonzero(
            ~np.isin(row_ids, np.fromiter(completed, dtype=np.uint64,
                                          count=len(completed))))
    else:
        pending = np.arange(len(selected), dtype=np.int64)

    progress = _Progress(total=len(selected), enabled=config.progress)
    progress.update(len(selected) - len(pending))

    def record(batch_results: list[ResultRow]) -> None:
        for res in batch_results:
            completed[res.row_id] = res
            if checkpoint is not None:
                checkpoint.write(_checkpoint_line(res))
                checkpoint.flush()
        progress.update(len(batch_results))

    batches = [pending[i:i + config.batch_size]
               for i in range(0, len(pending), config.batch_size)]
    try:
        if config.jobs == 1 or len(pending) <= config.batch_size:
            for positions in batches:
                record(_exec_batch(selected.take_positions(positions), study,
                                   config.fail_fast))
        else:
            pool = ProcessPoolExecutor(max_workers=config.jobs)
            try:
                futures = [
                    pool.submit(_exec_batch, selected.take_positions(positions),
                                study, config.fail_fast)
                    for positions in batches
                ]
                for fut in as_completed(futures):
                    record(fut.result())
            finally:
                # don't wait out queued batches when fail_fast aborts the run
                pool.shutdown(wait=True, cancel_futures=True)
    finally:
        if checkpoint is not None:
            checkpoint.close()
    progress.finish()

    return results_table(study, completed.values())


def run_resumable(grid: Grid, study: StudyDefinition, config: RunConfig) -> Table:
    """Checkpointed run: requires ``config.checkpoint_path``."""
    if config.checkpoint_path is None:
        raise RunError("run_resumable needs config.checkpoint_path")
    return run(grid, study, config)
