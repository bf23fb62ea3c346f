"""The ``tidysim`` command line: grid | run | aggregate | plot | dump-row.

Subcommands mirror the pipeline stages; every output file is written to a
temporary file and renamed, so an existing file is never partially
overwritten.  All errors exit nonzero with a message on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import study_prepost  # noqa: F401  (registers the built-in study)
from .aggregate import AggregateSpec, aggregate
from .config import load_study_config
from .errors import RunError, TidysimError
from .grid import expand_grid, read_grid
from .plotsvg import render_plot
from .results import join_grid_results
from .runner import RunConfig, get_study, run
from .tableio import atomic_write_text, read_table, write_table


def _parse_iteration_spec(text: str) -> set[int]:
    """``"1..5"`` or ``"1,3,7"`` or a mix (``"1..3,10"``) -> iteration set."""
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, _, hi = part.partition("..")
            out.update(range(int(lo), int(hi) + 1))
        else:
            out.add(int(part))
    if not out:
        raise RunError(f"empty iteration spec {text!r}")
    return out


def _parse_row_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise RunError(f"row range must look like START:END, got {text!r}")
    return int(lo), int(hi)


def _parse_filters(pairs: list[str]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for pair in pairs:
        column, sep, values = pair.partition("=")
        if not sep or not column or not values:
            raise TidysimError(
                f"filter must look like column=value1,value2 got {pair!r}")
        out.setdefault(column, []).extend(v for v in values.split(",") if v)
    return out


def _default_jobs() -> int:
    env = os.environ.get("TIDYSIM_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise RunError(f"TIDYSIM_JOBS must be an integer, got {env!r}") from None
    return 1


def _checkpoint_path(out: Path) -> Path:
    return out.with_name(out.stem + ".checkpoint.ndjson")


# -- subcommands -----------------------------------------------------------------

def _cmd_grid(args: argparse.Namespace) -> int:
    config = load_study_config(args.config)
    grid = expand_grid(config.grid_spec)
    grid.write(args.out, args.format)
    print(f"wrote {len(grid)} grid rows to {args.out}", file=sys.stderr)
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    grid = read_grid(args.grid)
    study = get_study(args.study)
    out = Path(args.out)
    checkpoint = None
    if args.resume:
        checkpoint = Path(args.checkpoint) if args.checkpoint else _checkpoint_path(out)
    config = RunConfig(
        jobs=args.jobs,
        num_chunks=args.num_chunks,
        chunk_index=args.chunk_index,
        checkpoint_path=checkpoint,
        row_range=_parse_row_range(args.rows) if args.rows else None,
        iterations=_parse_iteration_spec(args.iterations) if args.iterations else None,
        fail_fast=args.fail_fast,
        progress=not args.no_progress and sys.stderr.isatty(),
    )
    results = run(grid, study, config)
    write_table(results, out)
    status = results.column("status")
    n_err = int(np.sum(status.values != "ok"))
    print(f"wrote {results.n_rows} result rows to {out} "
          f"({n_err} error row{'s' if n_err != 1 else ''})", file=sys.stderr)
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    grid = read_grid(args.grid)
    results = read_table(args.results)
    frame = join_grid_results(grid, results)
    if args.group_by:
        group_by = tuple(g.strip() for g in args.group_by.split(",") if g.strip())
    else:
        group_by = grid.factor_names
    spec = AggregateSpec(group_by=group_by, alpha=args.alpha, z=args.z)
    table = aggregate(frame, spec)
    write_table(table, args.out)
    print(f"wrote {table.n_rows} aggregate rows to {args.out}", file=sys.stderr)
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    table = read_table(args.aggregate)
    svg = render_plot(
        table,
        x=args.x,
        y=args.y,
        color=args.color,
        linetype=args.linetype,
        facet=args.facet,
        filters=_parse_filters(args.filter or []),
        title=args.title,
    )
    atomic_write_text(args.out, svg)
    print(f"wrote plot to {args.out}", file=sys.stderr)
    return 0


def _cmd_dump_row(args: argparse.Namespace) -> int:
    grid = read_grid(args.grid)
    study = get_study(args.study)
    positions = np.flatnonzero(grid.row_ids() == np.uint64(args.row_id))
    if not len(positions):
        raise RunError(f"row_id {args.row_id} is not in the grid")
    row = grid.row(int(positions[0]))
    dataset = study.generate(row.values, row.seed)
    if study.dataset_table is None:
        raise RunError(f"study {study.name!r} cannot render datasets as tables")
    write_table(study.dataset_table(dataset), args.out, "csv")
    values = ", ".join(f"{k}={v}" for k, v in row.values.items())
    print(f"row {row.row_id}: {values}, iteration={row.iteration}, "
          f"seed={row.seed}", file=sys.stderr)
    print(f"wrote generated dataset to {args.out}", file=sys.stderr)
    return 0


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tidysim",
        description="Tidy Monte Carlo simulation studies: build factor grids, "
                    "run studies in parallel, aggregate with uncertainty, plot.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="expand a TOML config into a grid file")
    p.add_argument("config", help="TOML study configuration")
    p.add_argument("-o", "--out", required=True, help="output grid file")
    p.add_argument("--format", choices=("parquet", "csv"), default=None,
                   help="override the format inferred from the suffix")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("run", help="run a study over a grid")
    p.add_argument("grid", help="grid file (parquet or csv)")
    p.add_argument("--study", required=True, help="registered study name")
    p.add_argument("-o", "--out", required=True, help="output results file")
    p.add_argument("--jobs", type=int, default=_default_jobs(),
                   help="parallel worker processes (default: $TIDYSIM_JOBS or 1)")
    p.add_argument("--num-chunks", type=int, default=None,
                   help="split the selected rows into this many chunks")
    p.add_argument("--chunk-index", type=int, default=None,
                   help="which chunk to run (0-based)")
    p.add_argument("--resume", action="store_true",
                   help="checkpoint each row and skip rows already done")
    p.add_argument("--checkpoint", default=None,
                   help="checkpoint path (default: <out>.checkpoint.ndjson)")
    p.add_argument("--iterations", default=None, metavar="SPEC",
                   help="only these iterations, e.g. 1..5 or 1,3,7")
    p.add_argument("--rows", default=None, metavar="START:END",
                   help="only this positional row range")
    p.add_argument("--fail-fast", action="store_true",
                   help="raise on the first row error instead of recording it")
    p.add_argument("--no-progress", action="store_true",
                   help="suppress the progress line on stderr")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("aggregate", help="join results to the grid and summarize")
    p.add_argument("grid", help="grid file")
    p.add_argument("results", help="results file from `tidysim run`")
    p.add_argument("-o", "--out", required=True, help="output aggregate file")
    p.add_argument("--group-by", default=None,
                   help="comma-separated grouping columns (default: all factors)")
    p.add_argument("--alpha", type=float, default=0.05,
                   help="significance threshold for rejection (default 0.05)")
    p.add_argument("--z", type=float, default=1.96,
                   help="critical value for the power interval (default 1.96)")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("plot", help="render an aggregate table as an SVG chart")
    p.add_argument("aggregate", help="aggregate file")
    p.add_argument("-o", "--out", required=True, help="output SVG path")
    p.add_argument("--x", default="sample_size", help="x-axis column")
    p.add_argument("--y", default="power",
                   help="y-axis column; <y>_lo/<y>_hi draw point-ranges")
    p.add_argument("--color", default=None, help="column mapped to line color")
    p.add_argument("--linetype", default=None, help="column mapped to dash pattern")
    p.add_argument("--facet", default=None, help="column mapped to panels")
    p.add_argument("--filter", action="append", metavar="COL=V1,V2",
                   help="keep only these levels (repeatable)")
    p.add_argument("--title", default=None, help="chart title")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("dump-row", help="replay one grid row and dump its dataset")
    p.add_argument("grid", help="grid file")
    p.add_argument("row_id", type=int, help="row id to replay")
    p.add_argument("--study", required=True, help="registered study name")
    p.add_argument("-o", "--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_dump_row)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except TidysimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
