"""tidysim: tidy Monte Carlo simulation studies.

A simulation is four pieces: a factor grid (one row per individual
simulation, stacked over iterations, with a derived seed per row), a data
generation function, an analysis function, and a tidy results table that
joins back to the grid for uncertainty-aware aggregation.  Runs are
embarrassingly parallel, chunkable for schedulers, and resumable from an
append-only checkpoint, with results guaranteed identical regardless of
worker count.
"""

from .aggregate import AggregateSpec, aggregate, quantile
from .config import StudyConfig, load_study_config
from .errors import (
    AggregateError,
    ConfigError,
    GridError,
    PlotError,
    RunError,
    SchemaError,
    StudyError,
    TidysimError,
)
from .grid import (
    FactorSpec,
    Grid,
    GridRow,
    GridSpec,
    compile_filter_expression,
    derive_seed,
    expand_grid,
    filter_grid,
    infer_factor,
    read_grid,
    slice_rows,
    subset_iterations,
    write_grid,
)
from .linmodel import OlsFit, add_intercept, fit_ols
from .numerics import Rng, splitmix64, student_t_two_sided_p
from .plotsvg import render_plot
from .results import attach_sidecar, join_grid_results, pivot_long
from .runner import (
    ResultRow,
    RunConfig,
    StudyDefinition,
    chunk_rows,
    get_study,
    read_checkpoint,
    register_study,
    registered_studies,
    results_table,
    run,
    run_resumable,
)
from .study_prepost import (
    PrePostDataset,
    PrePostOutcome,
    analyze_prepost,
    generate_prepost,
    power_grid_spec,
)
from .tableio import Column, Table, concat_tables, read_table, write_table

__version__ = "0.1.0"

__all__ = [
    "AggregateError", "AggregateSpec", "Column", "ConfigError", "FactorSpec",
    "Grid", "GridError", "GridRow", "GridSpec", "OlsFit", "PlotError",
    "PrePostDataset", "PrePostOutcome", "ResultRow", "Rng", "RunConfig",
    "RunError", "SchemaError", "StudyConfig", "StudyDefinition", "StudyError",
    "Table", "TidysimError", "add_intercept", "aggregate", "analyze_prepost",
    "attach_sidecar", "chunk_rows", "compile_filter_expression",
    "concat_tables", "derive_seed", "expand_grid", "filter_grid", "fit_ols",
    "generate_prepost", "get_study", "infer_factor", "join_grid_results",
    "load_study_config", "pivot_long", "power_grid_spec", "quantile",
    "read_checkpoint", "read_grid", "read_table", "register_study",
    "registered_studies", "render_plot", "results_table", "run",
    "run_resumable", "slice_rows", "splitmix64", "student_t_two_sided_p",
    "subset_iterations", "write_grid", "write_table",
]
