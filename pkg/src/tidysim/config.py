"""TOML study configuration: factors, iterations, master seed, overrides.

Example::

    study = "prepost"
    iterations = 500
    master_seed = 20250808
    # filter = "sample_size > 4"

    [factors]
    sample_size = [4, 5, 6]
    effect_size = [0.0, 0.5]
    outcome = ["post", "change"]
    correction = [false, true]

Factor kinds are inferred from the level types; factor order follows the
document.  Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .errors import ConfigError
from .grid import GridSpec, infer_factor

_TOP_KEYS = {"study", "iterations", "master_seed", "filter", "factors",
             "run", "aggregate"}
_RUN_KEYS = {"jobs", "num_chunks", "chunk_index", "batch_size", "fail_fast"}
_AGG_KEYS = {"group_by", "alpha", "z"}


@dataclass(frozen=True)
class StudyConfig:
    """Parsed configuration: which study, which grid, optional overrides."""

    grid_spec: GridSpec
    study: str | None = None
    run_overrides: dict[str, Any] = field(default_factory=dict)
    aggregate_overrides: dict[str, Any] = field(default_factory=dict)


def load_study_config(path: Path | str) -> StudyConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed TOML in {path}: {e}") from None

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(
            f"unknown config key(s) {sorted(unknown)}; allowed: "
            f"{sorted(_TOP_KEYS)}")
    for key in ("factors", "iterations", "master_seed"):
        if key not in doc:
            raise ConfigError(f"config is missing required key {key!r}")

    factors_doc = doc["factors"]
    if not isinstance(factors_doc, dict) or not factors_doc:
        raise ConfigError("[factors] must be a non-empty table of name = [levels]")
    factors = []
    for name, levels in factors_doc.items():
        if not isinstance(levels, list):
            raise ConfigError(f"factor {name!r} must map to an array of levels")
        factors.append(infer_factor(name, levels))

    iterations = doc["iterations"]
    master_seed = doc["master_seed"]
    if not isinstance(iterations, int) or isinstance(iterations, bool):
        raise ConfigError(f"iterations must be an integer, got {iterations!r}")
    if not isinstance(master_seed, int) or isinstance(master_seed, bool):
        raise ConfigError(f"master_seed must be an integer, got {master_seed!r}")
    flt = doc.get("filter")
    if flt is not None and not isinstance(flt, str):
        raise ConfigError(f"filter must be a string expression, got {flt!r}")
    study = doc.get("study")
    if study is not None and not isinstance(study, str):
        raise ConfigError(f"study must be a string, got {study!r}")

    run_overrides = dict(doc.get("run", {}))
    bad = set(run_overrides) - _RUN_KEYS
    if bad:
        raise ConfigError(f"unknown [run] key(s) {sorted(bad)}; allowed: "
                          f"{sorted(_RUN_KEYS)}")
    agg_overrides = dict(doc.get("aggregate", {}))
    bad = set(agg_overrides) - _AGG_KEYS
    if bad:
        raise ConfigError(f"unknown [aggregate] key(s) {sorted(bad)}; allowed: "
                          f"{sorted(_AGG_KEYS)}")

    spec = GridSpec(factors=tuple(factors), iterations=iterations,
                    master_seed=master_seed, filter=flt)
    return StudyConfig(grid_spec=spec, study=study,
                       run_overrides=run_overrides,
                       aggregate_overrides=agg_overrides)
