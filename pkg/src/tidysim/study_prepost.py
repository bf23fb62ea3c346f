"""Built-in study: power of pre-post treatment analyses in a two-arm trial.

Data generation: ``sample_size`` units, the first ``sample_size // 2`` of
which are treated; ``pre ~ Normal(0, 3)``; ``post = pre + Normal(0, 0.3)``
plus ``effect_size`` for treated units.  The sampling order (treated mask,
pre vector, post noise vector) is pinned so a seed fully determines the
dataset.

Analysis: OLS of either the post score or the change score on treatment,
optionally correcting for the baseline, reporting the treatment coefficient,
its p-value and the singularity flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import StudyError
from .grid import FactorSpec, GridSpec
from .linmodel import add_intercept, fit_ols
from .numerics import Rng
from .runner import StudyDefinition, register_study
from .tableio import Column, Table

PRE_SD = 3.0
NOISE_SD = 0.3

OUTCOME_LEVELS = ("post", "change")


@dataclass(frozen=True)
class PrePostDataset:
    """Tidy two-occasion trial data: one row per unit."""

    ids: np.ndarray
    treated: np.ndarray
    pre: np.ndarray
    post: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ids)

    def to_table(self) -> Table:
        return Table({
            "id": Column("integer", self.ids),
            "treated": Column("boolean", self.treated),
            "pre": Column("real", self.pre),
            "post": Column("real", self.post),
        })


@dataclass(frozen=True)
class PrePostOutcome:
    estimate: float
    pvalue: float
    singular: bool


def generate_prepost(sample_size: int, effect_size: float, seed: int) -> PrePostDataset:
    """One simulated trial; deterministic given ``seed``."""
    if sample_size < 2:
        raise StudyError(
            f"sample_size must be at least 2 (one unit per arm), got {sample_size}")
    rng = Rng(seed)
    treated = np.arange(sample_size) < (sample_size // 2)
    pre = rng.normal(0.0, PRE_SD, sample_size)
    post = pre + rng.normal(0.0, NOISE_SD, sample_size)
    post = post + effect_size * treated
    return PrePostDataset(ids=np.arange(sample_size), treated=treated,
                          pre=pre, post=post)


def analyze_prepost(data: PrePostDataset, outcome: str,
                    correction: bool) -> PrePostOutcome:
    """Treatment-effect estimate for one of the four analysis variants."""
    if data.n == 0:
        raise StudyError("dataset is empty")
    if outcome not in OUTCOME_LEVELS:
        raise StudyError(f"outcome must be one of {OUTCOME_LEVELS}, got {outcome!r}")
    n_treated = int(data.treated.sum())
    if n_treated == 0 or n_treated == data.n:
        raise StudyError("both arms must be present to estimate a treatment effect")

    y = data.post - data.pre if outcome == "change" else data.post
    treated = data.treated.astype(np.float64)
    if correction:
        x = np.column_stack([treated, data.pre])
    else:
        x = treated[:, None]
    fit = fit_ols(add_intercept(x), y)
    return PrePostOutcome(estimate=float(fit.coef[1]),
                          pvalue=float(fit.p_value[1]),
                          singular=bool(fit.singular))


# -- runner adapters (module level so they pickle into worker processes) -------

def _generate(values: Mapping, seed: int) -> PrePostDataset:
    return generate_prepost(values["sample_size"], values["effect_size"], seed)


def _analyze(data: PrePostDataset, values: Mapping) -> dict:
    result = analyze_prepost(data, values["outcome"], values["correction"])
    return {"estimate": result.estimate, "pvalue": result.pvalue,
            "singular": result.singular}


def _dataset_table(data: PrePostDataset) -> Table:
    return data.to_table()


PREPOST_STUDY = StudyDefinition(
    name="prepost",
    generate=_generate,
    analyze=_analyze,
    outcome_schema={"estimate": "real", "pvalue": "real", "singular": "boolean"},
    dataset_table=_dataset_table,
)

register_study(PREPOST_STUDY)


def power_grid_spec(iterations: int = 500, master_seed: int = 101) -> GridSpec:
    """The study's canonical grid: 16 x 11 x 2 x 2 cells per iteration."""
    return GridSpec(
        factors=(
            FactorSpec("sample_size", "integer", tuple(range(4, 20))),
            FactorSpec("effect_size", "real",
                       tuple(round(0.1 * i, 1) for i in range(11))),
            FactorSpec("outcome", "categorical", OUTCOME_LEVELS),
            FactorSpec("correction", "boolean", (False, True)),
        ),
        iterations=iterations,
        master_seed=master_seed,
    )
