"""Group-by aggregation over Monte Carlo iterations, with uncertainty.

Per group of ok rows: mean bias with an empirical quantile interval, and
rejection rate (power) with a normal-approximation binomial interval
clipped to [0, 1].  Rows whose status is not ok (or whose outcomes are
null) are excluded from both numerators and denominators and reported in
``n_error`` instead, since the interval formulas assume valid p-values.

The quantile rule is pinned: linear interpolation between order statistics
at position ``q * (n - 1)`` (the type-7 convention), so independent
implementations can match to 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AggregateError
from .runner import STATUS_OK
from .tableio import Column, Table

STAT_COLUMNS = ("bias", "bias_lo", "bias_hi", "power", "n_sim",
                "power_se", "power_lo", "power_hi", "n_error")


@dataclass(frozen=True)
class AggregateSpec:
    """Grouping factors plus the significance and interval parameters."""

    group_by: tuple[str, ...]
    alpha: float = 0.05
    z: float = 1.96
    quantiles: tuple[float, float] = (0.025, 0.975)

    def __post_init__(self) -> None:
        object.__setattr__(self, "group_by", tuple(self.group_by))
        if not 0.0 < self.alpha < 1.0:
            raise AggregateError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.z <= 0.0:
            raise AggregateError(f"z must be positive, got {self.z}")
        lo, hi = self.quantiles
        if not 0.0 <= lo <= hi <= 1.0:
            raise AggregateError(f"invalid quantile pair {self.quantiles}")


def quantile(values: Sequence[float] | np.ndarray, q: float) -> float:
    """Linear interpolation between order statistics at position q*(n-1)."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise AggregateError("quantile of empty input")
    if not 0.0 <= q <= 1.0:
        raise AggregateError(f"quantile level must be in [0, 1], got {q}")
    pos = q * (arr.size - 1)
    lo = int(math.floor(pos))
    if lo + 1 >= arr.size:
        return float(arr[-1])
    frac = pos - lo
    return float(arr[lo] + frac * (arr[lo + 1] - arr[lo]))


def _group_codes(col: Column, name: str) -> tuple[np.ndarray, int]:
    """Ordinal codes per row such that ascending code = sorted key order."""
    if col.mask is not None:
        raise AggregateError(f"grouping column {name!r} contains nulls")
    if col.dtype == "categorical":
        return col.values.astype(np.int64), len(col.categories)
    if col.dtype == "boolean":
        return col.values.astype(np.int64), 2
    uniq, inverse = np.unique(col.values, return_inverse=True)
    return inverse.astype(np.int64), len(uniq)


def aggregate(frame: Table, spec: AggregateSpec) -> Table:
    """Per-group bias and power summaries; one output row per group, sorted."""
    required = ["estimate", "pvalue", "effect_size", *spec.group_by]
    for name in required:
        if name not in frame:
            raise AggregateError(
                f"aggregation needs column {name!r}; frame has: "
                f"{', '.join(frame.names)}")

    estimate = frame.column("estimate")
    pvalue = frame.column("pvalue")
    effect = frame.column("effect_size")
    ok = estimate.valid & pvalue.valid
    if "status" in frame:
        status = frame.column("status")
        ok &= status.valid & (status.values == STATUS_OK)

    n = frame.n_rows
    if spec.group_by:
        combined = np.zeros(n, dtype=np.int64)
        for name in spec.group_by:
            codes, size = _group_codes(frame.column(name), name)
            combined = combined * size + codes
    else:
        combined = np.zeros(n, dtype=np.int64)

    uniq, first_idx, inverse = np.unique(combined, return_index=True,
                                         return_inverse=True)
    n_groups = len(uniq)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(n_groups + 1))

    bias_vec = estimate.values - effect.values
    reject = pvalue.values < spec.alpha
    q_lo, q_hi = spec.quantiles

    stats = {name: np.zeros(n_groups) for name in
             ("bias", "bias_lo", "bias_hi", "power", "power_se",
              "power_lo", "power_hi")}
    n_sim = np.zeros(n_groups, dtype=np.int64)
    n_error = np.zeros(n_groups, dtype=np.int64)
    valid = np.zeros(n_groups, dtype=bool)

    for g in range(n_groups):
        rows = order[bounds[g]:bounds[g + 1]]
        ok_rows = rows[ok[rows]]
        n_sim[g] = len(ok_rows)
        n_error[g] = len(rows) - len(ok_rows)
        if not len(ok_rows):
            continue
        valid[g] = True
        b = bias_vec[ok_rows]
        stats["bias"][g] = b.mean()
        stats["bias_lo"][g] = quantile(b, q_lo)
        stats["bias_hi"][g] = quantile(b, q_hi)
        p = float(reject[ok_rows].mean())
        se = math.sqrt(p * (1.0 - p) / len(ok_rows))
        stats["power"][g] = p
        stats["power_se"][g] = se
        stats["power_lo"][g] = min(max(p - spec.z * se, 0.0), 1.0)
        stats["power_hi"][g] = min(max(p + spec.z * se, 0.0), 1.0)

    mask = None if valid.all() else valid
    out: dict[str, Column] = {}
    for name in spec.group_by:
        out[name] = frame.column(name).take(first_idx)
    for name in ("bias", "bias_lo", "bias_hi", "power"):
        out[name] = Column("real", stats[name], mask=mask)
    out["n_sim"] = Column("integer", n_sim)
    for name in ("power_se", "power_lo", "power_hi"):
        out[name] = Column("real", stats[name], mask=mask)
    out["n_error"] = Column("integer", n_error)
    return Table(out)
