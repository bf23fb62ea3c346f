"""Ordinary least squares with coefficient inference and a singularity flag.

Fits are solved through a QR decomposition rather than inverting the normal
equations.  The multicollinearity indicator is still the smallest eigenvalue
of X'X compared against an absolute 1e-10 threshold, and singular designs
return pseudo-inverse estimates instead of raising: non-identifiability is
an outcome of a simulation row, not a crash.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TidysimError
from .numerics import t_tail_array

SINGULAR_EIGENVALUE_THRESHOLD = 1e-10


@dataclass(frozen=True)
class OlsFit:
    """Coefficients with standard errors, t statistics and two-sided p-values.

    When ``singular`` is set the numbers come from a pseudo-inverse and the
    flag is the authoritative validity signal.
    """

    coef: np.ndarray
    stderr: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    min_eigenvalue: float
    singular: bool
    df_resid: int


def add_intercept(x: np.ndarray) -> np.ndarray:
    """Prepend a column of ones, making the intercept coefficient index 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise TidysimError(f"design matrix must be 2-D, got shape {x.shape}")
    if x.shape[0] < 1:
        raise TidysimError("design matrix needs at least one row")
    out = np.empty((x.shape[0], x.shape[1] + 1), dtype=np.float64)
    out[:, 0] = 1.0
    out[:, 1:] = x
    return out


def fit_ols(x: np.ndarray, y: np.ndarray) -> OlsFit:
    """Least-squares fit of ``y`` on ``x`` (intercept column included by caller)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise TidysimError(
            f"incompatible shapes: x {x.shape}, y {y.shape}")
    n, k = x.shape
    if n <= k:
        raise TidysimError(
            f"insufficient degrees of freedom: {n} observations for {k} columns")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise TidysimError("design matrix and response must be finite")

    xtx = x.T @ x
    eigenvalues = np.linalg.eigvalsh(xtx)
    min_eig = float(eigenvalues[0])
    singular = min_eig < SINGULAR_EIGENVALUE_THRESHOLD

    if singular:
        coef = np.linalg.pinv(x) @ y
        xtx_inv_diag = np.diag(np.linalg.pinv(xtx)).copy()
    else:
        q, r = np.linalg.qr(x)
        coef = np.linalg.solve(r, q.T @ y)
        r_inv = np.linalg.solve(r, np.eye(k))
        xtx_inv_diag = np.einsum("ij,ij->i", r_inv, r_inv)

    resid = y - x @ coef
    df_resid = n - k
    sigma2 = float(resid @ resid) / df_resid
    stderr = np.sqrt(np.maximum(sigma2 * xtx_inv_diag, 0.0))

    with np.errstate(divide="ignore", invalid="ignore"):
        t_stat = coef / stderr
    zero_se = stderr == 0.0
    if zero_se.any():
        # perfect fit: a zero coefficient carries no evidence, a nonzero one
        # is infinitely significant
        t_stat = np.where(zero_se, np.where(coef == 0.0, 0.0,
                                            np.copysign(np.inf, coef)), t_stat)
    p_value = t_tail_array(t_stat, df_resid)

    return OlsFit(coef=coef, stderr=stderr, t_stat=t_stat, p_value=p_value,
                  min_eigenvalue=max(min_eig, 0.0), singular=singular,
                  df_resid=df_resid)
