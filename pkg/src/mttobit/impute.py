"""Completion and prediction on top of a fitted model.

Imputation fills each censored entry with the expectation of its converged
per-entry density, so every filled value respects its censoring window by
construction. Prediction solves the coupled linear relations exactly at zero
noise for rows that were never part of a fit.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import SingularSystemError, ValidationError
from .fit import AscentWorkspace, _ill_conditioned, fit
from .model import Dataset, FitConfig, ModelParams


def impute(data: Dataset, config: Optional[FitConfig] = None):
    """Fit the model and complete the target grid.

    Observed entries pass through unchanged; censored entries are replaced by
    their truncated-normal expectations from the converged state, which lie
    strictly inside the censoring windows.

    Returns
    -------
    (completed, params, report)
        ``completed`` is an (m, n) float array.
    """
    params, state, report = fit(data, config)
    return state.mean.copy(), params, report


def impute_with_params(
    data: Dataset,
    params: ModelParams,
    max_sweeps: int = 500,
    tol: float = 1e-12,
) -> np.ndarray:
    """Complete the grid with coefficients held fixed (a previously saved
    model, say). Only the per-entry densities are iterated, to a fixed point
    of the coordinate updates."""
    if max_sweeps < 1:
        raise ValidationError("max_sweeps must be a positive integer")
    workspace = AscentWorkspace(data, FitConfig(max_sweeps=max_sweeps))
    workspace.set_params(params)
    previous = workspace.ybar.copy()
    for _ in range(max_sweeps):
        workspace.sweep_entries()
        scale = 1.0 + float(np.max(np.abs(workspace.ybar))) if workspace.ybar.size else 1.0
        if float(np.max(np.abs(workspace.ybar - previous), initial=0.0)) <= tol * scale:
            break
        previous = workspace.ybar.copy()
    return workspace.state().mean.copy()


def predict(params: ModelParams, x, known_targets=None) -> np.ndarray:
    """Solve the coupled relations y_k = <a_k, y_rest> + <w_k, x> for the
    unknown targets, treating noise as zero.

    Parameters
    ----------
    params : ModelParams
    x : array-like, shape (d,)
    known_targets : array-like of shape (m,) with NaN marking unknowns,
        or None for all-unknown. At least one target must be unknown.

    Known values pass through to the returned m-vector.
    """
    m, d = params.m, params.d
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != d:
        raise ValidationError(f"x has {x.size} entries, model expects {d}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("x must be finite")
    if known_targets is None:
        known = np.full(m, np.nan)
    else:
        known = np.asarray(known_targets, dtype=float).reshape(-1)
        if known.size != m:
            raise ValidationError(f"known_targets has {known.size} entries, expected {m}")
    unknown = np.isnan(known)
    if not unknown.any():
        raise ValidationError("at most m-1 targets may be known; none left to predict")

    transfer = np.eye(m) - params.cross_matrix().T
    drive = params.feature_matrix() @ x
    fixed = ~unknown
    rhs = drive[unknown]
    if fixed.any():
        rhs = rhs - transfer[np.ix_(unknown, fixed)] @ known[fixed]
    block = transfer[np.ix_(unknown, unknown)]
    if _ill_conditioned(block):
        raise SingularSystemError("singular system")
    try:
        solution = np.linalg.solve(block, rhs)
    except np.linalg.LinAlgError as err:
        raise SingularSystemError("singular system") from err

    out = known.copy()
    out[unknown] = solution
    return out
