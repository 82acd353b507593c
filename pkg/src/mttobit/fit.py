"""Block coordinate ascent for the multi-target Tobit model.

The model ties m target variables together: each target k follows a linear
regression on the other m-1 targets and on the explanatory features, with one
shared noise precision beta. Censored entries are handled through per-entry
truncated-normal densities whose parameters have closed-form optimal updates,
as does the parameter block, so a fit is a sequence of exact coordinate
maximizations of one variational objective.

Conventions used throughout: the coupling matrix A holds a_k in column k with
a structural zero on the diagonal, and M := I - A^T, so row k of M ties target
k's equation together and column k of M (written b_k below) collects every
appearance of target k across the m equations. The residual-mean matrix is
E = M @ Ybar - W @ X^T with Ybar the per-entry means.
"""

from __future__ import annotations

import time
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .errors import (
    DegenerateUpdateError,
    NumericalError,
    SingularSystemError,
    ValidationError,
)
from .model import (
    Dataset,
    FitConfig,
    FitReport,
    ModelParams,
    TruncNormEntry,
    CensoringBound,
    VariationalState,
    dataset_validate,
)
from .truncnorm import batch_terms, tn_log_normalizer

BETA_MIN = 1e-12
BETA_MAX = 1e12
_LOG_2PI = np.log(2.0 * np.pi)

FILL_POLICIES = ("limit", "half-limit", "zero")


def bound_fill(lower, upper):
    """Fill value for a censoring window: the nearest finite bound, or the
    midpoint when both sides are finite (the interval analogue of filling a
    nondetect at its detection limit)."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    lo_fin = np.isfinite(lower)
    up_fin = np.isfinite(upper)
    fill = np.where(up_fin & ~lo_fin, upper, 0.0)
    fill = np.where(lo_fin & ~up_fin, lower, fill)
    both = lo_fin & up_fin
    fill = np.where(both, 0.5 * (lower + upper), fill)
    return fill


# --- objectives ---------------------------------------------------------------

def censored_log_likelihood(w, beta, data: Dataset) -> float:
    """Exact censored-data log-likelihood of a single-target model.

    Observed entries contribute the Gaussian log-density at the prediction;
    censored entries contribute the log-mass of the prediction's Gaussian over
    their censoring window (two-sided windows included).
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if data.m != 1:
        raise ValueError("censored_log_likelihood expects a single-target dataset")
    w = np.asarray(w, dtype=float).reshape(-1)
    pred = data.x @ w if data.d else np.zeros(data.n)
    obs = ~data.censored[0]
    total = 0.0
    if obs.any():
        resid = data.values[0, obs] - pred[obs]
        total += 0.5 * obs.sum() * (np.log(beta) - _LOG_2PI) - 0.5 * beta * np.dot(
            resid, resid
        )
    sigma = 1.0 / np.sqrt(beta)
    for i in np.nonzero(data.censored[0])[0]:
        total += tn_log_normalizer(
            pred[i], sigma, (data.window_lower[0, i], data.window_upper[0, i])
        )
    return float(total)


def variational_objective(
    params: ModelParams, state: VariationalState, data: Dataset, lambda_reg: float
) -> float:
    """The surrogate the fit ascends: entropy of the censored-entry densities
    plus the expected complete-data log-likelihood, minus the ridge penalty.

    The expectations expand analytically in the per-entry means and second
    moments because the per-entry densities are independent; no quadrature.
    """
    if not params.beta > 0:
        raise ValueError("beta must be positive")
    m, n = data.m, data.n
    ybar = state.mean
    var = np.maximum(state.second - ybar * ybar, 0.0)
    coupling = params.cross_matrix()
    transfer = np.eye(m) - coupling.T
    resid = transfer @ ybar - params.feature_matrix() @ data.x.T
    col_norm2 = np.einsum("ij,ij->j", transfer, transfer)
    quad = float(np.vdot(resid, resid) + col_norm2 @ var.sum(axis=1))

    entropy = 0.0
    cens = state.censored
    if cens.any():
        _, _, _, ent = batch_terms(
            state.mu[cens],
            state.sigma[cens],
            state.window_lower[cens],
            state.window_upper[cens],
        )
        entropy = float(np.sum(ent))

    penalty = 0.5 * lambda_reg * (
        sum(float(v @ v) for v in params.a) + sum(float(v @ v) for v in params.w)
    )
    return (
        entropy
        + 0.5 * m * n * (np.log(params.beta) - _LOG_2PI)
        - 0.5 * params.beta * quad
        - penalty
    )


def variational_objective_single(w, beta, state: VariationalState, data: Dataset) -> float:
    """Single-target version of the surrogate, without any penalty term.

    By construction its maximum over the censored-entry densities equals the
    exact censored log-likelihood, which is what the equivalence tests check.
    """
    params = ModelParams(a=[np.zeros(0)], w=[np.asarray(w, dtype=float)], beta=beta)
    return variational_objective(params, state, data, lambda_reg=0.0)


def optimal_single_target_state(w, beta, data: Dataset) -> VariationalState:
    """The maximizing per-entry densities for fixed single-target parameters:
    each censored entry gets the prediction's Gaussian truncated to its window."""
    if data.m != 1:
        raise ValueError("expects a single-target dataset")
    w = np.asarray(w, dtype=float).reshape(-1)
    pred = data.x @ w if data.d else np.zeros(data.n)
    mu = np.full((1, data.n), np.nan)
    sigma = np.ones((1, data.n))
    mean = data.values.copy()
    second = data.values.copy() ** 2
    cens = data.censored
    if cens.any():
        idx = np.nonzero(cens[0])[0]
        mu[0, idx] = pred[idx]
        sigma[0, idx] = 1.0 / np.sqrt(beta)
        _, mn, sec, _ = batch_terms(
            mu[0, idx], sigma[0, idx], data.window_lower[0, idx], data.window_upper[0, idx]
        )
        mean[0, idx] = mn
        second[0, idx] = sec
    return VariationalState(data, mu, sigma, mean, second)


# --- the workspace -------------------------------------------------------------

class AscentWorkspace:
    """Owns everything one fit mutates: coefficients, the per-entry densities,
    and the caches (M, column norms, residual means) the updates read.

    Entry updates are exact coordinate maximizations given everything else;
    the parameter update is an exact block maximization given the densities.
    The objective therefore never decreases, which the tests enforce.
    """

    def __init__(self, data: Dataset, config: Optional[FitConfig] = None):
        config = config or FitConfig()
        config.check()
        result = dataset_validate(data)
        if not result.ok:
            raise ValidationError("; ".join(result.violations))
        self.data = data
        self.config = config
        self.beta_clamped = False
        self._rng = np.random.default_rng(config.sweep_seed)

        m, n = data.m, data.n
        self.x = data.x
        self.lower = data.window_lower
        self.upper = data.window_upper
        self.cens = data.censored
        self.cens_rows = [np.nonzero(self.cens[k])[0] for k in range(m)]
        self.entry_list = data.censored_indices()

        self._initialize()

    # -- initialization --

    def _initialize(self):
        data, config = self.data, self.config
        m, n, d = data.m, data.n, data.d

        filled = data.values.copy()
        if self.cens.any():
            filled[self.cens] = bound_fill(self.lower[self.cens], self.upper[self.cens])

        # ridge-initialize each target on [other targets (bound-filled); x]
        coupling = np.zeros((m, m))
        w_mat = np.zeros((m, d))
        sq_resid = 0.0
        for k in range(m):
            others = [j for j in range(m) if j != k]
            if config.couple_targets and m > 1:
                design = np.column_stack([filled[others].T, self.x])
            else:
                design = self.x
            coef = _ridge_solve(design, filled[k], config.lambda_reg)
            if config.couple_targets and m > 1:
                coupling[others, k] = coef[: m - 1]
                w_mat[k] = coef[m - 1 :]
            else:
                w_mat[k] = coef
            resid = filled[k] - design @ coef
            sq_resid += float(resid @ resid)

        msr = sq_resid / (m * n)
        beta = np.inf if msr == 0.0 else 1.0 / msr
        beta = max(beta, 1e-8)
        self.beta = self._clamp_beta(beta)
        self.coupling = coupling
        self.w_mat = w_mat

        # densities: observed entries are point masses; censored entries start
        # at their fill value and get proper shapes from one update sweep
        self.ybar = filled
        self.second = filled * filled
        self.mu = np.where(self.cens, filled, np.nan)
        self.sigma = np.ones((m, n))
        self.entropy = np.zeros((m, n))
        self._refresh_param_cache()
        self.sweep_entries()

    def _clamp_beta(self, beta: float) -> float:
        clipped = min(max(beta, BETA_MIN), BETA_MAX)
        if clipped != beta:
            self.beta_clamped = True
        return clipped

    def _refresh_param_cache(self):
        """Rebuild everything that depends on the coefficients."""
        m = self.data.m
        self.transfer = np.eye(m) - self.coupling.T  # M = I - A^T
        self.col_norm2 = np.einsum("ij,ij->j", self.transfer, self.transfer)
        self.resid_mean = self.transfer @ self.ybar - self.w_mat @ self.x.T

    def set_params(self, params: ModelParams):
        """Replace the coefficient block (warm starts, update-level probes)."""
        if not params.beta > 0:
            raise ValidationError("beta must be positive")
        if params.m != self.data.m or params.d != self.data.d:
            raise ValidationError("parameter shape does not match the dataset")
        self.coupling = params.cross_matrix()
        self.w_mat = params.feature_matrix()
        self.beta = float(params.beta)
        self._refresh_param_cache()

    def load_state(self, state: VariationalState):
        """Adopt an existing per-entry state, e.g. to resume a converged fit."""
        self.mu = state.mu.copy()
        self.sigma = state.sigma.copy()
        self.ybar = state.mean.copy()
        self.second = state.second.copy()
        if self.cens.any():
            _, _, _, ent = batch_terms(
                self.mu[self.cens],
                self.sigma[self.cens],
                self.lower[self.cens],
                self.upper[self.cens],
            )
            self.entropy[self.cens] = ent
        self._refresh_param_cache()

    # -- entry (density) updates --

    def update_entry(self, k: int, i: int) -> TruncNormEntry:
        """Closed-form update of one censored entry's density: a truncated
        normal centered on the value that reconciles all m equations, with
        scale set by beta and how often target k appears in them."""
        if not self.cens[k, i]:
            raise ValueError(f"entry ({k},{i}) is observed; nothing to update")
        norm2 = self.col_norm2[k]
        if not norm2 > 0.0:
            raise DegenerateUpdateError(
                f"zero column norm updating entry ({k},{i})"
            )
        mu = self.ybar[k, i] - float(self.transfer[:, k] @ self.resid_mean[:, i]) / norm2
        sigma = 1.0 / np.sqrt(self.beta * norm2)
        _, mean, second, entropy = batch_terms(
            np.array([mu]),
            np.array([sigma]),
            np.array([self.lower[k, i]]),
            np.array([self.upper[k, i]]),
        )
        mean, second, entropy = mean[0], second[0], entropy[0]
        delta = float(mean) - self.ybar[k, i]
        self.mu[k, i] = mu
        self.sigma[k, i] = sigma
        self.ybar[k, i] = float(mean)
        self.second[k, i] = float(second)
        self.entropy[k, i] = float(entropy)
        self.resid_mean[:, i] += self.transfer[:, k] * delta
        return TruncNormEntry(
            mu=float(mu),
            sigma=float(sigma),
            bound=CensoringBound(float(self.lower[k, i]), float(self.upper[k, i])),
            mean=float(mean),
            second_moment=float(second),
        )

    def update_row(self, k: int):
        """All censored entries of target row k at once. Entries of one row
        never read each other (they couple within a column, across rows), so
        this is exactly the row-major sequential order, vectorized."""
        idx = self.cens_rows[k]
        if idx.size == 0:
            return
        norm2 = self.col_norm2[k]
        if not norm2 > 0.0:
            raise DegenerateUpdateError(f"zero column norm updating row {k}")
        mu = self.ybar[k, idx] - (self.transfer[:, k] @ self.resid_mean[:, idx]) / norm2
        sigma = 1.0 / np.sqrt(self.beta * norm2)
        _, mean, second, entropy = batch_terms(
            mu, sigma, self.lower[k, idx], self.upper[k, idx]
        )
        delta = mean - self.ybar[k, idx]
        self.mu[k, idx] = mu
        self.sigma[k, idx] = sigma
        self.ybar[k, idx] = mean
        self.second[k, idx] = second
        self.entropy[k, idx] = entropy
        self.resid_mean[:, idx] += np.outer(self.transfer[:, k], delta)

    def sweep_entries(self):
        if self.config.sweep_order == "random":
            order = self._rng.permutation(len(self.entry_list))
            for pos in order:
                k, i = self.entry_list[pos]
                self.update_entry(k, i)
        else:
            for k in range(self.data.m):
                self.update_row(k)

    # -- parameter update --

    def update_params(self) -> ModelParams:
        """Exact maximization of the objective over all coefficients and beta
        with the densities frozen.

        Per target this is a ridge-like normal-equation solve on the design
        [other-target means; features], with the other targets' summed
        variances added to their diagonal Gram entries (uncertain entries
        count as their full second moment). The penalty couples the
        coefficient solve to beta, so the two are alternated to a joint
        stationary point; with lambda_reg = 0 one pass is already exact.
        """
        data, config = self.data, self.config
        m, n, d = data.m, data.n, data.d
        var = np.maximum(self.second - self.ybar * self.ybar, 0.0)
        var_sums = var.sum(axis=1)

        stacked = np.vstack([self.ybar, self.x.T]) if d else self.ybar
        gram = stacked @ stacked.T

        beta = self.beta
        coupling = self.coupling
        w_mat = self.w_mat
        for _ in range(200):
            coupling, w_mat = self._solve_coefficients(gram, var_sums, beta)
            transfer = np.eye(m) - coupling.T
            resid = transfer @ self.ybar - w_mat @ self.x.T
            col_norm2 = np.einsum("ij,ij->j", transfer, transfer)
            quad = float(np.vdot(resid, resid) + col_norm2 @ var_sums)
            new_beta = np.inf if quad == 0.0 else m * n / quad
            new_beta = self._clamp_beta(new_beta)
            done = config.lambda_reg == 0.0 or abs(new_beta - beta) <= 1e-14 * new_beta
            beta = new_beta
            if done:
                break

        self.beta = beta
        self.coupling = coupling
        self.w_mat = w_mat
        self._refresh_param_cache()
        return self.params()

    def _solve_coefficients(self, gram, var_sums, beta):
        data, config = self.data, self.config
        m, d = data.m, data.d
        ridge = config.lambda_reg / beta
        coupling = np.zeros((m, m))
        w_mat = np.zeros((m, d))
        for k in range(m):
            others = [j for j in range(m) if j != k]
            if config.couple_targets and m > 1:
                sel = others + list(range(m, m + d))
            else:
                sel = list(range(m, m + d))
            p = len(sel)
            if p == 0:
                continue
            system = gram[np.ix_(sel, sel)].copy()
            if config.couple_targets and m > 1:
                system[np.arange(m - 1), np.arange(m - 1)] += var_sums[others]
            system[np.arange(p), np.arange(p)] += ridge
            if ridge == 0.0 and _ill_conditioned(system):
                raise SingularSystemError("singular system")
            rhs = gram[k, sel]
            try:
                chol = sla.cho_factor(system, lower=True, check_finite=False)
                coef = sla.cho_solve(chol, rhs, check_finite=False)
            except sla.LinAlgError as err:
                raise SingularSystemError("singular system") from err
            if config.couple_targets and m > 1:
                coupling[others, k] = coef[: m - 1]
                w_mat[k] = coef[m - 1 :]
            else:
                w_mat[k] = coef
        return coupling, w_mat

    # -- objective and snapshots --

    def objective(self) -> float:
        """Current value of the surrogate, from the caches."""
        m, n = self.data.m, self.data.n
        var = np.maximum(self.second - self.ybar * self.ybar, 0.0)
        quad = float(
            np.vdot(self.resid_mean, self.resid_mean) + self.col_norm2 @ var.sum(axis=1)
        )
        penalty = 0.5 * self.config.lambda_reg * (
            float(np.vdot(self.coupling, self.coupling))
            + float(np.vdot(self.w_mat, self.w_mat))
        )
        return (
            float(self.entropy[self.cens].sum())
            + 0.5 * m * n * (np.log(self.beta) - _LOG_2PI)
            - 0.5 * self.beta * quad
            - penalty
        )

    def params(self) -> ModelParams:
        m = self.data.m
        a = [self.coupling[np.arange(m) != k, k].copy() for k in range(m)]
        return ModelParams(a=a, w=[row.copy() for row in self.w_mat], beta=self.beta)

    def state(self) -> VariationalState:
        return VariationalState(
            self.data, self.mu.copy(), self.sigma.copy(), self.ybar.copy(), self.second.copy()
        )

    def run_sweep(self):
        self.sweep_entries()
        self.update_params()


def _ill_conditioned(system) -> bool:
    """True when a normal-equation matrix has effectively lost full rank.
    Only consulted on unregularized solves, where rank deficiency is a real
    possibility rather than a rounding artifact."""
    try:
        cond = np.linalg.cond(system)
    except np.linalg.LinAlgError:
        return True
    return bool(not np.isfinite(cond) or cond > 1e13)


def _ridge_solve(design, target, lam):
    """(design^T design + lam I) coef = design^T target, via Cholesky."""
    p = design.shape[1]
    if p == 0:
        return np.zeros(0)
    system = design.T @ design
    system[np.arange(p), np.arange(p)] += lam
    if lam == 0.0 and _ill_conditioned(system):
        raise SingularSystemError("singular system")
    try:
        chol = sla.cho_factor(system, lower=True, check_finite=False)
        return sla.cho_solve(chol, design.T @ target, check_finite=False)
    except sla.LinAlgError as err:
        raise SingularSystemError("singular system") from err


# --- driving loops --------------------------------------------------------------

def fit(data: Dataset, config: Optional[FitConfig] = None):
    """Fit the multi-target model by block coordinate ascent.

    Runs density updates over all censored entries (cyclic row-major order or
    a seeded random permutation per sweep), then one parameter update, records
    the objective after each sweep, and stops once the relative change drops
    below ``rel_tol`` or ``max_sweeps`` is reached.

    Returns
    -------
    (ModelParams, VariationalState, FitReport)
    """
    config = config or FitConfig()
    start = time.perf_counter()
    try:
        workspace = AscentWorkspace(data, config)
    except NumericalError as err:
        if err.sweep is None:
            raise type(err)(err.base_message, sweep=1) from err
        raise

    trace = []
    converged = False
    sweeps = 0
    previous = None
    for sweep in range(1, config.max_sweeps + 1):
        try:
            workspace.run_sweep()
        except NumericalError as err:
            if err.sweep is None:
                raise type(err)(err.base_message, sweep=sweep) from err
            raise
        value = workspace.objective()
        trace.append(value)
        sweeps = sweep
        if previous is not None and abs(value - previous) < config.rel_tol * (
            1.0 + abs(value)
        ):
            converged = True
            break
        previous = value

    report = FitReport(
        objective_trace=trace if config.record_trace else [],
        sweeps_run=sweeps,
        converged=converged,
        elapsed_seconds=time.perf_counter() - start,
        beta_clamped=workspace.beta_clamped,
    )
    return workspace.params(), workspace.state(), report


def single_target_view(data: Dataset, target: int, fill_policy: str = "limit") -> Dataset:
    """Reduce a multi-target dataset to one censored target: the designated
    row keeps its censoring, every other target row becomes an explanatory
    column with its censored entries pre-filled per the policy."""
    if fill_policy not in FILL_POLICIES:
        raise ValidationError(
            f"unknown fill policy {fill_policy!r}; expected one of {FILL_POLICIES}"
        )
    if not 0 <= target < data.m:
        raise ValidationError(f"target index {target} out of range")
    filled = data.values.copy()
    if data.censored.any():
        base = bound_fill(
            data.window_lower[data.censored], data.window_upper[data.censored]
        )
        if fill_policy == "half-limit":
            base = 0.5 * base
        elif fill_policy == "zero":
            base = np.zeros_like(base)
        filled[data.censored] = base
    others = [j for j in range(data.m) if j != target]
    x_aug = np.column_stack([filled[others].T, data.x]) if others else data.x
    names = [data.target_names[j] for j in others] + list(data.feature_names)
    return Dataset(
        x_aug,
        [data.entries[target]],
        [data.target_names[target]],
        names,
    )


def fit_single_target(
    data: Dataset,
    target: int,
    fill_policy: str = "limit",
    config: Optional[FitConfig] = None,
):
    """The repeated-single-target baseline building block: fit one censored
    target on [other targets (pre-filled); features]."""
    view = single_target_view(data, target, fill_policy)
    params, _, report = fit(view, config)
    return params, report
