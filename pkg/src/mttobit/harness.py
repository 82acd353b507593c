"""Desk-scale reproduction of the benchmark protocol: synthetic coupled data,
quantile censoring at prescribed negative rates, the MTTM versus repeated-STTM
comparison with a paired t-test, and convergence / runtime probes.

All randomness flows from explicit seeds (per-trial streams are derived from
the master seed and the trial index), so every report is bit-reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import MttobitError, NumericalError, ValidationError
from .fit import AscentWorkspace, fit, single_target_view
from .impute import impute
from .model import (
    Dataset,
    FitConfig,
    Observed,
    interval_censored,
    left_censored,
    right_censored,
)

SIDES = ("left", "right", "interval")


@dataclass(frozen=True)
class CoefficientSpec:
    """Ground-truth coefficients for the synthetic generator.

    ``cross[j, k]`` is the coefficient of target j in target k's equation
    (zero diagonal); ``features`` is the (m, d) feature coefficient block.
    """

    cross: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cross", np.atleast_2d(np.asarray(self.cross, dtype=float)))
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim == 1:
            feats = feats.reshape(self.cross.shape[0], -1)
        object.__setattr__(self, "features", feats)

    @property
    def m(self) -> int:
        return self.cross.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @classmethod
    def independent(cls, features) -> "CoefficientSpec":
        """No cross-coupling: every target depends on the features alone."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        m = features.shape[0]
        return cls(np.zeros((m, m)), features)

    @classmethod
    def chain(cls, features, strength: float) -> "CoefficientSpec":
        """Neighbour coupling: target k loads on targets k-1 and k+1 with the
        given strength. Spectral radius stays below 1 for strength < 1/2 at
        any m (2·s·cos(pi/(m+1)) < 2s), so moderately strong chains are safe."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        m = features.shape[0]
        cross = np.zeros((m, m))
        for k in range(m - 1):
            cross[k, k + 1] = strength
            cross[k + 1, k] = strength
        return cls(cross, features)

    @classmethod
    def uniform(cls, features, strength: float) -> "CoefficientSpec":
        """Every pair coupled with the same strength (watch the spectral
        radius (m-1)·strength when m > 2)."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        m = features.shape[0]
        cross = np.full((m, m), strength)
        np.fill_diagonal(cross, 0.0)
        return cls(cross, features)


@dataclass(frozen=True)
class CensoringScenario:
    """How to hide data: the negative rate, which rows, and from which side."""

    negative_rate: float
    side: str = "left"
    target_rows: Optional[tuple] = None  # None censors every target row
    seed: int = 0
    label: str = ""

    @property
    def name(self) -> str:
        return self.label or self.side


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings for one benchmark family: fresh data drawn from the
    same ground truth every trial."""

    n: int
    coefficients: CoefficientSpec
    beta: float

    @property
    def m(self) -> int:
        return self.coefficients.m

    @property
    def d(self) -> int:
        return self.coefficients.d


@dataclass
class BenchmarkReport:
    """One scenario's aggregate: paired per-trial RMSEs and their test."""

    scenario: str
    rate: float
    trials: int
    mttm_rmse: list
    sttm_rmse: list
    mttm_mean: float
    mttm_sd: float
    sttm_mean: float
    sttm_sd: float
    t: float
    p: float


@dataclass
class ConvergenceProbe:
    """Objective gaps to a long-run optimum, one entry per sweep."""

    gaps: list
    objective_star: float
    sweeps_to_milestone: Optional[int]  # first sweep with gap < 1e-3, if any


@dataclass
class RuntimeRow:
    n: int
    seconds: float


def generate_synthetic(m, d, n, coefficients: CoefficientSpec, beta, seed):
    """Draw a fully observed dataset from the coupled linear model.

    X has standard normal entries; Y solves (I - A^T) y_i = W x_i + eps_i
    with eps ~ N(0, beta^{-1} I). Rejects coefficient sets whose coupling is
    explosive (spectral radius >= 1) or numerically hostile (condition of
    I - A^T above 1e6).
    """
    if m != coefficients.m or d != coefficients.d:
        raise ValidationError(
            f"coefficient spec is {coefficients.m}x{coefficients.d}, requested {m}x{d}"
        )
    if n < 1:
        raise ValidationError("n must be at least 1")
    if not (np.isfinite(beta) and beta > 0):
        raise ValidationError("beta must be positive and finite")
    cross = coefficients.cross
    if cross.shape != (m, m) or np.any(np.diag(cross) != 0.0):
        raise ValidationError("cross-coefficient matrix must be m x m with a zero diagonal")
    radius = float(np.max(np.abs(np.linalg.eigvals(cross))))
    if radius >= 1.0:
        raise ValidationError(
            f"cross-coupling spectral radius {radius:.3f} >= 1; the coupled system is explosive"
        )
    transfer = np.eye(m) - cross.T
    cond = float(np.linalg.cond(transfer))
    if cond > 1e6:
        raise ValidationError(f"I - A^T condition number {cond:.3g} exceeds 1e6")

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    noise = rng.standard_normal((m, n)) / math.sqrt(beta)
    y = np.linalg.solve(transfer, coefficients.features @ x.T + noise)
    data = Dataset(x, [[Observed(v) for v in row] for row in y])
    return data, y


def apply_censoring(data: Dataset, scenario: CensoringScenario):
    """Hide entries of the designated rows behind per-row detection limits
    chosen at empirical quantiles, so that exactly ceil(rate * n) entries of
    each row are censored. Returns the censored dataset and the map of hidden
    true values keyed by (target, example).
    """
    rate = scenario.negative_rate
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"negative rate must be in [0, 1), got {rate}")
    side = scenario.side.lower()
    if side not in SIDES:
        raise ValidationError(f"unknown censoring side {scenario.side!r}")
    if data.censored.any():
        raise ValidationError("apply_censoring expects a fully observed dataset")
    rows = range(data.m) if scenario.target_rows is None else sorted(scenario.target_rows)
    for k in rows:
        if not 0 <= k < data.m:
            raise ValidationError(f"target row {k} out of range")

    n = data.n
    count = math.ceil(rate * n)
    truth = {}
    if count == 0:
        same = Dataset(data.x, data.entries, data.target_names, data.feature_names)
        return same, truth
    if count >= n:
        raise ValidationError(
            f"rate {rate} would censor all {n} entries of a row; at least one must stay observed"
        )

    entries = [list(row) for row in data.entries]
    for k in rows:
        values = data.values[k]
        if side == "left":
            limit = float(np.sort(values)[count - 1])
            mask = values <= limit
            entry = left_censored(limit)
        elif side == "right":
            limit = float(np.sort(values)[n - count])
            mask = values >= limit
            entry = right_censored(limit)
        else:
            center = float(np.median(values))
            spread = np.abs(values - center)
            half = float(np.sort(spread)[count - 1])
            if half <= 0.0:
                raise ValidationError(
                    f"interval window around the median of row {k} is degenerate"
                )
            mask = spread <= half
            entry = interval_censored(center - half, center + half)
        achieved = int(mask.sum())
        if achieved != count:
            raise ValidationError(
                f"ties in target row {k}: requested {count} censored entries, achieved {achieved}"
            )
        for i in np.nonzero(mask)[0]:
            truth[(k, int(i))] = float(values[i])
            entries[k][i] = entry

    return Dataset(data.x, entries, data.target_names, data.feature_names), truth


def rmse(imputed: dict, truth: dict) -> float:
    """Root mean squared error over the hidden entries (and only those)."""
    if set(imputed) != set(truth):
        raise ValidationError("imputed and truth maps must share the same keys")
    if not truth:
        raise ValidationError("no censored entries to score")
    diffs = np.array([imputed[key] - truth[key] for key in sorted(truth)])
    return float(np.sqrt(np.mean(diffs * diffs)))


def paired_t_test(a, b):
    """Two-sided paired Student t-test. Returns (t, p).

    Identical lists are a well-defined no-signal case (t 0, p 1); lists whose
    differences are constant but nonzero have zero variance and make the
    statistic meaningless, which is an error rather than an infinity.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("paired t-test needs two equal-length lists")
    n = a.size
    if n < 2:
        raise ValidationError("paired t-test needs at least two pairs")
    diffs = a - b
    if np.all(diffs == 0.0):
        return 0.0, 1.0
    sd = float(diffs.std(ddof=1))
    if sd <= 1e-12 * float(np.max(np.abs(diffs))):
        raise NumericalError("degenerate paired differences: zero variance")
    t = float(diffs.mean() / (sd / math.sqrt(n)))
    p = float(2.0 * stats.t.sf(abs(t), n - 1))
    return t, p


def benchmark_compare(
    source,
    scenarios: Sequence[CensoringScenario],
    trials: int,
    config: Optional[FitConfig] = None,
    master_seed: int = 0,
    sttm_fill: str = "limit",
):
    """The Table-1 protocol at desk scale.

    Per scenario and trial: draw fresh synthetic data (when ``source`` is a
    SyntheticSpec; a fixed Dataset is reused as-is), censor it, impute with
    the multi-target model, impute with the repeated single-target baseline
    (each censored row as target in turn, other hidden entries pre-filled per
    ``sttm_fill``), and score both against the hidden truth. Aggregates into
    one BenchmarkReport per scenario; any trial failure aborts with the trial
    index attached.
    """
    if trials < 2:
        raise ValidationError("benchmark needs at least 2 trials")
    reports = []
    for scenario in scenarios:
        mttm_scores = []
        sttm_scores = []
        for trial in range(trials):
            try:
                if isinstance(source, SyntheticSpec):
                    data, _ = generate_synthetic(
                        source.m,
                        source.d,
                        source.n,
                        source.coefficients,
                        source.beta,
                        seed=[master_seed, scenario.seed, trial],
                    )
                else:
                    data = source
                censored, truth = apply_censoring(data, scenario)
                if not truth:
                    raise ValidationError("no censored entries to score")
                mttm_scores.append(rmse(_impute_mttm(censored, truth, config), truth))
                sttm_scores.append(
                    rmse(_impute_repeated_sttm(censored, truth, config, sttm_fill), truth)
                )
            except MttobitError as err:
                raise type(err)(f"trial {trial}: {err}") from err
        t, p = paired_t_test(mttm_scores, sttm_scores)
        m_arr = np.asarray(mttm_scores)
        s_arr = np.asarray(sttm_scores)
        reports.append(
            BenchmarkReport(
                scenario=scenario.name,
                rate=scenario.negative_rate,
                trials=trials,
                mttm_rmse=mttm_scores,
                sttm_rmse=sttm_scores,
                mttm_mean=float(m_arr.mean()),
                mttm_sd=float(m_arr.std(ddof=1)),
                sttm_mean=float(s_arr.mean()),
                sttm_sd=float(s_arr.std(ddof=1)),
                t=t,
                p=p,
            )
        )
    return reports


def _impute_mttm(censored: Dataset, truth: dict, config):
    completed, _, _ = impute(censored, config)
    return {key: float(completed[key]) for key in truth}


def _impute_repeated_sttm(censored: Dataset, truth: dict, config, fill_policy: str):
    """The baseline: one single-target fit per censored row, scoring that
    row's hidden entries from its own fit."""
    values = {}
    rows = sorted({k for (k, _) in truth})
    for k in rows:
        view = single_target_view(censored, k, fill_policy)
        completed, _, _ = impute(view, config)
        for (row, i) in truth:
            if row == k:
                values[(row, i)] = float(completed[0, i])
    return values


def convergence_probe(data: Dataset, config: Optional[FitConfig] = None) -> ConvergenceProbe:
    """Objective gap to a long-run optimum after each sweep.

    The reference value comes from the same fit pushed to a much tighter
    tolerance and a much larger sweep budget (so the reference is never the
    thing that ran out of sweeps); the probe then re-runs at the requested
    settings and reports F* - F(t), which is nonnegative and nonincreasing
    up to roundoff.
    """
    base = config or FitConfig()
    long_run = replace(
        base,
        rel_tol=1e-13,
        max_sweeps=max(2000, 10 * base.max_sweeps),
        record_trace=True,
    )
    _, _, ref_report = fit(data, long_run)
    star = ref_report.objective_trace[-1]
    _, _, report = fit(data, replace(base, record_trace=True))
    gaps = [star - value for value in report.objective_trace]
    milestone = next((i + 1 for i, g in enumerate(gaps) if g < 1e-3), None)
    return ConvergenceProbe(gaps=gaps, objective_star=star, sweeps_to_milestone=milestone)


def runtime_table(
    n_grid: Sequence[int],
    coefficients: CoefficientSpec,
    beta: float = 4.0,
    rate: float = 0.2,
    sweeps: int = 100,
    seed: int = 0,
    config: Optional[FitConfig] = None,
    repeats: int = 1,
):
    """Wall-clock seconds for exactly ``sweeps`` full sweeps at each n.

    Times the ascent loop itself (initialization excluded), the analogue of
    the runtime-versus-n table; censoring at ``rate`` keeps the density
    updates in the measurement. With ``repeats`` > 1 the minimum over fresh
    runs is reported, which filters scheduler noise when comparing sizes.

    Sweeps are vectorized per target row, so below a few hundred examples the
    cost is call overhead rather than arithmetic; expect the table to flatten
    out at the small end instead of growing linearly.
    """
    if sweeps < 1:
        raise ValidationError("sweeps must be a positive integer")
    if repeats < 1:
        raise ValidationError("repeats must be a positive integer")
    base = config or FitConfig()
    rows = []
    for n in n_grid:
        data, _ = generate_synthetic(
            coefficients.m, coefficients.d, int(n), coefficients, beta, seed=[seed, int(n)]
        )
        censored, _ = apply_censoring(
            data, CensoringScenario(negative_rate=rate, side="left", seed=seed)
        )
        best = math.inf
        for _ in range(repeats):
            workspace = AscentWorkspace(censored, replace(base, max_sweeps=sweeps))
            start = time.perf_counter()
            for _ in range(sweeps):
                workspace.run_sweep()
            best = min(best, time.perf_counter() - start)
        rows.append(RuntimeRow(n=int(n), seconds=best))
    return rows


# --- report emission ------------------------------------------------------------

REPORT_FIELDS = (
    "scenario",
    "rate",
    "trials",
    "mttm_mean",
    "mttm_sd",
    "sttm_mean",
    "sttm_sd",
    "t",
    "p",
)


def _cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def report_tsv(reports: Sequence[BenchmarkReport]) -> str:
    """Tab-separated benchmark table, one row per scenario."""
    lines = ["\t".join(REPORT_FIELDS)]
    for report in reports:
        lines.append("\t".join(_cell(getattr(report, name)) for name in REPORT_FIELDS))
    return "\n".join(lines) + "\n"


def report_json(reports: Sequence[BenchmarkReport]) -> str:
    """JSON benchmark table with the same fields as the TSV."""
    import json

    rows = []
    for report in reports:
        row = {}
        for name in REPORT_FIELDS:
            value = getattr(report, name)
            if isinstance(value, (int, np.integer)):
                row[name] = int(value)
            elif isinstance(value, str):
                row[name] = value
            else:
                row[name] = float(value)
        rows.append(row)
    return json.dumps(rows, indent=2) + "\n"


def runtime_tsv(rows: Sequence[RuntimeRow]) -> str:
    lines = ["n\tseconds"]
    for row in rows:
        lines.append(f"{row.n}\t{_cell(row.seconds)}")
    return "\n".join(lines) + "\n"


def runtime_json(rows: Sequence[RuntimeRow]) -> str:
    import json

    return json.dumps([{"n": row.n, "seconds": row.seconds} for row in rows], indent=2) + "\n"
