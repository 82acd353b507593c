"""Domain types shared by the whole package.

Datasets carry an explanatory matrix plus a grid of target entries, where
every entry is either an observed value or a censoring window; model
parameters, per-entry variational state, fit configuration and fit reports
live here too, together with dataset validation and model-file persistence.

All types are plain value objects. Fitting never mutates a caller's objects;
it works on private copies and returns fresh ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

INF = float("inf")


@dataclass(frozen=True)
class CensoringBound:
    """A censoring window [lower, upper]; either side may be infinite."""

    lower: float
    upper: float

    def __iter__(self):
        # lets the truncated-normal helpers unpack a bound like a pair
        yield self.lower
        yield self.upper

    @property
    def is_valid(self) -> bool:
        return (
            self.lower < self.upper
            and (math.isfinite(self.lower) or math.isfinite(self.upper))
            and not math.isnan(self.lower)
            and not math.isnan(self.upper)
        )


@dataclass(frozen=True)
class Observed:
    """A target entry whose value was actually measured."""

    value: float


@dataclass(frozen=True)
class Censored:
    """A target entry known only to lie inside its censoring window."""

    bound: CensoringBound


TargetEntry = Union[Observed, Censored]


def left_censored(upper: float) -> Censored:
    """Entry below a detection limit: window (-inf, upper]."""
    return Censored(CensoringBound(-INF, upper))


def right_censored(lower: float) -> Censored:
    """Entry above a quantification limit: window [lower, +inf)."""
    return Censored(CensoringBound(lower, INF))


def interval_censored(lower: float, upper: float) -> Censored:
    return Censored(CensoringBound(lower, upper))


class Dataset:
    """Explanatory matrix x (n rows, d columns) plus an m-by-n target grid.

    Parameters
    ----------
    x : array-like, shape (n, d)
        Explanatory variables, one row per example. d = 0 is allowed for a
        purely cross-target model.
    entries : sequence of m sequences of n TargetEntry
        The target grid; row k holds target k across all examples.
    target_names, feature_names : sequences of str, optional
        Default to y1..ym / x1..xd.
    """

    def __init__(self, x, entries, target_names=None, feature_names=None):
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.x.size == 0:
            n = len(entries[0]) if len(entries) else 0
            self.x = self.x.reshape(n, 0)
        self.entries = tuple(tuple(row) for row in entries)
        m = len(self.entries)
        n = len(self.entries[0]) if m else 0
        d = self.x.shape[1]
        if target_names is None:
            target_names = [f"y{k + 1}" for k in range(m)]
        if feature_names is None:
            feature_names = [f"x{j + 1}" for j in range(d)]
        self.target_names = list(target_names)
        self.feature_names = list(feature_names)
        self._build_arrays(m, n)

    def _build_arrays(self, m, n):
        values = np.full((m, n), np.nan)
        lower = np.full((m, n), -INF)
        upper = np.full((m, n), INF)
        censored = np.zeros((m, n), dtype=bool)
        for k, row in enumerate(self.entries):
            for i, entry in enumerate(row[:n]):
                if isinstance(entry, Observed):
                    values[k, i] = entry.value
                else:
                    censored[k, i] = True
                    lower[k, i] = entry.bound.lower
                    upper[k, i] = entry.bound.upper
        self.values = values
        self.window_lower = lower
        self.window_upper = upper
        self.censored = censored

    @property
    def m(self) -> int:
        return len(self.entries)

    @property
    def n(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def censored_indices(self):
        """All (k, i) with a censored entry, row-major order."""
        return [tuple(idx) for idx in np.argwhere(self.censored)]

    def n_censored(self) -> int:
        return int(self.censored.sum())


@dataclass
class ModelParams:
    """Fitted coefficients: per-target cross terms a_k, feature terms w_k,
    and the shared noise precision beta."""

    a: list  # m vectors, each of length m-1
    w: list  # m vectors, each of length d
    beta: float

    def __post_init__(self):
        self.a = [np.asarray(v, dtype=float).reshape(-1) for v in self.a]
        self.w = [np.asarray(v, dtype=float).reshape(-1) for v in self.w]
        self.beta = float(self.beta)

    @property
    def m(self) -> int:
        return len(self.a)

    @property
    def d(self) -> int:
        return len(self.w[0]) if self.w else 0

    def cross_matrix(self) -> np.ndarray:
        """The m-by-m coupling matrix A with column k holding a_k and a
        structural zero on the diagonal."""
        m = self.m
        mat = np.zeros((m, m))
        for k, vec in enumerate(self.a):
            mat[np.arange(m) != k, k] = vec
        return mat

    def feature_matrix(self) -> np.ndarray:
        """w stacked as an (m, d) array."""
        if self.d == 0:
            return np.zeros((self.m, 0))
        return np.vstack(self.w)

    def copy(self) -> "ModelParams":
        return ModelParams([v.copy() for v in self.a], [v.copy() for v in self.w], self.beta)


@dataclass(frozen=True)
class PointMass:
    """Variational state of an observed entry: all mass at the value."""

    value: float

    @property
    def mean(self) -> float:
        return self.value

    @property
    def second_moment(self) -> float:
        return self.value * self.value


@dataclass(frozen=True)
class TruncNormEntry:
    """Variational state of a censored entry: a truncated normal plus its
    cached first and second moments."""

    mu: float
    sigma: float
    bound: CensoringBound
    mean: float
    second_moment: float


class VariationalState:
    """Per-entry densities over the target grid.

    Observed entries are point masses; censored entries are truncated
    normals with cached moments. Array storage keeps the sweep fast; the
    ``entry`` accessor exposes the per-entry view.
    """

    def __init__(self, dataset: Dataset, mu, sigma, mean, second):
        self.censored = dataset.censored.copy()
        self.window_lower = dataset.window_lower.copy()
        self.window_upper = dataset.window_upper.copy()
        self.mu = np.asarray(mu, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        self.mean = np.asarray(mean, dtype=float)
        self.second = np.asarray(second, dtype=float)

    def entry(self, k: int, i: int):
        if not self.censored[k, i]:
            return PointMass(float(self.mean[k, i]))
        return TruncNormEntry(
            mu=float(self.mu[k, i]),
            sigma=float(self.sigma[k, i]),
            bound=CensoringBound(
                float(self.window_lower[k, i]), float(self.window_upper[k, i])
            ),
            mean=float(self.mean[k, i]),
            second_moment=float(self.second[k, i]),
        )

    def copy(self) -> "VariationalState":
        dup = object.__new__(VariationalState)
        for name in ("censored", "window_lower", "window_upper", "mu", "sigma", "mean", "second"):
            setattr(dup, name, getattr(self, name).copy())
        return dup

    def max_moment_deviation(self) -> float:
        """Largest relative gap between cached moments and fresh ones
        recomputed from (mu, sigma, bound); the cache contract keeps this
        below 1e-12."""
        from .truncnorm import tn_mean, tn_second_moment

        worst = 0.0
        for k, i in np.argwhere(self.censored):
            bound = (self.window_lower[k, i], self.window_upper[k, i])
            fresh_mean = tn_mean(self.mu[k, i], self.sigma[k, i], bound)
            fresh_second = tn_second_moment(self.mu[k, i], self.sigma[k, i], bound)
            worst = max(
                worst,
                abs(fresh_mean - self.mean[k, i]) / max(1.0, abs(fresh_mean)),
                abs(fresh_second - self.second[k, i]) / max(1.0, abs(fresh_second)),
            )
        return worst


@dataclass
class FitConfig:
    """Knobs for the block coordinate ascent loop."""

    lambda_reg: float = 1e-3
    max_sweeps: int = 500
    rel_tol: float = 1e-8
    sweep_order: str = "cyclic"  # "cyclic" or "random"
    sweep_seed: int = 0
    record_trace: bool = True
    couple_targets: bool = True  # False freezes all cross-coefficients at zero

    def check(self):
        from .errors import ValidationError

        if self.lambda_reg < 0:
            raise ValidationError("lambda_reg must be nonnegative")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be a positive integer")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be positive")
        if self.sweep_order not in ("cyclic", "random"):
            raise ValidationError(f"unknown sweep_order {self.sweep_order!r}")


@dataclass
class FitReport:
    """What happened during a fit: the objective after each sweep, how many
    sweeps ran, whether the stopping rule fired, and wall-clock time."""

    objective_trace: list = field(default_factory=list)
    sweeps_run: int = 0
    converged: bool = False
    elapsed_seconds: float = 0.0
    beta_clamped: bool = False


@dataclass
class ValidationResult:
    ok: bool
    violations: list
    warnings: list


def dataset_validate(dataset: Dataset) -> ValidationResult:
    """Check a dataset against the documented invariants.

    Returns a result rather than raising: violations make it unusable,
    warnings (currently only an entirely-censored target row) do not.
    """
    violations = []
    warnings = []
    m, n, d = dataset.m, dataset.n, dataset.d

    if n < 1:
        violations.append("n >= 1 required (dataset has no examples)")
    if m < 1:
        violations.append("m >= 1 required (dataset has no target rows)")
    if dataset.x.shape[0] != n and n >= 1:
        violations.append(
            f"x has {dataset.x.shape[0]} rows but the target grid has {n} columns"
        )
    if len(dataset.target_names) != m:
        violations.append("target_names length does not match the number of targets")
    if len(dataset.feature_names) != d:
        violations.append("feature_names length does not match the number of features")
    if dataset.x.size and not np.all(np.isfinite(dataset.x)):
        bad = np.argwhere(~np.isfinite(dataset.x))[0]
        violations.append(
            f"non-finite explanatory value at example {bad[0]}, feature {bad[1]}"
        )

    for k, row in enumerate(dataset.entries):
        if len(row) != n:
            violations.append(f"target row {k} has {len(row)} entries, expected {n}")
            continue
        n_censored = 0
        for i, entry in enumerate(row):
            if isinstance(entry, Observed):
                if not math.isfinite(entry.value):
                    violations.append(
                        f"observed entry ({k},{i}) carries a non-finite value"
                    )
            elif isinstance(entry, Censored):
                n_censored += 1
                b = entry.bound
                if math.isnan(b.lower) or math.isnan(b.upper) or b.lower >= b.upper:
                    violations.append(
                        f"degenerate bound [{b.lower}, {b.upper}] at entry ({k},{i})"
                    )
                elif not (math.isfinite(b.lower) or math.isfinite(b.upper)):
                    violations.append(
                        f"censoring window at entry ({k},{i}) has no finite side"
                    )
            else:
                violations.append(f"entry ({k},{i}) is not Observed or Censored")
        if n >= 1 and n_censored == n:
            warnings.append(
                f"target row {k} ({dataset.target_names[k]}) is entirely censored;"
                " its fit is driven by regularization and cross-target structure"
            )

    return ValidationResult(ok=not violations, violations=violations, warnings=warnings)


# --- model file persistence -------------------------------------------------

def _format_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _to_json(obj, indent=0) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, int, float, np.integer, np.floating)):
        return _format_number(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [_to_json(v, indent + 1) for v in obj]
        if not items:
            return "[]"
        return "[" + ", ".join(items) + "]"
    if isinstance(obj, dict):
        lines = [
            f'{pad}  {json.dumps(str(key))}: {_to_json(value, indent + 1)}'
            for key, value in obj.items()
        ]
        return "{\n" + ",\n".join(lines) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def save_model(
    path,
    params: ModelParams,
    target_names: Sequence[str],
    feature_names: Sequence[str],
    lambda_reg: float,
    fit_report: Optional[FitReport] = None,
) -> None:
    """Write the model document: a self-describing JSON file whose numbers
    carry 17 significant digits, enough to reproduce every double bit-exactly."""
    report = None
    if fit_report is not None:
        report = {
            "objective_trace": list(fit_report.objective_trace),
            "sweeps_run": fit_report.sweeps_run,
            "converged": fit_report.converged,
            "elapsed_seconds": fit_report.elapsed_seconds,
            "beta_clamped": fit_report.beta_clamped,
        }
    doc = {
        "m": params.m,
        "d": params.d,
        "target_names": list(target_names),
        "feature_names": list(feature_names),
        "a": [list(v) for v in params.a],
        "w": [list(v) for v in params.w],
        "beta": params.beta,
        "lambda_reg": float(lambda_reg),
        "fit_report": report,
    }
    with open(path, "w") as fh:
        fh.write(_to_json(doc) + "\n")


@dataclass
class LoadedModel:
    params: ModelParams
    target_names: list
    feature_names: list
    lambda_reg: float
    fit_report: Optional[FitReport]


def load_model(path) -> LoadedModel:
    with open(path) as fh:
        doc = json.load(fh)
    m, d = int(doc["m"]), int(doc["d"])
    a = [np.asarray(row, dtype=float) for row in doc["a"]]
    w = [np.asarray(row, dtype=float) for row in doc["w"]]
    if len(a) != m or any(len(v) != m - 1 for v in a):
        raise ValueError("model file: cross-coefficient block has wrong shape")
    if len(w) != m or any(len(v) != d for v in w):
        raise ValueError("model file: feature-coefficient block has wrong shape")
    report = None
    if doc.get("fit_report") is not None:
        r = doc["fit_report"]
        report = FitReport(
            objective_trace=[float(v) for v in r.get("objective_trace", [])],
            sweeps_run=int(r.get("sweeps_run", 0)),
            converged=bool(r.get("converged", False)),
            elapsed_seconds=float(r.get("elapsed_seconds", 0.0)),
            beta_clamped=bool(r.get("beta_clamped", False)),
        )
    return LoadedModel(
        params=ModelParams(a=a, w=w, beta=float(doc["beta"])),
        target_names=[str(s) for s in doc["target_names"]],
        feature_names=[str(s) for s in doc["feature_names"]],
        lambda_reg=float(doc["lambda_reg"]),
        fit_report=report,
    )
