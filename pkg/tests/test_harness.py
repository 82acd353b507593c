"""Benchmark harness: generator, censoring, scoring, and the probes."""

import json
import math

import numpy as np
import pytest

from mttobit.errors import NumericalError, ValidationError
from mttobit.harness import (
    BenchmarkReport,
    CensoringScenario,
    CoefficientSpec,
    SyntheticSpec,
    apply_censoring,
    benchmark_compare,
    convergence_probe,
    generate_synthetic,
    paired_t_test,
    report_json,
    report_tsv,
    rmse,
    runtime_table,
)
from mttobit.model import Dataset, FitConfig, Observed

# Frozen scoring constants: sqrt(mean((3,4)^2)) and the three-pair t-test
# with differences (1, 2, 3): t = 2*sqrt(3), p from Student t with 2 dof.
RMSE_3_4 = 3.5355339059327378
T_DIFFS_123 = 3.4641016151377546
P_DIFFS_123 = 0.07417990022744854


def observed_dataset(y, x=None):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x is None:
        x = np.zeros((y.shape[1], 0))
    return Dataset(x, [[Observed(v) for v in row] for row in y])


def chain_spec(m=4, d=3, seed=0, strength=0.5):
    rng = np.random.default_rng(seed)
    return CoefficientSpec.chain(rng.normal(size=(m, d)), strength)


# --- generator -------------------------------------------------------------------


def test_generator_shapes_and_determinism():
    spec = chain_spec()
    data, y = generate_synthetic(4, 3, 50, spec, 4.0, seed=7)
    assert (data.m, data.n, data.d) == (4, 50, 3)
    assert y.shape == (4, 50)
    assert not data.censored.any()
    assert np.array_equal(data.values, y)

    again, y2 = generate_synthetic(4, 3, 50, spec, 4.0, seed=7)
    assert np.array_equal(data.x, again.x)
    assert np.array_equal(y, y2)

    other, _ = generate_synthetic(4, 3, 50, spec, 4.0, seed=8)
    assert not np.array_equal(data.x, other.x)


def test_generator_solves_structural_equations():
    # With enormous precision the noise vanishes and y must satisfy
    # (I - A^T) y = W x exactly up to solver roundoff.
    spec = chain_spec(m=3, d=2, seed=1, strength=0.4)
    data, y = generate_synthetic(3, 2, 20, spec, 1e12, seed=3)
    transfer = np.eye(3) - spec.cross.T
    rhs = spec.features @ data.x.T
    assert np.allclose(transfer @ y, rhs, atol=1e-4)


def test_generator_noise_scale_tracks_beta():
    spec = CoefficientSpec.independent(np.zeros((1, 0)))
    _, y = generate_synthetic(1, 0, 40000, spec, 4.0, seed=5)
    # pure noise with variance 1/beta = 0.25
    assert abs(np.var(y) - 0.25) < 0.01


def test_generator_rejects_bad_inputs():
    spec = chain_spec()
    with pytest.raises(ValidationError):
        generate_synthetic(3, 3, 50, spec, 4.0, seed=0)  # m mismatch
    with pytest.raises(ValidationError):
        generate_synthetic(4, 3, 0, spec, 4.0, seed=0)
    with pytest.raises(ValidationError):
        generate_synthetic(4, 3, 50, spec, -1.0, seed=0)

    # uniform coupling with m=3, strength 0.6 has spectral radius 1.2
    explosive = CoefficientSpec.uniform(np.zeros((3, 1)), 0.6)
    with pytest.raises(ValidationError, match="spectral radius"):
        generate_synthetic(3, 1, 10, explosive, 4.0, seed=0)

    # rho = 1 - 1e-7 < 1 but cond(I - A^T) ~ 2e7 > 1e6
    hostile = CoefficientSpec.uniform(np.zeros((2, 1)), 1.0 - 1e-7)
    with pytest.raises(ValidationError, match="condition"):
        generate_synthetic(2, 1, 10, hostile, 4.0, seed=0)


# --- censoring -------------------------------------------------------------------


def test_left_censoring_hits_exact_count():
    y = np.arange(10) + 0.5
    data = observed_dataset(y)
    censored, truth = apply_censoring(data, CensoringScenario(negative_rate=0.3, side="left"))
    assert censored.n_censored() == 3
    assert set(truth) == {(0, 0), (0, 1), (0, 2)}
    assert truth[(0, 2)] == 2.5
    for i in range(3):
        assert censored.window_upper[0, i] == 2.5
        assert censored.window_lower[0, i] == -np.inf
    # uncensored entries unchanged
    assert np.array_equal(censored.values[0, 3:], y[3:])


def test_right_and_interval_censoring():
    y = np.arange(10) + 0.5
    data = observed_dataset(y)

    right, truth_r = apply_censoring(data, CensoringScenario(negative_rate=0.3, side="right"))
    assert set(truth_r) == {(0, 7), (0, 8), (0, 9)}
    assert right.window_lower[0, 9] == 7.5

    skewed = observed_dataset([0.1, 1.0, 2.2, 3.1, 4.9, 7.3, 8.0, 9.9])
    mid, truth_i = apply_censoring(skewed, CensoringScenario(negative_rate=0.3, side="interval"))
    # median 4.0, third-smallest deviation 1.8: entries 2.2, 3.1, 4.9
    assert set(truth_i) == {(0, 2), (0, 3), (0, 4)}
    assert mid.window_lower[0, 2] == pytest.approx(4.0 - 1.8)
    assert mid.window_upper[0, 2] == pytest.approx(4.0 + 1.8)


def test_censoring_rate_zero_is_identity():
    data = observed_dataset(np.arange(6), x=np.ones((6, 1)))
    same, truth = apply_censoring(data, CensoringScenario(negative_rate=0.0))
    assert truth == {}
    assert np.array_equal(same.values, data.values)
    assert not same.censored.any()


def test_censoring_respects_target_rows():
    data = observed_dataset([np.arange(8), np.arange(8) * 2.0])
    censored, truth = apply_censoring(
        data, CensoringScenario(negative_rate=0.25, side="left", target_rows=(1,))
    )
    assert not censored.censored[0].any()
    assert censored.censored[1].sum() == 2
    assert all(k == 1 for (k, _) in truth)


def test_censoring_tie_error_reports_achieved_count():
    data = observed_dataset([0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
    with pytest.raises(ValidationError, match="requested 1.*achieved 2"):
        apply_censoring(data, CensoringScenario(negative_rate=0.1, side="left"))

    # even count with symmetric values: both middle points are equidistant
    symmetric = observed_dataset(np.arange(10) + 0.5)
    with pytest.raises(ValidationError, match="ties"):
        apply_censoring(symmetric, CensoringScenario(negative_rate=0.3, side="interval"))


def test_censoring_rejects_degenerate_requests():
    data = observed_dataset(np.arange(10) + 0.5)
    with pytest.raises(ValidationError, match="at least one"):
        apply_censoring(data, CensoringScenario(negative_rate=0.95, side="left"))
    with pytest.raises(ValidationError):
        apply_censoring(data, CensoringScenario(negative_rate=1.0))
    with pytest.raises(ValidationError, match="side"):
        apply_censoring(data, CensoringScenario(negative_rate=0.2, side="middle"))

    # odd n: the median is a data point, so a single interval pick degenerates
    odd = observed_dataset(np.arange(9) + 0.5)
    with pytest.raises(ValidationError, match="degenerate"):
        apply_censoring(odd, CensoringScenario(negative_rate=0.1, side="interval"))

    already, _ = apply_censoring(data, CensoringScenario(negative_rate=0.2, side="left"))
    with pytest.raises(ValidationError, match="fully observed"):
        apply_censoring(already, CensoringScenario(negative_rate=0.2, side="left"))


# --- scoring ---------------------------------------------------------------------


def test_rmse_examples():
    assert rmse({(0, 0): 1.0, (1, 3): -2.0}, {(0, 0): 1.0, (1, 3): -2.0}) == 0.0
    assert rmse({(0, 0): 1.0}, {(0, 0): 2.0}) == 1.0
    value = rmse({(0, 0): 0.0, (0, 1): 0.0}, {(0, 0): 3.0, (0, 1): 4.0})
    assert value == pytest.approx(RMSE_3_4, rel=1e-15)


def test_rmse_rejects_bad_maps():
    with pytest.raises(ValidationError, match="no censored entries to score"):
        rmse({}, {})
    with pytest.raises(ValidationError, match="keys"):
        rmse({(0, 0): 1.0}, {(0, 1): 1.0})


def test_paired_t_test_examples():
    assert paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == (0.0, 1.0)

    t, p = paired_t_test([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    assert t == pytest.approx(T_DIFFS_123, rel=1e-12)
    assert t == pytest.approx(2.0 * math.sqrt(3.0), rel=1e-12)
    assert p == pytest.approx(P_DIFFS_123, rel=1e-12)

    # sign convention: first argument smaller -> negative statistic
    t_neg, _ = paired_t_test([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
    assert t_neg == pytest.approx(-T_DIFFS_123, rel=1e-12)


def test_paired_t_test_degenerate_and_invalid():
    with pytest.raises(NumericalError, match="degenerate"):
        paired_t_test([1.0, 1.0, 1.0, 1.0 + 1e-15], [0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        paired_t_test([1.0, 2.0], [1.0])
    with pytest.raises(ValidationError):
        paired_t_test([1.0], [2.0])


def test_paired_t_test_matches_scipy():
    from scipy import stats

    rng = np.random.default_rng(4)
    a = rng.normal(size=12)
    b = rng.normal(size=12)
    t, p = paired_t_test(a, b)
    ref = stats.ttest_rel(a, b)
    assert t == pytest.approx(ref.statistic, rel=1e-12)
    assert p == pytest.approx(ref.pvalue, rel=1e-12)


# --- benchmark -------------------------------------------------------------------


def small_benchmark(trials=3, master_seed=11):
    spec = chain_spec(m=2, d=2, seed=2, strength=0.5)
    scenarios = [CensoringScenario(negative_rate=0.2, side="left")]
    return benchmark_compare(
        SyntheticSpec(n=40, coefficients=spec, beta=4.0),
        scenarios,
        trials=trials,
        master_seed=master_seed,
    )


def test_benchmark_report_shape_and_aggregates():
    reports = small_benchmark()
    assert len(reports) == 1
    report = reports[0]
    assert isinstance(report, BenchmarkReport)
    assert report.scenario == "left"
    assert report.rate == 0.2
    assert report.trials == 3
    assert len(report.mttm_rmse) == 3
    assert len(report.sttm_rmse) == 3
    assert all(v > 0 for v in report.mttm_rmse + report.sttm_rmse)
    assert report.mttm_mean == pytest.approx(np.mean(report.mttm_rmse))
    assert report.mttm_sd == pytest.approx(np.std(report.mttm_rmse, ddof=1))
    assert report.sttm_mean == pytest.approx(np.mean(report.sttm_rmse))
    assert 0.0 <= report.p <= 1.0


def test_benchmark_is_bit_reproducible():
    first = small_benchmark()
    second = small_benchmark()
    assert report_tsv(first) == report_tsv(second)
    assert report_json(first) == report_json(second)


def test_benchmark_trial_seeds_are_per_index():
    # trial k's data depends only on (master_seed, scenario.seed, k), so a
    # shorter run is a prefix of a longer one
    longer = small_benchmark(trials=3)[0]
    shorter = small_benchmark(trials=2)[0]
    assert longer.mttm_rmse[:2] == shorter.mttm_rmse
    assert longer.sttm_rmse[:2] == shorter.sttm_rmse


def test_benchmark_propagates_trial_failures():
    spec = chain_spec(m=2, d=2, seed=2, strength=0.5)
    with pytest.raises(ValidationError, match="trial 0.*no censored entries to score"):
        benchmark_compare(
            SyntheticSpec(n=40, coefficients=spec, beta=4.0),
            [CensoringScenario(negative_rate=0.0)],
            trials=2,
        )
    with pytest.raises(ValidationError, match="at least 2"):
        benchmark_compare(
            SyntheticSpec(n=40, coefficients=spec, beta=4.0),
            [CensoringScenario(negative_rate=0.2)],
            trials=1,
        )


def test_report_tsv_layout():
    reports = small_benchmark()
    text = report_tsv(reports)
    lines = text.strip().split("\n")
    assert lines[0].split("\t") == [
        "scenario",
        "rate",
        "trials",
        "mttm_mean",
        "mttm_sd",
        "sttm_mean",
        "sttm_sd",
        "t",
        "p",
    ]
    cells = lines[1].split("\t")
    assert cells[0] == "left"
    assert float(cells[1]) == 0.2
    assert int(cells[2]) == 3
    assert float(cells[3]) == reports[0].mttm_mean  # repr round-trips exactly


def test_report_json_layout():
    reports = small_benchmark()
    rows = json.loads(report_json(reports))
    assert len(rows) == 1
    row = rows[0]
    assert set(row) == {
        "scenario",
        "rate",
        "trials",
        "mttm_mean",
        "mttm_sd",
        "sttm_mean",
        "sttm_sd",
        "t",
        "p",
    }
    assert row["scenario"] == "left"
    assert row["mttm_sd"] == reports[0].mttm_sd


# --- probes ----------------------------------------------------------------------


def test_convergence_probe_gap_properties():
    spec = chain_spec(m=3, d=2, seed=6, strength=0.4)
    data, _ = generate_synthetic(3, 2, 40, spec, 4.0, seed=9)
    censored, _ = apply_censoring(data, CensoringScenario(negative_rate=0.2, side="left"))
    probe = convergence_probe(censored)
    gaps = np.array(probe.gaps)
    slack = 1e-9 * (1.0 + abs(probe.objective_star))
    assert gaps.size >= 2
    assert (gaps > -slack).all()
    assert (np.diff(gaps) <= slack).all()
    assert probe.sweeps_to_milestone is not None
    assert gaps[probe.sweeps_to_milestone - 1] < 1e-3


def test_convergence_probe_fully_observed_is_immediate():
    spec = chain_spec(m=2, d=2, seed=3, strength=0.3)
    data, _ = generate_synthetic(2, 2, 30, spec, 4.0, seed=4)
    probe = convergence_probe(data)
    slack = 1e-9 * (1.0 + abs(probe.objective_star))
    assert len(probe.gaps) == 2
    assert abs(probe.gaps[0]) <= slack
    assert probe.sweeps_to_milestone == 1


def test_runtime_table_rows():
    spec = chain_spec()
    rows = runtime_table([10, 25], spec, sweeps=5, seed=1)
    assert [row.n for row in rows] == [10, 25]
    assert all(row.seconds > 0 for row in rows)
    with pytest.raises(ValidationError):
        runtime_table([10], spec, sweeps=0)
    with pytest.raises(ValidationError):
        runtime_table([10], spec, sweeps=5, repeats=0)


def test_runtime_grows_once_arithmetic_dominates():
    # below a few hundred examples the sweep cost is call overhead; compare
    # sizes where the O(n) work is actually visible
    spec = chain_spec()
    rows = runtime_table([100, 1000], spec, sweeps=60, seed=1, repeats=3)
    assert rows[1].seconds > rows[0].seconds
