"""Command-line front end: fit, impute, simulate, runtime.

Exit codes: 0 success, 1 parse error, 2 validation error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .errors import (
    MttobitError,
    NumericalError,
    TableFormatError,
    ValidationError,
)
from .fit import fit
from .harness import (
    CensoringScenario,
    CoefficientSpec,
    SyntheticSpec,
    benchmark_compare,
    report_json,
    report_tsv,
    runtime_json,
    runtime_table,
    runtime_tsv,
)
from .impute import impute, impute_with_params
from .io import read_table, write_table
from .model import FitConfig, load_model, save_model


def _add_fit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lambda_reg", type=float, default=1e-3,
                        help="coefficient penalty weight (default 1e-3)")
    parser.add_argument("--max-sweeps", type=int, default=500,
                        help="sweep budget (default 500)")
    parser.add_argument("--tol", type=float, default=1e-8,
                        help="relative objective-change stopping tolerance (default 1e-8)")
    parser.add_argument("--order", choices=["cyclic", "random"], default="cyclic",
                        help="coordinate visit order within a sweep")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for the random visit order")


def _config_from(args) -> FitConfig:
    return FitConfig(
        lambda_reg=args.lambda_reg,
        max_sweeps=args.max_sweeps,
        rel_tol=args.tol,
        sweep_order=args.order,
        sweep_seed=args.seed,
    )


def _split_names(text: str):
    names = [name for name in text.split(",") if name != ""]
    if not names:
        raise ValidationError("--targets needs at least one column name")
    return names


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_fit(args) -> int:
    doc = read_table(args.input, _split_names(args.targets), intercept=not args.no_intercept)
    config = _config_from(args)
    params, state, report = fit(doc.dataset, config)
    if args.model_out:
        save_model(
            args.model_out,
            params,
            doc.dataset.target_names,
            doc.dataset.feature_names,
            config.lambda_reg,
            report,
        )
    final = float(report.objective_trace[-1]) if report.objective_trace else float("nan")
    print(f"sweeps: {report.sweeps_run}")
    print(f"objective: {final!r}")
    print(f"converged: {'true' if report.converged else 'false'}")
    print(f"elapsed_seconds: {report.elapsed_seconds:.3f}")
    if report.beta_clamped:
        print("note: noise precision hit its clamp; the fit is degenerate")
    if args.model_out:
        print(f"model: {args.model_out}")
    return 0


def _load_model_file(path):
    try:
        return load_model(path)
    except OSError as err:
        raise TableFormatError(f"cannot read model file: {err}") from None
    except (ValueError, KeyError, TypeError) as err:
        raise TableFormatError(f"bad model file {path}: {err}") from None


def cmd_impute(args) -> int:
    if args.model:
        loaded = _load_model_file(args.model)
        targets = _split_names(args.targets) if args.targets else loaded.target_names
        doc = read_table(args.input, targets, intercept=not args.no_intercept)
        if doc.dataset.target_names != loaded.target_names:
            raise ValidationError(
                f"model was fit for targets {loaded.target_names}, table gives {targets}"
            )
        if doc.dataset.feature_names != loaded.feature_names:
            raise ValidationError(
                f"model features {loaded.feature_names} do not match the table's "
                f"{doc.dataset.feature_names}"
            )
        completed = impute_with_params(doc.dataset, loaded.params)
    else:
        if not args.targets:
            raise ValidationError("--targets is required when no --model is given")
        doc = read_table(args.input, _split_names(args.targets), intercept=not args.no_intercept)
        completed, _, _ = impute(doc.dataset, _config_from(args))
    _emit(write_table(doc, completed, mark=args.mark), args.out)
    return 0


def _report_siblings(path):
    base, _ = os.path.splitext(path)
    return base + ".json", base + ".png"


def cmd_simulate(args) -> int:
    if args.rate == 0.0:
        raise ValidationError("nothing to score: rate 0 censors no entries")
    if args.trials < 2:
        raise ValidationError("--trials must be at least 2")
    rng = np.random.default_rng([args.seed, 1])
    features = rng.normal(size=(args.m, args.d))
    coefficients = CoefficientSpec.chain(features, args.strength)
    scenario = CensoringScenario(negative_rate=args.rate, side=args.side, seed=args.seed)
    reports = benchmark_compare(
        SyntheticSpec(n=args.n, coefficients=coefficients, beta=args.beta),
        [scenario],
        trials=args.trials,
        config=_config_from(args),
        master_seed=args.seed,
    )
    text = report_tsv(reports)
    sys.stdout.write(text)
    if args.report:
        json_path, png_path = _report_siblings(args.report)
        with open(args.report, "w") as fh:
            fh.write(text)
        with open(json_path, "w") as fh:
            fh.write(report_json(reports))
        from .figures import benchmark_figure

        benchmark_figure(reports, png_path)
    return 0


def cmd_runtime(args) -> int:
    try:
        grid = [int(part) for part in args.n_grid.split(",") if part != ""]
    except ValueError:
        raise ValidationError(f"--n-grid must be a comma list of integers, got {args.n_grid!r}")
    if not grid:
        raise ValidationError("--n-grid must name at least one size")
    rng = np.random.default_rng([args.seed, 1])
    coefficients = CoefficientSpec.chain(rng.normal(size=(args.m, args.d)), args.strength)
    rows = runtime_table(
        grid,
        coefficients,
        beta=args.beta,
        rate=args.rate,
        sweeps=args.sweeps,
        seed=args.seed,
        repeats=args.repeats,
    )
    text = runtime_tsv(rows)
    sys.stdout.write(text)
    if args.report:
        json_path, png_path = _report_siblings(args.report)
        with open(args.report, "w") as fh:
            fh.write(text)
        with open(json_path, "w") as fh:
            fh.write(runtime_json(rows))
        from .figures import runtime_figure

        runtime_figure(rows, png_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mttobit",
        description="Censored multi-target regression: fit, impute, and benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the model to a CSV table")
    p_fit.add_argument("input", help="CSV file with a header row")
    p_fit.add_argument("--targets", required=True,
                       help="comma-separated target column names")
    p_fit.add_argument("--no-intercept", action="store_true",
                       help="do not append a constant feature")
    _add_fit_flags(p_fit)
    p_fit.add_argument("--model-out", help="write the fitted model document here")
    p_fit.set_defaults(func=cmd_fit)

    p_imp = sub.add_parser("impute", help="fill censored cells with model expectations")
    p_imp.add_argument("input", help="CSV file with a header row")
    p_imp.add_argument("--targets",
                       help="comma-separated target column names (defaults to the model's)")
    p_imp.add_argument("--model", help="previously saved model document")
    p_imp.add_argument("--out", help="write the completed CSV here instead of stdout")
    p_imp.add_argument("--mark", action="store_true",
                       help="append a boolean column per target flagging imputed cells")
    p_imp.add_argument("--no-intercept", action="store_true",
                       help="do not append a constant feature")
    _add_fit_flags(p_imp)
    p_imp.set_defaults(func=cmd_impute)

    p_sim = sub.add_parser("simulate",
                           help="benchmark multi-target against single-target imputation")
    p_sim.add_argument("--m", type=int, default=4, help="number of targets (default 4)")
    p_sim.add_argument("--d", type=int, default=3, help="number of features (default 3)")
    p_sim.add_argument("--n", type=int, default=100, help="examples per trial (default 100)")
    p_sim.add_argument("--rate", type=float, required=True,
                       help="fraction of each target row to censor")
    p_sim.add_argument("--side", choices=["left", "right", "interval"], default="left")
    p_sim.add_argument("--trials", type=int, default=50)
    p_sim.add_argument("--strength", type=float, default=0.5,
                       help="neighbour-coupling strength of the ground truth")
    p_sim.add_argument("--beta", type=float, default=4.0,
                       help="ground-truth noise precision")
    p_sim.add_argument("--report",
                       help="also write the table here, with .json and .png siblings")
    _add_fit_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_rt = sub.add_parser("runtime", help="time a fixed sweep budget across table sizes")
    p_rt.add_argument("--n-grid", default="10,100,1000",
                      help="comma list of example counts (default 10,100,1000)")
    p_rt.add_argument("--sweeps", type=int, default=100)
    p_rt.add_argument("--m", type=int, default=4)
    p_rt.add_argument("--d", type=int, default=3)
    p_rt.add_argument("--rate", type=float, default=0.2)
    p_rt.add_argument("--strength", type=float, default=0.5)
    p_rt.add_argument("--beta", type=float, default=4.0)
    p_rt.add_argument("--seed", type=int, default=0)
    p_rt.add_argument("--repeats", type=int, default=1,
                      help="time each size this many times and keep the best")
    p_rt.add_argument("--report",
                      help="also write the table here, with .json and .png siblings")
    p_rt.set_defaults(func=cmd_runtime)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TableFormatError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except NumericalError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except MttobitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
