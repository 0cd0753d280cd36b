"""Command-line interface.

Subcommands wire the library into the estimation pipeline: extract AR(1)
forecast errors, estimate a penalized correlation matrix, scan the
regularization grid, screen covariates and build penalty matrices, run
the simulation study, and produce/score projection ensembles. Outputs are
written atomically; every output file gets a ``.manifest.json`` sidecar.

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .empirical import (
    fit_ar1,
    format_panel_csv,
    format_params_csv,
    r_tilde_basic,
    r_tilde_pd,
    read_panel_csv,
    read_params_csv,
    _read_labelled_rows,
)
from .errors import NumericalError, ValidationError
from .forecast import (
    compare_models,
    load_ensemble,
    project,
    read_weights_csv,
    save_ensemble,
)
from .lambda_select import DEFAULT_SPAN, select_lambda
from .manifest import RunManifest, write_atomic, write_output
from .matrices import format_matrix_csv, read_matrix_csv, read_penalty_csv
from .penalty import build_penalty, read_covariate_csv, screen_covariates
from .simulation import SimScenario, default_scenario, run_study
from .solver import SolverConfig, solve_lpoc


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default, which collides with the
    # "numerical failure" exit code; usage problems are validation errors.
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _manifest(args, command: str, *input_paths, seed: int | None = None) -> RunManifest:
    config = {
        k: (str(v) if isinstance(v, os.PathLike) else v)
        for k, v in vars(args).items()
        if k not in ("func",)
    }
    m = RunManifest(command=command, version=__version__, config=config, seed=seed)
    for p in input_paths:
        if p is not None:
            m.add_input(p)
    return m


def _parse_grid(text: str) -> np.ndarray:
    """Either "start:step:stop" (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValidationError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return np.round(start + step * np.arange(count), 12)
    return np.array([float(p) for p in text.split(",") if p.strip() != ""])


def cmd_fit_errors(args) -> int:
    panel = read_panel_csv(args.panel)
    manifest = _manifest(args, "fit-errors", args.panel)
    params, errors = fit_ar1(panel, on_constant=args.on_constant)
    basic = r_tilde_basic(errors)
    rpd = r_tilde_pd(basic)
    write_output(args.out_errors, format_panel_csv(panel.labels, errors.values), manifest)
    write_output(args.out_params, format_params_csv(panel.labels, params), manifest)
    write_output(args.out_rtilde_basic, format_matrix_csv(basic.values, basic.labels), manifest)
    write_output(args.out_rtilde_pd, format_matrix_csv(rpd.values, rpd.labels), manifest)
    return 0


def cmd_estimate(args) -> int:
    r_tilde = read_matrix_csv(args.rtilde)
    penalty = read_penalty_csv(args.penalty)
    target = read_matrix_csv(args.target) if args.target else None
    initial = read_matrix_csv(args.initial).values if args.initial else None
    if args.lambda_eff is not None:
        lambda_eff = args.lambda_eff
    else:
        if args.n_obs is None:
            raise ValidationError("--lam requires --n-obs")
        lambda_eff = args.lam / args.n_obs
    config = SolverConfig(
        lambda_eff=lambda_eff,
        target=target,
        outer_tol=args.outer_tol,
        inner_tol=args.inner_tol,
        max_outer=args.max_outer,
        max_inner=args.max_inner,
    )
    manifest = _manifest(args, "estimate", args.rtilde, args.penalty, args.target, args.initial)
    report = solve_lpoc(r_tilde, penalty, config, initial=initial)
    est = report.estimate
    write_output(args.out, format_matrix_csv(est.values, est.labels), manifest)
    payload = report.to_json_dict()
    payload["lambda_eff"] = lambda_eff
    write_output(args.report, json.dumps(payload, indent=2, sort_keys=True) + "\n", manifest)
    if not report.converged:
        print("warning: solver did not converge", file=sys.stderr)
        return 2
    return 0


def cmd_select_lambda(args) -> int:
    r_tilde = read_matrix_csv(args.rtilde)
    penalty = read_penalty_csv(args.penalty)
    grid = _parse_grid(args.grid)
    manifest = _manifest(args, "select-lambda", args.rtilde, args.penalty)
    scan = select_lambda(
        r_tilde,
        penalty,
        grid,
        n_obs=args.n_obs,
        smoothing=args.smooth,
        span=args.span,
        warm_start=not args.cold_start,
    )
    write_output(args.out_json, json.dumps(scan.to_json_dict(), indent=2, sort_keys=True) + "\n",
                 manifest)
    write_output(args.out_csv, scan.to_csv(), manifest)
    if not args.no_figures:
        from .figures import lambda_scan_figure, save_figure

        fig_path = args.figure
        save_figure(lambda_scan_figure(scan), fig_path)
        manifest.outputs.append(os.path.basename(fig_path))
        manifest.finish()
        write_atomic(fig_path + ".manifest.json", manifest.to_json())
    print(f"chosen lambda: {scan.chosen_lambda:g}")
    return 0


def cmd_screen_covariates(args) -> int:
    r_tilde = read_matrix_csv(args.rtilde)
    table = read_covariate_csv(args.covariates, r_tilde.labels)
    manifest = _manifest(args, "screen-covariates", args.rtilde, args.covariates,
                         seed=args.seed)
    report = screen_covariates(
        r_tilde,
        table,
        n=args.n,
        threshold=args.threshold,
        null_method=args.null,
        mc_replications=args.mc_reps,
        mc_seed=args.seed,
    )
    write_output(args.out, json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
                 manifest)
    print("selected:", ", ".join(report.selected) if report.selected else "(none)")
    return 0


def cmd_build_penalty(args) -> int:
    if args.labels_from:
        labels = read_matrix_csv(args.labels_from).labels
    elif args.labels:
        labels = tuple(s.strip() for s in args.labels.split(",") if s.strip())
    else:
        raise ValidationError("provide --labels or --labels-from")
    table = read_covariate_csv(args.covariates, labels)
    selected = [s.strip() for s in args.select.split(",") if s.strip()]
    manifest = _manifest(args, "build-penalty", args.covariates, args.labels_from)
    penalty = build_penalty(table, selected)
    write_output(args.out, format_matrix_csv(penalty.values, labels), manifest)
    return 0


def cmd_simulate_study(args) -> int:
    if args.scenario:
        with open(args.scenario) as fh:
            scenario = SimScenario.from_dict(json.load(fh))
    else:
        scenario = default_scenario()
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        from dataclasses import replace

        scenario = replace(scenario, **overrides)
    manifest = _manifest(args, "simulate-study", args.scenario, seed=scenario.seed)
    report = run_study(scenario, workers=args.threads)
    out = lambda name: os.path.join(args.out_dir, name)  # noqa: E731
    write_output(out("study.json"),
                 json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", manifest)
    write_output(out("study_table.csv"), report.to_table_csv(), manifest)
    write_output(out("study_entries.csv"), report.to_entries_csv(), manifest)
    if not args.no_figures:
        from .figures import entry_distribution_figure, save_figure

        fig_path = out("study_distributions.png")
        save_figure(entry_distribution_figure(report), fig_path)
        manifest.outputs.append(os.path.basename(fig_path))
        manifest.finish()
        write_atomic(fig_path + ".manifest.json", manifest.to_json())
    agg = report.aggregate
    for name in ("lpoc", "pearson", "ledoit_wolf"):
        print(f"{name}: all-elements MAE {agg[f'{name}_all_mae']:.4f} "
              f"MSE {agg[f'{name}_all_mse']:.4f}")
    print(f"exact-zero fraction (penalized cells): {agg['lpoc_exact_zero_fraction_mean']:.3f}")
    return 0


def cmd_project(args) -> int:
    labels, params = read_params_csv(args.params)
    correlation = read_matrix_csv(args.correlation)
    if correlation.labels != labels:
        raise ValidationError("correlation labels do not match parameter labels")
    if args.last:
        last_labels, rows = _read_labelled_rows(args.last)
        if tuple(last_labels) != labels:
            raise ValidationError("last-value labels do not match parameter labels")
        g_last = np.array([r[-1] for r in rows])
        inputs = (args.params, args.correlation, args.last)
    else:
        panel = read_panel_csv(args.last_from_panel)
        if panel.labels != labels:
            raise ValidationError("panel labels do not match parameter labels")
        g_last = panel.values[:, -1]
        inputs = (args.params, args.correlation, args.last_from_panel)
    manifest = _manifest(args, "project", *inputs, seed=args.seed)
    ensemble = project(
        params,
        correlation,
        g_last,
        horizon=args.horizon,
        n_trajectories=args.trajectories,
        seed=args.seed,
        labels=labels,
    )
    # npz writing is not easily atomic through a text writer; write then sidecar.
    save_ensemble(ensemble, args.out, fmt=args.format)
    manifest.outputs.append(os.path.basename(args.out))
    manifest.finish()
    write_atomic(args.out + ".manifest.json", manifest.to_json())
    return 0


def cmd_evaluate_crps(args) -> int:
    ens_a = load_ensemble(args.ensemble_a)
    ens_b = load_ensemble(args.ensemble_b)
    weights = read_weights_csv(args.weights)
    labels, rows = _read_labelled_rows(args.observations)
    obs = np.array(rows)  # one row per series, one column per horizon period
    if tuple(labels) != ens_a.labels:
        raise ValidationError("observation labels do not match ensemble labels")
    if obs.shape[1] != ens_a.horizon:
        raise ValidationError(
            f"observations cover {obs.shape[1]} periods, ensembles {ens_a.horizon}"
        )
    names = tuple(s.strip() for s in args.names.split(","))
    if len(names) != 2:
        raise ValidationError("--names must hold two comma-separated names")
    manifest = _manifest(args, "evaluate-crps", args.ensemble_a, args.ensemble_b,
                         args.observations, args.weights)
    table = compare_models(ens_a, ens_b, obs.T, weights, mode=args.mode, names=names)
    write_output(args.out, table.to_csv(), manifest)
    print(table.to_csv(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lpoc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lpoc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-errors", help="fit per-series AR(1) models and "
                       "emit forecast errors plus the empirical correlation matrix")
    p.add_argument("--panel", required=True, help="series panel CSV (label,t1,...,tT)")
    p.add_argument("--on-constant", choices=("raise", "floor"), default="raise")
    p.add_argument("--out-errors", default="errors.csv")
    p.add_argument("--out-params", default="ar1_params.csv")
    p.add_argument("--out-rtilde-basic", default="rtilde_basic.csv")
    p.add_argument("--out-rtilde-pd", default="rtilde_pd.csv")
    p.set_defaults(func=cmd_fit_errors)

    p = sub.add_parser("estimate", help="penalized MAP correlation estimate")
    p.add_argument("--rtilde", required=True, help="empirical correlation matrix CSV")
    p.add_argument("--penalty", required=True, help="penalty matrix CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lambda-eff", type=float, dest="lambda_eff",
                       help="effective penalty coefficient")
    group.add_argument("--lam", type=float, help="pipeline lambda; divided by --n-obs")
    p.add_argument("--n-obs", type=int, help="error observations per series (T-1)")
    p.add_argument("--target", help="optional shrinkage-target matrix CSV")
    p.add_argument("--initial", help="optional warm-start matrix CSV")
    p.add_argument("--outer-tol", type=float, default=1e-7)
    p.add_argument("--inner-tol", type=float, default=1e-8)
    p.add_argument("--max-outer", type=int, default=100)
    p.add_argument("--max-inner", type=int, default=2000)
    p.add_argument("--out", default="estimate.csv")
    p.add_argument("--report", default="estimate_report.json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("select-lambda", help="scan a lambda grid with the "
                       "shrinkage-minus-inflation criterion")
    p.add_argument("--rtilde", required=True)
    p.add_argument("--penalty", required=True)
    p.add_argument("--n-obs", type=int, required=True)
    p.add_argument("--grid", default="0:0.1:3", help='"start:step:stop" or comma list')
    p.add_argument("--smooth", action="store_true", help="pick from the Lowess-smoothed curve")
    p.add_argument("--span", type=float, default=DEFAULT_SPAN)
    p.add_argument("--cold-start", action="store_true",
                   help="restart each solve from the empirical matrix")
    p.add_argument("--out-json", default="lambda_scan.json")
    p.add_argument("--out-csv", default="lambda_scan.csv")
    p.add_argument("--figure", default="lambda_scan.png")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_select_lambda)

    p = sub.add_parser("screen-covariates", help="KS-screen covariates against the "
                       "independent-errors null")
    p.add_argument("--rtilde", required=True)
    p.add_argument("--covariates", required=True, help="pair CSV: label_i,label_j,name,0/1")
    p.add_argument("--n", type=int, required=True, help="observations behind each correlation")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--null", choices=("analytic", "simulated"), default="analytic")
    p.add_argument("--mc-reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="screen_report.json")
    p.set_defaults(func=cmd_screen_covariates)

    p = sub.add_parser("build-penalty", help="penalty matrix from selected covariates")
    p.add_argument("--covariates", required=True)
    p.add_argument("--labels-from", help="matrix CSV supplying the label order")
    p.add_argument("--labels", help="comma-separated labels")
    p.add_argument("--select", required=True, help="comma-separated covariate names")
    p.add_argument("--out", default="penalty.csv")
    p.set_defaults(func=cmd_build_penalty)

    p = sub.add_parser("simulate-study", help="run the simulation study")
    p.add_argument("--scenario", help="scenario JSON (defaults to the block scenario)")
    p.add_argument("--replications", type=int, help="override scenario replications")
    p.add_argument("--seed", type=int, help="override scenario seed")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_simulate_study)

    p = sub.add_parser("project", help="correlated projection ensemble")
    p.add_argument("--params", required=True, help="AR(1) parameter CSV (label,mu,phi,sigma)")
    p.add_argument("--correlation", required=True, help="correlation matrix CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--last", help="CSV of last observed values (label,value)")
    group.add_argument("--last-from-panel", help="panel CSV; its final column seeds the recursion")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--trajectories", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("npz", "csv"), default="npz")
    p.add_argument("--out", default="ensemble.npz")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("evaluate-crps", help="per-region CRPS comparison of two ensembles")
    p.add_argument("--ensemble-a", required=True)
    p.add_argument("--ensemble-b", required=True)
    p.add_argument("--observations", required=True, help="CSV label,t1,...,tH of realized rates")
    p.add_argument("--weights", required=True, help="CSV region,label,period,weight")
    p.add_argument("--mode", choices=("rate", "count"), default="rate")
    p.add_argument("--names", default="model_a,model_b")
    p.add_argument("--out", default="crps.csv")
    p.set_defaults(func=cmd_evaluate_crps)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"lpoc: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"lpoc: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"lpoc: numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"lpoc: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
