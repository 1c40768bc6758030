"""Command-line interface: simulate, estimate, experiment, bias-study,
lambda-min-study.

Exit codes are a stable scripting contract: 0 success, 2 usage/validation or
I/O failure, 3 numerical failure, 4 every fit in some experiment cell failed.
All emitted CSV files carry a header row and '.' decimals and round-trip
through :func:`read_csv`.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .cva import aic_order, cva_fit, default_aic_pmax
from .errors import EstimationError, NumericalError
from .likelihood import ObjectiveConfig, optimize
from .montecarlo import ExperimentConfig, McResult, run_experiment, simulate_dgp
from .oracle import bias_curve, lambda_min_gamma
from .statespace import StateSpaceModel, covariance_sequence, load_model, save_model


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return value


def read_csv(path):
    """Read one of this package's CSV files: (header, float-matrix rows)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_maybe_float(v) for v in row] for row in reader]
    return header, rows


def _maybe_float(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def load_series(path) -> np.ndarray:
    """Load a T x s data CSV; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"data file {path} is empty")
    start = 0
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        start = 1
    data = np.array([[float(v) for v in row] for row in rows[start:]])
    if data.size == 0:
        raise ValueError(f"data file {path} contains no numeric rows")
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvaid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a model to a data CSV")
    sim.add_argument("--model", required=True, help="model JSON file")
    sim.add_argument("--t", required=True, type=int, help="sample size T")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--burn-in", type=int, default=1000)
    sim.add_argument("--output", required=True, help="output CSV path")

    est = sub.add_parser("estimate", help="fit a state-space model to a data CSV")
    est.add_argument("--input", required=True, help="T x s data CSV (header optional)")
    est.add_argument("--method", choices=["cva", "qmle", "pem"], default="cva")
    est.add_argument("--f", type=int, default=None, help="future window length")
    est.add_argument("--p", type=int, default=None, help="past window length")
    est.add_argument("--n", required=True, type=int, help="system order")
    est.add_argument("--auto-order", action="store_true",
                     help="choose f = p = max(2 k_AIC, n) from the data")
    est.add_argument("--output", required=True, help="output model JSON path")
    est.add_argument("--singular-values", default=None,
                     help="singular values CSV (default: <output>.singular_values.csv)")
    est.add_argument("--diagnostics", default=None,
                     help="optimizer diagnostics JSON for qmle/pem (default: <output>.diagnostics.json)")
    est.add_argument("--max-iters", type=int, default=200)
    est.add_argument("--barrier-radius", type=float, default=0.99)

    exp = sub.add_parser("experiment", help="run a Monte Carlo estimator comparison")
    exp.add_argument("--config", required=True, help="experiment config JSON")
    exp.add_argument("--output-dir", required=True)
    exp.add_argument("--threads", type=int, default=1)

    bias = sub.add_parser("bias-study", help="finite-horizon pseudo-true system deviations")
    bias.add_argument("--model", required=True)
    bias.add_argument("--p-min", required=True, type=int)
    bias.add_argument("--p-max", required=True, type=int)
    bias.add_argument("--output", required=True)

    lmin = sub.add_parser("lambda-min-study", help="smallest eigenvalue of the stacked-past covariance")
    lmin.add_argument("--model", required=True)
    lmin.add_argument("--p-max", required=True, type=int)
    lmin.add_argument("--output", required=True)

    return parser


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    if args.t < 1:
        raise ValueError(f"--t must be >= 1, got {args.t}")
    if args.burn_in < 0:
        raise ValueError(f"--burn-in must be >= 0, got {args.burn_in}")
    data = simulate_dgp(model, args.t, args.burn_in, args.seed)
    _write_csv(args.output, [f"y{i + 1}" for i in range(model.s)], data.tolist())
    return 0


def cmd_estimate(args) -> int:
    data = load_series(args.input)
    t_len = data.shape[0]
    if args.auto_order:
        k_aic = aic_order(data, default_aic_pmax(t_len))
        f = p = max(2 * k_aic, args.n)
    else:
        if args.f is None or args.p is None:
            raise ValueError("provide --f and --p, or pass --auto-order")
        f, p = args.f, args.p
    est = cva_fit(data, f, p, args.n)

    sv_path = args.singular_values or f"{args.output}.singular_values.csv"
    _write_csv(sv_path, ["index", "singular_value"],
               [(i + 1, float(v)) for i, v in enumerate(est.singular_values)])

    if args.method == "cva":
        save_model(est.to_model(), args.output)
        return 0

    config = ObjectiveConfig(kind=args.method, barrier_radius=args.barrier_radius,
                             max_iters=args.max_iters)
    from .montecarlo import _stable_init_model

    result = optimize(data, _stable_init_model(est), config)
    save_model(result.model, args.output)
    diag_path = args.diagnostics or f"{args.output}.diagnostics.json"
    Path(diag_path).write_text(json.dumps({
        "method": args.method,
        "converged": result.converged,
        "iterations": result.iterations,
        "objective": result.objective,
        "shrink_kappa": result.shrink_kappa,
        "n_evals": result.n_evals,
        "message": result.message,
        "f": f,
        "p": p,
    }, indent=2) + "\n")
    return 0


def _model_from_doc(doc) -> StateSpaceModel:
    for key in ("A", "B", "C", "omega"):
        if key not in doc:
            raise ValueError(f"inline model is missing field '{key}'")
    return StateSpaceModel(doc["A"], doc["B"], doc["C"], doc["omega"])


def parse_experiment_config(doc) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed config JSON document.

    ``dgp`` is either an inline model object with fields A, B, C, omega, or
    an object {"base": <model>, "m_c": [[...]]} differenced before use.
    """
    if not isinstance(doc, dict):
        raise ValueError("experiment config must be a JSON object")
    required = ("dgp", "order", "t_values", "m_reps")
    for key in required:
        if key not in doc:
            raise ValueError(f"experiment config is missing field '{key}'")
    dgp_doc = doc["dgp"]
    if not isinstance(dgp_doc, dict):
        raise ValueError("'dgp' must be an object")
    if "base" in dgp_doc:
        from .statespace import OverdiffSpec

        dgp = OverdiffSpec(_model_from_doc(dgp_doc["base"]), np.asarray(dgp_doc["m_c"], dtype=float))
    else:
        dgp = _model_from_doc(dgp_doc)
    return ExperimentConfig(
        dgp=dgp,
        order=int(doc["order"]),
        t_values=tuple(int(t) for t in doc["t_values"]),
        m_reps=int(doc["m_reps"]),
        estimators=tuple(doc.get("estimators", ["cva"])),
        ir_horizon=int(doc.get("ir_horizon", 10)),
        burn_in=int(doc.get("burn_in", 1000)),
        base_seed=int(doc.get("base_seed", 20240101)),
    )


def write_experiment_outputs(result: McResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mse_rows = [
        (est, t, result.mse[(est, t)].mse_times_t, result.mse[(est, t)].n_ok, result.mse[(est, t)].n_fail)
        for est in result.config.estimators
        for t in result.config.t_values
    ]
    _write_csv(out / "mse.csv", ["estimator", "T", "mse_times_T", "n_ok", "n_fail"], mse_rows)

    rep_rows = [
        (r.estimator, r.t, r.rep, r.seed, int(r.ok), int(r.converged), r.k_aic, r.f, r.p,
         r.trace_abar, (r.impulse[0][0, 0] if r.impulse is not None else np.nan),
         r.ir_sq_err, r.wall_time, r.error)
        for r in result.records
    ]
    _write_csv(
        out / "reps.csv",
        ["estimator", "T", "rep", "seed", "ok", "converged", "k_aic", "f", "p",
         "trace_abar", "k1_11", "ir_sq_err", "wall_time_s", "error"],
        rep_rows,
    )

    for name, (grid, values) in result.densities.items():
        _write_csv(out / f"density_{name}.csv", ["grid", "density"],
                   list(zip(grid.tolist(), values.tolist())))


def print_experiment_summary(result: McResult, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"{'estimator':>9} {'T':>6} {'MSE x T':>12} {'ok':>5} {'fail':>5}", file=stream)
    for est in result.config.estimators:
        for t in result.config.t_values:
            cell = result.mse[(est, t)]
            print(f"{est:>9} {t:>6} {cell.mse_times_t:>12.5g} {cell.n_ok:>5} {cell.n_fail:>5}",
                  file=stream)


def cmd_experiment(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    config = parse_experiment_config(doc)
    if args.threads < 1:
        raise ValueError(f"--threads must be >= 1, got {args.threads}")
    result = run_experiment(config, threads=args.threads)
    write_experiment_outputs(result, args.output_dir)
    print_experiment_summary(result)
    if any(cell.n_ok == 0 for cell in result.mse.values()):
        print("error: at least one (estimator, T) cell had no successful fit", file=sys.stderr)
        return 4
    return 0


def cmd_bias_study(args) -> int:
    if args.p_min > args.p_max:
        raise ValueError(f"--p-min ({args.p_min}) exceeds --p-max ({args.p_max})")
    model = load_model(args.model)
    rows = bias_curve(model, range(args.p_min, args.p_max + 1))
    _write_csv(args.output,
               ["p", "biasA", "biasB", "biasC", "p2_biasA", "p_biasB", "p_biasC"],
               rows)
    return 0


def cmd_lambda_min_study(args) -> int:
    if args.p_max < 1:
        raise ValueError(f"--p-max must be >= 1, got {args.p_max}")
    model = load_model(args.model)
    cov = covariance_sequence(model, args.p_max - 1)
    rows = []
    for p in range(1, args.p_max + 1):
        lam = lambda_min_gamma(cov, p)
        rows.append((p, lam, p * p * lam))
    _write_csv(args.output, ["p", "lambda_min", "p2_lambda_min"], rows)
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "experiment": cmd_experiment,
    "bias-study": cmd_bias_study,
    "lambda-min-study": cmd_lambda_min_study,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, EstimationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
