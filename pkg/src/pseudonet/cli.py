"""Command-line front end.

Every subcommand accepts ``--config FILE`` (YAML or JSON mapping).  Command
line flags override config keys.  The merged configuration is validated in
one pass and every problem is reported together.

Exit codes: 0 success, 1 usage or validation error, 2 data error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import diagestim, modelselect, portfolio, screening, solver, synthlab
from .errors import ConvergenceWarning, DataError, NumericalError
from .symcore import center_columns, half_vectorize, read_data_csv, sample_covariance, write_matrix_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- config handling ----------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError([f"config file {p} does not exist"])
    try:
        data = yaml.safe_load(p.read_text())  # JSON is a subset of YAML
    except yaml.YAMLError as exc:
        raise UsageError([f"config file {p} is not valid YAML/JSON: {exc}"]) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError([f"config file {p} must hold a mapping at top level"])
    return data


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _nonneg_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _pos(v):
    return _num(v) and v > 0


def _nonneg(v):
    return _num(v) and v >= 0


def _num_list(pred):
    def check(v):
        return isinstance(v, (list, tuple)) and len(v) > 0 and all(pred(x) for x in v)
    return check


def _str(v):
    return isinstance(v, str) and v != ""


def _in(*choices):
    return lambda v: v in choices


def _bool(v):
    return isinstance(v, bool)


def _mapping(v):
    return isinstance(v, dict)


# key -> (check, description, default)
SOLVER_KEYS = {
    "epsilon": (_pos, "a positive number", 1e-8),
    "max_iter": (_pos_int, "a positive integer", 50_000),
    "tau_init": (_pos, "a positive number", 1.0),
    "beta": (lambda v: _num(v) and 0 < v < 1, "a number in (0, 1)", 0.5),
}
COMMON_KEYS = {
    "out_dir": (_str, "a directory path", "."),
    "jobs": (_pos_int, "a positive integer", 1),
    "seed": (_nonneg_int, "a nonnegative integer", 0),
    "tol_nnz": (_nonneg, "a nonnegative number", 0.0),
}
GRID_KEYS = {
    "grid": (lambda v: _str(v) or _mapping(v), "a grid file path or mapping", None),
    "lambda2_seq": (_num_list(_nonneg), "a list of nonnegative numbers", [1.0, 0.1]),
    "n_lambda1": (_pos_int, "a positive integer", 10),
    "lambda1_min_ratio": (lambda v: _num(v) and 0 < v <= 1, "a number in (0, 1]", 0.1),
}
SCHEMAS = {
    "estimate": {
        "data": (_str, "a CSV path", None),
        "lambda1": (_pos, "a positive number", None),
        "lambda2": (_nonneg, "a nonnegative number", 0.1),
        "trace": (_bool, "true or false", False),
        **SOLVER_KEYS,
        **COMMON_KEYS,
    },
    "path": {
        "data": (_str, "a CSV path", None),
        "screening": (_bool, "true or false", True),
        **GRID_KEYS,
        **SOLVER_KEYS,
        **COMMON_KEYS,
    },
    "select": {
        "data": (_str, "a CSV path", None),
        "folds": (_nonneg_int, "a nonnegative integer (0 or 1 = no cross-validation)", 0),
        "sign": (_in(*modelselect.SIGNS), f"one of {modelselect.SIGNS}", "verbatim"),
        **GRID_KEYS,
        **SOLVER_KEYS,
        **COMMON_KEYS,
    },
    "simulate": {
        "p": (lambda v: _pos_int(v) and v >= 2, "an integer >= 2", 100),
        "n_list": (_num_list(_pos_int), "a list of positive integers", [20]),
        "trials": (_pos_int, "a positive integer", 10),
        "sparsity": (lambda v: _num(v) and 0 < v < 1, "a number in (0, 1)", 0.01),
        "degree": (lambda v: v is None or _pos_int(v), "a positive integer or null", None),
        "lambda2_seq": (_num_list(_pos), "a list of positive numbers", [4.0, 1.0, 0.25, 0.0625]),
        "n_lambda1": (_pos_int, "a positive integer", 8),
        "lambda1_min_ratio": (lambda v: _num(v) and 0 < v <= 1, "a number in (0, 1]", 0.05),
        "methods": (_num_list(_in("pseudonet", "concord")), "a list drawn from pseudonet, concord", ["pseudonet", "concord"]),
        "record_wallclock": (_bool, "true or false", False),
        "epsilon": (_pos, "a positive number", 1e-6),
        "max_iter": (_pos_int, "a positive integer", 20_000),
        **COMMON_KEYS,
    },
    "diag": {
        "data": (_str, "a CSV path", None),
        "lambda1": (lambda v: v is None or _pos(v), "a positive number", None),
        **COMMON_KEYS,
    },
    "backtest": {
        "data": (_str, "a price CSV path", None),
        "horizon": (lambda v: _pos_int(v) and v >= 2, "an integer >= 2", None),
        "period_length": (_pos_int, "a positive integer", 20),
        "risk_free_rate": (_num, "a number", 0.05),
        "periods_per_year": (lambda v: v is None or _pos(v), "a positive number or null", None),
        "folds": (lambda v: _pos_int(v) and v >= 2, "an integer >= 2", 10),
        "strategy": (_in(*portfolio.STRATEGIES), f"one of {portfolio.STRATEGIES}", "pseudonet"),
        "cost_model": (lambda v: v is None or _mapping(v) or _str(v), "a mapping, 'default', 'none' or a file path", None),
        **GRID_KEYS,
        **SOLVER_KEYS,
        **COMMON_KEYS,
    },
}
# the backtest solves many small problems; a looser default tolerance keeps it practical
SCHEMAS["backtest"] = dict(SCHEMAS["backtest"])
SCHEMAS["backtest"]["epsilon"] = (_pos, "a positive number", 1e-6)
SCHEMAS["backtest"]["max_iter"] = (_pos_int, "a positive integer", 20_000)
SCHEMAS["backtest"]["n_lambda1"] = (_pos_int, "a positive integer", 8)
REQUIRED = {"estimate": ("data", "lambda1"), "path": ("data",), "select": ("data",), "diag": ("data",), "backtest": ("data", "horizon")}
INPUT_PATHS = ("data",)


def validate(command: str, config: dict) -> dict:
    """Merge defaults into ``config`` and check every key; raise with all problems."""
    schema = SCHEMAS[command]
    problems = []
    for key in config:
        if key not in schema:
            problems.append(f"unknown key {key!r} for command {command!r}")
    merged = {k: d for k, (_, _, d) in schema.items()}
    merged.update({k: v for k, v in config.items() if k in schema})
    required = REQUIRED.get(command, ())
    for key, (check, desc, default) in schema.items():
        v = merged[key]
        if v is None and key in required:
            problems.append(f"{key} is required")
        elif v is None and default is None:
            continue  # optional key left unset
        elif not check(v):
            problems.append(f"{key} must be {desc}, got {v!r}")
    for key in INPUT_PATHS:
        v = merged.get(key)
        if isinstance(v, str) and v and not Path(v).is_file():
            problems.append(f"input file {v!r} does not exist")
    if isinstance(merged.get("grid"), str) and not Path(merged["grid"]).is_file():
        problems.append(f"grid file {merged['grid']!r} does not exist")
    if command == "simulate" and not problems:
        try:
            _study_config(merged)
        except ValueError as exc:
            problems.append(str(exc))
    if problems:
        raise UsageError(problems)
    return merged


# -- helpers ------------------------------------------------------------------

def _options(cfg) -> solver.SolverOptions:
    return solver.SolverOptions(epsilon=cfg["epsilon"], tau_init=cfg["tau_init"], beta=cfg["beta"], max_iter=cfg["max_iter"])


def _out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_grid(cfg, S, n) -> screening.LambdaGrid:
    g = cfg.get("grid")
    if g is None:
        return screening.geometric_grid(S, n, cfg["lambda2_seq"], num=cfg["n_lambda1"], min_ratio=cfg["lambda1_min_ratio"])
    grid_cfg = load_config(g) if isinstance(g, str) else g
    problems = []
    if "lambda2_seq" not in grid_cfg:
        problems.append("grid needs lambda2_seq")
    if "lambda1_seq" in grid_cfg:
        try:
            return screening.LambdaGrid(tuple(grid_cfg["lambda1_seq"]), tuple(grid_cfg["lambda2_seq"]))
        except (TypeError, ValueError) as exc:
            problems.append(f"invalid grid: {exc}")
    elif not problems:
        try:
            return screening.geometric_grid(
                S, n, grid_cfg["lambda2_seq"], num=int(grid_cfg.get("n_lambda1", 10)), min_ratio=float(grid_cfg.get("lambda1_min_ratio", 0.1))
            )
        except (TypeError, ValueError) as exc:
            problems.append(f"invalid grid: {exc}")
    raise UsageError(problems)


def _vech_sidecar(path: Path, omega: np.ndarray, tol: float) -> None:
    """Support list: one row per nonzero off-diagonal pair ``i > j``."""
    p = omega.shape[0]
    cols, rows = np.triu_indices(p, k=1)
    vals = half_vectorize(omega)
    lines = ["i,j,value"]
    for i, j, v in zip(rows, cols, vals):
        if abs(v) > tol:
            lines.append(f"{i},{j},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n")


def _estimate_record(est: solver.Estimate, tol: float) -> dict:
    nnz = int(np.count_nonzero(np.abs(np.triu(est.omega, 1)) > tol))
    return {
        "lambda1": est.lambda1,
        "lambda2": est.lambda2,
        "iterations": est.iterations,
        "kkt_residual": est.kkt_residual,
        "objective": est.objective_value,
        "nnz": nnz,
        "converged": est.converged,
        "nonunique": est.nonunique,
    }


def _read_centered(path):
    X = read_data_csv(path)
    return center_columns(X)


# -- commands -----------------------------------------------------------------

def cmd_estimate(cfg) -> int:
    X = _read_centered(cfg["data"])
    S = sample_covariance(X)
    prob = solver.Problem(S, X.n, cfg["lambda1"], cfg["lambda2"])
    opts = _options(cfg)
    if cfg["trace"]:
        opts = solver.SolverOptions(opts.epsilon, opts.tau_init, opts.beta, opts.max_iter, record_trace=True)
    est = solver.solve(prob, opts)
    out = _out_dir(cfg)
    write_matrix_csv(out / "omega.csv", est.omega)
    _vech_sidecar(out / "omega_support.csv", est.omega, cfg["tol_nnz"])
    _write_json(out / "diagnostics.json", _estimate_record(est, cfg["tol_nnz"]))
    if cfg["trace"]:
        solver.write_trace_csv(out / "trace.csv", est)
    return EXIT_OK


def cmd_path(cfg) -> int:
    X = _read_centered(cfg["data"])
    S = sample_covariance(X)
    grid = _load_grid(cfg, S, X.n)
    res = screening.solve_path(S, X.n, grid, _options(cfg), screening=cfg["screening"], jobs=cfg["jobs"])
    out = _out_dir(cfg)
    screening.write_path_csv(out / "path.csv", res)
    est_dir = out / "estimates"
    est_dir.mkdir(exist_ok=True)
    for k, l, est in res.cells():
        write_matrix_csv(est_dir / f"omega_{k:03d}_{l:03d}.csv", est.omega)
    return EXIT_OK


def cmd_select(cfg) -> int:
    X = read_data_csv(cfg["data"])
    Xc = center_columns(X)
    grid = _load_grid(cfg, sample_covariance(Xc), Xc.n)
    if cfg["folds"] >= 2:
        sel = modelselect.kfold_cv_select(X, grid, cfg["folds"], _options(cfg), cfg["sign"], cfg["jobs"])
    else:
        sel = modelselect.select_by_bic(X, grid, _options(cfg), cfg["sign"], cfg["jobs"])
    out = _out_dir(cfg)
    modelselect.write_scores_csv(out / "scores.csv", sel)
    modelselect.write_selection_json(out / "selection.json", sel, sign=cfg["sign"], folds=cfg["folds"])
    write_matrix_csv(out / "omega.csv", sel.best_estimate.omega)
    _vech_sidecar(out / "omega_support.csv", sel.best_estimate.omega, cfg["tol_nnz"])
    return EXIT_OK


def _study_config(cfg) -> synthlab.StudyConfig:
    return synthlab.StudyConfig(
        p=cfg["p"],
        n_list=tuple(cfg["n_list"]),
        trials=cfg["trials"],
        seed=cfg["seed"],
        sparsity=cfg["sparsity"],
        degree=cfg["degree"],
        lambda2_seq=tuple(cfg["lambda2_seq"]),
        n_lambda1=cfg["n_lambda1"],
        lambda1_min_ratio=cfg["lambda1_min_ratio"],
        epsilon=cfg["epsilon"],
        max_iter=cfg["max_iter"],
        tol_nnz=cfg["tol_nnz"],
        methods=tuple(cfg["methods"]),
        record_wallclock=cfg["record_wallclock"],
    )


def cmd_simulate(cfg) -> int:
    study = _study_config(cfg)
    report = synthlab.run_simulation_study(study, jobs=cfg["jobs"])
    out = _out_dir(cfg)
    synthlab.write_study_csv(out / "study.csv", report)
    synthlab.write_summary_csv(out / "summary.csv", report)
    return EXIT_OK


def cmd_diag(cfg) -> int:
    X = read_data_csv(cfg["data"])
    est = diagestim.two_step_diagonal(X, cfg["lambda1"], jobs=cfg["jobs"])
    out = _out_dir(cfg)
    diagestim.write_diag_csv(out / "diag.csv", est)
    if est.zero_variance:
        print(f"warning: zero-variance columns {list(est.zero_variance)} excluded from neighborhoods", file=sys.stderr)
    return EXIT_OK


def _cost_model(v):
    if v is None or v == "none":
        return None
    if v == "default":
        return portfolio.CostModel()
    if isinstance(v, str):
        v = load_config(v)
    unknown = set(v) - {"borrow_apr", "txn_rate"}
    if unknown:
        raise UsageError([f"unknown cost model keys {sorted(unknown)}"])
    try:
        return portfolio.CostModel(**v)
    except (TypeError, ValueError) as exc:
        raise UsageError([f"invalid cost model: {exc}"]) from None


def cmd_backtest(cfg) -> int:
    prices = portfolio.read_price_csv(cfg["data"])
    grid = None
    if cfg.get("grid") is not None:
        grid_cfg = load_config(cfg["grid"]) if isinstance(cfg["grid"], str) else cfg["grid"]
        if "lambda1_seq" not in grid_cfg or "lambda2_seq" not in grid_cfg:
            raise UsageError(["a backtest grid file needs explicit lambda1_seq and lambda2_seq"])
        grid = screening.LambdaGrid(tuple(grid_cfg["lambda1_seq"]), tuple(grid_cfg["lambda2_seq"]))
    try:
        bc = portfolio.BacktestConfig(
            horizon=cfg["horizon"],
            period_length=cfg["period_length"],
            risk_free_rate=cfg["risk_free_rate"],
            grid=grid,
            cv_folds=cfg["folds"],
            cost_model=_cost_model(cfg["cost_model"]),
            periods_per_year=cfg["periods_per_year"],
            lambda2_seq=tuple(cfg["lambda2_seq"]),
            n_lambda1=cfg["n_lambda1"],
            lambda1_min_ratio=cfg["lambda1_min_ratio"],
            solver=_options(cfg),
        )
    except ValueError as exc:
        raise UsageError([str(exc)]) from None
    report = portfolio.run_backtest(prices, bc, cfg["strategy"])
    out = _out_dir(cfg)
    portfolio.write_report_csv(out / "report.csv", report)
    portfolio.write_summary_json(out / "summary.json", report, horizon=bc.horizon, period_length=bc.period_length)
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "path": cmd_path,
    "select": cmd_select,
    "simulate": cmd_simulate,
    "diag": cmd_diag,
    "backtest": cmd_backtest,
}


# -- argument parsing ---------------------------------------------------------

def _add_common(sp, data=True):
    if data:
        sp.add_argument("data", nargs="?", help="input CSV (may instead be given as 'data' in the config)")
    sp.add_argument("--config", help="YAML or JSON config file")
    sp.add_argument("--out-dir", dest="out_dir")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--tol-nnz", dest="tol_nnz", type=float)


def _add_solver(sp):
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--max-iter", dest="max_iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pseudonet", description="Sparse precision-matrix estimation with the PseudoNet estimator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("estimate", help="solve at one (lambda1, lambda2)")
    _add_common(sp)
    _add_solver(sp)
    sp.add_argument("--lambda1", type=float)
    sp.add_argument("--lambda2", type=float)
    sp.add_argument("--trace", action="store_true", default=None, help="also write the per-iteration trace")

    sp = sub.add_parser("path", help="solve over a (lambda1, lambda2) grid")
    _add_common(sp)
    _add_solver(sp)
    sp.add_argument("--grid", help="grid file (YAML/JSON)")
    sp.add_argument("--no-screening", dest="screening", action="store_false", default=None)

    sp = sub.add_parser("select", help="pick (lambda1, lambda2) by the BIC-like score")
    _add_common(sp)
    _add_solver(sp)
    sp.add_argument("--grid")
    sp.add_argument("--folds", type=int, help="contiguous CV folds (0 = score on the full data)")
    sp.add_argument("--sign", choices=modelselect.SIGNS)

    sp = sub.add_parser("simulate", help="synthetic support-recovery study")
    _add_common(sp, data=False)
    _add_solver(sp)

    sp = sub.add_parser("diag", help="two-step diagonal estimate")
    _add_common(sp)
    sp.add_argument("--lambda1", type=float, help="lasso penalty (default 0.5 sqrt(log p / n))")

    sp = sub.add_parser("backtest", help="minimum-variance portfolio backtest")
    _add_common(sp)
    _add_solver(sp)
    sp.add_argument("--grid")
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--folds", type=int)
    sp.add_argument("--strategy", choices=portfolio.STRATEGIES)
    sp.add_argument("--cost-model", dest="cost_model", help="'default', 'none', or a YAML/JSON file with borrow_apr and txn_rate")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    try:
        cfg = validate(args.command, {**load_config(args.config), **flags})
        with warnings.catch_warnings():
            warnings.simplefilter("always", ConvergenceWarning)
            return COMMANDS[args.command](cfg)
    except UsageError as exc:
        for msg in exc.problems:
            print(f"pseudonet {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"pseudonet {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"pseudonet {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
