"""Command line entry points.

Subcommands: simulate, fit, cv, bench, metrics. Every subcommand takes
--out DIR and leaves a manifest.json there recording the invocation, input
digests, and output digests.

Exit codes: 0 success, 2 usage errors, 3 data or validation errors,
4 numeric failures (non-finite results, or a benchmark with too many failed
replications).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .baselines import fit_plasso
from .bench import BenchmarkError, run_benchmark, write_benchmark_csvs
from .data import (
    DataError,
    Dataset,
    GroupSpec,
    load_dataset_csv,
    load_groups_json,
    save_groups_json,
    singleton_groups,
    standardize,
)
from .metrics import (
    DUMMY_MODES,
    SELECTION_TOL,
    SelectionTruth,
    percent_selected,
    variable_confusion,
)
from .model import (
    WEIGHT_MODES,
    CoefficientSet,
    FitConfig,
    unstandardize_coef,
)
from .simulate import generate
from .solver import fit_svreg
from .tuning import METHODS, coarse_grid, cross_validate, default_grid, fit_path

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_FMT = "{:.17g}"


def _fmt(v: float) -> str:
    return _FMT.format(float(v))


# ---------------------------------------------------------------------------
# small file helpers
# ---------------------------------------------------------------------------

def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_matrix_csv(path: str, names, M: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in M:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: str, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: str, command: str, params: dict, inputs, outputs) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)


def _params_from(args: argparse.Namespace, skip=("func", "config")) -> dict:
    out = {}
    for key, val in sorted(vars(args).items()):
        if key in skip:
            continue
        out[key] = val if isinstance(val, (int, float, str, bool, type(None))) else str(val)
    return out


# ---------------------------------------------------------------------------
# coefficient interchange
# ---------------------------------------------------------------------------

def write_coefficients_csv(path: str, coef: CoefficientSet, x_names, z_names) -> None:
    """Long-format coefficient table with 1-based indices."""
    p, k = coef.theta.shape
    with open(path, "w", newline="") as fh:
        fh.write("term,x_index,z_index,x_name,z_name,value\n")
        fh.write(f"beta0,,,,,{_fmt(coef.beta0)}\n")
        for kk in range(k):
            fh.write(f"theta0,,{kk + 1},,{z_names[kk]},{_fmt(coef.theta0[kk])}\n")
        for j in range(p):
            fh.write(f"beta,{j + 1},,{x_names[j]},,{_fmt(coef.beta[j])}\n")
        for j in range(p):
            for kk in range(k):
                fh.write(
                    f"theta,{j + 1},{kk + 1},{x_names[j]},{z_names[kk]},"
                    f"{_fmt(coef.theta[j, kk])}\n"
                )


def read_coefficients_csv(path: str) -> CoefficientSet:
    import csv as _csv

    beta0 = 0.0
    theta0: dict[int, float] = {}
    beta: dict[int, float] = {}
    theta: dict[tuple[int, int], float] = {}
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        needed = {"term", "x_index", "z_index", "value"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise DataError(f"{path}: missing columns {sorted(needed)}")
        for row in reader:
            term = row["term"]
            val = float(row["value"])
            if term == "beta0":
                beta0 = val
            elif term == "theta0":
                theta0[int(row["z_index"]) - 1] = val
            elif term == "beta":
                beta[int(row["x_index"]) - 1] = val
            elif term == "theta":
                theta[(int(row["x_index"]) - 1, int(row["z_index"]) - 1)] = val
            else:
                raise DataError(f"{path}: unknown term {term!r}")
    p = 1 + max(beta) if beta else 0
    k = 1 + max(theta0) if theta0 else 0
    if p == 0:
        raise DataError(f"{path}: no beta rows")
    th = np.zeros((p, k))
    for (j, kk), val in theta.items():
        th[j, kk] = val
    b = np.zeros(p)
    for j, val in beta.items():
        b[j] = val
    t0 = np.zeros(k)
    for kk, val in theta0.items():
        t0[kk] = val
    return CoefficientSet(beta0=beta0, theta0=t0, beta=b, theta=th)


# ---------------------------------------------------------------------------
# shared option plumbing
# ---------------------------------------------------------------------------

def _parse_setting(text: str) -> int:
    t = text.strip().lower()
    if t in ("1", "2", "3"):
        return int(t)
    if len(t) == 2 and t[0] == "s" and t[1] in "123":
        return int(t[1])
    raise argparse.ArgumentTypeError(
        f"invalid setting {text!r} (expected 1, 2, 3 or s1, s2, s3)"
    )


def _add_data_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--x", help="predictor matrix CSV (header row)")
    sp.add_argument("--z", help="modifier matrix CSV; omit for none")
    sp.add_argument("--y", help="response CSV, one column")
    sp.add_argument("--groups", help="group spec JSON (1-based indices)")
    sp.add_argument(
        "--singleton-groups",
        action="store_true",
        help="each predictor its own group, all modifiers one group",
    )
    sp.add_argument(
        "--dummy-z",
        help="comma-separated 1-based Z columns to leave unstandardized; "
        "default: auto-detect 0/1 columns",
    )
    sp.add_argument(
        "--no-standardize",
        action="store_true",
        help="fit on the data as given",
    )


def _add_penalty_args(sp: argparse.ArgumentParser, with_lam: bool) -> None:
    if with_lam:
        sp.add_argument("--lam", type=float, help="penalty level (required)")
    sp.add_argument("--alpha", type=float, default=0.5, help="L1 share in (0,1)")
    sp.add_argument(
        "--weight-mode",
        choices=WEIGHT_MODES,
        default="consistent",
        help="modifier-group weights",
    )
    sp.add_argument(
        "--unit-weights",
        action="store_true",
        help="shorthand for --weight-mode unit",
    )
    sp.add_argument("--tol", type=float, default=1e-5, help="outer convergence tolerance")
    sp.add_argument("--max-iter", type=int, default=1000, help="max outer sweeps")


def _add_grid_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument(
        "--grid-coarse",
        action="store_true",
        help="60-point geometric penalty grid instead of the 1000-point default",
    )
    sp.add_argument("--grid-start", type=float, default=10.0)
    sp.add_argument("--grid-stop", type=float, default=0.01)
    sp.add_argument("--grid-step", type=float, default=0.01)


def _resolve_weight_mode(args, parser: argparse.ArgumentParser) -> str:
    if args.unit_weights:
        if args.weight_mode not in ("consistent", "unit"):
            parser.error("--unit-weights conflicts with --weight-mode "
                         f"{args.weight_mode}")
        return "unit"
    return args.weight_mode


def _resolve_grid(args) -> np.ndarray:
    if args.grid_coarse:
        return coarse_grid()
    return default_grid(args.grid_start, args.grid_stop, args.grid_step)


def _load_data(args, parser) -> Dataset:
    for field in ("x", "y"):
        if getattr(args, field) is None:
            parser.error(f"--{field} is required")
    return load_dataset_csv(args.x, args.z, args.y)


def _resolve_groups(args, d: Dataset, parser) -> GroupSpec:
    if args.groups:
        return load_groups_json(args.groups, d.p, d.k)
    if args.method == "svreg" and not args.singleton_groups:
        parser.error(
            "grouped fitting needs a group layout: provide --groups "
            "GROUPS.json or pass --singleton-groups"
        )
    return singleton_groups(d.p, d.k, single_modifier_group=True)


def _resolve_dummies(args, d: Dataset) -> frozenset[int]:
    if args.dummy_z is None:
        return d.detect_dummies()
    cols = frozenset(int(v) - 1 for v in args.dummy_z.split(",") if v.strip())
    for c in cols:
        if not 0 <= c < d.k:
            raise DataError(f"--dummy-z column {c + 1} out of range 1..{d.k}")
    return cols


def _input_paths(args) -> list[str]:
    return [
        p
        for p in (getattr(args, n, None) for n in ("x", "z", "y", "groups", "coef", "truth"))
        if p
    ]


def _check_finite(coef: CoefficientSet) -> None:
    vals = np.concatenate(
        [[coef.beta0], coef.theta0, coef.beta, coef.theta.ravel()]
    )
    if not np.all(np.isfinite(vals)):
        raise ArithmeticError("fit produced non-finite coefficients")


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_simulate(args, parser) -> int:
    if args.seed is None:
        parser.error("--seed is required")
    os.makedirs(args.out, exist_ok=True)
    sim = generate(args.setting, n=args.n, seed=args.seed)
    d = sim.dataset
    paths = []

    px = os.path.join(args.out, "X.csv")
    _write_matrix_csv(px, d.x_names, d.X)
    pz = os.path.join(args.out, "Z.csv")
    _write_matrix_csv(pz, d.z_names, d.Z)
    py = os.path.join(args.out, "y.csv")
    _write_matrix_csv(py, ("y",), d.y[:, None])
    paths += [px, pz, py]

    pg = os.path.join(args.out, "groups.json")
    save_groups_json(sim.groups, pg)
    paths.append(pg)

    pt = os.path.join(args.out, "truth.json")
    _write_json(
        pt,
        {
            "main": [j + 1 for j in sim.truth.main_idx],
            "interactions": [[j + 1, kk + 1] for j, kk in sim.truth.interaction_idx],
            "z_continuous": [kk + 1 for kk in sim.z_continuous],
            "z_dummy_groups": [[kk + 1 for kk in g] for g in sim.z_dummy_groups],
        },
    )
    paths.append(pt)

    pm = os.path.join(args.out, "meta.json")
    meta = dict(sim.meta)
    meta["seed"] = args.seed
    meta["version"] = __version__
    _write_json(pm, meta)
    paths.append(pm)

    _write_manifest(args.out, "simulate", _params_from(args), [], paths)
    return EXIT_OK


def _fit_one(d, groups, method, cfg):
    if method == "plasso":
        return fit_plasso(d, cfg)
    return fit_svreg(d, groups, cfg)


def _cmd_fit(args, parser) -> int:
    if args.lam is None:
        parser.error("--lam is required")
    weight_mode = _resolve_weight_mode(args, parser)
    d = _load_data(args, parser)
    groups = _resolve_groups(args, d, parser)
    cfg = FitConfig(
        lam=args.lam,
        alpha=args.alpha,
        weight_mode=weight_mode,
        tol=args.tol,
        max_outer_iter=args.max_iter,
    )
    rec = None
    fit_d = d
    if not args.no_standardize:
        fit_d, rec = standardize(d, _resolve_dummies(args, d))
    result = _fit_one(fit_d, groups, args.method, cfg)
    _check_finite(result.coef)
    coef_out = result.coef if rec is None else unstandardize_coef(result.coef, rec)

    os.makedirs(args.out, exist_ok=True)
    written = []
    pc = os.path.join(args.out, "coefficients.csv")
    write_coefficients_csv(pc, coef_out, d.x_names, d.z_names)
    written.append(pc)
    if rec is not None:
        ps = os.path.join(args.out, "coefficients_standardized.csv")
        write_coefficients_csv(ps, result.coef, d.x_names, d.z_names)
        written.append(ps)
    mains = np.flatnonzero(np.abs(coef_out.beta) > SELECTION_TOL)
    inter = np.argwhere(np.abs(coef_out.theta) > SELECTION_TOL)
    pf = os.path.join(args.out, "fit.json")
    _write_json(
        pf,
        {
            "method": args.method,
            "lam": args.lam,
            "alpha": args.alpha,
            "weight_mode": weight_mode,
            "standardized": not args.no_standardize,
            "objective": result.objective,
            "objective_trace": list(result.objective_trace),
            "n_iter": result.n_iter,
            "converged": result.converged,
            "active_mains": [int(j) + 1 for j in mains],
            "active_interactions": [[int(j) + 1, int(kk) + 1] for j, kk in inter],
        },
    )
    written.append(pf)
    if not result.converged:
        print(
            f"warning: not converged in {result.n_iter} sweeps", file=sys.stderr
        )
    _write_manifest(args.out, "fit", _params_from(args), _input_paths(args), written)
    return EXIT_OK


def _cmd_cv(args, parser) -> int:
    if args.seed is None:
        parser.error("--seed is required")
    if args.folds < 2:
        parser.error("--folds/--v must be at least 2")
    weight_mode = _resolve_weight_mode(args, parser)
    d = _load_data(args, parser)
    groups = _resolve_groups(args, d, parser)
    grid = _resolve_grid(args)
    cfg = FitConfig(
        alpha=args.alpha,
        weight_mode=weight_mode,
        tol=args.tol,
        max_outer_iter=args.max_iter,
    )
    dummies = _resolve_dummies(args, d)
    cv = cross_validate(
        d,
        grid,
        method=args.method,
        groups=groups,
        config=cfg,
        n_folds=args.folds,
        seed=args.seed,
        dummy_columns=dummies,
    )
    full_std, rec = standardize(d, dummies)
    path = fit_path(full_std, grid, args.method, groups=groups, config=cfg)
    best_coef = path.coefs[cv.best_index]
    _check_finite(best_coef)

    os.makedirs(args.out, exist_ok=True)
    pcv = os.path.join(args.out, "cv.csv")
    with open(pcv, "w", newline="") as fh:
        fh.write("lambda,mean_mse,se_mse\n")
        for lam, m, s in zip(cv.lambdas, cv.mean_mse, cv.se_mse):
            fh.write(f"{_fmt(lam)},{_fmt(m)},{_fmt(s)}\n")
    pj = os.path.join(args.out, "cv.json")
    _write_json(
        pj,
        {
            "method": args.method,
            "lambdas": [float(v) for v in cv.lambdas],
            "mean_mse": [float(v) for v in cv.mean_mse],
            "se_mse": [float(v) for v in cv.se_mse],
            "fold_mse": [[float(v) for v in row] for row in cv.fold_mse],
            "fold_sizes": [int(v) for v in cv.fold_sizes],
            "best_lambda": cv.best_lambda,
            "best_index": cv.best_index + 1,
            "best_mse": cv.best_mse,
            "folds": args.folds,
            "seed": args.seed,
        },
    )
    pc = os.path.join(args.out, "coefficients.csv")
    write_coefficients_csv(
        pc, unstandardize_coef(best_coef, rec), d.x_names, d.z_names
    )
    _write_manifest(
        args.out, "cv", _params_from(args), _input_paths(args), [pcv, pj, pc]
    )
    return EXIT_OK


def _cmd_bench(args, parser) -> int:
    if args.seed is None:
        parser.error("--seed is required")
    weight_mode = _resolve_weight_mode(args, parser)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            parser.error(f"unknown method {m!r} in --methods")
    grid = _resolve_grid(args)
    result = run_benchmark(
        setting=args.setting,
        n_reps=args.reps,
        seed=args.seed,
        methods=methods,
        lambdas=grid,
        alpha=args.alpha,
        n_folds=args.folds,
        weight_mode=weight_mode,
        dummy_mode=args.dummy_mode,
        roc_reps=args.roc_reps,
        jobs=args.jobs,
        rep_n=args.n,
    )
    written = write_benchmark_csvs(result, args.out)
    if result.failures:
        print(
            f"warning: {len(result.failures)} replication fits failed",
            file=sys.stderr,
        )
    params = _params_from(args)
    params["failures"] = len(result.failures)
    _write_manifest(args.out, "bench", params, [], written)
    return EXIT_OK


def _cmd_metrics(args, parser) -> int:
    for field in ("coef", "truth"):
        if getattr(args, field) is None:
            parser.error(f"--{field} is required")
    coef = read_coefficients_csv(args.coef)
    with open(args.truth) as fh:
        raw = json.load(fh)
    try:
        truth = SelectionTruth(
            main_idx=tuple(int(j) - 1 for j in raw["main"]),
            interaction_idx=tuple(
                (int(j) - 1, int(kk) - 1) for j, kk in raw["interactions"]
            ),
        )
        z_cont = tuple(int(kk) - 1 for kk in raw.get("z_continuous", []))
        z_dgroups = tuple(
            tuple(int(kk) - 1 for kk in g) for g in raw.get("z_dummy_groups", [])
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{args.truth}: malformed truth file ({e})") from None
    cc = variable_confusion(coef, truth, z_dgroups, args.dummy_mode, args.tol)
    pct = percent_selected(coef, truth, z_cont, z_dgroups, args.tol)

    os.makedirs(args.out, exist_ok=True)
    pm = os.path.join(args.out, "metrics.json")
    _write_json(
        pm,
        {
            "counts": {"tp": cc.tp, "fp": cc.fp, "tn": cc.tn, "fn": cc.fn},
            "fdr": cc.fdr,
            "sensitivity": cc.sensitivity,
            "specificity": cc.specificity,
            "geo_mean": cc.geo_mean,
            "percent_selected": pct,
            "dummy_mode": args.dummy_mode,
            "tol": args.tol,
        },
    )
    _write_manifest(args.out, "metrics", _params_from(args), _input_paths(args), [pm])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="svcreg",
        description="Sparse varying-coefficient regression with grouped penalties.",
    )
    parser.add_argument("--version", action="version", version=f"svcreg {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    table: dict[str, argparse.ArgumentParser] = {}

    def new(name: str, help_: str) -> argparse.ArgumentParser:
        sp = subs.add_parser(name, help=help_)
        sp.add_argument("--out", required=False, help="output directory (required)")
        sp.add_argument("--config", help="JSON file of option defaults")
        table[name] = sp
        return sp

    sp = new("simulate", "write one simulated dataset")
    sp.add_argument("--setting", type=_parse_setting, required=True)
    sp.add_argument("--n", type=int, default=None, help="rows (default: the setting's)")
    sp.add_argument("--seed", type=int, default=None, help="RNG seed (required)")
    sp.set_defaults(func=_cmd_simulate)

    sp = new("fit", "fit at one penalty level")
    _add_data_args(sp)
    _add_penalty_args(sp, with_lam=True)
    sp.add_argument("--method", choices=("svreg", "plasso"), default="svreg")
    sp.set_defaults(func=_cmd_fit)

    sp = new("cv", "pick the penalty by K-fold cross-validation and refit")
    _add_data_args(sp)
    _add_penalty_args(sp, with_lam=False)
    _add_grid_args(sp)
    sp.add_argument("--method", choices=METHODS, default="svreg")
    sp.add_argument("--folds", "--v", type=int, default=10, dest="folds")
    sp.add_argument("--seed", type=int, default=None, help="fold shuffling seed (required)")
    sp.set_defaults(func=_cmd_cv)

    sp = new("bench", "replicated simulation benchmark")
    sp.add_argument("--setting", type=_parse_setting, required=True)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--seed", type=int, default=None, help="base seed (required)")
    sp.add_argument("--n", type=int, default=None, help="rows per dataset")
    sp.add_argument(
        "--methods", default="lasso,plasso,svreg", help="comma-separated subset"
    )
    _add_penalty_args(sp, with_lam=False)
    _add_grid_args(sp)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--dummy-mode", choices=DUMMY_MODES, default="grouped")
    sp.add_argument("--roc-reps", type=int, default=20)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.set_defaults(func=_cmd_bench)

    sp = new("metrics", "score a coefficient file against a truth file")
    sp.add_argument("--coef", help="coefficients.csv from fit/cv")
    sp.add_argument("--truth", help="truth.json from simulate")
    sp.add_argument("--dummy-mode", choices=DUMMY_MODES, default="grouped")
    sp.add_argument("--tol", type=float, default=SELECTION_TOL)
    sp.set_defaults(func=_cmd_metrics)

    return parser, table


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, table = build_parser()
    args, _ = parser.parse_known_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    sub = table[args.command]
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            print(f"error: --config: {e}", file=sys.stderr)
            return EXIT_DATA
        known = {a.dest for a in sub._actions}
        bad = set(overrides) - known
        if bad:
            sub.error(f"unknown config keys: {sorted(bad)}")
        sub.set_defaults(**overrides)
    args = parser.parse_args(argv)
    if not getattr(args, "out", None):
        sub.error("--out is required")

    try:
        return args.func(args, sub)
    except BenchmarkError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
