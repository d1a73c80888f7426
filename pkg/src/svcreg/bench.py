"""Replicated benchmark runs: simulate, cross-validate, refit, score.

One replication of one method is: generate a dataset, pick the penalty by
K-fold cross-validation on the raw data, standardize the full data, fit the
whole penalty path once (the path provides both the refit at the chosen
penalty and the selection path for ROC summaries), then score the selection
against the generating truth.

Replications are seeded through numpy SeedSequence spawning, so results are
bit-reproducible for a given base seed regardless of worker count.
"""
from __future__ import annotations

import multiprocessing
from dataclasses import dataclass

import numpy as np

from .data import standardize
from .metrics import (
    PERCENT_CATEGORIES,
    percent_selected,
    roc_points,
    staircase_fpr,
    variable_confusion,
)
from .model import FitConfig
from .simulate import generate
from .tuning import METHODS, coarse_grid, cross_validate, fit_path

__all__ = [
    "BenchmarkError",
    "BenchmarkResult",
    "run_benchmark",
    "write_benchmark_csvs",
    "TPR_GRID",
]

TPR_GRID = np.round(np.linspace(0.0, 1.0, 101), 2)

_SUMMARY_METRICS = ("fdr", "sensitivity", "specificity", "geo_mean", "cv_mse")


class BenchmarkError(RuntimeError):
    """Raised when too many replications fail to report honest summaries."""


@dataclass(frozen=True)
class BenchmarkResult:
    setting: int
    n_reps: int
    seed: int
    methods: tuple[str, ...]
    lambdas: np.ndarray
    categories: tuple[str, ...]
    # per method: metric name -> per-rep values (NaN where the rep failed)
    metrics: dict
    # per method: category -> per-rep fractions
    percents: dict
    # per method: averaged staircase FPR on TPR_GRID (roc reps only)
    roc_fpr: dict
    roc_reps: int
    # mean difference (svreg - plasso) of percent selected per category
    # along the path, shape (len(lambdas), len(categories)); None when either
    # method was not run
    diff_curve: np.ndarray | None
    failures: tuple[tuple[int, str, str], ...]

    def mean(self, method: str, metric: str) -> float:
        return float(np.nanmean(self.metrics[method][metric]))

    def se(self, method: str, metric: str) -> float:
        vals = self.metrics[method][metric]
        ok = vals[~np.isnan(vals)]
        if ok.size < 2:
            return 0.0
        return float(ok.std(ddof=1) / np.sqrt(ok.size))

    def percent_mean(self, method: str, category: str) -> float:
        return float(np.nanmean(self.percents[method][category]))


def _rep_worker(args) -> dict:
    (
        rep,
        rep_seed,
        setting,
        rep_n,
        methods,
        lambdas,
        alpha,
        n_folds,
        weight_mode,
        dummy_mode,
        want_path_curves,
        solver_tol,
    ) = args
    data_ss, cv_ss = rep_seed.spawn(2)
    sim = generate(setting, n=rep_n, seed=data_ss)
    out: dict = {"rep": rep}
    for method in methods:
        try:
            cfg = FitConfig(alpha=alpha, weight_mode=weight_mode, tol=solver_tol)
            cv = cross_validate(
                sim.dataset,
                lambdas,
                method=method,
                groups=sim.groups,
                config=cfg,
                n_folds=n_folds,
                seed=cv_ss,
            )
            full_std, _ = standardize(sim.dataset, sim.dataset.detect_dummies())
            path = fit_path(full_std, lambdas, method, groups=sim.groups, config=cfg)
            best = path.coefs[cv.best_index]
            cc = variable_confusion(
                best, sim.truth, sim.z_dummy_groups, dummy_mode
            )
            pct = percent_selected(
                best, sim.truth, sim.z_continuous, sim.z_dummy_groups
            )
            res = {
                "fdr": cc.fdr,
                "sensitivity": cc.sensitivity,
                "specificity": cc.specificity,
                "geo_mean": cc.geo_mean,
                "cv_mse": cv.best_mse,
                "best_lambda": cv.best_lambda,
                "percents": pct,
            }
            if want_path_curves:
                tpr, fpr = roc_points(
                    path.coefs, sim.truth, sim.z_dummy_groups, dummy_mode
                )
                res["fpr_at"] = staircase_fpr(tpr, fpr, TPR_GRID)
                res["path_percents"] = [
                    percent_selected(
                        c, sim.truth, sim.z_continuous, sim.z_dummy_groups
                    )
                    for c in path.coefs
                ]
            out[method] = res
        except Exception as exc:  # noqa: BLE001 - reported, counted, capped
            out[method] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def run_benchmark(
    setting: int,
    n_reps: int,
    seed: int,
    methods: tuple[str, ...] = METHODS,
    lambdas=None,
    alpha: float = 0.5,
    n_folds: int = 10,
    weight_mode: str = "consistent",
    dummy_mode: str = "grouped",
    roc_reps: int = 20,
    jobs: int = 1,
    rep_n: int | None = None,
    solver_tol: float = 1e-5,
    max_failure_rate: float = 0.10,
) -> BenchmarkResult:
    """Run n_reps seeded replications of the benchmark for each method.

    roc_reps caps how many of the first replications also evaluate the whole
    selection path (ROC and difference curves). A method whose failure rate
    exceeds max_failure_rate aborts the run with BenchmarkError.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    grid = coarse_grid() if lambdas is None else np.asarray(lambdas, dtype=float)
    children = np.random.SeedSequence(seed).spawn(n_reps)
    tasks = [
        (
            rep,
            children[rep],
            setting,
            rep_n,
            tuple(methods),
            grid,
            alpha,
            n_folds,
            weight_mode,
            dummy_mode,
            rep < roc_reps,
            solver_tol,
        )
        for rep in range(n_reps)
    ]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            rows = pool.map(_rep_worker, tasks)
    else:
        rows = [_rep_worker(t) for t in tasks]

    failures: list[tuple[int, str, str]] = []
    metrics = {
        m: {name: np.full(n_reps, np.nan) for name in _SUMMARY_METRICS + ("best_lambda",)}
        for m in methods
    }
    categories = [c for c in PERCENT_CATEGORIES]
    seen_categories: set[str] = set()
    percents = {m: {} for m in methods}
    fpr_sum = {m: np.zeros(TPR_GRID.size) for m in methods}
    fpr_cnt = {m: 0 for m in methods}
    path_pct: dict = {m: [] for m in methods}

    for row in rows:
        rep = row["rep"]
        for m in methods:
            res = row[m]
            if "error" in res:
                failures.append((rep, m, res["error"]))
                continue
            for name in _SUMMARY_METRICS + ("best_lambda",):
                metrics[m][name][rep] = res[name]
            for cat, val in res["percents"].items():
                seen_categories.add(cat)
                percents[m].setdefault(cat, np.full(n_reps, np.nan))[rep] = val
            if "fpr_at" in res:
                fpr_sum[m] += res["fpr_at"]
                fpr_cnt[m] += 1
                path_pct[m].append(res["path_percents"])

    for m in methods:
        failed = sum(1 for _, mm, _ in failures if mm == m)
        if failed > max_failure_rate * n_reps:
            raise BenchmarkError(
                f"method {m}: {failed}/{n_reps} replications failed "
                f"(limit {max_failure_rate:.0%}); first error: "
                + next(msg for _, mm, msg in failures if mm == m)
            )

    cat_order = tuple(c for c in PERCENT_CATEGORIES if c in seen_categories)
    roc_fpr = {
        m: (fpr_sum[m] / fpr_cnt[m] if fpr_cnt[m] else None) for m in methods
    }

    diff = None
    if "svreg" in methods and "plasso" in methods and path_pct["svreg"]:
        n_curves = min(len(path_pct["svreg"]), len(path_pct["plasso"]))
        diff = np.zeros((grid.size, len(cat_order)))
        for r in range(n_curves):
            for i in range(grid.size):
                for ci, cat in enumerate(cat_order):
                    a = path_pct["svreg"][r][i].get(cat, 0.0)
                    b = path_pct["plasso"][r][i].get(cat, 0.0)
                    diff[i, ci] += a - b
        diff /= max(n_curves, 1)

    return BenchmarkResult(
        setting=setting,
        n_reps=n_reps,
        seed=seed,
        methods=tuple(methods),
        lambdas=grid,
        categories=cat_order,
        metrics=metrics,
        percents=percents,
        roc_fpr=roc_fpr,
        roc_reps=min(roc_reps, n_reps),
        diff_curve=diff,
        failures=tuple(failures),
    )


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_benchmark_csvs(result: BenchmarkResult, out_dir) -> list[str]:
    """Write table.csv, roc.csv and (when available) diffcurve.csv.

    Row order and float formatting are fixed so identical runs produce
    byte-identical files.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []

    table_path = os.path.join(out_dir, "table.csv")
    with open(table_path, "w", newline="") as fh:
        header = ["metric", "category"]
        for m in result.methods:
            header += [f"{m}_mean", f"{m}_se"]
        fh.write(",".join(header) + "\n")
        for cat in result.categories:
            row = ["percent_selected", cat]
            for m in result.methods:
                vals = result.percents[m].get(cat)
                if vals is None:
                    row += ["", ""]
                    continue
                ok = vals[~np.isnan(vals)]
                se = ok.std(ddof=1) / np.sqrt(ok.size) if ok.size > 1 else 0.0
                row += [_fmt(float(ok.mean())), _fmt(float(se))]
            fh.write(",".join(row) + "\n")
        for name in _SUMMARY_METRICS:
            row = [name, ""]
            for m in result.methods:
                row += [_fmt(result.mean(m, name)), _fmt(result.se(m, name))]
            fh.write(",".join(row) + "\n")
    written.append(table_path)

    roc_rows = [
        (m, result.roc_fpr[m]) for m in result.methods if result.roc_fpr[m] is not None
    ]
    if roc_rows:
        roc_path = os.path.join(out_dir, "roc.csv")
        with open(roc_path, "w", newline="") as fh:
            fh.write("method,tpr,fpr\n")
            for m, curve in roc_rows:
                for t, f in zip(TPR_GRID, curve):
                    fh.write(f"{m},{_fmt(float(t))},{_fmt(float(f))}\n")
        written.append(roc_path)

    if result.diff_curve is not None:
        diff_path = os.path.join(out_dir, "diffcurve.csv")
        with open(diff_path, "w", newline="") as fh:
            fh.write("lambda,category,svreg_minus_plasso\n")
            for i, lam in enumerate(result.lambdas):
                for ci, cat in enumerate(result.categories):
                    fh.write(
                        f"{_fmt(float(lam))},{cat},"
                        f"{_fmt(float(result.diff_curve[i, ci]))}\n"
                    )
        written.append(diff_path)
    return written
