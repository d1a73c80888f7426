"""Penalty grids, warm-started regularization paths, and K-fold
cross-validation with per-fold standardization.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .baselines import _expanded_design, fit_lasso_interactions, fit_plasso
from .data import (
    Dataset,
    GroupSpec,
    apply_standardization,
    singleton_groups,
    standardize,
)
from .model import CoefficientSet, FitConfig, predict
from .solver import fit_svreg

__all__ = [
    "METHODS",
    "default_grid",
    "coarse_grid",
    "check_grid",
    "PathResult",
    "fit_path",
    "CVResult",
    "cross_validate",
]

METHODS = ("lasso", "plasso", "svreg")


def default_grid(start: float = 10.0, stop: float = 0.01, step: float = 0.01) -> np.ndarray:
    """Decreasing arithmetic grid, by default 10.00, 9.99, ..., 0.01."""
    if not (start > stop > 0.0) or step <= 0.0:
        raise ValueError("need start > stop > 0 and step > 0")
    count = int(round((start - stop) / step)) + 1
    grid = stop + step * np.arange(count)[::-1]
    return check_grid(grid)


def coarse_grid(num: int = 60, start: float = 10.0, stop: float = 0.01) -> np.ndarray:
    """Decreasing geometric grid, 60 points from 10 down to 0.01."""
    if num < 2 or not (start > stop > 0.0):
        raise ValueError("need num >= 2 and start > stop > 0")
    return check_grid(np.geomspace(start, stop, num))


def check_grid(lambdas) -> np.ndarray:
    grid = np.asarray(lambdas, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("penalty grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(grid)) or np.any(grid <= 0.0):
        raise ValueError("penalty grid values must be finite and positive")
    if np.any(np.diff(grid) >= 0.0):
        raise ValueError("penalty grid must be strictly decreasing")
    return grid


@dataclass(frozen=True)
class PathResult:
    """Solutions along a decreasing penalty grid, each warm-started from the
    previous one."""

    method: str
    lambdas: np.ndarray
    coefs: tuple[CoefficientSet, ...]
    objectives: np.ndarray
    n_iters: np.ndarray
    converged: np.ndarray


def fit_path(
    d: Dataset,
    lambdas,
    method: str = "svreg",
    groups: GroupSpec | None = None,
    config: FitConfig | None = None,
) -> PathResult:
    """Fit one method over a decreasing penalty grid with warm starts.

    config supplies everything except lam (which ranges over the grid).
    """
    grid = check_grid(lambdas)
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    cfg = config if config is not None else FitConfig()
    coefs: list[CoefficientSet] = []
    objectives = np.empty(grid.size)
    n_iters = np.zeros(grid.size, dtype=int)
    converged = np.zeros(grid.size, dtype=bool)

    if method == "lasso":
        design = _expanded_design(d)
        warm_vec: np.ndarray | None = None
        for i, lam in enumerate(grid):
            fit = fit_lasso_interactions(
                d, float(lam), tol=cfg.inner_tol, max_iter=cfg.max_outer_iter,
                warm_start=warm_vec, design=design,
            )
            warm_vec = fit.raw
            coefs.append(fit.coef)
            objectives[i] = fit.objective
            n_iters[i] = fit.n_iter
            converged[i] = fit.converged
        return PathResult(method, grid, tuple(coefs), objectives, n_iters, converged)

    if method == "svreg" and groups is None:
        groups = singleton_groups(d.p, d.k)
    warm: CoefficientSet | None = None
    for i, lam in enumerate(grid):
        cfg_i = replace(cfg, lam=float(lam))
        if method == "svreg":
            fit = fit_svreg(d, groups, cfg_i, warm_start=warm)
        else:
            fit = fit_plasso(d, cfg_i, warm_start=warm)
        warm = fit.coef
        coefs.append(fit.coef)
        objectives[i] = fit.objective
        n_iters[i] = fit.n_iter
        converged[i] = fit.converged
    return PathResult(method, grid, tuple(coefs), objectives, n_iters, converged)


def _subset(d: Dataset, rows: np.ndarray) -> Dataset:
    return Dataset(
        y=d.y[rows],
        X=d.X[rows],
        Z=d.Z[rows],
        x_names=d.x_names,
        z_names=d.z_names,
        standardized=d.standardized,
        dummy_columns=d.dummy_columns,
    )


def make_folds(n: int, n_folds: int, seed) -> list[np.ndarray]:
    """Shuffled fold index sets whose sizes differ by at most one."""
    if not 2 <= n_folds <= n:
        raise ValueError(f"n_folds must be in [2, {n}], got {n_folds}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, n_folds)]


@dataclass(frozen=True)
class CVResult:
    """Cross-validated prediction error along the grid.

    mean_mse[i] is the fold-size-weighted mean of held-out squared error at
    lambdas[i], i.e. the total held-out squared error divided by N. Among
    ties, best_index points at the smallest penalty.
    """

    method: str
    lambdas: np.ndarray
    mean_mse: np.ndarray
    se_mse: np.ndarray
    fold_mse: np.ndarray
    fold_sizes: np.ndarray
    best_index: int

    @property
    def best_lambda(self) -> float:
        return float(self.lambdas[self.best_index])

    @property
    def best_mse(self) -> float:
        return float(self.mean_mse[self.best_index])


def cross_validate(
    d: Dataset,
    lambdas,
    method: str = "svreg",
    groups: GroupSpec | None = None,
    config: FitConfig | None = None,
    n_folds: int = 10,
    seed=0,
    dummy_columns: frozenset[int] | None = None,
) -> CVResult:
    """K-fold cross-validation on raw (unstandardized) data.

    Each training fold is standardized from its own rows only; the held-out
    rows are mapped with the training statistics before scoring.
    """
    grid = check_grid(lambdas)
    if d.standardized:
        raise ValueError("cross_validate expects raw data (it standardizes per fold)")
    if dummy_columns is None:
        dummy_columns = d.detect_dummies()
    folds = make_folds(d.n, n_folds, seed)
    all_rows = np.arange(d.n)
    fold_mse = np.empty((len(folds), grid.size))
    fold_sizes = np.array([f.size for f in folds])

    for fi, test_rows in enumerate(folds):
        train_rows = np.setdiff1d(all_rows, test_rows)
        train_std, rec = standardize(_subset(d, train_rows), dummy_columns)
        test_std = apply_standardization(_subset(d, test_rows), rec)
        path = fit_path(train_std, grid, method, groups=groups, config=config)
        for i, coef in enumerate(path.coefs):
            resid = test_std.y - predict(test_std, coef)
            fold_mse[fi, i] = float(resid @ resid) / test_rows.size

    mean_mse = fold_sizes @ fold_mse / d.n
    se_mse = fold_mse.std(axis=0, ddof=1) / np.sqrt(len(folds))
    best = int(grid.size - 1 - np.argmin(mean_mse[::-1]))
    return CVResult(
        method=method,
        lambdas=grid,
        mean_mse=mean_mse,
        se_mse=se_mse,
        fold_mse=fold_mse,
        fold_sizes=fold_sizes,
        best_index=best,
    )
