"""Baseline estimators: the pliable lasso and the all-interactions lasso.

Both fit the same varying-coefficient model as the grouped solver but with
coarser penalties:

* the pliable lasso penalises every predictor separately,
  (1-a)*lam*(||(beta_j, theta_j)|| + ||theta_j||) + a*lam*||theta_j||_1,
  with no grouping of modifiers. It is implemented here as its own
  coordinate-descent loop rather than as a parameterisation of the grouped
  solver, so agreement between the two is a meaningful check.
* the interaction lasso puts a plain L1 penalty on all main and interaction
  coefficients, leaving the intercept and the modifier main effects
  unpenalised. It runs on the expanded design [1 | Z | X | X*Z] with a
  compiled cyclic coordinate-descent kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .data import Dataset, interaction_features, singleton_groups
from .kernels import group_shrink, nested_prox, soft_threshold
from .model import CoefficientSet, FitConfig
from .solver import FitResult

__all__ = ["fit_plasso", "LassoFit", "fit_lasso_interactions"]

_SLACK = 1e-12


# ---------------------------------------------------------------------------
# Pliable lasso
# ---------------------------------------------------------------------------

class _PliableSolver:
    def __init__(self, d: Dataset, cfg: FitConfig, warm_start: CoefficientSet | None):
        self.d = d
        self.cfg = cfg
        self.X, self.Z, self.y = d.X, d.Z, d.y
        self.n, self.p, self.k = d.n, d.p, d.k
        self.lam = cfg.lam
        self.alpha = cfg.alpha
        self.lam1 = (1.0 - cfg.alpha) * cfg.lam
        if warm_start is None:
            self.beta0 = 0.0
            self.theta0 = np.zeros(self.k)
            self.beta = np.zeros(self.p)
            self.theta = np.zeros((self.p, self.k))
        else:
            self.beta0 = float(warm_start.beta0)
            self.theta0 = warm_start.theta0.copy()
            self.beta = warm_start.beta.copy()
            self.theta = warm_start.theta.copy()
        design = np.column_stack([np.ones(self.n), self.Z])
        self.int_pinv = np.linalg.pinv(design)
        self.col_ss = np.einsum("ij,ij->j", self.X, self.X)
        self.r = self.y - self._predict()

    def _predict(self) -> np.ndarray:
        yhat = self.beta0 + self.X @ self.beta + self.Z @ self.theta0
        return yhat + np.einsum("ij,ij->i", self.X, self.Z @ self.theta.T)

    def _refit_intercepts(self) -> None:
        r_plus = self.r + self.beta0 + self.Z @ self.theta0
        sol = self.int_pinv @ r_plus
        self.beta0 = float(sol[0])
        self.theta0 = sol[1:]
        self.r = r_plus - self.beta0 - self.Z @ self.theta0

    def _penalty(self) -> float:
        joint = np.sqrt(self.beta**2 + (self.theta**2).sum(axis=1))
        rows = np.sqrt((self.theta**2).sum(axis=1))
        return float(
            self.lam1 * (joint.sum() + rows.sum())
            + self.alpha * self.lam * np.abs(self.theta).sum()
        )

    def _objective(self) -> float:
        return float(0.5 * (self.r @ self.r) / self.n + self._penalty())

    def _pred_obj(self, b: float, th: np.ndarray, s: np.ndarray, x: np.ndarray) -> float:
        e = s - x * (b + self.Z @ th)
        pen = self.lam1 * (
            math.sqrt(b * b + float(th @ th)) + float(np.linalg.norm(th))
        ) + self.alpha * self.lam * float(np.abs(th).sum())
        return float(0.5 * (e @ e) / self.n) + pen

    def _update_predictor(self, j: int) -> None:
        n = self.n
        x = self.X[:, j]
        b_cur = float(self.beta[j])
        th_cur = self.theta[j]
        active = b_cur != 0.0 or th_cur.any()
        s = self.r + x * (b_cur + self.Z @ th_cur) if active else self.r

        a_stat = float(x @ s) / n
        v = (x * s) @ self.Z / n
        sv = soft_threshold(v, self.alpha * self.lam)
        sv_norm = float(np.linalg.norm(sv))
        if abs(a_stat) <= self.lam1 and sv_norm <= 2.0 * self.lam1:
            excess = max(sv_norm - self.lam1, 0.0)
            if a_stat**2 + excess**2 <= self.lam1**2 * (1.0 + 1e-12):
                if active:
                    self.beta[j] = 0.0
                    self.theta[j] = 0.0
                    self.r = s
                return

        b_hat = float(soft_threshold(a_stat, self.lam1)) * n / self.col_ss[j]
        e_hat = s - x * b_hat
        v2 = (x * e_hat) @ self.Z / n
        stat2 = float(np.linalg.norm(soft_threshold(v2, self.alpha * self.lam)))
        f_incumbent = self._pred_obj(b_cur, th_cur, s, x)
        if stat2 < self.lam1:
            f_hat = self._pred_obj(b_hat, np.zeros(self.k), s, x)
            if f_hat <= f_incumbent + _SLACK * (1.0 + abs(f_incumbent)):
                self.beta[j] = b_hat
                self.theta[j] = 0.0
                self.r = e_hat
                return

        b0 = b_hat if self._pred_obj(b_hat, th_cur, s, x) <= f_incumbent else b_cur
        b, th = self._prox_refine(b0, th_cur, s, x)
        f_new = self._pred_obj(b, th, s, x)
        if f_new <= f_incumbent + _SLACK * (1.0 + abs(f_incumbent)):
            self.beta[j] = b
            self.theta[j] = th
            self.r = s - x * (b + self.Z @ th)

    def _prox_refine(
        self,
        b_init: float,
        th_init: np.ndarray,
        s: np.ndarray,
        x: np.ndarray,
    ) -> tuple[float, np.ndarray]:
        n = self.n
        b = b_init
        th = th_init.copy()
        f_cur = self._pred_obj(b, th, s, x)
        t = 1.0
        for _ in range(self.cfg.max_inner_iter):
            e = s - x * (b + self.Z @ th)
            gb = -float(x @ e) / n
            gth = -((x * e) @ self.Z) / n
            accepted = False
            while t >= 1e-14:
                nb_arr, nth_blocks = nested_prox(
                    np.array([b - t * gb]),
                    [th - t * gth],
                    t,
                    self.lam,
                    self.alpha,
                    1.0,
                    [1.0],
                )
                nb = float(nb_arr[0])
                nth = nth_blocks[0]
                f_new = self._pred_obj(nb, nth, s, x)
                if f_new <= f_cur + _SLACK * (1.0 + abs(f_cur)):
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            moved = f_cur - f_new
            b, th, f_cur = nb, nth, f_new
            t = min(t * 2.0, 1.0)
            if moved <= self.cfg.inner_tol * (1.0 + abs(f_cur)):
                break
        return b, th

    def run(self) -> FitResult:
        self._refit_intercepts()
        trace = [self._objective()]
        converged = False
        sweeps = 0
        for sweeps in range(1, self.cfg.max_outer_iter + 1):
            self.r = self.y - self._predict()
            for j in range(self.p):
                self._update_predictor(j)
                self._refit_intercepts()
            trace.append(self._objective())
            if abs(trace[-2] - trace[-1]) < self.cfg.tol:
                converged = True
                break
        coef = CoefficientSet(
            self.beta0, self.theta0.copy(), self.beta.copy(), self.theta.copy()
        )
        return FitResult(
            coef=coef,
            objective=trace[-1],
            objective_trace=tuple(trace),
            n_iter=sweeps,
            converged=converged,
            config=self.cfg,
        )


def fit_plasso(
    d: Dataset,
    config: FitConfig | None = None,
    warm_start: CoefficientSet | None = None,
) -> FitResult:
    """Fit the pliable lasso at one penalty level.

    The weight_mode field of the config is ignored: this penalty has no
    modifier grouping. Its objective coincides with the grouped solver run
    with singleton predictor groups, a single all-modifiers group, and unit
    weights.
    """
    cfg = config if config is not None else FitConfig()
    if d.k == 0:
        raise ValueError("the pliable lasso needs at least one modifier column")
    return _PliableSolver(d, cfg, warm_start).run()


# ---------------------------------------------------------------------------
# Lasso on the expanded design
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lasso_pass(W, pen, beta, r, col_ss, n, active_only):
    m = W.shape[1]
    maxmove = 0.0
    for j in range(m):
        bj = beta[j]
        if active_only and bj == 0.0 and pen[j] > 0.0:
            continue
        acc = 0.0
        for i in range(n):
            acc += W[i, j] * r[i]
        rho = acc / n + col_ss[j] * bj
        if pen[j] > 0.0:
            mag = abs(rho) - pen[j]
            nb = (mag if mag > 0.0 else 0.0) * (1.0 if rho >= 0.0 else -1.0)
            nb /= col_ss[j]
        else:
            nb = rho / col_ss[j]
        if nb != bj:
            d = bj - nb
            for i in range(n):
                r[i] += W[i, j] * d
            beta[j] = nb
            if abs(d) > maxmove:
                maxmove = abs(d)
    return maxmove


@njit(cache=True)
def _lasso_cd(W, pen, beta, r, col_ss, n, tol, max_full, max_active):
    it = 0
    for it in range(1, max_full + 1):
        maxmove = _lasso_pass(W, pen, beta, r, col_ss, n, False)
        if maxmove <= tol:
            return it, True
        for _ in range(max_active):
            mm = _lasso_pass(W, pen, beta, r, col_ss, n, True)
            if mm <= tol:
                break
    return it, False


@dataclass(frozen=True)
class LassoFit:
    """Interaction-lasso output. raw is the internal stacked coefficient
    vector [intercept, theta0, beta, vec(theta)] used for warm starts."""

    coef: CoefficientSet
    objective: float
    lam: float
    n_iter: int
    converged: bool
    raw: np.ndarray


def _expanded_design(d: Dataset) -> np.ndarray:
    return np.asfortranarray(
        np.column_stack([np.ones(d.n), d.Z, d.X, interaction_features(d)])
    )


def fit_lasso_interactions(
    d: Dataset,
    lam: float,
    tol: float = 1e-8,
    max_iter: int = 1000,
    warm_start: np.ndarray | None = None,
    design: np.ndarray | None = None,
) -> LassoFit:
    """L1-penalised least squares on [1 | Z | X | X*Z].

    Only the intercept carries no penalty. tol is the largest coefficient
    move allowed in a converged full pass. Passing the precomputed expanded
    design avoids rebuilding it along a penalty path.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    n, p, k = d.n, d.p, d.k
    W = _expanded_design(d) if design is None else design
    m = W.shape[1]
    pen = np.zeros(m)
    pen[1:] = lam
    if warm_start is None:
        beta = np.zeros(m)
        r = d.y.copy()
    else:
        if warm_start.shape != (m,):
            raise ValueError("warm start length does not match the design")
        beta = warm_start.copy()
        r = d.y - W @ beta
    col_ss = np.einsum("ij,ij->j", W, W) / n
    if np.any(col_ss == 0.0):
        raise ValueError("zero-norm column in the expanded design")
    n_iter, converged = _lasso_cd(
        W, pen, beta, r, col_ss, n, tol, max_iter, 50
    )
    coef = CoefficientSet(
        beta0=float(beta[0]),
        theta0=beta[1 : 1 + k].copy(),
        beta=beta[1 + k : 1 + k + p].copy(),
        theta=beta[1 + k + p :].reshape(p, k).copy(),
    )
    objective = float(
        0.5 * (r @ r) / n + lam * float(np.abs(beta[1:]).sum())
    )
    return LassoFit(
        coef=coef,
        objective=objective,
        lam=float(lam),
        n_iter=int(n_iter),
        converged=bool(converged),
        raw=beta,
    )
