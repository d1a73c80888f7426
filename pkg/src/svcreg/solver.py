"""Blockwise coordinate descent for the grouped varying-coefficient lasso.

One sweep visits every predictor group once. For group l the block
(beta_l, Theta_l) is updated by a three-stage decision:

  (a) test whether the whole block can be set to zero. The cheap screening
      statistics are computed first; when they pass, the exact zero-block
      optimality condition (a sum-of-squares refinement of the same
      statistics) decides. Only an exactly certified zero is committed.
  (b) solve for beta_l with Theta_l = 0 (closed form for singleton groups,
      otherwise coordinate search with an escape step out of the origin),
      then test every modifier group for staying at zero. If all pass, the
      (beta_l, 0) proposal is committed when it does not increase the block
      objective.
  (c) otherwise minimise over the block restricted to the candidate nonzero
      modifier groups by proximal gradient with backtracking, re-testing
      excluded groups and growing the candidate set until none is violated.

The intercept pair (beta0, theta0) is unpenalised and refit by least squares
on [1, Z] after every block update that changed the block, so the objective
never increases between any two recorded points of the trace.

Sweeps alternate between full passes and passes over the currently nonzero
blocks; convergence is only declared after a full pass moves the objective
by less than the tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, GroupSpec, singleton_groups
from .kernels import (
    ScreenReport,
    group_shrink,
    minimize_scalar_bounded,
    screen_stats_threshold_crossing,
    soft_threshold,
)
from .model import CoefficientSet, FitConfig, modifier_weights, predict

__all__ = ["FitResult", "fit_svreg", "lambda_max", "screen_block"]

# slack for accept/reject comparisons, relative to the objective scale
_SLACK = 1e-12


@dataclass(frozen=True)
class FitResult:
    """Solver output.

    objective_trace holds the objective after initialisation and after each
    completed sweep; it is non-increasing up to floating-point noise.
    """

    coef: CoefficientSet
    objective: float
    objective_trace: tuple[float, ...]
    n_iter: int
    converged: bool
    config: FitConfig


def _as_index_arrays(groups) -> list[np.ndarray]:
    return [np.asarray(g, dtype=np.intp) for g in groups]


class _BlockSolver:
    def __init__(
        self,
        d: Dataset,
        groups: GroupSpec,
        cfg: FitConfig,
        warm_start: CoefficientSet | None,
    ):
        self.d = d
        self.gs = groups
        self.cfg = cfg
        self.X = d.X
        self.Z = d.Z
        self.y = d.y
        self.n, self.p, self.k = d.n, d.p, d.k
        self.pg = _as_index_arrays(groups.predictor_groups)
        self.mg = _as_index_arrays(groups.modifier_groups)
        self.w = modifier_weights(groups, d.k, cfg.weight_mode)
        self.lam = cfg.lam
        self.alpha = cfg.alpha
        self.lam1 = (1.0 - cfg.alpha) * cfg.lam

        # per-block design slices and their column sums of squares
        self.Xls = [self.X[:, idx] for idx in self.pg]
        self.col_ss = [np.einsum("ij,ij->j", Xl, Xl) for Xl in self.Xls]
        self.all_singleton = all(idx.size == 1 for idx in self.pg)

        # modifier-group bookkeeping for vectorised per-group reductions:
        # a column permutation making groups contiguous, reduceat offsets,
        # and the group id of every column
        if self.k:
            sizes = np.array([g.size for g in self.mg], dtype=np.intp)
            self.mg_perm = np.concatenate(self.mg)
            self.mg_starts = np.concatenate(
                [[0], np.cumsum(sizes)[:-1]]
            ).astype(np.intp)
            self.perm_identity = bool(
                np.array_equal(self.mg_perm, np.arange(self.k))
            )
            self.col_group = np.empty(self.k, dtype=np.intp)
            for g, cols in enumerate(self.mg):
                self.col_group[cols] = g
            self.mg_sqsize = np.sqrt(sizes.astype(float))

        if warm_start is None:
            self.beta0 = 0.0
            self.theta0 = np.zeros(self.k)
            self.beta = np.zeros(self.p)
            self.theta = np.zeros((self.p, self.k))
        else:
            if warm_start.beta.shape[0] != self.p or warm_start.theta.shape != (
                self.p,
                self.k,
            ):
                raise ValueError("warm start shape does not match the data")
            self.beta0 = float(warm_start.beta0)
            self.theta0 = warm_start.theta0.copy()
            self.beta = warm_start.beta.copy()
            self.theta = warm_start.theta.copy()

        design = np.column_stack([np.ones(self.n), self.Z])
        self.int_pinv = np.linalg.pinv(design)
        self.r = self.y - self._predict()

    # -- residual bookkeeping -------------------------------------------

    def _predict(self) -> np.ndarray:
        yhat = self.beta0 + self.X @ self.beta
        if self.k:
            yhat = yhat + self.Z @ self.theta0
            yhat = yhat + np.einsum("ij,ij->i", self.X, self.Z @ self.theta.T)
        return yhat

    def _coef(self) -> CoefficientSet:
        return CoefficientSet(
            self.beta0, self.theta0.copy(), self.beta.copy(), self.theta.copy()
        )

    def _refit_intercepts(self) -> None:
        r_plus = self.r + self.beta0
        if self.k:
            r_plus = r_plus + self.Z @ self.theta0
        sol = self.int_pinv @ r_plus
        self.beta0 = float(sol[0])
        self.theta0 = sol[1:]
        self.r = r_plus - self.beta0
        if self.k:
            self.r = self.r - self.Z @ self.theta0

    def _block_inter(self, Xl: np.ndarray, th: np.ndarray) -> np.ndarray:
        """sum_j x_j * (Z theta_j) for the block's rows of Theta."""
        if self.k == 0 or not th.any():
            return np.zeros(self.n)
        if Xl.shape[1] == 1:
            return Xl[:, 0] * (self.Z @ th[0])
        return np.einsum("ij,ij->i", Xl, self.Z @ th.T)

    # -- vectorised per-modifier-group reductions -------------------------

    def _group_norms_sq(self, sq_cols: np.ndarray) -> np.ndarray:
        v = sq_cols if self.perm_identity else sq_cols[self.mg_perm]
        return np.add.reduceat(v, self.mg_starts)

    def _group_stats(self, M: np.ndarray) -> np.ndarray:
        """Per modifier group: Frobenius norm of the soft-thresholded slice."""
        if self.k == 0:
            return np.zeros(0)
        S = soft_threshold(M, self.alpha * self.lam)
        sq = np.einsum("ij,ij->j", S, S)
        return np.sqrt(self._group_norms_sq(sq))

    # -- block objective --------------------------------------------------

    def _block_penalty(self, b: np.ndarray, th: np.ndarray, sq_pl: float) -> float:
        joint = math.sqrt(float(b @ b) + float((th * th).sum()))
        grp = 0.0
        l1 = 0.0
        if self.k and th.any():
            sq = np.einsum("ij,ij->j", th, th)
            grp = float(self.w @ np.sqrt(self._group_norms_sq(sq)))
            l1 = self.alpha * self.lam * float(np.abs(th).sum())
        return self.lam1 * sq_pl * (joint + grp) + l1

    def _block_objective(
        self, b: np.ndarray, th: np.ndarray, s: np.ndarray, Xl: np.ndarray, sq_pl: float
    ) -> float:
        e = s - Xl @ b - self._block_inter(Xl, th)
        return float(0.5 * (e @ e) / self.n) + self._block_penalty(b, th, sq_pl)

    def _penalty_total(self) -> float:
        if self.all_singleton:
            th = self.theta
            l1 = 0.0
            grp = 0.0
            if self.k:
                sq = th * th
                joint = float(np.sqrt(self.beta * self.beta + sq.sum(axis=1)).sum())
                if th.any():
                    cols = sq if self.perm_identity else sq[:, self.mg_perm]
                    gn = np.sqrt(np.add.reduceat(cols, self.mg_starts, axis=1))
                    grp = float((gn @ self.w).sum())
                    l1 = self.alpha * self.lam * float(np.abs(th).sum())
            else:
                joint = float(np.abs(self.beta).sum())
            return self.lam1 * (joint + grp) + l1
        tot = 0.0
        for ell, idx in enumerate(self.pg):
            tot += self._block_penalty(
                self.beta[idx], self.theta[idx, :], math.sqrt(idx.size)
            )
        return tot

    def _objective(self) -> float:
        return float(0.5 * (self.r @ self.r) / self.n) + self._penalty_total()

    # -- stage (b)(i): beta with the block's Theta at zero -----------------

    def _solve_beta_only(
        self, ell: int, s: np.ndarray, b_init: np.ndarray, sq_pl: float
    ) -> np.ndarray:
        """argmin_b ||s - Xl b||^2/(2N) + lam1*sqrt(p_l)*||b||_2."""
        n = self.n
        thr = self.lam1 * sq_pl
        Xl = self.Xls[ell]
        col_ss = self.col_ss[ell]
        p_l = Xl.shape[1]
        if p_l == 1:
            v = float(Xl[:, 0] @ s) / n
            mag = abs(v) - thr
            if mag <= 0.0:
                return np.zeros(1)
            return np.array([math.copysign(mag, v) * n / float(col_ss[0])])

        b = b_init.copy()
        e = s - Xl @ b
        for _ in range(self.cfg.max_inner_iter):
            max_move = 0.0
            for j in range(p_l):
                bj = b[j]
                x = Xl[:, j]
                c1 = float(x @ e) + col_ss[j] * bj
                c2 = col_ss[j]
                q = float(b @ b) - bj * bj
                if q <= 0.0:
                    mag = abs(c1) / n - thr
                    new = 0.0 if mag <= 0.0 else math.copysign(mag, c1) * n / c2
                else:
                    if c1 == 0.0:
                        new = 0.0
                    else:
                        # the minimiser lies strictly between 0 and c1/c2
                        lo, hi = (0.0, c1 / c2) if c1 > 0 else (c1 / c2, 0.0)

                        def slice_obj(t, c1=c1, c2=c2, q=q):
                            return (c2 * t * t - 2.0 * c1 * t) / (
                                2.0 * n
                            ) + thr * math.sqrt(q + t * t)

                        new = minimize_scalar_bounded(slice_obj, lo, hi)
                if new != bj:
                    e = e + x * (bj - new)
                    b[j] = new
                    max_move = max(max_move, abs(new - bj))
            if max_move <= self.cfg.inner_tol * (1.0 + float(np.abs(b).max())):
                # coordinate cycles can stall at the origin kink; take one
                # certified group-prox step out of it when zero is not optimal
                if not b.any():
                    grad_stat = Xl.T @ s / n
                    if np.linalg.norm(grad_stat) > thr * (1.0 + 1e-10):
                        b = self._escape_origin(Xl, s, grad_stat, thr)
                        e = s - Xl @ b
                        continue
                break
        return b

    def _escape_origin(
        self, Xl: np.ndarray, s: np.ndarray, grad_stat: np.ndarray, thr: float
    ) -> np.ndarray:
        f0 = float(0.5 * (s @ s) / self.n)
        t = 1.0
        for _ in range(60):
            cand = group_shrink(t * grad_stat, t * thr)
            e = s - Xl @ cand
            f = float(0.5 * (e @ e) / self.n) + thr * float(np.linalg.norm(cand))
            if f < f0:
                return cand
            t *= 0.5
        return np.zeros(Xl.shape[1])

    # -- stage (c): proximal refinement on a restricted support ------------

    def _prox_cols(
        self, zb: np.ndarray, zth: np.ndarray, t: float, sq_pl: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Nested proximal map on a (p_l, K) interaction matrix.

        Matrix counterpart of kernels.nested_prox: elementwise soft threshold,
        per-modifier-group shrink, then a joint shrink over the whole block.
        """
        th = soft_threshold(zth, t * self.alpha * self.lam)
        sq = np.einsum("ij,ij->j", th, th)
        gsq = self._group_norms_sq(sq)
        gn = np.sqrt(gsq)
        thr_g = t * self.lam1 * sq_pl * self.w
        factors = np.zeros_like(gn)
        shrunk = gn > thr_g
        factors[shrunk] = 1.0 - thr_g[shrunk] / gn[shrunk]
        th = th * factors[self.col_group]
        tot = math.sqrt(float(zb @ zb) + float(gsq @ (factors * factors)))
        thr_joint = t * self.lam1 * sq_pl
        if tot <= thr_joint:
            return np.zeros_like(zb), np.zeros_like(zth)
        f = 1.0 - thr_joint / tot
        return zb * f, th * f

    def _prox_refine(
        self,
        ell: int,
        b: np.ndarray,
        th: np.ndarray,
        mask_cols: np.ndarray,
        s: np.ndarray,
        sq_pl: float,
    ) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        Xl = self.Xls[ell]
        f_cur = self._block_objective(b, th, s, Xl, sq_pl)
        t = 1.0
        for _ in range(self.cfg.max_inner_iter):
            e = s - Xl @ b - self._block_inter(Xl, th)
            gb = -(Xl.T @ e) / n
            gth = -((Xl * e[:, None]).T @ self.Z) / n

            accepted = False
            while t >= 1e-14:
                zb = b - t * gb
                zth = (th - t * gth) * mask_cols
                nb, nth = self._prox_cols(zb, zth, t, sq_pl)
                f_new = self._block_objective(nb, nth, s, Xl, sq_pl)
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

    def _step_c(
        self,
        ell: int,
        nz: set[int],
        b: np.ndarray,
        th: np.ndarray,
        s: np.ndarray,
        sq_pl: float,
    ) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        Xl = self.Xls[ell]
        budget = self.lam1 * sq_pl
        n_groups = len(self.mg)
        support = np.zeros(n_groups, dtype=bool)
        support[list(nz)] = True
        for _ in range(10):
            if support.any():
                b, th = self._prox_refine(
                    ell, b, th, support[self.col_group], s, sq_pl
                )
            else:
                b = self._solve_beta_only(ell, s, b, sq_pl)
                th = np.zeros_like(th)
            # drop groups that came back exactly zero (a no-op on the state)
            if th.any():
                live = self._group_norms_sq(np.einsum("ij,ij->j", th, th)) > 0.0
            else:
                live = np.zeros(n_groups, dtype=bool)
            support = live
            e = s - Xl @ b - self._block_inter(Xl, th)
            stats = self._group_stats(((Xl * e[:, None]).T @ self.Z) / n)
            violated = (stats > budget * self.w * (1.0 + 1e-10) + 1e-15) & ~support
            if not violated.any():
                break
            support = support | violated
        return b, th

    # -- one block ----------------------------------------------------------

    def _process_block(self, ell: int) -> bool:
        """Update one block in place; report whether anything changed."""
        idx = self.pg[ell]
        p_l = idx.size
        sq_pl = math.sqrt(p_l)
        budget = self.lam1 * sq_pl
        n = self.n
        Xl = self.Xls[ell]
        b_cur = self.beta[idx]
        th_cur = self.theta[idx, :]
        block_active = b_cur.any() or th_cur.any()

        if block_active:
            s = self.r + Xl @ b_cur + self._block_inter(Xl, th_cur)
        else:
            s = self.r

        # (a) whole-block zero test
        A = Xl.T @ s / n
        joint_stat = float(np.linalg.norm(A))
        if self.k:
            V = ((Xl * s[:, None]).T @ self.Z) / n
            mod_stats = self._group_stats(V)
        else:
            mod_stats = np.zeros(0)
        screen_pass = joint_stat <= budget and bool(
            np.all(mod_stats <= budget * (1.0 + self.w))
        )
        if screen_pass:
            excess = np.maximum(mod_stats - budget * self.w, 0.0)
            certified = joint_stat**2 + float(excess @ excess) <= budget**2 * (
                1.0 + 1e-12
            )
            if certified:
                if block_active:
                    self.beta[idx] = 0.0
                    self.theta[idx, :] = 0.0
                    self.r = s
                    return True
                return False
            # not actually optimal at zero: treat as a screen rejection

        # (b)(i) main effects with the block's interactions at zero
        b_hat = self._solve_beta_only(ell, s, b_cur, sq_pl)

        # (b)(ii) per-group zero tests at (b_hat, 0)
        e_hat = s - Xl @ b_hat
        if self.k:
            stats = self._group_stats(((Xl * e_hat[:, None]).T @ self.Z) / n)
            if self.cfg.weight_mode == "paper-literal":
                thr = self.lam1 * self.mg_sqsize * sq_pl / math.sqrt(1.0 + self.k)
            else:
                thr = budget * self.w
            nz = set(np.flatnonzero(stats >= thr).tolist())
        else:
            nz = set()

        f_incumbent = self._block_objective(b_cur, th_cur, s, Xl, sq_pl)
        if not nz:
            f_hat = self._block_objective(b_hat, np.zeros_like(th_cur), s, Xl, sq_pl)
            if f_hat <= f_incumbent + _SLACK * (1.0 + abs(f_incumbent)):
                if not th_cur.any() and np.array_equal(b_hat, b_cur):
                    return False
                self.beta[idx] = b_hat
                self.theta[idx, :] = 0.0
                self.r = e_hat
                return True
            # keep the incumbent and refine from it instead

        # (c) proximal refinement on the candidate support
        if self.k and th_cur.any():
            nz |= set(
                np.flatnonzero(
                    self._group_norms_sq(np.einsum("ij,ij->j", th_cur, th_cur)) > 0.0
                ).tolist()
            )
        f_hat_th = self._block_objective(b_hat, th_cur, s, Xl, sq_pl)
        b0 = b_hat if f_hat_th <= f_incumbent else b_cur
        b_new, th_new = self._step_c(ell, nz, b0.copy(), th_cur.copy(), s, sq_pl)
        f_new = self._block_objective(b_new, th_new, s, Xl, sq_pl)
        if f_new <= f_incumbent + _SLACK * (1.0 + abs(f_incumbent)):
            if np.array_equal(b_new, b_cur) and np.array_equal(th_new, th_cur):
                return False
            self.beta[idx] = b_new
            self.theta[idx, :] = th_new
            self.r = s - Xl @ b_new - self._block_inter(Xl, th_new)
            return True
        # incumbent stays; residual is unchanged
        return False

    # -- driver ---------------------------------------------------------

    def run(self) -> FitResult:
        self._refit_intercepts()
        trace = [self._objective()]
        converged = False
        sweeps = 0
        full = True
        active: list[int] = []
        n_blocks = len(self.pg)
        while sweeps < self.cfg.max_outer_iter:
            sweeps += 1
            self.r = self.y - self._predict()
            for ell in range(n_blocks) if full else active:
                if self._process_block(ell):
                    self._refit_intercepts()
            trace.append(self._objective())
            small = abs(trace[-2] - trace[-1]) < self.cfg.tol
            if full:
                if small:
                    converged = True
                    break
                active = [
                    ell
                    for ell, idx in enumerate(self.pg)
                    if self.beta[idx].any() or self.theta[idx, :].any()
                ]
                full = not active
            elif small:
                full = True
        return FitResult(
            coef=self._coef(),
            objective=trace[-1],
            objective_trace=tuple(trace),
            n_iter=sweeps,
            converged=converged,
            config=self.cfg,
        )


def fit_svreg(
    d: Dataset,
    groups: GroupSpec | None = None,
    config: FitConfig | None = None,
    warm_start: CoefficientSet | None = None,
) -> FitResult:
    """Fit the grouped varying-coefficient lasso at one penalty level.

    Parameters
    ----------
    d : Dataset
        Typically standardized; the solver works on whatever scale it is
        given.
    groups : GroupSpec, optional
        Defaults to singleton predictor and modifier groups.
    config : FitConfig, optional
    warm_start : CoefficientSet, optional
        Starting point, e.g. the solution at the previous (larger) penalty.
    """
    if groups is None:
        groups = singleton_groups(d.p, d.k)
    groups.validate(d.p, d.k)
    cfg = config if config is not None else FitConfig()
    return _BlockSolver(d, groups, cfg, warm_start).run()


def screen_block(
    d: Dataset,
    coef: CoefficientSet,
    groups: GroupSpec,
    cfg: FitConfig,
    ell: int,
) -> ScreenReport:
    """Zero-block screening statistics for predictor group `ell`, evaluated
    with the whole block removed from the fit. Diagnostic counterpart of the
    solver's stage (a)."""
    groups.validate(d.p, d.k)
    if not 0 <= ell < groups.n_predictor_groups:
        raise IndexError(f"predictor group {ell} out of range")
    idx = list(groups.predictor_groups[ell])
    p_l = len(idx)
    sq_pl = math.sqrt(p_l)
    lam1 = (1.0 - cfg.alpha) * cfg.lam
    budget = lam1 * sq_pl
    w = modifier_weights(groups, d.k, cfg.weight_mode)

    r = d.y - predict(d, coef)
    Xl = d.X[:, idx]
    th = coef.theta[idx, :]
    s = r + Xl @ coef.beta[idx]
    if d.k and th.any():
        s = s + np.einsum("ij,ij->i", Xl, d.Z @ th.T)
    A = Xl.T @ s / d.n
    joint_stat = float(np.linalg.norm(A))
    Xs = Xl * s[:, None]
    entries = []
    ok = joint_stat <= budget
    for g, cols in enumerate(groups.modifier_groups):
        v = (Xs.T @ d.Z[:, list(cols)]) / d.n
        stat = float(
            np.linalg.norm(soft_threshold(v, cfg.alpha * cfg.lam))
        )
        thr = budget * (1.0 + float(w[g]))
        entries.append((g, stat, thr))
        ok = ok and stat <= thr
    return ScreenReport(
        group_index=ell,
        joint_stat=joint_stat,
        joint_threshold=budget,
        modifier_stats=tuple(entries),
        decision="all-zero" if ok else "beta-only-candidate",
    )


def lambda_max(
    d: Dataset,
    groups: GroupSpec | None = None,
    alpha: float = 0.5,
    weight_mode: str = "consistent",
) -> float:
    """Smallest penalty level at which the all-zero coefficient set (with
    least-squares intercepts) is optimal.

    Solved exactly per predictor group: the group's zero certificate

        ||A_l||^2 + sum_g max(||S_{alpha lam}(V_g)|| - w_g c lam, 0)^2
            <= (c lam)^2,      c = (1 - alpha) sqrt(p_l)

    is monotone in lam; the crossing is bracketed by the closed-form
    single-constraint thresholds and then bisected to relative 1e-12.
    """
    if groups is None:
        groups = singleton_groups(d.p, d.k)
    groups.validate(d.p, d.k)
    if not 0.0 <= alpha < 1.0:
        raise ValueError(
            "lambda_max requires alpha in [0, 1): at alpha = 1 main effects "
            "are unpenalised and no penalty level zeroes them"
        )
    w = modifier_weights(groups, d.k, weight_mode)

    design = np.column_stack([np.ones(d.n), d.Z])
    r0 = d.y - design @ (np.linalg.pinv(design) @ d.y)

    lam_needed = 0.0
    for idx in groups.predictor_groups:
        li = list(idx)
        p_l = len(li)
        c = (1.0 - alpha) * math.sqrt(p_l)
        Xl = d.X[:, li]
        A = Xl.T @ r0 / d.n
        a_norm = float(np.linalg.norm(A))
        V = [
            ((Xl * r0[:, None]).T @ d.Z[:, list(cols)] / d.n).ravel()
            for cols in groups.modifier_groups
        ]

        def q(lam: float) -> float:
            tot = a_norm**2 - (c * lam) ** 2
            for g, v in enumerate(V):
                sv = soft_threshold(v, alpha * lam)
                h = max(
                    float(np.linalg.norm(sv)) - float(w[g]) * c * lam, 0.0
                )
                tot += h * h
            return tot

        lo = a_norm / c
        for g, v in enumerate(V):
            lo = max(
                lo,
                screen_stats_threshold_crossing(v, alpha, (1.0 + float(w[g])) * c),
            )
        if lo == 0.0:
            continue
        if q(lo) <= 0.0:
            lam_star = lo
        else:
            hi = lo
            for _ in range(200):
                hi *= 2.0
                if q(hi) <= 0.0:
                    break
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if q(mid) <= 0.0:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-13 * hi:
                    break
            lam_star = hi
        lam_needed = max(lam_needed, lam_star)
    return lam_needed
