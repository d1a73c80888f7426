"""Numerical kernels shared by the solvers: soft-thresholding, closed-form
block solutions, screening statistics, the nested proximal map of the
hierarchical penalty, and a bounded univariate minimizer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "soft_threshold",
    "orthonormal_group_beta",
    "single_predictor_beta",
    "univariate_beta_search",
    "minimize_scalar_bounded",
    "group_shrink",
    "nested_prox",
    "ScreenReport",
    "screen_stats_threshold_crossing",
]

_GOLD = 0.5 * (3.0 - math.sqrt(5.0))  # golden-section fraction


def soft_threshold(x, t: float):
    """S_t(x) = sign(x) * max(|x| - t, 0), elementwise on arrays."""
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def orthonormal_group_beta(R_l: np.ndarray, lambda1: float, p_l: int) -> np.ndarray:
    """Group soft-threshold max{1 - lambda1*sqrt(p_l)/||R_l||, 0} * R_l.

    Exact block solution when the group's columns satisfy X_l^T X_l / N = I.
    """
    nrm = np.linalg.norm(R_l)
    thr = lambda1 * math.sqrt(p_l)
    if nrm <= thr:
        return np.zeros_like(R_l)
    return (1.0 - thr / nrm) * R_l


def single_predictor_beta(x_j: np.ndarray, r: np.ndarray, lambda1: float) -> float:
    """Exact coordinate update for a singleton group:
    (N / sum x^2) * S_lambda1( (1/N) sum x_j r )."""
    ss = float(x_j @ x_j)
    if ss <= 0.0:
        raise ValueError("zero-norm predictor column")
    n = x_j.shape[0]
    return float(n / ss * soft_threshold((x_j @ r) / n, lambda1))


def minimize_scalar_bounded(f, lo: float, hi: float, xatol: float = 1e-8,
                            max_iter: int = 200) -> float:
    """Golden-section search with successive parabolic interpolation on
    [lo, hi] (the classical Brent scheme, as in R's optimize). Returns the
    approximate minimizer of a continuous unimodal f."""
    if not lo < hi:
        raise ValueError(f"invalid bracket ({lo}, {hi})")
    a, b = lo, hi
    x = w = v = a + _GOLD * (b - a)
    fx = fw = fv = f(x)
    d = e = 0.0
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        tol1 = xatol + 1e-11 * abs(x)
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            break
        use_golden = True
        if abs(e) > tol1:
            # fit a parabola through (v,fv), (w,fw), (x,fx)
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev, e = e, d
            if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if x < m else -tol1
                use_golden = False
        if use_golden:
            e = (b - x) if x < m else (a - x)
            d = _GOLD * e
        u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0 else -tol1)
        fu = f(u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x


def univariate_beta_search(objective_slice, bracket: tuple[float, float],
                           xatol: float = 1e-8) -> float:
    """Minimize one coordinate's objective slice on the given bracket,
    expanding the bracket tenfold (up to 6 times) if the minimizer lands on
    an endpoint."""
    lo, hi = bracket
    if lo >= hi:
        raise ValueError(f"invalid bracket ({lo}, {hi})")
    for _ in range(6):
        x = minimize_scalar_bounded(objective_slice, lo, hi, xatol=xatol)
        span = hi - lo
        if x - lo > 1e-6 * span and hi - x > 1e-6 * span:
            return x
        mid = 0.5 * (lo + hi)
        lo = mid - 5.0 * span
        hi = mid + 5.0 * span
    return x


def group_shrink(v: np.ndarray, t: float) -> np.ndarray:
    """max{1 - t/||v||, 0} * v, the proximal map of t*||.||_2."""
    nrm = np.linalg.norm(v)
    if nrm <= t:
        return np.zeros_like(v)
    return (1.0 - t / nrm) * v


def nested_prox(
    beta: np.ndarray,
    theta_blocks: list[np.ndarray],
    step: float,
    lam: float,
    alpha: float,
    sqrt_pl: float,
    block_weights: list[float],
):
    """Proximal map of step * [ (1-a)l*sqrt_pl*(||(b,th)|| + sum_g w_g||th_g||)
    + a*l*||th||_1 ] evaluated by nested shrinkage, leaves to root.

    The three layers form a laminar family (L1 singletons inside modifier
    blocks inside the joint block), for which the composition of their
    individual proximal maps is the exact proximal map of the sum.
    """
    lam1 = (1.0 - alpha) * lam * sqrt_pl
    thr_l1 = step * alpha * lam
    blocks = [soft_threshold(th, thr_l1) for th in theta_blocks]
    blocks = [
        group_shrink(th, step * lam1 * w) for th, w in zip(blocks, block_weights)
    ]
    sq = float(beta @ beta) + sum(float((th * th).sum()) for th in blocks)
    nrm = math.sqrt(sq)
    thr_joint = step * lam1
    if nrm <= thr_joint:
        return np.zeros_like(beta), [np.zeros_like(th) for th in blocks]
    scale = 1.0 - thr_joint / nrm
    return scale * beta, [scale * th for th in blocks]


@dataclass(frozen=True)
class ScreenReport:
    """Zero-block test statistics for one predictor group.

    decision is 'all-zero' iff joint_stat <= joint_threshold and every
    modifier stat is <= its threshold (condition (a)); 'beta-only-candidate'
    means the joint test failed or some modifier test failed, so the solver
    proceeds to the beta update and per-group zero tests.
    """

    group_index: int
    joint_stat: float
    joint_threshold: float
    modifier_stats: tuple[tuple[int, float, float], ...]
    decision: str

    @property
    def all_zero(self) -> bool:
        return self.decision == "all-zero"


def screen_stats_threshold_crossing(v: np.ndarray, alpha: float, c: float) -> float:
    """Smallest lam >= 0 with ||S_{alpha*lam}(v)||_2 <= c*lam.

    Solved exactly: with entries a_i = |v_i| sorted descending, on the
    segment where exactly m entries survive the threshold the equation
    ||S(v)||^2 = c^2 lam^2 is (m a^2 - c^2) lam^2 - 2 a S1 lam + S2 = 0
    with a = alpha, S1/S2 the running sum of a_i and a_i^2. Returns inf when
    no finite lam works (c = 0 with alpha = 0 and v != 0).
    """
    a = np.sort(np.abs(v))[::-1]
    a = a[a > 0.0]
    if a.size == 0:
        return 0.0
    if alpha == 0.0:
        nrm = math.sqrt(float(a @ a))
        return nrm / c if c > 0 else math.inf
    if c == 0.0:
        # need S_{alpha lam}(v) = 0 exactly
        return float(a[0]) / alpha
    # segment boundaries: lam in [a_{m}/alpha, a_{m-1}/alpha) keeps m entries
    s1 = np.cumsum(a)
    s2 = np.cumsum(a * a)
    m_values = np.arange(1, a.size + 1)
    for m in m_values[::-1]:
        lo = a[m] / alpha if m < a.size else 0.0
        hi = a[m - 1] / alpha
        A = m * alpha * alpha - c * c
        B = -2.0 * alpha * s1[m - 1]
        C = s2[m - 1]
        roots = []
        if A == 0.0:
            if B != 0.0:
                roots = [-C / B]
        else:
            disc = B * B - 4.0 * A * C
            if disc >= 0.0:
                sq = math.sqrt(disc)
                roots = [(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)]
        slop = 1e-9 * (1.0 + hi)
        for lam in roots:
            if lo - slop <= lam <= hi + slop and lam >= 0.0:
                return float(lam)
    # numerically the crossing sits at the point where S_{alpha lam}(v)
    # vanishes entirely
    return float(a[0]) / alpha
