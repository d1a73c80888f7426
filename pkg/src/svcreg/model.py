"""Model evaluation: coefficients, prediction, partial residuals, and the
penalized objective.

Objective:

    J(beta0, theta0, beta, Theta)
      = (1/2N) sum_i r_i^2
        + (1-alpha)*lam * sum_l sqrt(p_l) * ( ||(beta_[l], vec Theta_[l])||_2
                                              + sum_g w_g ||vec Theta_[l][g]||_2 )
        + alpha*lam * sum_{j,k} |theta_jk|

with r_i = y_i - beta0 - z_i theta0 - sum_j (beta_j + theta_j z_i^T) x_ij.

The modifier-group weight w_g depends on weight_mode:
  consistent     w_g = sqrt(p_g) / sqrt(1+K)   (subgradient-consistent with the
                                                zero-block tests the solver uses)
  paper-literal  w_g = sqrt(p_g)
  unit           w_g = 1                        (specializes to the pliable Lasso
                                                when every predictor is its own
                                                group and modifiers form one block)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, GroupSpec

__all__ = [
    "CoefficientSet",
    "FitConfig",
    "modifier_weights",
    "predict",
    "residual",
    "partial_residual_main",
    "partial_residual_modifier",
    "penalty_value",
    "objective_value",
    "unstandardize_coef",
]

WEIGHT_MODES = ("consistent", "paper-literal", "unit")


@dataclass(frozen=True)
class CoefficientSet:
    """Fitted coefficients: intercept, modifier main effects, predictor main
    effects, and the p-by-K interaction matrix."""

    beta0: float
    theta0: np.ndarray
    beta: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2:
            theta = theta.reshape(len(self.beta), -1)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, p: int, k: int) -> "CoefficientSet":
        return cls(0.0, np.zeros(k), np.zeros(p), np.zeros((p, k)))

    def copy(self) -> "CoefficientSet":
        return CoefficientSet(
            self.beta0, self.theta0.copy(), self.beta.copy(), self.theta.copy()
        )


@dataclass(frozen=True)
class FitConfig:
    """Solver configuration.

    lam, alpha: penalty level and L1/L2 mix (alpha=0 pure group, 1 pure L1).
    tol: outer convergence on |J_old - J_new|.
    inner_tol / max_inner_iter: per-block stopping for the coordinate search
    and the proximal refinement.
    """

    lam: float = 1.0
    alpha: float = 0.5
    weight_mode: str = "consistent"
    tol: float = 1e-5
    max_outer_iter: int = 1000
    max_inner_iter: int = 200
    inner_tol: float = 1e-7

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(
                f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}"
            )
        if self.tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")


def modifier_weights(gs: GroupSpec, k: int, weight_mode: str) -> np.ndarray:
    """w_g for every modifier group, by mode (see module docstring)."""
    sizes = np.array([len(g) for g in gs.modifier_groups], dtype=float)
    if weight_mode == "consistent":
        return np.sqrt(sizes) / np.sqrt(1.0 + k)
    if weight_mode == "paper-literal":
        return np.sqrt(sizes)
    if weight_mode == "unit":
        return np.ones_like(sizes)
    raise ValueError(f"unknown weight_mode {weight_mode!r}")


def predict(d: Dataset, c: CoefficientSet) -> np.ndarray:
    """yhat_i = beta0 + z_i theta0 + sum_j (beta_j + theta_j z_i^T) x_ij."""
    _check_dims(d, c)
    yhat = c.beta0 + d.X @ c.beta
    if d.k:
        yhat = yhat + d.Z @ c.theta0
        # sum_j x_ij * (Theta z_i)_j done row-wise
        yhat = yhat + np.einsum("ij,ij->i", d.X, d.Z @ c.theta.T)
    return yhat


def residual(d: Dataset, c: CoefficientSet) -> np.ndarray:
    return d.y - predict(d, c)


def _check_dims(d: Dataset, c: CoefficientSet) -> None:
    if c.beta.shape[0] != d.p or c.theta.shape != (d.p, d.k) or c.theta0.shape[0] != d.k:
        raise ValueError(
            f"coefficient shapes {c.beta.shape}/{c.theta.shape} do not match "
            f"data (p={d.p}, K={d.k})"
        )


def group_contribution(
    d: Dataset, c: CoefficientSet, idx: tuple[int, ...]
) -> np.ndarray:
    """The fitted contribution of predictor columns `idx`:
    sum_{j in idx} (beta_j + theta_j z_i^T) x_ij."""
    Xl = d.X[:, idx]
    out = Xl @ c.beta[list(idx)]
    if d.k:
        out = out + np.einsum("ij,ij->i", Xl, d.Z @ c.theta[list(idx), :].T)
    return out


def partial_residual_main(
    d: Dataset, c: CoefficientSet, gs: GroupSpec, ell: int
) -> np.ndarray:
    """r^(-l): residual with group l's main-and-interaction contribution left
    out. Intercept terms are subtracted so the working residual matches what
    the intercept refit step sees."""
    if not 0 <= ell < gs.n_predictor_groups:
        raise IndexError(f"predictor group {ell} out of range")
    return residual(d, c) + group_contribution(d, c, gs.predictor_groups[ell])


def partial_residual_modifier(
    d: Dataset, c: CoefficientSet, gs: GroupSpec, ell: int, g: int
) -> np.ndarray:
    """r^(-l)(-g): additionally keeps group l's main effect and its
    interactions with modifier groups m != g inside the fit."""
    if not 0 <= g < gs.n_modifier_groups:
        raise IndexError(f"modifier group {g} out of range")
    r = partial_residual_main(d, c, gs, ell)
    idx = list(gs.predictor_groups[ell])
    Xl = d.X[:, idx]
    # subtract back everything of group l except the g-interactions
    theta_l = c.theta[idx, :].copy()
    theta_l[:, list(gs.modifier_groups[g])] = 0.0
    contrib = Xl @ c.beta[idx]
    if d.k:
        contrib = contrib + np.einsum("ij,ij->i", Xl, d.Z @ theta_l.T)
    return r - contrib


def penalty_value(
    c: CoefficientSet, gs: GroupSpec, cfg: FitConfig, k: int | None = None
) -> float:
    """lam * P*_alpha(beta, Theta) for the configured weight mode."""
    if k is None:
        k = c.theta.shape[1]
    lam1 = (1.0 - cfg.alpha) * cfg.lam
    w = modifier_weights(gs, k, cfg.weight_mode)
    total = 0.0
    for idx in gs.predictor_groups:
        li = list(idx)
        bl = c.beta[li]
        tl = c.theta[li, :]
        joint = np.sqrt(bl @ bl + (tl * tl).sum())
        grp = sum(
            w[g] * np.linalg.norm(tl[:, list(gidx)])
            for g, gidx in enumerate(gs.modifier_groups)
        )
        total += np.sqrt(len(idx)) * (joint + grp)
    return lam1 * total + cfg.alpha * cfg.lam * np.abs(c.theta).sum()


def objective_value(
    d: Dataset, c: CoefficientSet, gs: GroupSpec, cfg: FitConfig
) -> float:
    r = residual(d, c)
    return float(0.5 * (r @ r) / d.n + penalty_value(c, gs, cfg, k=d.k))


def unstandardize_coef(c: CoefficientSet, rec) -> CoefficientSet:
    """Map coefficients fitted on standardized data back to original units,
    so that predictions agree up to the removed y mean.

    With x_j = (x*_j - m_j)/s_j and z_k = (z*_k - u_k)/v_k, expanding the
    fitted surface in the starred (original) variables gives the returns
    below; dummy columns have u_k = 0, v_k = 1 and pass through.
    """
    s = rec.x_scale
    m = rec.x_mean
    v = rec.z_scale
    u = rec.z_mean
    theta = c.theta / (s[:, None] * v[None, :])
    beta = c.beta / s - (c.theta * (u / v)[None, :]).sum(axis=1) / s
    theta0 = c.theta0 / v - (c.theta * (m / s)[:, None]).sum(axis=0) / v
    beta0 = (
        rec.y_mean
        + c.beta0
        - float(c.theta0 @ (u / v))
        - float(c.beta @ (m / s))
        + float((c.theta * np.outer(m / s, u / v)).sum())
    )
    return CoefficientSet(beta0=beta0, theta0=theta0, beta=beta, theta=theta)
