"""Selection quality metrics.

Scoring is at the variable level: a predictor counts as selected when its
main effect or any of its interactions is nonzero, a modifier when it
appears in any interaction. The scored universe is the p predictors plus
the modifiers, where the columns of one categorical modifier can either be
pooled into a single item (dummy_mode="grouped", the default) or counted
one by one (dummy_mode="per-dummy").
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .model import CoefficientSet

__all__ = [
    "SELECTION_TOL",
    "DUMMY_MODES",
    "PERCENT_CATEGORIES",
    "SelectionTruth",
    "selected_mains",
    "selected_modifiers",
    "selected_interactions",
    "ConfusionCounts",
    "variable_confusion",
    "percent_selected",
    "roc_points",
    "staircase_fpr",
]

SELECTION_TOL = 1e-10
DUMMY_MODES = ("grouped", "per-dummy")

PERCENT_CATEGORIES = (
    "relevant main",
    "relevant continuous modifier",
    "relevant categorical modifier",
    "relevant modifier",
    "irrelevant main",
    "irrelevant continuous modifier",
    "irrelevant categorical modifier",
    "irrelevant modifier",
)


@dataclass(frozen=True)
class SelectionTruth:
    """Ground truth of a generating model: 0-based relevant predictor
    indices and (predictor, modifier) interaction pairs."""

    main_idx: tuple[int, ...]
    interaction_idx: tuple[tuple[int, int], ...]

    @property
    def modifier_idx(self) -> frozenset[int]:
        return frozenset(k for _, k in self.interaction_idx)


def selected_mains(coef: CoefficientSet, tol: float = SELECTION_TOL) -> np.ndarray:
    """Boolean mask over predictors: main effect or any interaction active."""
    return (np.abs(coef.beta) > tol) | (np.abs(coef.theta) > tol).any(axis=1)


def selected_modifiers(coef: CoefficientSet, tol: float = SELECTION_TOL) -> np.ndarray:
    """Boolean mask over modifiers: appears in any interaction."""
    return (np.abs(coef.theta) > tol).any(axis=0)


def selected_interactions(coef: CoefficientSet, tol: float = SELECTION_TOL) -> np.ndarray:
    return np.abs(coef.theta) > tol


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def fdr(self) -> float:
        """False discovery rate; 0 by convention when nothing is selected."""
        if self.tp + self.fp == 0:
            return 0.0
        return self.fp / (self.tp + self.fp)

    @property
    def sensitivity(self) -> float:
        if self.tp + self.fn == 0:
            return 1.0
        return self.tp / (self.tp + self.fn)

    @property
    def specificity(self) -> float:
        if self.tn + self.fp == 0:
            return 1.0
        return self.tn / (self.tn + self.fp)

    @property
    def fpr(self) -> float:
        return 1.0 - self.specificity

    @property
    def geo_mean(self) -> float:
        return sqrt(self.sensitivity * self.specificity)


def _modifier_items(
    k: int,
    z_dummy_groups: tuple[tuple[int, ...], ...],
    dummy_mode: str,
) -> list[tuple[int, ...]]:
    """The modifier universe as lists of underlying columns per item."""
    if dummy_mode not in DUMMY_MODES:
        raise ValueError(f"dummy_mode must be one of {DUMMY_MODES}, got {dummy_mode!r}")
    if dummy_mode == "per-dummy" or not z_dummy_groups:
        return [(kk,) for kk in range(k)]
    grouped = set()
    for cols in z_dummy_groups:
        grouped.update(cols)
    items: list[tuple[int, ...]] = [
        (kk,) for kk in range(k) if kk not in grouped
    ]
    items.extend(tuple(cols) for cols in z_dummy_groups)
    return items


def variable_confusion(
    coef: CoefficientSet,
    truth: SelectionTruth,
    z_dummy_groups: tuple[tuple[int, ...], ...] = (),
    dummy_mode: str = "grouped",
    tol: float = SELECTION_TOL,
) -> ConfusionCounts:
    """Confusion counts over the variable universe (predictors + modifiers)."""
    p, k = coef.theta.shape
    main_sel = selected_mains(coef, tol)
    mod_sel = selected_modifiers(coef, tol)
    rel_mods = truth.modifier_idx

    tp = fp = tn = fn = 0
    rel_main = set(truth.main_idx)
    for j in range(p):
        sel, rel = bool(main_sel[j]), j in rel_main
        tp += sel and rel
        fp += sel and not rel
        tn += (not sel) and (not rel)
        fn += (not sel) and rel
    for cols in _modifier_items(k, z_dummy_groups, dummy_mode):
        sel = bool(mod_sel[list(cols)].any())
        rel = any(c in rel_mods for c in cols)
        tp += sel and rel
        fp += sel and not rel
        tn += (not sel) and (not rel)
        fn += (not sel) and rel
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _fraction(mask: np.ndarray, cols: list[int]) -> float | None:
    if not cols:
        return None
    return float(mask[cols].mean())


def percent_selected(
    coef: CoefficientSet,
    truth: SelectionTruth,
    z_continuous: tuple[int, ...] = (),
    z_dummy_groups: tuple[tuple[int, ...], ...] = (),
    tol: float = SELECTION_TOL,
) -> dict[str, float]:
    """Fraction of each variable class that the fit selects.

    Classes with no members are left out of the result. Modifier columns
    outside both z_continuous and z_dummy_groups fall into the plain
    "modifier" class.
    """
    p, k = coef.theta.shape
    main_sel = selected_mains(coef, tol)
    mod_sel = selected_modifiers(coef, tol)
    rel_main = set(truth.main_idx)
    rel_mods = truth.modifier_idx

    cont = set(z_continuous)
    cat = {c for cols in z_dummy_groups for c in cols}
    other = [kk for kk in range(k) if kk not in cont and kk not in cat]

    out: dict[str, float] = {}

    def put(name: str, value: float | None) -> None:
        if value is not None:
            out[name] = value

    put("relevant main", _fraction(main_sel, [j for j in range(p) if j in rel_main]))
    put(
        "irrelevant main",
        _fraction(main_sel, [j for j in range(p) if j not in rel_main]),
    )
    put(
        "relevant continuous modifier",
        _fraction(mod_sel, [c for c in sorted(cont) if c in rel_mods]),
    )
    put(
        "irrelevant continuous modifier",
        _fraction(mod_sel, [c for c in sorted(cont) if c not in rel_mods]),
    )
    put(
        "relevant categorical modifier",
        _fraction(mod_sel, [c for c in sorted(cat) if c in rel_mods]),
    )
    put(
        "irrelevant categorical modifier",
        _fraction(mod_sel, [c for c in sorted(cat) if c not in rel_mods]),
    )
    put("relevant modifier", _fraction(mod_sel, [c for c in other if c in rel_mods]))
    put(
        "irrelevant modifier",
        _fraction(mod_sel, [c for c in other if c not in rel_mods]),
    )
    return out


def roc_points(
    coefs,
    truth: SelectionTruth,
    z_dummy_groups: tuple[tuple[int, ...], ...] = (),
    dummy_mode: str = "grouped",
    tol: float = SELECTION_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """(TPR, FPR) per path point, in path order."""
    tpr = np.empty(len(coefs))
    fpr = np.empty(len(coefs))
    for i, coef in enumerate(coefs):
        cc = variable_confusion(coef, truth, z_dummy_groups, dummy_mode, tol)
        tpr[i] = cc.sensitivity
        fpr[i] = cc.fpr
    return tpr, fpr


def staircase_fpr(
    tpr: np.ndarray, fpr: np.ndarray, grid: np.ndarray
) -> np.ndarray:
    """Best (smallest) FPR attaining each target TPR level.

    For each t in grid: min FPR over path points with TPR >= t. The
    select-everything endpoint (TPR 1, FPR 1) is always included so the
    curve is defined on all of [0, 1].
    """
    tpr = np.append(np.asarray(tpr, dtype=float), 1.0)
    fpr = np.append(np.asarray(fpr, dtype=float), 1.0)
    out = np.empty(len(grid))
    for i, t in enumerate(np.asarray(grid, dtype=float)):
        mask = tpr >= t
        out[i] = fpr[mask].min() if mask.any() else 1.0
    return out
