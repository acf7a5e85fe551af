"""Ordinary least squares, optionally one model per group (stand-in for model trees)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import RiskLevel
from ..dataset import MiningDataset
from .tree import LearnerError, class_order


class RankDeficiencyError(LearnerError):
    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: {', '.join(columns)}")


@dataclass(frozen=True)
class LinearModel:
    target: str
    coefficients: dict  # attribute -> slope
    intercept: float
    residual_se: float
    n: int

    def predict(self, row: dict) -> float:
        return self.intercept + sum(b * row[a] for a, b in self.coefficients.items())

    def to_json(self):
        return {"target": self.target, "intercept": self.intercept,
                "coefficients": dict(self.coefficients),
                "residual_se": self.residual_se, "n": self.n}

    def render(self) -> str:
        terms = " ".join(f"{'+' if b >= 0 else '-'} {abs(b):.6g}*{a}"
                         for a, b in self.coefficients.items())
        return f"{self.target} = {self.intercept:.6g} {terms}".rstrip()


def _collinear(X: np.ndarray, names: Sequence[str], tol: float) -> list[str]:
    """Columns (intercept included) lying in the span of the columns before them."""
    bad = []
    kept = np.empty((X.shape[0], 0))
    for j, name in enumerate(names):
        col = X[:, [j]]
        if kept.shape[1]:
            coef, *_ = np.linalg.lstsq(kept, col, rcond=None)
            resid = col - kept @ coef
        else:
            resid = col
        if np.linalg.norm(resid) <= tol * max(1.0, np.linalg.norm(col)):
            bad.append(name)
        else:
            kept = np.hstack([kept, col])
    return bad


def _fit(X: np.ndarray, y: np.ndarray, names: list[str], target: str) -> LinearModel:
    n, p = X.shape
    design = np.hstack([np.ones((n, 1)), X])
    labels = ["(intercept)", *names]
    if n < p + 1:
        raise LearnerError(f"need at least {p + 1} rows to fit {p} attributes, got {n}")
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    tol = 1e-10
    if diag.min() <= tol * max(1.0, diag.max()):
        bad = _collinear(design, labels, 1e-9)
        raise RankDeficiencyError(bad or labels)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - design @ beta
    dof = n - (p + 1)
    se = float(np.sqrt(resid @ resid / dof)) if dof > 0 else 0.0
    return LinearModel(target, {a: float(b) for a, b in zip(names, beta[1:])},
                       float(beta[0]), se, n)


def fit_linear(dataset: MiningDataset, target_column: str,
               group_by: Optional[str] = None,
               attributes: Optional[Sequence[str]] = None):
    """Least-squares fit of ``target_column`` on numeric attributes.

    Returns a LinearModel, or a dict ``group value -> LinearModel`` when
    ``group_by`` is given.
    """
    if not len(dataset):
        raise LearnerError("cannot fit an empty dataset")
    skip = {target_column, group_by, dataset.class_column}
    if attributes is None:
        attributes = [c for c in dataset.columns
                      if c not in skip and not dataset.is_nominal(c)]
    attributes = list(attributes)
    for a in (target_column, *attributes):
        if dataset.is_nominal(a):
            raise LearnerError(f"column {a!r} is not numeric")
    X = np.asarray([dataset.column(a) for a in attributes], dtype=float).T.reshape(len(dataset), -1)
    y = np.asarray(dataset.column(target_column), dtype=float)
    if group_by is None:
        return _fit(X, y, attributes, target_column)
    keys = dataset.column(group_by)
    models = {}
    for g in class_order(keys):
        mask = np.array([k == g for k in keys])
        models[g] = _fit(X[mask], y[mask], attributes, target_column)
    return models


def normal_equation_solve(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(X'X)^-1 X'y with an intercept column prepended."""
    design = np.hstack([np.ones((X.shape[0], 1)), X])
    return np.linalg.solve(design.T @ design, design.T @ y)


def group_label(g):
    return g.label if isinstance(g, RiskLevel) else g
