"""Gain-ratio decision tree (C4.5 style, no error-based pruning).

Numeric attributes split binarily at midpoints between consecutive
distinct values (``x <= t`` left); nominal attributes split multiway.
Among candidate splits whose information gain is at least the average
gain, the highest gain ratio wins; ties go to the lower attribute index
and then the lower threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from ..core import RiskLevel
from ..dataset import MiningDataset, is_nominal_value


class LearnerError(ValueError):
    pass


def entropy(class_counts: Sequence[float]) -> float:
    counts = np.asarray(class_counts, dtype=float)
    if (counts < 0).any():
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty distribution")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Entropy of each row of a (m, k) count matrix; empty rows give 0."""
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1)), 0.0)
    return -(p * logs).sum(axis=1)


def class_order(labels) -> list:
    """Distinct class labels in canonical order (severity for RiskLevel, else sorted)."""
    distinct = set(labels)
    if all(isinstance(v, RiskLevel) for v in distinct):
        return sorted(distinct)
    return sorted(distinct, key=lambda v: (str(type(v)), v))


def majority(counts: Sequence[int], classes: Sequence) -> Any:
    """Most frequent class; ties go to the riskier level for RiskLevel classes, else the lower index."""
    best = max(counts)
    tied = [c for c, n in zip(classes, counts) if n == best]
    if all(isinstance(c, RiskLevel) for c in tied):
        return max(tied)
    return tied[0]


@dataclass
class Leaf:
    label: Any
    support: int
    distribution: dict

    def to_json(self):
        return {"leaf": _label_json(self.label), "support": self.support,
                "distribution": {_label_json(k): v for k, v in self.distribution.items()}}


@dataclass
class Split:
    attribute: str
    threshold: Optional[float]  # None for a nominal split
    children: dict  # numeric: {"<=": node, ">": node}; nominal: {value: node}
    fallback: Any  # label for nominal values not seen in training
    support: int = 0

    def to_json(self):
        if self.threshold is not None:
            return {"attribute": self.attribute, "threshold": self.threshold,
                    "le": self.children["<="].to_json(), "gt": self.children[">"].to_json()}
        return {"attribute": self.attribute,
                "branches": [{"value": _label_json(v), "node": c.to_json()}
                             for v, c in self.children.items()],
                "fallback": _label_json(self.fallback)}


Node = Union[Leaf, Split]


def _label_json(v):
    return v.label if isinstance(v, RiskLevel) else v


@dataclass
class DecisionTree:
    root: Node
    attributes: tuple[str, ...]
    class_column: str
    classes: tuple = field(default=())

    def _route(self, values: dict) -> Leaf:
        node = self.root
        while isinstance(node, Split):
            x = values[node.attribute]
            if node.threshold is not None:
                node = node.children["<=" if x <= node.threshold else ">"]
            elif x in node.children:
                node = node.children[x]
            else:
                return Leaf(node.fallback, 0, {})
        return node

    def leaf_for(self, row: dict) -> Leaf:
        return self._route(row)

    def predict(self, row: dict):
        return self._route(row).label

    def leaves(self) -> list[Leaf]:
        out = []

        def walk(node):
            if isinstance(node, Leaf):
                out.append(node)
            else:
                for child in node.children.values():
                    walk(child)
        walk(self.root)
        return out

    @property
    def depth(self) -> int:
        def d(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(d(c) for c in node.children.values())
        return d(self.root)

    def paths(self) -> list[tuple[str, Leaf]]:
        """(condition text, leaf) for every leaf, conditions joined by AND."""
        out = []

        def walk(node, conds):
            if isinstance(node, Leaf):
                out.append((" AND ".join(conds) or "TRUE", node))
                return
            for key, child in node.children.items():
                if node.threshold is not None:
                    conds2 = conds + [f"{node.attribute} {key} {node.threshold:g}"]
                else:
                    conds2 = conds + [f"{node.attribute} = {_label_json(key)}"]
                walk(child, conds2)
        walk(self.root, [])
        return out

    def render(self) -> str:
        lines = []

        def leaf_text(leaf):
            return f"{_label_json(leaf.label)} ({leaf.support})"

        def walk(node, indent):
            if isinstance(node, Leaf):
                lines.append("  " * indent + leaf_text(node))
                return
            for key, child in node.children.items():
                if node.threshold is not None:
                    head = f"{node.attribute} {key} {node.threshold:g}"
                else:
                    head = f"{node.attribute} = {_label_json(key)}"
                pad = "  " * indent
                if isinstance(child, Leaf):
                    lines.append(f"{pad}{head}: {leaf_text(child)}")
                else:
                    lines.append(f"{pad}{head}")
                    walk(child, indent + 1)
        walk(self.root, 0)
        return "\n".join(lines) + "\n"

    def to_json(self):
        return {"class": self.class_column, "attributes": list(self.attributes),
                "root": self.root.to_json()}


@dataclass(frozen=True)
class _Candidate:
    attr_index: int
    threshold: Optional[float]
    gain: float
    ratio: float


def _numeric_candidates(x: np.ndarray, y: np.ndarray, k: int, min_leaf: int, base: float):
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), ys] = 1
    left = np.cumsum(onehot, axis=0)[:-1]
    cut = np.nonzero(xs[1:] != xs[:-1])[0]  # split after position cut
    nl = cut + 1
    ok = (nl >= min_leaf) & (n - nl >= min_leaf)
    cut, nl = cut[ok], nl[ok]
    if not len(cut):
        return []
    lc = left[cut]
    rc = left[-1] + onehot[-1] - lc
    wl, wr = nl / n, (n - nl) / n
    gains = base - wl * _entropy_rows(lc) - wr * _entropy_rows(rc)
    split_info = -(wl * np.log2(wl) + wr * np.log2(wr))
    thresholds = (xs[cut] + xs[cut + 1]) / 2.0
    return list(zip(thresholds.tolist(), gains.tolist(), (gains / split_info).tolist()))


def _nominal_candidate(x: list, y: np.ndarray, k: int, min_leaf: int, base: float):
    groups: dict = {}
    for v, c in zip(x, y):
        groups.setdefault(v, np.zeros(k))[c] += 1
    if sum(1 for g in groups.values() if g.sum() >= min_leaf) < 2:
        return None
    n = len(y)
    counts = np.array(list(groups.values()))
    w = counts.sum(axis=1) / n
    gain = base - float((w * _entropy_rows(counts)).sum())
    split_info = float(-(w * np.log2(w)).sum())
    return gain, gain / split_info


def _best_split(columns, nominal, y, k, min_leaf):
    base = float(_entropy_rows(np.bincount(y, minlength=k)[None, :].astype(float))[0])
    cands: list[_Candidate] = []
    for ai, col in enumerate(columns):
        if nominal[ai]:
            res = _nominal_candidate(col, y, k, min_leaf, base)
            if res is not None:
                cands.append(_Candidate(ai, None, *res))
        else:
            for t, g, r in _numeric_candidates(col, y, k, min_leaf, base):
                cands.append(_Candidate(ai, t, g, r))
    cands = [c for c in cands if c.gain > 1e-12]
    if not cands:
        return None
    mean_gain = math.fsum(c.gain for c in cands) / len(cands)
    eligible = [c for c in cands if c.gain >= mean_gain - 1e-12]
    # Highest ratio; ties to lower attribute index then lower threshold.
    return min(eligible, key=lambda c: (-round(c.ratio, 12), c.attr_index,
                                        -math.inf if c.threshold is None else c.threshold))


def learn_tree(dataset: MiningDataset, min_leaf: int = 2, max_depth: int = 12) -> DecisionTree:
    if dataset.class_column is None:
        raise LearnerError("dataset has no class column")
    if not len(dataset):
        raise LearnerError("cannot learn a tree from an empty dataset")
    attrs = dataset.attributes
    if not attrs:
        raise LearnerError("dataset has no attributes")
    labels = dataset.column(dataset.class_column)
    if any(v is None for v in labels):
        raise LearnerError("class column has missing values")
    if not all(is_nominal_value(v) for v in labels):
        raise LearnerError(f"class column {dataset.class_column!r} must be nominal")
    classes = class_order(labels)
    index = {c: i for i, c in enumerate(classes)}
    y_all = np.array([index[v] for v in labels], dtype=int)
    nominal = [dataset.is_nominal(a) for a in attrs]
    raw = []
    for a, nom in zip(attrs, nominal):
        col = dataset.column(a)
        if any(v is None for v in col):
            raise LearnerError(f"attribute {a!r} has missing values")
        raw.append(col if nom else np.asarray(col, dtype=float))
    k = len(classes)

    def leaf(rows):
        counts = np.bincount(y_all[rows], minlength=k)
        dist = {classes[i]: int(n) for i, n in enumerate(counts) if n}
        return Leaf(majority(counts.tolist(), classes), int(len(rows)), dist)

    def grow(rows: np.ndarray, depth: int) -> Node:
        y = y_all[rows]
        if depth >= max_depth or len(rows) < 2 * min_leaf or (y == y[0]).all():
            return leaf(rows)
        cols = [[col[i] for i in rows] if nom else col[rows] for col, nom in zip(raw, nominal)]
        best = _best_split(cols, nominal, y, k, min_leaf)
        if best is None:
            return leaf(rows)
        name = attrs[best.attr_index]
        col = cols[best.attr_index]
        fallback = leaf(rows).label
        if best.threshold is not None:
            mask = col <= best.threshold
            children = {"<=": grow(rows[mask], depth + 1), ">": grow(rows[~mask], depth + 1)}
        else:
            values = class_order(col) if all(isinstance(v, RiskLevel) for v in col) else sorted(set(col), key=str)
            children = {}
            for v in values:
                sub = rows[np.array([c == v for c in col])]
                children[v] = grow(sub, depth + 1)
        return Split(name, best.threshold, children, fallback, int(len(rows)))

    root = grow(np.arange(len(dataset)), 0)
    return DecisionTree(root, tuple(attrs), dataset.class_column, tuple(classes))


def rows_as_dicts(dataset: MiningDataset) -> list[dict]:
    cols = dataset.columns
    return [dict(zip(cols, row)) for row in dataset.rows]


def training_accuracy(tree: DecisionTree, dataset: MiningDataset) -> float:
    rows = rows_as_dicts(dataset)
    hits = sum(tree.predict(r) == r[dataset.class_column] for r in rows)
    return hits / len(rows)
