"""Sequential-covering rule induction in the RIPPER mould (no optimization passes).

Classes are handled from rarest to most frequent; the most frequent class
becomes the default rule. For each class, a rule is grown on a grow split
by FOIL gain, pruned on a held-out split by (p - n) / (p + n) over
final-condition deletions, and accepted while its prune precision is no
worse than the class's base rate on that split. A class needs at least
three rows (one of them held out) before a rule for it can be accepted,
much like a minimum leaf size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from ..core import RiskLevel
from ..dataset import MiningDataset, is_nominal_value
from .tree import LearnerError, class_order, majority


@dataclass(frozen=True)
class Condition:
    attribute: str
    op: str  # "<=", ">" or "=="
    value: Any

    def holds(self, row: dict) -> bool:
        x = row[self.attribute]
        if self.op == "<=":
            return x <= self.value
        if self.op == ">":
            return x > self.value
        return x == self.value

    def __str__(self):
        v = self.value
        if isinstance(v, RiskLevel):
            v = v.label
        elif isinstance(v, float):
            v = f"{v:g}"
        return f"{self.attribute} {'=' if self.op == '==' else self.op} {v}"

    def to_json(self):
        v = self.value.label if isinstance(self.value, RiskLevel) else self.value
        return {"attribute": self.attribute, "op": self.op, "value": v}


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    label: Any
    coverage: int = 0
    correct: int = 0

    def covers(self, row: dict) -> bool:
        return all(c.holds(row) for c in self.conditions)

    @property
    def accuracy(self) -> float:
        return self.correct / self.coverage if self.coverage else 0.0

    def __str__(self):
        lhs = " AND ".join(str(c) for c in self.conditions) or "TRUE"
        label = self.label.label if isinstance(self.label, RiskLevel) else self.label
        return f"IF {lhs} THEN {label}"

    def to_json(self):
        label = self.label.label if isinstance(self.label, RiskLevel) else self.label
        return {"conditions": [c.to_json() for c in self.conditions], "label": label,
                "coverage": self.coverage, "accuracy": self.accuracy}


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    default: Rule
    class_column: str

    def first_match(self, row: dict) -> Rule:
        for rule in self.rules:
            if rule.covers(row):
                return rule
        return self.default

    def predict(self, row: dict):
        return self.first_match(row).label

    def all_rules(self) -> tuple[Rule, ...]:
        return (*self.rules, self.default)

    def render(self) -> str:
        return "".join(f"{r}  ({r.coverage}, {r.accuracy:.3f})\n" for r in self.all_rules())

    def to_json(self):
        return {"class": self.class_column, "rules": [r.to_json() for r in self.rules],
                "default": self.default.to_json()}


def _split_grow_prune(idx: np.ndarray, y: np.ndarray, prune_fraction: float):
    """Deterministic stratified split: within each class, every k-th row is held out."""
    seen: dict = {}
    grow, prune = [], []
    for i in idx:
        j = seen.get(y[i], 0)
        seen[y[i]] = j + 1
        if math.floor((j + 1) * prune_fraction) > math.floor(j * prune_fraction):
            prune.append(i)
        else:
            grow.append(i)
    return np.array(grow, dtype=int), np.array(prune, dtype=int)


class _Table:
    """Column-oriented view of the training rows used by the learner."""

    def __init__(self, dataset: MiningDataset):
        self.attrs = dataset.attributes
        self.nominal = {a: dataset.is_nominal(a) for a in self.attrs}
        self.cols = {}
        self.grid = {}
        for a in self.attrs:
            col = dataset.column(a)
            if any(v is None for v in col):
                raise LearnerError(f"attribute {a!r} has missing values")
            if self.nominal[a]:
                arr = np.empty(len(col), dtype=object)
                arr[:] = col
                self.cols[a] = arr
            else:
                arr = np.asarray(col, dtype=float)
                self.cols[a] = arr
                xs = np.unique(arr)
                self.grid[a] = (xs[1:] + xs[:-1]) / 2.0

    def mask(self, cond: Condition) -> np.ndarray:
        col = self.cols[cond.attribute]
        if cond.op == "<=":
            return col <= cond.value
        if cond.op == ">":
            return col > cond.value
        return col == cond.value

    def covers(self, conds) -> np.ndarray:
        m = np.ones(len(next(iter(self.cols.values()))), dtype=bool)
        for c in conds:
            m &= self.mask(c)
        return m


def _foil(p1, n1, base):
    with np.errstate(divide="ignore", invalid="ignore"):
        g = p1 * (np.log2(p1 / (p1 + n1)) - base)
    return np.where(p1 > 0, g, -np.inf)


def _pick(gain: np.ndarray, score: np.ndarray, last: bool) -> int:
    """Index of the best gain; ties go to the higher held-out score, then the most general."""
    top = gain.max()
    if not np.isfinite(top):
        return 0
    tied = np.flatnonzero(gain >= top - 1e-12)
    s = score[tied]
    tied = tied[s == s.max()]
    return int(tied[-1] if last else tied[0])


def _counts(col: np.ndarray, pos: np.ndarray, grid: np.ndarray):
    order = np.argsort(col, kind="stable")
    cum = np.concatenate(([0], np.cumsum(pos[order])))
    k = np.searchsorted(col[order], grid, side="right")
    p_le = cum[k]
    return p_le, k - p_le, cum[-1] - p_le, (len(col) - k) - (cum[-1] - p_le)


def _best_condition(table: _Table, idx: np.ndarray, pos: np.ndarray, base: float,
                    tie_idx: np.ndarray, tie_pos: np.ndarray):
    """Condition with the highest FOIL gain over rows ``idx``.

    Thresholds with equal gain are told apart by p - n over ``tie_idx``
    (grow and prune rows still covered), so the held-out rows decide where
    inside a gap of the grow split the cut goes.
    """
    best, best_gain = None, 1e-12
    for a in table.attrs:
        col = table.cols[a][idx]
        if table.nominal[a]:
            for v in sorted(set(col.tolist()), key=str):
                m = col == v
                p1 = int((m & pos).sum())
                g = _foil(np.array([p1]), np.array([int(m.sum()) - p1]), base)[0]
                if g > best_gain:
                    best, best_gain = Condition(a, "==", v), g
            continue
        grid = table.grid[a]
        grid = grid[(grid > col.min()) & (grid < col.max())]
        if not len(grid):
            continue
        p_le, n_le, p_gt, n_gt = _counts(col, pos, grid)
        tp_le, tn_le, tp_gt, tn_gt = _counts(table.cols[a][tie_idx], tie_pos, grid)
        g_le = _foil(p_le, n_le, base)
        g_gt = _foil(p_gt, n_gt, base)
        j_le = _pick(g_le, tp_le - tn_le, last=True)
        j_gt = _pick(g_gt, tp_gt - tn_gt, last=False)
        if g_le[j_le] >= g_gt[j_gt]:
            gain, cond = g_le[j_le], Condition(a, "<=", float(grid[j_le]))
        else:
            gain, cond = g_gt[j_gt], Condition(a, ">", float(grid[j_gt]))
        if gain > best_gain:
            best, best_gain = cond, gain
    return best


def _grow(table: _Table, y: np.ndarray, grow_idx: np.ndarray, all_idx: np.ndarray,
          target) -> list[Condition]:
    conds: list[Condition] = []
    covered, covered_all = grow_idx, all_idx
    while True:
        pos = y[covered] == target
        p0 = int(pos.sum())
        n0 = len(covered) - p0
        if n0 == 0 or p0 == 0:
            return conds
        cond = _best_condition(table, covered, pos, math.log2(p0 / (p0 + n0)),
                               covered_all, y[covered_all] == target)
        if cond is None:
            return conds
        conds.append(cond)
        covered = covered[table.mask(cond)[covered]]
        covered_all = covered_all[table.mask(cond)[covered_all]]


def _prune_value(table: _Table, y: np.ndarray, idx: np.ndarray, conds, target) -> Optional[float]:
    hit = table.covers(conds)[idx]
    p = int((hit & (y[idx] == target)).sum())
    n = int(hit.sum()) - p
    return None if p + n == 0 else (p - n) / (p + n)


def learn_rules(dataset: MiningDataset, prune_fraction: float = 1 / 3,
                max_rules: int = 64) -> RuleSet:
    if dataset.class_column is None:
        raise LearnerError("dataset has no class column")
    if not len(dataset):
        raise LearnerError("cannot learn rules from an empty dataset")
    if not 0.0 < prune_fraction < 1.0:
        raise LearnerError("prune_fraction must lie in (0, 1)")
    cls = dataset.class_column
    labels = dataset.column(cls)
    if any(v is None for v in labels) or not all(is_nominal_value(v) for v in labels):
        raise LearnerError(f"class column {cls!r} must be nominal and complete")
    table = _Table(dataset)
    y = np.empty(len(labels), dtype=object)
    y[:] = labels

    classes = class_order(labels)
    freq = {c: labels.count(c) for c in classes}
    # Rarest first; equal frequencies put the higher-ordered label first.
    ordered = sorted(classes, key=lambda c: (freq[c], -classes.index(c)))
    remaining = np.arange(len(labels))
    learned: list[tuple[tuple[Condition, ...], Any]] = []

    for target in ordered[:-1]:
        while len(learned) < max_rules:
            if not (y[remaining] == target).any():
                break
            grow_idx, prune_idx = _split_grow_prune(remaining, y, prune_fraction)
            if not len(prune_idx):
                prune_idx = remaining
            conds = _grow(table, y, grow_idx, remaining, target)
            if not conds:
                break
            # Keep the prefix with the best prune value (shorter wins ties).
            best_k, best_v = None, -math.inf
            for k in range(1, len(conds) + 1):
                v = _prune_value(table, y, prune_idx, conds[:k], target)
                if v is not None and v > best_v + 1e-12:
                    best_k, best_v = k, v
            if best_k is None:
                break
            conds = conds[:best_k]
            base_rate = float((y[prune_idx] == target).mean())
            if base_rate == 0.0 or (best_v + 1) / 2 < base_rate:
                break
            hit = table.covers(conds)[remaining]
            if not hit.any():
                break
            learned.append((tuple(conds), target))
            remaining = remaining[~hit]

    # Coverage and accuracy in decision-list order over the full dataset.
    unclaimed = np.ones(len(labels), dtype=bool)
    rules = []
    for conds, label in learned:
        hit = unclaimed & table.covers(conds)
        unclaimed &= ~hit
        rules.append(Rule(conds, label, int(hit.sum()), int((hit & (y == label)).sum())))
    left = y[unclaimed].tolist()
    if left:
        default_label = majority([left.count(c) for c in classes], classes)
    else:
        default_label = ordered[-1]
    default = Rule((), default_label, len(left), sum(1 for v in left if v == default_label))
    return RuleSet(tuple(rules), default, cls)


def rule_accuracy(ruleset: RuleSet, dataset: MiningDataset) -> float:
    rows = [dict(zip(dataset.columns, r)) for r in dataset.rows]
    return float(np.mean([ruleset.predict(r) == r[dataset.class_column] for r in rows]))
