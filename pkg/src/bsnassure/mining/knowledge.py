"""Mining each goal-model subtree and confronting the result with property verdicts.

A dissonance is raised at a node when

* a property bound to the node is Violated and some mined region (a rule,
  the default rule, or a tree leaf) with non-zero support covers cycles in
  which the violation occurred, or
* a property bound to the node was never exercised by the trace
  (nothing was checked), so its verified bound says nothing about this run.

Both conditions are an operational reading of "dissonance between the
design-time model and the real execution"; reports label them as such.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from ..cgm import Cgm, node_properties, node_target, postorder
from ..dataset import MiningDataset, cycle_table, slice_for_node
from ..trace import BODYHUB_ID, Event, Trace
from ..verifier import PropertyVerdict, Verdict
from .rules import RuleSet, learn_rules
from .tree import DecisionTree, LearnerError, learn_tree

DISSONANCE_RULES = (
    "violated-region: a mined rule or tree leaf with support > 0 covers cycles "
    "where a property bound to the node is Violated",
    "unexercised property: a property bound to the node was never checked on this trace",
)


@dataclass(frozen=True)
class Dissonance:
    node_id: str
    property_id: str
    kind: str  # "violated-region" or "unexercised property"
    source: str  # "rules", "tree" or "verdict"
    region: str
    support: int
    violating_support: int

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class NodeKnowledge:
    node_id: str
    class_column: Optional[str]
    rows: int = 0
    rules: Optional[RuleSet] = None
    tree: Optional[DecisionTree] = None
    verdicts: dict = field(default_factory=dict)
    dissonances: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def skipped(self) -> bool:
        return self.rules is None and self.tree is None

    def to_json(self):
        return {
            "node": self.node_id,
            "class": self.class_column,
            "rows": self.rows,
            "skipped": self.skipped,
            "rules": None if self.rules is None else self.rules.to_json(),
            "rules_text": None if self.rules is None else self.rules.render(),
            "tree": None if self.tree is None else self.tree.to_json(),
            "tree_text": None if self.tree is None else self.tree.render(),
            "properties": [self.verdicts[p].to_dict() for p in _sorted_ids(self.verdicts)],
            "dissonances": [d.to_json() for d in self.dissonances],
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class ContextualKnowledge:
    config_digest: str
    nodes: list
    queue_recommendation: list
    diagnostics: list = field(default_factory=list)

    @property
    def dissonances(self) -> list[Dissonance]:
        return [d for n in self.nodes for d in n.dissonances]

    def node(self, node_id: str) -> NodeKnowledge:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def to_json(self):
        return {
            "config_digest": self.config_digest,
            "dissonance_rules": list(DISSONANCE_RULES),
            "nodes": [n.to_json() for n in self.nodes],
            "dissonances": [d.to_json() for d in self.dissonances],
            "queue_recommendation": self.queue_recommendation,
            "diagnostics": list(self.diagnostics),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        out = []
        for n in self.nodes:
            out.append(f"== {n.node_id} (class: {n.class_column}, rows: {n.rows})")
            for msg in n.diagnostics:
                out.append(f"  note: {msg}")
            if n.rules is not None:
                out.append("  rules:")
                out.extend("    " + line for line in n.rules.render().splitlines())
            if n.tree is not None:
                out.append("  tree:")
                out.extend("    " + line for line in n.tree.render().splitlines())
            for pid in _sorted_ids(n.verdicts):
                v = n.verdicts[pid]
                out.append(f"  {pid}: {v.verdict.value} (checked {v.checked}, "
                           f"violated {v.violated}, pending {v.pending})")
            for d in n.dissonances:
                out.append(f"  DISSONANCE {d.property_id} [{d.kind}] via {d.source}: {d.region}")
        return "\n".join(out) + "\n"


def _sorted_ids(ids: Iterable[str]) -> list[str]:
    return sorted(ids, key=lambda p: int(p[1:]))


def _regions(ds: MiningDataset, rules: Optional[RuleSet], tree: Optional[DecisionTree]):
    """Yield (source, region text, cycles covered) for every mined region."""
    rows = [dict(zip(ds.columns, r)) for r in ds.rows]
    if rules is not None:
        groups = defaultdict(list)
        for r in rows:
            groups[id(rules.first_match(r))].append(r["cycle"])
        for rule in rules.all_rules():
            yield "rules", str(rule), groups.get(id(rule), [])
    if tree is not None:
        groups = defaultdict(list)
        for r in rows:
            groups[id(tree.leaf_for(r))].append(r["cycle"])
        for text, leaf in tree.paths():
            label = getattr(leaf.label, "label", leaf.label)
            yield "tree", f"{text} -> {label}", groups.get(id(leaf), [])


def _analyse(node: NodeKnowledge, ds: MiningDataset) -> None:
    for pid in _sorted_ids(node.verdicts):
        v = node.verdicts[pid]
        if v.checked == 0:
            node.dissonances.append(Dissonance(node.node_id, pid, "unexercised property",
                                               "verdict", "(no checked occurrence)", 0, 0))
            continue
        if v.verdict is not Verdict.VIOLATED:
            continue
        bad = set(v.violating_cycles)
        found = False
        for source in ("rules", "tree"):
            best = None
            for src, text, cycles in _regions(ds, node.rules, node.tree):
                if src != source or not cycles:
                    continue
                hits = sum(1 for c in cycles if c in bad)
                if hits and (best is None or hits > best[2]):
                    best = (text, len(cycles), hits)
            if best is not None:
                found = True
                node.dissonances.append(Dissonance(node.node_id, pid, "violated-region",
                                                   source, best[0], best[1], best[2]))
        if not found:
            node.diagnostics.append(f"{pid} is Violated but no mined region covers its "
                                    "violating cycles")


def queue_recommendation(trace: Trace) -> list[dict]:
    """Mean processing time per module, shortest first (a reordering suggestion only).

    Executions run back to back, so a module's time is the gap to the next
    Release of the same cycle, or to the cycle's last snapshot for the last
    module.
    """
    spans: dict[int, list[float]] = defaultdict(list)
    snaps = trace.snapshots
    for start, stop in trace.cycle_bounds():
        releases = [s for s in snaps[start:stop] if s.event is Event.RELEASE]
        ends = [r.time for r in releases[1:]] + [snaps[stop - 1].time]
        for r, end in zip(releases, ends):
            spans[r.node_id].append((end - r.time) / 100)
    out = [{"module": "bodyhub" if m == BODYHUB_ID else f"node{m}",
            "mean_processing_ms": round(sum(v) / len(v), 6), "executions": len(v)}
           for m, v in spans.items()]
    out.sort(key=lambda e: (e["mean_processing_ms"], e["module"]))
    return out


def mine_cgm(cgm: Cgm, trace: Trace,
             verdicts: Union[Mapping[str, PropertyVerdict], Iterable[PropertyVerdict]],
             min_leaf: int = 2, max_depth: int = 12) -> ContextualKnowledge:
    if not isinstance(verdicts, Mapping):
        verdicts = {v.property_id: v for v in verdicts}
    knowledge = ContextualKnowledge(trace.config_digest, [], [])
    if not len(trace):
        knowledge.diagnostics.append("empty trace: nothing to mine")
    table = cycle_table(trace) if len(trace) else None
    if table is not None:
        knowledge.queue_recommendation = queue_recommendation(trace)

    for nid in postorder(cgm):
        target = node_target(cgm, nid)
        nk = NodeKnowledge(nid, target)
        knowledge.nodes.append(nk)
        for pid in _sorted_ids(node_properties(cgm, nid)):
            if pid in verdicts:
                nk.verdicts[pid] = verdicts[pid]
            else:
                nk.diagnostics.append(f"no verdict supplied for {pid}")
        if table is None:
            nk.diagnostics.append("skipped: empty trace")
            continue
        if target is None:
            nk.diagnostics.append("skipped: no class column designated")
            continue
        ds = slice_for_node(trace, cgm, nid, table=table)
        if target not in ds.columns:
            ds = table.select([*ds.columns, target])
        ds = ds.with_class(target).complete_cases()
        nk.rows = len(ds)
        if ds.class_column is None or len(ds) < min_leaf:
            nk.diagnostics.append(f"skipped: {len(ds)} complete rows < min_leaf={min_leaf}")
            continue
        if "cycle" not in ds.columns:
            nk.diagnostics.append("skipped: cycle column lost")
            continue
        attrs = [c for c in ds.attributes if c != "cycle"]
        if not attrs:
            nk.diagnostics.append("skipped: no attribute observed in this scope")
            continue
        learn_ds = ds.select([*attrs, target], target)
        try:
            nk.rules = learn_rules(learn_ds)
            nk.tree = learn_tree(learn_ds, min_leaf=min_leaf, max_depth=max_depth)
        except LearnerError as exc:
            nk.diagnostics.append(f"skipped: {exc}")
            nk.rules = nk.tree = None
            continue
        _analyse(nk, ds)
    return knowledge
