"""Contextual goal model: a goal/task tree with contexts, properties and
trace variables attached to its nodes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

KINDS = ("Goal", "Task")
DECOMPOSITIONS = ("And", "Or", "MeansEnd", "Leaf")
CONTEXT_IDS = ("C1", "C2", "C3")
PROPERTY_IDS = tuple(f"P{i}" for i in range(1, 11))

# Dataset column carrying each context.
CONTEXT_COLUMNS = {
    "C1": "c1_patient_status",
    "C2": "c2_controller_on",
    "C3": "c3_realtime_on",
}

_NODE_FIELDS = {"id", "kind", "label", "decomposition", "children",
                "contexts", "properties", "variables"}
_OPTIONAL_NODE_FIELDS = {"target"}


class CgmError(ValueError):
    pass


@dataclass(frozen=True)
class GoalNode:
    id: str
    kind: str
    label: str
    decomposition: str
    children: tuple[str, ...] = ()
    contexts: frozenset[str] = frozenset()
    property_ids: frozenset[str] = frozenset()
    variables: frozenset[str] = frozenset()
    target: Optional[str] = None


@dataclass(frozen=True)
class Cgm:
    root: str
    nodes: dict[str, GoalNode] = field(default_factory=dict)

    def parent_of(self, node_id: str) -> Optional[str]:
        for node in self.nodes.values():
            if node_id in node.children:
                return node.id
        return None

    def ancestors(self, node_id: str) -> list[str]:
        out = []
        parent = self.parent_of(node_id)
        while parent is not None:
            out.append(parent)
            parent = self.parent_of(parent)
        return out

    def descendants(self, node_id: str) -> list[str]:
        self._require(node_id)
        out = []
        stack = list(reversed(self.nodes[node_id].children))
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(self.nodes[nid].children))
        return out

    def _require(self, node_id: str) -> GoalNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise CgmError(f"unknown CGM node {node_id!r}") from None


def _parse_node(raw: dict) -> GoalNode:
    if not isinstance(raw, dict):
        raise CgmError(f"node entry must be an object, got {raw!r}")
    nid = raw.get("id", "<missing id>")
    missing = _NODE_FIELDS - raw.keys()
    if missing:
        raise CgmError(f"node {nid}: missing fields {sorted(missing)}")
    extra = raw.keys() - _NODE_FIELDS - _OPTIONAL_NODE_FIELDS
    if extra:
        raise CgmError(f"node {nid}: unknown fields {sorted(extra)}")
    if raw["kind"] not in KINDS:
        raise CgmError(f"node {nid}: kind must be one of {KINDS}")
    if raw["decomposition"] not in DECOMPOSITIONS:
        raise CgmError(f"node {nid}: decomposition must be one of {DECOMPOSITIONS}")
    for key in ("children", "contexts", "properties", "variables"):
        if not isinstance(raw[key], list) or not all(isinstance(x, str) for x in raw[key]):
            raise CgmError(f"node {nid}: {key} must be a list of strings")
    bad_ctx = set(raw["contexts"]) - set(CONTEXT_IDS)
    if bad_ctx:
        raise CgmError(f"node {nid}: unknown contexts {sorted(bad_ctx)}")
    bad_props = set(raw["properties"]) - set(PROPERTY_IDS)
    if bad_props:
        raise CgmError(f"node {nid}: unknown properties {sorted(bad_props)}")
    return GoalNode(
        id=nid,
        kind=raw["kind"],
        label=raw["label"],
        decomposition=raw["decomposition"],
        children=tuple(raw["children"]),
        contexts=frozenset(raw["contexts"]),
        property_ids=frozenset(raw["properties"]),
        variables=frozenset(raw["variables"]),
        target=raw.get("target"),
    )


def load_cgm(document: str | dict) -> Cgm:
    """Parse and validate a CGM JSON document (text or already-decoded)."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise CgmError(f"CGM document is not valid JSON: {exc}") from None
    if not isinstance(document, dict) or "root" not in document or "nodes" not in document:
        raise CgmError("CGM document needs 'root' and 'nodes'")

    nodes: dict[str, GoalNode] = {}
    for raw in document["nodes"]:
        node = _parse_node(raw)
        if node.id in nodes:
            raise CgmError(f"node {node.id}: duplicate id")
        nodes[node.id] = node

    root = document["root"]
    if root not in nodes:
        raise CgmError(f"root {root!r} is not a defined node")

    parents: dict[str, str] = {}
    for node in nodes.values():
        for child in node.children:
            if child not in nodes:
                raise CgmError(f"node {node.id}: child {child!r} is not defined")
            if child in parents:
                raise CgmError(f"node {child}: more than one parent ({parents[child]}, {node.id})")
            parents[child] = node.id
        n = len(node.children)
        if node.decomposition == "Leaf" and n:
            raise CgmError(f"node {node.id}: Leaf must not have children")
        if node.decomposition in ("And", "Or") and n < 2:
            raise CgmError(f"node {node.id}: {node.decomposition} needs at least two children")
        if node.decomposition == "MeansEnd":
            if node.kind != "Goal" or n != 1 or nodes[node.children[0]].kind != "Task":
                raise CgmError(f"node {node.id}: MeansEnd links a Goal to exactly one Task")

    if root in parents:
        raise CgmError(f"node {root}: root has a parent, the model contains a cycle")
    # Every node reachable from root exactly once <=> tree.
    seen = set()
    stack = [root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            raise CgmError(f"node {nid}: reached twice, the model contains a cycle")
        seen.add(nid)
        stack.extend(nodes[nid].children)
    orphans = set(nodes) - seen
    if orphans:
        raise CgmError(f"nodes not reachable from root (cycle or forest): {sorted(orphans)}")
    return Cgm(root=root, nodes=nodes)


def default_cgm() -> Cgm:
    text = resources.files("bsnassure").joinpath("data/bsn_cgm.json").read_text()
    return load_cgm(text)


def postorder(cgm: Cgm) -> list[str]:
    out: list[str] = []
    stack: list[tuple[str, bool]] = [(cgm.root, False)]
    while stack:
        nid, expanded = stack.pop()
        if expanded:
            out.append(nid)
            continue
        stack.append((nid, True))
        for child in reversed(cgm.nodes[nid].children):
            stack.append((child, False))
    return out


def subtree_variables(cgm: Cgm, node_id: str) -> set[str]:
    node = cgm._require(node_id)
    out = set(node.variables)
    for nid in cgm.descendants(node_id):
        out |= cgm.nodes[nid].variables
    return out


def node_properties(cgm: Cgm, node_id: str) -> set[str]:
    return set(cgm._require(node_id).property_ids)


def node_contexts(cgm: Cgm, node_id: str) -> set[str]:
    """Contexts in scope at a node: its own, its ancestors' and its subtree's."""
    cgm._require(node_id)
    ids = [node_id, *cgm.ancestors(node_id), *cgm.descendants(node_id)]
    out: set[str] = set()
    for nid in ids:
        out |= cgm.nodes[nid].contexts
    return out


def node_target(cgm: Cgm, node_id: str) -> Optional[str]:
    """Class column for mining at a node: its own target or the nearest ancestor's."""
    node = cgm._require(node_id)
    if node.target:
        return node.target
    for nid in cgm.ancestors(node_id):
        if cgm.nodes[nid].target:
            return cgm.nodes[nid].target
    return None
