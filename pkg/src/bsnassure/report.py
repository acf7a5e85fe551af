"""Human-readable summary tables plus plot-ready CSVs from pipeline artifacts."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import battery_by_risk
from .mining.knowledge import queue_recommendation
from .refine import battery_csv
from .trace import TraceError, read_csv
from .verifier import compute_ted, compute_tsn, sensor_node_ids


class ReportError(ValueError):
    pass


@dataclass
class Inputs:
    traces: list = field(default_factory=list)  # (name, Trace)
    verifications: list = field(default_factory=list)  # (name, dict)
    knowledge: list = field(default_factory=list)
    comparisons: list = field(default_factory=list)

    def empty(self) -> bool:
        return not (self.traces or self.verifications or self.knowledge or self.comparisons)


def classify_input(path: Path, inputs: Inputs) -> None:
    name = path.name
    if path.stat().st_size == 0:
        raise ReportError(f"{path}: empty file")
    if path.suffix.lower() == ".csv":
        try:
            inputs.traces.append((name, read_csv(path)))
        except TraceError as exc:
            raise ReportError(f"{path}: {exc}") from None
        return
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ReportError(f"{path}: expected a JSON object")
    if "ratio" in doc and "runs" in doc:
        inputs.comparisons.append((name, doc))
    elif "dissonance_rules" in doc and "nodes" in doc:
        inputs.knowledge.append((name, doc))
    elif "properties" in doc and "metrics" in doc:
        inputs.verifications.append((name, doc))
    else:
        raise ReportError(f"{path}: not a trace, verdict report, knowledge or comparison file")


def load_inputs(paths) -> Inputs:
    inputs = Inputs()
    for p in paths:
        classify_input(Path(p), inputs)
    if inputs.empty():
        raise ReportError("no inputs")
    return inputs


def _table(header, rows) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return out


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.3f}" if isinstance(x, float) else str(x)


def render_markdown(inputs: Inputs) -> str:
    lines = ["# BSN assurance report", ""]
    for name, doc in inputs.verifications:
        lines += [f"## Verdicts: {name}", "", f"config digest `{doc['config_digest']}`", ""]
        rows = []
        for p in doc["properties"]:
            w = p.get("witness")
            rows.append((p["id"], p["verdict"], p["checked"], p["violated"], p["pending"],
                         "-" if not w else f"#{w['index']}: {w['explanation']}"))
        lines += _table(("property", "verdict", "checked", "violated", "pending", "witness"), rows)
        lines.append("")
        rows = []
        for metric, m in sorted(doc["metrics"].items()):
            s = m["summary"] or {}
            rows.append((metric, m["bound_ms"], s.get("n", 0), _fmt(s.get("mean")),
                         _fmt(s.get("p95")), _fmt(s.get("max")),
                         _fmt(s.get("violation_fraction")), m["pending"]))
        lines += _table(("metric", "bound ms", "n", "mean", "p95", "max",
                         "violation fraction", "pending"), rows)
        lines.append("")
    for name, doc in inputs.knowledge:
        lines += [f"## Mined knowledge: {name}", ""]
        for node in doc["nodes"]:
            lines.append(f"### {node['node']} (class {node['class']}, {node['rows']} rows)")
            lines.append("")
            for key in ("rules_text", "tree_text"):
                if node.get(key):
                    lines += ["```", node[key].rstrip("\n"), "```", ""]
            for msg in node["diagnostics"]:
                lines.append(f"- note: {msg}")
            if node["diagnostics"]:
                lines.append("")
        ds = doc["dissonances"]
        lines.append(f"Dissonances: {len(ds)}")
        lines.append("")
        if ds:
            lines += _table(("node", "property", "kind", "source", "region", "support"),
                            [(d["node_id"], d["property_id"], d["kind"], d["source"],
                              d["region"], d["support"]) for d in ds])
            lines.append("")
        if doc["queue_recommendation"]:
            lines += ["Queue order suggestion (shortest processing first):", ""]
            lines += _table(("module", "mean processing ms", "executions"),
                            [(q["module"], _fmt(q["mean_processing_ms"]), q["executions"])
                             for q in doc["queue_recommendation"]])
            lines.append("")
    for name, doc in inputs.comparisons:
        lines += [f"## Policy comparison: {name}", ""]
        life, oracle = doc["mean_lifetime_ms"], doc["oracle_lifetime_ms"]
        lines += _table(("arm", "mean lifetime s", "oracle lifetime s"),
                        [(arm, _fmt(life[arm] / 1000), _fmt(oracle[arm] / 1000)) for arm in life])
        lines += ["", f"- seeds: {', '.join(map(str, doc['seeds']))}",
                  f"- ratio dynamic / non-controlled: {doc['ratio']:.3f}",
                  f"- oracle ratio: {doc['oracle_ratio']:.3f}",
                  f"- re-verification: {doc['reverification']['status']}", ""]
    for name, trace in inputs.traces:
        lines += [f"## Trace: {name}", "",
                  f"{len(trace)} snapshots over {trace.num_cycles} cycles, "
                  f"config digest `{trace.config_digest}`", ""]
    return "\n".join(lines).rstrip("\n") + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(c) if isinstance(c, float) else str(c) for c in row) + "\n")
    return buf.getvalue()


def plot_tables(inputs: Inputs) -> dict[str, str]:
    """File name -> CSV text, one per figure analogue that the inputs can feed."""
    out = {}
    tsn, ted, queue, per_risk = [], [], [], []
    for name, trace in inputs.traces:
        for nid in sensor_node_ids(trace):
            tsn += [(name, nid, i, x) for i, x in enumerate(compute_tsn(trace, nid).samples)]
        ted += [(name, i, x) for i, x in enumerate(compute_ted(trace).samples)]
        queue += [(name, q["module"], q["mean_processing_ms"], q["executions"])
                  for q in queue_recommendation(trace)]
        ds = battery_by_risk(trace)
        per_risk += [(name, r[0], r[1].label, r[2], r[4]) for r in ds.rows]
    for name, doc in inputs.knowledge:
        if not inputs.traces:
            queue += [(name, q["module"], q["mean_processing_ms"], q["executions"])
                      for q in doc["queue_recommendation"]]
    if tsn:
        out["scheduling_window.csv"] = _csv(("source", "node_id", "index", "t_sn_ms"), tsn)
    if ted:
        out["emergency_detection.csv"] = _csv(("source", "index", "t_ed_ms"), ted)
    if queue:
        out["queue_processing.csv"] = _csv(("source", "module", "mean_processing_ms",
                                            "executions"), queue)
    if per_risk:
        out["battery_per_risk.csv"] = _csv(("source", "node_id", "risk", "cycles",
                                            "eu_per_cycle"), per_risk)
    for i, (name, doc) in enumerate(inputs.comparisons):
        suffix = "" if len(inputs.comparisons) == 1 else f"_{i + 1}"
        out[f"battery_controller{suffix}.csv"] = battery_csv(doc)
    return out


def write_report(paths, out: Path) -> list[Path]:
    inputs = load_inputs(paths)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_markdown(inputs))
    written = [out]
    plots = out.parent / "plotdata"
    tables = plot_tables(inputs)
    if tables:
        plots.mkdir(exist_ok=True)
    for fname, text in sorted(tables.items()):
        (plots / fname).write_text(text)
        written.append(plots / fname)
    return written
