"""Finite-trace checks for the BSN property suite P1..P10 and the two
timing metrics (inter-acquisition time, emergency-detection latency).

Invariants (``A[] phi``) are checked at every snapshot where their guard
is defined. Response properties (``phi --> psi``) are bounded: an
obligation opened in cycle c must be discharged by cycle c + horizon.
It is Violated once the trace has gone past that cycle without a
discharge, and Pending if the trace ends first.
"""

from __future__ import annotations

import enum
import json
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .core import RiskLevel
from .trace import BODYHUB_ID, Event, Trace

PROPERTY_IDS = tuple(f"P{i}" for i in range(1, 11))

SCHEDULING_WINDOW_MS = 100.0
DETECTION_BOUND_MS = 250.0
RESPONSE_HORIZON_CYCLES = 10
DETECTION_HORIZON_CYCLES = 0


class Verdict(str, enum.Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    PENDING = "Pending"


@dataclass(frozen=True)
class PropertyVerdict:
    property_id: str
    verdict: Verdict
    witness: Optional[tuple[int, str]]
    checked: int
    violated: int
    pending: int
    violating_cycles: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.property_id,
            "verdict": self.verdict.value,
            "checked": self.checked,
            "violated": self.violated,
            "pending": self.pending,
            "witness": (None if self.witness is None
                        else {"index": self.witness[0], "explanation": self.witness[1]}),
            "violating_cycles": list(self.violating_cycles),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PropertyVerdict":
        w = d.get("witness")
        return cls(d["id"], Verdict(d["verdict"]),
                   None if w is None else (w["index"], w["explanation"]),
                   d["checked"], d["violated"], d["pending"],
                   tuple(d.get("violating_cycles", ())))


class _Tally:
    def __init__(self, pid: str, response: bool = False):
        self.pid = pid
        # Response properties stay Pending until one obligation resolves, so
        # extending a trace can never turn Satisfied back into Pending.
        self.response = response
        self.checked = 0
        self.violated = 0
        self.pending = 0
        self.witness: Optional[tuple[int, str]] = None
        self.cycles: set[int] = set()

    def ok(self):
        self.checked += 1

    def fail(self, index: int, cycle: int, why: str):
        self.checked += 1
        self.violated += 1
        self.cycles.add(cycle)
        if self.witness is None or index < self.witness[0]:
            self.witness = (index, why)

    def wait(self):
        self.checked += 1
        self.pending += 1

    def verdict(self) -> PropertyVerdict:
        if self.violated:
            v = Verdict.VIOLATED
        elif self.response and self.pending == self.checked:
            v = Verdict.PENDING
        else:
            v = Verdict.SATISFIED
        return PropertyVerdict(self.pid, v, self.witness, self.checked, self.violated,
                               self.pending, tuple(sorted(self.cycles)))


# --- P1, P2 ------------------------------------------------------------------

def _check_progress(trace: Trace) -> PropertyVerdict:
    t = _Tally("P1")
    snaps = trace.snapshots
    expected = 0
    for start, stop in trace.cycle_bounds():
        cyc = snaps[start].cycle
        if cyc != expected:
            t.fail(start, cyc, f"cycle {expected} missing: no module executed")
        elif not any(s.event is Event.RELEASE for s in snaps[start:stop]):
            t.fail(start, cyc, f"cycle {cyc} has no execution")
        else:
            t.ok()
        expected = cyc + 1
    return t.verdict()


def _check_fairness(trace: Trace, window_ms: float) -> PropertyVerdict:
    t = _Tally("P2")
    snaps = trace.snapshots
    window = int(round(window_ms * 100))
    alive: set[int] = set()
    for start, stop in trace.cycle_bounds():
        cyc = snaps[start].cycle
        if cyc == 0:
            alive = {s.node_id for s in snaps[start:stop]
                     if s.event is Event.BATTERY_UPDATE and s.node_id is not None
                     and s.battery_eu and s.battery_eu > 0}
        expected = deque([BODYHUB_ID, *sorted(alive)])
        problem = None
        for i in range(start, stop):
            s = snaps[i]
            if s.event is Event.RELEASE:
                want = expected.popleft() if expected else None
                if s.node_id != want:
                    problem = (i, f"cycle {cyc}: module {s.node_id} released where "
                                  f"{'no module' if want is None else f'module {want}'} was due")
                    break
            if s.time - snaps[start].time > window:
                problem = (i, f"cycle {cyc}: execution runs past the {window_ms:g} ms window")
                break
        if problem is None and expected:
            problem = (stop - 1, f"cycle {cyc}: modules {sorted(expected)} never executed")
        if problem is None:
            t.ok()
        else:
            t.fail(problem[0], cyc, problem[1])
        for s in snaps[start:stop]:
            if (s.event is Event.BATTERY_UPDATE and s.node_id in alive
                    and s.battery_eu is not None and s.battery_eu <= 0):
                alive.discard(s.node_id)
    return t.verdict()


# --- message matching (P3, T_ED) --------------------------------------------

@dataclass
class _Message:
    node_id: int
    risk: RiskLevel
    value: Optional[float]
    sent_index: int
    collected_index: Optional[int]
    collected_time: Optional[int]
    collected_cycle: Optional[int]


def _match_messages(trace: Trace):
    """Pair every Sent with the Processed carrying the same node, risk and value.

    Yields (message, processed_index or None).
    """
    last_collected: dict[int, tuple[int, int, int]] = {}
    outstanding: dict[int, list[_Message]] = defaultdict(list)
    matched: list[tuple[_Message, Optional[int]]] = []
    for i, s in enumerate(trace.snapshots):
        if s.event is Event.COLLECTED:
            last_collected[s.node_id] = (i, s.time, s.cycle)
        elif s.event is Event.SENT:
            ci, ct, cc = last_collected.get(s.node_id, (None, None, None))
            outstanding[s.node_id].append(_Message(s.node_id, s.risk, s.value, i, ci, ct, cc))
        elif s.event is Event.PROCESSED:
            queue = outstanding.get(s.node_id, [])
            for j, msg in enumerate(queue):
                if msg.risk == s.risk and msg.value == s.value:
                    matched.append((msg, i))
                    del queue[j]
                    break
    for queue in outstanding.values():
        for msg in queue:
            matched.append((msg, None))
    matched.sort(key=lambda m: m[0].sent_index)
    return matched


def _check_detection(trace: Trace, bound_ms: float) -> PropertyVerdict:
    t = _Tally("P3", response=True)
    snaps = trace.snapshots
    bound = int(round(bound_ms * 100))
    for msg, pi in _match_messages(trace):
        if msg.risk is not RiskLevel.HIGH:
            continue
        if pi is None:
            t.wait()
            continue
        p = snaps[pi]
        if msg.collected_time is None:
            t.fail(pi, p.cycle, f"high-risk data from node {msg.node_id} processed without a collection")
            continue
        latency = p.time - msg.collected_time
        age = p.cycle - msg.collected_cycle
        if latency > bound:
            t.fail(pi, p.cycle, f"node {msg.node_id}: emergency detected after "
                                f"{latency / 100:g} ms > {bound_ms:g} ms")
        elif age > 1:
            t.fail(pi, p.cycle, f"node {msg.node_id}: data {age} cycles old when processed")
        else:
            t.ok()
    return t.verdict()


# --- P4..P6 ------------------------------------------------------------------

_CONTROLLER_PROPS = {RiskLevel.HIGH: "P4", RiskLevel.MODERATE: "P5", RiskLevel.LOW: "P6"}


def _check_controller(trace: Trace, pid: str) -> PropertyVerdict:
    """Gap between acquisitions equals the period planned for the risk in force.

    The period table per node is the one declared by its latest
    AdaptationApplied rows; gaps spanning a table change are not judged.
    """
    t = _Tally(pid)
    risk_of_prop = {v: k for k, v in _CONTROLLER_PROPS.items()}[pid]
    table: dict[int, dict[RiskLevel, int]] = defaultdict(dict)
    version: dict[int, int] = defaultdict(int)
    in_force: dict[int, RiskLevel] = {}
    acquired_in: dict[int, int] = {}
    # node -> (cycle, risk, planned gap, table version, controller on)
    plan: dict[int, tuple[int, RiskLevel, Optional[int], int, bool]] = {}
    for i, s in enumerate(trace.snapshots):
        ev = s.event
        if ev is Event.ADAPTATION_APPLIED:
            table[s.node_id][s.risk] = s.sampling_divisor
            version[s.node_id] += 1
        elif ev is Event.SENT:
            in_force[s.node_id] = s.risk
        elif ev is Event.COLLECTED:
            prev = plan.get(s.node_id)
            if prev is not None:
                cyc, risk, planned, ver, controlled = prev
                if controlled and risk is risk_of_prop and ver == version[s.node_id] and planned:
                    gap = s.cycle - cyc
                    if gap == planned:
                        t.ok()
                    else:
                        t.fail(i, s.cycle, f"node {s.node_id} at {risk.label} risk: "
                                           f"{gap} cycles since last acquisition, planned {planned}")
            acquired_in[s.node_id] = s.cycle
        elif ev is Event.BATTERY_UPDATE and acquired_in.get(s.node_id) == s.cycle:
            risk = in_force.get(s.node_id)
            if risk is not None:
                plan[s.node_id] = (s.cycle, risk, table[s.node_id].get(risk),
                                   version[s.node_id], s.c2)
            acquired_in.pop(s.node_id, None)
    return t.verdict()


# --- response properties -------------------------------------------------

def _check_response(trace: Trace, pid: str, trigger: Event, response: Event,
                    horizon: int, per_node: bool) -> PropertyVerdict:
    t = _Tally(pid, response=True)
    snaps = trace.snapshots
    if not snaps:
        return t.verdict()
    last_cycle = snaps[-1].cycle
    # Walk backwards remembering the next response (per node if required).
    next_any: Optional[int] = None
    next_by_node: dict = {}
    due: list[tuple[int, Optional[int]]] = []
    for i in range(len(snaps) - 1, -1, -1):
        s = snaps[i]
        if s.event is response:
            next_any = i
            next_by_node[s.node_id] = i
        if s.event is trigger:
            due.append((i, next_by_node.get(s.node_id) if per_node else next_any))
    for i, j in reversed(due):
        s = snaps[i]
        deadline = s.cycle + horizon
        if j is not None and snaps[j].cycle <= deadline:
            t.ok()
        elif j is not None or last_cycle > deadline:
            who = f"node {s.node_id}" if per_node else "bodyhub"
            t.fail(i, s.cycle, f"{s.event.value} at cycle {s.cycle} ({who}) not followed by "
                               f"{response.value} within {horizon} cycle(s)")
        else:
            t.wait()
    return t.verdict()


def _check_range(trace: Trace) -> PropertyVerdict:
    t = _Tally("P9")
    for i, s in enumerate(trace.snapshots):
        if s.event is Event.PROCESSED:
            if isinstance(s.risk, RiskLevel):
                t.ok()
            else:
                t.fail(i, s.cycle, "processed data carries no low/moderate/high status")
    return t.verdict()


def check_property(trace: Trace, property_id: str, *,
                   window_ms: float = SCHEDULING_WINDOW_MS,
                   bound_ms: float = DETECTION_BOUND_MS,
                   horizon_cycles: int = RESPONSE_HORIZON_CYCLES) -> PropertyVerdict:
    if property_id == "P1":
        return _check_progress(trace)
    if property_id == "P2":
        return _check_fairness(trace, window_ms)
    if property_id == "P3":
        return _check_detection(trace, bound_ms)
    if property_id in ("P4", "P5", "P6"):
        return _check_controller(trace, property_id)
    if property_id == "P7":
        return _check_response(trace, "P7", Event.COLLECTED, Event.PROCESSED, horizon_cycles, True)
    if property_id == "P8":
        return _check_response(trace, "P8", Event.COLLECTED, Event.PERSISTED, horizon_cycles, True)
    if property_id == "P9":
        return _check_range(trace)
    if property_id == "P10":
        return _check_response(trace, "P10", Event.PROCESSED, Event.DETECTED,
                               DETECTION_HORIZON_CYCLES, False)
    raise KeyError(f"unknown property {property_id!r}")


def check_all(trace: Trace, property_ids: Iterable[str] = PROPERTY_IDS, **kw) -> list[PropertyVerdict]:
    ids = sorted(set(property_ids), key=lambda p: int(p[1:]))
    return [check_property(trace, pid, **kw) for pid in ids]


# --- metrics ---------------------------------------------------------------

@dataclass(frozen=True)
class MetricSeries:
    metric: str
    node_id: Optional[int]
    samples: tuple[float, ...]
    bound_ms: float
    pending: int = 0


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    p50: float
    p95: float
    max: float
    violation_fraction: float

    def to_dict(self):
        return dict(self.__dict__)


def compute_tsn(trace: Trace, node_id: int) -> MetricSeries:
    times = [s.time for s in trace if s.event is Event.COLLECTED and s.node_id == node_id]
    samples = tuple((b - a) / 100 for a, b in zip(times, times[1:]))
    return MetricSeries("T_SN", node_id, samples, SCHEDULING_WINDOW_MS)


def compute_ted(trace: Trace) -> MetricSeries:
    samples = []
    pending = 0
    snaps = trace.snapshots
    for msg, pi in _match_messages(trace):
        if msg.risk is not RiskLevel.HIGH or msg.collected_time is None:
            continue
        if pi is None:
            pending += 1
        else:
            samples.append((snaps[pi].time - msg.collected_time) / 100)
    return MetricSeries("T_ED", None, tuple(samples), DETECTION_BOUND_MS, pending)


def sensor_node_ids(trace: Trace) -> list[int]:
    return sorted({s.node_id for s in trace if s.event is Event.COLLECTED})


def pooled_tsn(trace: Trace) -> MetricSeries:
    samples = []
    for nid in sensor_node_ids(trace):
        samples.extend(compute_tsn(trace, nid).samples)
    return MetricSeries("T_SN", None, tuple(samples), SCHEDULING_WINDOW_MS)


def summarize(series: MetricSeries) -> Summary:
    if not series.samples:
        raise ValueError(f"{series.metric}: empty series")
    x = np.asarray(series.samples, dtype=float)
    return Summary(
        n=len(x),
        mean=float(x.mean()),
        p50=float(np.percentile(x, 50)),
        p95=float(np.percentile(x, 95)),
        max=float(x.max()),
        violation_fraction=float((x > series.bound_ms).sum() / len(x)),
    )


# --- report ----------------------------------------------------------------

def verify_report(trace: Trace, property_ids: Iterable[str] = PROPERTY_IDS) -> dict:
    verdicts = check_all(trace, property_ids)
    metrics = {}
    for series in (pooled_tsn(trace), compute_ted(trace)):
        entry = {"bound_ms": series.bound_ms, "pending": series.pending}
        entry["summary"] = summarize(series).to_dict() if series.samples else None
        metrics[series.metric] = entry
    return {
        "config_digest": trace.config_digest,
        "properties": [v.to_dict() for v in verdicts],
        "metrics": metrics,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def verdicts_from_report(report: dict) -> dict[str, PropertyVerdict]:
    return {d["id"]: PropertyVerdict.from_dict(d) for d in report["properties"]}
