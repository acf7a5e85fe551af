"""Per-cycle mining datasets cut from a trace along the goal model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Sequence

from .cgm import CONTEXT_COLUMNS, Cgm, node_contexts, subtree_variables
from .core import RiskLevel
from .simulator import classify_battery
from .trace import BODYHUB_ID, Event, Trace


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class MiningDataset:
    columns: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]
    class_column: Optional[str] = None

    def __post_init__(self):
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DatasetError(f"row {i} has {len(row)} values, expected {width}")
        if self.class_column is not None:
            if self.class_column not in self.columns:
                raise DatasetError(f"class column {self.class_column!r} not in dataset")
            kinds = {is_nominal_value(v) for v in self.column(self.class_column) if v is not None}
            if len(kinds) > 1:
                raise DatasetError(f"class column {self.class_column!r} mixes nominal and numeric")

    def __len__(self):
        return len(self.rows)

    def index(self, name: str) -> int:
        return self.columns.index(name)

    def column(self, name: str) -> list:
        i = self.index(name)
        return [row[i] for row in self.rows]

    @property
    def attributes(self) -> list[str]:
        return [c for c in self.columns if c != self.class_column]

    def is_nominal(self, name: str) -> bool:
        return any(is_nominal_value(v) for v in self.column(name) if v is not None)

    def select(self, columns: Sequence[str], class_column: Optional[str] = None) -> "MiningDataset":
        idx = [self.index(c) for c in columns]
        rows = tuple(tuple(row[i] for i in idx) for row in self.rows)
        return MiningDataset(tuple(columns), rows, class_column)

    def with_class(self, class_column: Optional[str]) -> "MiningDataset":
        return MiningDataset(self.columns, self.rows, class_column)

    def complete_cases(self) -> "MiningDataset":
        """Drop all-empty columns, then rows with any empty value."""
        keep = [c for c in self.columns if any(v is not None for v in self.column(c))]
        if self.class_column is not None and self.class_column not in keep:
            return MiningDataset(tuple(keep), (), None)
        ds = self.select(keep, self.class_column)
        rows = tuple(r for r in ds.rows if all(v is not None for v in r))
        return MiningDataset(ds.columns, rows, ds.class_column)


def is_nominal_value(v) -> bool:
    return isinstance(v, (str, RiskLevel))


# Columns that are recomputed each cycle (zero when nothing happened);
# every other column carries the last observed value forward.
COUNT_COLUMNS = ("collected_count", "sent_count", "persisted_count", "processed_count",
                 "active_nodes")

ALL_VARIABLES = (
    "cycle_busy_ms", "active_nodes", "window_ok",
    "sensor_value", "sensor_risk", "collected_count",
    "sent_risk", "sent_count", "persisted_count",
    "received_risk", "processed_count", "detected_risk",
    "acquisition_gap_cycles", "sampling_divisor", "battery_eu", "energy_saving",
    "battery_category",
    "c1_patient_status", "c2_controller_on", "c3_realtime_on",
)


def cycle_table(trace: Trace, window_ms: float = 100.0) -> MiningDataset:
    """One row per scheduler cycle over every known variable."""
    if not len(trace):
        return MiningDataset(("cycle", *ALL_VARIABLES), ())
    capacity = max((s.battery_eu for s in trace if s.cycle == 0 and s.battery_eu is not None),
                   default=None)
    window = int(round(window_ms * 100))
    state: dict[str, Any] = {v: None for v in ALL_VARIABLES}
    last_collect: dict[int, int] = {}
    rows = []
    snaps = trace.snapshots
    for start, stop in trace.cycle_bounds():
        for c in COUNT_COLUMNS:
            state[c] = 0
        for s in snaps[start:stop]:
            ev = s.event
            if ev is Event.RELEASE:
                if s.node_id is not None and s.node_id != BODYHUB_ID:
                    state["active_nodes"] += 1
            elif ev is Event.COLLECTED:
                state["collected_count"] += 1
                state["sensor_value"] = s.value
                state["sensor_risk"] = s.risk
                prev = last_collect.get(s.node_id)
                if prev is not None:
                    state["acquisition_gap_cycles"] = s.cycle - prev
                last_collect[s.node_id] = s.cycle
            elif ev is Event.SENT:
                state["sent_count"] += 1
                state["sent_risk"] = s.risk
            elif ev is Event.RECEIVED:
                state["received_risk"] = s.risk
            elif ev is Event.PROCESSED:
                state["processed_count"] += 1
            elif ev is Event.PERSISTED:
                state["persisted_count"] += 1
            elif ev is Event.DETECTED:
                state["detected_risk"] = s.risk
            if s.battery_eu is not None:
                state["battery_eu"] = s.battery_eu
            if s.sampling_divisor is not None and ev is not Event.ADAPTATION_APPLIED:
                state["sampling_divisor"] = s.sampling_divisor
            if s.energy_saving is not None:
                state["energy_saving"] = int(s.energy_saving)
        last = snaps[stop - 1]
        busy = last.time - snaps[start].time
        state["cycle_busy_ms"] = busy / 100
        state["window_ok"] = "yes" if busy <= window else "no"
        if capacity and state["battery_eu"] is not None:
            frac = min(1.0, max(0.0, state["battery_eu"] / capacity))
            state["battery_category"] = classify_battery(frac).value
        state["c1_patient_status"] = last.c1
        state["c2_controller_on"] = int(last.c2)
        state["c3_realtime_on"] = int(last.c3)
        rows.append((snaps[start].cycle, *(state[v] for v in ALL_VARIABLES)))
    return MiningDataset(("cycle", *ALL_VARIABLES), tuple(rows))


def slice_for_node(trace: Trace, cgm: Cgm, node_id: str, *,
                   table: Optional[MiningDataset] = None) -> MiningDataset:
    """Per-cycle dataset restricted to a goal-model node's scope.

    Columns are the node's subtree variables plus the columns of the contexts
    in scope, sorted by name, with the cycle number first.
    """
    wanted = set(subtree_variables(cgm, node_id))
    wanted |= {CONTEXT_COLUMNS[c] for c in node_contexts(cgm, node_id)}
    if table is None:
        table = cycle_table(trace)
    unknown = wanted - set(table.columns)
    if unknown:
        raise DatasetError(f"node {node_id}: unknown trace variables {sorted(unknown)}")
    return table.select(["cycle", *sorted(wanted)])


def battery_by_risk(trace: Trace, min_cycles: int = 20) -> MiningDataset:
    """Consumption per cycle over stretches where a node's confirmed risk is constant.

    Columns: node_id, risk (class), cycles, consumed_eu, eu_per_cycle.
    """
    rows = []
    open_seg: dict[int, list] = {}  # node -> [risk, first_cycle, battery_at_start, last_cycle, battery]

    def close(node, seg):
        risk, c0, b0, c1, b1 = seg
        n = c1 - c0 + 1
        if n >= min_cycles and b0 > b1:
            rows.append((node, risk, n, b0 - b1, (b0 - b1) / n))

    battery: dict[int, float] = {}
    for s in trace:
        if s.event is Event.BATTERY_UPDATE and s.node_id is not None:
            seg = open_seg.get(s.node_id)
            if seg is not None:
                seg[3] = s.cycle
                seg[4] = s.battery_eu
                if s.battery_eu <= 0:
                    del open_seg[s.node_id]
            battery[s.node_id] = s.battery_eu
        elif s.event is Event.SENT:
            seg = open_seg.get(s.node_id)
            if seg is not None and seg[0] == s.risk:
                continue
            if seg is not None:
                close(s.node_id, seg)
            # The new stretch starts after this acquisition is paid for.
            b = battery.get(s.node_id)
            if b is not None:
                open_seg[s.node_id] = [s.risk, s.cycle, b, s.cycle, b]
    for node, seg in open_seg.items():
        close(node, seg)
    cols = ("node_id", "risk", "cycles", "consumed_eu", "eu_per_cycle")
    return MiningDataset(cols, tuple(rows), "risk")
