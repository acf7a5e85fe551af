"""Snapshot log produced by the simulator, with CSV persistence."""

from __future__ import annotations

import enum
import io
from typing import Iterable, NamedTuple, Optional

from .core import ContextState, RiskLevel

BODYHUB_ID = 0

HEADER = ("time_hms", "cycle", "event", "node_id", "risk", "value",
          "c1", "c2", "c3", "battery_eu", "sampling_divisor", "energy_saving")
DIGEST_PREFIX = "# config_digest="


class TraceError(ValueError):
    pass


class Event(str, enum.Enum):
    RELEASE = "Release"
    COLLECTED = "Collected"
    SENT = "Sent"
    RECEIVED = "Received"
    PROCESSED = "Processed"
    PERSISTED = "Persisted"
    DETECTED = "Detected"
    ADAPTATION_APPLIED = "AdaptationApplied"
    BATTERY_UPDATE = "BatteryUpdate"
    RISK_TRANSITION = "RiskTransition"


_EVENTS = {e.value: e for e in Event}


class Snapshot(NamedTuple):
    time: int  # hundredths of a millisecond
    cycle: int
    event: Event
    node_id: Optional[int] = None
    risk: Optional[RiskLevel] = None
    value: Optional[float] = None
    c1: Optional[RiskLevel] = None
    c2: bool = False
    c3: bool = False
    battery_eu: Optional[float] = None
    sampling_divisor: Optional[int] = None
    energy_saving: Optional[bool] = None

    @property
    def context(self) -> ContextState:
        return ContextState(self.c1, self.c2, self.c3)


class Trace:
    """An immutable, time-ordered sequence of snapshots."""

    __slots__ = ("config_digest", "snapshots")

    def __init__(self, config_digest: str, snapshots: Iterable[Snapshot]):
        self.config_digest = config_digest
        self.snapshots = tuple(snapshots)

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    def __iter__(self):
        return iter(self.snapshots)

    def __eq__(self, other):
        return (isinstance(other, Trace)
                and self.config_digest == other.config_digest
                and self.snapshots == other.snapshots)

    def validate(self) -> "Trace":
        if not self.snapshots:
            raise TraceError("trace is empty")
        first = self.snapshots[0]
        if first.cycle != 0 or first.event is not Event.RELEASE:
            raise TraceError("trace must start with the cycle 0 Release")
        prev = first.time
        for i, snap in enumerate(self.snapshots):
            if snap.time < prev:
                raise TraceError(f"snapshot {i}: time decreases ({snap.time} < {prev})")
            prev = snap.time
        return self

    def replace_snapshot(self, index: int, **changes) -> "Trace":
        snaps = list(self.snapshots)
        snaps[index] = snaps[index]._replace(**changes)
        return Trace(self.config_digest, snaps)

    @property
    def num_cycles(self) -> int:
        return self.snapshots[-1].cycle + 1 if self.snapshots else 0

    def cycle_bounds(self) -> list[tuple[int, int]]:
        """(start, stop) snapshot index ranges, one per cycle number present."""
        bounds = []
        start = 0
        snaps = self.snapshots
        for i in range(1, len(snaps) + 1):
            if i == len(snaps) or snaps[i].cycle != snaps[start].cycle:
                bounds.append((start, i))
                start = i
        return bounds


def _fmt_opt(x) -> str:
    return "" if x is None else str(x)


def _fmt_float(x) -> str:
    return "" if x is None else repr(float(x))


def _fmt_bool(x) -> str:
    return "" if x is None else ("1" if x else "0")


def _fmt_risk(x) -> str:
    return "" if x is None else x.label


def format_row(s: Snapshot) -> str:
    return ",".join((
        str(s.time), str(s.cycle), s.event.value, _fmt_opt(s.node_id),
        _fmt_risk(s.risk), _fmt_float(s.value), _fmt_risk(s.c1),
        _fmt_bool(s.c2), _fmt_bool(s.c3), _fmt_float(s.battery_eu),
        _fmt_opt(s.sampling_divisor), _fmt_bool(s.energy_saving),
    ))


def dumps(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write(f"{DIGEST_PREFIX}{trace.config_digest}\n")
    buf.write(",".join(HEADER) + "\n")
    for snap in trace.snapshots:
        buf.write(format_row(snap))
        buf.write("\n")
    return buf.getvalue()


def write_csv(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps(trace))


def _parse_int(text, line, name, optional=False):
    if text == "" and optional:
        return None
    try:
        return int(text)
    except ValueError:
        raise TraceError(f"line {line}: bad integer for {name}: {text!r}") from None


def _parse_float(text, line, name):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise TraceError(f"line {line}: bad number for {name}: {text!r}") from None


def _parse_bool(text, line, name, optional=True):
    if text == "" and optional:
        return None
    if text in ("1", "0"):
        return text == "1"
    raise TraceError(f"line {line}: bad flag for {name}: {text!r}")


_RISK_TEXT = {r.label: r for r in RiskLevel}


def _parse_risk(text, line, name):
    if text == "":
        return None
    try:
        return _RISK_TEXT[text]
    except KeyError:
        raise TraceError(f"line {line}: bad risk for {name}: {text!r}") from None


def parse_row(fields: list[str], line: int) -> Snapshot:
    if len(fields) != len(HEADER):
        raise TraceError(f"line {line}: expected {len(HEADER)} fields, got {len(fields)}")
    try:
        event = _EVENTS[fields[2]]
    except KeyError:
        raise TraceError(f"line {line}: unknown event {fields[2]!r}") from None
    return Snapshot(
        time=_parse_int(fields[0], line, "time_hms"),
        cycle=_parse_int(fields[1], line, "cycle"),
        event=event,
        node_id=_parse_int(fields[3], line, "node_id", optional=True),
        risk=_parse_risk(fields[4], line, "risk"),
        value=_parse_float(fields[5], line, "value"),
        c1=_parse_risk(fields[6], line, "c1"),
        c2=_parse_bool(fields[7], line, "c2", optional=False),
        c3=_parse_bool(fields[8], line, "c3", optional=False),
        battery_eu=_parse_float(fields[9], line, "battery_eu"),
        sampling_divisor=_parse_int(fields[10], line, "sampling_divisor", optional=True),
        energy_saving=_parse_bool(fields[11], line, "energy_saving"),
    )


def loads(text: str) -> Trace:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    digest = ""
    pos = 0
    if lines and lines[0].startswith(DIGEST_PREFIX):
        digest = lines[0][len(DIGEST_PREFIX):]
        pos = 1
    if pos >= len(lines) or tuple(lines[pos].split(",")) != HEADER:
        raise TraceError(f"line {pos + 1}: header does not match trace schema")
    snaps = []
    prev_time = None
    for offset, raw in enumerate(lines[pos + 1:]):
        line = pos + 2 + offset
        snap = parse_row(raw.split(","), line)
        if prev_time is not None and snap.time < prev_time:
            raise TraceError(f"line {line}: time decreases ({snap.time} < {prev_time})")
        prev_time = snap.time
        snaps.append(snap)
    if not snaps:
        raise TraceError("trace file has a header but no snapshots")
    trace = Trace(digest, snaps)
    first = snaps[0]
    if first.cycle != 0 or first.event is not Event.RELEASE:
        raise TraceError(f"line {pos + 2}: trace must start with the cycle 0 Release")
    return trace


def read_csv(path) -> Trace:
    with open(path, newline="") as fh:
        return loads(fh.read())
