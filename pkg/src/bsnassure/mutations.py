"""Single-snapshot trace edits that each break one verified property.

Every helper returns ``(mutated_trace, index)`` where ``index`` is the
position of the edited snapshot in the mutated trace; the verifier is
expected to report exactly that index as its witness.
"""

from __future__ import annotations

from .core import RiskLevel
from .trace import BODYHUB_ID, Event, Trace


class MutationError(ValueError):
    pass


def _pick(trace: Trace, pred, margin: int) -> int:
    """Index of the median snapshot matching ``pred`` that leaves ``margin`` cycles after it."""
    last = trace.num_cycles - 1
    hits = [i for i, s in enumerate(trace) if s.cycle + margin < last and pred(s)]
    if not hits:
        raise MutationError("no snapshot suitable for this mutation")
    return hits[len(hits) // 2]


def _first(trace: Trace, pred, start: int = 0) -> int:
    for i in range(start, len(trace)):
        if pred(trace[i]):
            return i
    raise MutationError("no snapshot suitable for this mutation")


def misorder_release(trace: Trace) -> tuple[Trace, int]:
    """Relabel a sensor-node Release so the FCFS order is broken (P2)."""
    nodes = sorted({s.node_id for s in trace if s.event is Event.COLLECTED})
    i = _pick(trace, lambda s: s.event is Event.RELEASE
              and s.node_id not in (None, BODYHUB_ID), 1)
    wrong = max(nodes) + 1
    return trace.replace_snapshot(i, node_id=wrong), i


def delete_snapshot(trace: Trace, index: int) -> Trace:
    snaps = list(trace.snapshots)
    del snaps[index]
    return Trace(trace.config_digest, snaps)


def delay_processing(trace: Trace, delay_ms: float = 300.0) -> tuple[Trace, int]:
    """Move the BodyHub's processing of one high-risk message to ``delay_ms`` after it was sent (P3).

    The snapshot keeps its content; only its time changes, so it is moved to
    the position (and cycle) where that time falls.
    """
    snaps = list(trace.snapshots)
    sent = _pick(trace, lambda s: s.event is Event.SENT and s.risk is RiskLevel.HIGH, 4)
    msg = snaps[sent]
    proc = _first(trace, lambda s: s.event is Event.PROCESSED and s.node_id == msg.node_id
                  and s.value == msg.value and s.risk == msg.risk, sent)
    new_time = msg.time + int(round(delay_ms * 100))
    moved = snaps.pop(proc)
    pos = next((j for j in range(proc, len(snaps)) if snaps[j].time > new_time), len(snaps))
    if pos == len(snaps):
        raise MutationError("trace ends before the delayed processing time")
    moved = moved._replace(time=new_time, cycle=snaps[pos - 1].cycle)
    snaps.insert(pos, moved)
    return Trace(trace.config_digest, snaps), pos


def orphan_collection(trace: Trace) -> tuple[Trace, int]:
    """Attribute one acquisition to a node the BodyHub never hears from (P7, P8)."""
    nodes = sorted({s.node_id for s in trace if s.event is Event.COLLECTED})
    i = _pick(trace, lambda s: s.event is Event.COLLECTED, 11)
    return trace.replace_snapshot(i, node_id=max(nodes) + 1), i


def undetected_processing(trace: Trace) -> tuple[Trace, int]:
    """Turn the first node Release after a Detected into a Processed with no detection after it (P10)."""
    det = _pick(trace, lambda s: s.event is Event.DETECTED, 1)
    i = _first(trace, lambda s: s.event is Event.RELEASE and s.node_id != BODYHUB_ID, det)
    if trace[i].cycle != trace[det].cycle:
        raise MutationError("no sensor node runs after the BodyHub in that cycle")
    return trace.replace_snapshot(i, event=Event.PROCESSED, risk=trace[det].risk), i


MUTATIONS = {
    "P2": misorder_release,
    "P3": delay_processing,
    "P7": orphan_collection,
    "P8": orphan_collection,
    "P10": undetected_processing,
}


def mutate_for(trace: Trace, property_id: str) -> tuple[Trace, int]:
    try:
        fn = MUTATIONS[property_id]
    except KeyError:
        raise MutationError(f"no mutation defined for {property_id}") from None
    return fn(trace)


__all__ = ["MUTATIONS", "MutationError", "delay_processing", "delete_snapshot",
           "misorder_release", "mutate_for", "orphan_collection", "undetected_processing"]
