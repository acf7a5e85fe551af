import json

import pytest
from hypothesis import given, settings, strategies as st

from bsnassure.config import ScenarioConfig
from bsnassure.core import RiskLevel
from bsnassure.mutations import delete_snapshot
from bsnassure.selftest import load_scenario
from bsnassure.simulator import run_simulation
from bsnassure.trace import Event, Snapshot, Trace, dumps, loads
from bsnassure.verifier import (PROPERTY_IDS, MetricSeries, Verdict, check_all, check_property,
                                compute_ted, compute_tsn, pooled_tsn, report_json, summarize,
                                verdicts_from_report, verify_report)

H = RiskLevel.HIGH


def ms(x):
    return int(round(x * 100))


def snap(t_ms, cycle, event, node=None, risk=None, value=None, **kw):
    return Snapshot(ms(t_ms), cycle, event, node, risk, value, **kw)


def release_cycles(n_cycles, extra=()):
    """BodyHub releases every 100 ms plus any extra snapshots, in time order."""
    rows = [snap(100 * c, c, Event.RELEASE, 0) for c in range(n_cycles)]
    rows += list(extra)
    return Trace("t", sorted(rows, key=lambda s: (s.time, s.cycle)))


@pytest.fixture(scope="module")
def nominal():
    return run_simulation(load_scenario("nominal_5"))


# --- metrics ---------------------------------------------------------------------

def test_tsn_subtraction():
    t = release_cycles(2, [snap(100, 1, Event.COLLECTED, 1, H, 80.0),
                           snap(180, 1, Event.COLLECTED, 1, H, 80.0)])
    assert compute_tsn(t, 1).samples == (80.0,)


def test_tsn_exceeding_bound():
    t = release_cycles(3, [snap(0, 0, Event.COLLECTED, 1), snap(100, 1, Event.COLLECTED, 1),
                           snap(225, 2, Event.COLLECTED, 1)])
    series = compute_tsn(t, 1)
    assert series.samples == (100.0, 125.0)
    assert summarize(series).violation_fraction == 0.5


def test_tsn_single_collection():
    t = release_cycles(1, [snap(0, 0, Event.COLLECTED, 1)])
    assert compute_tsn(t, 1).samples == ()


def emergency(sent_ms, processed_ms=None):
    rows = [snap(sent_ms, 10, Event.COLLECTED, 1, H, 85.0),
            snap(sent_ms, 10, Event.SENT, 1, H, 85.0)]
    if processed_ms is not None:
        rows.append(snap(processed_ms, 10 + int((processed_ms - 1000) // 100),
                         Event.PROCESSED, 1, H, 85.0))
    return release_cycles(16, rows)


def test_ted_within_bound():
    t = emergency(1000, 1200)
    assert compute_ted(t).samples == (200.0,)
    assert check_property(t, "P3").verdict is Verdict.VIOLATED  # two cycles old


def test_ted_violation():
    t = emergency(1000, 1300)
    assert compute_ted(t).samples == (300.0,)
    v = check_property(t, "P3")
    assert v.verdict is Verdict.VIOLATED and "300" in v.witness[1]


def test_ted_within_bound_and_fresh():
    t = emergency(1000, 1080)
    assert compute_ted(t).samples == (80.0,)
    assert check_property(t, "P3").verdict is Verdict.SATISFIED


def test_ted_pending():
    t = emergency(1000)
    assert compute_ted(t).samples == () and compute_ted(t).pending == 1
    assert check_property(t, "P3").verdict is Verdict.PENDING


@pytest.mark.parametrize("samples,bound,mean,vf", [
    ((80, 90, 100), 100, 90, 0.0), ((120,), 100, 120, 1.0), ((50, 150), 100, 100, 0.5)])
def test_summarize(samples, bound, mean, vf):
    s = summarize(MetricSeries("T_SN", None, samples, bound))
    assert s.mean == mean and s.violation_fraction == vf


def test_summarize_empty():
    with pytest.raises(ValueError):
        summarize(MetricSeries("T_SN", None, (), 100))


# --- verdicts on simulated traces --------------------------------------------

def test_nominal_all_satisfied(nominal):
    verdicts = check_all(nominal)
    assert [v.property_id for v in verdicts] == list(PROPERTY_IDS)
    assert all(v.verdict is Verdict.SATISFIED for v in verdicts)
    assert all(v.checked > 0 for v in verdicts)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_small_default_runs_keep_p3(seed):
    for n in (1, 5, 10):
        t = run_simulation(ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=20_000.0,
                                          seed=seed))
        assert check_property(t, "P3").violated == 0


def test_deleted_execution_violates_p2(nominal):
    i = next(k for k, s in enumerate(nominal.snapshots)
             if s.cycle == 40 and s.event is Event.RELEASE and s.node_id == 3)
    v = check_property(delete_snapshot(nominal, i), "P2")
    assert v.verdict is Verdict.VIOLATED
    assert 40 in v.violating_cycles and "cycle 40" in v.witness[1]


def test_twenty_nodes_violate_window():
    t = run_simulation(ScenarioConfig(num_sensor_nodes=20, sim_duration_ms=5000.0))
    v = check_property(t, "P2")
    assert v.verdict is Verdict.VIOLATED and v.violated == t.num_cycles


def test_missing_cycle_violates_p1():
    rows = [snap(0, 0, Event.RELEASE, 0), snap(200, 2, Event.RELEASE, 0)]
    v = check_property(Trace("t", rows), "P1")
    assert v.verdict is Verdict.VIOLATED and v.witness[0] == 1


def test_p9_missing_risk():
    t = release_cycles(2, [snap(100, 1, Event.PROCESSED, 1, None, 95.0)])
    assert check_property(t, "P9").verdict is Verdict.VIOLATED


def test_vacuous_verdicts():
    t = release_cycles(3)
    by_id = {v.property_id: v.verdict for v in check_all(t)}
    assert by_id["P9"] is Verdict.SATISFIED
    assert by_id["P4"] is Verdict.SATISFIED
    # Response properties with no resolved obligation stay Pending.
    assert by_id["P7"] is Verdict.PENDING and by_id["P10"] is Verdict.PENDING


def test_unknown_property():
    with pytest.raises(KeyError):
        check_property(release_cycles(1), "P11")


def test_controller_gap_violation():
    # Node 1 at high risk with divisor 1 skips a cycle.
    rows = [snap(0, 0, Event.ADAPTATION_APPLIED, 1, H, sampling_divisor=1, c2=True)]
    for c in (1, 2, 4):
        rows += [snap(100 * c, c, Event.COLLECTED, 1, H, 85.0, c2=True),
                 snap(100 * c + 10, c, Event.SENT, 1, H, 85.0, c2=True),
                 snap(100 * c + 10, c, Event.BATTERY_UPDATE, 1, battery_eu=900.0, c2=True)]
    t = release_cycles(6, rows)
    v = check_property(t, "P4")
    assert v.verdict is Verdict.VIOLATED and v.checked == 2 and v.violated == 1
    assert t[v.witness[0]].cycle == 4


def test_controller_off_not_judged():
    rows = []
    for c in (1, 4):
        rows += [snap(100 * c, c, Event.COLLECTED, 1, H, 85.0),
                 snap(100 * c + 10, c, Event.SENT, 1, H, 85.0),
                 snap(100 * c + 10, c, Event.BATTERY_UPDATE, 1, battery_eu=900.0)]
    v = check_property(release_cycles(6, rows), "P4")
    assert v.checked == 0 and v.verdict is Verdict.SATISFIED


def test_response_horizon():
    rows = [snap(100, 1, Event.COLLECTED, 1, H, 85.0)]
    late = release_cycles(14, rows + [snap(1250, 12, Event.PROCESSED, 1, H, 85.0)])
    assert check_property(late, "P7").verdict is Verdict.VIOLATED
    on_time = release_cycles(14, rows + [snap(1150, 11, Event.PROCESSED, 1, H, 85.0)])
    assert check_property(on_time, "P7").verdict is Verdict.SATISFIED
    open_end = release_cycles(5, rows)
    assert check_property(open_end, "P7").verdict is Verdict.PENDING
    expired = release_cycles(13, rows)
    assert check_property(expired, "P7").verdict is Verdict.VIOLATED


# --- reports -------------------------------------------------------------------

def test_report_round_trip(nominal):
    report = verify_report(nominal, ["P4", "P2"])
    text = report_json(report)
    assert [p["id"] for p in json.loads(text)["properties"]] == ["P2", "P4"]
    verdicts = verdicts_from_report(json.loads(text))
    assert verdicts["P4"] == check_property(nominal, "P4")
    assert report["metrics"]["T_SN"]["bound_ms"] == 100.0
    assert report["config_digest"] == nominal.config_digest


def test_metrics_survive_csv_round_trip(nominal):
    back = loads(dumps(nominal))
    assert pooled_tsn(back) == pooled_tsn(nominal)
    assert compute_ted(back) == compute_ted(nominal)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 6), st.booleans())
def test_metrics_round_trip_any(seed, n, controller):
    t = run_simulation(ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=3000.0, seed=seed,
                                      controller_on=controller))
    back = loads(dumps(t))
    assert pooled_tsn(back) == pooled_tsn(t) and compute_ted(back) == compute_ted(t)


def prefix(trace, cycles):
    snaps = [s for s in trace if s.cycle < cycles]
    return Trace(trace.config_digest, snaps)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 4))
def test_monotone_pending(seed, n):
    t = run_simulation(ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=4000.0, seed=seed,
                                      controller_on=True))
    for pid in ("P3", "P7", "P8", "P10"):
        seen_satisfied = False
        for c in range(1, t.num_cycles + 1):
            v = check_property(prefix(t, c), pid).verdict
            if seen_satisfied:
                assert v is not Verdict.PENDING, (pid, c)
            seen_satisfied |= v is Verdict.SATISFIED
