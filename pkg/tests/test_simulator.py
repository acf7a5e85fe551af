from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsnassure.config import (Confirmation, EnergyModel, PatientProfile, Policy, ScenarioConfig,
                              TimingModel)
from bsnassure.core import DomainError, RiskLevel
from bsnassure.simulator import (ENERGY_SAVING_SENSORS, RISKS, BatteryCategory, BsnSimulation,
                                 acquisition_cost, classify_battery, controller_divisor,
                                 drain_battery, dwell_periods, dynamic_policy_update,
                                 replicated_majority, run_simulation, schedule_cycle,
                                 step_patient, three_of_five)
from bsnassure.trace import Event, dumps
from bsnassure.verifier import pooled_tsn, summarize

L, M, H = RiskLevel.LOW, RiskLevel.MODERATE, RiskLevel.HIGH
sim_settings = settings(max_examples=12, deadline=None)


def node_releases_per_cycle(trace):
    out = defaultdict(list)
    for s in trace:
        if s.event is Event.RELEASE:
            out[s.cycle].append(s.node_id)
    return out


# --- run_simulation ----------------------------------------------------------

def test_cycle_count():
    trace = run_simulation(ScenarioConfig(num_sensor_nodes=1, sim_duration_ms=1000.0, seed=7))
    assert trace.num_cycles == 10


def test_twenty_nodes_overrun_window():
    trace = run_simulation(ScenarioConfig(num_sensor_nodes=20, sim_duration_ms=20_000.0))
    assert summarize(pooled_tsn(trace)).mean > 100.0


def test_controller_off_acquires_every_cycle():
    cfg = ScenarioConfig(num_sensor_nodes=5, sim_duration_ms=10_000.0, controller_on=False)
    trace = run_simulation(cfg)
    divisors = {s.sampling_divisor for s in trace if s.sampling_divisor is not None}
    assert divisors == {1}
    collected = defaultdict(set)
    for s in trace:
        if s.event is Event.COLLECTED:
            collected[s.node_id].add(s.cycle)
    assert all(collected[n] == set(range(trace.num_cycles)) for n in range(1, 6))


def test_invalid_config_rejected_before_running():
    with pytest.raises(ValueError):
        run_simulation(ScenarioConfig(num_sensor_nodes=0))


@sim_settings
@given(st.integers(0, 2**32), st.integers(1, 6), st.booleans())
def test_determinism(seed, n, controller):
    cfg = ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=3000.0, seed=seed,
                         controller_on=controller)
    assert dumps(run_simulation(cfg)) == dumps(run_simulation(cfg))


@sim_settings
@given(st.integers(0, 2**32), st.integers(1, 12))
def test_fairness(seed, n):
    # Small battery so some nodes die mid-run and drop out of the release order.
    cfg = ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=6000.0, seed=seed,
                         energy=EnergyModel(battery_capacity_eu=150.0))
    trace = run_simulation(cfg)
    alive = set(range(1, n + 1))
    releases = node_releases_per_cycle(trace)
    dead_after = {}
    for s in trace:
        if s.event is Event.BATTERY_UPDATE and s.battery_eu <= 0 and s.node_id not in dead_after:
            dead_after[s.node_id] = s.cycle
    for cycle in range(trace.num_cycles):
        alive = {i for i in range(1, n + 1) if dead_after.get(i, cycle) >= cycle}
        assert releases[cycle] == [0, *sorted(alive)]


def _execution_costs(trace, energy, replicated=True):
    """Energy drained per node, recomputed from the events alone."""
    spent = defaultdict(float)
    saving = defaultdict(bool)
    collected = set()
    for s in trace:
        if s.event is Event.ADAPTATION_APPLIED:
            saving[s.node_id] = bool(s.energy_saving)
        elif s.event is Event.COLLECTED:
            collected.add((s.cycle, s.node_id))
            sensors = (ENERGY_SAVING_SENSORS if saving[s.node_id] else 5) if replicated else 1
            spent[s.node_id] += sensors * energy.cost_sample_eu
        elif s.event is Event.SENT:
            spent[s.node_id] += energy.cost_transmit_eu
        elif s.event is Event.RELEASE and s.node_id:
            spent[s.node_id] += energy.cost_idle_eu_per_cycle
    return spent


@sim_settings
@given(st.integers(0, 2**32), st.integers(1, 5), st.sampled_from(list(Policy)),
       st.sampled_from(list(Confirmation)))
def test_energy_conservation(seed, n, policy, confirmation):
    energy = EnergyModel(battery_capacity_eu=100_000.0)
    cfg = ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=8000.0, seed=seed, policy=policy,
                         confirmation=confirmation, energy=energy,
                         dwell_stats_ms={"low": 2000.0, "moderate": 900.0, "high": 300.0})
    trace = run_simulation(cfg)
    final = {}
    for s in trace:
        if s.event is Event.BATTERY_UPDATE:
            final[s.node_id] = s.battery_eu
    spent = _execution_costs(trace, energy, confirmation is Confirmation.REPLICATION)
    for nid in range(1, n + 1):
        assert energy.battery_capacity_eu - final[nid] == pytest.approx(spent[nid], abs=1e-9)


@sim_settings
@given(st.integers(0, 2**32), st.integers(1, 4))
def test_divisor_law(seed, n):
    profile = PatientProfile(dwell_min_ms=(1500.0, 1000.0, 800.0),
                             dwell_max_ms=(4000.0, 3000.0, 2000.0))
    cfg = ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=30_000.0, seed=seed,
                         controller_on=True, policy=Policy.STATIC, patient=profile,
                         energy=EnergyModel(battery_capacity_eu=100_000.0))
    trace = run_simulation(cfg)
    last = {}
    for s in trace:
        if s.event is Event.SENT:
            if s.node_id in last:
                cycle, risk = last[s.node_id]
                assert s.cycle - cycle == controller_divisor(risk, True)
            last[s.node_id] = (s.cycle, s.risk)


def test_tsn_monotone_without_jitter():
    means = []
    for n in (1, 4, 8, 12, 15, 16, 18, 20, 24):
        cfg = ScenarioConfig(num_sensor_nodes=n, sim_duration_ms=3000.0,
                             timing=TimingModel(jitter_fraction=0.0))
        means.append(summarize(pooled_tsn(run_simulation(cfg))).mean)
    assert means == sorted(means)
    assert means[0] == 100.0 and means[-1] > 100.0


# --- scheduling -------------------------------------------------------------

def starts_ms(execs):
    return [round((s - execs[0][1]) / 100, 2) for _, s, _ in execs]


def test_schedule_offsets():
    execs = schedule_cycle(0, [1, 2, 3], TimingModel(), Confirmation.THREE_OF_FIVE, 0.0)
    assert [m for m, _, _ in execs] == [0, 1, 2, 3]
    assert starts_ms(execs) == [0, 5, 11, 17]
    execs = schedule_cycle(0, [3, 1, 2], TimingModel(), Confirmation.REPLICATION, 0.0)
    assert starts_ms(execs) == [0, 5, 11.15, 17.3]


def test_schedule_twenty_nodes_busy_time():
    execs = schedule_cycle(0, range(1, 21), TimingModel(), Confirmation.THREE_OF_FIVE, 0.0)
    assert (execs[-1][2] - execs[0][1]) / 100 == 125.0


def test_schedule_zero_duration():
    timing = TimingModel(bodyhub_exec_ms=0, sensornode_exec_ms=0, replication_extra_per_sensor_ms=0)
    execs = schedule_cycle(4200, [1, 2, 3], timing, Confirmation.REPLICATION, 0.05,
                           [0.3, -1, 1, 0.5])
    assert all(s == e == 4200 for _, s, e in execs)


# --- confirmation -----------------------------------------------------------

def test_three_of_five():
    assert three_of_five([L, L, H, L, M]) is L
    assert three_of_five([L, L, M, M, H]) is None


def test_replication_majority():
    assert replicated_majority([L, L, L, H, M]) is L
    assert replicated_majority([L, H, M]) is H  # three-way tie goes to the riskier level


# --- controller and policies -------------------------------------------------

@pytest.mark.parametrize("risk,on,want", [(L, True, 10), (M, True, 5), (H, True, 1), (H, False, 1),
                                          (L, False, 1)])
def test_controller_divisor(risk, on, want):
    assert controller_divisor(risk, on) == want


@pytest.mark.parametrize("frac,want", [(0.50, BatteryCategory.GOOD), (1.0, BatteryCategory.GOOD),
                                       (0.49, BatteryCategory.MEDIUM),
                                       (0.15, BatteryCategory.MEDIUM),
                                       (0.149, BatteryCategory.CRITICAL),
                                       (0.0, BatteryCategory.CRITICAL)])
def test_classify_battery(frac, want):
    assert classify_battery(frac) is want


def test_classify_battery_domain():
    with pytest.raises(DomainError):
        classify_battery(1.2)


def test_dynamic_policy_examples():
    stats = {"moderate": 30 * 60_000.0}
    periods, saving = dynamic_policy_update(BatteryCategory.MEDIUM, stats, 100.0)
    assert periods[M] * 100.0 == 30 * 60_000.0 and not saving
    assert dynamic_policy_update(BatteryCategory.GOOD, stats, 100.0) == ({H: 1, M: 5, L: 10}, False)
    _, saving = dynamic_policy_update(BatteryCategory.CRITICAL, stats, 100.0)
    assert saving
    assert ENERGY_SAVING_SENSORS == 3


def test_dwell_periods_clamped_and_defaulted():
    assert dwell_periods(None, 100.0) == {H: 1, M: 5, L: 10}
    # Inverted dwells get clamped so that high <= moderate <= low.
    p = dwell_periods({"low": 300.0, "moderate": 2000.0, "high": 5000.0}, 100.0)
    assert p[H] == 50 and p[M] == 50 and p[L] == 50


def test_energy_saving_switches_off_two_sensors():
    cfg = ScenarioConfig(num_sensor_nodes=1, sim_duration_ms=400_000.0, seed=3,
                         policy=Policy.DYNAMIC, stop_on_depletion=True,
                         dwell_stats_ms={"low": 5000.0, "moderate": 2000.0, "high": 500.0})
    sim = BsnSimulation(cfg)
    sim.run()
    node = sim.nodes[0]
    assert node.energy_saving and node.active_sensors == 3


# --- patient ------------------------------------------------------------------

def test_absorbing_row():
    profile = PatientProfile(transition=((1, 0, 0), (0.3, 0.55, 0.15), (0.1, 0.4, 0.5)))
    rng = np.random.default_rng(0)
    risk, now = L, 0
    for _ in range(200):
        risk, now = step_patient(profile, risk, rng, now)
        assert risk is L


def test_forced_transition_and_dwell_bounds():
    profile = PatientProfile(transition=((0, 1, 0), (0.3, 0.55, 0.15), (0.1, 0.4, 0.5)))
    risk, end = step_patient(profile, L, np.random.default_rng(1), 1000)
    assert risk is M
    lo, hi = profile.dwell_min_ms[1] * 100, profile.dwell_max_ms[1] * 100
    assert lo <= end - 1000 <= hi


def power_iteration(p, steps=10_000):
    pi = np.full(3, 1 / 3)
    for _ in range(steps):
        pi = pi @ p
    return pi


def test_jump_chain_frequencies_match_stationary_distribution():
    profile = PatientProfile()
    rng = np.random.default_rng(7)
    counts = np.zeros(3)
    risk, now = L, 0
    for _ in range(10**6):
        risk, now = step_patient(profile, risk, rng, now)
        counts[int(risk)] += 1
    target = power_iteration(np.array(profile.transition))
    assert np.abs(counts / counts.sum() - target).max() <= 0.02


# --- energy ----------------------------------------------------------------------

def test_drain_examples():
    e = EnergyModel()
    assert 1000 - drain_battery(1000, 1, True, e) == pytest.approx(1.0 + 0.5 + 0.01)
    assert 1000 - drain_battery(1000, 0, False, e) == pytest.approx(0.01)
    assert 1000 - drain_battery(1000, 5, True, e) == pytest.approx(5 * 1.0 + 0.5 + 0.01)
    assert drain_battery(2.0, 5, True, e) == 0.0
    assert acquisition_cost(e, 3) == 3.5


def test_risk_constants():
    assert RISKS == (L, M, H)
