"""Deterministic discrete-event simulation of the body sensor network.

One scheduler cycle releases the BodyHub and then every live sensor node in
ascending id order (FCFS, non-preemptive). A cycle that overruns its period
delays the next cycle; no work is dropped.

Sensors latch their sample on the cycle tick. During its FCFS turn a node
confirms the reading, transmits the confirmed status, pays for the work and
runs its MAPE step (plan the number of cycles until the next acquisition).
The BodyHub consumes in its turn everything sent during earlier cycles.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import Confirmation, EnergyModel, PatientProfile, Policy, ScenarioConfig, TimingModel
from .core import (DomainError, OUTER_RANGE, RiskLevel, VitalKind, classify_vital,
                   expressible_levels, fuse_status, ms_to_ticks)
from .trace import BODYHUB_ID, Event, Snapshot, Trace

RISKS = (RiskLevel.LOW, RiskLevel.MODERATE, RiskLevel.HIGH)
NODE_KINDS = (VitalKind.OXYGENATION, VitalKind.PULSE_RATE, VitalKind.TEMPERATURE)

STATIC_DIVISORS = {RiskLevel.HIGH: 1, RiskLevel.MODERATE: 5, RiskLevel.LOW: 10}
UNCONTROLLED = {r: 1 for r in RISKS}
REPLICATED_SENSORS = 5
ENERGY_SAVING_SENSORS = 3
STATIC_POLICY_TRIGGER = 0.5


class BatteryCategory(enum.Enum):
    GOOD = "good"
    MEDIUM = "medium"
    CRITICAL = "critical"


def classify_battery(charge_fraction: float) -> BatteryCategory:
    if not 0.0 <= charge_fraction <= 1.0:
        raise DomainError(f"charge fraction {charge_fraction!r} outside [0, 1]")
    if charge_fraction >= 0.50:
        return BatteryCategory.GOOD
    if charge_fraction >= 0.15:
        return BatteryCategory.MEDIUM
    return BatteryCategory.CRITICAL


def controller_divisor(risk: RiskLevel, controller_on: bool) -> int:
    """Cycles between acquisitions planned for a node at the given risk."""
    return STATIC_DIVISORS[risk] if controller_on else 1


def node_kind(node_id: int) -> VitalKind:
    return NODE_KINDS[(node_id - 1) % len(NODE_KINDS)]


def target_level(kind: VitalKind, risk: RiskLevel) -> RiskLevel:
    """Level a vital of this kind shows when the patient is at ``risk``.

    Pulse rate has no moderate band, so a moderate patient has a low-risk pulse.
    """
    return risk if risk in expressible_levels(kind) else RiskLevel.LOW


# --- patient ---------------------------------------------------------------

def stationary_distribution(transition) -> np.ndarray:
    """Stationary distribution of the embedded jump chain."""
    p = np.asarray(transition, dtype=float)
    a = np.vstack([p.T - np.eye(3), np.ones(3)])
    b = np.array([0.0, 0.0, 0.0, 1.0])
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi


def step_patient(profile: PatientProfile, risk: RiskLevel, rng: np.random.Generator,
                 now: int) -> tuple[RiskLevel, int]:
    """Jump to the next risk at dwell expiry and draw its dwell end (ticks)."""
    row = profile.transition[int(risk)]
    nxt = RISKS[int(rng.choice(3, p=row))]
    return nxt, now + draw_dwell(profile, nxt, rng)


def draw_dwell(profile: PatientProfile, risk: RiskLevel, rng: np.random.Generator) -> int:
    lo = profile.dwell_min_ms[int(risk)]
    hi = profile.dwell_max_ms[int(risk)]
    return max(1, ms_to_ticks(rng.uniform(lo, hi)))


def sample_vital(profile: PatientProfile, kind: VitalKind, risk: RiskLevel,
                 rng: np.random.Generator) -> float:
    level = target_level(kind, risk)
    value = rng.normal(profile.mean(kind, level), profile.stddev(kind, level))
    lo, hi = OUTER_RANGE[kind]
    return float(min(max(value, lo + 0.01), hi))


# --- confirmation ------------------------------------------------------------

def three_of_five(window) -> Optional[RiskLevel]:
    """Level seen at least three times in the last five reads, else None."""
    for level in RISKS:
        if sum(1 for x in window if x == level) >= 3:
            return level
    return None


def replicated_majority(levels) -> RiskLevel:
    """Majority of redundant reads; a tie goes to the riskier level."""
    counts = {lvl: 0 for lvl in RISKS}
    for lvl in levels:
        counts[lvl] += 1
    best = max(counts.values())
    return max(lvl for lvl, c in counts.items() if c == best)


# --- energy ----------------------------------------------------------------

def acquisition_cost(energy: EnergyModel, sensors: int, transmit: bool = True) -> float:
    return sensors * energy.cost_sample_eu + (energy.cost_transmit_eu if transmit else 0.0)


def drain_battery(battery_eu: float, sensors_sampled: int, transmitted: bool,
                  energy: EnergyModel) -> float:
    """Battery after one node execution, floored at zero."""
    cost = energy.cost_idle_eu_per_cycle + acquisition_cost(energy, sensors_sampled, transmitted)
    return max(0.0, battery_eu - cost)


# --- adaptation --------------------------------------------------------------

def dwell_periods(dwell_stats_ms: Optional[dict], period_ms: float) -> dict[RiskLevel, int]:
    """Per-risk sampling period in whole cycles from mined minimum dwells.

    Risks without a mined dwell keep the static divisor. Periods are clamped
    so that high <= moderate <= low.
    """
    periods = dict(STATIC_DIVISORS)
    for risk in RISKS:
        if dwell_stats_ms and risk.label in dwell_stats_ms:
            periods[risk] = max(1, int(dwell_stats_ms[risk.label] // period_ms))
    periods[RiskLevel.MODERATE] = max(periods[RiskLevel.MODERATE], periods[RiskLevel.HIGH])
    periods[RiskLevel.LOW] = max(periods[RiskLevel.LOW], periods[RiskLevel.MODERATE])
    return periods


def dynamic_policy_update(category: BatteryCategory, dwell_stats_ms: Optional[dict],
                          period_ms: float, *, battery_eu: float = float("inf"),
                          risk: Optional[RiskLevel] = None, sensors: int = REPLICATED_SENSORS,
                          energy: Optional[EnergyModel] = None,
                          energy_saving: bool = False) -> tuple[dict[RiskLevel, int], bool]:
    """Sampling periods per risk and the energy-saving flag for one node.

    Energy saving is latched: once entered it is never left, since charge
    only decreases.
    """
    if category is BatteryCategory.GOOD and not energy_saving:
        return dict(STATIC_DIVISORS), False
    periods = dwell_periods(dwell_stats_ms, period_ms)
    if category is BatteryCategory.CRITICAL or energy_saving:
        return periods, True
    if energy is not None and risk is not None:
        need = periods[risk] * energy.cost_idle_eu_per_cycle + acquisition_cost(energy, sensors)
        if need > battery_eu:
            return periods, True
    return periods, False


# --- scheduling -------------------------------------------------------------

def jittered_ticks(nominal_ms: float, jitter: float, u: float) -> int:
    return max(0, ms_to_ticks(nominal_ms * (1.0 + jitter * u)))


def node_exec_ms(timing: TimingModel, confirmation: Confirmation) -> float:
    extra = timing.replication_extra_per_sensor_ms if confirmation is Confirmation.REPLICATION else 0.0
    return timing.sensornode_exec_ms + extra


def schedule_cycle(start: int, node_ids, timing: TimingModel, confirmation: Confirmation,
                   jitter: float, uniforms=None) -> list[tuple[int, int, int]]:
    """FCFS executions of one cycle as (module_id, start_tick, end_tick).

    The BodyHub (module 0) runs first, then the given nodes in ascending id.
    ``uniforms`` supplies one draw in [-1, 1] per execution.
    """
    ids = [BODYHUB_ID, *sorted(node_ids)]
    if uniforms is None:
        uniforms = [0.0] * len(ids)
    node_ms = node_exec_ms(timing, confirmation)
    out = []
    t = start
    for mid, u in zip(ids, uniforms):
        nominal = timing.bodyhub_exec_ms if mid == BODYHUB_ID else node_ms
        end = t + jittered_ticks(nominal, jitter, u)
        out.append((mid, t, end))
        t = end
    return out


# --- engine -----------------------------------------------------------------

@dataclass
class SensorNodeState:
    node_id: int
    kind: VitalKind
    battery_eu: float
    active_sensors: int
    window: deque = field(default_factory=lambda: deque(maxlen=5))
    confirmed: Optional[RiskLevel] = None
    sampling_divisor: int = 1
    cycles_since_last_acquisition: int = 0
    acquired_once: bool = False
    table: dict = field(default_factory=lambda: dict(UNCONTROLLED))
    energy_saving: bool = False
    alive: bool = True
    depleted_at: Optional[int] = None


class BsnSimulation:
    def __init__(self, config: ScenarioConfig):
        self.config = config.validate()
        cfg = self.config
        patient_ss, sensor_ss, timing_ss = np.random.SeedSequence(cfg.seed).spawn(3)
        self.patient_rng = np.random.default_rng(patient_ss)
        self.sensor_rng = np.random.default_rng(sensor_ss)
        self.timing_rng = np.random.default_rng(timing_ss)

        self.period = ms_to_ticks(cfg.scheduler_period_ms)
        self.duration = ms_to_ticks(cfg.sim_duration_ms)
        self.jitter = cfg.effective_jitter
        replicated = cfg.confirmation is Confirmation.REPLICATION
        self.nodes = [
            SensorNodeState(i, node_kind(i), cfg.energy.battery_capacity_eu,
                            REPLICATED_SENSORS if replicated else 1)
            for i in range(1, cfg.num_sensor_nodes + 1)
        ]
        self.c1: Optional[RiskLevel] = None
        self.c2 = cfg.controller_on or cfg.policy is Policy.DYNAMIC
        self.c3 = cfg.realtime_on
        self.inbox: list[tuple[int, RiskLevel, float]] = []
        self.latest: dict[int, RiskLevel] = {}
        self.bodyhub_energy_eu = 0.0
        self.rows: list[Snapshot] = []
        self.cycle = 0
        self.cycle_start = 0

        if cfg.patient.initial_risk is not None:
            self.risk = RiskLevel.parse(cfg.patient.initial_risk)
        else:
            pi = stationary_distribution(cfg.patient.transition)
            self.risk = RISKS[int(self.patient_rng.choice(3, p=pi / pi.sum()))]
        self.dwell_end = draw_dwell(cfg.patient, self.risk, self.patient_rng)

    # rows -----------------------------------------------------------------
    def _row(self, time, event, node_id=None, risk=None, value=None,
             battery=None, divisor=None, saving=None):
        self.rows.append(Snapshot(time, self.cycle, event, node_id, risk, value,
                                  self.c1, self.c2, self.c3, battery, divisor, saving))

    # policy ---------------------------------------------------------------
    def _desired_table(self, node: SensorNodeState) -> tuple[dict, bool]:
        cfg = self.config
        if cfg.policy is Policy.DYNAMIC:
            frac = node.battery_eu / cfg.energy.battery_capacity_eu
            return dynamic_policy_update(
                classify_battery(min(1.0, max(0.0, frac))), cfg.dwell_stats_ms,
                cfg.scheduler_period_ms, battery_eu=node.battery_eu, risk=node.confirmed,
                sensors=node.active_sensors, energy=cfg.energy, energy_saving=node.energy_saving)
        if self.c2:
            return dict(STATIC_DIVISORS), False
        return dict(UNCONTROLLED), False

    def _apply_policy(self, node: SensorNodeState, time: int, force_log=False):
        table, saving = self._desired_table(node)
        entered_saving = saving and not node.energy_saving
        if entered_saving:
            node.energy_saving = True
            if self.config.confirmation is Confirmation.REPLICATION:
                node.active_sensors = ENERGY_SAVING_SENSORS
        if table != node.table or force_log or entered_saving:
            node.table = table
            for risk in RISKS:
                self._row(time, Event.ADAPTATION_APPLIED, node.node_id, risk,
                          divisor=table[risk], saving=node.energy_saving)
        if node.confirmed is not None:
            node.sampling_divisor = node.table[node.confirmed]

    # one cycle ------------------------------------------------------------
    def _due(self, node: SensorNodeState) -> bool:
        return (not node.acquired_once
                or node.cycles_since_last_acquisition + 1 >= node.sampling_divisor)

    def _acquire(self, node: SensorNodeState) -> tuple[RiskLevel, float, Optional[RiskLevel]]:
        """Latch the sample; returns (collected level, value, confirmed or None)."""
        profile = self.config.patient
        if self.config.confirmation is Confirmation.THREE_OF_FIVE:
            value = sample_vital(profile, node.kind, self.risk, self.sensor_rng)
            level = classify_vital(node.kind, value)
            node.window.append(level)
            return level, value, three_of_five(node.window)
        values = [sample_vital(profile, node.kind, self.risk, self.sensor_rng)
                  for _ in range(node.active_sensors)]
        levels = [classify_vital(node.kind, v) for v in values]
        level = replicated_majority(levels)
        agreeing = sorted(v for v, lv in zip(values, levels) if lv == level)
        return level, float(np.median(agreeing)), level

    def dispatch_cycle(self, k: int) -> list[tuple[int, int, int]]:
        """Run cycle ``k`` and return its executions (module, start, end)."""
        cfg = self.config
        self.cycle = k
        start = self.cycle_start
        live = [n for n in self.nodes if n.alive]

        self._row(start, Event.RELEASE, BODYHUB_ID)
        if k == 0:
            self._row(start, Event.RISK_TRANSITION, risk=self.risk)
            for node in self.nodes:
                self._row(start, Event.BATTERY_UPDATE, node.node_id, battery=node.battery_eu,
                          divisor=node.sampling_divisor, saving=node.energy_saving)
                self._apply_policy(node, start, force_log=True)
        # Every dwell expiry is logged, self-jumps included, so each dwell is a closed segment.
        while start >= self.dwell_end:
            self.risk, self.dwell_end = step_patient(cfg.patient, self.risk, self.patient_rng,
                                                     self.dwell_end)
            self._row(start, Event.RISK_TRANSITION, risk=self.risk)

        pending = {}
        for node in live:
            if self._due(node):
                level, value, confirmed = self._acquire(node)
                pending[node.node_id] = (value, confirmed, node.active_sensors)
                self._row(start, Event.COLLECTED, node.node_id, level, value)

        uniforms = (self.timing_rng.uniform(-1.0, 1.0, size=len(live) + 1)
                    if self.jitter > 0 else None)
        execs = schedule_cycle(start, [n.node_id for n in live], cfg.timing,
                               cfg.confirmation, self.jitter, uniforms)

        # BodyHub
        _, bh_start, bh_end = execs[0]
        inbox, self.inbox = self.inbox, []
        for node_id, risk, value in inbox:
            self._row(bh_start, Event.RECEIVED, node_id, risk, value)
        for node_id, risk, value in inbox:
            self.latest[node_id] = risk
            self.bodyhub_energy_eu += cfg.energy.cost_process_eu
            self._row(bh_end, Event.PROCESSED, node_id, risk, value)
            self._row(bh_end, Event.PERSISTED, node_id, risk, value)
        if inbox:
            self.c1 = fuse_status(self.latest.values())
            self._row(bh_end, Event.DETECTED, risk=self.c1)

        # sensor nodes
        for node, (_, n_start, n_end) in zip(live, execs[1:]):
            self._row(n_start, Event.RELEASE, node.node_id)
            acq = pending.get(node.node_id)
            sampled, sent = 0, False
            if acq is not None:
                value, confirmed, sampled = acq
                if confirmed is not None:
                    node.confirmed = confirmed
                if node.confirmed is not None:
                    sent = True
                    self.inbox.append((node.node_id, node.confirmed, value))
                    self._row(n_end, Event.SENT, node.node_id, node.confirmed, value)
                node.acquired_once = True
                node.cycles_since_last_acquisition = 0
            else:
                node.cycles_since_last_acquisition += 1

            node.battery_eu = drain_battery(node.battery_eu, sampled, sent, cfg.energy)
            if (cfg.policy is Policy.STATIC and not self.c2
                    and node.battery_eu <= STATIC_POLICY_TRIGGER * cfg.energy.battery_capacity_eu):
                self.c2 = True
            self._apply_policy(node, n_end)
            self._row(n_end, Event.BATTERY_UPDATE, node.node_id, battery=node.battery_eu,
                      divisor=node.sampling_divisor, saving=node.energy_saving)
            if node.battery_eu <= 0.0:
                node.alive = False
                node.depleted_at = n_end

        end = execs[-1][2]
        self.cycle_start = max((k + 1) * self.period, end)
        return execs

    def run(self) -> Trace:
        k = 0
        while self.cycle_start < self.duration:
            self.dispatch_cycle(k)
            k += 1
            if self.config.stop_on_depletion and not any(n.alive for n in self.nodes):
                break
        return Trace(self.config.digest(), self.rows)


def run_simulation(config: ScenarioConfig) -> Trace:
    return BsnSimulation(config).run()
