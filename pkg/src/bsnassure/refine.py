"""Closing the loop: mine dwell statistics, derive a dynamic sampling policy,
predict node lifetime in closed form, re-simulate, compare and re-verify.
"""

from __future__ import annotations

import bisect
import io
import json
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .config import Confirmation, EnergyModel, Policy, ScenarioConfig
from .core import RiskLevel, ticks_to_ms
from .simulator import (ENERGY_SAVING_SENSORS, REPLICATED_SENSORS, RISKS, STATIC_DIVISORS,
                        STATIC_POLICY_TRIGGER, UNCONTROLLED, BsnSimulation, dwell_periods)
from .trace import Event, Trace
from .verifier import Verdict, check_all

ARMS = ("non-controlled", "static", "dynamic")
GOOD_FLOOR = 0.5
MEDIUM_FLOOR = 0.15


class RefineError(ValueError):
    pass


def min_dwell_per_risk(trace: Trace) -> dict[RiskLevel, float]:
    """Shortest completed stay (ms) in each risk level; the open stay at the end is ignored."""
    changes = [(s.time, s.risk) for s in trace if s.event is Event.RISK_TRANSITION]
    out: dict[RiskLevel, float] = {}
    for (t0, risk), (t1, _) in zip(changes, changes[1:]):
        d = ticks_to_ms(t1 - t0)
        if risk not in out or d < out[risk]:
            out[risk] = d
    return out


@dataclass(frozen=True)
class RefinedPolicy:
    periods: dict  # RiskLevel -> cycles, used while the battery is Medium
    good_floor: float = GOOD_FLOOR
    critical_floor: float = MEDIUM_FLOOR
    dwell_stats_ms: dict = field(default_factory=dict)  # risk label -> ms
    provenance: str = ""
    diagnostics: tuple = ()

    def to_json(self):
        return {
            "periods_cycles": {r.label: self.periods[r] for r in RISKS},
            "energy_saving_below": self.critical_floor,
            "static_above": self.good_floor,
            "dwell_stats_ms": dict(self.dwell_stats_ms),
            "provenance": self.provenance,
            "diagnostics": list(self.diagnostics),
        }


def derive_policy(dwells: Mapping[RiskLevel, float], period_ms: float,
                  provenance: str = "") -> RefinedPolicy:
    stats = {r.label: float(dwells[r]) for r in RISKS if r in dwells}
    periods = dwell_periods(stats, period_ms)
    notes = []
    raw = {r: max(1, int(stats[r.label] // period_ms)) for r in RISKS if r.label in stats}
    for r in RISKS:
        if r not in raw:
            notes.append(f"no completed {r.label} dwell observed; static divisor kept")
        elif raw[r] != periods[r]:
            notes.append(f"{r.label} period clamped from {raw[r]} to {periods[r]} cycles "
                         "to keep high <= moderate <= low")
    return RefinedPolicy(periods, dwell_stats_ms=stats, provenance=provenance,
                         diagnostics=tuple(notes))


# --- closed-form lifetime -----------------------------------------------------

def cycle_cost(energy: EnergyModel, period_cycles: float, sensors: int) -> float:
    """Average e.u. per cycle for a node acquiring every ``period_cycles`` cycles."""
    return (energy.cost_idle_eu_per_cycle
            + (sensors * energy.cost_sample_eu + energy.cost_transmit_eu) / period_cycles)


def expected_lifetime(periods: Mapping[RiskLevel, float], fractions: Mapping[RiskLevel, float],
                      energy: EnergyModel, period_ms: float = 100.0,
                      sensors: int = REPLICATED_SENSORS,
                      charge_eu: Optional[float] = None) -> float:
    """Milliseconds until ``charge_eu`` (default: full capacity) is spent.

    capacity / sum_r f_r * cost_r(period_r), converted with the scheduler period.
    """
    total = math.fsum(fractions.values())
    if not math.isclose(total, 1.0, abs_tol=1e-9):
        raise RefineError(f"risk fractions sum to {total}, not 1")
    rate = math.fsum(f * cycle_cost(energy, periods[r], sensors)
                     for r, f in fractions.items() if f > 0)
    if rate <= 0:
        raise RefineError("zero consumption rate: lifetime is unbounded")
    charge = energy.battery_capacity_eu if charge_eu is None else charge_eu
    return charge / rate * period_ms


def _arm_segments(arm: str, config: ScenarioConfig, policy: Optional[RefinedPolicy]):
    """(charge fraction from, to, periods, sensors) for the battery segments of an arm."""
    if arm == "non-controlled":
        return [(1.0, 0.0, UNCONTROLLED, REPLICATED_SENSORS)]
    if arm == "static":
        return [(1.0, STATIC_POLICY_TRIGGER, UNCONTROLLED, REPLICATED_SENSORS),
                (STATIC_POLICY_TRIGGER, 0.0, STATIC_DIVISORS, REPLICATED_SENSORS)]
    medium = policy.periods if policy is not None else STATIC_DIVISORS
    saving = ENERGY_SAVING_SENSORS if config.confirmation is Confirmation.REPLICATION else 1
    return [(1.0, GOOD_FLOOR, STATIC_DIVISORS, REPLICATED_SENSORS),
            (GOOD_FLOOR, MEDIUM_FLOOR, medium, REPLICATED_SENSORS),
            (MEDIUM_FLOOR, 0.0, medium, saving)]


def risk_fractions_by_segment(trace: Trace, node_id: int, bounds: Sequence[float],
                              capacity: float) -> list[dict]:
    """Share of cycles spent at each risk in force, per battery segment.

    ``bounds`` are the descending charge fractions that open each segment.
    """
    counts = [defaultdict(int) for _ in bounds]
    risk = None
    battery = capacity
    first = True  # the cycle-0 update reports the initial charge, not an execution
    for s in trace:
        if s.node_id != node_id:
            continue
        if s.event is Event.SENT:
            risk = s.risk
        elif s.event is Event.BATTERY_UPDATE:
            if first:
                first = False
                continue
            if risk is not None:
                frac = battery / capacity
                seg = max(i for i, b in enumerate(bounds) if frac <= b + 1e-12)
                counts[seg][risk] += 1
            battery = s.battery_eu
            if battery <= 0:
                break
    out = []
    for c in counts:
        n = sum(c.values())
        out.append({r: c[r] / n for r in RISKS if c[r]} if n else {})
    return out


def oracle_lifetime(arm: str, trace: Trace, node_id: int, config: ScenarioConfig,
                    policy: Optional[RefinedPolicy]) -> float:
    """Piecewise closed-form lifetime of one node using the risk mix it experienced."""
    segments = _arm_segments(arm, config, policy)
    capacity = config.energy.battery_capacity_eu
    fracs = risk_fractions_by_segment(trace, node_id, [s[0] for s in segments], capacity)
    total = 0.0
    for (hi, lo, periods, sensors), f in zip(segments, fracs):
        if not f:
            continue
        total += expected_lifetime(periods, f, config.energy, config.scheduler_period_ms,
                                   sensors, charge_eu=(hi - lo) * capacity)
    return total


# --- three-arm comparison -----------------------------------------------------

def arm_config(base: ScenarioConfig, arm: str, seed: int,
               policy: Optional[RefinedPolicy], uncontrolled: bool = False) -> ScenarioConfig:
    if arm == "non-controlled" or uncontrolled:
        return base.replace(seed=seed, controller_on=False, policy=Policy.NONE,
                            stop_on_depletion=True)
    if arm == "static":
        return base.replace(seed=seed, controller_on=False, policy=Policy.STATIC,
                            stop_on_depletion=True)
    return base.replace(seed=seed, controller_on=True, policy=Policy.DYNAMIC,
                        dwell_stats_ms=dict(policy.dwell_stats_ms) if policy else None,
                        stop_on_depletion=True)


@dataclass(frozen=True)
class ArmResult:
    arm: str
    seed: int
    lifetime_ms: float
    oracle_ms: float
    depleted: bool
    battery_curve: tuple  # (time ms, mean battery e.u.) samples
    verdicts: tuple = ()  # (property id, verdict) pairs, dynamic arm only

    def to_json(self):
        return {"arm": self.arm, "seed": self.seed, "lifetime_ms": self.lifetime_ms,
                "oracle_lifetime_ms": self.oracle_ms, "depleted": self.depleted,
                "verdicts": {p: v for p, v in self.verdicts}}


def _battery_curve(trace: Trace, step_ms: float = 1000.0) -> tuple:
    """Mean node battery sampled every ``step_ms`` (last value carried forward)."""
    levels: dict[int, float] = {}
    step = int(step_ms * 100)
    next_t = 0
    out = []
    for s in trace:
        while s.time >= next_t and levels:
            out.append((next_t / 100, sum(levels.values()) / len(levels)))
            next_t += step
        if s.event is Event.BATTERY_UPDATE:
            levels[s.node_id] = s.battery_eu
    if levels:
        out.append((trace[-1].time / 100, sum(levels.values()) / len(levels)))
    return tuple(out)


def run_arm(base: ScenarioConfig, arm: str, seed: int,
            policy: Optional[RefinedPolicy], uncontrolled: bool = False) -> ArmResult:
    cfg = arm_config(base, arm, seed, policy, uncontrolled)
    sim = BsnSimulation(cfg)
    trace = sim.run()
    end_ms = ticks_to_ms(trace[-1].time)
    lifetimes, oracles = [], []
    for node in sim.nodes:
        lifetimes.append(ticks_to_ms(node.depleted_at) if node.depleted_at is not None else end_ms)
        oracles.append(oracle_lifetime("non-controlled" if uncontrolled else arm, trace,
                                       node.node_id, cfg, policy))
    verdicts = ()
    if arm == "dynamic" and not uncontrolled:
        verdicts = tuple((v.property_id, v.verdict.value) for v in check_all(trace))
    return ArmResult(arm, seed, math.fsum(lifetimes) / len(lifetimes),
                     math.fsum(oracles) / len(oracles),
                     all(n.depleted_at is not None for n in sim.nodes),
                     _battery_curve(trace), verdicts)


def worker_count() -> int:
    raw = os.environ.get("BSN_ASSURE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise RefineError(f"BSN_ASSURE_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _run_arm_job(job):
    return run_arm(*job)


def refine_and_compare(config: ScenarioConfig, seeds: Sequence[int], *,
                       training_seed: int = 7, training_duration_ms: float = 3_600_000.0,
                       max_duration_ms: float = 36_000_000.0,
                       workers: Optional[int] = None, uncontrolled: bool = False) -> dict:
    """Compare the three arms over ``seeds``; ``uncontrolled`` runs every arm with no policy."""
    if not seeds:
        raise RefineError("need at least one seed")
    training = config.replace(seed=training_seed, num_sensor_nodes=1,
                              sim_duration_ms=training_duration_ms, controller_on=False,
                              policy=Policy.NONE, stop_on_depletion=False)
    dwells = min_dwell_per_risk(BsnSimulation(training).run())
    policy = derive_policy(dwells, config.scheduler_period_ms,
                           provenance=f"minimum completed dwell per risk over a "
                                      f"{training_duration_ms / 1000:g} s run, seed {training_seed}")
    base = config.replace(sim_duration_ms=max_duration_ms)
    jobs = [(base, arm, seed, policy, uncontrolled) for arm in ARMS for seed in seeds]
    n = min(workers or worker_count(), len(jobs))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_run_arm_job, jobs))
    else:
        results = [_run_arm_job(j) for j in jobs]
    results.sort(key=lambda r: (ARMS.index(r.arm), r.seed))

    def mean(arm, key):
        vals = [getattr(r, key) for r in results if r.arm == arm]
        return math.fsum(vals) / len(vals)

    life = {arm: mean(arm, "lifetime_ms") for arm in ARMS}
    oracle = {arm: mean(arm, "oracle_ms") for arm in ARMS}
    ratio = life["dynamic"] / life["non-controlled"]
    oracle_ratio = oracle["dynamic"] / oracle["non-controlled"]
    violated = sorted({p for r in results for p, v in r.verdicts if v == Verdict.VIOLATED.value},
                      key=lambda p: int(p[1:]))
    return {
        "config_digest": config.digest(),
        "seeds": list(seeds),
        "policy": policy.to_json(),
        "mean_lifetime_ms": life,
        "oracle_lifetime_ms": oracle,
        "ratio": ratio,
        "oracle_ratio": oracle_ratio,
        "ratio_oracle_agreement": abs(ratio / oracle_ratio - 1.0),
        "reverification": {"status": "INVALID" if violated else "VALID",
                           "violated": violated},
        "runs": [r.to_json() for r in results],
        "battery_curves": {f"{r.arm}/{r.seed}": [list(p) for p in r.battery_curve]
                           for r in results},
    }


def comparison_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def battery_csv(report: dict) -> str:
    """Plot-ready ``time_ms,battery_eu,arm`` rows, seeds averaged per arm and time.

    A seed whose run has ended holds its last level, so the mean never jumps up.
    """
    curves: dict = defaultdict(list)
    for key, curve in report["battery_curves"].items():
        curves[key.split("/")[0]].append(curve)
    buf = io.StringIO()
    buf.write("time_ms,battery_eu,arm\n")
    for arm in sorted(curves, key=ARMS.index):
        runs = curves[arm]
        keys = [[p[0] for p in c] for c in runs]
        for t in sorted({t for c in runs for t, _ in c}):
            levels = [c[max(bisect.bisect_right(ks, t) - 1, 0)][1] for c, ks in zip(runs, keys)]
            buf.write(f"{t!r},{math.fsum(levels) / len(levels)!r},{arm}\n")
    return buf.getvalue()
