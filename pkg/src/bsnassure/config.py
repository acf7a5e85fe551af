"""Scenario configuration and its JSON form.

Every field has a default; unknown keys are rejected so a typo in an
experiment file fails loudly instead of silently running the defaults.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .core import RiskLevel, VitalKind


class ConfigError(ValueError):
    pass


class Confirmation(str, enum.Enum):
    THREE_OF_FIVE = "three_of_five"
    REPLICATION = "replication"


class Policy(str, enum.Enum):
    NONE = "none"
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class TimingModel:
    bodyhub_exec_ms: float = 5.0
    sensornode_exec_ms: float = 6.0
    # Added to a sensor node's execution under Replication.
    replication_extra_per_sensor_ms: float = 0.15
    jitter_fraction: float = 0.05

    def validate(self):
        for name in ("bodyhub_exec_ms", "sensornode_exec_ms", "replication_extra_per_sensor_ms"):
            if getattr(self, name) < 0:
                raise ConfigError(f"timing.{name} must be >= 0")
        if not 0.0 <= self.jitter_fraction <= 0.2:
            raise ConfigError("timing.jitter_fraction must lie in [0, 0.2]")


@dataclass(frozen=True)
class EnergyModel:
    battery_capacity_eu: float = 1000.0
    cost_sample_eu: float = 1.0
    cost_transmit_eu: float = 0.5
    cost_process_eu: float = 0.2
    cost_idle_eu_per_cycle: float = 0.01

    def validate(self):
        if self.battery_capacity_eu <= 0:
            raise ConfigError("energy.battery_capacity_eu must be > 0")
        for name in ("cost_sample_eu", "cost_transmit_eu", "cost_process_eu", "cost_idle_eu_per_cycle"):
            if getattr(self, name) < 0:
                raise ConfigError(f"energy.{name} must be >= 0")


_RISKS = ("low", "moderate", "high")
_KINDS = tuple(k.value for k in VitalKind)


def _default_means():
    return {
        "oxygenation": {"low": 97.0, "moderate": 92.0, "high": 86.0},
        # Pulse rate has no moderate band; a moderate patient shows a normal pulse.
        "pulse_rate": {"low": 100.0, "moderate": 100.0, "high": 135.0},
        "temperature": {"low": 36.0, "moderate": 37.5, "high": 39.5},
    }


def _default_stddevs():
    return {
        "oxygenation": {"low": 1.2, "moderate": 0.8, "high": 2.0},
        "pulse_rate": {"low": 8.0, "moderate": 8.0, "high": 8.0},
        "temperature": {"low": 0.4, "moderate": 0.2, "high": 0.6},
    }


@dataclass(frozen=True)
class PatientProfile:
    transition: tuple[tuple[float, float, float], ...] = (
        (0.80, 0.15, 0.05),
        (0.30, 0.55, 0.15),
        (0.10, 0.40, 0.50),
    )
    dwell_min_ms: tuple[float, float, float] = (60_000.0, 30_000.0, 10_000.0)
    dwell_max_ms: tuple[float, float, float] = (300_000.0, 120_000.0, 60_000.0)
    vital_means: dict = field(default_factory=_default_means)
    vital_stddevs: dict = field(default_factory=_default_stddevs)
    # None: draw the first state from the stationary distribution.
    initial_risk: Optional[str] = None

    def validate(self):
        t = np.asarray(self.transition, dtype=float)
        if t.shape != (3, 3) or (t < 0).any():
            raise ConfigError("patient.transition must be a 3x3 non-negative matrix")
        if not np.allclose(t.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ConfigError("patient.transition rows must sum to 1")
        if len(self.dwell_min_ms) != 3 or len(self.dwell_max_ms) != 3:
            raise ConfigError("patient dwell bounds need one entry per risk level")
        for lo, hi in zip(self.dwell_min_ms, self.dwell_max_ms):
            if not 0 < lo <= hi:
                raise ConfigError("patient dwell bounds must satisfy 0 < min <= max")
        for table_name in ("vital_means", "vital_stddevs"):
            table = getattr(self, table_name)
            if set(table) != set(_KINDS):
                raise ConfigError(f"patient.{table_name} needs keys {_KINDS}")
            for kind in _KINDS:
                if set(table[kind]) != set(_RISKS):
                    raise ConfigError(f"patient.{table_name}.{kind} needs keys {_RISKS}")
        if any(v < 0 for row in self.vital_stddevs.values() for v in row.values()):
            raise ConfigError("patient.vital_stddevs must be >= 0")
        if self.initial_risk is not None and self.initial_risk not in _RISKS:
            raise ConfigError(f"patient.initial_risk must be one of {_RISKS}")

    def mean(self, kind: VitalKind, risk: RiskLevel) -> float:
        return self.vital_means[kind.value][risk.label]

    def stddev(self, kind: VitalKind, risk: RiskLevel) -> float:
        return self.vital_stddevs[kind.value][risk.label]


@dataclass(frozen=True)
class ScenarioConfig:
    num_sensor_nodes: int = 3
    scheduler_period_ms: float = 100.0
    confirmation: Confirmation = Confirmation.REPLICATION
    controller_on: bool = False
    realtime_on: bool = False
    policy: Policy = Policy.NONE
    sim_duration_ms: float = 60_000.0
    seed: int = 0
    timing: TimingModel = field(default_factory=TimingModel)
    energy: EnergyModel = field(default_factory=EnergyModel)
    patient: PatientProfile = field(default_factory=PatientProfile)
    # Mined minimum dwell per risk ("low"/"moderate"/"high" -> ms), used by
    # the dynamic policy once the battery leaves the good category.
    dwell_stats_ms: Optional[dict] = None
    # End the run once every sensor node is depleted.
    stop_on_depletion: bool = False

    def validate(self) -> "ScenarioConfig":
        if not isinstance(self.num_sensor_nodes, int) or self.num_sensor_nodes < 1:
            raise ConfigError("num_sensor_nodes must be an integer >= 1")
        if self.scheduler_period_ms <= 0:
            raise ConfigError("scheduler_period_ms must be > 0")
        if self.sim_duration_ms < self.scheduler_period_ms:
            raise ConfigError("sim_duration_ms must be >= scheduler_period_ms")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.dwell_stats_ms is not None:
            bad = set(self.dwell_stats_ms) - set(_RISKS)
            if bad:
                raise ConfigError(f"dwell_stats_ms has unknown risks {sorted(bad)}")
            if any(v <= 0 for v in self.dwell_stats_ms.values()):
                raise ConfigError("dwell_stats_ms values must be > 0")
        self.timing.validate()
        self.energy.validate()
        self.patient.validate()
        return self

    @property
    def effective_jitter(self) -> float:
        # Real-time mode (context C3) removes execution-time jitter.
        return 0.0 if self.realtime_on else self.timing.jitter_fraction

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return _to_jsonable(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    return obj


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a JSON object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown config key(s): {', '.join(where + k for k in sorted(unknown))}")
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key == "timing":
            value = _build(TimingModel, value, sub)
        elif key == "energy":
            value = _build(EnergyModel, value, sub)
        elif key == "patient":
            value = _build(PatientProfile, value, sub)
        elif key == "confirmation":
            value = _enum(Confirmation, value, sub)
        elif key == "policy":
            value = _enum(Policy, value, sub)
        elif key == "transition":
            value = tuple(tuple(float(x) for x in row) for row in value)
        elif key in ("dwell_min_ms", "dwell_max_ms"):
            value = tuple(float(x) for x in value)
        kwargs[key] = value
    return cls(**kwargs)


def _enum(cls, value, path):
    try:
        return cls(value)
    except ValueError:
        raise ConfigError(f"{path}: {value!r} is not one of {[e.value for e in cls]}") from None


def config_from_dict(data: dict) -> ScenarioConfig:
    try:
        cfg = _build(ScenarioConfig, data, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return config_from_dict(data)
