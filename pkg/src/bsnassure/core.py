"""Shared value types and the vital-sign risk classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional


class DomainError(ValueError):
    """Raised when a value falls outside the domain an operation accepts."""


class RiskLevel(enum.IntEnum):
    LOW = 0
    MODERATE = 1
    HIGH = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "RiskLevel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise DomainError(f"unknown risk level {text!r}") from None


class VitalKind(enum.Enum):
    OXYGENATION = "oxygenation"
    PULSE_RATE = "pulse_rate"
    TEMPERATURE = "temperature"


PULSE_RATE_CAP = 300.0

# Outer (lower exclusive, upper inclusive) range per kind.
OUTER_RANGE = {
    VitalKind.OXYGENATION: (0.0, 100.0),
    VitalKind.PULSE_RATE: (0.0, PULSE_RATE_CAP),
    VitalKind.TEMPERATURE: (0.0, 50.0),
}

L, M, H = RiskLevel.LOW, RiskLevel.MODERATE, RiskLevel.HIGH

# Ascending breakpoints and the level of each open band between them.
# len(levels) == len(breakpoints) + 1.
_BANDS = {
    VitalKind.OXYGENATION: ((90.0, 94.0), (H, M, L)),
    VitalKind.PULSE_RATE: ((80.0, 120.0), (H, L, H)),
    VitalKind.TEMPERATURE: ((30.0, 35.0, 37.0, 38.0), (H, M, L, M, H)),
}


def breakpoints(kind: VitalKind) -> tuple[float, ...]:
    return _BANDS[kind][0]


def expressible_levels(kind: VitalKind) -> set[RiskLevel]:
    """Risk levels a single vital of this kind can signal."""
    return set(_BANDS[kind][1])


def classify_vital(kind: VitalKind, value: float) -> RiskLevel:
    """Map a vital reading to its risk level.

    A value sitting exactly on a breakpoint takes the riskier of the two
    adjacent bands.
    """
    lo, hi = OUTER_RANGE[kind]
    if not (lo < value <= hi):
        raise DomainError(
            f"{kind.value} value {value!r} outside permitted range ({lo:g}, {hi:g}]"
        )
    points, levels = _BANDS[kind]
    for i, bp in enumerate(points):
        if value < bp:
            return levels[i]
        if value == bp:
            return max(levels[i], levels[i + 1])
    return levels[-1]


def fuse_status(levels: Iterable[RiskLevel]) -> RiskLevel:
    """Overall patient status: the most severe of the given levels."""
    levels = list(levels)
    if not levels:
        raise DomainError("fuse_status needs at least one risk level")
    return max(levels)


@dataclass(frozen=True)
class VitalReading:
    kind: VitalKind
    value: float
    timestamp: int  # hundredths of a millisecond
    node_id: int

    def __post_init__(self):
        lo, hi = OUTER_RANGE[self.kind]
        if not (lo < self.value <= hi):
            raise DomainError(f"{self.kind.value} value {self.value!r} out of range")
        if self.node_id < 1:
            raise DomainError("sensor node ids start at 1")
        if self.timestamp < 0:
            raise DomainError("negative timestamp")

    @property
    def risk(self) -> RiskLevel:
        return classify_vital(self.kind, self.value)


@dataclass(frozen=True)
class ContextState:
    c1_patient_status: Optional[RiskLevel]
    c2_controller_on: bool
    c3_realtime_on: bool


# SimTime is carried as an integer count of 0.01 ms.
TICKS_PER_MS = 100


def ms_to_ticks(ms: float) -> int:
    return int(round(ms * TICKS_PER_MS))


def ticks_to_ms(ticks: int) -> float:
    return ticks / TICKS_PER_MS
