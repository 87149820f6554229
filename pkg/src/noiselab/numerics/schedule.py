"""Piecewise-constant learning-rate multipliers."""

from dataclasses import dataclass
from typing import Tuple

from noiselab.errors import ConfigError

PRESETS = {
    "constant": (),
    "decay1": ((20, 0.5), (30, 0.25), (40, 0.1)),
    "decay2": ((80, 0.1), (120, 0.1), (160, 0.1), (180, 0.5)),
}


@dataclass(frozen=True)
class ScheduleSpec:
    """``breakpoints`` are ``(epoch, multiplier)`` pairs; multipliers are
    absolute w.r.t. the initial rate, not cumulative."""

    scheme: str = "decay1"
    breakpoints: Tuple[Tuple[int, float], ...] = PRESETS["decay1"]

    def __post_init__(self):
        bps = tuple((int(e), float(m)) for e, m in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        epochs = [e for e, _ in bps]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ConfigError("schedule breakpoint epochs must be strictly increasing")
        if any(not 0.0 < m <= 1.0 for _, m in bps):
            raise ConfigError("schedule multipliers must lie in (0, 1]")

    @classmethod
    def preset(cls, scheme: str) -> "ScheduleSpec":
        if scheme not in PRESETS:
            raise ConfigError(f"unknown schedule {scheme!r}; expected one of {sorted(PRESETS)}")
        return cls(scheme, PRESETS[scheme])


def lr_multiplier(schedule: ScheduleSpec, epoch: int) -> float:
    """Multiplier of the last breakpoint at or before ``epoch`` (0-based), else 1."""
    mult = 1.0
    for start, value in schedule.breakpoints:
        if start <= epoch:
            mult = value
        else:
            break
    return mult
