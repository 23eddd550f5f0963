"""Quadrant zoning and the RUN/SLOW/STOP safety state machine.

Escalation is immediate; stepping back down toward RUN needs a run of
``release_frames`` fully clear frames and then drops one level per frame.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional


class Level(enum.IntEnum):
    RUN = 0
    SLOW = 1
    STOP = 2


class MotionAction(enum.Enum):
    NONE = "NONE"
    SLOW = "SLOW"
    STOP = "STOP"


REASONS = ("restricted", "caution", "motion", "clear", "failsafe")


@dataclass(frozen=True)
class ZonePolicy:
    monitored: frozenset = frozenset({0, 1, 2, 3})
    restricted: frozenset = frozenset()
    caution: frozenset = frozenset()
    motion_action: MotionAction = MotionAction.SLOW

    def __post_init__(self):
        for name in ("monitored", "restricted", "caution"):
            value = frozenset(getattr(self, name))
            if not value <= {0, 1, 2, 3}:
                raise ValueError(f"{name} quadrants must be within 0..3, got {sorted(value)}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "motion_action", MotionAction(self.motion_action))
        if self.restricted & self.caution:
            raise ValueError("restricted and caution quadrants overlap")
        if not (self.restricted | self.caution) <= self.monitored:
            raise ValueError("restricted/caution quadrants must be monitored")


@dataclass(frozen=True)
class SafetyConfig:
    release_frames: int = 8

    def __post_init__(self):
        if self.release_frames < 1:
            raise ValueError("release_frames must be >= 1")


@dataclass(frozen=True)
class SafetyState:
    level: Level = Level.RUN
    clear_streak: int = 0


@dataclass(frozen=True)
class SafetyCommand:
    level: Level
    reason: str


class Occupancy(NamedTuple):
    restricted_hit: bool
    caution_hit: bool
    motion_only: bool


def zone_occupancy(detection, policy: ZonePolicy) -> Occupancy:
    flagged = {q for q, f in enumerate(detection.method_b.quadrant_flags) if f}
    flagged &= policy.monitored
    return Occupancy(
        bool(flagged & policy.restricted),
        bool(flagged & policy.caution),
        bool(detection.method_a.positive and not flagged),
    )


def target_level(occ: Occupancy, policy: ZonePolicy):
    """Level demanded by one frame's occupancy and the reason for it."""
    if occ.restricted_hit:
        return Level.STOP, "restricted"
    motion = occ.motion_only and policy.motion_action is not MotionAction.NONE
    if motion and policy.motion_action is MotionAction.STOP:
        return Level.STOP, "motion"
    if occ.caution_hit:
        return Level.SLOW, "caution"
    if motion:
        return Level.SLOW, "motion"
    return Level.RUN, "clear"


def safety_step(state: SafetyState, occ: Occupancy, config: SafetyConfig = SafetyConfig(),
                policy: ZonePolicy = ZonePolicy()) -> tuple[SafetyState, Optional[SafetyCommand]]:
    target, reason = target_level(occ, policy)
    if target > state.level:
        return SafetyState(target, 0), SafetyCommand(target, reason)
    if target is not Level.RUN:
        # not clear: hold the current level and restart the release window
        return SafetyState(state.level, 0), None
    streak = state.clear_streak + 1
    if state.level > Level.RUN and streak >= config.release_frames:
        level = Level(state.level - 1)
        return SafetyState(level, streak), SafetyCommand(level, "clear")
    return SafetyState(state.level, streak), None
