"""Robot controller policies.

Every policy is a pure decision function: (sensor frame, heading, behavior
state, rng) -> (motion command sequence, new state). Hops toward the robot's
front drive straight with no rotation command, so heading error from earlier
rotations persists through them (the open-loop drift the experiments blame
for misses). Hops toward any other side command a rotation to that side's
world angle; each commanded rotation carries one heading perturbation from
the noise model, which keeps rotations the dominant error source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .world import (
    DEFAULT_KIN,
    SIDE_ANGLE,
    KinematicConstants,
    MotionCommand,
    SensorFrame,
    nearest_side,
    normalize_angle,
)
from .grid import Side

# Body sides in tie-break priority order.
BODY_SIDES = ("front", "right", "back", "left")

# Relative rotation that points the body side forward (y-south axes:
# positive rotation turns toward the robot's right).
REL_ANGLE = {"front": 0.0, "right": math.pi / 2, "back": math.pi, "left": -math.pi / 2}


class BehaviorKind(str, Enum):
    GRADIENT_HOP = "gradient_hop"
    RANDOM_WALK_AVOID = "random_walk_avoid"
    TRANSPORT_FOLLOWER = "transport_follower"
    FLEE_LIGHT = "flee_light"
    IDLE = "idle"


class HopPhase(Enum):
    ROTATE = "rotate"
    DRIVE = "drive"
    SETTLE = "settle"


@dataclass(slots=True)
class HopPlan:
    """Phases of one planned hop; always terminates in Settle."""

    phase: HopPhase
    target_side: Side  # world-frame side the hop aims at
    remaining_ms: float


@dataclass(slots=True)
class BehaviorState:
    last_plan: Optional[HopPlan] = None
    hops_done: int = 0


def plan_rotation(current_theta: float, target_theta: float,
                  kin: KinematicConstants = DEFAULT_KIN) -> MotionCommand:
    """Opposing-duty command turning through the shortest arc; zero delta
    yields a zero-duration command."""
    delta = normalize_angle(target_theta - current_theta)
    if delta == 0.0:
        return MotionCommand(0.0, 0.0, 0.0)
    duration = kin.rotation_ms(delta)
    duty = kin.hop_duty
    if delta > 0.0:
        return MotionCommand(-duty, duty, duration)
    return MotionCommand(duty, -duty, duration)


def plan_drive(distance_mm: float, kin: KinematicConstants = DEFAULT_KIN) -> MotionCommand:
    return MotionCommand(kin.hop_duty, kin.hop_duty, kin.drive_ms(distance_mm))


def plan_settle(kin: KinematicConstants = DEFAULT_KIN) -> MotionCommand:
    return MotionCommand(0.0, 0.0, kin.settle_ms)


def plan_hop(theta: float, body_side: str, pitch: float,
             kin: KinematicConstants = DEFAULT_KIN) -> tuple[list[MotionCommand], HopPlan]:
    """One-pitch hop toward a body side.

    Front hops drive straight (timed, no rotation). Other sides rotate to the
    target side's world angle first, then drive, then settle.
    """
    commands: list[MotionCommand] = []
    if body_side == "front":
        target = nearest_side(theta)
        phase = HopPhase.DRIVE
    else:
        target = nearest_side(theta + REL_ANGLE[body_side])
        rotation = plan_rotation(theta, SIDE_ANGLE[target], kin)
        if rotation.duration > 0.0:
            commands.append(rotation)
        phase = HopPhase.ROTATE if commands else HopPhase.DRIVE
    commands.append(plan_drive(pitch, kin))
    commands.append(plan_settle(kin))
    return commands, HopPlan(phase, target, sum(c.duration for c in commands))


def _hop(state: BehaviorState, theta: float, body_side: str, pitch: float,
         kin: KinematicConstants) -> tuple[list[MotionCommand], BehaviorState]:
    commands, plan = plan_hop(theta, body_side, pitch, kin)
    return commands, replace(state, last_plan=plan, hops_done=state.hops_done + 1)


def gradient_hop_decide(frame: SensorFrame, theta: float, state: BehaviorState,
                        rng=None, params: Optional[dict] = None, *,
                        pitch: float = 75.0, kin: KinematicConstants = DEFAULT_KIN):
    """Hop toward the strongest strictly-positive intensity gradient.

    Uniform or locally-maximal fields are fixed points (the robot idles), so a
    path terminus holds the robot. Ties go front, right, back, left.
    """
    best_side = None
    best_gradient = 0
    for side in BODY_SIDES:
        g = frame[side] - frame.center
        if g > best_gradient:
            best_side, best_gradient = side, g
    if best_side is None:
        return [], state
    return _hop(state, theta, best_side, pitch, kin)


def random_walk_avoid_decide(frame: SensorFrame, theta: float, state: BehaviorState,
                             rng=None, params: Optional[dict] = None, *,
                             pitch: float = 75.0, kin: KinematicConstants = DEFAULT_KIN):
    """Uniform hop among sides not lit like a wall; fully walled in, the robot
    just sits out one settle period."""
    threshold = (params or {}).get("wall_threshold", 100)
    candidates = [s for s in BODY_SIDES if frame[s] < threshold]
    if not candidates:
        return [plan_settle(kin)], state
    choice = candidates[int(rng.integers(len(candidates)))]
    return _hop(state, theta, choice, pitch, kin)


def transport_decide(frame: SensorFrame, theta: float, state: BehaviorState,
                     rng=None, params: Optional[dict] = None, *,
                     pitch: float = 75.0, kin: KinematicConstants = DEFAULT_KIN):
    """Advance one pitch straight ahead whenever the lit object cell sits on
    the travel axis (ahead or behind); otherwise idle. An optional max_steps
    caps the routine (the transport experiment runs exactly four steps)."""
    params = params or {}
    threshold = params.get("object_threshold", 50)
    max_steps = params.get("max_steps")
    if max_steps is not None and state.hops_done >= max_steps:
        return [], state
    if frame.front > threshold or frame.back > threshold:
        return _hop(state, theta, "front", pitch, kin)
    return [], state


def flee_light_decide(frame: SensorFrame, theta: float, state: BehaviorState,
                      rng=None, params: Optional[dict] = None, *,
                      pitch: float = 75.0, kin: KinematicConstants = DEFAULT_KIN):
    """If any side is lit past the flee threshold, hop toward the dimmest
    side (ties front, right, back, left)."""
    threshold = (params or {}).get("flee_threshold", 50)
    if not any(frame[s] > threshold for s in BODY_SIDES):
        return [], state
    best_side = BODY_SIDES[0]
    best_value = frame[best_side]
    for side in BODY_SIDES[1:]:
        if frame[side] < best_value:
            best_side, best_value = side, frame[side]
    return _hop(state, theta, best_side, pitch, kin)


def idle_decide(frame: SensorFrame, theta: float, state: BehaviorState,
                rng=None, params: Optional[dict] = None, *,
                pitch: float = 75.0, kin: KinematicConstants = DEFAULT_KIN):
    return [], state


DECIDERS = {
    BehaviorKind.GRADIENT_HOP: gradient_hop_decide,
    BehaviorKind.RANDOM_WALK_AVOID: random_walk_avoid_decide,
    BehaviorKind.TRANSPORT_FOLLOWER: transport_decide,
    BehaviorKind.FLEE_LIGHT: flee_light_decide,
    BehaviorKind.IDLE: idle_decide,
}


def decide(kind: BehaviorKind, frame: SensorFrame, theta: float, state: BehaviorState,
           rng, params: Optional[dict] = None, *, pitch: float = 75.0,
           kin: KinematicConstants = DEFAULT_KIN):
    return DECIDERS[kind](frame, theta, state, rng, params, pitch=pitch, kin=kin)
