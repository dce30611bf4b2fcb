"""Non-learned baseline planners and ego-status perturbations."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument
from .scene import HORIZON_STEPS, STEP_SECONDS, EgoStatus, Scene, Trajectory

# below this |yaw rate| (rad/s) the turn rollout switches to the straight one
EPS_YAW_RATE = 1e-4

_TIMES = STEP_SECONDS * np.arange(1, HORIZON_STEPS + 1)


@dataclass(frozen=True)
class VelocityScale:
    factor: float

    def __post_init__(self):
        if not self.factor >= 0:
            raise InvalidArgument(f"velocity scale factor must be >= 0, got {self.factor}")


@dataclass(frozen=True)
class VelocityOverride:
    value: float

    def __post_init__(self):
        if not self.value >= 0:
            raise InvalidArgument(f"velocity override must be >= 0 m/s, got {self.value}")


Perturbation = VelocityScale | VelocityOverride


def perturb(status: EgoStatus, p: Perturbation) -> EgoStatus:
    if isinstance(p, VelocityScale):
        return replace(status, speed=status.speed * p.factor)
    if isinstance(p, VelocityOverride):
        return replace(status, speed=p.value)
    raise InvalidArgument(f"unknown perturbation {p!r}")


def plan_go_straight(status: EgoStatus) -> Trajectory:
    """Hold the current speed along the current heading."""
    return Trajectory(np.stack([status.speed * _TIMES, np.zeros(HORIZON_STEPS)], axis=1))


def plan_constant_turn(status: EgoStatus) -> Trajectory:
    """Unicycle rollout holding the current speed and yaw rate."""
    v, w = status.speed, status.yaw_rate
    if abs(w) <= EPS_YAW_RATE:
        return plan_go_straight(status)
    r = v / w
    return Trajectory(np.stack([r * np.sin(w * _TIMES), r * (1.0 - np.cos(w * _TIMES))], axis=1))


PLANNERS = {
    "go_straight": plan_go_straight,
    "constant_turn": plan_constant_turn,
}


def run_planner(planner_id: str, scene: Scene, perturbation: Perturbation | None = None) -> dict[str, Trajectory]:
    """One trajectory per valid sample of ``scene``, keyed by sample_id."""
    try:
        plan = PLANNERS[planner_id]
    except KeyError:
        raise InvalidArgument(f"unknown planner {planner_id!r}; choose from {sorted(PLANNERS)}") from None
    out = {}
    for sample in scene.samples:
        if not sample.valid:
            continue
        status = sample.status if perturbation is None else perturb(sample.status, perturbation)
        out[sample.sample_id] = plan(status)
    return out


def parse_perturbation(velocity_scale: float | None = None, velocity_override: float | None = None):
    if velocity_scale is not None and velocity_override is not None:
        raise InvalidArgument("give either a velocity scale or a velocity override, not both")
    if velocity_scale is not None:
        return VelocityScale(velocity_scale)
    if velocity_override is not None:
        return VelocityOverride(velocity_override)
    return None


def describe(p: Perturbation | None) -> str:
    if p is None:
        return "none"
    if isinstance(p, VelocityScale):
        return f"v*{p.factor:g}"
    return f"v={p.value:g}m/s"

