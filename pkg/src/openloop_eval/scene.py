"""Log-replay scene model, GT-future derivation and driving commands."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import HorizonMismatchError, InvalidArgument, PreconditionError
from .geom import OrientedBox, Polyline, Pose2D, normalize_angle

STEP_SECONDS = 0.5
HORIZON_STEPS = 6
SPACING_TOL = 1e-6
DEFAULT_EGO_DIMS = (4.08, 1.73)
# ~10 degrees of heading change over the 3 s future
DEFAULT_COMMAND_THRESHOLD = 0.17


class Command(str, Enum):
    STRAIGHT = "straight"
    LEFT = "left"
    RIGHT = "right"

    @property
    def group(self) -> str:
        """'ST' for straight, 'LR' for either turn."""
        return "ST" if self is Command.STRAIGHT else "LR"


@dataclass(frozen=True)
class EgoStatus:
    speed: float
    accel: float = 0.0
    yaw_rate: float = 0.0
    command: Command = Command.STRAIGHT

    def __post_init__(self):
        for name in ("speed", "accel", "yaw_rate"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidArgument(f"EgoStatus.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.speed < 0:
            raise InvalidArgument(f"EgoStatus.speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "command", Command(self.command))


@dataclass(frozen=True)
class AgentState:
    agent_id: str
    box: OrientedBox


@dataclass(frozen=True)
class Sample:
    sample_id: str
    t: float
    ego_pose: Pose2D
    status: EgoStatus
    agents_future: tuple = field(default_factory=lambda: ((),) * HORIZON_STEPS)
    gt_future: tuple | None = None
    valid: bool = False

    def __post_init__(self):
        agents = tuple(tuple(step) for step in self.agents_future)
        if len(agents) != HORIZON_STEPS:
            raise InvalidArgument(
                f"sample {self.sample_id}: agents_future needs {HORIZON_STEPS} step slots, got {len(agents)}")
        object.__setattr__(self, "agents_future", agents)
        if self.gt_future is not None:
            gt = tuple(self.gt_future)
            if len(gt) != HORIZON_STEPS:
                raise InvalidArgument(
                    f"sample {self.sample_id}: gt_future needs {HORIZON_STEPS} poses, got {len(gt)}")
            object.__setattr__(self, "gt_future", gt)
        if self.valid and self.gt_future is None:
            raise InvalidArgument(f"sample {self.sample_id}: valid sample without gt_future")


@dataclass(frozen=True)
class Scene:
    scene_id: str
    samples: tuple
    boundaries: tuple = ()
    boundary_traversable: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "boundaries", tuple(self.boundaries))
        flags = self.boundary_traversable
        flags = (False,) * len(self.boundaries) if flags is None else tuple(bool(f) for f in flags)
        if len(flags) != len(self.boundaries):
            raise InvalidArgument(f"scene {self.scene_id}: {len(flags)} traversable flags "
                                  f"for {len(self.boundaries)} boundaries")
        object.__setattr__(self, "boundary_traversable", flags)
        check_spacing(self)

    @property
    def curbs(self) -> list[Polyline]:
        """Boundaries that count for curb collisions (non-traversable)."""
        return [b for b, trav in zip(self.boundaries, self.boundary_traversable) if not trav]

    @property
    def valid_samples(self) -> list[Sample]:
        return [s for s in self.samples if s.valid]


class Trajectory:
    """Six ego-frame waypoints at 0.5 s spacing."""

    __slots__ = ("waypoints",)

    def __init__(self, waypoints):
        pts = np.array(waypoints, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] != HORIZON_STEPS:
            raise HorizonMismatchError(
                f"trajectory needs {HORIZON_STEPS} (x, y) waypoints, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("trajectory waypoints must be finite")
        pts.flags.writeable = False
        self.waypoints = pts

    def __eq__(self, other):
        return isinstance(other, Trajectory) and np.array_equal(self.waypoints, other.waypoints)

    def __repr__(self):
        return f"Trajectory({self.waypoints.tolist()})"


def check_spacing(scene: Scene) -> None:
    ts = [s.t for s in scene.samples]
    for a, b in zip(ts, ts[1:]):
        if abs((b - a) - STEP_SECONDS) > SPACING_TOL:
            raise InvalidArgument(
                f"scene {scene.scene_id}: samples must be {STEP_SECONDS} s apart, got {a} -> {b}")


def derive_gt_future(scene: Scene) -> Scene:
    """Fill ``gt_future`` from the next six ego poses; samples without six successors are invalid."""
    check_spacing(scene)
    samples = scene.samples
    n = len(samples)
    out = []
    for k, s in enumerate(samples):
        if k + HORIZON_STEPS < n:
            gt = tuple(samples[k + j].ego_pose for j in range(1, HORIZON_STEPS + 1))
            out.append(replace(s, gt_future=gt, valid=True))
        else:
            out.append(replace(s, gt_future=None, valid=False))
    return replace(scene, samples=tuple(out))


def derive_command(sample: Sample, threshold: float = DEFAULT_COMMAND_THRESHOLD) -> Command:
    """Classify the GT heading change over the 3 s future as straight / left / right."""
    if not sample.valid or sample.gt_future is None:
        raise PreconditionError(f"sample {sample.sample_id} is not valid; no command can be derived")
    dpsi = normalize_angle(sample.gt_future[-1].yaw - sample.ego_pose.yaw)
    if abs(dpsi) < threshold:
        return Command.STRAIGHT
    return Command.LEFT if dpsi > 0 else Command.RIGHT
