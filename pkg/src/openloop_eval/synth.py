"""Deterministic synthetic corpora of straight-road and arc-road scenes.

The ego drives the road centerline at constant speed (and, on arc roads,
constant yaw rate), so its status is exact and the GT future is a closed-form
rollout.  Curbs sit at +/- half the road width.  Agents are a Poisson process
along the lane, travelling at the ego's speed so the logged drive is
collision-free.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgument
from .geom import OrientedBox, Polyline, Pose2D
from .scene import (DEFAULT_EGO_DIMS, HORIZON_STEPS, STEP_SECONDS, AgentState, Command, EgoStatus,
                    Sample, Scene)

# max chord sagitta when approximating circular curbs by polylines
CURB_SAGITTA = 1e-3


@dataclass(frozen=True)
class GenConfig:
    n_scenes: int = 100
    straight: float = 0.739
    turn: float = 0.261
    samples_per_scene: int = 40
    straight_speed: tuple = (3.0, 15.0)
    turn_speed: tuple = (6.0, 10.0)
    # |yaw rate| range on arc roads, rad/s
    turn_rate: tuple = (0.1, 0.25)
    road_width: float = 7.0
    agent_rate: float = 4.0
    agent_dims: tuple = (4.5, 1.9)
    agent_range: tuple = (-40.0, 60.0)
    ego_dims: tuple = DEFAULT_EGO_DIMS
    origin_extent: float = 500.0

    def validate(self) -> None:
        def bad(name, why):
            raise InvalidArgument(f"GenConfig.{name}: {why}")

        if not isinstance(self.n_scenes, int) or self.n_scenes < 0:
            bad("n_scenes", f"must be a non-negative integer, got {self.n_scenes!r}")
        for name in ("straight", "turn"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                bad(name, f"fraction must lie in [0, 1], got {v}")
        if abs(self.straight + self.turn - 1.0) > 1e-9:
            bad("straight", f"straight + turn must sum to 1, got {self.straight + self.turn}")
        if self.samples_per_scene < 1:
            bad("samples_per_scene", "must be >= 1")
        for name in ("straight_speed", "turn_speed", "turn_rate", "agent_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                bad(name, f"range is inverted: {lo} > {hi}")
        for name in ("straight_speed", "turn_speed", "turn_rate"):
            if getattr(self, name)[0] <= 0:
                bad(name, "must be positive")
        for name in ("road_width", "origin_extent"):
            if not getattr(self, name) > 0:
                bad(name, "must be positive")
        if self.agent_rate < 0:
            bad("agent_rate", "must be >= 0")
        for name in ("agent_dims", "ego_dims"):
            if min(getattr(self, name)) <= 0:
                bad(name, "dimensions must be positive")
        if self.ego_dims[1] >= self.road_width:
            bad("road_width", "must exceed the ego width")
        min_radius = self.turn_speed[0] / self.turn_rate[1]
        if min_radius - 0.5 * self.road_width <= self.ego_dims[1]:
            bad("turn_rate", f"smallest turn radius {min_radius:.2f} m leaves no room for the inner curb")

    def as_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


class _StraightRoad:
    def __init__(self, origin, heading, speed):
        self.origin = np.asarray(origin, dtype=float)
        self.heading = heading
        self.speed = speed
        self.yaw_rate = 0.0
        self.dir = np.array([math.cos(heading), math.sin(heading)])

    def pose_at(self, s: float) -> Pose2D:
        """Centerline pose at arc length ``s`` from the origin."""
        x, y = self.origin + s * self.dir
        return Pose2D(x, y, self.heading)

    def curbs(self, s0, s1, half_width):
        normal = np.array([-self.dir[1], self.dir[0]])
        a, b = self.origin + s0 * self.dir, self.origin + s1 * self.dir
        return [Polyline([a + side * half_width * normal, b + side * half_width * normal])
                for side in (1.0, -1.0)]


class _ArcRoad:
    def __init__(self, origin, heading, speed, yaw_rate):
        self.heading = heading
        self.speed = speed
        self.yaw_rate = yaw_rate
        self.sign = 1.0 if yaw_rate > 0 else -1.0
        self.radius = speed / abs(yaw_rate)
        left = np.array([-math.sin(heading), math.cos(heading)])
        self.center = np.asarray(origin, dtype=float) + self.sign * self.radius * left

    def pose_at(self, s: float) -> Pose2D:
        h = self.heading + self.sign * s / self.radius
        x = self.center[0] + self.sign * self.radius * math.sin(h)
        y = self.center[1] - self.sign * self.radius * math.cos(h)
        return Pose2D(x, y, h)

    def curbs(self, s0, s1, half_width):
        out = []
        for r in (self.radius - half_width, self.radius + half_width):
            step = 2.0 * math.acos(1.0 - CURB_SAGITTA / r)
            n = int(math.ceil(2.0 * math.pi / step))
            phi = np.linspace(0.0, 2.0 * math.pi, n + 1)
            pts = np.stack([self.center[0] + r * np.cos(phi), self.center[1] + r * np.sin(phi)], axis=1)
            pts[-1] = pts[0]
            out.append(Polyline(pts))
        return out


def _agent_offsets(rng, cfg: GenConfig) -> list[float]:
    clearance = 0.5 * (cfg.ego_dims[0] + cfg.agent_dims[0]) + 1.0
    offsets = []
    for _ in range(rng.poisson(cfg.agent_rate)):
        while True:
            s = rng.uniform(*cfg.agent_range)
            if abs(s) >= clearance:
                break
        offsets.append(float(s))
    return offsets


def _make_scene(index: int, kind: str, rng, cfg: GenConfig) -> Scene:
    origin = rng.uniform(-cfg.origin_extent, cfg.origin_extent, size=2)
    heading = float(rng.uniform(-math.pi, math.pi))
    if kind == "straight":
        road = _StraightRoad(origin, heading, float(rng.uniform(*cfg.straight_speed)))
        command = Command.STRAIGHT
    else:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        speed = float(rng.uniform(*cfg.turn_speed))
        road = _ArcRoad(origin, heading, speed, sign * float(rng.uniform(*cfg.turn_rate)))
        command = Command.LEFT if sign > 0 else Command.RIGHT
    offsets = _agent_offsets(rng, cfg)
    scene_id = f"scene-{index:05d}"
    n = cfg.samples_per_scene
    v = road.speed
    status = EgoStatus(speed=v, accel=0.0, yaw_rate=road.yaw_rate, command=command)

    def ego_at(step):
        return road.pose_at(v * (STEP_SECONDS * step))

    samples = []
    for k in range(n):
        agents = tuple(
            tuple(AgentState(f"{scene_id}-agent-{j}",
                             OrientedBox(road.pose_at(v * (STEP_SECONDS * (k + i)) + off), *cfg.agent_dims))
                  for j, off in enumerate(offsets))
            for i in range(1, HORIZON_STEPS + 1))
        valid = k + HORIZON_STEPS <= n - 1
        gt = tuple(ego_at(k + i) for i in range(1, HORIZON_STEPS + 1)) if valid else None
        samples.append(Sample(sample_id=f"{scene_id}-{k:03d}", t=STEP_SECONDS * k, ego_pose=ego_at(k),
                              status=status, agents_future=agents, gt_future=gt, valid=valid))
    margin = 60.0
    span = v * STEP_SECONDS * (n - 1)
    curbs = road.curbs(-margin, span + margin, 0.5 * cfg.road_width)
    return Scene(scene_id, tuple(samples), tuple(curbs), (False,) * len(curbs))


def scene_kinds(cfg: GenConfig, seed: int) -> list[str]:
    """Scene kinds in corpus order; the straight count is round(straight * n_scenes)."""
    n_straight = int(round(cfg.straight * cfg.n_scenes))
    kinds = np.array(["straight"] * n_straight + ["turn"] * (cfg.n_scenes - n_straight))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return [str(k) for k in rng.permutation(kinds)]


def gen_synthetic(config: GenConfig, seed: int) -> list[Scene]:
    config.validate()
    kinds = scene_kinds(config, seed)
    children = np.random.SeedSequence(seed).spawn(config.n_scenes)
    return [_make_scene(i, kind, np.random.default_rng(ss), config)
            for i, (kind, ss) in enumerate(zip(kinds, children))]
