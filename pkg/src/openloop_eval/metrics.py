"""Per-sample planning metrics: L2, collision rates (fractional and any-hit),
yaw-aware agent collisions, curb collisions, smoothness and corpus statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import HorizonMismatchError, InvalidArgument, PreconditionError, UndefinedMetricError
from .geom import (DEFAULT_HALF_EXTENT, DEFAULT_RESOLUTION, OccupancyGrid, OrientedBox, Polyline, Pose2D,
                   box_hits_grid, estimate_yaws, exact_box_box_intersect, exact_box_polyline_intersect,
                   make_footprint, rasterize_box, rasterize_segments, stack_segments, to_global, to_local)
from .scene import DEFAULT_EGO_DIMS, HORIZON_STEPS, STEP_SECONDS, Command, Sample, Scene, Trajectory, derive_command

HORIZONS = (1, 2, 3)
L2_MODES = ("cumulative", "endpoint")
CHECK_MODES = ("raster", "exact")
YAW_MODES = ("estimated", "fixed")


def horizon_steps(t) -> int:
    """Number of 0.5 s steps up to horizon ``t`` (1, 2 or 3 seconds)."""
    if t not in HORIZONS:
        raise HorizonMismatchError(f"unsupported horizon {t!r}; expected one of {HORIZONS} s")
    return int(round(t / STEP_SECONDS))


@dataclass(frozen=True)
class HorizonMetrics:
    at_1s: float
    at_2s: float
    at_3s: float
    avg: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "HorizonMetrics":
        a, b, c = (float(v) for v in values)
        return cls(a, b, c, math.fsum((a, b, c)) / 3.0)

    def values(self) -> tuple[float, float, float, float]:
        return self.at_1s, self.at_2s, self.at_3s, self.avg


def _require_valid(sample: Sample) -> None:
    if not sample.valid or sample.gt_future is None:
        raise PreconditionError(f"sample {sample.sample_id} is not valid")


def _waypoints(pred) -> np.ndarray:
    pts = pred.waypoints if isinstance(pred, Trajectory) else np.asarray(pred, dtype=float)
    if pts.shape != (HORIZON_STEPS, 2):
        raise HorizonMismatchError(f"prediction must have {HORIZON_STEPS} waypoints, got shape {pts.shape}")
    return pts


# --------------------------------------------------------------------------
# L2


def l2_metric(pred, gt_future: Sequence[Pose2D], ego_pose: Pose2D, mode: str = "cumulative") -> np.ndarray:
    """L2 error at 1/2/3 s.

    ``cumulative``: mean displacement over waypoints up to the horizon.
    ``endpoint``: displacement at the horizon waypoint only.
    """
    if mode not in L2_MODES:
        raise InvalidArgument(f"l2 mode must be one of {L2_MODES}, got {mode!r}")
    if gt_future is None or len(gt_future) != HORIZON_STEPS:
        raise PreconditionError("L2 needs a complete 6-pose GT future")
    glob = to_global(ego_pose, _waypoints(pred))
    gt = np.array([[p.x, p.y] for p in gt_future])
    dist = np.hypot(*(glob - gt).T)
    out = []
    for t in HORIZONS:
        n = horizon_steps(t)
        out.append(math.fsum(dist[:n]) / n if mode == "cumulative" else float(dist[n - 1]))
    return np.array(out)


# --------------------------------------------------------------------------
# collision rates


def collision_rate_legacy(hits: Sequence[bool], t) -> float:
    """Fraction of the first t/0.5 steps that collide."""
    n = horizon_steps(t)
    return sum(bool(h) for h in hits[:n]) / n


def collision_rate(hits: Sequence[bool], t) -> bool:
    """Whether any of the first t/0.5 steps collides."""
    n = horizon_steps(t)
    return any(hits[:n])


# --------------------------------------------------------------------------
# footprints and per-step checks


def ego_footprints(pred, ego_pose: Pose2D, ego_dims=DEFAULT_EGO_DIMS, yaw_mode: str = "estimated") -> list[OrientedBox]:
    """Global-frame ego boxes at each predicted waypoint.

    ``estimated`` orients each box along the trajectory; ``fixed`` keeps the
    heading at prediction time for every step.
    """
    if yaw_mode not in YAW_MODES:
        raise InvalidArgument(f"yaw mode must be one of {YAW_MODES}, got {yaw_mode!r}")
    pts = to_global(ego_pose, _waypoints(pred))
    if yaw_mode == "estimated":
        yaws = estimate_yaws(pts, ego_pose.yaw)
    else:
        yaws = [ego_pose.yaw] * len(pts)
    return [make_footprint(p, y, ego_dims) for p, y in zip(pts, yaws)]


def _local_grid(window: OccupancyGrid, box: OrientedBox) -> OccupancyGrid:
    xmin, xmax, ymin, ymax = box.bounds()
    return window.subgrid(xmin, xmax, ymin, ymax)


def step_collisions(pred, sample: Sample, ego_dims=DEFAULT_EGO_DIMS, *, resolution: float = DEFAULT_RESOLUTION,
                    half_extent: float = DEFAULT_HALF_EXTENT, check: str = "raster",
                    yaw_mode: str = "estimated") -> list[bool]:
    """Per-step ego/agent overlap flags.

    Raster mode rasterizes the step's agent boxes into the ego-centered window
    and tests the footprint against it.  Only the window cells under the
    footprint's bounding box are materialized, which gives the same answer as
    rasterizing the whole window.
    """
    _require_valid(sample)
    if check not in CHECK_MODES:
        raise InvalidArgument(f"check must be one of {CHECK_MODES}, got {check!r}")
    boxes = ego_footprints(pred, sample.ego_pose, ego_dims, yaw_mode)
    if check == "exact":
        return [any(exact_box_box_intersect(box, a.box) for a in agents)
                for box, agents in zip(boxes, sample.agents_future)]
    window = OccupancyGrid.window((sample.ego_pose.x, sample.ego_pose.y), half_extent, resolution)
    hits = []
    for box, agents in zip(boxes, sample.agents_future):
        if not agents:
            hits.append(False)
            continue
        xmin, xmax, ymin, ymax = box.bounds()
        grid = window.subgrid(xmin, xmax, ymin, ymax)
        for a in agents:
            axmin, axmax, aymin, aymax = a.box.bounds()
            # boxes outside the footprint's bounding box cannot change the answer
            if axmax >= xmin and axmin <= xmax and aymax >= ymin and aymin <= ymax:
                rasterize_box(grid, a.box)
        hits.append(box_hits_grid(grid, box))
    return hits


def curb_collisions(pred, sample: Sample, boundaries: Sequence[Polyline], ego_dims=DEFAULT_EGO_DIMS, *,
                    traversable: Sequence[bool] | None = None, resolution: float = DEFAULT_RESOLUTION,
                    half_extent: float = DEFAULT_HALF_EXTENT, check: str = "raster",
                    yaw_mode: str = "estimated") -> list[bool]:
    """Per-step ego/curb overlap flags against the non-traversable boundaries."""
    _require_valid(sample)
    if check not in CHECK_MODES:
        raise InvalidArgument(f"check must be one of {CHECK_MODES}, got {check!r}")
    if traversable is not None:
        boundaries = [b for b, trav in zip(boundaries, traversable) if not trav]
    boxes = ego_footprints(pred, sample.ego_pose, ego_dims, yaw_mode)
    if not boundaries:
        return [False] * len(boxes)
    if check == "exact":
        return [any(exact_box_polyline_intersect(box, line) for line in boundaries) for box in boxes]
    window = OccupancyGrid.window((sample.ego_pose.x, sample.ego_pose.y), half_extent, resolution)
    starts, ends = stack_segments(boundaries)
    hits = []
    for box in boxes:
        grid = _local_grid(window, box)
        rasterize_segments(grid, starts, ends)
        hits.append(box_hits_grid(grid, box))
    return hits


# --------------------------------------------------------------------------
# smoothness


@dataclass(frozen=True)
class SmoothnessReport:
    sigma_wd: HorizonMetrics
    # number of (instant, horizon) terms averaged per horizon
    counts: tuple[int, int, int]


def smoothness_terms(scene: Scene, predictions: Mapping[str, Trajectory]) -> list[list[float]]:
    """Squared deviations per horizon (1, 2, 3 s) for every instant with >= 2 contributing waypoints.

    For each absolute instant, the waypoints predicting it from earlier valid
    samples form a set; each waypoint's squared distance to the set centroid
    is attributed to its lead-time horizon.  Only leads 2, 4 and 6 feed the
    1 s, 2 s and 3 s columns.
    """
    groups: dict[int, list[tuple[int, np.ndarray]]] = {}
    for k, sample in enumerate(scene.samples):
        if not sample.valid or sample.sample_id not in predictions:
            continue
        pts = to_global(sample.ego_pose, _waypoints(predictions[sample.sample_id]))
        for lead in range(1, HORIZON_STEPS + 1):
            groups.setdefault(k + lead, []).append((lead, pts[lead - 1]))
    terms: list[list[float]] = [[], [], []]
    for idx in sorted(groups):
        members = groups[idx]
        if len(members) < 2:
            continue
        pts = np.array([p for _, p in members])
        centroid = pts.mean(axis=0)
        for (lead, p) in members:
            if lead % 2 == 0:
                d = p - centroid
                terms[lead // 2 - 1].append(float(d @ d))
    return terms


def smoothness(scene: Scene, predictions: Mapping[str, Trajectory]) -> SmoothnessReport:
    terms = smoothness_terms(scene, predictions)
    return smoothness_from_terms(terms)


def smoothness_from_terms(terms: Sequence[Sequence[float]]) -> SmoothnessReport:
    if not any(terms):
        raise UndefinedMetricError("smoothness needs some instant predicted by >= 2 valid samples")
    means = [math.fsum(t) / len(t) if t else math.nan for t in terms]
    return SmoothnessReport(HorizonMetrics.from_values(means), tuple(len(t) for t in terms))


# --------------------------------------------------------------------------
# corpus statistics

HEATMAP_RESOLUTION = 0.5


@dataclass
class DatasetStats:
    valid_samples: int
    straight_fraction: float
    turn_fraction: float
    command_counts: dict
    # heatmap[r, c] counts GT waypoints (ego frame) with x in bin c and y in bin r
    heatmap: np.ndarray
    heatmap_origin: tuple[float, float]
    heatmap_resolution: float = HEATMAP_RESOLUTION


def dataset_stats(scenes: Sequence[Scene], derive: bool = True) -> DatasetStats:
    """Command fractions over valid samples plus an ego-frame heatmap of GT waypoints."""
    samples = [s for scene in scenes for s in scene.samples if s.valid]
    if not samples:
        raise InvalidArgument("dataset_stats needs at least one valid sample")
    counts = {c.value: 0 for c in Command}
    pts = []
    for s in samples:
        cmd = derive_command(s) if derive else s.status.command
        counts[cmd.value] += 1
        pts.append(to_local(s.ego_pose, [[p.x, p.y] for p in s.gt_future]))
    pts = np.concatenate(pts)
    res = HEATMAP_RESOLUTION
    lo = np.floor(pts.min(axis=0) / res) * res
    idx = np.floor((pts - lo) / res).astype(np.int64)
    shape = idx.max(axis=0) + 1
    heat = np.zeros((shape[1], shape[0]), dtype=np.int64)
    np.add.at(heat, (idx[:, 1], idx[:, 0]), 1)
    n = len(samples)
    straight = counts[Command.STRAIGHT.value]
    return DatasetStats(valid_samples=n, straight_fraction=straight / n, turn_fraction=(n - straight) / n,
                        command_counts=counts, heatmap=heat, heatmap_origin=(float(lo[0]), float(lo[1])))
