"""Corpus evaluation: per-sample verdicts reduced into overall and command-split tables."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .errors import HorizonMismatchError, InvalidArgument, MissingPredictionsError, UndefinedMetricError
from .geom import DEFAULT_HALF_EXTENT, DEFAULT_RESOLUTION
from .metrics import (CHECK_MODES, HORIZONS, L2_MODES, HorizonMetrics, collision_rate, collision_rate_legacy,
                      curb_collisions, l2_metric, smoothness_from_terms, smoothness_terms, step_collisions)
from .scene import DEFAULT_COMMAND_THRESHOLD, DEFAULT_EGO_DIMS, HORIZON_STEPS, Scene, Trajectory, derive_command

log = logging.getLogger(__name__)

METRICS = ("l2", "collision", "collision_legacy", "ccr", "ccr_legacy")
GROUPS = ("ST", "LR")


@dataclass(frozen=True)
class EvalConfig:
    resolution: float = DEFAULT_RESOLUTION
    half_extent: float = DEFAULT_HALF_EXTENT
    ego_dims: tuple = DEFAULT_EGO_DIMS
    l2_mode: str = "cumulative"
    strict_missing: bool = True
    derive_commands: bool = False
    command_threshold: float = DEFAULT_COMMAND_THRESHOLD
    collision_check: str = "raster"
    # only affects wall time, never results
    workers: int = 1

    def validate(self) -> None:
        if not self.resolution > 0:
            raise InvalidArgument(f"resolution must be > 0, got {self.resolution}")
        if not self.half_extent > 0:
            raise InvalidArgument(f"half_extent must be > 0, got {self.half_extent}")
        if min(self.ego_dims) <= 0:
            raise InvalidArgument(f"ego_dims must be positive, got {self.ego_dims}")
        if self.l2_mode not in L2_MODES:
            raise InvalidArgument(f"l2_mode must be one of {L2_MODES}, got {self.l2_mode!r}")
        if self.collision_check not in CHECK_MODES:
            raise InvalidArgument(f"collision_check must be one of {CHECK_MODES}")
        if self.workers < 1:
            raise InvalidArgument("workers must be >= 1")

    def metric_settings(self) -> dict:
        """Everything that can change a number in the report."""
        d = asdict(self)
        d.pop("workers")
        d["ego_dims"] = list(self.ego_dims)
        return d


@dataclass
class SampleVerdict:
    scene_id: str
    sample_id: str
    command: str
    l2: list
    coll_legacy: list
    coll: list
    ccr_legacy: list
    ccr: list
    steps_hit_agent: list
    steps_hit_curb: list

    def as_record(self) -> dict:
        return asdict(self)


@dataclass
class BenchmarkReport:
    overall: dict
    by_command: dict
    sample_count: int
    valid_count: int
    evaluated_count: int
    skipped_count: int
    command_counts: dict
    smoothness: HorizonMetrics | None = None
    verdicts: list = field(default_factory=list)


def evaluate_sample(sample, pred: Trajectory, scene: Scene, cfg: EvalConfig) -> SampleVerdict:
    if pred.waypoints.shape != (HORIZON_STEPS, 2):
        raise HorizonMismatchError(f"{sample.sample_id}: prediction has shape {pred.waypoints.shape}")
    kw = dict(resolution=cfg.resolution, half_extent=cfg.half_extent, check=cfg.collision_check)
    agent_hits = step_collisions(pred, sample, cfg.ego_dims, **kw)
    curb_hits = curb_collisions(pred, sample, scene.curbs, cfg.ego_dims, **kw)
    cmd = derive_command(sample, cfg.command_threshold) if cfg.derive_commands else sample.status.command
    return SampleVerdict(
        scene_id=scene.scene_id,
        sample_id=sample.sample_id,
        command=cmd.value,
        l2=[float(v) for v in l2_metric(pred, sample.gt_future, sample.ego_pose, cfg.l2_mode)],
        coll_legacy=[collision_rate_legacy(agent_hits, t) for t in HORIZONS],
        coll=[collision_rate(agent_hits, t) for t in HORIZONS],
        ccr_legacy=[collision_rate_legacy(curb_hits, t) for t in HORIZONS],
        ccr=[collision_rate(curb_hits, t) for t in HORIZONS],
        steps_hit_agent=[bool(h) for h in agent_hits],
        steps_hit_curb=[bool(h) for h in curb_hits],
    )


def _evaluate_scene(args):
    scene, preds, cfg = args
    verdicts = [evaluate_sample(s, preds[s.sample_id], scene, cfg)
                for s in scene.samples if s.valid and s.sample_id in preds]
    try:
        terms = smoothness_terms(scene, preds)
    except UndefinedMetricError:
        terms = [[], [], []]
    return verdicts, terms


def _metric_values(v: SampleVerdict, name: str) -> list[float]:
    if name == "l2":
        return v.l2
    # rates as percentages
    if name in ("collision", "ccr"):
        flags = v.coll if name == "collision" else v.ccr
        return [100.0 if f else 0.0 for f in flags]
    return [100.0 * f for f in (v.coll_legacy if name == "collision_legacy" else v.ccr_legacy)]


def aggregate(verdicts: Sequence[SampleVerdict]) -> dict | None:
    """Per-metric HorizonMetrics averaged over ``verdicts`` (None when empty)."""
    if not verdicts:
        return None
    out = {}
    for name in METRICS:
        cols = list(zip(*(_metric_values(v, name) for v in verdicts)))
        out[name] = HorizonMetrics.from_values([math.fsum(c) / len(verdicts) for c in cols])
    return out


def group_of(command: str) -> str:
    return "ST" if command == "straight" else "LR"


def evaluate(scenes: Sequence[Scene], predictions: Mapping[str, Trajectory],
             config: EvalConfig | None = None) -> BenchmarkReport:
    cfg = config or EvalConfig()
    cfg.validate()
    sample_count = sum(len(s.samples) for s in scenes)
    valid = [s.sample_id for scene in scenes for s in scene.samples if s.valid]
    missing = [sid for sid in valid if sid not in predictions]
    if missing and cfg.strict_missing:
        raise MissingPredictionsError(missing)
    if missing:
        log.warning("skipping %d valid samples without predictions", len(missing))

    jobs = []
    for scene in scenes:
        ids = {s.sample_id for s in scene.samples}
        jobs.append((scene, {k: predictions[k] for k in ids if k in predictions}, cfg))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_evaluate_scene, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        results = [_evaluate_scene(j) for j in jobs]

    verdicts = [v for vs, _ in results for v in vs]
    terms = [[x for _, ts in results for x in ts[h]] for h in range(3)]
    try:
        smooth = smoothness_from_terms(terms).sigma_wd
    except UndefinedMetricError:
        smooth = None

    by_group = {g: [v for v in verdicts if group_of(v.command) == g] for g in GROUPS}
    return BenchmarkReport(
        overall=aggregate(verdicts),
        by_command={g: aggregate(vs) for g, vs in by_group.items()},
        sample_count=sample_count,
        valid_count=len(valid),
        evaluated_count=len(verdicts),
        skipped_count=len(missing),
        command_counts={g: len(vs) for g, vs in by_group.items()},
        smoothness=smooth,
        verdicts=verdicts,
    )
