"""Newline-delimited JSON interchange files.

``*.scenes``: one scene per line.  ``*.preds``: one predicted trajectory per
line, keyed by ``sample_id``.  Every record carries ``format_version``.
Lengths are meters, angles radians, times seconds.  Unknown fields are
ignored on load.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Iterable, Literal, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import HorizonMismatchError, SchemaError
from .geom import OrientedBox, Polyline, Pose2D
from .scene import HORIZON_STEPS, AgentState, EgoStatus, Sample, Scene, Trajectory

FORMAT_VERSION = 1

_Point = Annotated[list[float], Field(min_length=2, max_length=2)]
_Pose = Annotated[list[float], Field(min_length=3, max_length=3)]


class _Record(BaseModel):
    model_config = ConfigDict(extra="ignore", strict=True)


class _AgentRec(_Record):
    id: str
    x: float
    y: float
    yaw: float
    length: float
    width: float


class _StatusRec(_Record):
    speed: float
    accel: float
    yaw_rate: float
    command: Literal["straight", "left", "right"]


class _SampleRec(_Record):
    sample_id: str
    t: float
    ego_pose: _Pose
    status: _StatusRec
    agents_future: Annotated[list[list[_AgentRec]], Field(min_length=HORIZON_STEPS, max_length=HORIZON_STEPS)]
    gt_future: Annotated[list[_Pose], Field(min_length=HORIZON_STEPS, max_length=HORIZON_STEPS)] | None = None
    valid: bool = False


class _BoundaryRec(_Record):
    points: Annotated[list[_Point], Field(min_length=2)]
    traversable: bool = False


class SceneRecord(_Record):
    format_version: Literal[1]
    scene_id: str
    boundaries: list[_BoundaryRec] = []
    samples: list[_SampleRec]


class PredictionRecord(_Record):
    format_version: Literal[1]
    sample_id: str
    waypoints: list[_Point]


def _dumps(record) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _pose(p: Pose2D) -> list:
    return [p.x, p.y, p.yaw]


def scene_to_record(scene: Scene) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "scene_id": scene.scene_id,
        "boundaries": [{"points": b.points.tolist(), "traversable": trav}
                       for b, trav in zip(scene.boundaries, scene.boundary_traversable)],
        "samples": [{
            "sample_id": s.sample_id,
            "t": s.t,
            "ego_pose": _pose(s.ego_pose),
            "status": {"speed": s.status.speed, "accel": s.status.accel,
                       "yaw_rate": s.status.yaw_rate, "command": s.status.command.value},
            "agents_future": [[{"id": a.agent_id, "x": a.box.center.x, "y": a.box.center.y,
                                "yaw": a.box.center.yaw, "length": a.box.length, "width": a.box.width}
                               for a in step] for step in s.agents_future],
            "gt_future": None if s.gt_future is None else [_pose(p) for p in s.gt_future],
            "valid": s.valid,
        } for s in scene.samples],
    }


def scene_from_record(rec: Mapping) -> Scene:
    samples = []
    for s in rec["samples"]:
        gt = s.get("gt_future")
        samples.append(Sample(
            sample_id=s["sample_id"],
            t=float(s["t"]),
            ego_pose=Pose2D(*s["ego_pose"]),
            status=EgoStatus(**{k: s["status"][k] for k in ("speed", "accel", "yaw_rate", "command")}),
            agents_future=tuple(
                tuple(AgentState(a["id"], OrientedBox(Pose2D(a["x"], a["y"], a["yaw"]), a["length"], a["width"]))
                      for a in step) for step in s["agents_future"]),
            gt_future=None if gt is None else tuple(Pose2D(*p) for p in gt),
            valid=bool(s.get("valid", False)),
        ))
    bounds = rec.get("boundaries", [])
    return Scene(scene_id=rec["scene_id"], samples=tuple(samples),
                 boundaries=tuple(Polyline(b["points"]) for b in bounds),
                 boundary_traversable=tuple(bool(b.get("traversable", False)) for b in bounds))


def _records(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", f"{path.name}:{lineno}") from None


def _validate(model, rec, locus):
    try:
        return model.model_validate(rec)
    except ValidationError as exc:
        err = exc.errors()[0]
        where = "/".join(str(p) for p in err["loc"]) or "<record>"
        raise SchemaError(f"{where}: {err['msg']}", locus) from None


def save_scenes(path, scenes: Iterable[Scene]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for scene in scenes:
            fh.write(_dumps(scene_to_record(scene)) + "\n")


def load_scenes(path) -> list[Scene]:
    scenes, seen_scenes, seen_samples = [], set(), set()
    for lineno, rec in _records(path):
        locus = f"{Path(path).name}:{lineno}"
        if isinstance(rec, dict) and "scene_id" in rec:
            locus += f" (scene {rec['scene_id']})"
        _validate(SceneRecord, rec, locus)
        try:
            scene = scene_from_record(rec)
        except ValueError as exc:
            raise SchemaError(str(exc), locus) from None
        if scene.scene_id in seen_scenes:
            raise SchemaError(f"duplicate scene_id {scene.scene_id!r}", locus)
        seen_scenes.add(scene.scene_id)
        for s in scene.samples:
            if s.sample_id in seen_samples:
                raise SchemaError(f"duplicate sample_id {s.sample_id!r}", locus)
            seen_samples.add(s.sample_id)
        scenes.append(scene)
    return scenes


def save_predictions(path, predictions: Mapping[str, Trajectory]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for sample_id, traj in predictions.items():
            fh.write(_dumps({"format_version": FORMAT_VERSION, "sample_id": sample_id,
                             "waypoints": traj.waypoints.tolist()}) + "\n")


def load_predictions(path) -> dict[str, Trajectory]:
    preds: dict[str, Trajectory] = {}
    for lineno, rec in _records(path):
        locus = f"{Path(path).name}:{lineno}"
        if isinstance(rec, dict) and "sample_id" in rec:
            locus += f" (sample {rec['sample_id']})"
        _validate(PredictionRecord, rec, locus)
        sid = rec["sample_id"]
        if sid in preds:
            raise SchemaError(f"duplicate sample_id {sid!r}", locus)
        if len(rec["waypoints"]) != HORIZON_STEPS:
            raise SchemaError(f"expected {HORIZON_STEPS} waypoints, got {len(rec['waypoints'])}", locus)
        try:
            preds[sid] = Trajectory(rec["waypoints"])
        except (HorizonMismatchError, ValueError) as exc:
            raise SchemaError(str(exc), locus) from None
    return preds
