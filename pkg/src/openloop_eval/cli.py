"""Command-line runner: ``gen``, ``plan``, ``eval`` and ``stats``.

Settings come from an optional INI file (``[run]`` section) and flags; flags
win.  The output directory can also be set with ``OPENLOOP_EVAL_OUTPUT_DIR``.

Exit codes: 0 ok, 1 I/O, 2 usage, 3 missing predictions, 4 schema or
horizon mismatch, 5 empty input.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HorizonMismatchError, InvalidArgument, MissingPredictionsError, SchemaError
from .evaluate import EvalConfig, evaluate
from .formats import load_predictions, load_scenes, save_predictions, save_scenes
from .metrics import dataset_stats
from .planners import PLANNERS, describe, parse_perturbation, run_planner
from .report import to_json, to_markdown, verdict_lines
from .scene import DEFAULT_EGO_DIMS
from .synth import GenConfig, gen_synthetic, scene_kinds

log = logging.getLogger("openloop_eval")

OUTPUT_DIR_ENV = "OPENLOOP_EVAL_OUTPUT_DIR"

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_MISSING, EXIT_SCHEMA, EXIT_EMPTY = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    scenes_path: str
    predictions_path: str | None = None
    planner_id: str | None = None
    velocity_scale: float | None = None
    velocity_override: float | None = None
    grid_resolution: float = 0.1
    half_extent: float = 55.0
    ego_dims: tuple = DEFAULT_EGO_DIMS
    l2_mode: str = "cumulative"
    strict_missing: bool = True
    derive_commands: bool = False
    collision_check: str = "raster"
    output_dir: str = "out"
    seed: int = 0
    workers: int = 1
    label: str | None = None

    def validate(self) -> None:
        if (self.predictions_path is None) == (self.planner_id is None):
            raise InvalidArgument("set exactly one of predictions / planner")
        if self.planner_id is not None and self.planner_id not in PLANNERS:
            raise InvalidArgument(f"unknown planner {self.planner_id!r}; choose from {sorted(PLANNERS)}")
        if not self.grid_resolution > 0:
            raise InvalidArgument("grid_resolution must be > 0")
        self.eval_config().validate()

    def eval_config(self) -> EvalConfig:
        return EvalConfig(resolution=self.grid_resolution, half_extent=self.half_extent,
                          ego_dims=tuple(self.ego_dims), l2_mode=self.l2_mode,
                          strict_missing=self.strict_missing, derive_commands=self.derive_commands,
                          collision_check=self.collision_check, workers=self.workers)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# --------------------------------------------------------------------------
# config file handling

_BOOL_KEYS = {"strict_missing", "derive_commands"}
_FLOAT_KEYS = {"velocity_scale", "velocity_override", "grid_resolution", "half_extent", "ego_length", "ego_width"}
_INT_KEYS = {"seed", "workers"}
_STR_KEYS = {"scenes", "predictions", "planner", "l2_mode", "collision_check", "output_dir", "label"}


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise CliError(f"cannot read config file {path}", EXIT_IO)
    if "run" not in parser:
        raise CliError(f"config file {path} has no [run] section", EXIT_USAGE)
    sec = parser["run"]
    out = {}
    for key in sec:
        try:
            if key in _BOOL_KEYS:
                out[key] = sec.getboolean(key)
            elif key in _FLOAT_KEYS:
                out[key] = sec.getfloat(key)
            elif key in _INT_KEYS:
                out[key] = sec.getint(key)
            elif key in _STR_KEYS:
                out[key] = sec[key]
            else:
                raise CliError(f"unknown config key {key!r} in {path}", EXIT_USAGE)
        except ValueError as exc:
            raise CliError(f"bad value for {key!r} in {path}: {exc}", EXIT_USAGE) from None
    return out


def _resolve(args: argparse.Namespace, file_values: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return file_values.get(key, default)


def _output_dir(args, file_values) -> Path:
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    if os.environ.get(OUTPUT_DIR_ENV):
        return Path(os.environ[OUTPUT_DIR_ENV])
    return Path(file_values.get("output_dir", "out"))


def build_run_config(args: argparse.Namespace) -> RunConfig:
    fv = read_config_file(args.config) if args.config else {}
    scenes = _resolve(args, fv, "scenes")
    if scenes is None:
        raise CliError("eval needs --scenes (or 'scenes' in the config file)", EXIT_USAGE)
    predictions = _resolve(args, fv, "predictions")
    planner = _resolve(args, fv, "planner")
    # a flag-level choice of one input source overrides the file's choice of the other
    if args.predictions is not None:
        planner = None
    elif args.planner is not None:
        predictions = None
    cfg = RunConfig(
        scenes_path=scenes,
        predictions_path=predictions,
        planner_id=planner,
        velocity_scale=_resolve(args, fv, "velocity_scale"),
        velocity_override=_resolve(args, fv, "velocity_override"),
        grid_resolution=_resolve(args, fv, "grid_resolution", 0.1),
        half_extent=_resolve(args, fv, "half_extent", 55.0),
        ego_dims=(_resolve(args, fv, "ego_length", DEFAULT_EGO_DIMS[0]),
                  _resolve(args, fv, "ego_width", DEFAULT_EGO_DIMS[1])),
        l2_mode=_resolve(args, fv, "l2_mode", "cumulative"),
        strict_missing=_resolve(args, fv, "strict_missing", True),
        derive_commands=_resolve(args, fv, "derive_commands", False),
        collision_check=_resolve(args, fv, "collision_check", "raster"),
        output_dir=str(_output_dir(args, fv)),
        seed=_resolve(args, fv, "seed", 0),
        workers=_resolve(args, fv, "workers", 1),
        label=_resolve(args, fv, "label"),
    )
    try:
        cfg.validate()
    except InvalidArgument as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    return cfg


# --------------------------------------------------------------------------
# loading helpers


def _load_scenes(path):
    try:
        scenes = load_scenes(path)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    except SchemaError as exc:
        raise CliError(f"schema error: {exc}", EXIT_SCHEMA) from None
    if not scenes:
        raise CliError("no scenes", EXIT_EMPTY)
    return scenes


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    cfg = GenConfig(n_scenes=args.scenes, straight=args.straight, turn=args.turn,
                    samples_per_scene=args.samples_per_scene)
    try:
        cfg.validate()
    except InvalidArgument as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    out = Path(args.out) if args.out else _output_dir(args, {}) / "corpus.scenes"
    out.parent.mkdir(parents=True, exist_ok=True)
    scenes = gen_synthetic(cfg, args.seed)
    save_scenes(out, scenes)
    kinds = scene_kinds(cfg, args.seed)
    settings = {"generator": cfg.as_dict(), "seed": args.seed}
    manifest = {
        "toolkit_version": __version__,
        "config": settings,
        "config_hash": config_hash(settings),
        "scenes_file": out.name,
        "scenes_sha256": _sha256(out),
        "n_scenes": len(scenes),
        "straight_scenes": kinds.count("straight"),
        "turn_scenes": kinds.count("turn"),
        "samples": sum(len(s.samples) for s in scenes),
        "valid_samples": sum(len(s.valid_samples) for s in scenes),
    }
    _write(out.with_name(out.name + ".manifest.json"), json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"wrote {len(scenes)} scenes to {out}")
    return EXIT_OK


def cmd_plan(args) -> int:
    scenes = _load_scenes(args.scenes)
    try:
        pert = parse_perturbation(args.velocity_scale, args.velocity_override)
    except InvalidArgument as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    preds = {}
    for scene in scenes:
        preds.update(run_planner(args.planner, scene, pert))
    out = Path(args.out) if args.out else _output_dir(args, {}) / f"{args.planner}.preds"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_predictions(out, preds)
    print(f"wrote {len(preds)} predictions ({args.planner}, perturbation {describe(pert)}) to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    run = build_run_config(args)
    scenes = _load_scenes(run.scenes_path)
    pert = parse_perturbation(run.velocity_scale, run.velocity_override)
    inputs = {"scenes_sha256": _sha256(run.scenes_path)}
    if run.predictions_path is not None:
        try:
            preds = load_predictions(run.predictions_path)
        except FileNotFoundError as exc:
            raise CliError(str(exc), EXIT_IO) from None
        except SchemaError as exc:
            raise CliError(f"schema error: {exc}", EXIT_SCHEMA) from None
        inputs["predictions_sha256"] = _sha256(run.predictions_path)
        source = {"predictions": Path(run.predictions_path).name}
    else:
        preds = {}
        for scene in scenes:
            preds.update(run_planner(run.planner_id, scene, pert))
        source = {"planner": run.planner_id, "perturbation": describe(pert)}
    ecfg = run.eval_config()
    try:
        report = evaluate(scenes, preds, ecfg)
    except MissingPredictionsError as exc:
        raise CliError(str(exc), EXIT_MISSING) from None
    except HorizonMismatchError as exc:
        raise CliError(str(exc), EXIT_SCHEMA) from None
    if report.valid_count == 0:
        raise CliError("no valid samples", EXIT_EMPTY)

    settings = {"metrics": ecfg.metric_settings(), "source": source, "seed": run.seed}
    provenance = {"toolkit_version": __version__, "config": settings,
                  "config_hash": config_hash(settings), "inputs": inputs}
    label = run.label
    if label is None and run.planner_id is not None:
        label = run.planner_id if pert is None else f"{run.planner_id} ({describe(pert)})"
    elif label is None:
        label = source["predictions"]
    out = Path(run.output_dir)
    _write(out / "report.json", to_json(report, provenance))
    _write(out / "report.md", to_markdown(report, provenance, label))
    _write(out / "verdicts.ndjson", verdict_lines(report))
    o = report.overall
    print(f"evaluated {report.evaluated_count}/{report.valid_count} valid samples -> {out}")
    print(f"L2 avg {o['l2'].avg:.3f} m | Collision avg {o['collision'].avg:.2f} % | CCR avg {o['ccr'].avg:.2f} %")
    return EXIT_OK


def cmd_stats(args) -> int:
    scenes = _load_scenes(args.scenes)
    try:
        stats = dataset_stats(scenes, derive=not args.stored_commands)
    except InvalidArgument:
        raise CliError("no scenes", EXIT_EMPTY) from None
    out = _output_dir(args, {})
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "heatmap.csv", stats.heatmap, fmt="%d", delimiter=",")
    payload = {
        "toolkit_version": __version__,
        "valid_samples": stats.valid_samples,
        "straight_fraction": stats.straight_fraction,
        "turn_fraction": stats.turn_fraction,
        "command_counts": stats.command_counts,
        "heatmap_file": "heatmap.csv",
        "heatmap_origin": list(stats.heatmap_origin),
        "heatmap_resolution": stats.heatmap_resolution,
        "heatmap_layout": "rows = ego-frame y bins (ascending), cols = ego-frame x bins (ascending)",
        "commands": "stored" if args.stored_commands else "derived",
    }
    _write(out / "stats.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"valid samples {stats.valid_samples}")
    print(f"straight_fraction {stats.straight_fraction:.3f}")
    print(f"turn_fraction {stats.turn_fraction:.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openloop-eval", description="Open-loop planning evaluation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic scene corpus")
    g.add_argument("--straight", type=float, default=0.739, help="fraction of straight-road scenes")
    g.add_argument("--turn", type=float, default=0.261, help="fraction of arc-road scenes")
    g.add_argument("--scenes", type=_non_negative_int, default=100)
    g.add_argument("--samples-per-scene", type=_positive_int, default=40)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="scene file path (default: <output-dir>/corpus.scenes)")
    g.add_argument("--output-dir")
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", help="run a baseline planner and write a prediction file")
    p.add_argument("--scenes", required=True)
    p.add_argument("--planner", required=True, choices=sorted(PLANNERS))
    pp = p.add_mutually_exclusive_group()
    pp.add_argument("--velocity-scale", type=float)
    pp.add_argument("--velocity-override", type=float)
    p.add_argument("--out", help="prediction file path (default: <output-dir>/<planner>.preds)")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_plan)

    e = sub.add_parser("eval", help="evaluate predictions or a planner on a scene corpus")
    e.add_argument("--config", help="INI file with a [run] section")
    e.add_argument("--scenes")
    src = e.add_mutually_exclusive_group()
    src.add_argument("--predictions")
    src.add_argument("--planner", choices=sorted(PLANNERS))
    ep = e.add_mutually_exclusive_group()
    ep.add_argument("--velocity-scale", type=float)
    ep.add_argument("--velocity-override", type=float)
    e.add_argument("--grid-resolution", type=float)
    e.add_argument("--half-extent", type=float)
    e.add_argument("--ego-length", type=float)
    e.add_argument("--ego-width", type=float)
    e.add_argument("--l2-mode", choices=["cumulative", "endpoint"])
    e.add_argument("--collision-check", choices=["raster", "exact"])
    e.add_argument("--strict-missing", action=argparse.BooleanOptionalAction, default=None)
    e.add_argument("--derive-commands", action=argparse.BooleanOptionalAction, default=None,
                   help="classify commands from GT heading change instead of using stored ones")
    e.add_argument("--seed", type=int)
    e.add_argument("--workers", type=_positive_int)
    e.add_argument("--label")
    e.add_argument("--output-dir")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("stats", help="command fractions and GT trajectory heatmap of a corpus")
    s.add_argument("--scenes", required=True)
    s.add_argument("--stored-commands", action="store_true", help="use stored commands instead of deriving them")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        if exc.code == EXIT_USAGE:
            parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
