"""Serialize a BenchmarkReport as JSON, markdown tables and a verdict dump.

All output is a pure function of the report and provenance dict, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math

from .evaluate import GROUPS, METRICS, BenchmarkReport
from .metrics import HorizonMetrics

_TITLES = {
    "l2": "L2 (m)",
    "collision": "Collision (%)",
    "collision_legacy": "Collision-legacy (%)",
    "ccr": "CCR (%)",
    "ccr_legacy": "CCR-legacy (%)",
}
_TABLE_METRICS = ("l2", "collision", "ccr")


def _num(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _hm(h: HorizonMetrics | None):
    if h is None:
        return None
    return {"1s": _num(h.at_1s), "2s": _num(h.at_2s), "3s": _num(h.at_3s), "avg": _num(h.avg)}


def _table(metrics: dict | None):
    if metrics is None:
        return None
    return {name: _hm(metrics[name]) for name in METRICS}


def report_dict(report: BenchmarkReport, provenance: dict) -> dict:
    return {
        "provenance": provenance,
        "counts": {
            "samples": report.sample_count,
            "valid": report.valid_count,
            "evaluated": report.evaluated_count,
            "skipped_missing_prediction": report.skipped_count,
            "by_command": report.command_counts,
        },
        "overall": _table(report.overall),
        "by_command": {g: _table(report.by_command[g]) for g in GROUPS},
        "smoothness_sigma_wd": _hm(report.smoothness),
    }


def to_json(report: BenchmarkReport, provenance: dict) -> str:
    return json.dumps(report_dict(report, provenance), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cells(h: HorizonMetrics | None) -> list[str]:
    if h is None:
        return ["-"] * 4
    return ["-" if math.isnan(v) else f"{v:.2f}" for v in h.values()]


def _markdown_table(rows: list[tuple[str, dict | None]], metrics, suffixes=("",)) -> list[str]:
    header = ["Run"] + [f"{_TITLES[m]}{sfx} {c}" for m in metrics for sfx in suffixes
                        for c in ("1s", "2s", "3s", "Avg.")]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for label, cols in rows:
        cells = [label]
        for m in metrics:
            for sfx in suffixes:
                table = cols.get(sfx) if cols else None
                cells += _cells(table[m] if table else None)
        lines.append("| " + " | ".join(cells) + " |")
    return lines


def to_markdown(report: BenchmarkReport, provenance: dict, label: str = "run") -> str:
    out = [f"# Open-loop planning report: {label}", ""]
    out.append(f"- toolkit version: {provenance.get('toolkit_version')}")
    out.append(f"- config hash: `{provenance.get('config_hash')}`")
    out.append(f"- samples: {report.sample_count}, valid: {report.valid_count}, "
               f"evaluated: {report.evaluated_count}, skipped: {report.skipped_count}")
    out.append(f"- by command: ST {report.command_counts['ST']}, LR {report.command_counts['LR']}")
    out += ["", "## Overall", ""]
    out += _markdown_table([(label, {"": report.overall})], _TABLE_METRICS)
    out += ["", "## Legacy fractional rates", ""]
    out += _markdown_table([(label, {"": report.overall})], ("collision_legacy", "ccr_legacy"))
    split = {"": report.overall, "-ST": report.by_command["ST"], "-LR": report.by_command["LR"]}
    for m in _TABLE_METRICS:
        out += ["", f"## {_TITLES[m]} by driving command", ""]
        out += _markdown_table([(label, split)], (m,), suffixes=("", "-ST", "-LR"))
    out += ["", "## Smoothness sigma_wd (m^2)", ""]
    out.append("| Run | 1s | 2s | 3s | Avg. |")
    out.append("|---|---|---|---|---|")
    out.append("| " + " | ".join([label] + _cells(report.smoothness)) + " |")
    return "\n".join(out) + "\n"


def verdict_lines(report: BenchmarkReport) -> str:
    return "".join(json.dumps(v.as_record(), sort_keys=True, separators=(",", ":")) + "\n"
                   for v in report.verdicts)
