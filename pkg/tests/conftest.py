import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from openloop_eval.geom import Pose2D  # noqa: E402
from openloop_eval.scene import EgoStatus, Sample, Scene  # noqa: E402
from openloop_eval.synth import GenConfig, gen_synthetic  # noqa: E402


def arc_pose(v, w, t, x0=0.0, y0=0.0, yaw0=0.0):
    """Unicycle pose after time t starting from (x0, y0, yaw0)."""
    if abs(w) < 1e-12:
        return Pose2D(x0 + v * t * math.cos(yaw0), y0 + v * t * math.sin(yaw0), yaw0)
    r = v / w
    return Pose2D(x0 + r * (math.sin(yaw0 + w * t) - math.sin(yaw0)),
                  y0 - r * (math.cos(yaw0 + w * t) - math.cos(yaw0)), yaw0 + w * t)


def make_sample(sample_id="s", ego=Pose2D(0, 0, 0), v=5.0, w=0.0, agents=None, t=0.0, command="straight"):
    """A valid sample whose GT future is the unicycle rollout at (v, w)."""
    gt = tuple(arc_pose(v, w, 0.5 * i, ego.x, ego.y, ego.yaw) for i in range(1, 7))
    return Sample(sample_id, t, ego, EgoStatus(v, 0.0, w, command),
                  agents_future=agents if agents is not None else ((),) * 6, gt_future=gt, valid=True)


def make_scene(scene_id="sc", n=1, **kw):
    return Scene(scene_id, tuple(make_sample(f"{scene_id}-{k}", t=0.5 * k, **kw) for k in range(n)))


@pytest.fixture(scope="session")
def corpus_small():
    return gen_synthetic(GenConfig(n_scenes=12), seed=3)


# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if "test_acceptance.py" in report.nodeid:
            _ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if _ACCEPTANCE[name] == 'passed' else 'FAIL'}  {name}")
