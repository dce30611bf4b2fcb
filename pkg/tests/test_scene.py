import math

import numpy as np
import pytest

from conftest import arc_pose, make_sample
from openloop_eval.errors import HorizonMismatchError, InvalidArgument, PreconditionError, SchemaError
from openloop_eval.formats import load_predictions, load_scenes, save_predictions, save_scenes
from openloop_eval.geom import OrientedBox, Polyline, Pose2D, exact_box_polyline_intersect, make_footprint
from openloop_eval.scene import (AgentState, Command, EgoStatus, Sample, Scene, Trajectory, derive_command,
                                 derive_gt_future)
from openloop_eval.synth import GenConfig, gen_synthetic, scene_kinds


def raw_scene(n, scene_id="raw"):
    samples = [Sample(f"{scene_id}-{k}", 0.5 * k, Pose2D(2.0 * k, 0.0, 0.0), EgoStatus(4.0)) for k in range(n)]
    return Scene(scene_id, samples)


# ---------------------------------------------------------------- validity


@pytest.mark.parametrize("n,expected", [(40, 34), (6, 0), (7, 1), (0, 0)])
def test_valid_count(n, expected):
    assert len(derive_gt_future(raw_scene(n)).valid_samples) == expected


def test_gt_future_is_next_six_poses():
    sc = derive_gt_future(raw_scene(10))
    s = sc.samples[2]
    assert [p.x for p in s.gt_future] == [6.0, 8.0, 10.0, 12.0, 14.0, 16.0]


def test_derive_gt_future_idempotent():
    once = derive_gt_future(raw_scene(12))
    assert derive_gt_future(once) == once


def test_spacing_enforced():
    samples = [Sample("a", 0.0, Pose2D(0, 0, 0), EgoStatus(1)), Sample("b", 0.7, Pose2D(0, 0, 0), EgoStatus(1))]
    with pytest.raises(InvalidArgument):
        Scene("x", samples)


def test_sample_validation():
    with pytest.raises(InvalidArgument):
        Sample("a", 0.0, Pose2D(0, 0, 0), EgoStatus(1), valid=True)
    with pytest.raises(InvalidArgument):
        Sample("a", 0.0, Pose2D(0, 0, 0), EgoStatus(1), agents_future=((),) * 5)
    with pytest.raises(InvalidArgument):
        EgoStatus(-1.0)


# ---------------------------------------------------------------- commands


def test_derive_command_straight():
    assert derive_command(make_sample(v=5, w=0)) is Command.STRAIGHT


def test_derive_command_left_right():
    assert derive_command(make_sample(v=5, w=0.2)) is Command.LEFT  # 0.6 rad over 3 s
    assert derive_command(make_sample(v=5, w=-0.2)) is Command.RIGHT


def test_derive_command_below_threshold():
    s = make_sample(v=5, w=-0.05 / 3)
    assert s.gt_future[-1].yaw == pytest.approx(-0.05)
    assert derive_command(s) is Command.STRAIGHT


def test_derive_command_invalid_sample():
    with pytest.raises(PreconditionError):
        derive_command(raw_scene(3).samples[0])


def test_command_groups():
    assert Command.STRAIGHT.group == "ST"
    assert Command.LEFT.group == Command.RIGHT.group == "LR"


# ---------------------------------------------------------------- trajectory


def test_trajectory_shape():
    with pytest.raises(HorizonMismatchError):
        Trajectory(np.zeros((5, 2)))
    with pytest.raises(InvalidArgument):
        Trajectory([[math.nan, 0]] + [[0, 0]] * 5)
    t = Trajectory(np.zeros((6, 2)))
    with pytest.raises(ValueError):
        t.waypoints[0, 0] = 1.0


# ---------------------------------------------------------------- files


def minimal_scene():
    agent = AgentState("car", OrientedBox(Pose2D(10.123456789, -0.1, 0.3), 4.5, 1.9))
    s = Sample("only", 0.0, Pose2D(1.0 / 3.0, 2.0, 0.1), EgoStatus(5.0, 0.25, -0.01, "left"),
               agents_future=((agent,), (), (), (), (), ()),
               gt_future=tuple(Pose2D(i * 2.5, 0.0, 0.0) for i in range(1, 7)), valid=True)
    return Scene("one", (s,), (Polyline([(0, 3.5), (50, 3.5)]), Polyline([(0, -3.5), (50, -3.5)])), (False, True))


def test_minimal_scene_round_trip(tmp_path):
    sc = minimal_scene()
    save_scenes(tmp_path / "a.scenes", [sc])
    back = load_scenes(tmp_path / "a.scenes")
    assert back == [sc]
    save_scenes(tmp_path / "b.scenes", back)
    assert (tmp_path / "a.scenes").read_bytes() == (tmp_path / "b.scenes").read_bytes()


def test_generated_corpus_round_trip(tmp_path, corpus_small):
    save_scenes(tmp_path / "c.scenes", corpus_small)
    assert load_scenes(tmp_path / "c.scenes") == corpus_small


def test_prediction_round_trip(tmp_path):
    preds = {"a": Trajectory(np.arange(12.0).reshape(6, 2) / 7.0), "b": Trajectory(np.zeros((6, 2)))}
    save_predictions(tmp_path / "p.preds", preds)
    assert load_predictions(tmp_path / "p.preds") == preds


def test_prediction_with_five_waypoints_names_record(tmp_path):
    path = tmp_path / "bad.preds"
    path.write_text('{"format_version":1,"sample_id":"ok","waypoints":[[0,0],[0,0],[0,0],[0,0],[0,0],[0,0]]}\n'
                    '{"format_version":1,"sample_id":"short-one","waypoints":[[0,0],[0,0],[0,0],[0,0],[0,0]]}\n')
    with pytest.raises(SchemaError) as err:
        load_predictions(path)
    assert "short-one" in str(err.value) and "bad.preds:2" in str(err.value)


def test_schema_errors(tmp_path):
    path = tmp_path / "x.scenes"
    path.write_text("{not json\n")
    with pytest.raises(SchemaError):
        load_scenes(path)
    path.write_text('{"format_version":2,"scene_id":"a","samples":[]}\n')
    with pytest.raises(SchemaError):
        load_scenes(path)
    with pytest.raises(FileNotFoundError):
        load_scenes(tmp_path / "missing.scenes")


def test_duplicate_ids_rejected(tmp_path):
    sc = minimal_scene()
    save_scenes(tmp_path / "d.scenes", [sc, sc])
    with pytest.raises(SchemaError, match="duplicate"):
        load_scenes(tmp_path / "d.scenes")
    p = tmp_path / "d.preds"
    line = '{"format_version":1,"sample_id":"a","waypoints":[[0,0],[0,0],[0,0],[0,0],[0,0],[0,0]]}\n'
    p.write_text(line * 2)
    with pytest.raises(SchemaError, match="duplicate"):
        load_predictions(p)


def test_unknown_fields_ignored(tmp_path):
    p = tmp_path / "e.preds"
    p.write_text('{"format_version":1,"sample_id":"a","extra":1,"waypoints":[[0,0],[0,0],[0,0],[0,0],[0,0],[0,0]]}\n')
    assert list(load_predictions(p)) == ["a"]


# ---------------------------------------------------------------- generator


def test_generator_deterministic(tmp_path):
    a = gen_synthetic(GenConfig(n_scenes=5), seed=11)
    b = gen_synthetic(GenConfig(n_scenes=5), seed=11)
    save_scenes(tmp_path / "a", a)
    save_scenes(tmp_path / "b", b)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert gen_synthetic(GenConfig(n_scenes=5), seed=12) != a


def test_all_straight_config():
    scenes = gen_synthetic(GenConfig(n_scenes=8, straight=1.0, turn=0.0), seed=1)
    assert {derive_command(s) for sc in scenes for s in sc.valid_samples} == {Command.STRAIGHT}


def test_straight_fraction_1000_scenes():
    kinds = scene_kinds(GenConfig(n_scenes=1000), seed=4)
    assert abs(kinds.count("straight") / 1000 - 0.739) <= 0.03


def test_stored_commands_match_derived(corpus_small):
    for sc in corpus_small:
        for s in sc.valid_samples:
            assert derive_command(s) is s.status.command


@pytest.mark.parametrize("field,value", [("straight", 1.2), ("n_scenes", -1), ("road_width", 1.0),
                                         ("turn_rate", (0.3, 0.1))])
def test_invalid_config_names_field(field, value):
    kwargs = {field: value}
    if field == "straight":
        kwargs["turn"] = -0.2
    with pytest.raises(InvalidArgument, match=f"GenConfig.{field}"):
        gen_synthetic(GenConfig(**kwargs), seed=0)


def test_gt_matches_derived_gt(corpus_small):
    for sc in corpus_small:
        assert derive_gt_future(sc) == sc


def test_kinematic_consistency(corpus_small):
    for sc in corpus_small:
        s0 = sc.samples[0]
        v, w = s0.status.speed, s0.status.yaw_rate
        for a, b in zip(sc.samples, sc.samples[1:]):
            chord = math.hypot(b.ego_pose.x - a.ego_pose.x, b.ego_pose.y - a.ego_pose.y)
            dpsi = math.remainder(b.ego_pose.yaw - a.ego_pose.yaw, 2 * math.pi)
            # arc length from chord and heading change
            arc = chord if abs(dpsi) < 1e-12 else chord * (dpsi / 2) / math.sin(dpsi / 2)
            assert arc / 0.5 == pytest.approx(v, abs=1e-6)
            assert dpsi / 0.5 == pytest.approx(w, abs=1e-6)


def test_generated_gt_stays_on_road(corpus_small):
    for sc in corpus_small:
        for s in sc.valid_samples:
            for p in s.gt_future:
                box = make_footprint((p.x, p.y), p.yaw, (4.08, 1.73))
                assert not any(exact_box_polyline_intersect(box, c) for c in sc.curbs)


def test_generated_gt_is_agent_free(corpus_small):
    from openloop_eval.geom import exact_box_box_intersect

    for sc in corpus_small:
        for s in sc.valid_samples:
            for p, agents in zip(s.gt_future, s.agents_future):
                box = make_footprint((p.x, p.y), p.yaw, (4.08, 1.73))
                assert not any(exact_box_box_intersect(box, a.box) for a in agents)


def test_conftest_arc_helper_agrees_with_generator_shape():
    # sanity for the helper used throughout the metric tests
    p = arc_pose(5.0, 0.5, 1.0)
    assert (p.x, p.y) == pytest.approx((10 * math.sin(0.5), 10 * (1 - math.cos(0.5))))
