import json

import pytest

from openloop_eval.cli import OUTPUT_DIR_ENV, main
from openloop_eval.formats import load_predictions, save_predictions


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    path = d / "c.scenes"
    assert main(["gen", "--scenes", "6", "--seed", "7", "--samples-per-scene", "12", "--out", str(path)]) == 0
    return path


def test_gen_deterministic_with_manifest(tmp_path, corpus):
    again = tmp_path / "c.scenes"
    assert main(["gen", "--scenes", "6", "--seed", "7", "--samples-per-scene", "12", "--out", str(again)]) == 0
    assert again.read_bytes() == corpus.read_bytes()
    m1 = json.loads((corpus.parent / "c.scenes.manifest.json").read_text())
    m2 = json.loads((tmp_path / "c.scenes.manifest.json").read_text())
    assert m1 == m2
    assert m1["n_scenes"] == 6 and m1["valid_samples"] == 36 and len(m1["config_hash"]) == 64
    assert m1["straight_scenes"] + m1["turn_scenes"] == 6


def test_gen_negative_scenes_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["gen", "--scenes", "-3"])
    assert err.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_gen_bad_fractions_usage_error(tmp_path):
    assert main(["gen", "--straight", "0.9", "--turn", "0.9", "--out", str(tmp_path / "x")]) == 2


def test_eval_planner_outputs(tmp_path, corpus):
    out = tmp_path / "o"
    assert main(["eval", "--scenes", str(corpus), "--planner", "go_straight", "--output-dir", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["provenance"]["toolkit_version"]
    assert len(rep["provenance"]["config_hash"]) == 64
    assert rep["counts"]["valid"] == 36
    assert (out / "report.md").read_text().startswith("# Open-loop planning report: go_straight")
    assert len((out / "verdicts.ndjson").read_text().splitlines()) == 36


def test_eval_twice_byte_identical(tmp_path, corpus):
    for name in ("a", "b"):
        assert main(["eval", "--scenes", str(corpus), "--planner", "constant_turn",
                     "--output-dir", str(tmp_path / name)]) == 0
    for f in ("report.json", "report.md", "verdicts.ndjson"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_eval_velocity_override_scale(tmp_path, corpus):
    out = tmp_path / "o"
    assert main(["eval", "--scenes", str(corpus), "--planner", "go_straight", "--velocity-override", "100",
                 "--output-dir", str(out)]) == 0
    l2 = json.loads((out / "report.json").read_text())["overall"]["l2"]["3s"]
    assert 100 < l2 < 400


def test_plan_then_eval_predictions(tmp_path, corpus):
    preds = tmp_path / "p.preds"
    assert main(["plan", "--scenes", str(corpus), "--planner", "go_straight", "--out", str(preds)]) == 0
    out = tmp_path / "o"
    assert main(["eval", "--scenes", str(corpus), "--predictions", str(preds), "--output-dir", str(out)]) == 0
    a = json.loads((out / "report.json").read_text())
    assert main(["eval", "--scenes", str(corpus), "--planner", "go_straight", "--output-dir",
                 str(tmp_path / "q")]) == 0
    b = json.loads((tmp_path / "q" / "report.json").read_text())
    assert a["overall"] == b["overall"]


def test_missing_predictions_exit_3(tmp_path, corpus, capsys):
    preds_path = tmp_path / "p.preds"
    main(["plan", "--scenes", str(corpus), "--planner", "go_straight", "--out", str(preds_path)])
    preds = load_predictions(preds_path)
    gone = sorted(preds)[0]
    del preds[gone]
    save_predictions(preds_path, preds)
    capsys.readouterr()
    assert main(["eval", "--scenes", str(corpus), "--predictions", str(preds_path),
                 "--output-dir", str(tmp_path / "o")]) == 3
    assert gone in capsys.readouterr().err
    assert main(["eval", "--scenes", str(corpus), "--predictions", str(preds_path), "--no-strict-missing",
                 "--output-dir", str(tmp_path / "o")]) == 0


def test_short_prediction_exit_4(tmp_path, corpus):
    p = tmp_path / "bad.preds"
    p.write_text('{"format_version":1,"sample_id":"x","waypoints":[[0,0],[0,0],[0,0],[0,0],[0,0]]}\n')
    assert main(["eval", "--scenes", str(corpus), "--predictions", str(p), "--output-dir", str(tmp_path)]) == 4


def test_io_and_empty_exit_codes(tmp_path, capsys):
    assert main(["stats", "--scenes", str(tmp_path / "nope.scenes")]) == 1
    empty = tmp_path / "e.scenes"
    empty.write_text("")
    capsys.readouterr()
    assert main(["stats", "--scenes", str(empty), "--output-dir", str(tmp_path)]) == 5
    assert "no scenes" in capsys.readouterr().err
    assert main(["eval", "--scenes", str(empty), "--planner", "go_straight", "--output-dir", str(tmp_path)]) == 5


def test_eval_needs_a_source(tmp_path, corpus):
    assert main(["eval", "--scenes", str(corpus), "--output-dir", str(tmp_path)]) == 2


def test_env_output_dir(tmp_path, corpus, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "envout"))
    assert main(["eval", "--scenes", str(corpus), "--planner", "go_straight"]) == 0
    assert (tmp_path / "envout" / "report.json").is_file()
    # the flag still wins over the environment
    assert main(["eval", "--scenes", str(corpus), "--planner", "go_straight",
                 "--output-dir", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "report.json").is_file()


def test_config_file_and_flag_precedence(tmp_path, corpus):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[run]\nscenes = {corpus}\nplanner = go_straight\nl2_mode = endpoint\n"
                   f"output_dir = {tmp_path / 'fromfile'}\nlabel = filelabel\n")
    assert main(["eval", "--config", str(cfg)]) == 0
    rep = json.loads((tmp_path / "fromfile" / "report.json").read_text())
    assert rep["provenance"]["config"]["metrics"]["l2_mode"] == "endpoint"
    assert "filelabel" in (tmp_path / "fromfile" / "report.md").read_text()
    assert main(["eval", "--config", str(cfg), "--l2-mode", "cumulative",
                 "--output-dir", str(tmp_path / "flags")]) == 0
    rep2 = json.loads((tmp_path / "flags" / "report.json").read_text())
    assert rep2["provenance"]["config"]["metrics"]["l2_mode"] == "cumulative"
    assert rep2["provenance"]["config_hash"] != rep["provenance"]["config_hash"]


def test_config_file_unknown_key(tmp_path, corpus):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[run]\nscenes = {corpus}\nplanner = go_straight\ncolour = red\n")
    assert main(["eval", "--config", str(cfg)]) == 2


def test_stats(tmp_path, corpus, capsys):
    assert main(["stats", "--scenes", str(corpus), "--output-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    stats = json.loads((tmp_path / "stats.json").read_text())
    manifest = json.loads((corpus.parent / "c.scenes.manifest.json").read_text())
    assert f"straight_fraction {stats['straight_fraction']:.3f}" in out
    # commands derived from geometry agree with the generator's scene kinds
    assert stats["command_counts"]["straight"] == manifest["straight_scenes"] * 6
    rows = (tmp_path / "heatmap.csv").read_text().splitlines()
    assert sum(int(x) for r in rows for x in r.split(",")) == 36 * 6


def test_stats_all_straight(tmp_path, capsys):
    path = tmp_path / "s.scenes"
    main(["gen", "--scenes", "3", "--straight", "1", "--turn", "0", "--out", str(path)])
    capsys.readouterr()
    assert main(["stats", "--scenes", str(path), "--output-dir", str(tmp_path)]) == 0
    assert "straight_fraction 1.000" in capsys.readouterr().out
