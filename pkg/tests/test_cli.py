import json

import numpy as np
import pytest

from culvert_select.cli import main
from culvert_select.imageio import write_png
from culvert_select.selection import SelectionConfig, select
from culvert_select.sim3 import Pose, dump_poses
from culvert_select.synth import write_scene


@pytest.fixture(scope="module")
def frames_dir(tmp_path_factory, spiral_scene):
    d = tmp_path_factory.mktemp("spiral")
    write_scene(spiral_scene, d, depth=False)
    return d


def run(argv):
    code = main([str(a) for a in argv])
    return code


def test_select_writes_header_and_config(frames_dir, tmp_path, spiral_scene):
    out = tmp_path / "sel.json"
    cfg = tmp_path / "empty.cfg"
    cfg.write_text("")
    assert run(["select", "--frames", frames_dir, "--config", cfg, "--out", out, "--debug-dir",
                tmp_path / "dbg"]) == 0
    doc = json.loads(out.read_text())
    assert doc["tool"] == "culvert-select" and "version" in doc and doc["seed"] == 0
    assert doc["config"] == SelectionConfig().to_json()
    assert doc["chosen"] == list(select(spiral_scene.frames).chosen)
    assert (tmp_path / "dbg" / "chosen_pair.json").exists()


def test_echoed_config_reproduces_output(frames_dir, tmp_path):
    first = tmp_path / "a.json"
    assert run(["select", "--frames", frames_dir, "--strategy", "random", "--seed", 5, "--t-angle", 20,
                "--out", first]) == 0
    doc = json.loads(first.read_text())
    cfg = tmp_path / "echo.cfg"
    cfg.write_text("\n".join(f"{k} = {json.dumps(v)}" if isinstance(v, str) else f"{k} = {v}"
                             for k, v in doc["config"].items()))
    second = tmp_path / "b.json"
    assert run(["select", "--frames", frames_dir, "--config", cfg, "--out", second]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_bench_single_strategy_equals_select(frames_dir, tmp_path, spiral_scene):
    out = tmp_path / "bench.json"
    assert run(["bench", "--frames", frames_dir, "--strategies", "first-last", "--out", out]) == 0
    row = json.loads(out.read_text())["rows"][0]
    res = select(spiral_scene.frames, SelectionConfig(strategy="first_last"))
    assert row["chosen"] == [0, 8]
    assert row["stats"] == res.chosen_stats.to_json()
    assert row["psnr"] == "n/a"


def test_bench_identical_renders(frames_dir, tmp_path):
    renders = tmp_path / "renders" / "quartiles"
    renders.mkdir(parents=True)
    img = (np.arange(64 * 48) % 251).astype(np.uint8).reshape(48, 64)
    for k in range(2):
        write_png(renders / f"render_{k}.png", img)
        write_png(renders / f"ref_{k}.png", img)
    out = tmp_path / "bench.json"
    assert run(["bench", "--frames", frames_dir, "--strategies", "quartiles", "--renders",
                tmp_path / "renders", "--no-timing", "--out", out]) == 0
    row = json.loads(out.read_text())["rows"][0]
    assert row["psnr"] == "inf" and row["ssim"] == 1.0
    assert "timing" not in json.loads(out.read_text())


def test_metrics_command(tmp_path):
    a = np.zeros((32, 32), np.uint8)
    write_png(tmp_path / "a.png", a)
    write_png(tmp_path / "b.png", a + 255)
    out = tmp_path / "m.json"
    assert run(["metrics", "--ref", tmp_path / "a.png", "--test", tmp_path / "b.png", "--out", out]) == 0
    assert json.loads(out.read_text())["psnr"] == 0.0


def test_align_command(tmp_path):
    rng = np.random.default_rng(0)
    gt = [Pose(np.eye(3), c, k) for k, c in enumerate(rng.normal(size=(5, 3)))]
    pred = [Pose(np.eye(3), 3 * p.center + 1, p.id) for p in gt]
    dump_poses(gt, tmp_path / "gt.json")
    dump_poses(pred, tmp_path / "pred.json")
    out = tmp_path / "r.json"
    assert run(["align", "--gt", tmp_path / "gt.json", "--pred", tmp_path / "pred.json",
                "--no-normalize-gt", "--map", tmp_path / "gt.json", "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["s"] == pytest.approx(3.0) and doc["rmse"] < 1e-9
    assert {"R", "t", "residuals", "mapped_poses"} <= set(doc)


def test_synth_command(tmp_path):
    assert run(["synth", "--preset", "tilt", "--frames", 3, "--size", "48x40", "--out", tmp_path / "s"]) == 0
    assert len(list((tmp_path / "s").glob("*.png"))) == 3
    assert (tmp_path / "s" / "poses.json").exists() and (tmp_path / "s" / "depth").is_dir()


def test_sweep_command(frames_dir, tmp_path):
    out = tmp_path / "sw.json"
    assert run(["sweep", "--frames", frames_dir, "--grid-t-angle", "10,20", "--out", out]) == 0
    grid = json.loads(out.read_text())["grid"]
    assert [g["t_angle"] for g in grid] == [10.0, 20.0]


def test_exit_codes(tmp_path, frames_dir):
    with pytest.raises(SystemExit) as e:
        main(["select"])
    assert e.value.code == 2
    assert run(["select", "--frames", tmp_path / "missing"]) == 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("t_baseline = -1\n")
    assert run(["select", "--frames", frames_dir, "--config", bad]) == 4
    gt = [Pose(np.eye(3), (k, 0, 0), k) for k in range(2)]
    dump_poses(gt, tmp_path / "two.json")
    assert run(["align", "--gt", tmp_path / "two.json", "--pred", tmp_path / "two.json"]) == 5
    assert run(["synth", "--radius", "0", "--out", tmp_path / "x"]) == 6


def test_mismatched_renders_tagged(frames_dir, tmp_path, capsys):
    r = tmp_path / "renders" / "ours"
    r.mkdir(parents=True)
    write_png(r / "render_0.png", np.zeros((32, 32), np.uint8))
    assert run(["bench", "--frames", frames_dir, "--strategies", "ours", "--renders", tmp_path / "renders"]) == 3
    assert "[ours]" in capsys.readouterr().err
