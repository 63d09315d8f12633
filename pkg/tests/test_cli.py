import json
import pathlib
import subprocess
import sys

import pytest

from patchtrace.cli import run

ROOT = pathlib.Path(__file__).resolve().parents[1]
TEAPOT = str(ROOT / "scenes" / "teapot.scene")


@pytest.fixture
def small_scene(tmp_path):
    text = (ROOT / "scenes" / "teapot.scene").read_text().replace("40 256 256", "40 40 32")
    (tmp_path / "teapot.bpt").write_bytes((ROOT / "scenes" / "teapot.bpt").read_bytes())
    path = tmp_path / "small.scene"
    path.write_text(text)
    return str(path)


def test_render_is_deterministic(tmp_path, small_scene):
    a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
    assert run(["render", "--scene", small_scene, "--out", str(a), "--spp", "4", "--seed", "7"]) == 0
    assert run(["render", "--scene", small_scene, "--out", str(b), "--spp", "4", "--seed", "7",
                "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes().startswith(b"P6\n40 32\n255\n")


def test_render_writes_stats(tmp_path, small_scene):
    stats = tmp_path / "s.json"
    assert run(["render", "--scene", small_scene, "--out", str(tmp_path / "x.ppm"), "--stats", str(stats)]) == 0
    d = json.loads(stats.read_text())
    assert d["generations"]["primary"]["rays"] == 40 * 32
    assert {"total_rays", "rays_per_second", "wall_seconds", "trace_seconds"} <= set(d)


def test_verify_bounds_large_trial_count_passes(capsys):
    assert run(["verify", "--suite", "bounds", "--trials", "100000"]) == 0
    assert "ok" in capsys.readouterr().out


def test_verify_traversal_passes():
    assert run(["verify", "--suite", "traversal", "--trials", "500"]) == 0


def test_bench_prints_rates(capsys):
    assert run(["bench", "--scene", TEAPOT, "--rays", "2000", "--kind", "diffuse"]) == 0
    out = capsys.readouterr().out
    for gen in ("primary", "secondary", "shadow", "total"):
        assert gen in out
    assert "rays/s" in out


def test_bench_empty_scene_fails(tmp_path, capsys):
    empty = tmp_path / "empty.scene"
    empty.write_text("")
    assert run(["bench", "--scene", str(empty), "--rays", "10", "--kind", "primary"]) != 0
    assert "no patches" in capsys.readouterr().err


def test_missing_file_fails(tmp_path, capsys):
    assert run(["bench", "--scene", str(tmp_path / "nope.scene"), "--rays", "10", "--kind", "primary"]) != 0
    assert "cannot read" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["render", "--scene", TEAPOT, "--out", "x.ppm", "--bogus"],
    ["render", "--scene", TEAPOT],
    ["verify", "--suite", "everything"],
    ["bench", "--scene", TEAPOT, "--rays", "0", "--kind", "primary"],
    [],
])
def test_usage_errors_exit_nonzero(argv, capsys):
    assert run(argv) != 0
    assert "usage" in capsys.readouterr().err


def test_inspect(capsys):
    assert run(["inspect", "--scene", TEAPOT]) == 0
    out = capsys.readouterr().out
    assert "patches: 33 (33 bezier, 0 gregory)" in out
    assert "bvh: depth" in out and "root boxes:" in out
    assert out.count(" bezier ") >= 33


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "patchtrace.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "render" in proc.stdout
