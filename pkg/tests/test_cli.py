"""End-to-end tests for the command-line interface.

A small synthetic dataset is generated once per session through the real
`gen-scenes` subcommand; every other subcommand then runs against it via
``main(argv)`` so the dispatch, exit-code, and file-output paths are all
exercised exactly as a shell user would hit them.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from frustumkit.cli import (
    EXIT_INFEASIBLE,
    EXIT_INVARIANT,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from frustumkit.errors import ManifestError
from frustumkit.head import read_anchor_csv
from frustumkit.manifest import iter_object_samples, load_manifest
from frustumkit.scenegen import box_to_json
from frustumkit.voxelizer import read_voxel_grid

SEED = 7
N_SCENES = 4
OBJECTS_PER_SCENE = 2


@pytest.fixture(scope="session")
def dataset(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("cli_dataset") / "data"
    code = main(
        [
            "gen-scenes",
            "--out",
            str(out),
            "--count",
            str(N_SCENES),
            "--seed",
            str(SEED),
            "--objects",
            str(OBJECTS_PER_SCENE),
        ]
    )
    assert code == EXIT_OK
    return out / "manifest.json"


@pytest.fixture(scope="session")
def perfect_detections(dataset: Path, tmp_path_factory) -> Path:
    manifest = load_manifest(dataset)
    frames = []
    for frame in manifest.frames:
        dets = []
        for j, obj in enumerate(frame.objects):
            dets.append(
                {
                    "category": obj.category,
                    "score": 0.9 - 0.05 * j,
                    "box": box_to_json(obj.box),
                }
            )
        frames.append(dets)
    path = tmp_path_factory.mktemp("dets") / "dets.json"
    path.write_text(json.dumps({"frames": frames}))
    return path


# --- dispatch and exit codes --------------------------------------------------


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE


def test_missing_manifest_is_io_error(tmp_path, capsys):
    code = main(
        [
            "recall-curves",
            "--manifest",
            str(tmp_path / "nope.json"),
            "--out",
            str(tmp_path / "c.csv"),
            "--sides",
            "1.6",
            "--heights",
            "1.5",
        ]
    )
    assert code == EXIT_IO
    assert "recall-curves" in capsys.readouterr().err


def test_malformed_manifest_is_io_error(tmp_path):
    bad = tmp_path / "manifest.json"
    bad.write_text(json.dumps({"categories": ["a"], "frames": [], "surprise": 1}))
    code = main(["anchors", "--manifest", str(bad), "--out", str(tmp_path / "a.csv")])
    assert code == EXIT_IO


def test_bad_flag_value_is_usage_error(dataset, tmp_path, capsys):
    code = main(
        [
            "recall-curves",
            "--manifest",
            str(dataset),
            "--out",
            str(tmp_path / "c.csv"),
            "--sides",
            "eleven",
            "--heights",
            "1.5",
        ]
    )
    assert code == EXIT_USAGE


# --- gen-scenes ----------------------------------------------------------------


def test_gen_scenes_output_is_loadable(dataset):
    manifest = load_manifest(dataset)
    assert len(manifest.frames) == N_SCENES
    assert manifest.n_objects > 0
    assert set(manifest.categories) >= {o.category for f in manifest.frames for o in f.objects}
    for frame in manifest.frames:
        assert frame.cloud_path.is_file()
        assert frame.range_image_path is not None and frame.range_image_path.is_file()


def test_gen_scenes_objects_have_conservative_rects(dataset):
    # every sample's frustum (from the manifest rect) must capture cloud points
    for sample in iter_object_samples(load_manifest(dataset)):
        assert sample.rect.width > 0 and sample.rect.height > 0


# --- recall-curves / select-size ------------------------------------------------


def run_recall_curves(dataset: Path, out: Path) -> int:
    return main(
        [
            "recall-curves",
            "--manifest",
            str(dataset),
            "--out",
            str(out),
            "--sides",
            "1.6,3.2,4.8",
            "--heights",
            "1.5,1.7,2.2",
        ]
    )


def test_recall_curves_rows_and_bound(dataset, tmp_path):
    out = tmp_path / "curves.csv"
    assert run_recall_curves(dataset, out) == EXIT_OK
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    # two fr/fc grids by default, 3 sides x 3 heights each
    assert len(rows) == 2 * 3 * 3
    for row in rows:
        assert row["bound_satisfied"] == "1"
        assert float(row["recall_volume"]) >= float(row["bound"]) - 1e-12


def test_recall_curves_rerun_is_byte_identical(dataset, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_recall_curves(dataset, a) == EXIT_OK
    assert run_recall_curves(dataset, b) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_select_size_reports_crossing(dataset, capsys):
    code = main(
        [
            "select-size",
            "--manifest",
            str(dataset),
            "--sides",
            "1.6,3.2,4.8",
            "--heights",
            "1.5,1.7,2.2",
        ]
    )
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "side_m=" in out and "height_m=" in out


def test_select_size_infeasible_exit_code(dataset, capsys):
    code = main(
        [
            "select-size",
            "--manifest",
            str(dataset),
            "--sides",
            "0.05",
            "--heights",
            "0.05",
        ]
    )
    assert code == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().err


# --- voxelize / anchors ----------------------------------------------------------


def test_voxelize_writes_readable_grid(dataset, tmp_path):
    vox = tmp_path / "obj.vox"
    sparse = tmp_path / "obj.csv"
    code = main(
        [
            "voxelize",
            "--manifest",
            str(dataset),
            "--frame",
            "0",
            "--object",
            "0",
            "--out",
            str(vox),
            "--sparse",
            str(sparse),
        ]
    )
    assert code == EXIT_OK
    grid = read_voxel_grid(vox)
    assert grid.total_points > 0
    header = sparse.read_text().splitlines()[0]
    assert header == "ix,iy,iz,count"


def test_voxelize_object_index_out_of_range(dataset, tmp_path):
    code = main(
        [
            "voxelize",
            "--manifest",
            str(dataset),
            "--frame",
            "0",
            "--object",
            "99",
            "--out",
            str(tmp_path / "o.vox"),
        ]
    )
    assert code == EXIT_USAGE


def test_anchors_round_trip(dataset, tmp_path):
    out = tmp_path / "anchors.csv"
    assert main(["anchors", "--manifest", str(dataset), "--out", str(out)]) == EXIT_OK
    anchors = read_anchor_csv(out)
    manifest = load_manifest(dataset)
    present = {o.category for f in manifest.frames for o in f.objects}
    assert set(anchors) == present
    for anchor in anchors.values():
        assert anchor.a_w > 0 and anchor.a_d > 0 and anchor.a_h > 0


# --- encode-check ------------------------------------------------------------------


def test_encode_check_passes_on_clean_data(dataset, capsys):
    code = main(["encode-check", "--manifest", str(dataset), "--seed", "3"])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "round-trip" in out and "gradient check" in out


# --- evaluate ----------------------------------------------------------------------


def test_evaluate_perfect_detections(dataset, perfect_detections, tmp_path):
    prefix = str(tmp_path / "eval")
    code = main(
        [
            "evaluate",
            "--manifest",
            str(dataset),
            "--dets",
            str(perfect_detections),
            "--out-prefix",
            prefix,
        ]
    )
    assert code == EXIT_OK
    with open(prefix + "_categories.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    for row in rows:
        assert float(row["ap"]) == 1.0
        assert float(row["recall"]) == 1.0
        assert float(row["mean_d_xyz"]) == 0.0
    assert Path(prefix + "_iou_hist.csv").is_file()
    assert Path(prefix + "_orientation_hist.csv").is_file()


def test_evaluate_frame_count_mismatch_is_io_error(dataset, tmp_path):
    dets = tmp_path / "dets.json"
    dets.write_text(json.dumps({"frames": [[]]}))
    code = main(
        [
            "evaluate",
            "--manifest",
            str(dataset),
            "--dets",
            str(dets),
            "--out-prefix",
            str(tmp_path / "e"),
        ]
    )
    assert code == EXIT_IO


# --- pipesim -------------------------------------------------------------------------


def test_pipesim_pipelined_period_line(tmp_path, capsys):
    trace_csv = tmp_path / "trace.csv"
    code = main(
        [
            "pipesim",
            "--t2d",
            "29",
            "--t3d",
            "48",
            "--mode",
            "pipelined",
            "--csv",
            str(trace_csv),
        ]
    )
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "period=48 ms" in out
    assert "125/6" in out
    header = trace_csv.read_text().splitlines()[0]
    assert header == "frame,start_2d,done_2d,start_3d,done_3d,latency"


def test_pipesim_sequential_period_line(capsys):
    assert main(["pipesim", "--t2d", "29", "--t3d", "48", "--mode", "sequential"]) == EXIT_OK
    assert "period=77 ms" in capsys.readouterr().out


# --- stale-sweep ------------------------------------------------------------------------


def test_stale_sweep_is_non_increasing(dataset, tmp_path):
    out = tmp_path / "drift.csv"
    code = main(
        [
            "stale-sweep",
            "--manifest",
            str(dataset),
            "--drifts",
            "0,4,8,16,160",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    means = [float(r["mean_ioi_3d"]) for r in rows]
    assert means == sorted(means, reverse=True)
    assert float(rows[-1]["mean_ioi_3d"]) == 0.0  # 160 px > image width kills every frustum


# --- netshape check -----------------------------------------------------------------------


def test_netshape_check_table(capsys):
    assert main(["netshape", "check", "--scale", "medium_tall", "--categories", "10"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "final flat length: 70" in out


def test_netshape_check_forward(capsys):
    code = main(
        ["netshape", "check", "--grid", "16x16x16", "--categories", "2", "--forward-seed", "5"]
    )
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "final flat length: 14" in out
    assert "forward ok" in out


def test_netshape_forward_rejects_big_grids(capsys):
    code = main(
        ["netshape", "check", "--grid", "198x198x102", "--categories", "2", "--forward-seed", "5"]
    )
    assert code == EXIT_USAGE


# --- dhs -----------------------------------------------------------------------------------


def test_dhs_writes_planes_and_bytes(dataset, tmp_path):
    prefix = str(tmp_path / "frame0")
    code = main(["dhs", "--manifest", str(dataset), "--frame", "0", "--out", prefix, "--uint8"])
    assert code == EXIT_OK
    manifest = load_manifest(dataset)
    h = manifest.frames[0].intrinsics.height
    w = manifest.frames[0].intrinsics.width
    assert Path(prefix + ".f32").stat().st_size == 3 * 4 * h * w
    assert Path(prefix + ".u8").stat().st_size == 3 * h * w
    planes = np.frombuffer(Path(prefix + ".f32").read_bytes(), dtype="<f4")
    assert planes.min() >= 0.0 and planes.max() <= 1.0


# --- manifest loader unit checks --------------------------------------------------------------


def test_manifest_rejects_unknown_frame_key(dataset, tmp_path):
    data = json.loads(dataset.read_text())
    data["frames"][0]["extra"] = True
    bad = dataset.parent / "bad_manifest.json"
    bad.write_text(json.dumps(data))
    try:
        with pytest.raises(ManifestError, match="extra"):
            load_manifest(bad)
    finally:
        bad.unlink()


def test_manifest_rejects_unvocabularied_category(dataset):
    data = json.loads(dataset.read_text())
    data["frames"][0]["objects"][0]["category"] = "zeppelin"
    bad = dataset.parent / "bad_category.json"
    bad.write_text(json.dumps(data))
    try:
        with pytest.raises(ManifestError, match="zeppelin"):
            load_manifest(bad)
    finally:
        bad.unlink()


def test_manifest_rejects_missing_cloud_file(dataset):
    data = json.loads(dataset.read_text())
    data["frames"][0]["cloud"] = "ghost.cloud"
    bad = dataset.parent / "bad_cloud.json"
    bad.write_text(json.dumps(data))
    try:
        with pytest.raises(ManifestError, match="ghost.cloud"):
            load_manifest(bad)
    finally:
        bad.unlink()
