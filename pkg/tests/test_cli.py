import json
import subprocess
import sys

import numpy as np
import pytest

from multicam.cameras import (
    EquirectangularCamera,
    OrthographicCamera,
    PinholeCamera,
)
from multicam.cli import run_command
from multicam.io import (
    load_depth,
    load_image,
    load_pfm,
    save_camera,
    save_depth,
    save_image,
)
from multicam.ndbatch import normalized_from_pixel_intrinsics
from multicam.warping import relative_pose, resample_by_intrinsics

from helpers import pose_at, render_plane_view, sphere_texture

K_NORM = normalized_from_pixel_intrinsics(
    np.array([[300.0, 0.0, 320.0], [0.0, 300.0, 240.0], [0.0, 0.0, 1.0]]), (480, 640)
)


def to_png_range(img):
    return np.clip(0.5 + 0.3 * img, 0.0, 1.0)


@pytest.fixture
def workspace(tmp_path):
    """Camera files plus a rendered scene shared by the subcommand tests."""
    pin = PinholeCamera.make(K_NORM)
    erp = EquirectangularCamera.make()
    pose_trg = pose_at([0.0, 0.0, 0.0])
    pose_src = pose_at([0.25, 0.0, 0.0])

    save_camera(tmp_path / "pin_trg.json", pin, pose_trg)
    save_camera(tmp_path / "pin_src.json", pin, pose_src)
    save_camera(tmp_path / "pin_identity.json", PinholeCamera.make(np.eye(3)))
    save_camera(tmp_path / "erp.json", erp)
    save_camera(tmp_path / "ortho.json", OrthographicCamera.make(np.eye(3)))

    hw = (48, 64)
    trg_img, trg_depth = render_plane_view(pin, pose_trg, hw, plane_z=3.0)
    src_img, src_depth = render_plane_view(pin, pose_src, hw, plane_z=3.0)
    save_image(tmp_path / "trg.png", to_png_range(trg_img))
    save_image(tmp_path / "src.png", to_png_range(src_img))
    save_depth(tmp_path / "trg_depth.pfm", trg_depth.astype(np.float32))
    save_depth(tmp_path / "src_depth.pfm", src_depth.astype(np.float32))

    pano = to_png_range(sphere_texture(erp.get_camera_rays((64, 128)).dirs))
    save_image(tmp_path / "pano.png", pano)
    return tmp_path


def run(*argv):
    return run_command([str(a) for a in argv])


# -- rays ---------------------------------------------------------------------


def test_rays_identity_pinhole_single_pixel(workspace):
    out = workspace / "rays.pfm"
    code = run("rays", "--cam", workspace / "pin_identity.json", "--hw", "1x1", "--out", out)
    assert code == 0
    dirs = load_pfm(out)
    assert dirs.shape == (3, 1, 1)
    np.testing.assert_allclose(dirs[:, 0, 0], [0.0, 0.0, 1.0], atol=1e-7)


def test_rays_writes_manifest(workspace):
    out = workspace / "rays.pfm"
    run("rays", "--cam", workspace / "pin_identity.json", "--hw", "4x6", "--out", out)
    manifest = json.loads((workspace / "rays.pfm.manifest.json").read_text())
    assert manifest["command"] == "rays"
    assert str(out) in manifest["outputs"]
    assert manifest["options"]["hw"] == [4, 6]
    assert "timestamp" in manifest


# -- resample -----------------------------------------------------------------


def test_resample_matches_library_call(workspace):
    out = workspace / "view.png"
    code = run(
        "resample",
        "--src", workspace / "erp.json",
        "--src-image", workspace / "pano.png",
        "--trg", workspace / "pin_trg.json",
        "--hw", "32x40",
        "--out", out,
    )
    assert code == 0
    erp = EquirectangularCamera.make()
    pin = PinholeCamera.make(K_NORM)
    img = load_image(workspace / "pano.png")
    expect, valid = resample_by_intrinsics(erp, pin, np.eye(3), img, (32, 40))
    got = load_image(out)
    assert np.abs(got - expect * valid).max() <= 0.5 / 255 + 1e-12


def test_resample_with_rotation_flag(workspace):
    out = workspace / "rot.png"
    c, s = np.cos(0.3), np.sin(0.3)
    rot = f"{c},0,{s},0,1,0,{-s},0,{c}"
    code = run(
        "resample",
        "--src", workspace / "erp.json",
        "--src-image", workspace / "pano.png",
        "--trg", workspace / "erp.json",
        "--rot", rot,
        "--out", out,
    )
    assert code == 0
    assert load_image(out).shape == (3, 64, 128)


# -- warp and sweep -----------------------------------------------------------


def test_sweep_count_one_equals_warp_with_constant_depth(workspace):
    const = np.full((48, 64), 3.0, dtype=np.float32)
    save_depth(workspace / "const.pfm", const)
    warp_out = workspace / "warp.png"
    code = run(
        "warp",
        "--trg", workspace / "pin_trg.json",
        "--src", workspace / "pin_src.json",
        "--src-image", workspace / "src.png",
        "--depth", workspace / "const.pfm",
        "--out", warp_out,
    )
    assert code == 0
    code = run(
        "sweep",
        "--trg", workspace / "pin_trg.json",
        "--src", workspace / "pin_src.json",
        "--src-image", workspace / "src.png",
        "--dmin", 3.0, "--dmax", 3.0, "--count", 1,
        "--hw", "48x64",
        "--out", workspace / "vol",
    )
    assert code == 0
    sweep_out = workspace / "vol_s00_d000.png"
    assert sweep_out.read_bytes() == warp_out.read_bytes()


def test_sweep_emits_numbered_images_and_manifest(workspace):
    code = run(
        "sweep",
        "--trg", workspace / "pin_trg.json",
        "--src", workspace / "pin_src.json",
        "--src-image", workspace / "src.png",
        "--dmin", 1.5, "--dmax", 6.0, "--count", 4,
        "--out", workspace / "cv",
    )
    assert code == 0
    for di in range(4):
        assert (workspace / f"cv_s00_d{di:03d}.png").exists()
    manifest = json.loads((workspace / "cv.manifest.json").read_text())
    hyp = manifest["options"]["hypotheses"]
    assert len(hyp) == 4
    assert hyp[0] == pytest.approx(1.5) and hyp[-1] == pytest.approx(6.0)
    # Inverse-depth spacing by default.
    inv = 1.0 / np.asarray(hyp)
    steps = np.diff(inv)
    np.testing.assert_allclose(steps, steps[0], rtol=1e-9)


def test_warp_ground_truth_depth_resembles_target(workspace):
    out = workspace / "warped.png"
    code = run(
        "warp",
        "--trg", workspace / "pin_trg.json",
        "--src", workspace / "pin_src.json",
        "--src-image", workspace / "src.png",
        "--depth", workspace / "trg_depth.pfm",
        "--out", out,
    )
    assert code == 0
    got = load_image(out)
    want = load_image(workspace / "trg.png")
    filled = (got > 0).all(axis=0)
    assert filled.mean() > 0.8
    assert np.abs(got - want)[:, filled].mean() < 0.02


# -- rectify ------------------------------------------------------------------


def test_rectify_trivial_pair_identity_rotations(workspace):
    code = run(
        "rectify",
        "--src", workspace / "pin_trg.json",
        "--src-image", workspace / "trg.png",
        "--trg", workspace / "pin_src.json",
        "--trg-image", workspace / "src.png",
        "--mode", "side_by_side",
        "--out", workspace / "rect",
    )
    assert code == 0
    rots = json.loads((workspace / "rect_rotations.json").read_text())
    np.testing.assert_allclose(np.array(rots["rot0"]).reshape(3, 3), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.array(rots["rot1"]).reshape(3, 3), np.eye(3), atol=1e-12)
    # Identity rotations leave the images unchanged up to resampling noise.
    got = load_image(workspace / "rect_0.png")
    want = load_image(workspace / "trg.png")
    assert np.abs(got - want).max() <= 1.0 / 255 + 1e-12


# -- fuse ---------------------------------------------------------------------


def test_fuse_consistent_depths(workspace):
    out = workspace / "fused.pfm"
    code = run(
        "fuse",
        "--trg", workspace / "pin_trg.json",
        "--depth", workspace / "trg_depth.pfm",
        "--src", workspace / "pin_src.json",
        "--src-depth", workspace / "src_depth.pfm",
        "--min-views", 1,
        "--out", out,
    )
    assert code == 0
    fused = load_depth(out)
    d_trg = load_depth(workspace / "trg_depth.pfm")
    assert np.abs(fused - d_trg).max() < 1e-5
    mask = load_image(workspace / "fused_mask.png")
    assert set(np.unique(mask)) <= {0.0, 1.0}
    assert mask.mean() > 0.9


# -- reproducibility ----------------------------------------------------------


def data_outputs(root):
    files = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and not p.name.endswith("manifest.json"):
            files[p.relative_to(root).as_posix()] = p.read_bytes()
    return files


def test_reruns_are_byte_identical(workspace):
    commands = {
        "resample": [
            "resample", "--src", workspace / "erp.json", "--src-image",
            workspace / "pano.png", "--trg", workspace / "pin_trg.json",
            "--hw", "24x32", "--out", None,
        ],
        "rectify": [
            "rectify", "--src", workspace / "pin_trg.json", "--src-image",
            workspace / "trg.png", "--trg", workspace / "pin_src.json",
            "--trg-image", workspace / "src.png", "--mode", "side_by_side",
            "--out", None,
        ],
        "warp": [
            "warp", "--trg", workspace / "pin_trg.json", "--src",
            workspace / "pin_src.json", "--src-image", workspace / "src.png",
            "--depth", workspace / "trg_depth.pfm", "--out", None,
        ],
        "sweep": [
            "sweep", "--trg", workspace / "pin_trg.json", "--src",
            workspace / "pin_src.json", "--src-image", workspace / "src.png",
            "--dmin", 2.0, "--dmax", 5.0, "--count", 3, "--out", None,
        ],
        "fuse": [
            "fuse", "--trg", workspace / "pin_trg.json", "--depth",
            workspace / "trg_depth.pfm", "--src", workspace / "pin_src.json",
            "--src-depth", workspace / "src_depth.pfm", "--out", None,
        ],
        "rays": [
            "rays", "--cam", workspace / "pin_trg.json", "--hw", "16x20",
            "--out", None,
        ],
    }
    suffix = {"resample": "o.png", "warp": "o.png", "rays": "o.pfm",
              "fuse": "o.pfm", "rectify": "o", "sweep": "o"}
    for name, argv in commands.items():
        runs = []
        for attempt in ("a", "b"):
            outdir = workspace / f"{name}_{attempt}"
            outdir.mkdir()
            argv[-1] = outdir / suffix[name]
            assert run(*argv) == 0, name
            runs.append(data_outputs(outdir))
        assert runs[0].keys() == runs[1].keys(), name
        for rel in runs[0]:
            assert runs[0][rel] == runs[1][rel], f"{name}: {rel} differs"


# -- exit codes and argument handling ------------------------------------------


def test_unknown_subcommand_exits_2(workspace, capsys):
    assert run("deblur") == 2


def test_missing_required_flag_exits_2(workspace, capsys):
    assert run("rays", "--hw", "2x2", "--out", workspace / "r.pfm") == 2


def test_bad_hw_exits_2(workspace, capsys):
    code = run(
        "rays", "--cam", workspace / "pin_identity.json", "--hw", "tiny",
        "--out", workspace / "r.pfm",
    )
    assert code == 2


def test_sweep_without_range_exits_2(workspace, capsys):
    code = run(
        "sweep", "--trg", workspace / "pin_trg.json", "--src",
        workspace / "pin_src.json", "--src-image", workspace / "src.png",
        "--out", workspace / "cv",
    )
    assert code == 2


def test_missing_input_file_exits_1(workspace, capsys):
    code = run(
        "rays", "--cam", workspace / "nope.json", "--hw", "2x2",
        "--out", workspace / "r.pfm",
    )
    assert code == 1


def test_non_central_resample_exits_1(workspace, capsys):
    code = run(
        "resample", "--src", workspace / "ortho.json", "--src-image",
        workspace / "trg.png", "--trg", workspace / "pin_trg.json",
        "--out", workspace / "o.png",
    )
    assert code == 1
    assert "central" in capsys.readouterr().err


def test_corrupt_camera_json_exits_1(workspace, capsys):
    bad = workspace / "bad.json"
    bad.write_text("{not json")
    code = run(
        "rays", "--cam", bad, "--hw", "2x2", "--out", workspace / "r.pfm"
    )
    assert code == 1


def test_help_exits_0(capsys):
    assert run("--help") == 0


def test_console_entry_point_runs(workspace):
    out = workspace / "ep.pfm"
    proc = subprocess.run(
        [
            sys.executable, "-m", "multicam.cli",
            "rays", "--cam", str(workspace / "pin_identity.json"),
            "--hw", "2x2", "--out", str(out),
        ],
        capture_output=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert load_pfm(out).shape == (3, 2, 2)
