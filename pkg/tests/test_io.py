import json

import numpy as np
import pytest

from multicam.cameras import (
    BackwardForwardPolynomialFisheyeCamera,
    CubeCamera,
    EquirectangularCamera,
    Kitti360FisheyeCamera,
    OpenCVCamera,
    OpenCVFisheyeCamera,
    OrthographicCamera,
    PinholeCamera,
)
from multicam.io import (
    load_camera,
    load_depth,
    load_image,
    load_pfm,
    save_camera,
    save_depth,
    save_image,
    save_pfm,
)
from multicam.ndbatch import Pose, normalized_from_pixel_intrinsics

from helpers import random_rotation

K_NORM = np.array([[0.9, 0.0, 0.05], [0.0, 1.1, -0.02], [0.0, 0.0, 1.0]])


def all_kind_cameras():
    return [
        PinholeCamera.make(K_NORM),
        OrthographicCamera.make(K_NORM, z_min=0.25),
        OpenCVCamera.make(
            K_NORM, [0.02, -0.01, 0.003, 0.01, -0.005, 0.001, 0.002, -0.001]
        ),
        EquirectangularCamera.make(),
        OpenCVFisheyeCamera.make(
            K_NORM, [0.01, -0.002, 0.0003, -0.00005], theta_max=2.2
        ),
        BackwardForwardPolynomialFisheyeCamera.make(
            K_NORM, [0.0, 1.0, 0.0, 0.05], [0.0, 1.0, 0.0, -0.0497], theta_max=1.2
        ),
        Kitti360FisheyeCamera.make(K_NORM, [0.02, -0.008], xi=2.1, theta_max=1.5),
        CubeCamera.make(),
    ]


# -- PFM ----------------------------------------------------------------------


def test_pfm_gray_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(81)
    d = rng.normal(size=(13, 17)).astype(np.float32)
    d[0, 0] = 0.0
    d[1, 2] = -0.0
    d[3, 4] = np.inf
    path = tmp_path / "d.pfm"
    save_pfm(path, d)
    back = load_pfm(path)
    assert back.dtype == np.float32
    np.testing.assert_array_equal(
        back.view(np.uint32), d.view(np.uint32)
    )  # bitwise, including signed zeros


def test_pfm_color_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(82)
    arr = rng.normal(size=(3, 6, 9)).astype(np.float32)
    path = tmp_path / "c.pfm"
    save_pfm(path, arr)
    back = load_pfm(path)
    assert back.shape == (3, 6, 9)
    np.testing.assert_array_equal(back.view(np.uint32), arr.view(np.uint32))


def test_pfm_rows_are_stored_bottom_up(tmp_path):
    d = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    path = tmp_path / "d.pfm"
    save_pfm(path, d)
    raw = path.read_bytes()
    header, data = raw.split(b"-1.0\n", 1)
    assert header == b"Pf\n2 2\n"
    floats = np.frombuffer(data, dtype="<f4")
    np.testing.assert_array_equal(floats, [3.0, 4.0, 1.0, 2.0])


def test_pfm_big_endian_rejected(tmp_path):
    # Positive scale factor declares big-endian data per the format.
    path = tmp_path / "big.pfm"
    data = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=">f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n2 2\n1.0\n")
        f.write(data[::-1].tobytes())
    with pytest.raises(ValueError, match="big-endian"):
        load_pfm(path)


def test_pfm_corrupt_header_rejected(tmp_path):
    path = tmp_path / "bad.pfm"
    path.write_bytes(b"P5\n2 2\n255\n\x00\x00\x00\x00")
    with pytest.raises(ValueError, match="PFM"):
        load_pfm(path)


def test_pfm_truncated_data_rejected(tmp_path):
    path = tmp_path / "short.pfm"
    path.write_bytes(b"Pf\n4 4\n-1.0\n" + b"\x00" * 10)
    with pytest.raises(ValueError, match="truncated"):
        load_pfm(path)


def test_depth_helpers_enforce_single_channel(tmp_path):
    path = tmp_path / "c.pfm"
    save_pfm(path, np.zeros((3, 4, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        load_depth(path)
    with pytest.raises(ValueError):
        save_depth(tmp_path / "d.pfm", np.zeros((3, 4, 4)))


# -- PNG ----------------------------------------------------------------------


def test_png_round_trip_preserves_quantized_values(tmp_path):
    rng = np.random.default_rng(83)
    img = rng.integers(0, 256, size=(3, 10, 14)).astype(np.float64) / 255.0
    path = tmp_path / "img.png"
    save_image(path, img)
    back = load_image(path)
    np.testing.assert_array_equal(back, img)


def test_png_gray_round_trip(tmp_path):
    img = (np.arange(64, dtype=np.float64).reshape(8, 8) * 4 + 1) / 255.0
    path = tmp_path / "g.png"
    save_image(path, img)
    back = load_image(path)
    assert back.shape == (1, 8, 8)
    np.testing.assert_array_equal(back[0], img)


def test_png_clips_out_of_range(tmp_path):
    img = np.array([[[-0.5, 0.5], [2.0, 1.0]]])
    path = tmp_path / "c.png"
    save_image(path, img)
    back = load_image(path)
    assert back[0, 0, 0] == 0.0 and back[0, 1, 0] == 1.0 and back[0, 1, 1] == 1.0
    assert abs(back[0, 0, 1] - 0.5) <= 0.5 / 255


def test_png_rejects_bad_shapes(tmp_path):
    with pytest.raises(ValueError):
        save_image(tmp_path / "x.png", np.zeros((2, 4, 4)))


# -- camera JSON ---------------------------------------------------------------


@pytest.mark.parametrize("cam", all_kind_cameras(), ids=lambda c: c.kind.value)
def test_camera_json_round_trip_is_behavior_identical(cam, tmp_path):
    rng = np.random.default_rng(84)
    pose = Pose(random_rotation(rng), rng.normal(size=3))
    path = tmp_path / "cam.json"
    save_camera(path, cam, pose)
    cam2, pose2 = load_camera(path)
    assert type(cam2) is type(cam)
    np.testing.assert_allclose(pose2.R, pose.R, atol=1e-12)
    np.testing.assert_allclose(pose2.T, pose.T, atol=1e-12)
    for (name, a), (name2, b) in zip(cam.named_tensors(), cam2.named_tensors()):
        assert name == name2
        np.testing.assert_array_equal(a, b)

    pts = rng.normal(size=(100, 3)) * 2.0 + np.array([0.0, 0.0, 3.0])
    res = cam.project_to_pixel(pts)
    res2 = cam2.project_to_pixel(pts)
    np.testing.assert_allclose(res2.pix, res.pix, atol=1e-9)
    np.testing.assert_array_equal(res2.valid, res.valid)


def test_pixel_coords_file_is_normalized_on_load(tmp_path):
    K_pix = np.array([[300.0, 0.0, 320.0], [0.0, 280.0, 230.0], [0.0, 0.0, 1.0]])
    hw = (480, 640)
    data = {
        "model": "pinhole",
        "coords": "pixel",
        "image_size": list(hw),
        "intrinsics": {"fx": 300.0, "fy": 280.0, "cx": 320.0, "cy": 230.0},
    }
    path = tmp_path / "cam.json"
    path.write_text(json.dumps(data))
    cam, pose = load_camera(path)
    expected = PinholeCamera.make(normalized_from_pixel_intrinsics(K_pix, hw))
    np.testing.assert_allclose(
        dict(cam.named_tensors())["affine"],
        dict(expected.named_tensors())["affine"],
        atol=1e-12,
    )
    np.testing.assert_array_equal(pose.R, np.eye(3))


def test_pixel_coords_without_image_size_rejected(tmp_path):
    data = {
        "model": "pinhole",
        "coords": "pixel",
        "intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0},
    }
    path = tmp_path / "cam.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError, match="image_size"):
        load_camera(path)


def test_identity_pinhole_file(tmp_path):
    data = {
        "model": "pinhole",
        "coords": "normalized",
        "intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0},
    }
    path = tmp_path / "cam.json"
    path.write_text(json.dumps(data))
    cam, pose = load_camera(path)
    assert isinstance(cam, PinholeCamera)
    assert cam.shape == ()
    res = cam.project_to_pixel(np.array([0.5, -0.25, 1.0]))
    np.testing.assert_allclose(res.pix, [0.5, -0.25], atol=1e-12)


def test_unknown_model_rejected(tmp_path):
    path = tmp_path / "cam.json"
    path.write_text(json.dumps({"model": "thin_prism", "coords": "normalized"}))
    with pytest.raises(ValueError, match="thin_prism"):
        load_camera(path)


def test_extra_fields_named_in_error(tmp_path):
    data = {
        "model": "pinhole",
        "coords": "normalized",
        "intrinsics": {
            "fx": 1.0,
            "fy": 1.0,
            "cx": 0.0,
            "cy": 0.0,
            "distortion": [0.1, 0.0, 0.0, 0.0],
        },
    }
    path = tmp_path / "cam.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError, match="distortion"):
        load_camera(path)


def test_missing_intrinsics_field_rejected(tmp_path):
    data = {
        "model": "kitti360_fisheye",
        "coords": "normalized",
        "intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0, "xi": 2.0},
    }
    path = tmp_path / "cam.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError, match="distortion"):
        load_camera(path)


def test_wrong_limit_field_rejected(tmp_path):
    data = {
        "model": "pinhole",
        "coords": "normalized",
        "intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0},
        "limits": {"dist_min": 0.1},
    }
    path = tmp_path / "cam.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError, match="dist_min"):
        load_camera(path)


def test_non_orthonormal_rotation_rejected(tmp_path):
    R = np.eye(3)
    R[0, 1] = 1e-3  # well beyond the acceptance tolerance
    data = {
        "model": "pinhole",
        "coords": "normalized",
        "intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0},
        "extrinsics": {"R": R.ravel().tolist(), "T": [0.0, 0.0, 0.0]},
    }
    path = tmp_path / "cam.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError, match="orthonormal"):
        load_camera(path)


def test_slightly_noisy_rotation_snapped(tmp_path):
    rng = np.random.default_rng(85)
    R = random_rotation(rng) + rng.normal(size=(3, 3)) * 1e-7
    data = {
        "model": "pinhole",
        "coords": "normalized",
        "intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0},
        "extrinsics": {"R": R.ravel().tolist(), "T": [1.0, 2.0, 3.0]},
    }
    path = tmp_path / "cam.json"
    path.write_text(json.dumps(data))
    _, pose = load_camera(path)
    np.testing.assert_allclose(pose.R @ pose.R.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(pose.R, R, atol=1e-6)


def test_erp_defaults_to_panorama(tmp_path):
    path = tmp_path / "cam.json"
    path.write_text(json.dumps({"model": "equirectangular", "coords": "normalized"}))
    cam, _ = load_camera(path)
    expected = EquirectangularCamera.make()
    np.testing.assert_array_equal(
        dict(cam.named_tensors())["affine"], dict(expected.named_tensors())["affine"]
    )


def test_batched_camera_save_rejected(tmp_path):
    cam = PinholeCamera.make(np.broadcast_to(K_NORM, (2, 3, 3)))
    with pytest.raises(ValueError):
        save_camera(tmp_path / "cam.json", cam)
