"""File I/O: camera JSON descriptions, 8-bit PNG images, and PFM float maps.

Camera files are JSON documents of the form::

    {
      "model": "opencv_fisheye",
      "coords": "pixel",                  # or "normalized"
      "image_size": [480, 640],           # required when coords == "pixel"
      "intrinsics": {
        "fx": 300.0, "fy": 300.0, "cx": 320.0, "cy": 240.0,
        "distortion": [0.01, -0.002, 0.0003, -0.00005],
        "theta_max": 2.5
      },
      "extrinsics": {"R": [1,0,0, 0,1,0, 0,0,1], "T": [0, 0, 0]},
      "limits": {"dist_min": 1e-8}
    }

The "coords" declaration states the units of fx/fy/cx/cy.  Pixel-calibrated
intrinsics (what calibration tools emit) are converted to resolution-free
normalized coordinates on load, so downstream code never needs to know the
original sensor size.  Extrinsics map world points into the camera frame and
default to the identity.  "limits" holds the near-plane ``z_min`` for planar
kinds or ``dist_min`` for radial ones.

Depth maps and direction images travel as PFM (portable float map): a text
header ``Pf``/``PF``, width/height, and a scale factor whose sign encodes
endianness, followed by rows of raw float32 bottom-up.  Only little-endian
(negative scale) files are supported.  Invalid depth is encoded as 0.
"""

import json

import numpy as np
from PIL import Image

from .cameras import (
    BackwardForwardPolynomialFisheyeCamera,
    CubeCamera,
    EquirectangularCamera,
    Kitti360FisheyeCamera,
    OpenCVCamera,
    OpenCVFisheyeCamera,
    OrthographicCamera,
    PinholeCamera,
)
from .ndbatch import Pose, normalized_from_pixel_intrinsics

__all__ = [
    "load_camera",
    "save_camera",
    "load_image",
    "save_image",
    "load_pfm",
    "save_pfm",
    "load_depth",
    "save_depth",
]

R_ORTHONORMAL_ATOL = 1e-5

# Which intrinsics fields each model accepts beyond fx/fy/cx/cy, and whether
# the affine block itself is optional (equirectangular defaults to the full
# panorama; the cube sensor has no affine at all).
_AFFINE_KEYS = ("fx", "fy", "cx", "cy")

_MODEL_SPECS = {
    "pinhole": dict(cls=PinholeCamera, extra={}, limit="z_min", affine="required"),
    "orthographic": dict(
        cls=OrthographicCamera, extra={}, limit="z_min", affine="required"
    ),
    "opencv": dict(
        cls=OpenCVCamera,
        extra={"distortion": 8},
        limit="z_min",
        affine="required",
    ),
    "equirectangular": dict(
        cls=EquirectangularCamera, extra={}, limit="dist_min", affine="optional"
    ),
    "opencv_fisheye": dict(
        cls=OpenCVFisheyeCamera,
        extra={"distortion": 4, "theta_max": None},
        limit="dist_min",
        affine="required",
    ),
    "backward_forward_poly_fisheye": dict(
        cls=BackwardForwardPolynomialFisheyeCamera,
        extra={"forward_poly": -1, "backward_poly": -1, "theta_max": None},
        limit="dist_min",
        affine="required",
    ),
    "kitti360_fisheye": dict(
        cls=Kitti360FisheyeCamera,
        extra={"distortion": 2, "xi": None, "theta_max": None},
        limit="dist_min",
        affine="required",
    ),
    "cube": dict(cls=CubeCamera, extra={}, limit="dist_min", affine="none"),
}


def _intrinsics_matrix(fields):
    return np.array(
        [
            [fields["fx"], 0.0, fields["cx"]],
            [0.0, fields["fy"], fields["cy"]],
            [0.0, 0.0, 1.0],
        ]
    )


def _load_extrinsics(data):
    ext = data.get("extrinsics")
    if ext is None:
        return Pose.identity()
    R = np.asarray(ext.get("R", np.eye(3).ravel()), dtype=np.float64)
    T = np.asarray(ext.get("T", np.zeros(3)), dtype=np.float64)
    if R.shape != (9,):
        raise ValueError(f"extrinsics R must hold 9 row-major numbers, got {R.shape}")
    if T.shape != (3,):
        raise ValueError(f"extrinsics T must hold 3 numbers, got {T.shape}")
    R = R.reshape(3, 3)
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > R_ORTHONORMAL_ATOL or np.linalg.det(R) < 0:
        raise ValueError(
            f"extrinsics R is not orthonormal (max deviation {err:.2e}, "
            f"tolerance {R_ORTHONORMAL_ATOL:.0e})"
        )
    # Snap small numerical drift to the nearest rotation.
    u, _, vt = np.linalg.svd(R)
    R = u @ vt
    return Pose(R, T)


def load_camera(path):
    """Read a camera JSON file.

    Returns:
        (camera, pose): a scalar-batch camera with normalized intrinsics and
        its world-to-camera pose.
    """
    with open(path, "r") as f:
        data = json.load(f)
    model = data.get("model")
    if model not in _MODEL_SPECS:
        raise ValueError(
            f"unknown camera model {model!r}; expected one of "
            f"{sorted(_MODEL_SPECS)}"
        )
    spec = _MODEL_SPECS[model]
    intr = dict(data.get("intrinsics") or {})

    allowed = set(spec["extra"])
    if spec["affine"] != "none":
        allowed |= set(_AFFINE_KEYS)
    extra_fields = sorted(set(intr) - allowed)
    if extra_fields:
        raise ValueError(
            f"intrinsics fields {extra_fields} are not part of the "
            f"{model!r} model"
        )

    coords = data.get("coords")
    if coords not in ("pixel", "normalized"):
        raise ValueError(f'coords must be "pixel" or "normalized", got {coords!r}')

    kwargs = {}
    have_affine = any(k in intr for k in _AFFINE_KEYS)
    if spec["affine"] == "required" or (spec["affine"] == "optional" and have_affine):
        missing = [k for k in _AFFINE_KEYS if k not in intr]
        if missing:
            raise ValueError(f"intrinsics missing fields {missing} for {model!r}")
        K = _intrinsics_matrix(intr)
        if coords == "pixel":
            if "image_size" not in data:
                raise ValueError('coords "pixel" requires an image_size field')
            h, w = data["image_size"]
            K = normalized_from_pixel_intrinsics(K, (int(h), int(w)))
        kwargs["intrinsics"] = K
    elif spec["affine"] == "optional":
        kwargs["intrinsics"] = None

    for name, length in spec["extra"].items():
        if name == "theta_max":
            if name in intr:
                kwargs[name] = float(intr[name])
            continue
        if name not in intr:
            raise ValueError(f"intrinsics missing field {name!r} for {model!r}")
        if length is None:
            kwargs[name] = float(intr[name])
        else:
            vec = np.asarray(intr[name], dtype=np.float64)
            if vec.ndim != 1 or (length > 0 and vec.shape != (length,)):
                raise ValueError(
                    f"intrinsics field {name!r} must hold "
                    f"{'a vector' if length < 0 else length} numbers"
                )
            kwargs[name] = vec

    limits = dict(data.get("limits") or {})
    unknown_limits = sorted(set(limits) - {spec["limit"]})
    if unknown_limits:
        raise ValueError(
            f"limits fields {unknown_limits} are not part of the {model!r} "
            f"model; it uses {spec['limit']!r}"
        )
    if spec["limit"] in limits:
        kwargs[spec["limit"]] = float(limits[spec["limit"]])

    return spec["cls"].make(**kwargs), _load_extrinsics(data)


def save_camera(path, cam, pose=None):
    """Write a scalar-batch camera (and optional pose) as JSON."""
    if cam.shape != ():
        raise ValueError(f"only scalar-batch cameras can be saved, got {cam.shape}")
    model = cam.kind.value
    spec = _MODEL_SPECS[model]
    params = dict(cam.named_tensors())

    intr = {}
    if "affine" in params:
        fx, fy, cx, cy = (float(v) for v in params["affine"])
        intr.update(fx=fx, fy=fy, cx=cx, cy=cy)
    for name in spec["extra"]:
        val = params[name]
        intr[name] = float(val[0]) if val.shape == (1,) else [float(v) for v in val]

    data = {
        "model": model,
        "coords": "normalized",
        "intrinsics": intr,
        "limits": {spec["limit"]: float(params[spec["limit"]][0])},
    }
    if pose is not None:
        data["extrinsics"] = {
            "R": [float(v) for v in np.asarray(pose.R).ravel()],
            "T": [float(v) for v in np.asarray(pose.T).ravel()],
        }
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


# ---------------------------------------------------------------------------
# PNG images.
# ---------------------------------------------------------------------------


def load_image(path):
    """Read a PNG as float channels-first in [0, 1].

    Returns:
        (1, H, W) for grayscale or (3, H, W) for color, float64.
    """
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        return arr[None]
    return np.moveaxis(arr, -1, 0)


def save_image(path, img):
    """Write a float image in [0, 1] as an 8-bit PNG.

    Args:
        img: (H, W), (1, H, W) grayscale or (3, H, W) color.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ValueError(f"expected (H, W), (1, H, W) or (3, H, W), got {arr.shape}")
    quantized = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    if quantized.shape[0] == 1:
        Image.fromarray(quantized[0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(np.moveaxis(quantized, 0, -1), mode="RGB").save(
            path, format="PNG"
        )


# ---------------------------------------------------------------------------
# PFM float maps.
# ---------------------------------------------------------------------------


def load_pfm(path):
    """Read a PFM file.

    Returns:
        (H, W) float32 for ``Pf`` files, (3, H, W) float32 for ``PF``.
    """
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic not in (b"Pf", b"PF"):
            raise ValueError(f"not a PFM file (header {magic!r})")
        dims = f.readline().split()
        if len(dims) != 2:
            raise ValueError("corrupt PFM header: expected width and height")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        if scale >= 0:
            raise ValueError(
                "big-endian PFM (non-negative scale) is not supported; "
                "only little-endian files (negative scale) can be read"
            )
        channels = 3 if magic == b"PF" else 1
        raw = f.read(w * h * channels * 4)
    if len(raw) != w * h * channels * 4:
        raise ValueError("corrupt PFM: truncated pixel data")
    data = np.frombuffer(raw, dtype="<f4").reshape(h, w, channels)
    data = data[::-1]  # rows are stored bottom-up
    if channels == 1:
        return np.ascontiguousarray(data[..., 0])
    return np.ascontiguousarray(np.moveaxis(data, -1, 0))


def save_pfm(path, arr):
    """Write a float map as little-endian PFM.

    Args:
        arr: (H, W) for grayscale ``Pf`` or (3, H, W) for color ``PF``.
    """
    data = np.asarray(arr, dtype="<f4")
    if data.ndim == 2:
        magic, hwc = b"Pf", data[..., None]
    elif data.ndim == 3 and data.shape[0] == 3:
        magic, hwc = b"PF", np.moveaxis(data, 0, -1)
    else:
        raise ValueError(f"expected (H, W) or (3, H, W), got {data.shape}")
    h, w = hwc.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(hwc[::-1]).tobytes())


def load_depth(path):
    """Read a single-channel depth PFM; invalid pixels are zeros."""
    d = load_pfm(path)
    if d.ndim != 2:
        raise ValueError(f"depth maps must be single-channel, got shape {d.shape}")
    return d


def save_depth(path, d):
    """Write a single-channel depth map as PFM; encode invalid as 0."""
    d = np.asarray(d)
    if d.ndim != 2:
        raise ValueError(f"depth maps must be single-channel, got shape {d.shape}")
    save_pfm(path, d)
