"""Camera models with batched projection and pixel-to-ray semantics.

A camera is the tuple (U, A, phi, p): a sensor U of pixel coordinates, a valid
region A of 3D space, a pixel-to-ray map phi(u) = (origin, direction), and a
projection p(x) = (pixel, depth).  The two maps are mutually consistent,

    x = origin(p_pix(x)) + depth(x) * direction(p_pix(x)),

which every model here satisfies under the along-ray depth semantic (and under
z-depth with z-scaled directions).  All cameras except ``CubeCamera`` are
affine: the model-specific map produces pre-affine coordinates (u', v') and the
final pixel is (f0 u' + c0, f1 v' + c1).  Cameras carry an arbitrary batch
shape; parameter arrays are shaped (*batch_shape, param_dim) and points/pixels
may add extra group dims after the batch dims, e.g. projecting
(*batch_shape, H, W, 3) points with a (*batch_shape,) camera batch.

Coordinates are normalized by convention (see ndbatch): cameras calibrated in
pixel units should have their intrinsics converted with
``ndbatch.normalized_from_pixel_intrinsics`` before use with the samplers.

Invalid inputs (points behind z_min, pixels off the sensor, non-converged
undistortion) never raise; they are reported through boolean ``valid`` flags so
batched pipelines degrade to masked pixels.
"""

from __future__ import annotations

import enum
from typing import ClassVar, Iterator, NamedTuple, Optional

import numpy as np

from .ndbatch import normalized_image_grid
from .newton import NewtonConfig, SmoothMap, newton_solve

__all__ = [
    "CameraKind",
    "RayBundle",
    "ProjectionResult",
    "Camera",
    "PinholeCamera",
    "OrthographicCamera",
    "OpenCVCamera",
    "EquirectangularCamera",
    "OpenCVFisheyeCamera",
    "BackwardForwardPolynomialFisheyeCamera",
    "Kitti360FisheyeCamera",
    "CubeCamera",
    "HeterogeneousCamera",
    "make_camera",
    "model_project",
    "model_unproject",
    "stack_cameras",
    "camera_class_for",
    "opencv_distortion_map",
    "fisheye_theta_map",
    "kitti360_radial_map",
    "cube_face_grid",
    "Z_MIN_DEFAULT",
    "DIST_MIN_DEFAULT",
    "THETA_MAX_DEFAULT",
]

Z_MIN_DEFAULT = 1e-8
DIST_MIN_DEFAULT = 1e-8
THETA_MAX_DEFAULT = float(np.pi)

#: Guard against division blow-ups; values this small are flagged invalid.
_TINY = 1e-12

#: Newton controls shared by all iterative model inversions.  The residual
#: tolerance sits well below the advertised 1e-9 pixel accuracy so that the
#: affine stage cannot amplify a just-passing residual past it.
_NEWTON_CFG = NewtonConfig(max_iterations=30, tolerance=1e-12, damping=1.0)


class CameraKind(enum.Enum):
    """The eight supported camera models."""

    PINHOLE = "pinhole"
    ORTHOGRAPHIC = "orthographic"
    OPENCV = "opencv"
    EQUIRECTANGULAR = "equirectangular"
    OPENCV_FISHEYE = "opencv_fisheye"
    BACKWARD_FORWARD_POLY_FISHEYE = "backward_forward_poly_fisheye"
    KITTI360_FISHEYE = "kitti360_fisheye"
    CUBE = "cube"


class RayBundle(NamedTuple):
    """Rays through sensor coordinates.

    Attributes:
        origin: (..., 3) ray origins (zero everywhere for central cameras).
        dirs: (..., 3) ray directions; unit length when requested, otherwise
            scaled so the z-component is 1 (Cube: so the inf-norm is 1).
        valid: (...) sensor-membership flags; contents of origin/dirs are
            meaningless (but finite) where False.
    """

    origin: np.ndarray
    dirs: np.ndarray
    valid: np.ndarray


class ProjectionResult(NamedTuple):
    """Projection of 3D points onto the sensor.

    Attributes:
        pix: (..., 2) pixel coordinates ((..., 3) cube points for Cube).
        depth: (...) z-depth or along-ray distance per the call's flag.
        valid: (...) membership of the point in the camera's valid region.
    """

    pix: np.ndarray
    depth: np.ndarray
    valid: np.ndarray


# ---------------------------------------------------------------------------
# Distortion maps (forward polynomial maps inverted by Newton's method).
# ---------------------------------------------------------------------------


def _opencv_eval(x, theta):
    xp, yp = x[..., 0], x[..., 1]
    k0, k1, k2 = theta[..., 0], theta[..., 1], theta[..., 2]
    k3, k4, k5 = theta[..., 3], theta[..., 4], theta[..., 5]
    p0, p1 = theta[..., 6], theta[..., 7]
    r2 = xp * xp + yp * yp
    num = 1.0 + r2 * (k0 + r2 * (k1 + r2 * k2))
    den = 1.0 + r2 * (k3 + r2 * (k4 + r2 * k5))
    d = num / den
    u = xp * d + 2.0 * p0 * xp * yp + p1 * (r2 + 2.0 * xp * xp)
    v = yp * d + p0 * (r2 + 2.0 * yp * yp) + 2.0 * p1 * xp * yp
    return np.stack([u, v], axis=-1)


def _opencv_jac_x(x, theta):
    xp, yp = x[..., 0], x[..., 1]
    k0, k1, k2 = theta[..., 0], theta[..., 1], theta[..., 2]
    k3, k4, k5 = theta[..., 3], theta[..., 4], theta[..., 5]
    p0, p1 = theta[..., 6], theta[..., 7]
    r2 = xp * xp + yp * yp
    num = 1.0 + r2 * (k0 + r2 * (k1 + r2 * k2))
    den = 1.0 + r2 * (k3 + r2 * (k4 + r2 * k5))
    dnum = k0 + r2 * (2.0 * k1 + 3.0 * k2 * r2)
    dden = k3 + r2 * (2.0 * k4 + 3.0 * k5 * r2)
    d = num / den
    dd = (dnum * den - num * dden) / (den * den)
    du_dx = d + 2.0 * xp * xp * dd + 2.0 * p0 * yp + 6.0 * p1 * xp
    du_dy = 2.0 * xp * yp * dd + 2.0 * p0 * xp + 2.0 * p1 * yp
    dv_dx = du_dy
    dv_dy = d + 2.0 * yp * yp * dd + 6.0 * p0 * yp + 2.0 * p1 * xp
    row_u = np.stack([du_dx, du_dy], axis=-1)
    row_v = np.stack([dv_dx, dv_dy], axis=-1)
    return np.stack([row_u, row_v], axis=-2)


def _opencv_jac_theta(x, theta):
    xp, yp = x[..., 0], x[..., 1]
    k0, k1, k2 = theta[..., 0], theta[..., 1], theta[..., 2]
    k3, k4, k5 = theta[..., 3], theta[..., 4], theta[..., 5]
    r2 = xp * xp + yp * yp
    r4 = r2 * r2
    r6 = r4 * r2
    num = 1.0 + k0 * r2 + k1 * r4 + k2 * r6
    den = 1.0 + k3 * r2 + k4 * r4 + k5 * r6
    dd_num = [r2 / den, r4 / den, r6 / den]
    dd_den = [-num * r2 / den ** 2, -num * r4 / den ** 2, -num * r6 / den ** 2]
    dd = dd_num + dd_den
    row_u = [xp * g for g in dd] + [2.0 * xp * yp, r2 + 2.0 * xp * xp]
    row_v = [yp * g for g in dd] + [r2 + 2.0 * yp * yp, 2.0 * xp * yp]
    return np.stack(
        [np.stack(row_u, axis=-1), np.stack(row_v, axis=-1)], axis=-2
    )


def opencv_distortion_map():
    """The OpenCV radial/tangential map (x', y') -> (u', v').

    Input dim 2, parameter dim 8 (k0..k5, p0, p1); used for Newton-based
    unprojection and as a test target for the inverse sensitivities.
    """
    return SmoothMap(_opencv_eval, _opencv_jac_x, _opencv_jac_theta)


def _fisheye_eval(x, theta):
    th = x[..., 0]
    t2 = th * th
    k0, k1, k2, k3 = (theta[..., i] for i in range(4))
    poly = 1.0 + t2 * (k0 + t2 * (k1 + t2 * (k2 + t2 * k3)))
    return (th * poly)[..., None]


def _fisheye_jac_x(x, theta):
    th = x[..., 0]
    t2 = th * th
    k0, k1, k2, k3 = (theta[..., i] for i in range(4))
    dpoly = 1.0 + t2 * (3.0 * k0 + t2 * (5.0 * k1 + t2 * (7.0 * k2 + 9.0 * k3 * t2)))
    return dpoly[..., None, None]


def _fisheye_jac_theta(x, theta):
    th = x[..., 0]
    t3 = th ** 3
    cols = np.stack([t3, t3 * th * th, t3 * th ** 4, t3 * th ** 6], axis=-1)
    return cols[..., None, :]


def fisheye_theta_map():
    """The OpenCV fisheye angle map theta -> theta_d.

    theta_d = theta (1 + k0 theta^2 + k1 theta^4 + k2 theta^6 + k3 theta^8);
    input dim 1, parameter dim 4.
    """
    return SmoothMap(_fisheye_eval, _fisheye_jac_x, _fisheye_jac_theta)


def _kitti_eval(x, theta):
    w = x[..., 0]
    k0, k1 = theta[..., 0], theta[..., 1]
    d = 1.0 + w * (k0 + k1 * w)
    return (w * d * d)[..., None]


def _kitti_jac_x(x, theta):
    w = x[..., 0]
    k0, k1 = theta[..., 0], theta[..., 1]
    d = 1.0 + w * (k0 + k1 * w)
    dd = k0 + 2.0 * k1 * w
    return (d * d + 2.0 * w * d * dd)[..., None, None]


def _kitti_jac_theta(x, theta):
    w = x[..., 0]
    k0, k1 = theta[..., 0], theta[..., 1]
    d = 1.0 + w * (k0 + k1 * w)
    cols = np.stack([2.0 * w * w * d, 2.0 * w ** 3 * d], axis=-1)
    return cols[..., None, :]


def kitti360_radial_map():
    """The Kitti360 squared-radius map w -> w * (1 + k0 w + k1 w^2)^2.

    Maps w = r^2 on the normalized image plane to the squared distorted
    radius; input dim 1, parameter dim 2 (k0, k1).
    """
    return SmoothMap(_kitti_eval, _kitti_jac_x, _kitti_jac_theta)


# ---------------------------------------------------------------------------
# Model maps (pre-affine projection / unprojection), dispatched by kind.
# ---------------------------------------------------------------------------


def _polyval_lowfirst(coeffs, x):
    """Evaluate a polynomial with coefficients (..., K) low-order first."""
    out = np.zeros(
        np.broadcast_shapes(coeffs.shape[:-1], np.shape(x)),
        dtype=np.result_type(coeffs, x),
    )
    for i in range(coeffs.shape[-1] - 1, -1, -1):
        out = out * x + coeffs[..., i]
    return out


def _safe_divide(num, den):
    """num / den with |den| clamped away from zero (callers flag validity)."""
    den = np.asarray(den)
    tiny = np.asarray(_TINY, dtype=den.dtype if den.dtype.kind == "f" else np.float64)
    den_safe = np.where(np.abs(den) < tiny, np.where(den < 0, -tiny, tiny), den)
    return num / den_safe


def _group_params(params, target_shape, event_dims):
    """Reshape each (*batch, P) param to (*batch, 1...1, P) against a target.

    ``target_shape`` is the full shape of the array the params broadcast
    against; ``event_dims`` its trailing per-element dims.
    """
    first = next(iter(params.values()))
    batch_ndim = first.ndim - 1
    batch = first.shape[:batch_ndim]
    if tuple(target_shape[:batch_ndim]) != batch:
        raise ValueError(
            f"array shape {tuple(target_shape)} does not start with camera "
            f"batch shape {batch}"
        )
    group_ndim = len(target_shape) - event_dims - batch_ndim
    if group_ndim < 0:
        raise ValueError(
            f"array shape {tuple(target_shape)} has too few dims for camera "
            f"batch shape {batch}"
        )
    return {
        name: arr.reshape(batch + (1,) * group_ndim + arr.shape[batch_ndim:])
        for name, arr in params.items()
    }


def _unit_and_norm(pts):
    r = np.linalg.norm(pts, axis=-1)
    unit = _safe_divide(pts, r[..., None])
    return unit, r


def _project_pinhole(p, pts, along):
    z = pts[..., 2]
    coords = _safe_divide(pts[..., :2], z[..., None])
    depth = np.linalg.norm(pts, axis=-1) if along else z
    return coords, depth, np.abs(z) > _TINY


def _project_orthographic(p, pts, along):
    # The ray through (x, y) starts at (x, y, 0) with direction (0, 0, 1), so
    # the along-ray distance equals the z-depth.
    return pts[..., :2].copy(), pts[..., 2], np.ones(pts.shape[:-1], dtype=bool)


def _project_opencv(p, pts, along):
    z = pts[..., 2]
    plane = _safe_divide(pts[..., :2], z[..., None])
    coords = _opencv_eval(plane, p["distortion"])
    depth = np.linalg.norm(pts, axis=-1) if along else z
    return coords, depth, np.abs(z) > _TINY


def _project_equirectangular(p, pts, along):
    r = np.linalg.norm(pts, axis=-1)
    u = np.arccos(np.clip(_safe_divide(-pts[..., 1], r), -1.0, 1.0))
    v = np.arctan2(pts[..., 0], pts[..., 2])
    depth = r if along else pts[..., 2]
    return np.stack([u, v], axis=-1), depth, r > _TINY


def _fisheye_coords(pts, theta_d, theta, theta_max):
    """Scale the unit xy direction by theta_d; valid within the FOV cone."""
    unit, r = _unit_and_norm(pts)
    rho = np.hypot(unit[..., 0], unit[..., 1])
    scale = np.where(rho > _TINY, _safe_divide(theta_d, rho), 0.0)
    coords = unit[..., :2] * scale[..., None]
    valid = (r > _TINY) & (theta <= theta_max)
    return coords, valid


def _project_opencv_fisheye(p, pts, along):
    unit, r = _unit_and_norm(pts)
    theta = np.arccos(np.clip(unit[..., 2], -1.0, 1.0))
    theta_d = _fisheye_eval(theta[..., None], p["distortion"])[..., 0]
    coords, valid = _fisheye_coords(pts, theta_d, theta, p["theta_max"][..., 0])
    depth = r if along else pts[..., 2]
    return coords, depth, valid


def _project_bf_poly_fisheye(p, pts, along):
    unit, r = _unit_and_norm(pts)
    theta = np.arccos(np.clip(unit[..., 2], -1.0, 1.0))
    theta_d = _polyval_lowfirst(p["forward_poly"], theta)
    coords, valid = _fisheye_coords(pts, theta_d, theta, p["theta_max"][..., 0])
    depth = r if along else pts[..., 2]
    return coords, depth, valid


def _project_kitti360_fisheye(p, pts, along):
    unit, r = _unit_and_norm(pts)
    xi = p["xi"][..., 0]
    den = unit[..., 2] + xi
    plane = _safe_divide(unit[..., :2], den[..., None])
    w = plane[..., 0] ** 2 + plane[..., 1] ** 2
    k0, k1 = p["distortion"][..., 0], p["distortion"][..., 1]
    rd2 = 1.0 + w * (k0 + k1 * w)
    coords = rd2[..., None] * plane
    theta = np.arccos(np.clip(unit[..., 2], -1.0, 1.0))
    valid = (r > _TINY) & (den > _TINY) & (theta <= p["theta_max"][..., 0])
    depth = r if along else pts[..., 2]
    return coords, depth, valid


def _project_cube(p, pts, along):
    if along:
        norm = np.linalg.norm(pts, axis=-1)
    else:
        norm = np.max(np.abs(pts), axis=-1)
    coords = _safe_divide(pts, norm[..., None])
    return coords, norm, norm > _TINY


_PROJECT_FNS = {
    CameraKind.PINHOLE: _project_pinhole,
    CameraKind.ORTHOGRAPHIC: _project_orthographic,
    CameraKind.OPENCV: _project_opencv,
    CameraKind.EQUIRECTANGULAR: _project_equirectangular,
    CameraKind.OPENCV_FISHEYE: _project_opencv_fisheye,
    CameraKind.BACKWARD_FORWARD_POLY_FISHEYE: _project_bf_poly_fisheye,
    CameraKind.KITTI360_FISHEYE: _project_kitti360_fisheye,
    CameraKind.CUBE: _project_cube,
}


def model_project(kind, params, pts, depth_is_along_ray=False):
    """Pre-affine projection of 3D points for one model kind.

    Implements each model's coordinate formulas before any affine step.

    Args:
        kind: CameraKind.
        params: named parameter arrays shaped (*batch_shape, param_dim); the
            same map a Camera of this kind carries (affine entries unused).
        pts: (*batch_shape, *group_shape, 3) points.
        depth_is_along_ray: report Euclidean distance instead of z-depth
            (Orthographic reports z either way — its rays run along z — and
            Cube reports the inf-norm for planar semantics per its model).

    Returns:
        (coords, depth, valid): (..., 2) pre-affine coordinates ((..., 3) for
        Cube), (...) depths, and (...) domain validity.  Domain violations
        flag valid=False, never raise.
    """
    pts = np.asarray(pts)
    grouped = _group_params(params, pts.shape, 1)
    return _PROJECT_FNS[kind](grouped, pts, depth_is_along_ray)


def _unproject_pinhole(p, coords):
    ones = np.ones(coords.shape[:-1] + (1,), dtype=coords.dtype)
    dirs = np.concatenate([coords, ones], axis=-1)
    origin = np.zeros_like(dirs)
    return origin, dirs, np.ones(coords.shape[:-1], dtype=bool)


def _unproject_orthographic(p, coords):
    zeros = np.zeros(coords.shape[:-1] + (1,), dtype=coords.dtype)
    origin = np.concatenate([coords, zeros], axis=-1)
    dirs = np.zeros_like(origin)
    dirs[..., 2] = 1.0
    return origin, dirs, np.ones(coords.shape[:-1], dtype=bool)


def _unproject_opencv(p, coords):
    theta = np.broadcast_to(
        p["distortion"], coords.shape[:-1] + (p["distortion"].shape[-1],)
    )
    result = newton_solve(
        opencv_distortion_map(), coords, theta, coords, _NEWTON_CFG
    )
    ones = np.ones(coords.shape[:-1] + (1,), dtype=coords.dtype)
    dirs = np.concatenate([result.x, ones], axis=-1)
    return np.zeros_like(dirs), dirs, result.converged


def _dirs_from_theta(coords, theta):
    """Direction at polar angle theta toward the image-plane azimuth of coords."""
    theta_d = np.hypot(coords[..., 0], coords[..., 1])
    azim = np.where(
        (theta_d > _TINY)[..., None], _safe_divide(coords, theta_d[..., None]), 0.0
    )
    sin_t = np.sin(theta)
    dirs = np.stack(
        [sin_t * azim[..., 0], sin_t * azim[..., 1], np.cos(theta)], axis=-1
    )
    return dirs, theta_d


def _unproject_opencv_fisheye(p, coords):
    theta_d = np.hypot(coords[..., 0], coords[..., 1])
    theta_params = np.broadcast_to(
        p["distortion"], coords.shape[:-1] + (p["distortion"].shape[-1],)
    )
    result = newton_solve(
        fisheye_theta_map(),
        theta_d[..., None],
        theta_params,
        theta_d[..., None],
        _NEWTON_CFG,
    )
    theta = np.clip(result.x[..., 0], 0.0, np.pi)
    dirs, _ = _dirs_from_theta(coords, theta)
    valid = result.converged & (result.x[..., 0] <= p["theta_max"][..., 0] + 1e-9)
    return np.zeros_like(dirs), dirs, valid


def _unproject_bf_poly_fisheye(p, coords):
    theta_d = np.hypot(coords[..., 0], coords[..., 1])
    theta = _polyval_lowfirst(p["backward_poly"], theta_d)
    valid = (theta >= -1e-9) & (theta <= p["theta_max"][..., 0] + 1e-9)
    dirs, _ = _dirs_from_theta(coords, np.clip(theta, 0.0, np.pi))
    return np.zeros_like(dirs), dirs, valid


def _unproject_kitti360_fisheye(p, coords):
    rho_d2 = coords[..., 0] ** 2 + coords[..., 1] ** 2
    theta_params = np.broadcast_to(
        p["distortion"], coords.shape[:-1] + (p["distortion"].shape[-1],)
    )
    result = newton_solve(
        kitti360_radial_map(),
        rho_d2[..., None],
        theta_params,
        rho_d2[..., None],
        _NEWTON_CFG,
    )
    w = np.maximum(result.x[..., 0], 0.0)
    k0, k1 = p["distortion"][..., 0], p["distortion"][..., 1]
    rd2 = 1.0 + w * (k0 + k1 * w)
    plane = _safe_divide(coords, rd2[..., None])
    xi = p["xi"][..., 0]
    disc = 1.0 + w * (1.0 - xi * xi)
    s = _safe_divide(xi + np.sqrt(np.maximum(disc, 0.0)), w + 1.0)
    dirs = np.concatenate(
        [plane * s[..., None], (s - xi)[..., None]], axis=-1
    )
    theta = np.arccos(np.clip(s - xi, -1.0, 1.0))
    valid = (
        result.converged
        & (disc >= 0.0)
        & (s > _TINY)
        & (np.abs(rd2) > _TINY)
        & (theta <= p["theta_max"][..., 0] + 1e-9)
    )
    return np.zeros_like(dirs), dirs, valid


def _unproject_cube(p, coords):
    ninf = np.max(np.abs(coords), axis=-1)
    dirs = _safe_divide(coords, ninf[..., None])
    return np.zeros_like(dirs), dirs, ninf > _TINY


_UNPROJECT_FNS = {
    CameraKind.PINHOLE: _unproject_pinhole,
    CameraKind.ORTHOGRAPHIC: _unproject_orthographic,
    CameraKind.OPENCV: _unproject_opencv,
    CameraKind.EQUIRECTANGULAR: None,  # placed below (needs range checks)
    CameraKind.OPENCV_FISHEYE: _unproject_opencv_fisheye,
    CameraKind.BACKWARD_FORWARD_POLY_FISHEYE: _unproject_bf_poly_fisheye,
    CameraKind.KITTI360_FISHEYE: _unproject_kitti360_fisheye,
    CameraKind.CUBE: _unproject_cube,
}


def _unproject_equirectangular(p, coords):
    u, v = coords[..., 0], coords[..., 1]
    sin_u = np.sin(u)
    dirs = np.stack([sin_u * np.sin(v), -np.cos(u), sin_u * np.cos(v)], axis=-1)
    valid = (u >= -1e-9) & (u <= np.pi + 1e-9) & (v >= -np.pi - 1e-9) & (v <= np.pi + 1e-9)
    return np.zeros_like(dirs), dirs, valid


_UNPROJECT_FNS[CameraKind.EQUIRECTANGULAR] = _unproject_equirectangular


def model_unproject(kind, params, coords):
    """Invert a model's pre-affine coordinate map to canonical rays.

    Analytic where the model permits, Newton-based otherwise (OpenCV,
    OpenCVFisheye, Kitti360Fisheye).  Canonical directions are z = 1 scaled
    for planar models and unit length for spherical ones; callers rescale.

    Args:
        kind: CameraKind.
        params: named parameter arrays of that kind.
        coords: (*batch_shape, *group_shape, pd) pre-affine coordinates
            (pd = 3 for Cube, else 2).

    Returns:
        (origin, dirs, valid) arrays; origin is zero for central kinds.
    """
    coords = np.asarray(coords)
    grouped = _group_params(params, coords.shape, 1)
    return _UNPROJECT_FNS[kind](grouped, coords)


# ---------------------------------------------------------------------------
# Camera classes.
# ---------------------------------------------------------------------------


def _affine_from_intrinsics(intrinsics):
    K = np.asarray(intrinsics)
    if K.dtype.kind != "f":
        K = K.astype(np.float64)
    if K.shape[-2:] != (3, 3):
        raise ValueError(f"intrinsics must be (*batch, 3, 3), got {K.shape}")
    return np.stack(
        [K[..., 0, 0], K[..., 1, 1], K[..., 0, 2], K[..., 1, 2]], axis=-1
    )


def _scalar_param(value, name):
    arr = np.asarray(value)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64)
    if arr.ndim == 0:
        return arr.reshape(1)
    return arr[..., None]


def _vector_param(value, length, name):
    arr = np.asarray(value)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64)
    if arr.ndim < 1 or (length is not None and arr.shape[-1] != length):
        raise ValueError(
            f"{name} must have {length} trailing coefficients, got shape "
            f"{arr.shape}"
        )
    return arr


class Camera:
    """Base class: a model kind plus named batched parameter arrays.

    Subclasses declare ``_param_dims`` (name -> trailing dim, None = any) and
    the model hooks; every parameter is stored shaped (*batch_shape, dim).
    Cameras are immutable: tensor-like ops return new instances.
    """

    kind: ClassVar[CameraKind]
    pixel_dim: ClassVar[int] = 2
    central: ClassVar[bool] = True
    has_affine: ClassVar[bool] = True
    uses_dist_min: ClassVar[bool] = False
    _param_dims: ClassVar[dict]

    def __init__(self, params):
        expected = tuple(self._param_dims)
        if set(params) != set(expected):
            raise ValueError(
                f"{type(self).__name__} expects parameters {sorted(expected)}, "
                f"got {sorted(params)}"
            )
        batch = None
        cleaned = {}
        for name in expected:
            arr = np.asarray(params[name])
            if arr.dtype.kind != "f":
                arr = arr.astype(np.float64)
            want = self._param_dims[name]
            if arr.ndim < 1 or (want is not None and arr.shape[-1] != want):
                raise ValueError(
                    f"parameter {name} must be (*batch, {want}), got {arr.shape}"
                )
            if batch is None:
                batch = arr.shape[:-1]
            elif arr.shape[:-1] != batch:
                raise ValueError(
                    f"parameter {name} batch {arr.shape[:-1]} disagrees with "
                    f"{batch}"
                )
            cleaned[name] = arr
        self._params = cleaned
        self._batch_shape = batch
        self._validate()

    def _validate(self):
        if self.has_affine and np.any(self._params["affine"][..., 0:2] == 0.0):
            raise ValueError("affine focal lengths must be nonzero")

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self):
        """The batch shape."""
        return self._batch_shape

    @property
    def dtype(self):
        return next(iter(self._params.values())).dtype

    def named_tensors(self) -> Iterator:
        """Yield every parameter array exactly once as (name, array)."""
        return iter(self._params.items())

    def is_central(self):
        """True if all rays of this camera pass through a single point."""
        return self.central

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"

    # -- tensor-like batch ops ----------------------------------------------

    def _map_params(self, fn):
        return type(self)({name: fn(arr) for name, arr in self._params.items()})

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return self._map_params(lambda a: a.reshape(shape + a.shape[-1:]))

    def permute(self, *dims):
        if len(dims) == 1 and isinstance(dims[0], (tuple, list)):
            dims = tuple(dims[0])
        n = len(self.shape)
        if sorted(d % n for d in dims) != list(range(n)):
            raise ValueError(f"permutation {dims} invalid for batch shape {self.shape}")
        return self._map_params(
            lambda a: np.transpose(a, tuple(d % n for d in dims) + (n,))
        )

    def transpose(self, dim0, dim1):
        n = len(self.shape)
        return self._map_params(lambda a: np.swapaxes(a, dim0 % n, dim1 % n))

    def squeeze(self, dim=None):
        n = len(self.shape)
        if dim is None:
            axes = tuple(i for i, s in enumerate(self.shape) if s == 1)
        else:
            dim = dim % n
            axes = (dim,) if self.shape[dim] == 1 else ()
        if not axes:
            return self.clone()
        return self._map_params(lambda a: np.squeeze(a, axis=axes))

    def unsqueeze(self, dim):
        dim = dim % (len(self.shape) + 1)
        return self._map_params(lambda a: np.expand_dims(a, axis=dim))

    def expand(self, *sizes):
        if len(sizes) == 1 and isinstance(sizes[0], (tuple, list)):
            sizes = tuple(sizes[0])
        return self._map_params(
            lambda a: np.broadcast_to(a, tuple(sizes) + a.shape[-1:]).copy()
        )

    def flip_batch(self, dim):
        n = len(self.shape)
        return self._map_params(lambda a: np.flip(a, axis=dim % n).copy())

    def __getitem__(self, idx):
        if isinstance(idx, tuple) and len(idx) > len(self.shape):
            raise IndexError(
                f"index {idx} has more entries than batch dims {self.shape}"
            )
        return self._map_params(lambda a: a[idx].copy())

    def copy(self):
        return self._map_params(np.copy)

    clone = copy

    def astype(self, dtype):
        return self._map_params(lambda a: a.astype(dtype))

    # -- geometry -------------------------------------------------------------

    def _check_batch(self, arr, event_dims):
        n = len(self.shape)
        if arr.ndim < event_dims + n or arr.shape[:n] != self.shape:
            raise ValueError(
                f"array shape {arr.shape} does not start with camera batch "
                f"shape {self.shape}"
            )

    def _grouped(self, target_shape, event_dims):
        return _group_params(self._params, target_shape, event_dims)

    def _affine_params(self, target_shape, event_dims=1):
        aff = self._grouped(target_shape, event_dims)["affine"]
        return aff[..., 0:2], aff[..., 2:4]

    def _limit_valid(self, pts):
        """A-membership: z >= z_min for planar kinds, ||x|| >= dist_min else."""
        grouped = self._grouped(pts.shape, 1)
        if self.uses_dist_min:
            return np.linalg.norm(pts, axis=-1) >= grouped["dist_min"][..., 0]
        return pts[..., 2] >= grouped["z_min"][..., 0]

    def project_to_pixel(self, pts, depth_is_along_ray=False):
        """Project 3D points to sensor coordinates.

        Args:
            pts: (*cam.shape, *group_shape, 3) points in the camera frame.
            depth_is_along_ray: report Euclidean along-ray distance instead of
                z-depth.

        Returns:
            ProjectionResult with pix (..., pixel_dim), depth (...) and valid
            (...); valid combines the model's domain with the z_min/dist_min
            limit.
        """
        pts = np.asarray(pts)
        self._check_batch(pts, 1)
        coords, depth, valid = model_project(
            self.kind, self._params, pts, depth_is_along_ray
        )
        pix = self._coords_to_pix(coords) if self.has_affine else coords
        return ProjectionResult(pix, depth, valid & self._limit_valid(pts))

    def _coords_to_pix(self, coords):
        f, c = self._affine_params(coords.shape)
        return f * coords + c

    def _pix_to_coords(self, pix):
        f, c = self._affine_params(pix.shape)
        return (pix - c) / f

    def pixel_to_ray(self, pix, unit_vec=True):
        """Rays through sensor coordinates.

        Args:
            pix: (*cam.shape, *group_shape, pixel_dim) coordinates.
            unit_vec: return unit directions; otherwise directions are scaled
                so the z-component is 1 (Cube: inf-norm 1).

        Returns:
            RayBundle; pixels outside the sensor or past non-converged
            undistortion are flagged invalid.
        """
        pix = np.asarray(pix)
        self._check_batch(pix, 1)
        coords = self._pix_to_coords(pix) if self.has_affine else pix
        origin, dirs, valid = model_unproject(self.kind, self._params, coords)
        if unit_vec:
            norm = np.linalg.norm(dirs, axis=-1)
            dirs = _safe_divide(dirs, norm[..., None])
            valid = valid & (norm > _TINY)
        else:
            dirs, zvalid = self._scale_dirs_planar(dirs)
            valid = valid & zvalid
        return RayBundle(origin, dirs, valid)

    def _scale_dirs_planar(self, dirs):
        z = dirs[..., 2]
        return _safe_divide(dirs, z[..., None]), np.abs(z) > _TINY

    def _pixel_grid(self, hw):
        return normalized_image_grid(hw, dtype=self.dtype)

    def get_camera_rays(self, hw, unit_vec=True):
        """Rays through every pixel center of an (H, W) grid.

        Returns a RayBundle with origin/dirs shaped (*cam.shape, H, W, 3)
        ((*cam.shape, 6, H, W, 3) for Cube, one grid per face).
        """
        grid = self._pixel_grid(hw)
        pix = np.broadcast_to(grid, self.shape + grid.shape)
        return self.pixel_to_ray(pix, unit_vec=unit_vec)

    def unproject_depth(self, depth, depth_is_along_ray=False):
        """Lift a depth map to 3D points on the pixel-center grid.

        Args:
            depth: (*cam.shape, H, W) map ((*cam.shape, 6, F, F) for Cube);
                z-depth or along-ray distance per the flag.

        Returns:
            (points, valid) with points shaped like depth + (3,).
        """
        depth = np.asarray(depth)
        self._check_batch(depth, self.pixel_dim - 2 + 2)
        rays = self.get_camera_rays(depth.shape[-2:], unit_vec=depth_is_along_ray)
        pts = rays.origin + depth[..., None] * rays.dirs
        return pts, rays.valid

    # -- intrinsics bookkeeping ------------------------------------------------

    def crop(self, lrtb, normalized=False, image_shape=None):
        """Camera for a crop window, keeping every retained ray unchanged.

        Args:
            lrtb: (..., 4) window (left, right, top, bottom); pixel-unit slice
                bounds by default (image[..., t:b, l:r]), or normalized window
                edges when ``normalized``.
            normalized: interpret lrtb directly in normalized coordinates.
            image_shape: (H, W), required in pixel mode.

        Returns:
            A camera of the same kind whose normalized frame spans the window.
        """
        if not self.has_affine:
            raise ValueError(f"{type(self).__name__} has no affine stage to crop")
        lrtb = np.asarray(lrtb, dtype=np.float64)
        if lrtb.shape[-1] != 4:
            raise ValueError(f"lrtb must have 4 trailing entries, got {lrtb.shape}")
        left, right, top, bottom = (lrtb[..., i] for i in range(4))
        if not normalized:
            if image_shape is None:
                raise ValueError("image_shape is required for pixel-unit crops")
            h, w = int(image_shape[0]), int(image_shape[1])
            if np.any(left < 0) or np.any(right > w) or np.any(top < 0) or np.any(bottom > h):
                raise ValueError("crop window exceeds image bounds")
            left, right = 2.0 * left / w - 1.0, 2.0 * right / w - 1.0
            top, bottom = 2.0 * top / h - 1.0, 2.0 * bottom / h - 1.0
        if np.any(right <= left) or np.any(bottom <= top):
            raise ValueError("crop window is empty")
        center = np.stack([(left + right) / 2.0, (top + bottom) / 2.0], axis=-1)
        half = np.stack([(right - left) / 2.0, (bottom - top) / 2.0], axis=-1)
        affine = self._params["affine"]
        f = affine[..., 0:2] / half
        c = (affine[..., 2:4] - center) / half
        params = dict(self._params)
        params["affine"] = np.concatenate([f, c], axis=-1)
        return type(self)(params)

    def flip(self, mode="intrinsic", axis="horizontal"):
        """Mirror the camera along an image axis.

        Intrinsic mode negates the chosen focal length and reflects the
        principal point, relabeling pixels without touching geometry (pair it
        with reversing the image along that axis).  Extrinsic mode leaves the
        camera untouched and returns a reflection matrix S to compose into the
        pose (R' = S R, T' = S T), flipping the scene instead and keeping both
        focal lengths positive.

        Returns:
            (camera, adjustment): adjustment is None in intrinsic mode, the
            (3, 3) reflection in extrinsic mode.
        """
        if axis not in ("horizontal", "vertical"):
            raise ValueError(f"unknown flip axis {axis!r}")
        i = 0 if axis == "horizontal" else 1
        if mode == "intrinsic":
            if not self.has_affine:
                raise ValueError(
                    f"{type(self).__name__} has no affine stage; use extrinsic mode"
                )
            affine = self._params["affine"].copy()
            affine[..., i] = -affine[..., i]
            affine[..., 2 + i] = -affine[..., 2 + i]
            params = dict(self._params)
            params["affine"] = affine
            return type(self)(params), None
        if mode == "extrinsic":
            reflection = np.eye(3)
            reflection[i, i] = -1.0
            return self.copy(), reflection
        raise ValueError(f"unknown flip mode {mode!r}")


class _AffineMake:
    """Shared ``make`` plumbing for affine camera kinds."""

    @classmethod
    def _build(cls, arrays):
        batch = np.broadcast_shapes(*(a.shape[:-1] for a in arrays.values()))
        params = {
            name: np.ascontiguousarray(
                np.broadcast_to(arr, batch + arr.shape[-1:])
            )
            for name, arr in arrays.items()
        }
        return cls(params)


class PinholeCamera(Camera, _AffineMake):
    """Perspective projection u' = x/z, v' = y/z."""

    kind = CameraKind.PINHOLE
    _param_dims = {"affine": 4, "z_min": 1}

    @classmethod
    def make(cls, intrinsics, z_min=Z_MIN_DEFAULT):
        return cls._build(
            {
                "affine": _affine_from_intrinsics(intrinsics),
                "z_min": _scalar_param(z_min, "z_min"),
            }
        )


class OrthographicCamera(Camera, _AffineMake):
    """Parallel projection u' = x, v' = y along rays (0, 0, 1).

    The only non-central kind: the ray through (u, v) starts at (u, v, 0).
    """

    kind = CameraKind.ORTHOGRAPHIC
    central = False
    _param_dims = {"affine": 4, "z_min": 1}

    @classmethod
    def make(cls, intrinsics, z_min=Z_MIN_DEFAULT):
        return cls._build(
            {
                "affine": _affine_from_intrinsics(intrinsics),
                "z_min": _scalar_param(z_min, "z_min"),
            }
        )


class OpenCVCamera(Camera, _AffineMake):
    """Pinhole with rational radial and tangential distortion.

    Distortion coefficients (k0..k5, p0, p1); unprojection solves the 2D
    distortion map by Newton iteration starting from the distorted point.
    """

    kind = CameraKind.OPENCV
    _param_dims = {"affine": 4, "distortion": 8, "z_min": 1}

    @classmethod
    def make(cls, intrinsics, distortion, z_min=Z_MIN_DEFAULT):
        return cls._build(
            {
                "affine": _affine_from_intrinsics(intrinsics),
                "distortion": _vector_param(distortion, 8, "distortion"),
                "z_min": _scalar_param(z_min, "z_min"),
            }
        )


class EquirectangularCamera(Camera, _AffineMake):
    """Spherical panorama: u' = arccos(-y/r) in [0, pi], v' = atan2(x, z).

    ``make(None)`` yields the full panorama whose pre-affine ranges exactly
    span the normalized image, with the azimuth seam at v' = +/-pi.
    """

    kind = CameraKind.EQUIRECTANGULAR
    uses_dist_min = True
    _param_dims = {"affine": 4, "dist_min": 1}

    @classmethod
    def make(cls, intrinsics=None, dist_min=DIST_MIN_DEFAULT):
        if intrinsics is None:
            affine = np.array([2.0 / np.pi, 1.0 / np.pi, -1.0, 0.0])
        else:
            affine = _affine_from_intrinsics(intrinsics)
        return cls._build(
            {"affine": affine, "dist_min": _scalar_param(dist_min, "dist_min")}
        )


class OpenCVFisheyeCamera(Camera, _AffineMake):
    """Equidistant-style fisheye with polynomial angle distortion.

    theta_d = theta (1 + k0 theta^2 + ... + k3 theta^8); unprojection inverts
    the angle map by Newton iteration from theta_d.
    """

    kind = CameraKind.OPENCV_FISHEYE
    uses_dist_min = True
    _param_dims = {"affine": 4, "distortion": 4, "dist_min": 1, "theta_max": 1}

    @classmethod
    def make(
        cls,
        intrinsics,
        distortion,
        dist_min=DIST_MIN_DEFAULT,
        theta_max=THETA_MAX_DEFAULT,
    ):
        return cls._build(
            {
                "affine": _affine_from_intrinsics(intrinsics),
                "distortion": _vector_param(distortion, 4, "distortion"),
                "dist_min": _scalar_param(dist_min, "dist_min"),
                "theta_max": _scalar_param(theta_max, "theta_max"),
            }
        )


class BackwardForwardPolynomialFisheyeCamera(Camera, _AffineMake):
    """Fisheye with user-supplied forward and backward angle polynomials.

    theta_d = p0 + p1 theta + ... + pN theta^N on projection and
    theta = q0 + q1 theta_d + ... + qM theta_d^M on unprojection.  The pair's
    mutual consistency is the caller's responsibility; see
    ``backward_forward_consistency`` for the measured inversion error.
    """

    kind = CameraKind.BACKWARD_FORWARD_POLY_FISHEYE
    uses_dist_min = True
    _param_dims = {
        "affine": 4,
        "forward_poly": None,
        "backward_poly": None,
        "dist_min": 1,
        "theta_max": 1,
    }

    @classmethod
    def make(
        cls,
        intrinsics,
        forward_poly,
        backward_poly,
        dist_min=DIST_MIN_DEFAULT,
        theta_max=THETA_MAX_DEFAULT,
    ):
        return cls._build(
            {
                "affine": _affine_from_intrinsics(intrinsics),
                "forward_poly": _vector_param(forward_poly, None, "forward_poly"),
                "backward_poly": _vector_param(backward_poly, None, "backward_poly"),
                "dist_min": _scalar_param(dist_min, "dist_min"),
                "theta_max": _scalar_param(theta_max, "theta_max"),
            }
        )

    def backward_forward_consistency(self, num_samples=256):
        """max |theta - q(p(theta))| over theta in [0, theta_max] per batch element."""
        t = np.linspace(0.0, 1.0, num_samples)
        theta = self._params["theta_max"] * t  # (*batch, S)
        fwd = self._params["forward_poly"][..., None, :]
        bwd = self._params["backward_poly"][..., None, :]
        theta_d = _polyval_lowfirst(fwd, theta)
        back = _polyval_lowfirst(bwd, theta_d)
        return np.max(np.abs(back - theta), axis=-1)


class Kitti360FisheyeCamera(Camera, _AffineMake):
    """Mirror-offset fisheye: x'' = x'/(z' + xi) with radial distortion.

    Points must satisfy z' + xi > 0; unprojection solves the squared-radius
    map by Newton iteration and recovers the unit direction analytically.
    """

    kind = CameraKind.KITTI360_FISHEYE
    uses_dist_min = True
    _param_dims = {
        "affine": 4,
        "distortion": 2,
        "xi": 1,
        "dist_min": 1,
        "theta_max": 1,
    }

    @classmethod
    def make(
        cls,
        intrinsics,
        distortion,
        xi,
        dist_min=DIST_MIN_DEFAULT,
        theta_max=THETA_MAX_DEFAULT,
    ):
        return cls._build(
            {
                "affine": _affine_from_intrinsics(intrinsics),
                "distortion": _vector_param(distortion, 2, "distortion"),
                "xi": _scalar_param(xi, "xi"),
                "dist_min": _scalar_param(dist_min, "dist_min"),
                "theta_max": _scalar_param(theta_max, "theta_max"),
            }
        )


class CubeCamera(Camera):
    """Omnidirectional camera whose 'pixels' live on the inf-norm unit cube.

    pixel_dim is 3 and there is no affine stage; raster grids cover the six
    faces (+x, -x, +y, -y, +z, -z), so grid quantities gain a leading face
    dim: rays are (*batch, 6, H, W, 3).  Cube cameras cannot be mixed with
    other kinds in one batch.
    """

    kind = CameraKind.CUBE
    pixel_dim = 3
    has_affine = False
    uses_dist_min = True
    _param_dims = {"dist_min": 1}

    @classmethod
    def make(cls, batch_shape=(), dist_min=DIST_MIN_DEFAULT):
        batch_shape = tuple(batch_shape)
        arr = _scalar_param(dist_min, "dist_min")
        return cls({"dist_min": np.broadcast_to(arr, batch_shape + (1,)).copy()})

    def _pixel_grid(self, hw):
        return cube_face_grid(hw, dtype=self.dtype)

    def _scale_dirs_planar(self, dirs):
        # "Planar" scaling is meaningless on the cube; the canonical scaling
        # keeps the inf-norm at 1 so depths are inf-norm distances.
        ninf = np.max(np.abs(dirs), axis=-1)
        return _safe_divide(dirs, ninf[..., None]), ninf > _TINY

    def unproject_depth(self, depth, depth_is_along_ray=False):
        depth = np.asarray(depth)
        self._check_batch(depth, 3)
        if depth.shape[len(self.shape)] != 6:
            raise ValueError(
                f"cube depth maps must be (*batch, 6, H, W), got {depth.shape}"
            )
        rays = self.get_camera_rays(depth.shape[-2:], unit_vec=depth_is_along_ray)
        pts = rays.origin + depth[..., None] * rays.dirs
        return pts, rays.valid


#: Face order and in-face axes of the cubemap layout: face k covers the cube
#: side where coordinate ``axis`` equals ``sign``; the in-face (u, v) read the
#: two remaining coordinates in ascending axis order.
CUBE_FACES = (
    (0, 1.0),  # +x
    (0, -1.0),  # -x
    (1, 1.0),  # +y
    (1, -1.0),  # -y
    (2, 1.0),  # +z
    (2, -1.0),  # -z
)


def cube_face_grid(hw, dtype=np.float64):
    """Cube points at the pixel centers of six (H, W) face rasters.

    Returns:
        (6, H, W, 3) points on the inf-norm unit cube, face order per
        CUBE_FACES.
    """
    uv = normalized_image_grid(hw, dtype=dtype)
    h, w = uv.shape[0], uv.shape[1]
    grid = np.empty((6, h, w, 3), dtype=dtype)
    for face, (axis, sign) in enumerate(CUBE_FACES):
        others = [a for a in range(3) if a != axis]
        grid[face, ..., axis] = sign
        grid[face, ..., others[0]] = uv[..., 0]
        grid[face, ..., others[1]] = uv[..., 1]
    return grid


_CAMERA_CLASSES = {
    CameraKind.PINHOLE: PinholeCamera,
    CameraKind.ORTHOGRAPHIC: OrthographicCamera,
    CameraKind.OPENCV: OpenCVCamera,
    CameraKind.EQUIRECTANGULAR: EquirectangularCamera,
    CameraKind.OPENCV_FISHEYE: OpenCVFisheyeCamera,
    CameraKind.BACKWARD_FORWARD_POLY_FISHEYE: BackwardForwardPolynomialFisheyeCamera,
    CameraKind.KITTI360_FISHEYE: Kitti360FisheyeCamera,
    CameraKind.CUBE: CubeCamera,
}


def camera_class_for(kind):
    """The Camera subclass implementing a CameraKind."""
    return _CAMERA_CLASSES[kind]


def make_camera(kind, **params):
    """Build a camera of the given kind; forwards to the class's make()."""
    return _CAMERA_CLASSES[kind].make(**params)


# ---------------------------------------------------------------------------
# Stacking and heterogeneous batches.
# ---------------------------------------------------------------------------


def stack_cameras(cams, dim=0):
    """Stack cameras along a new batch dim.

    Same-kind cameras yield a homogeneous camera of that kind; mixed kinds
    yield a HeterogeneousCamera (dim 0 only).  Cube cameras cannot be mixed
    with other kinds.

    Args:
        cams: nonempty list of cameras with equal batch shapes.
        dim: position of the new batch dim.
    """
    if not cams:
        raise ValueError("cannot stack an empty camera list")
    base_shape = cams[0].shape
    for cam in cams:
        if cam.shape != base_shape:
            raise ValueError(
                f"camera batch shapes disagree: {cam.shape} vs {base_shape}"
            )
    kinds = {type(c) for c in cams}
    if len(kinds) == 1:
        cls = type(cams[0])
        axis = dim % (len(base_shape) + 1)
        params = {}
        for name in cams[0]._params:
            arrs = [c._params[name] for c in cams]
            widths = {a.shape[-1] for a in arrs}
            if len(widths) != 1:
                raise ValueError(
                    f"parameter {name} lengths disagree across cameras: {widths}"
                )
            params[name] = np.stack(arrs, axis=axis)
        return cls(params)
    if any(isinstance(c, CubeCamera) for c in cams):
        raise ValueError("Cube cameras cannot be stacked with other kinds")
    if dim % (len(base_shape) + 1) != 0:
        raise ValueError("mixed-kind cameras can only be stacked along dim 0")
    members = []
    order = []
    for i, cam in enumerate(cams):
        cls = type(cam)
        if cls not in order:
            order.append(cls)
    for cls in order:
        idx = np.array([i for i, c in enumerate(cams) if type(c) is cls])
        sub = stack_cameras([cams[i] for i in idx], dim=0)
        members.append((sub, idx))
    return HeterogeneousCamera(members)


class HeterogeneousCamera:
    """A stack of cameras of differing kinds along the leading batch dim.

    Stores one homogeneous sub-camera per kind plus the indices it occupies;
    projection and ray queries gather inputs per member, run the member's
    implementation, and scatter results back in input order.  Slicing down to
    a single kind devolves to that kind's homogeneous Camera.
    """

    pixel_dim = 2

    def __init__(self, members):
        if not members:
            raise ValueError("heterogeneous camera needs at least one member")
        counted = 0
        inner = None
        seen = []
        for cam, idx in members:
            if isinstance(cam, CubeCamera):
                raise ValueError("Cube cameras cannot join heterogeneous batches")
            if inner is None:
                inner = cam.shape[1:]
            elif cam.shape[1:] != inner:
                raise ValueError("member inner batch shapes disagree")
            if len(idx) != cam.shape[0]:
                raise ValueError("member index set does not match its batch dim")
            counted += len(idx)
            seen.extend(idx.tolist())
        if sorted(seen) != list(range(counted)):
            raise ValueError("member index sets must partition the batch")
        self._members = [(cam, np.asarray(idx)) for cam, idx in members]
        self._n = counted
        self._inner = inner

    @property
    def shape(self):
        return (self._n,) + self._inner

    @property
    def dtype(self):
        return self._members[0][0].dtype

    def __repr__(self):
        kinds = [type(c).__name__ for c, _ in self._members]
        return f"HeterogeneousCamera(shape={self.shape}, members={kinds})"

    def is_central(self):
        """Aggregate AND over members (see also is_central_per_element)."""
        return all(cam.is_central() for cam, _ in self._members)

    def is_central_per_element(self):
        """(N,) centrality flags along the stacked dim."""
        out = np.empty(self._n, dtype=bool)
        for cam, idx in self._members:
            out[idx] = cam.is_central()
        return out

    def _element(self, i):
        i = int(i)
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(f"index {i} out of range for {self._n} cameras")
        for cam, idx in self._members:
            where = np.nonzero(idx == i)[0]
            if where.size:
                return cam[int(where[0])]
        raise IndexError(i)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return self._element(idx)
        positions = np.arange(self._n)[idx]
        if positions.ndim != 1:
            raise IndexError("heterogeneous cameras support 1-d indexing only")
        return stack_cameras([self._element(p) for p in positions], dim=0)

    def _scatter(self, fn, arr, event_dims, n_outputs):
        """Run ``fn(member_cam, member_slice)`` per member and reassemble."""
        arr = np.asarray(arr)
        if arr.shape[: len(self.shape)] != self.shape:
            raise ValueError(
                f"array shape {arr.shape} does not start with camera batch "
                f"shape {self.shape}"
            )
        outs = None
        for cam, idx in self._members:
            parts = fn(cam, arr[idx])
            if outs is None:
                outs = []
                for part in parts:
                    full = np.empty(arr.shape[:1] + part.shape[1:], dtype=part.dtype)
                    outs.append(full)
            for full, part in zip(outs, parts):
                full[idx] = part
        return tuple(outs)

    def project_to_pixel(self, pts, depth_is_along_ray=False):
        pix, depth, valid = self._scatter(
            lambda cam, p: cam.project_to_pixel(p, depth_is_along_ray),
            pts,
            1,
            3,
        )
        return ProjectionResult(pix, depth, valid)

    def pixel_to_ray(self, pix, unit_vec=True):
        origin, dirs, valid = self._scatter(
            lambda cam, p: cam.pixel_to_ray(p, unit_vec=unit_vec), pix, 1, 3
        )
        return RayBundle(origin, dirs, valid)

    def get_camera_rays(self, hw, unit_vec=True):
        grid = normalized_image_grid(hw, dtype=self.dtype)
        pix = np.broadcast_to(grid, self.shape + grid.shape)
        return self.pixel_to_ray(pix, unit_vec=unit_vec)

    def unproject_depth(self, depth, depth_is_along_ray=False):
        depth = np.asarray(depth)
        rays = self.get_camera_rays(depth.shape[-2:], unit_vec=depth_is_along_ray)
        pts = rays.origin + depth[..., None] * rays.dirs
        return pts, rays.valid
