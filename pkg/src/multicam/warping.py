"""Backward warping and the algorithms built on it.

The core operation traces target pixels into a source view,

    E(u, d) = p_src(R (phi1_trg(u) + d * phi2_trg(u)) + T),

where (R, T) maps target-camera coordinates to source-camera coordinates and
d is a depth (or along-ray distance) hypothesis.  Everything else here is a
composition of that map with sampling: cost-volume sweeps stack it over
sources and hypotheses, cross-model resampling runs it with unit distance and
a pure rotation, stereo rectification picks the rotations, and consistency
masking runs it forward and backward to vote on depth agreement.

Invalid pixels (off-sensor, behind the camera, out of sampling range) are
carried through as boolean masks; no operation raises on them.

Set the ``MULTICAM_THREADS`` environment variable above 1 to run genuinely
per-source work (the per-view consistency checks during fusion) in a thread
pool; results are reduced in a fixed order either way, so outputs do not
depend on the thread count.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from .cameras import CubeCamera
from .ndbatch import Pose, normalized_image_grid
from .sampling import samples_from_cubemap, samples_from_image

__all__ = [
    "WarpResult",
    "relative_pose",
    "backward_warp_pts",
    "backward_warp",
    "sweep_hypotheses",
    "resample_by_intrinsics",
    "stereo_rectify",
    "consistency_mask",
    "fuse_depths_mvsnet",
    "random_resized_crop_flip",
]

_TINY = 1e-12


class WarpResult(NamedTuple):
    """Output of a hypothesis-expanded backward warp.

    Attributes:
        warped: (*batch, D, C, *grid) source image sampled at the warped
            coordinates, one slice per hypothesis (grid is (H, W), or
            (6, F, F) for cube targets).
        src_pix: (*batch, D, *grid, pd) source sensor coordinates.
        src_depth: (*batch, D, *grid) depth of the hypothesized point in the
            source camera.
        valid: (*batch, D, *grid) conjunction of target-ray validity, source
            projection validity, and in-bounds sampling.
    """

    warped: np.ndarray
    src_pix: np.ndarray
    src_depth: np.ndarray
    valid: np.ndarray


def _thread_count():
    try:
        return max(1, int(os.environ.get("MULTICAM_THREADS", "1")))
    except ValueError:
        return 1


def _map_per_source(fn, items):
    """Apply fn over items, threaded when MULTICAM_THREADS > 1, order kept."""
    n = _thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def relative_pose(trg, src):
    """The pose mapping target-camera coordinates into the source camera.

    Both arguments are world-to-camera extrinsics; the result satisfies
    x_src = R x_trg + T with R = R_src R_trg^T and T = T_src - R T_trg.
    """
    return src.compose(trg.inverse())


def backward_warp_pts(trg_cam, src_cam, rel, u, d, depth_is_along_ray=False):
    """Trace target pixels at given depths into the source sensor.

    Args:
        trg_cam: target camera, batch (*batch).
        src_cam: source camera, same batch.
        rel: Pose mapping target to source camera coordinates, same batch.
        u: (*batch, *group, pd) target sensor coordinates.
        d: depths, broadcastable against (*batch, *group); interpreted per
            ``depth_is_along_ray``.
        depth_is_along_ray: hypothesize along-ray distances instead of
            z-depths (inf-norm distances for cube targets).

    Returns:
        (src_pix, src_depth, valid): source coordinates (*batch, *group, pd'),
        source depths (*batch, *group) under the same semantic, and combined
        validity.
    """
    u = np.asarray(u)
    rays = trg_cam.pixel_to_ray(u, unit_vec=depth_is_along_ray)
    d = np.broadcast_to(np.asarray(d, dtype=rays.dirs.dtype), u.shape[:-1])
    pts = rays.origin + d[..., None] * rays.dirs
    pts_src = rel.transform(pts)
    proj = src_cam.project_to_pixel(pts_src, depth_is_along_ray=depth_is_along_ray)
    return proj.pix, proj.depth, rays.valid & proj.valid


def _expand_hypotheses(d, batch, grid):
    """Normalize hypothesis arrays to (*batch, D, *ones-or-grid).

    Accepts scalars (a single constant hypothesis), per-hypothesis constants
    (*batch, D), and per-pixel values (*batch, D, *grid).
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim == 0:
        d = d.reshape((1,) * (len(batch) + 1))
        return np.broadcast_to(d, batch + (1,) + (1,) * len(grid))
    if d.shape[: len(batch)] != batch:
        raise ValueError(
            f"hypotheses {d.shape} do not start with camera batch {batch}"
        )
    rest = d.shape[len(batch) :]
    if len(rest) == 1:
        return d.reshape(batch + rest + (1,) * len(grid))
    if len(rest) == 1 + len(grid) and rest[1:] == grid:
        return d
    raise ValueError(
        f"hypotheses {d.shape} must be (*batch, D) or (*batch, D, *{grid})"
    )


def _sample_source(src_cam, src_img, src_pix, valid, mode, padding):
    """Sample a source image (flat or cubemap) at warped coordinates."""
    if isinstance(src_cam, CubeCamera):
        # Cube sensor coordinates are 3D cube points; reads come from a
        # cubemap and never leave it.  Zero vectors only occur on already
        # invalid pixels, so substitute a safe direction there.
        safe = np.where(valid[..., None], src_pix, np.array([0.0, 0.0, 1.0]))
        vals = samples_from_cubemap(src_img, safe, mode=mode)
        return vals, np.ones(valid.shape, dtype=bool)
    return samples_from_image(src_img, src_pix, mode=mode, padding=padding)


def backward_warp(
    trg_cam,
    src_cam,
    rel,
    src_img,
    d,
    depth_is_along_ray=False,
    hw=None,
    mode="bilinear",
    padding="zeros",
):
    """Warp a source image into the target view at depth hypotheses.

    Args:
        trg_cam: target camera, batch (*batch).
        src_cam: source camera, same batch.
        rel: Pose mapping target to source coordinates, same batch.
        src_img: (*batch, C, H, W) source image ((*batch, C, 6, F, F) cubemap
            when the source camera is a CubeCamera).
        d: depth hypotheses: scalar, (*batch, D) constants, or per-pixel
            (*batch, D, *grid) where grid is the target raster.
        depth_is_along_ray: hypothesis semantic, see backward_warp_pts.
        hw: (H, W) target raster; defaults to the source image's.
        mode: interpolation mode for sampling.
        padding: padding for sampling flat images.

    Returns:
        WarpResult; every hypothesis is warped in one vectorized pass.
    """
    src_img = np.asarray(src_img)
    if hw is None:
        hw = src_img.shape[-2:]
    rays = trg_cam.get_camera_rays(hw, unit_vec=depth_is_along_ray)
    batch = trg_cam.shape
    grid = rays.dirs.shape[len(batch) : -1]
    d = _expand_hypotheses(d, batch, grid)

    origin = np.expand_dims(rays.origin, len(batch))
    dirs = np.expand_dims(rays.dirs, len(batch))
    pts = origin + d[..., None] * dirs
    pts_src = rel.transform(pts)
    proj = src_cam.project_to_pixel(pts_src, depth_is_along_ray=depth_is_along_ray)
    valid = np.expand_dims(rays.valid, len(batch)) & proj.valid

    vals, in_bounds = _sample_source(src_cam, src_img, proj.pix, valid, mode, padding)
    valid = valid & in_bounds
    warped = np.moveaxis(vals, len(batch), len(batch) + 1)
    return WarpResult(warped, proj.pix, proj.depth, valid)


def _stack_poses(rels, batch):
    R = np.stack([np.broadcast_to(p.R, batch + (3, 3)) for p in rels])
    T = np.stack([np.broadcast_to(p.T, batch + (3,)) for p in rels])
    return Pose(R, T)


def sweep_hypotheses(
    trg_cam,
    src_cams,
    rels,
    src_imgs,
    d,
    depth_is_along_ray=False,
    hw=None,
    mode="bilinear",
    padding="zeros",
):
    """Build a cost-volume stack by warping every source at every hypothesis.

    The S sources are stacked into one leading batch dim (mixed camera models
    are supported through heterogeneous stacking) and warped in a single
    batched call rather than a per-source loop.

    Args:
        trg_cam: target camera, batch (*batch).
        src_cams: S source cameras, each batch (*batch).
        rels: S poses mapping target to each source.
        src_imgs: S source images, each (*batch, C, H, W), equal shapes.
        d: hypotheses, shared across sources: scalar, (*batch, D), or
            (*batch, D, H, W).
        depth_is_along_ray / hw / mode / padding: as in backward_warp.

    Returns:
        WarpResult with warped (*batch, S, D, C, H, W) and matching src_pix,
        src_depth, valid carrying the (S, D) axes after the batch.
    """
    from .cameras import stack_cameras  # local import to avoid cycle at load

    if not (len(src_cams) == len(rels) == len(src_imgs)) or not src_cams:
        raise ValueError(
            f"source lists must have equal nonzero lengths, got "
            f"{len(src_cams)}, {len(rels)}, {len(src_imgs)}"
        )
    s = len(src_cams)
    batch = trg_cam.shape
    src_stack = stack_cameras(list(src_cams), dim=0)
    rel_stack = _stack_poses(rels, batch)
    img_stack = np.stack([np.asarray(im) for im in src_imgs])
    trg_stack = trg_cam.unsqueeze(0).expand((s,) + batch)

    d = np.asarray(d, dtype=np.float64)
    if d.ndim > 0 and d.shape[: len(batch)] == batch:
        d = np.broadcast_to(d, (s,) + d.shape)

    res = backward_warp(
        trg_stack,
        src_stack,
        rel_stack,
        img_stack,
        d,
        depth_is_along_ray=depth_is_along_ray,
        hw=hw,
        mode=mode,
        padding=padding,
    )
    pos = len(batch)
    return WarpResult(*(np.moveaxis(arr, 0, pos) for arr in res))


def resample_by_intrinsics(
    src_cam, trg_cam, rot, src_img, trg_hw, mode="bilinear", padding="zeros"
):
    """Re-render a central camera's image through another camera model.

    With both cameras central the scene geometry is irrelevant: every source
    ray maps to a target ray by the rotation alone, realized as a backward
    warp with a constant unit distance map.  Converts between any central
    models (panorama to cubemap, fisheye to pinhole, ...).

    Args:
        src_cam: central source camera, batch (*batch).
        trg_cam: central target camera, same batch.
        rot: (*batch, 3, 3) rotation mapping target dirs into the source
            frame.
        src_img: (*batch, C, H, W) source image (cubemap for cube sources).
        trg_hw: (H, W) target raster (face size for cube targets).

    Returns:
        (image, valid): the target-view image (*batch, C, H, W) (cubemap for
        cube targets) and its per-pixel validity.

    Raises:
        ValueError: if either camera is not central.
    """
    if not src_cam.is_central() or not trg_cam.is_central():
        raise ValueError("resample_by_intrinsics requires central cameras")
    rot = np.broadcast_to(np.asarray(rot, dtype=np.float64), src_cam.shape + (3, 3))
    rel = Pose(rot, np.zeros(src_cam.shape + (3,)))
    res = backward_warp(
        trg_cam,
        src_cam,
        rel,
        src_img,
        np.ones(src_cam.shape + (1,)),
        depth_is_along_ray=True,
        hw=trg_hw,
        mode=mode,
        padding=padding,
    )
    nb = len(src_cam.shape)
    image = np.squeeze(res.warped, axis=nb)  # drop the singleton hypothesis
    valid = np.squeeze(res.valid, axis=nb)
    return image, valid


def _rectified_world_axes(pose0, pose1, mode):
    """The shared rectified orientation (columns = camera axes in world).

    The baseline becomes the x axis (side_by_side) or y axis (on_top); the
    z axis is the mean viewing direction made orthogonal to the baseline, and
    the remaining axis completes a right-handed frame.
    """
    c0 = -pose0.R.T @ pose0.T
    c1 = -pose1.R.T @ pose1.T
    baseline = c1 - c0
    norm = np.linalg.norm(baseline)
    if norm < _TINY:
        raise ValueError("stereo rectification needs a nonzero baseline")
    b = baseline / norm

    z_sum = pose0.R[2] + pose1.R[2]  # camera z axes in world coordinates
    z_perp = z_sum - (z_sum @ b) * b
    z_norm = np.linalg.norm(z_perp)
    if z_norm < 1e-9:
        warnings.warn(
            "viewing directions are parallel to the baseline; rectified "
            "orientation is arbitrary around it",
            RuntimeWarning,
        )
        seed = np.array([0.0, 0.0, 1.0])
        if abs(b @ seed) > 0.9:
            seed = np.array([1.0, 0.0, 0.0])
        z_perp = seed - (seed @ b) * b
        z_norm = np.linalg.norm(z_perp)
    r2 = z_perp / z_norm

    if mode == "side_by_side":
        r0 = b
        r1 = np.cross(r2, r0)
        return np.stack([r0, r1, r2], axis=-1)
    if mode == "on_top":
        r1 = b
        r0 = np.cross(r1, r2)
        return np.stack([r0, r1, r2], axis=-1)
    raise ValueError(f"mode must be 'side_by_side' or 'on_top', got {mode!r}")


def stereo_rectify(cam0, pose0, cam1, pose1, mode, img0, img1):
    """Rotate two central views onto a shared frame aligned with the baseline.

    After rectification the only relative motion between the views is a pure
    translation along the x axis (side_by_side) or y axis (on_top), so
    corresponding points share the other sensor coordinate; the shared
    orientation stays close to the originals (mean viewing direction).

    Args:
        cam0, cam1: central cameras (unbatched).
        pose0, pose1: world-to-camera extrinsics.
        mode: "side_by_side" or "on_top".
        img0, img1: (C, H, W) images for the two views.

    Returns:
        (rot0, rot1, rect0, rect1): the per-view resampling rotations (new
        camera orientation relative to the old) and the resampled images,
        each at its input resolution.
    """
    img0 = np.asarray(img0)
    img1 = np.asarray(img1)
    r_hat = _rectified_world_axes(pose0, pose1, mode)
    rot0 = pose0.R @ r_hat
    rot1 = pose1.R @ r_hat
    rect0, _ = resample_by_intrinsics(cam0, cam0, rot0, img0, img0.shape[-2:])
    rect1, _ = resample_by_intrinsics(cam1, cam1, rot1, img1, img1.shape[-2:])
    return rot0, rot1, rect0, rect1


def _lookup_depth(depth_map, coords, rel_jump_limit):
    """Bilinear depth lookup that refuses to interpolate across jumps.

    Args:
        depth_map: (*batch, H, W) positive depths.
        coords: (*batch, *group, 2) normalized lookup coordinates.
        rel_jump_limit: maximum allowed (max-min)/min among the four
            neighbors; beyond it the lookup is invalid (occlusion edge).

    Returns:
        (depth, ok) with shapes (*batch, *group).
    """
    depth_map = np.asarray(depth_map)
    batch = depth_map.shape[:-2]
    img = depth_map[..., None, :, :]  # one channel
    value, in_bounds = samples_from_image(img, coords, padding="border")
    value = np.squeeze(value, axis=len(batch))

    corners = []
    h, w = depth_map.shape[-2:]
    px = (coords[..., 0] + 1.0) * (w / 2.0) - 0.5
    py = (coords[..., 1] + 1.0) * (h / 2.0) - 0.5
    x0 = np.clip(np.floor(px).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(py).astype(np.int64), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    flat = depth_map.reshape((-1,) + depth_map.shape[-2:])
    nb = flat.shape[0]
    b_idx = np.arange(nb).reshape((nb,) + (1,) * (coords.ndim - len(batch) - 1))
    for cy, cx in ((y0, x0), (y0, x1), (y1, x0), (y1, x1)):
        corners.append(
            flat[b_idx, cy.reshape((nb,) + cy.shape[len(batch) :]),
                 cx.reshape((nb,) + cx.shape[len(batch) :])]
        )
    stack = np.stack(corners)
    lo = stack.min(axis=0)
    hi = stack.max(axis=0)
    jump = (hi - lo) / np.maximum(lo, _TINY)
    ok = in_bounds & (jump <= rel_jump_limit).reshape(in_bounds.shape)
    return value, ok


def default_spatial_threshold(hw):
    """One pixel at resolution (H, W), in normalized units."""
    return 2.0 / max(int(hw[0]), int(hw[1]))


def consistency_mask(
    trg_cam,
    src_cam,
    rel,
    d_trg,
    d_src,
    tau1=None,
    tau2=0.01,
    depth_is_along_ray=False,
):
    """Flag target pixels whose depth agrees with a source depth map.

    Each target pixel is warped into the source with its own depth, the
    source depth is read there (bilinearly, refusing occlusion edges), and
    the source pixel is warped back.  The pixel is consistent when it lands
    within ``tau1`` (normalized units) of where it started and the
    reprojected depth is within relative ``tau2`` of the original.

    Args:
        trg_cam, src_cam: cameras with batch (*batch).
        rel: Pose mapping target to source coordinates.
        d_trg: (*batch, H, W) target depth map.
        d_src: (*batch, H', W') source depth map.
        tau1: spatial threshold in normalized units; defaults to one pixel at
            the target resolution.
        tau2: relative depth threshold.
        depth_is_along_ray: semantic of both depth maps.

    Returns:
        (mask, reprojected): (*batch, H, W) boolean consistency and the
        depth of the source's surface seen from the target (meaningful where
        the warps were valid).
    """
    d_trg = np.asarray(d_trg, dtype=np.float64)
    d_src = np.asarray(d_src, dtype=np.float64)
    hw = d_trg.shape[-2:]
    if tau1 is None:
        tau1 = default_spatial_threshold(hw)
    batch = trg_cam.shape
    grid = normalized_image_grid(hw)
    u = np.broadcast_to(grid, batch + grid.shape)

    v, _, valid_fwd = backward_warp_pts(
        trg_cam, src_cam, rel, u, d_trg, depth_is_along_ray=depth_is_along_ray
    )
    src_depth, depth_ok = _lookup_depth(d_src, v, 10.0 * tau2)
    u_back, d_back, valid_bwd = backward_warp_pts(
        src_cam,
        trg_cam,
        rel.inverse(),
        v,
        src_depth,
        depth_is_along_ray=depth_is_along_ray,
    )

    spatial = np.linalg.norm(u_back - u, axis=-1) < tau1
    relative = np.abs(d_back - d_trg) < tau2 * np.maximum(d_trg, _TINY)
    mask = (
        valid_fwd
        & depth_ok
        & valid_bwd
        & (d_trg > 0)
        & (src_depth > 0)
        & spatial
        & relative
    )
    return mask, d_back


def fuse_depths_mvsnet(
    trg_cam,
    src_cams,
    rels,
    d_trg,
    d_srcs,
    tau1=None,
    tau2=0.01,
    min_views=2,
    depth_is_along_ray=False,
):
    """Average the target depth with source depths that agree with it.

    Every source contributes its reprojected depth wherever consistency_mask
    accepts it; the target's own depth participates as one more vote.  The
    per-source checks are independent and run through the thread helper; the
    final sum is accumulated in source order, so results are deterministic.

    Args:
        trg_cam: target camera.
        src_cams: S source cameras.
        rels: S poses (target to source).
        d_trg: (*batch, H, W) target depth map (0 marks missing).
        d_srcs: S source depth maps.
        tau1, tau2, depth_is_along_ray: see consistency_mask.
        min_views: votes (target included) required to keep a pixel.

    Returns:
        (fused, votes): fused (*batch, H, W) depths, zeroed where votes fall
        below ``min_views``, and the (*batch, H, W) integer vote counts.
    """
    if not src_cams or not (len(src_cams) == len(rels) == len(d_srcs)):
        raise ValueError("need equal-length, nonempty source lists")
    d_trg = np.asarray(d_trg, dtype=np.float64)

    def one(args):
        cam, rel, dsrc = args
        return consistency_mask(
            trg_cam,
            cam,
            rel,
            d_trg,
            dsrc,
            tau1=tau1,
            tau2=tau2,
            depth_is_along_ray=depth_is_along_ray,
        )

    results = _map_per_source(one, list(zip(src_cams, rels, d_srcs)))

    base = d_trg > 0
    votes = base.astype(np.int64)
    total = np.where(base, d_trg, 0.0)
    for mask, reprojected in results:
        votes = votes + mask
        total = total + np.where(mask, reprojected, 0.0)
    fused = total / np.maximum(votes, 1)
    keep = votes >= min_views
    return np.where(keep, fused, 0.0), votes


def random_resized_crop_flip(cams, images, window, flip=(False, False), seed=0):
    """Sample one crop window and flip decision and apply them to all frames.

    The crop is drawn uniformly over pixel-aligned windows that contain
    ``window`` (so passing the full image forces the identity crop); each
    axis listed in ``flip`` is mirrored with probability one half.  All
    frames of the sequence share the same draw, and cameras are updated with
    ``Camera.crop``/``Camera.flip`` so the cropped cameras still emit exactly
    the rays of the retained pixels.

    Args:
        cams: list of affine cameras, one per frame.
        images: list of (..., C, H, W) images, one per frame, equal sizes.
        window: (left, right, top, bottom) pixel bounds that must survive the
            crop.
        flip: (horizontal, vertical) flags enabling a random flip per axis.
        seed: RNG seed; equal seeds give equal outputs.

    Returns:
        (cams, images): transformed copies, same list lengths.
    """
    if len(cams) != len(images) or not cams:
        raise ValueError("need equal-length, nonempty camera and image lists")
    images = [np.asarray(im) for im in images]
    h, w = images[0].shape[-2:]
    for im in images:
        if im.shape[-2:] != (h, w):
            raise ValueError("all frames must share one image size")
    left, right, top, bottom = (int(v) for v in window)
    if not (0 <= left < right <= w and 0 <= top < bottom <= h):
        raise ValueError(f"window {window} does not fit a {(h, w)} image")

    rng = np.random.default_rng(seed)
    l = int(rng.integers(0, left + 1))
    t = int(rng.integers(0, top + 1))
    r = int(rng.integers(right, w + 1))
    b = int(rng.integers(bottom, h + 1))
    flip_h = bool(flip[0]) and rng.random() < 0.5
    flip_v = bool(flip[1]) and rng.random() < 0.5

    out_cams = []
    out_imgs = []
    for cam, img in zip(cams, images):
        new_cam = cam.crop((l, r, t, b), image_shape=(h, w))
        new_img = img[..., t:b, l:r]
        if flip_h:
            new_cam, _ = new_cam.flip("intrinsic", "horizontal")
            new_img = new_img[..., ::-1]
        if flip_v:
            new_cam, _ = new_cam.flip("intrinsic", "vertical")
            new_img = new_img[..., ::-1, :]
        out_cams.append(new_cam)
        out_imgs.append(np.ascontiguousarray(new_img))
    return out_cams, out_imgs
