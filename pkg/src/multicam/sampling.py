"""Interpolated reads of images and cubemaps at normalized coordinates.

Images are channels-first, ``(*batch_shape, C, H, W)``; sample coordinates are
normalized per axis (see ndbatch): the continuous pixel index of a normalized
coordinate n is ``(n + 1) * size / 2 - 0.5``, so n = (-1, -1) is the top-left
corner and pixel centers sit at integer indices.  Sampling at every pixel
center reproduces the stored values (bit-for-bit in nearest mode).

Cubemaps are ``(*batch_shape, C, 6, F, F)`` with square faces ordered
(+x, -x, +y, -y, +z, -z); a direction selects the face of its dominant axis
and the in-face axes read the two remaining coordinates in ascending axis
order (the same layout ``cameras.cube_face_grid`` emits).
"""

from __future__ import annotations

import numpy as np

from .cameras import CUBE_FACES

__all__ = ["samples_from_image", "samples_from_cubemap"]

_MODES = ("bilinear", "nearest")
_PADDINGS = ("zeros", "border")


def _flatten_leading(arr, keep):
    """Collapse all but the trailing ``keep`` dims into one."""
    lead = arr.shape[: arr.ndim - keep]
    return arr.reshape((-1,) + arr.shape[arr.ndim - keep :]), lead


def _gather_corners(img_hwc, b_idx, ix, iy, weights, padding):
    """Accumulate weighted corner reads of (Nb, H, W, C) images.

    Args:
        img_hwc: (Nb, H, W, C) image data.
        b_idx: (Nb, 1) batch gather index.
        ix, iy: lists of (Nb, Ng) integer corner coordinates.
        weights: matching list of (Nb, Ng) interpolation weights.
        padding: "zeros" or "border".

    Returns:
        (Nb, Ng, C) accumulated values.
    """
    h, w = img_hwc.shape[1], img_hwc.shape[2]
    out = None
    for cx, cy, cw in zip(ix, iy, weights):
        inside = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        gx = np.clip(cx, 0, w - 1)
        gy = np.clip(cy, 0, h - 1)
        vals = img_hwc[b_idx, gy, gx]
        if padding == "zeros":
            cw = cw * inside
        out = vals * cw[..., None] if out is None else out + vals * cw[..., None]
    return out


def _corner_lists(px, py, mode):
    """Corner indices and weights for one interpolation mode."""
    if mode == "nearest":
        return [np.rint(px).astype(np.int64)], [np.rint(py).astype(np.int64)], [
            np.ones_like(px)
        ]
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = px - x0
    fy = py - y0
    ix = [x0, x0 + 1, x0, x0 + 1]
    iy = [y0, y0, y0 + 1, y0 + 1]
    weights = [
        (1.0 - fx) * (1.0 - fy),
        fx * (1.0 - fy),
        (1.0 - fx) * fy,
        fx * fy,
    ]
    return ix, iy, weights


def _check_request(mode, padding):
    if mode not in _MODES:
        raise ValueError(f"interp mode must be one of {_MODES}, got {mode!r}")
    if padding not in _PADDINGS:
        raise ValueError(f"padding must be one of {_PADDINGS}, got {padding!r}")


def samples_from_image(img, coords, mode="bilinear", padding="zeros"):
    """Sample an image at normalized coordinates.

    Args:
        img: (*batch_shape, C, H, W) image values.
        coords: (*batch_shape, *group_shape, 2) normalized (x, y) coordinates.
        mode: "bilinear" or "nearest".
        padding: "zeros" fills reads past the border with 0, "border" clamps
            to the edge pixel.

    Returns:
        (values, in_bounds): (*batch_shape, C, *group_shape) samples and
        (*batch_shape, *group_shape) flags, False where a coordinate leaves
        the [-1, 1] square (values there follow the padding rule).
    """
    _check_request(mode, padding)
    img = np.asarray(img)
    coords = np.asarray(coords)
    if img.ndim < 3:
        raise ValueError(f"images must be (*batch, C, H, W), got {img.shape}")
    batch = img.shape[:-3]
    c, h, w = img.shape[-3:]
    if coords.shape[-1] != 2 or coords.shape[: len(batch)] != batch:
        raise ValueError(
            f"coords {coords.shape} do not match image batch {batch} + (..., 2)"
        )
    group = coords.shape[len(batch) : -1]

    img_flat, _ = _flatten_leading(img, 3)
    nb = img_flat.shape[0]
    coords_flat = coords.reshape(nb, -1, 2)
    img_hwc = np.moveaxis(img_flat, 1, -1)
    b_idx = np.arange(nb)[:, None]

    px = (coords_flat[..., 0] + 1.0) * (w / 2.0) - 0.5
    py = (coords_flat[..., 1] + 1.0) * (h / 2.0) - 0.5
    ix, iy, weights = _corner_lists(px, py, mode)
    vals = _gather_corners(img_hwc, b_idx, ix, iy, weights, padding)

    in_bounds = np.all(np.abs(coords_flat) <= 1.0, axis=-1)
    vals = np.moveaxis(vals.reshape(batch + group + (c,)), -1, len(batch))
    return vals, in_bounds.reshape(batch + group)


def samples_from_cubemap(cm, dirs, mode="bilinear"):
    """Sample a cubemap along direction vectors.

    Each direction is scaled onto the inf-norm unit cube, the face of its
    dominant axis is selected, and the in-face point is interpolated with
    border clamping (faces tile the sphere, so there is no out-of-bounds).

    Args:
        cm: (*batch_shape, C, 6, F, F) cubemap, faces (+x, -x, +y, -y, +z, -z).
        dirs: (*batch_shape, *group_shape, 3) nonzero directions.
        mode: "bilinear" or "nearest".

    Returns:
        (*batch_shape, C, *group_shape) sampled values.

    Raises:
        ValueError: if any direction is exactly zero.
    """
    _check_request(mode, "border")
    cm = np.asarray(cm)
    dirs = np.asarray(dirs)
    if cm.ndim < 4 or cm.shape[-3] != 6 or cm.shape[-2] != cm.shape[-1]:
        raise ValueError(f"cubemaps must be (*batch, C, 6, F, F), got {cm.shape}")
    batch = cm.shape[:-4]
    c, f = cm.shape[-4], cm.shape[-1]
    if dirs.shape[-1] != 3 or dirs.shape[: len(batch)] != batch:
        raise ValueError(
            f"dirs {dirs.shape} do not match cubemap batch {batch} + (..., 3)"
        )
    group = dirs.shape[len(batch) : -1]

    cm_flat, _ = _flatten_leading(cm, 4)
    nb = cm_flat.shape[0]
    dirs_flat = dirs.reshape(nb, -1, 3)
    ninf = np.max(np.abs(dirs_flat), axis=-1)
    if np.any(ninf == 0.0):
        raise ValueError("cubemap sampling directions must be nonzero")
    cube = dirs_flat / ninf[..., None]

    axis = np.argmax(np.abs(dirs_flat), axis=-1)
    sign = np.take_along_axis(cube, axis[..., None], axis=-1)[..., 0]
    face = axis * 2 + (sign < 0)

    # In-face coordinates: the two non-dominant axes in ascending order, the
    # layout CUBE_FACES / cube_face_grid define.
    others = np.array([[a for a in range(3) if a != ax] for ax, _ in CUBE_FACES[::2]])
    u_axis = others[axis, 0]
    v_axis = others[axis, 1]
    u = np.take_along_axis(cube, u_axis[..., None], axis=-1)[..., 0]
    v = np.take_along_axis(cube, v_axis[..., None], axis=-1)[..., 0]

    px = (u + 1.0) * (f / 2.0) - 0.5
    py = (v + 1.0) * (f / 2.0) - 0.5
    ix, iy, weights = _corner_lists(px, py, mode)

    # Gather with the face as part of the spatial index: view the cubemap as
    # (Nb, 6*F rows, F cols, C) and offset rows by face * F after clamping
    # within the face.
    cm_rows = np.moveaxis(cm_flat, 1, -1).reshape(nb, 6 * f, f, c)
    out = None
    for cx, cy, cw in zip(ix, iy, weights):
        gx = np.clip(cx, 0, f - 1)
        gy = np.clip(cy, 0, f - 1) + face * f
        vals = cm_rows[np.arange(nb)[:, None], gy, gx]
        out = vals * cw[..., None] if out is None else out + vals * cw[..., None]

    return np.moveaxis(out.reshape(batch + group + (c,)), -1, len(batch))
