"""Batched array utilities: inferred batching, matrix/pose application, and
pixel/normalized coordinate conversions.

Arrays follow the shape convention ``(*batch_shape, *group_shape, *event_dims)``:
leading dims are batch-like and must match across operands, middle dims form
groups of elements that share one batch entry, and trailing dims describe a
single element (a 3-vector, a 3x3 matrix, ...).  Which dims are batch is
inferred from the operands rather than declared, so a single matrix can be
applied to a group of points, or a batch of matrices to matching batches of
point groups, without reshaping at the call site.

Normalized image coordinates run from -1 to 1 per axis with x rightward and
y downward: the top-left image corner is (-1, -1), pixel centers sit at
half-integer pixel coordinates, and the map between the two systems is
``n = 2 * p / size - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BatchSplit",
    "Pose",
    "infer_batch",
    "apply_matrix",
    "apply_pose",
    "normalized_from_pixel_intrinsics",
    "pixel_from_normalized_intrinsics",
    "normalized_from_pixel_coords",
    "pixel_from_normalized_coords",
    "normalized_image_grid",
]

#: Tolerance used to validate rotation matrices on Pose construction.
ROTATION_ATOL = 1e-6


@dataclass(frozen=True)
class BatchSplit:
    """How two operand shapes decompose into batch, group, and event dims.

    Attributes:
        batch_shape: Leading dims shared by both operands.
        group_shape: Extra middle dims carried by exactly one operand.
        event_dims: Number of trailing per-element dims of the operand that
            carries the group, so ``batch_shape + group_shape`` plus its last
            ``event_dims`` dims reconstructs that operand's full shape.
    """

    batch_shape: tuple[int, ...]
    group_shape: tuple[int, ...]
    event_dims: int


def infer_batch(a_shape, a_event_dims, b_shape, b_event_dims):
    """Resolve the shared batch shape of two operands.

    The operand with fewer non-event dims supplies the batch shape; the other
    operand's extra middle dims become the group shape.  Batch dims must match
    exactly (no size-1 broadcasting).

    Args:
        a_shape: Full shape of the first operand.
        a_event_dims: Number of trailing per-element dims of the first operand.
        b_shape: Full shape of the second operand.
        b_event_dims: Number of trailing per-element dims of the second operand.

    Returns:
        BatchSplit with the shared batch shape and the group carrier's group
        and event dims.

    Raises:
        ValueError: if an operand has fewer dims than its declared event dims,
            or if the candidate batch dims disagree.
    """
    a_shape = tuple(a_shape)
    b_shape = tuple(b_shape)
    if len(a_shape) < a_event_dims:
        raise ValueError(
            f"shape {a_shape} has fewer dims than its {a_event_dims} event dims"
        )
    if len(b_shape) < b_event_dims:
        raise ValueError(
            f"shape {b_shape} has fewer dims than its {b_event_dims} event dims"
        )
    a_nonevent = a_shape[: len(a_shape) - a_event_dims]
    b_nonevent = b_shape[: len(b_shape) - b_event_dims]
    if len(a_nonevent) <= len(b_nonevent):
        batch, other, event_dims = a_nonevent, b_nonevent, b_event_dims
    else:
        batch, other, event_dims = b_nonevent, a_nonevent, a_event_dims
    if other[: len(batch)] != batch:
        raise ValueError(
            f"batch dims disagree between shapes {a_shape} (event_dims="
            f"{a_event_dims}) and {b_shape} (event_dims={b_event_dims})"
        )
    return BatchSplit(batch, other[len(batch):], event_dims)


def _reshape_for_group(arr, event_dims, group_shape):
    """Insert singleton group dims before the event dims of a batch array."""
    batch = arr.shape[: arr.ndim - event_dims]
    event = arr.shape[arr.ndim - event_dims:]
    return arr.reshape(batch + (1,) * len(group_shape) + event)


def apply_matrix(mats, pts):
    """Multiply batches of groups of points by batches of matrices.

    Args:
        mats: (*batch_shape, d, d) matrices.
        pts: (*batch_shape, *group_shape, d) points.

    Returns:
        (*batch_shape, *group_shape, d) transformed points; output shape
        always equals ``pts.shape``.

    Raises:
        ValueError: on d mismatch, non-square matrices, batch disagreement, or
            matrices carrying group dims of their own.
    """
    mats = np.asarray(mats)
    pts = np.asarray(pts)
    if mats.ndim < 2 or mats.shape[-1] != mats.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {mats.shape}")
    d = mats.shape[-1]
    if pts.ndim < 1 or pts.shape[-1] != d:
        raise ValueError(
            f"points with final dim {pts.shape} do not match {d}x{d} matrices"
        )
    if mats.ndim - 2 > pts.ndim - 1:
        raise ValueError(
            f"matrix batch {mats.shape[:-2]} has more dims than point batch "
            f"{pts.shape[:-1]}; only points may carry group dims"
        )
    split = infer_batch(mats.shape, 2, pts.shape, 1)
    mats = _reshape_for_group(mats, 2, split.group_shape)
    return (mats @ pts[..., None])[..., 0]


@dataclass(frozen=True)
class Pose:
    """A rigid world-to-camera transform: x_cam = R @ x_world + T.

    Attributes:
        R: (*batch_shape, 3, 3) rotation matrices.
        T: (*batch_shape, 3) translations.
    """

    R: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64)
        T = np.asarray(self.T, dtype=np.float64)
        if R.shape[-2:] != (3, 3):
            raise ValueError(f"R must be (*batch, 3, 3), got {R.shape}")
        if T.shape[-1:] != (3,):
            raise ValueError(f"T must be (*batch, 3), got {T.shape}")
        if R.shape[:-2] != T.shape[:-1]:
            raise ValueError(
                f"R batch {R.shape[:-2]} and T batch {T.shape[:-1]} disagree"
            )
        rtr = np.swapaxes(R, -1, -2) @ R
        eye = np.eye(3)
        if not np.allclose(rtr, eye, atol=ROTATION_ATOL, rtol=0.0):
            raise ValueError("R is not orthonormal within 1e-6")
        if not np.allclose(np.linalg.det(R), 1.0, atol=ROTATION_ATOL, rtol=0.0):
            raise ValueError("R must have determinant +1 within 1e-6")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)

    @property
    def batch_shape(self):
        return self.R.shape[:-2]

    @staticmethod
    def identity(batch_shape=()):
        """Identity pose with the given batch shape."""
        batch_shape = tuple(batch_shape)
        R = np.broadcast_to(np.eye(3), batch_shape + (3, 3)).copy()
        T = np.zeros(batch_shape + (3,))
        return Pose(R, T)

    def inverse(self):
        """Pose mapping camera points back to world: x_world = R' x_cam + T'."""
        rt = np.swapaxes(self.R, -1, -2)
        return Pose(rt, -(rt @ self.T[..., None])[..., 0])

    def compose(self, first):
        """Pose equivalent to applying ``first`` and then this pose."""
        return Pose(
            self.R @ first.R,
            (self.R @ first.T[..., None])[..., 0] + self.T,
        )

    def transform(self, pts, is_vector=False):
        """Apply the pose to points (or direction vectors)."""
        return apply_pose(self, pts, is_vector=is_vector)


def apply_pose(pose, pts, is_vector=False):
    """Apply a rigid transform to groups of points or vectors.

    Args:
        pose: Pose with batch shape matching the leading dims of pts.
        pts: (*batch_shape, *group_shape, 3) points.
        is_vector: if set, apply the rotation only (no translation).

    Returns:
        (*batch_shape, *group_shape, 3) transformed points.
    """
    out = apply_matrix(pose.R, pts)
    if is_vector:
        return out
    split = infer_batch(pose.T.shape, 1, np.shape(pts), 1)
    return out + _reshape_for_group(pose.T, 1, split.group_shape)


def _check_hw(hw):
    h, w = int(hw[0]), int(hw[1])
    if h < 1 or w < 1:
        raise ValueError(f"image extents must be positive, got {(h, w)}")
    return h, w


def _coord_scale_matrix(hw, inverse=False):
    """Affine matrix realizing n = 2p/size - 1 (or its inverse)."""
    h, w = _check_hw(hw)
    if inverse:
        return np.array(
            [[w / 2.0, 0.0, w / 2.0], [0.0, h / 2.0, h / 2.0], [0.0, 0.0, 1.0]]
        )
    return np.array(
        [[2.0 / w, 0.0, -1.0], [0.0, 2.0 / h, -1.0], [0.0, 0.0, 1.0]]
    )


def normalized_from_pixel_intrinsics(K, hw):
    """Convert pixel-unit intrinsics to normalized-coordinate intrinsics.

    Applies f0' = 2 f0 / W, c0' = 2 c0 / W - 1 (and H for the y axis), i.e.
    composition with the coordinate map n = 2p/size - 1.

    Args:
        K: (*batch, 3, 3) affine intrinsics with K[2, 2] = 1.
        hw: (H, W) pixel extents of the image the intrinsics refer to.

    Returns:
        (*batch, 3, 3) normalized intrinsics.
    """
    K = np.asarray(K)
    return _coord_scale_matrix(hw) @ K


def pixel_from_normalized_intrinsics(K, hw):
    """Exact inverse of normalized_from_pixel_intrinsics."""
    K = np.asarray(K)
    return _coord_scale_matrix(hw, inverse=True) @ K


def normalized_from_pixel_coords(p, hw):
    """Map pixel coordinates (from the top-left corner) to normalized coords.

    Args:
        p: (..., 2) pixel coordinates, x first.
        hw: (H, W) image extents; x uses W, y uses H.
    """
    h, w = _check_hw(hw)
    p = np.asarray(p)
    return 2.0 * p / np.array([w, h], dtype=np.float64) - 1.0


def pixel_from_normalized_coords(n, hw):
    """Map normalized coordinates back to pixel units: p = (n + 1) size / 2."""
    h, w = _check_hw(hw)
    n = np.asarray(n)
    return (n + 1.0) * np.array([w, h], dtype=np.float64) / 2.0


def normalized_image_grid(hw, dtype=np.float64):
    """Normalized coordinates of every pixel center of an (H, W) image.

    Returns:
        (H, W, 2) array; entry [i, j] is the normalized (x, y) of the center
        of the pixel in row i, column j, i.e. (2(j+.5)/W - 1, 2(i+.5)/H - 1).
    """
    h, w = _check_hw(hw)
    xs = (2.0 * (np.arange(w, dtype=dtype) + 0.5) / w) - 1.0
    ys = (2.0 * (np.arange(h, dtype=dtype) + 0.5) / h) - 1.0
    grid = np.stack(np.meshgrid(xs, ys, indexing="xy"), axis=-1)
    return grid.astype(dtype, copy=False)
