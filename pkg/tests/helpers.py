"""Shared synthetic scenes and fixtures for the test suite.

Everything here is analytic: textures are smooth closed-form functions of
world position or direction, so images and depth maps can be rendered for
any camera without a reference renderer, and warped results can be compared
against direct evaluation.
"""

import numpy as np

from multicam.ndbatch import Pose


def random_rotation(rng, batch=()):
    """Random rotation matrices via QR with determinant fixed to +1."""
    a = rng.normal(size=batch + (3, 3))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.einsum("...ii->...i", r))[..., None, :]
    det = np.linalg.det(q)
    q[..., :, 0] *= det[..., None]
    return q


def pose_at(center, R=None):
    """World-to-camera pose of a camera at ``center`` with orientation R."""
    R = np.eye(3) if R is None else np.asarray(R, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    return Pose(R, -R @ center)


def plane_texture(x, y):
    """Smooth 3-channel texture over the z = const plane."""
    return np.stack(
        [
            np.sin(2.1 * x) * np.cos(1.7 * y),
            np.cos(1.3 * x + 2.0 * y),
            np.sin(0.9 * x - 1.1 * y) * np.sin(1.9 * y),
        ]
    )


def sphere_texture(dirs):
    """Smooth 3-channel texture over directions (rows of unit vectors)."""
    unit = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    x, y, z = unit[..., 0], unit[..., 1], unit[..., 2]
    return np.stack(
        [
            np.sin(3.0 * x) * np.cos(2.0 * y),
            np.cos(2.5 * z + 1.0 * x),
            np.sin(1.5 * y) + 0.5 * np.cos(3.5 * z),
        ]
    )


def render_plane_view(cam, pose, hw, plane_z, texture=None):
    """Render the textured plane z = plane_z for a camera with a pose.

    Args:
        cam: any camera (unbatched).
        pose: world-to-camera Pose.
        hw: output (H, W).
        plane_z: world z of the plane.

    Returns:
        (image, depth): (3, H, W) texture values and (H, W) z-depths in the
        camera frame (every camera here looks along +z from z < plane_z).
    """
    rays = cam.get_camera_rays(hw, unit_vec=False)
    origin_w = pose.inverse().transform(rays.origin)
    dirs_w = pose.inverse().transform(rays.dirs, is_vector=True)
    t = (plane_z - origin_w[..., 2]) / dirs_w[..., 2]
    hit = origin_w + t[..., None] * dirs_w
    image = (texture or plane_texture)(hit[..., 0], hit[..., 1])
    cam_pts = pose.transform(hit)
    return image, cam_pts[..., 2]


def render_sphere_view(cam, pose, hw, radius, center=(0.0, 0.0, 0.0), texture=None):
    """Render a textured sphere around ``center`` (cameras inside it).

    Returns:
        (image, distance): (3, H, W) texture and (H, W) along-ray distances.
    """
    center = np.asarray(center, dtype=np.float64)
    rays = cam.get_camera_rays(hw, unit_vec=True)
    origin_w = pose.inverse().transform(rays.origin)
    dirs_w = pose.inverse().transform(rays.dirs, is_vector=True)
    oc = origin_w - center
    b = np.einsum("...i,...i->...", oc, dirs_w)
    c = np.einsum("...i,...i->...", oc, oc) - radius ** 2
    t = -b + np.sqrt(np.maximum(b * b - c, 0.0))  # camera inside: far hit
    hit = origin_w + t[..., None] * dirs_w
    return (texture or sphere_texture)(hit - center), t
