"""Rotate a converging stereo pair into scanline alignment.

stereo_rectify computes one rotation per camera (no translation — the optical
centers stay put) such that corresponding points land on the same row of both
output images ("side_by_side" mode, baseline mapped to the x axis). Matching
then becomes a 1-D search along rows.

The demo builds two pinhole cameras that verge inward, rectifies them, and
measures row alignment on a grid of world points before and after.

Run:  python3 demos/05_stereo_rectification.py
"""

import os

import numpy as np

from multicam import PinholeCamera, Pose, save_image, stereo_rectify

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out", "rectify")

HW = (240, 320)


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def texture(x, y):
    return np.stack(
        [
            0.5 + 0.5 * np.sin(2.0 * x) * np.sin(2.4 * y),
            (np.floor(2 * x) + np.floor(2 * y)) % 2,
            0.5 + 0.5 * np.cos(1.3 * x + 0.7 * y),
        ]
    )


def render_plane(cam, pose, plane_z=4.0):
    rays = cam.get_camera_rays(HW, unit_vec=False)
    inv = pose.inverse()
    o, d = inv.transform(rays.origin), inv.transform(rays.dirs, is_vector=True)
    t = (plane_z - o[..., 2]) / d[..., 2]
    hit = o + t[..., None] * d
    return texture(hit[..., 0], hit[..., 1]) * (t > 0)


def row_of(cam, pose, pts):
    """Image row (in pixels) each world point projects to."""
    proj = cam.project_to_pixel(pose.transform(pts))
    return (proj.pix[..., 1] + 1.0) * HW[0] / 2.0, proj.valid


def main():
    os.makedirs(OUT, exist_ok=True)
    cam = PinholeCamera.make([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    # Verging pair: both cameras toe in toward the scene, slight roll on one.
    pose0 = Pose(rot_y(np.deg2rad(6.0)), -rot_y(np.deg2rad(6.0)) @ [-0.3, 0.0, 0.0])
    R1 = rot_z(np.deg2rad(2.0)) @ rot_y(np.deg2rad(-7.0))
    pose1 = Pose(R1, -R1 @ [0.3, 0.02, 0.0])

    img0, img1 = render_plane(cam, pose0), render_plane(cam, pose1)
    save_image(os.path.join(OUT, "raw_0.png"), img0)
    save_image(os.path.join(OUT, "raw_1.png"), img1)

    r0, r1, rec0, rec1 = stereo_rectify(
        cam, pose0, cam, pose1, "side_by_side", img0, img1
    )
    save_image(os.path.join(OUT, "rectified_0.png"), rec0)
    save_image(os.path.join(OUT, "rectified_1.png"), rec1)

    # Probe points spread over the shared field of view.
    g = np.linspace(-1.2, 1.2, 9)
    pts = np.stack(np.meshgrid(g, g, [4.0, 6.0, 9.0], indexing="ij"), -1)
    pts = pts.reshape(-1, 3)

    rows0, v0 = row_of(cam, pose0, pts)
    rows1, v1 = row_of(cam, pose1, pts)
    before = np.abs(rows0 - rows1)[v0 & v1]

    # Rectified cameras share orientation: world_to_cam R becomes rot.T @ R.
    rpose0 = Pose(r0.T @ pose0.R, r0.T @ pose0.T)
    rpose1 = Pose(r1.T @ pose1.R, r1.T @ pose1.T)
    rows0, v0 = row_of(cam, rpose0, pts)
    rows1, v1 = row_of(cam, rpose1, pts)
    after = np.abs(rows0 - rows1)[v0 & v1]

    print(f"row misalignment over {before.size} points ({HW[0]} rows):")
    print(f"  before rectification: mean {before.mean():7.3f} px  max {before.max():7.3f} px")
    print(f"  after  rectification: mean {after.mean():7.2e} px  max {after.max():7.2e} px")
    print(f"images saved under {OUT}")


if __name__ == "__main__":
    main()
