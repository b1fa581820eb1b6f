"""Filter and fuse noisy multi-view depth maps by geometric consistency.

Per-view depth estimates disagree where they are wrong. consistency_mask
reprojects a source depth map into the target view and keeps only pixels
whose reprojection lands where the source says it should (within tau1 pixels)
at a compatible depth (within tau2, relative). fuse_depths_mvsnet averages
the reprojected depths over the views that pass, which cancels independent
noise roughly as 1/sqrt(votes).

The scene is an exactly known slanted plane observed from four positions.

Run:  python3 demos/06_depth_fusion.py
"""

import os

import numpy as np

from multicam import (
    PinholeCamera,
    Pose,
    consistency_mask,
    fuse_depths_mvsnet,
    relative_pose,
    save_image,
    save_pfm,
)

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out", "fusion")

HW = (180, 240)
PLANE = (0.1, -0.06, 3.5)


def depth_of(cam, pose):
    """Exact z-depth map of the slanted plane for a posed camera."""
    rays = cam.get_camera_rays(HW, unit_vec=False)
    inv = pose.inverse()
    o, d = inv.transform(rays.origin), inv.transform(rays.dirs, is_vector=True)
    a, b, c = PLANE
    t = (c + a * o[..., 0] + b * o[..., 1] - o[..., 2]) / (
        d[..., 2] - a * d[..., 0] - b * d[..., 1]
    )
    return pose.transform(o + t[..., None] * d)[..., 2]


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = np.random.default_rng(11)
    cam = PinholeCamera.make([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    centers = [[0.0, 0.0, 0.0], [0.4, 0.0, 0.0], [-0.35, 0.2, 0.0], [0.1, -0.3, 0.1]]
    poses = [Pose(np.eye(3), -np.asarray(c, dtype=np.float64)) for c in centers]
    clean = [depth_of(cam, p) for p in poses]

    # 1.5% multiplicative noise, plus gross outliers on 4% of source pixels.
    noisy = []
    for d in clean:
        nd = d * (1.0 + 0.015 * rng.normal(size=d.shape))
        bad = rng.random(d.shape) < 0.04
        noisy.append(np.where(bad, d * rng.uniform(0.5, 1.8, size=d.shape), nd))

    trg = 0
    srcs = [i for i in range(len(poses)) if i != trg]
    rels = [relative_pose(poses[trg], poses[s]) for s in srcs]

    for i, s in enumerate(srcs):
        mask, _ = consistency_mask(
            cam, cam, rels[i], noisy[trg], noisy[s], tau2=0.05
        )
        print(f"view {s}: {mask.mean():.1%} of target pixels consistent")
        save_image(os.path.join(OUT, f"mask_view{s}.png"), mask.astype(np.float64))

    fused, votes = fuse_depths_mvsnet(
        cam,
        [cam] * len(srcs),
        rels,
        noisy[trg],
        [noisy[s] for s in srcs],
        tau2=0.05,
        min_views=2,
    )
    keep = fused > 0
    rmse_in = np.sqrt(np.mean((noisy[trg] - clean[trg])[keep] ** 2))
    rmse_out = np.sqrt(np.mean((fused - clean[trg])[keep] ** 2))
    print(
        f"fused {keep.mean():.1%} of pixels (>=2 votes); depth RMSE "
        f"{rmse_in:.4f} -> {rmse_out:.4f}"
    )

    save_pfm(os.path.join(OUT, "fused.pfm"), fused.astype(np.float32))
    lo, hi = clean[trg].min(), clean[trg].max()
    save_image(os.path.join(OUT, "depth_noisy.png"), (noisy[trg] - lo) / (hi - lo))
    save_image(os.path.join(OUT, "depth_fused.png"), (fused - lo) / (hi - lo) * keep)
    save_image(os.path.join(OUT, "votes.png"), votes / votes.max())
    print(f"outputs saved under {OUT}")


if __name__ == "__main__":
    main()
