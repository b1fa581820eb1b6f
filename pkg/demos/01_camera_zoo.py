"""Project one point cloud through every camera model and invert it back.

Builds one camera of each kind with plausible normalized intrinsics, pushes a
shared batch of camera-frame points through project_to_pixel, reconstructs the
points with unproject_depth, and prints a per-model round-trip error table.
Also saves a ray-direction image per model (directions mapped to RGB) so the
field-of-view differences are visible at a glance.

Run:  python3 demos/01_camera_zoo.py
"""

import os

import numpy as np

from multicam import (
    BackwardForwardPolynomialFisheyeCamera,
    CubeCamera,
    EquirectangularCamera,
    Kitti360FisheyeCamera,
    OpenCVCamera,
    OpenCVFisheyeCamera,
    OrthographicCamera,
    PinholeCamera,
    save_image,
)

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out", "camera_zoo")

K = np.array([[0.9, 0.0, 0.02], [0.0, 1.05, -0.03], [0.0, 0.0, 1.0]])


def build_zoo():
    """One camera per kind, all with mild distortion where applicable."""
    theta = np.linspace(0.0, 2.2, 64)
    r_fwd = theta * (1.0 + 0.01 * theta**2 - 0.002 * theta**4)
    fwd = np.polynomial.polynomial.polyfit(theta, r_fwd, 7)
    bwd = np.polynomial.polynomial.polyfit(r_fwd, theta, 7)
    return {
        "pinhole": PinholeCamera.make(K),
        "orthographic": OrthographicCamera.make(K),
        "opencv": OpenCVCamera.make(
            K, [0.02, -0.005, 0.001, -0.0005, 0.0002, 0.0001, 0.0003, 0.0001]
        ),
        "equirectangular": EquirectangularCamera.make(),
        "opencv_fisheye": OpenCVFisheyeCamera.make(
            K, [0.01, -0.002, 0.0003, -0.00005], theta_max=2.2
        ),
        "backward_forward_poly_fisheye": BackwardForwardPolynomialFisheyeCamera.make(
            K, fwd, bwd, theta_max=2.2
        ),
        "kitti360_fisheye": Kitti360FisheyeCamera.make(
            [[0.8, 0.0, 0.0], [0.0, 0.8, 0.0], [0.0, 0.0, 1.0]],
            [0.05, -0.01],
            xi=1.0,
            theta_max=1.8,
        ),
        "cube": CubeCamera.make(),
    }


def sample_points(cam, n, rng):
    # Draw points the model can actually see: a forward cone for planar
    # sensors, the full sphere for the radial ones.
    if cam.uses_dist_min:
        dirs = rng.normal(size=(n, 3))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    else:
        dirs = np.concatenate(
            [rng.uniform(-0.5, 0.5, size=(n, 2)), np.ones((n, 1))], axis=-1
        )
    return dirs * rng.uniform(0.5, 20.0, size=(n, 1))


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = np.random.default_rng(7)
    zoo = build_zoo()

    print(f"{'model':<30}{'pix dim':>8}{'central':>9}{'valid':>7}{'max err':>11}")
    for name, cam in zoo.items():
        pts = sample_points(cam, 2000, rng)
        proj = cam.project_to_pixel(pts, depth_is_along_ray=True)
        rays = cam.pixel_to_ray(proj.pix, unit_vec=True)
        back = rays.origin + proj.depth[..., None] * rays.dirs
        err = np.linalg.norm(back - pts, axis=-1)[proj.valid]
        rel = (err / (1.0 + np.linalg.norm(pts, axis=-1)[proj.valid])).max()
        print(
            f"{name:<30}{cam.pixel_dim:>8}{str(cam.is_central()):>9}"
            f"{proj.valid.mean():>7.2f}{rel:>11.2e}"
        )

        hw = (96, 96) if name != "equirectangular" else (96, 192)
        grid_rays = cam.get_camera_rays(hw)
        rgb = np.moveaxis(grid_rays.dirs * 0.5 + 0.5, -1, 0)
        ok = grid_rays.valid
        if name == "cube":  # six faces render as a vertical strip
            rgb = rgb.reshape(3, 6 * hw[0], hw[1])
            ok = ok.reshape(6 * hw[0], hw[1])
        save_image(os.path.join(OUT, f"rays_{name}.png"), rgb * ok)

    print(f"\nray-direction images saved under {OUT}")


if __name__ == "__main__":
    main()
