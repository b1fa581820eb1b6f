"""Command-line front end for the warping workflows.

Each subcommand reads cameras from JSON (see :mod:`multicam.io` for the
schema), images from PNG, and float maps from PFM, runs the corresponding
library call, and writes the outputs plus a small JSON manifest recording the
command, file paths, and numeric options next to them.

Subcommands:
    resample   re-render a source image through a different camera model
    rectify    rotate a stereo pair onto a shared baseline-aligned frame
    warp       backward-warp a source image with a per-pixel target depth
    sweep      warp sources across a range of depth hypotheses (cost volume)
    fuse       vote-and-average depth maps across views
    rays       dump a camera's pixel-to-ray directions as a PFM

Cube-camera images travel through PNG/PFM files as a vertical strip of the
six faces, i.e. a (6*F, F) grid in face order ±x, ±y, ±z.

Exit codes: 0 success, 1 data error (bad file contents, incompatible inputs),
2 argument error.
"""

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import io as mio
from .cameras import CubeCamera
from .warping import (
    backward_warp,
    fuse_depths_mvsnet,
    relative_pose,
    resample_by_intrinsics,
    stereo_rectify,
    sweep_hypotheses,
)

__all__ = ["run_command", "main"]


class UsageError(Exception):
    """Raised for malformed argument combinations (exit code 2)."""


def _parse_hw(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--hw expects HxW (e.g. 480x640), got {text!r}")
    if h <= 0 or w <= 0:
        raise UsageError(f"--hw dimensions must be positive, got {text!r}")
    return h, w


def _parse_rot(text):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        vals = []
    if len(vals) != 9:
        raise UsageError("--rot expects 9 comma-separated numbers (row-major)")
    R = np.array(vals).reshape(3, 3)
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > 1e-5 or np.linalg.det(R) < 0:
        raise UsageError(f"--rot is not a rotation (max deviation {err:.2e})")
    u, _, vt = np.linalg.svd(R)
    return u @ vt


def _to_faces(cam, arr):
    """Reshape a cube camera's strip file layout (..., 6*F, F) to (..., 6, F, F)."""
    if not isinstance(cam, CubeCamera):
        return arr
    h, w = arr.shape[-2:]
    if h != 6 * w:
        raise ValueError(
            f"cube images must be a vertical strip of six square faces "
            f"(6*F, F); got ({h}, {w})"
        )
    return arr.reshape(arr.shape[:-2] + (6, w, w))


def _to_strip(arr):
    """Flatten (..., 6, F, F) cube faces back into a (..., 6*F, F) strip."""
    if arr.ndim >= 3 and arr.shape[-3] == 6 and arr.shape[-1] == arr.shape[-2]:
        return arr.reshape(arr.shape[:-3] + (6 * arr.shape[-2], arr.shape[-1]))
    return arr


def _write_manifest(out_base, command, inputs, outputs, options):
    path = f"{out_base}.manifest.json"
    manifest = {
        "command": command,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "options": options,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def _load_pair(path):
    cam, pose = mio.load_camera(path)
    return cam, pose


# ---------------------------------------------------------------------------
# Subcommand handlers.
# ---------------------------------------------------------------------------


def _cmd_resample(args):
    src_cam, _ = _load_pair(args.src)
    trg_cam, _ = _load_pair(args.trg)
    img = _to_faces(src_cam, mio.load_image(args.src_image))
    if args.hw is not None:
        hw = _parse_hw(args.hw)
    elif isinstance(src_cam, CubeCamera) or isinstance(trg_cam, CubeCamera):
        raise UsageError("--hw is required when a cube camera is involved")
    else:
        hw = img.shape[-2:]
    rot = _parse_rot(args.rot) if args.rot else np.eye(3)
    out_img, valid = resample_by_intrinsics(
        src_cam, trg_cam, rot, img, hw, mode=args.interp
    )
    mio.save_image(args.out, _to_strip(out_img * valid))
    _write_manifest(
        args.out,
        "resample",
        [args.src, args.src_image, args.trg],
        [args.out],
        {"hw": list(hw), "rot": np.asarray(rot).ravel().tolist(), "interp": args.interp},
    )
    return 0


def _cmd_rectify(args):
    cam0, pose0 = _load_pair(args.src)
    cam1, pose1 = _load_pair(args.trg)
    img0 = mio.load_image(args.src_image)
    img1 = mio.load_image(args.trg_image)
    rot0, rot1, rect0, rect1 = stereo_rectify(
        cam0, pose0, cam1, pose1, args.mode, img0, img1
    )
    out0 = f"{args.out}_0.png"
    out1 = f"{args.out}_1.png"
    out_rot = f"{args.out}_rotations.json"
    mio.save_image(out0, rect0)
    mio.save_image(out1, rect1)
    with open(out_rot, "w") as f:
        json.dump(
            {"rot0": rot0.ravel().tolist(), "rot1": rot1.ravel().tolist()},
            f,
            indent=2,
        )
        f.write("\n")
    _write_manifest(
        args.out,
        "rectify",
        [args.src, args.src_image, args.trg, args.trg_image],
        [out0, out1, out_rot],
        {"mode": args.mode},
    )
    return 0


def _cmd_warp(args):
    trg_cam, trg_pose = _load_pair(args.trg)
    src_cam, src_pose = _load_pair(args.src)
    img = _to_faces(src_cam, mio.load_image(args.src_image))
    depth = _to_faces(trg_cam, mio.load_depth(args.depth))
    rel = relative_pose(trg_pose, src_pose)
    res = backward_warp(
        trg_cam,
        src_cam,
        rel,
        img,
        depth[None],
        depth_is_along_ray=args.along_ray,
        hw=depth.shape[-2:],
        mode=args.interp,
    )
    mio.save_image(args.out, _to_strip(res.warped[0] * res.valid[0]))
    _write_manifest(
        args.out,
        "warp",
        [args.trg, args.src, args.src_image, args.depth],
        [args.out],
        {"along_ray": args.along_ray, "interp": args.interp},
    )
    return 0


def _hypotheses(args):
    if args.depth is not None:
        return None  # per-pixel
    if args.dmin is None or args.dmax is None or args.count is None:
        raise UsageError("sweep needs either --depth or all of --dmin/--dmax/--count")
    if args.dmin <= 0 or args.dmax < args.dmin or args.count < 1:
        raise UsageError("require 0 < dmin <= dmax and count >= 1")
    if args.linear:
        return np.linspace(args.dmin, args.dmax, args.count)
    return 1.0 / np.linspace(1.0 / args.dmin, 1.0 / args.dmax, args.count)


def _cmd_sweep(args):
    if len(args.src) != len(args.src_image):
        raise UsageError("each --src needs a matching --src-image")
    if not args.src:
        raise UsageError("sweep needs at least one --src/--src-image pair")
    trg_cam, trg_pose = _load_pair(args.trg)
    src = [_load_pair(p) for p in args.src]
    imgs = [
        _to_faces(cam, mio.load_image(p))
        for (cam, _), p in zip(src, args.src_image)
    ]
    d = _hypotheses(args)
    if d is None:
        d = _to_faces(trg_cam, mio.load_depth(args.depth))[None]
        hw = d.shape[-2:]
    elif args.hw is not None:
        hw = _parse_hw(args.hw)
    elif isinstance(trg_cam, CubeCamera):
        raise UsageError("--hw is required for cube targets")
    else:
        hw = imgs[0].shape[-2:]
    rels = [relative_pose(trg_pose, pose) for _, pose in src]
    res = sweep_hypotheses(
        trg_cam,
        [cam for cam, _ in src],
        rels,
        imgs,
        d,
        depth_is_along_ray=args.along_ray,
        hw=hw,
        mode=args.interp,
    )
    outputs = []
    warped = res.warped * res.valid[:, :, None]
    for si in range(warped.shape[0]):
        for di in range(warped.shape[1]):
            path = f"{args.out}_s{si:02d}_d{di:03d}.png"
            mio.save_image(path, _to_strip(warped[si, di]))
            outputs.append(path)
    options = {
        "along_ray": args.along_ray,
        "interp": args.interp,
        "hw": list(hw),
        "hypotheses": None if args.depth else np.asarray(d).tolist(),
    }
    _write_manifest(
        args.out,
        "sweep",
        [args.trg, *args.src, *args.src_image] + ([args.depth] if args.depth else []),
        outputs,
        options,
    )
    return 0


def _cmd_fuse(args):
    if len(args.src) != len(args.src_depth):
        raise UsageError("each --src needs a matching --src-depth")
    if not args.src:
        raise UsageError("fuse needs at least one --src/--src-depth pair")
    trg_cam, trg_pose = _load_pair(args.trg)
    d_trg = _to_faces(trg_cam, mio.load_depth(args.depth))
    src = [_load_pair(p) for p in args.src]
    d_srcs = [
        _to_faces(cam, mio.load_depth(p)) for (cam, _), p in zip(src, args.src_depth)
    ]
    rels = [relative_pose(trg_pose, pose) for _, pose in src]
    fused, votes = fuse_depths_mvsnet(
        trg_cam,
        [cam for cam, _ in src],
        rels,
        d_trg,
        d_srcs,
        tau1=args.tau1,
        tau2=args.tau2,
        min_views=args.min_views,
        depth_is_along_ray=args.along_ray,
    )
    mio.save_depth(args.out, _to_strip(fused))
    stem, _ = os.path.splitext(args.out)
    mask_path = f"{stem}_mask.png"
    mio.save_image(mask_path, _to_strip((fused > 0).astype(np.float64)))
    _write_manifest(
        args.out,
        "fuse",
        [args.trg, args.depth, *args.src, *args.src_depth],
        [args.out, mask_path],
        {
            "tau1": args.tau1,
            "tau2": args.tau2,
            "min_views": args.min_views,
            "along_ray": args.along_ray,
        },
    )
    return 0


def _cmd_rays(args):
    cam, _ = _load_pair(args.cam)
    rays = cam.get_camera_rays(_parse_hw(args.hw))
    dirs = np.moveaxis(rays.dirs, -1, 0)  # channels first
    mio.save_pfm(args.out, _to_strip(dirs).astype(np.float32))
    _write_manifest(
        args.out, "rays", [args.cam], [args.out], {"hw": list(_parse_hw(args.hw))}
    )
    return 0


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------


def _add_interp(p):
    p.add_argument(
        "--interp",
        choices=("bilinear", "nearest"),
        default="bilinear",
        help="sampling mode for image reads",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="multicam",
        description="Cross-model camera resampling, warping, and depth fusion.",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed recorded in manifests")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("resample", help="re-render an image through another camera")
    p.add_argument("--src", required=True, help="source camera JSON")
    p.add_argument("--src-image", required=True, help="source PNG")
    p.add_argument("--trg", required=True, help="target camera JSON")
    p.add_argument("--rot", help="9 row-major numbers rotating target dirs into source")
    p.add_argument("--hw", help="target size HxW (default: source image size)")
    _add_interp(p)
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(func=_cmd_resample)

    p = sub.add_parser("rectify", help="rectify a stereo pair")
    p.add_argument("--src", required=True, help="first camera JSON (with extrinsics)")
    p.add_argument("--src-image", required=True)
    p.add_argument("--trg", required=True, help="second camera JSON (with extrinsics)")
    p.add_argument("--trg-image", required=True)
    p.add_argument("--mode", choices=("side_by_side", "on_top"), required=True)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=_cmd_rectify)

    p = sub.add_parser("warp", help="backward-warp a source image with a depth map")
    p.add_argument("--trg", required=True, help="target camera JSON")
    p.add_argument("--src", required=True, help="source camera JSON")
    p.add_argument("--src-image", required=True)
    p.add_argument("--depth", required=True, help="per-pixel target depth PFM")
    p.add_argument("--along-ray", action="store_true", help="depth is along-ray distance")
    _add_interp(p)
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(func=_cmd_warp)

    p = sub.add_parser("sweep", help="warp sources over depth hypotheses")
    p.add_argument("--trg", required=True, help="target camera JSON")
    p.add_argument("--src", action="append", default=[], help="source camera JSON (repeatable)")
    p.add_argument("--src-image", action="append", default=[], help="source PNG (repeatable)")
    p.add_argument("--dmin", type=float, help="nearest hypothesis")
    p.add_argument("--dmax", type=float, help="farthest hypothesis")
    p.add_argument("--count", type=int, help="number of hypotheses")
    p.add_argument(
        "--linear",
        action="store_true",
        help="space hypotheses linearly in depth instead of inverse depth",
    )
    p.add_argument("--depth", help="per-pixel hypothesis PFM instead of a range")
    p.add_argument("--hw", help="target size HxW (default: first source image size)")
    p.add_argument("--along-ray", action="store_true", help="depth is along-ray distance")
    _add_interp(p)
    p.add_argument("--out", required=True, help="output prefix for numbered PNGs")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("fuse", help="fuse depth maps across views")
    p.add_argument("--trg", required=True, help="target camera JSON")
    p.add_argument("--depth", required=True, help="target depth PFM")
    p.add_argument("--src", action="append", default=[], help="source camera JSON (repeatable)")
    p.add_argument("--src-depth", action="append", default=[], help="source depth PFM (repeatable)")
    p.add_argument("--tau1", type=float, default=None, help="reprojection threshold (normalized units)")
    p.add_argument("--tau2", type=float, default=0.01, help="relative depth threshold")
    p.add_argument("--min-views", type=int, default=2, help="votes needed to keep a pixel")
    p.add_argument("--along-ray", action="store_true", help="depths are along-ray distances")
    p.add_argument("--out", required=True, help="output fused PFM")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("rays", help="dump pixel-to-ray directions as a PFM")
    p.add_argument("--cam", required=True, help="camera JSON")
    p.add_argument("--hw", required=True, help="grid size HxW")
    p.add_argument("--out", required=True, help="output PFM (3 channels)")
    p.set_defaults(func=_cmd_rays)

    return parser


def run_command(argv=None):
    """Parse and run one CLI invocation; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
