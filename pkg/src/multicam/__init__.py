"""Camera-model-agnostic projection, ray casting, and backward warping.

The package is organized in thin layers:

- :mod:`multicam.ndbatch`: batched poses, intrinsics conversions, and the
  shape-inference rules shared by everything else.
- :mod:`multicam.newton`: batched Newton inversion of smooth maps with
  implicit-function sensitivities.
- :mod:`multicam.cameras`: eight camera models behind one interface
  (project, unproject, rays, crops/flips, stacking).
- :mod:`multicam.sampling`: bilinear/nearest reads from images and cubemaps.
- :mod:`multicam.warping`: backward warping, cost-volume sweeps, stereo
  rectification, cross-model resampling, and depth fusion.
- :mod:`multicam.io` / :mod:`multicam.cli`: camera JSON, PNG/PFM files, and
  the command-line workflows built on them.
"""

from .cameras import (
    CUBE_FACES,
    BackwardForwardPolynomialFisheyeCamera,
    Camera,
    CameraKind,
    CubeCamera,
    EquirectangularCamera,
    HeterogeneousCamera,
    Kitti360FisheyeCamera,
    OpenCVCamera,
    OpenCVFisheyeCamera,
    OrthographicCamera,
    PinholeCamera,
    ProjectionResult,
    RayBundle,
    cube_face_grid,
    fisheye_theta_map,
    kitti360_radial_map,
    make_camera,
    model_project,
    model_unproject,
    opencv_distortion_map,
    stack_cameras,
)
from .io import (
    load_camera,
    load_depth,
    load_image,
    load_pfm,
    save_camera,
    save_depth,
    save_image,
    save_pfm,
)
from .ndbatch import (
    BatchSplit,
    Pose,
    apply_matrix,
    apply_pose,
    infer_batch,
    normalized_from_pixel_coords,
    normalized_from_pixel_intrinsics,
    normalized_image_grid,
    pixel_from_normalized_coords,
    pixel_from_normalized_intrinsics,
)
from .newton import (
    InverseResult,
    NewtonConfig,
    SmoothMap,
    inverse_sensitivity_theta,
    inverse_sensitivity_y,
    newton_solve,
)
from .sampling import samples_from_cubemap, samples_from_image
from .warping import (
    WarpResult,
    backward_warp,
    backward_warp_pts,
    consistency_mask,
    default_spatial_threshold,
    fuse_depths_mvsnet,
    random_resized_crop_flip,
    relative_pose,
    resample_by_intrinsics,
    stereo_rectify,
    sweep_hypotheses,
)

__version__ = "0.1.0"
