"""True orthophoto and depth rendering from 2D Gaussian splat scenes."""

from ._core import (
    ContractViolation,
    FitDiverged,
    InvalidInput,
    IoError,
    OrthoCamera,
    Scene,
    SchemaError,
    StageError,
    canny,
    cmd_depth_edges,
    cmd_eval_gcp,
    cmd_render,
    depth_overlays,
    fit_colors,
    gcp_errors,
    haversine,
    nadir_ortho_camera,
    partition_plan,
    read_ply,
    render,
    render_tdom,
    write_ply,
)

__version__ = "0.1.0"
