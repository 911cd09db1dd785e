"""posebench: relative-pose benchmarking of monocular depth predictions.

Depth predictions are judged by how well depth-aware robust solvers recover
two-view camera motion against SfM reference poses, next to the classical
depth-accuracy metrics.
"""

__version__ = "0.1.0"

from .geometry import (
    CameraIntrinsics,
    Correspondence,
    EssentialMatrix,
    Pose,
    ScaledPose,
    pose_error,
    rotation_error,
    translation_error,
)
from .ransac import EstimatorConfig, PoseEstimate, RansacSeed, gt_depth_estimate, ransac_estimate

__all__ = [
    "CameraIntrinsics",
    "Correspondence",
    "EssentialMatrix",
    "EstimatorConfig",
    "Pose",
    "PoseEstimate",
    "RansacSeed",
    "ScaledPose",
    "__version__",
    "gt_depth_estimate",
    "pose_error",
    "ransac_estimate",
    "rotation_error",
    "translation_error",
]
