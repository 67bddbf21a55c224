"""Calibration of networks of hybrid stereo rigs."""

from ._hybridcal import (
    CameraModel,
    HybridcalError,
    RigidTransform,
    eight_point,
    fundamental_from_calibration,
    match_descriptors,
    ransac_fundamental,
    recover_pose,
    rotation_angle_between,
    rotation_from_axis_angle,
    run_cli,
    sampson_distance,
    triangulate,
)

__all__ = [
    "CameraModel",
    "HybridcalError",
    "RigidTransform",
    "eight_point",
    "fundamental_from_calibration",
    "match_descriptors",
    "ransac_fundamental",
    "recover_pose",
    "rotation_angle_between",
    "rotation_from_axis_angle",
    "run_cli",
    "sampson_distance",
    "triangulate",
]
