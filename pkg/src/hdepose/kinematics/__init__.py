"""29-DoF hand model: forward and inverse kinematics."""
from .angles import denormalize_angles, load_angles_csv, moving_average, normalize_angles, save_angles_csv
from .forward import KinematicsError, fka
from .inverse import IkaResult, ika, ika_finger, ika_series, ika_thumb, ika_wrist
from .skeleton import (
    FINGERS,
    JOINT_NAMES,
    N_JOINTS,
    TIP_MARKERS,
    HandSkeleton,
    default_skeleton,
    load_skeleton,
)

__all__ = [
    "FINGERS", "JOINT_NAMES", "N_JOINTS", "TIP_MARKERS", "HandSkeleton", "IkaResult",
    "KinematicsError", "default_skeleton", "denormalize_angles", "fka", "ika", "ika_finger",
    "ika_series", "ika_thumb", "ika_wrist", "load_angles_csv", "load_skeleton",
    "moving_average", "normalize_angles", "save_angles_csv",
]
