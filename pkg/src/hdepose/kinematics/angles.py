"""Joint-angle normalisation, marker pre-filtering and angle-series CSV I/O."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .skeleton import JOINT_NAMES, N_JOINTS

NORM_SCALE = np.radians(45.0)


def normalize_angles(angles, rest_pose) -> np.ndarray:
    """(angles - rest) / 45 deg, elementwise."""
    return (np.asarray(angles, dtype=float) - np.asarray(rest_pose, dtype=float)) / NORM_SCALE


def denormalize_angles(norm, rest_pose) -> np.ndarray:
    return np.asarray(norm, dtype=float) * NORM_SCALE + np.asarray(rest_pose, dtype=float)


def moving_average(frames: np.ndarray, order: int = 20) -> np.ndarray:
    """Centred moving average along axis 0 with edge-shortened windows."""
    x = np.asarray(frames, dtype=float)
    if order <= 1:
        return x.copy()
    n = len(x)
    c = np.cumsum(np.concatenate([np.zeros((1,) + x.shape[1:]), x]), axis=0)
    lo = np.clip(np.arange(n) - order // 2, 0, n)
    hi = np.clip(lo + order, 0, n)
    lo = np.maximum(hi - order, 0)
    w = (hi - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    return (c[hi] - c[lo]) / w


def save_angles_csv(path, times, angles) -> None:
    """Write an angle series in degrees with a header row."""
    angles = np.asarray(angles, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", *JOINT_NAMES])
        for t, row in zip(times, np.degrees(angles)):
            w.writerow([f"{t:.9g}", *(f"{v:.12g}" for v in row)])


def load_angles_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (times, angles in radians)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if tuple(header[1:]) != JOINT_NAMES:
        raise ValueError(f"{path}: header does not list the {N_JOINTS} joint names")
    data = np.array(rows[1:], dtype=float).reshape(-1, N_JOINTS + 1)
    return data[:, 0], np.radians(data[:, 1:])
