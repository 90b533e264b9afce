"""Forward kinematics: 29 joint angles -> marker positions."""
from __future__ import annotations

import warnings

import numpy as np

from .skeleton import (
    FINGERS,
    N_JOINTS,
    THUMB,
    WRIST,
    HandSkeleton,
    finger_slice,
    rot_x,
    rot_y,
    rot_xyz,
    rot_z,
)


class KinematicsError(ValueError):
    pass


def finger_plane_frame(frame0: np.ndarray, alpha, beta) -> np.ndarray:
    """Flexion-plane frame of a finger: rest frame deviated by ``beta`` then pronated by ``alpha``."""
    return frame0 @ rot_z(beta) @ rot_x(alpha)


def finger_points(chain, angles5: np.ndarray) -> np.ndarray:
    """Joint centres and tip of one finger in the hand frame, shape (..., 4, 3).

    ``angles5`` holds (alpha, beta, gamma, delta, epsilon); flexion is a
    rotation about the plane frame's y axis that moves the segment towards -z.
    """
    a = np.asarray(angles5, dtype=float)
    P = finger_plane_frame(chain.frame, a[..., 0], a[..., 1])
    cum = np.cumsum(a[..., 2:5], axis=-1)
    pts = [np.broadcast_to(chain.base, a.shape[:-1] + (3,))]
    for k in range(3):
        seg = (P @ rot_y(cum[..., k]))[..., :, 0]
        pts.append(pts[-1] + chain.lengths[k] * seg)
    return np.stack(pts, axis=-2)


def thumb_frames(chain, angles6: np.ndarray) -> list[np.ndarray]:
    """Segment frames of the thumb; each joint is abduction (about z) then flexion (about y)."""
    a = np.asarray(angles6, dtype=float)
    R = np.broadcast_to(chain.frame, a.shape[:-1] + (3, 3))
    frames = []
    for k in range(3):
        R = R @ rot_z(a[..., 2 * k + 1]) @ rot_y(a[..., 2 * k])
        frames.append(R)
    return frames


def thumb_points(chain, angles6: np.ndarray) -> np.ndarray:
    a = np.asarray(angles6, dtype=float)
    pts = [np.broadcast_to(chain.base, a.shape[:-1] + (3,))]
    for k, R in enumerate(thumb_frames(chain, a)):
        pts.append(pts[-1] + chain.lengths[k] * R[..., :, 0])
    return np.stack(pts, axis=-2)


def hand_points(angles: np.ndarray, skeleton: HandSkeleton) -> np.ndarray:
    """The 21 hand markers in the hand frame (wrist rotation not applied)."""
    a = np.asarray(angles, dtype=float)
    lead = a.shape[:-1]
    parts = [np.broadcast_to(skeleton.hand_marker, lead + (1, 3))]
    for f in FINGERS:
        parts.append(finger_points(skeleton.fingers[f], a[..., finger_slice(f)]))
    parts.append(thumb_points(skeleton.thumb, a[..., THUMB]))
    return np.concatenate(parts, axis=-2)


def check_rom(angles: np.ndarray, skeleton: HandSkeleton, strict: bool) -> np.ndarray:
    a = np.asarray(angles, dtype=float)
    if a.shape[-1] != N_JOINTS:
        raise KinematicsError(f"expected {N_JOINTS} joint angles, got {a.shape[-1]}")
    if not np.all(np.isfinite(a)):
        raise KinematicsError("joint angles must be finite")
    if np.all(skeleton.in_rom(a, tol=1e-9)):
        return a
    if strict:
        raise KinematicsError("joint angles outside the configured range of motion")
    warnings.warn("joint angles outside range of motion were clamped", stacklevel=3)
    return skeleton.clamp(a)


def fka(angles: np.ndarray, skeleton: HandSkeleton, strict: bool = False) -> np.ndarray:
    """Marker positions (mm) for joint angles (rad).

    Args:
        angles: (29,) or (n, 29) joint angles.
        skeleton: hand model.
        strict: raise on out-of-range angles instead of clamping them.

    Returns:
        (M, 3) or (n, M, 3) positions ordered as ``skeleton.marker_labels``:
        21 hand markers then the fixed forearm markers.
    """
    return marker_positions(check_rom(angles, skeleton, strict), skeleton)


def marker_positions(a: np.ndarray, skeleton: HandSkeleton) -> np.ndarray:
    """Forward kinematics without range-of-motion checks."""
    a = np.asarray(a, dtype=float)
    R = rot_xyz(a[..., 0], a[..., 1], a[..., 2])
    local = hand_points(a, skeleton)
    world = skeleton.wrist_center + np.einsum("...ij,...mj->...mi", R, local)
    fore = np.array(list(skeleton.forearm_markers.values()), dtype=float).reshape(-1, 3)
    fore = np.broadcast_to(fore, a.shape[:-1] + fore.shape)
    return np.concatenate([world, fore], axis=-2)


def wrist_rotation(angles: np.ndarray) -> np.ndarray:
    a = np.asarray(angles, dtype=float)[..., WRIST]
    return rot_xyz(a[..., 0], a[..., 1], a[..., 2])
