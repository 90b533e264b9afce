"""Inverse kinematics: marker positions -> 29 joint angles.

Phase 1 (wrist) and phase 3 (thumb) are closed form. Phase 2 fits the
flexion plane of each finger with a bounded SQP search over (alpha, beta),
gates the plane angles by how far the finger markers are from a straight
line, then reads the three flexion angles in that plane.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .forward import KinematicsError, finger_plane_frame, finger_points, marker_positions
from .skeleton import (
    FINGER_PREFIX,
    FINGERS,
    HAND_MARKERS,
    N_JOINTS,
    THUMB,
    WRIST,
    Chain,
    HandSkeleton,
    decompose_xyz,
    finger_slice,
    rot_xyz,
    rot_y,
    rot_z,
)

MAX_EVALUATIONS = 500
FUNCTION_TOLERANCE = 1e-1  # mm^2, on the mean squared marker error
_COLLINEAR_RATIO = 1e-6


@dataclass
class FingerFit:
    angles: np.ndarray  # alpha, beta, gamma, delta, epsilon
    residual_mm: float
    zeta_mm: float
    gate: float
    n_evaluations: int
    converged: bool


@dataclass
class IkaResult:
    angles: np.ndarray
    residual_mm: float
    per_phase_residual: dict[str, float] = field(default_factory=dict)
    fingers: dict[str, FingerFit] = field(default_factory=dict)


def as_marker_dict(markers, skeleton: HandSkeleton) -> dict[str, np.ndarray]:
    if isinstance(markers, Mapping):
        return {k: np.asarray(v, dtype=float) for k, v in markers.items()}
    arr = np.asarray(markers, dtype=float)
    labels = skeleton.marker_labels
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < len(HAND_MARKERS):
        raise KinematicsError(f"marker frame must be (M, 3) with M >= {len(HAND_MARKERS)}, got {arr.shape}")
    return {lab: arr[i] for i, lab in enumerate(labels[: arr.shape[0]])}


def _require(md: dict[str, np.ndarray], labels) -> np.ndarray:
    out = []
    for lab in labels:
        p = md.get(lab)
        if p is None or p.shape != (3,) or not np.all(np.isfinite(p)):
            raise KinematicsError(f"missing marker {lab}")
        out.append(p)
    return np.array(out)


def _k_frame(hand, idx0, mid0) -> np.ndarray:
    ey = idx0 - mid0
    ez = np.cross(mid0 - hand, idx0 - hand)
    ny, nz = np.linalg.norm(ey), np.linalg.norm(ez)
    if ny < 1e-9 or nz < 1e-9 * max(1.0, np.linalg.norm(mid0 - hand) * np.linalg.norm(idx0 - hand)):
        raise KinematicsError("degenerate (collinear) wrist marker configuration")
    ey, ez = ey / ny, ez / nz
    return np.column_stack([np.cross(ey, ez), ey, ez])


def ika_wrist(markers, skeleton: HandSkeleton) -> np.ndarray:
    """Wrist angles (x, y, z) aligning plane K / line k with plane W / line w."""
    md = as_marker_dict(markers, skeleton)
    hand, idx0, mid0 = _require(md, ("HAND", "IDX0", "MID0"))
    ref = _k_frame(skeleton.hand_marker, skeleton.fingers["index"].base, skeleton.fingers["middle"].base)
    obs = _k_frame(hand, idx0, mid0)
    return decompose_xyz(obs @ ref.T)


def _inner_flexion(q: np.ndarray) -> np.ndarray:
    """gamma, delta, epsilon from marker coordinates (4, 3) expressed in the flexion-plane frame."""
    v = np.diff(q, axis=0)
    phi = np.arctan2(-v[:, 2], v[:, 0])
    return np.array([phi[0], phi[1] - phi[0], phi[2] - phi[1]])


def _finger_error(chain: Chain, pts: np.ndarray, ab) -> tuple[float, np.ndarray]:
    P = finger_plane_frame(chain.frame, ab[0], ab[1])
    gde = _inner_flexion((pts - pts[0]) @ P)
    a5 = np.concatenate([ab, gde])
    rec = finger_points(Chain(pts[0], chain.frame, chain.lengths), a5)
    err = np.linalg.norm(rec[1:] - pts[1:], axis=1)
    return float(np.mean(err ** 2)), a5


def principal_line_distance(pts: np.ndarray) -> float:
    """Mean distance of points from their principal direction through the centroid."""
    c = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(c)
    d = vt[0]
    perp = c - np.outer(c @ d, d)
    return float(np.mean(np.linalg.norm(perp, axis=1)))


def _initial_plane(chain: Chain, pts: np.ndarray) -> np.ndarray:
    local = (pts - pts[0]) @ chain.frame
    c = local - local.mean(axis=0)
    _, s, vt = np.linalg.svd(c)
    if s[1] > _COLLINEAR_RATIO * s[0]:
        n = vt[2] if vt[2][1] >= 0 else -vt[2]
        alpha = np.arcsin(np.clip(n[2], -1.0, 1.0))
        beta = np.arctan2(-n[0], n[1])
    else:
        d = vt[0] if vt[0][0] >= 0 else -vt[0]
        alpha, beta = 0.0, np.arctan2(d[1], d[0])
    return np.array([alpha, beta])


class _BudgetExhausted(Exception):
    pass


def _budgeted_sqp(fun, x0, bounds, max_evaluations, ftol):
    best = {"f": np.inf, "x": np.asarray(x0, dtype=float)}
    count = 0

    def wrapped(x):
        nonlocal count
        if count >= max_evaluations:
            raise _BudgetExhausted
        count += 1
        f = fun(x)
        if f < best["f"]:
            best["f"], best["x"] = f, np.array(x, dtype=float)
        return f

    try:
        res = minimize(wrapped, x0, method="SLSQP", bounds=bounds,
                       options={"maxiter": max_evaluations, "ftol": ftol})
        converged = bool(res.success)
    except _BudgetExhausted:
        converged = False
    return best["x"], best["f"], count, converged


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def ika_finger(markers, skeleton: HandSkeleton, finger: str, *, hand_frame: bool = False,
               max_evaluations: int = MAX_EVALUATIONS, ftol: float = FUNCTION_TOLERANCE) -> FingerFit:
    """Solve (alpha, beta, gamma, delta, epsilon) for one finger.

    ``markers`` are world-frame unless ``hand_frame`` is set, in which case
    the wrist rotation is assumed already removed.
    """
    if finger not in FINGERS:
        raise KinematicsError(f"unknown finger {finger!r}")
    md = as_marker_dict(markers, skeleton)
    if not hand_frame:
        md = to_hand_frame(md, skeleton)
    p = FINGER_PREFIX[finger]
    pts = _require(md, [f"{p}{k}" for k in range(4)])
    chain = skeleton.fingers[finger]
    rom = skeleton.rom[finger_slice(finger)]
    bounds = [tuple(rom[0]), tuple(rom[1])]

    x0 = np.clip(_initial_plane(chain, pts), rom[:2, 0], rom[:2, 1])
    ab, _, nfev, converged = _budgeted_sqp(lambda x: _finger_error(chain, pts, x)[0], x0, bounds,
                                           max_evaluations, ftol)
    zeta = principal_line_distance(pts)
    gate = float(sigmoid((zeta - skeleton.gate_z0) / skeleton.gate_zs))
    f, a5 = _finger_error(chain, pts, ab * gate)
    return FingerFit(a5, float(np.sqrt(f)), zeta, gate, nfev, converged)


def _direction_angles(d: np.ndarray) -> tuple[float, float]:
    """(flexion, abduction) such that Rz(abd) @ Ry(flex) @ x_hat is parallel to d."""
    d = d / np.linalg.norm(d)
    return float(np.arcsin(np.clip(-d[2], -1.0, 1.0))), float(np.arctan2(d[1], d[0]))


def ika_thumb(markers, skeleton: HandSkeleton, *, hand_frame: bool = False) -> np.ndarray:
    """Six thumb angles (mp/pip/dip flexion and abduction), closed form."""
    md = as_marker_dict(markers, skeleton)
    if not hand_frame:
        md = to_hand_frame(md, skeleton)
    pts = _require(md, [f"THB{k}" for k in range(4)])
    seg = np.diff(pts, axis=0)
    if np.any(np.linalg.norm(seg, axis=1) < 1e-9):
        raise KinematicsError("degenerate thumb marker configuration")
    R = skeleton.thumb.frame
    out = np.zeros(6)
    for k in range(3):
        flex, abd = _direction_angles(R.T @ seg[k])
        out[2 * k], out[2 * k + 1] = flex, abd
        R = R @ rot_z(abd) @ rot_y(flex)
    return out


def to_hand_frame(md: dict[str, np.ndarray], skeleton: HandSkeleton) -> dict[str, np.ndarray]:
    """Remove the wrist rotation from every hand marker."""
    R = rot_xyz(*ika_wrist(md, skeleton))
    return {k: (R.T @ (v - skeleton.wrist_center)) if k in HAND_MARKERS else v for k, v in md.items()}


def ika(frame, skeleton: HandSkeleton, **opts) -> IkaResult:
    """Full three-phase solve for one frame of markers."""
    md = as_marker_dict(frame, skeleton)
    _require(md, HAND_MARKERS)
    angles = np.zeros(N_JOINTS)
    angles[WRIST] = ika_wrist(md, skeleton)
    local = to_hand_frame(md, skeleton)
    fits = {}
    for f in FINGERS:
        fits[f] = ika_finger(local, skeleton, f, hand_frame=True, **opts)
        angles[finger_slice(f)] = fits[f].angles
    angles[THUMB] = ika_thumb(local, skeleton, hand_frame=True)

    rec = marker_positions(angles, skeleton)
    obs = _require(md, HAND_MARKERS)
    err = np.linalg.norm(rec[: len(HAND_MARKERS)] - obs, axis=1)
    idx = {lab: i for i, lab in enumerate(HAND_MARKERS)}
    rigid = [idx[m] for m in ("HAND", "IDX0", "MID0", "RNG0", "LIT0", "THB0")]
    finger_idx = [idx[f"{FINGER_PREFIX[f]}{k}"] for f in FINGERS for k in (1, 2, 3)]
    thumb_idx = [idx[f"THB{k}"] for k in (1, 2, 3)]
    phases = {
        "wrist": float(err[rigid].mean()),
        "fingers": float(err[finger_idx].mean()),
        "thumb": float(err[thumb_idx].mean()),
    }
    return IkaResult(angles, float(err.mean()), phases, fits)


def ika_series(frames: np.ndarray, skeleton: HandSkeleton, **opts) -> tuple[np.ndarray, np.ndarray]:
    """Solve every frame of an (n, M, 3) marker array; returns angles (n, 29) and residuals (n,)."""
    frames = np.asarray(frames, dtype=float)
    angles = np.empty((len(frames), N_JOINTS))
    resid = np.empty(len(frames))
    for i, fr in enumerate(frames):
        r = ika(fr, skeleton, **opts)
        angles[i], resid[i] = r.angles, r.residual_mm
    return angles, resid
