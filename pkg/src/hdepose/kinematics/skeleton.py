"""Hand skeleton parameters, joint naming and rotation helpers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

FINGERS = ("index", "middle", "ring", "little")
FINGER_PREFIX = {"index": "IDX", "middle": "MID", "ring": "RNG", "little": "LIT"}
FINGER_DOF = ("alpha", "beta", "gamma", "delta", "epsilon")
THUMB_DOF = ("mp_flex", "mp_abd", "pip_flex", "pip_abd", "dip_flex", "dip_abd")

JOINT_NAMES: tuple[str, ...] = (
    ("wrist_x", "wrist_y", "wrist_z")
    + tuple(f"{f}_{d}" for f in FINGERS for d in FINGER_DOF)
    + tuple(f"thumb_{d}" for d in THUMB_DOF)
)
N_JOINTS = len(JOINT_NAMES)  # 29

WRIST = slice(0, 3)
THUMB = slice(23, 29)


def finger_slice(finger: str) -> slice:
    i = FINGERS.index(finger)
    return slice(3 + 5 * i, 8 + 5 * i)


HAND_MARKERS: tuple[str, ...] = (
    ("HAND",)
    + tuple(f"{FINGER_PREFIX[f]}{k}" for f in FINGERS for k in range(4))
    + tuple(f"THB{k}" for k in range(4))
)
TIP_MARKERS = ("IDX3", "MID3", "THB3")


def rot_x(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([o, z, z], -1),
                     np.stack([z, c, -s], -1),
                     np.stack([z, s, c], -1)], -2)


def rot_y(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([c, z, s], -1),
                     np.stack([z, o, z], -1),
                     np.stack([-s, z, c], -1)], -2)


def rot_z(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([c, -s, z], -1),
                     np.stack([s, c, z], -1),
                     np.stack([z, z, o], -1)], -2)


def rot_xyz(ax, ay, az):
    """Intrinsic x -> y -> z rotation, ``Rx(ax) @ Ry(ay) @ Rz(az)``."""
    return rot_x(ax) @ rot_y(ay) @ rot_z(az)


def decompose_xyz(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rot_xyz` for |ay| < pi/2."""
    R = np.asarray(R, dtype=float)
    ay = np.arcsin(np.clip(R[..., 0, 2], -1.0, 1.0))
    ax = np.arctan2(-R[..., 1, 2], R[..., 2, 2])
    az = np.arctan2(-R[..., 0, 1], R[..., 0, 0])
    return np.stack([ax, ay, az], -1)


@dataclass(frozen=True, eq=False)
class Plane:
    point: np.ndarray
    normal: np.ndarray

    def distance(self, p) -> np.ndarray:
        return (np.asarray(p, dtype=float) - self.point) @ self.normal


@dataclass(frozen=True, eq=False)
class Line:
    point: np.ndarray
    direction: np.ndarray


@dataclass(frozen=True, eq=False)
class Chain:
    """One finger or the thumb: base position, rest frame (columns e1, e2, e3), segment lengths."""

    base: np.ndarray
    frame: np.ndarray
    lengths: np.ndarray


@dataclass(frozen=True, eq=False)
class HandSkeleton:
    """Segment lengths, marker layout and reference planes of the 29-DoF hand model.

    All coordinates are in millimetres in the hand frame, whose origin is the
    wrist joint centre. With all joint angles at zero the hand frame coincides
    with the forearm (world) frame, so plane K lies on plane W and line k is
    parallel to line w.
    """

    name: str
    wrist_center: np.ndarray
    hand_marker: np.ndarray
    fingers: dict[str, Chain]
    thumb: Chain
    forearm_markers: dict[str, np.ndarray]
    body_markers: dict[str, np.ndarray]
    rom: np.ndarray  # (29, 2) radians
    gate_z0: float = 3.0
    gate_zs: float = 1.0
    rest_pose: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))

    def __post_init__(self):
        for name, ch in list(self.fingers.items()) + [("thumb", self.thumb)]:
            if np.any(ch.lengths <= 0):
                raise ValueError(f"{name}: segment lengths must be positive")
            if not np.allclose(ch.frame.T @ ch.frame, np.eye(3), atol=1e-12):
                raise ValueError(f"{name}: rest frame is not orthonormal")
        if self.rom.shape != (N_JOINTS, 2) or np.any(self.rom[:, 0] > self.rom[:, 1]):
            raise ValueError("rom must be a (29, 2) array of [low, high] bounds")

    @property
    def marker_labels(self) -> tuple[str, ...]:
        """Labels of the markers returned by the forward kinematics, in order."""
        return HAND_MARKERS + tuple(self.forearm_markers)

    @property
    def marker_offsets(self) -> dict[str, tuple[str, np.ndarray]]:
        """Attachment of each hand marker: (segment name, offset in that segment's frame)."""
        out = {"HAND": ("hand", self.hand_marker.copy())}
        for f, ch in self.fingers.items():
            p = FINGER_PREFIX[f]
            out[f"{p}0"] = ("hand", ch.base.copy())
            for k in range(3):
                out[f"{p}{k + 1}"] = (f"{f}_{k + 1}", np.array([ch.lengths[k], 0.0, 0.0]))
        out["THB0"] = ("hand", self.thumb.base.copy())
        for k in range(3):
            out[f"THB{k + 1}"] = (f"thumb_{k + 1}", np.array([self.thumb.lengths[k], 0.0, 0.0]))
        return out

    # reference planes and lines, hand frame
    @property
    def planes(self) -> dict[str, Plane]:
        w = Plane(np.zeros(3), np.array([0.0, 0.0, 1.0]))
        k = Plane(self.fingers["index"].base, self.fingers["index"].frame[:, 2])
        h = Plane(self.fingers["ring"].base, self.fingers["ring"].frame[:, 2])
        q = Plane(self.fingers["little"].base, self.fingers["little"].frame[:, 2])
        t = Plane(self.thumb.base, self.thumb.frame[:, 2])
        return {"W": w, "K": k, "H": h, "Q": q, "T": t}

    @property
    def lines(self) -> dict[str, Line]:
        return {
            "w": Line(np.zeros(3), np.array([0.0, 1.0, 0.0])),
            "k": Line(self.fingers["index"].base, self.fingers["index"].frame[:, 1]),
            "h": Line(self.fingers["ring"].base, self.fingers["ring"].frame[:, 1]),
            "q": Line(self.fingers["little"].base, self.fingers["little"].frame[:, 1]),
            "t": Line(self.thumb.base, self.thumb.frame[:, 2]),
        }

    def clamp(self, angles: np.ndarray) -> np.ndarray:
        return np.clip(angles, self.rom[:, 0], self.rom[:, 1])

    def in_rom(self, angles: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        a = np.asarray(angles, dtype=float)
        return np.all((a >= self.rom[:, 0] - tol) & (a <= self.rom[:, 1] + tol), axis=-1)

    def random_pose(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = (N_JOINTS,) if size is None else (size, N_JOINTS)
        return rng.uniform(self.rom[:, 0], self.rom[:, 1], size=shape)

    def to_dict(self) -> dict:
        def rest_deg(frame):
            return np.degrees(decompose_xyz(frame)).tolist()

        return {
            "name": self.name,
            "units": "mm, degrees",
            "wrist_center": self.wrist_center.tolist(),
            "hand_marker": self.hand_marker.tolist(),
            "fingers": {
                f: {"base": ch.base.tolist(), "rest_rotation_deg": rest_deg(ch.frame),
                    "lengths": ch.lengths.tolist()}
                for f, ch in self.fingers.items()
            },
            "thumb": {"base": self.thumb.base.tolist(), "rest_rotation_deg": rest_deg(self.thumb.frame),
                      "lengths": self.thumb.lengths.tolist()},
            "forearm_markers": {k: v.tolist() for k, v in self.forearm_markers.items()},
            "body_markers": {k: v.tolist() for k, v in self.body_markers.items()},
            "rom_deg": {
                "wrist": np.degrees(self.rom[WRIST]).tolist(),
                "finger": np.degrees(self.rom[finger_slice("index")]).tolist(),
                "thumb": np.degrees(self.rom[THUMB]).tolist(),
            },
            "sigmoid_gate_mm": {"z0": self.gate_z0, "zs": self.gate_zs},
        }


def _chain(d: dict) -> Chain:
    frame = rot_xyz(*np.radians(d["rest_rotation_deg"]))
    return Chain(np.asarray(d["base"], dtype=float), frame, np.asarray(d["lengths"], dtype=float))


def skeleton_from_dict(d: dict) -> HandSkeleton:
    fingers = {f: _chain(d["fingers"][f]) for f in FINGERS}
    rom_d = d["rom_deg"]
    rom = np.radians(np.vstack([rom_d["wrist"]] + [rom_d["finger"]] * 4 + [rom_d["thumb"]]))
    gate = d.get("sigmoid_gate_mm", {})
    return HandSkeleton(
        name=d.get("name", "custom"),
        wrist_center=np.asarray(d["wrist_center"], dtype=float),
        hand_marker=np.asarray(d["hand_marker"], dtype=float),
        fingers=fingers,
        thumb=_chain(d["thumb"]),
        forearm_markers={k: np.asarray(v, dtype=float) for k, v in d["forearm_markers"].items()},
        body_markers={k: np.asarray(v, dtype=float) for k, v in d.get("body_markers", {}).items()},
        rom=rom,
        gate_z0=float(gate.get("z0", 3.0)),
        gate_zs=float(gate.get("zs", 1.0)),
    )


def load_skeleton(path: str | Path | None = None) -> HandSkeleton:
    """Load a skeleton parameter file; ``None`` gives the shipped default."""
    if path is None:
        text = resources.files("hdepose.kinematics").joinpath("data/default_skeleton.json").read_text()
    else:
        text = Path(path).read_text()
    return skeleton_from_dict(json.loads(text))


def default_skeleton() -> HandSkeleton:
    return load_skeleton(None)
