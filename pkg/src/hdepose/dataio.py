"""Recording containers, on-disk formats, stream alignment and the seeded synthetic generator.

EMG is stored as a little-endian integer matrix (``.bin``, row-major, n x C)
next to a JSON sidecar holding the acquisition constants. Markers and joint
angles are CSV with a header row.
"""
from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kinematics import N_JOINTS, HandSkeleton, default_skeleton, fka

EMG_FS = 2048.0
EMG_GAIN = 192.0
EMG_BITS = 16
EMG_VRANGE = 2.4
MARKER_FS = 100.0

# slide (samples) used for each prompt duration (s)
SLIDE_FOR_PROMPT = {8.0: 25, 7.0: 29, 6.0: 33}
VALID_SLIDES = tuple(SLIDE_FOR_PROMPT.values())

CACHE_ENV = "HDEPOSE_DATA_DIR"
SIDECAR_FORMAT = "hdepose-emg"

_CHUNK = 8  # channels synthesised per block; part of the seed contract

GRID_SELECTIONS = ("32x2", "16x4", "16x2", "32x1-proximal", "32x1-distal")


class DataError(ValueError):
    pass


def data_cache_dir() -> Path:
    """Directory for downloaded or converted datasets (``$HDEPOSE_DATA_DIR`` or ~/.cache/hdepose)."""
    env = os.environ.get(CACHE_ENV)
    return Path(env).expanduser() if env else Path.home() / ".cache" / "hdepose"


def _default_channel_map(grid) -> tuple[tuple[int, int], ...]:
    rows, cols = grid
    return tuple((c // cols, c % cols) for c in range(rows * cols))


def default_grid(n_channels: int) -> tuple[int, int]:
    """Electrode layout (rows, cols) used when none is given."""
    known = {64: (2, 32), 32: (1, 32), 96: (6, 16), 16: (1, 16)}
    return known.get(n_channels, (1, n_channels))


@dataclass(frozen=True, eq=False)
class EmgRecording:
    """Raw ADC counts plus acquisition constants.

    ``start_index`` is the sample of the synchronisation event; sample k
    has time (k - start_index) / fs.
    """
    samples: np.ndarray
    fs: float = EMG_FS
    gain: float = EMG_GAIN
    bits: int = EMG_BITS
    v_range: float = EMG_VRANGE
    grid: tuple[int, int] | None = None
    channel_map: tuple[tuple[int, int], ...] | None = None
    start_index: int = 0

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 2:
            raise DataError("samples must be an n x C matrix")
        if not np.issubdtype(s.dtype, np.integer):
            raise DataError("samples must be integer ADC counts")
        if not self.fs > 0 or not self.gain > 0 or not self.v_range > 0:
            raise DataError("fs, gain and v_range must be positive")
        if not 1 <= int(self.bits) <= 32:
            raise DataError(f"unsupported bit depth {self.bits}")
        lo, hi = -(2 ** (self.bits - 1)), 2 ** (self.bits - 1) - 1
        if s.size and (s.min() < lo or s.max() > hi):
            raise DataError(f"sample overflow: values outside [{lo}, {hi}] for {self.bits}-bit data")
        grid = tuple(int(g) for g in (self.grid or default_grid(s.shape[1])))
        if grid[0] * grid[1] != s.shape[1]:
            raise DataError(f"grid {grid} does not match {s.shape[1]} channels")
        cmap = self.channel_map or _default_channel_map(grid)
        cmap = tuple((int(r), int(c)) for r, c in cmap)
        if len(cmap) != s.shape[1] or len(set(cmap)) != len(cmap) or any(
                not (0 <= r < grid[0] and 0 <= c < grid[1]) for r, c in cmap):
            raise DataError("channel map must place every channel on a distinct grid cell")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "channel_map", cmap)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def volts_per_count(self) -> float:
        return self.v_range / 2 ** self.bits / self.gain

    def volts(self) -> np.ndarray:
        return self.samples.astype(float) * self.volts_per_count

    def times(self) -> np.ndarray:
        return (np.arange(self.n_samples) - self.start_index) / self.fs

    def meta(self) -> dict:
        return {"fs": self.fs, "gain": self.gain, "bits": self.bits, "v_range": self.v_range,
                "grid": list(self.grid), "channel_map": [list(rc) for rc in self.channel_map],
                "start_index": self.start_index}

    def channel_grid_index(self) -> np.ndarray:
        """(rows, cols) array holding the channel index at each electrode."""
        idx = np.full(self.grid, -1, dtype=int)
        for ch, (r, c) in enumerate(self.channel_map):
            idx[r, c] = ch
        return idx


@dataclass(frozen=True, eq=False)
class MarkerTrajectory:
    frames: np.ndarray  # (m, M, 3) mm
    labels: tuple[str, ...]
    fs: float = MARKER_FS
    start_frame: int = 0

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=float)
        labels = tuple(self.labels)
        if f.ndim != 3 or f.shape[2] != 3 or f.shape[1] != len(labels):
            raise DataError("frames must be m x M x 3 with one label per marker")
        if len(set(labels)) != len(labels):
            raise DataError("marker labels must be unique")
        if not self.fs > 0:
            raise DataError("fs must be positive")
        if np.isinf(f).any():
            raise DataError("marker coordinates must be finite (NaN marks a missing marker)")
        object.__setattr__(self, "frames", f)
        object.__setattr__(self, "labels", labels)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def times(self) -> np.ndarray:
        return (np.arange(self.n_frames) - self.start_frame) / self.fs

    def select(self, labels) -> np.ndarray:
        """Frames restricted to (and ordered as) ``labels``."""
        pos = {lab: i for i, lab in enumerate(self.labels)}
        missing = [lab for lab in labels if lab not in pos]
        if missing:
            raise DataError(f"missing markers: {', '.join(missing)}")
        return self.frames[:, [pos[lab] for lab in labels]]


@dataclass(frozen=True, eq=False)
class AlignedDataset:
    envelope: np.ndarray
    angles_norm: np.ndarray
    timestamps: np.ndarray
    prompt_schedule: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        env = np.asarray(self.envelope, dtype=float)
        ang = np.asarray(self.angles_norm, dtype=float)
        ts = np.asarray(self.timestamps, dtype=float)
        if env.ndim != 2 or ang.ndim != 2 or len(env) != len(ang) or len(ts) != len(env):
            raise DataError("envelope, angles and timestamps must share the row count")
        if ang.shape[1] != N_JOINTS:
            raise DataError(f"angles must have {N_JOINTS} columns")
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            raise DataError("timestamps must be strictly increasing")
        object.__setattr__(self, "envelope", env)
        object.__setattr__(self, "angles_norm", ang)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prompt_schedule",
                           tuple((int(p), float(s), float(d)) for p, s, d in self.prompt_schedule))

    def __len__(self):
        return len(self.timestamps)

    def rows(self, sl) -> "AlignedDataset":
        return AlignedDataset(self.envelope[sl], self.angles_norm[sl], self.timestamps[sl], self.prompt_schedule)


# ---- EMG binary + sidecar ---------------------------------------------

def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_emg(path, rec: EmgRecording) -> Path:
    """Write ``rec`` as ``path`` (.bin) and its JSON sidecar. Returns the sidecar path."""
    path = Path(path)
    dtype = "<i2" if rec.bits <= 16 else "<i4"
    rec.samples.astype(dtype).tofile(path)
    meta = {"format": SIDECAR_FORMAT, "version": 1, "dtype": dtype,
            "n_channels": rec.n_channels, "n_samples": rec.n_samples, **rec.meta()}
    side = _sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def load_emg(path, meta: dict | None = None) -> EmgRecording:
    """Read a binary EMG matrix.

    Constants come from the sidecar next to ``path``; entries in ``meta``
    override them (``meta`` alone suffices when no sidecar exists, but it must
    then give ``n_channels``).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such EMG file: {path}")
    side = _sidecar_path(path)
    info = json.loads(side.read_text()) if side.is_file() else {}
    if meta:
        if "n_channels" in meta and "n_channels" in info and int(meta["n_channels"]) != int(info["n_channels"]):
            raise DataError(f"column-count mismatch: sidecar has {info['n_channels']}, "
                            f"caller declared {meta['n_channels']}")
        info.update(meta)
    if "n_channels" not in info:
        raise DataError(f"{path}: channel count unknown (no sidecar and no meta)")
    dtype = np.dtype(info.get("dtype", "<i2"))
    C = int(info["n_channels"])
    raw = np.fromfile(path, dtype=dtype)
    if raw.size % C:
        raise DataError(f"column-count mismatch: {raw.size} values do not fill rows of {C} channels")
    grid = info.get("grid")
    cmap = info.get("channel_map")
    return EmgRecording(
        samples=raw.reshape(-1, C),
        fs=float(info.get("fs", EMG_FS)),
        gain=float(info.get("gain", EMG_GAIN)),
        bits=int(info.get("bits", EMG_BITS)),
        v_range=float(info.get("v_range", EMG_VRANGE)),
        grid=tuple(grid) if grid else None,
        channel_map=tuple(tuple(rc) for rc in cmap) if cmap else None,
        start_index=int(info.get("start_index", 0)),
    )


def import_emg_table(path, n_channels: int, channel_map=None, grid=None, delimiter=None,
                     skip_header: int = 0, **meta) -> EmgRecording | None:
    """Convert a delimited text table of ADC counts into a recording.

    Intended for externally published recordings whose channel ordering is
    not known in advance; the caller supplies ``channel_map``. Failures are
    reported as warnings and return None.
    """
    try:
        arr = np.loadtxt(path, delimiter=delimiter, skiprows=skip_header, ndmin=2)
        if arr.shape[1] != n_channels:
            raise DataError(f"expected {n_channels} columns, found {arr.shape[1]}")
        if not np.all(arr == np.round(arr)):
            raise DataError("table holds non-integer values; expected ADC counts")
        return EmgRecording(arr.astype(np.int64), grid=grid, channel_map=channel_map, **meta)
    except (OSError, ValueError) as exc:
        warnings.warn(f"could not import {path}: {exc}", stacklevel=2)
        return None


# ---- marker CSV ---------------------------------------------------------

def save_markers_csv(path, traj: MarkerTrajectory) -> None:
    header = ["time_s"] + [f"{lab}_{ax}" for lab in traj.labels for ax in "xyz"]
    flat = traj.frames.reshape(traj.n_frames, -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in zip(traj.times(), flat):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])


def load_markers_csv(path, fs: float | None = None) -> MarkerTrajectory:
    """Read a marker CSV. ``fs`` defaults to the rate implied by the time column."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if header[0] != "time_s" or (len(header) - 1) % 3:
        raise DataError(f"{path}: malformed marker header")
    labels = [h[:-2] for h in header[1::3]]
    if any(header[1 + 3 * i + k] != f"{lab}_{ax}" for i, lab in enumerate(labels) for k, ax in enumerate("xyz")):
        raise DataError(f"{path}: marker columns must come in _x, _y, _z triples")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(header))
    t = data[:, 0]
    if fs is None:
        if len(t) < 2:
            raise DataError("cannot infer the frame rate from a single frame")
        fs = round(1.0 / float(np.median(np.diff(t))), 6)
    start = int(round(-t[0] * fs)) if len(t) else 0
    return MarkerTrajectory(data[:, 1:].reshape(len(t), -1, 3), tuple(labels), fs=fs, start_frame=start)


# ---- alignment ----------------------------------------------------------

def slide_for_prompt(duration_s: float) -> int:
    try:
        return SLIDE_FOR_PROMPT[float(duration_s)]
    except KeyError:
        raise DataError(f"no slide defined for {duration_s} s prompts") from None


def align(envelope, angles: np.ndarray, angle_times: np.ndarray, rest_pose=None,
          prompt_schedule=()) -> AlignedDataset:
    """Interpolate joint angles onto envelope window centres.

    ``envelope`` is an ``emgproc.EmgEnvelope`` (values, times, slide). Windows
    whose centre falls outside the angle series are dropped rather than
    extrapolated.
    """
    from .kinematics import normalize_angles

    if envelope.slide not in VALID_SLIDES:
        warnings.warn(f"slide {envelope.slide} is not one of {VALID_SLIDES}", stacklevel=2)
    angles = np.asarray(angles, dtype=float)
    at = np.asarray(angle_times, dtype=float)
    if angles.shape != (len(at), N_JOINTS):
        raise DataError("angles must be (len(angle_times), 29)")
    if len(at) < 2 or np.any(np.diff(at) <= 0):
        raise DataError("angle times must be strictly increasing with at least two frames")
    et = np.asarray(envelope.times, dtype=float)
    keep = (et >= at[0]) & (et <= at[-1])
    if not keep.any():
        raise DataError("EMG and marker streams do not overlap in time")
    if not keep.all():
        warnings.warn(f"dropped {int((~keep).sum())} envelope rows outside the marker time range", stacklevel=2)
    tq = et[keep]
    interp = np.column_stack([np.interp(tq, at, angles[:, j]) for j in range(N_JOINTS)])
    rest = np.zeros(N_JOINTS) if rest_pose is None else rest_pose
    return AlignedDataset(envelope.values[keep], normalize_angles(interp, rest), tq, prompt_schedule)


# ---- electrode subsets --------------------------------------------------

def select_grid(rec: EmgRecording, selection: str) -> np.ndarray:
    """Channel indices retained by an electrode-layout selection.

    Layouts are named columns x rows. ``16x2`` keeps alternate columns of a
    32-column grid, or alternate rows of a 4-row grid.
    """
    idx = rec.channel_grid_index()
    rows, cols = rec.grid
    if selection not in GRID_SELECTIONS:
        raise DataError(f"unknown grid selection {selection!r}; choose from {GRID_SELECTIONS}")
    if selection in ("32x2", "16x4"):
        want = tuple(int(v) for v in selection.split("x"))
        if (cols, rows) != want:
            raise DataError(f"selection {selection} needs a {want[0]}x{want[1]} grid, recording is {cols}x{rows}")
        sub = idx
    elif selection == "16x2":
        if (cols, rows) == (32, 2):
            sub = idx[:, ::2]
        elif (cols, rows) == (16, 4):
            sub = idx[::2, :]
        else:
            raise DataError(f"16x2 selection needs a 32x2 or 16x4 grid, recording is {cols}x{rows}")
    else:
        if (cols, rows) != (32, 2):
            raise DataError(f"{selection} needs a 32x2 grid, recording is {cols}x{rows}")
        sub = idx[:1] if selection.endswith("proximal") else idx[1:]
    return np.sort(sub.ravel())


def subset_recording(rec: EmgRecording, channels) -> EmgRecording:
    channels = np.asarray(channels, dtype=int)
    cells = [rec.channel_map[c] for c in channels]
    rows = sorted({r for r, _ in cells})
    cols = sorted({c for _, c in cells})
    rpos = {r: i for i, r in enumerate(rows)}
    cpos = {c: i for i, c in enumerate(cols)}
    grid = (len(rows), len(cols))
    cmap = tuple((rpos[r], cpos[c]) for r, c in cells)
    if grid[0] * grid[1] != len(channels):
        grid, cmap = (1, len(channels)), None
    return EmgRecording(rec.samples[:, channels], rec.fs, rec.gain, rec.bits, rec.v_range,
                        grid, cmap, rec.start_index)


# ---- synthetic generator ------------------------------------------------

@dataclass(frozen=True, eq=False)
class SynthConfig:
    seed: int = 0
    duration_s: float = 300.0
    n_channels: int = 64
    n_joints: int = N_JOINTS
    mixing: np.ndarray | None = None  # (C, 29); default drawn from the seed
    noise_std: float = 0.05
    line_hum_50hz_ampl: float = 0.0  # V at the electrode
    grid: tuple[int, int] | None = None
    emg_fs: float = EMG_FS
    marker_fs: float = MARKER_FS
    n_sinusoids: int = 5
    freq_band: tuple[float, float] = (0.1, 1.0)
    amplitude_fraction: float = 0.8
    active_joints: tuple[int, ...] | None = None  # None: all joints move
    emg_scale_v: float = 1e-4
    prompt_s: float = 8.0
    n_poses: int = 16
    control_fs: float = 256.0
    speed_tau_s: float = 0.1  # weight of |dtheta/dt| in the activation, seconds

    def __post_init__(self):
        if not self.duration_s > 0:
            raise DataError("duration_s must be positive")
        if self.n_joints != N_JOINTS:
            raise DataError(f"the hand model has {N_JOINTS} joints")
        if not self.speed_tau_s >= 0:
            raise DataError("speed_tau_s must be non-negative")
        if not 1 <= self.n_sinusoids <= 5:
            raise DataError("n_sinusoids must be between 1 and 5")
        lo, hi = self.freq_band
        if not 0 < lo <= hi < self.control_fs / 2:
            raise DataError("invalid frequency band")
        if self.mixing is not None:
            m = np.asarray(self.mixing, dtype=float)
            if m.shape != (self.n_channels, self.n_joints):
                raise DataError(f"mixing must be {self.n_channels} x {self.n_joints}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise DataError("mixing entries must be finite")
            object.__setattr__(self, "mixing", m)


def default_mixing(n_channels: int, rng: np.random.Generator, n_joints: int = N_JOINTS,
                   crosstalk: int = 2) -> np.ndarray:
    """Sparse non-negative mixing: one primary joint per channel plus weak cross-talk."""
    m = np.zeros((n_channels, n_joints))
    for c in range(n_channels):
        m[c, c % n_joints] = rng.uniform(0.6, 1.0)
        others = rng.choice(np.delete(np.arange(n_joints), c % n_joints), crosstalk, replace=False)
        m[c, others] = rng.uniform(0.0, 0.2, crosstalk)
    return m


def grid_mixing(grid: tuple[int, int], rng: np.random.Generator, n_joints: int = N_JOINTS,
                row_jitter: float = 0.05) -> np.ndarray:
    """Mixing for a rows x cols array (channels row-major) whose columns see different muscles.

    Every column draws its own sparse joint profile; channels down a column
    share it up to a multiplicative jitter, so activity varies far more
    around the circumference than along the forearm.
    """
    rows, cols = grid
    col_profiles = default_mixing(cols, rng, n_joints)
    gain = 1.0 + row_jitter * rng.standard_normal((rows, cols))
    m = np.empty((rows * cols, n_joints))
    for r in range(rows):
        for c in range(cols):
            m[r * cols + c] = np.clip(gain[r, c], 0.0, None) * col_profiles[c]
    return m


def prompt_schedule(duration_s: float, prompt_s: float = 8.0, n_poses: int = 16):
    out, t, k = [], 0.0, 0
    while t < duration_s - 1e-9:
        out.append((k % n_poses, t, min(prompt_s, duration_s - t)))
        t += prompt_s
        k += 1
    return tuple(out)


def joint_trajectories(cfg: SynthConfig, skeleton: HandSkeleton, rng: np.random.Generator):
    """Smooth one-sided sinusoid mixtures per joint.

    Each joint moves on one side of its rest angle only, so |theta - rest|
    stays a monotone function of theta. Returns a callable t -> (theta, dtheta/dt).
    """
    rest = skeleton.rest_pose
    lo, hi = skeleton.rom[:, 0], skeleton.rom[:, 1]
    up, down = hi - rest, rest - lo
    side = np.where(up > down, 1.0, np.where(up < down, -1.0, rng.choice([-1.0, 1.0], N_JOINTS)))
    span = cfg.amplitude_fraction * np.maximum(up, down)
    active = np.ones(N_JOINTS, bool)
    if cfg.active_joints is not None:
        active[:] = False
        active[list(cfg.active_joints)] = True
    K = cfg.n_sinusoids
    freqs = rng.uniform(*cfg.freq_band, (N_JOINTS, K))
    phases = rng.uniform(0, 2 * np.pi, (N_JOINTS, K))
    w = rng.uniform(0.2, 1.0, (N_JOINTS, K))
    w /= w.sum(axis=1, keepdims=True)
    gain = np.where(active, side * span * 0.5, 0.0)

    def at(t):
        t = np.asarray(t, dtype=float)[:, None, None]
        arg = 2 * np.pi * freqs * t + phases
        u = (w * np.sin(arg)).sum(-1)
        du = (w * 2 * np.pi * freqs * np.cos(arg)).sum(-1)
        theta = rest + gain * (1.0 + u)
        dtheta = gain * du
        clipped = (theta < lo) | (theta > hi)
        return np.clip(theta, lo, hi), np.where(clipped, 0.0, dtheta)

    return at


def band_limited_noise(rng: np.random.Generator, n: int, n_channels: int, fs: float,
                       band=(10.0, 500.0)) -> np.ndarray:
    """Zero-mean, unit-variance Gaussian noise with an ideal FFT band-pass."""
    f = np.fft.rfftfreq(n, 1.0 / fs)
    spec = np.fft.rfft(rng.standard_normal((n, n_channels)), axis=0)
    spec[(f < band[0]) | (f > band[1])] = 0.0
    x = np.fft.irfft(spec, n, axis=0)
    x -= x.mean(axis=0)
    return x / x.std(axis=0)


def quantize(volts: np.ndarray, gain=EMG_GAIN, bits=EMG_BITS, v_range=EMG_VRANGE) -> np.ndarray:
    counts = np.round(volts * gain * 2 ** bits / v_range)
    lo, hi = -(2 ** (bits - 1)), 2 ** (bits - 1) - 1
    if counts.min(initial=0) < lo or counts.max(initial=0) > hi:
        warnings.warn("synthetic EMG saturated the ADC range; values clipped", stacklevel=2)
        counts = np.clip(counts, lo, hi)
    return counts.astype(np.int16 if bits <= 16 else np.int32)


def activation(theta, dtheta, mixing, rest, tau: float = 1.0) -> np.ndarray:
    """max(0, M |tau dtheta/dt| + M |theta - rest|), one column per channel.

    ``tau`` (s) sets the speed term's weight; tau = 1 is the plain sum.
    """
    return np.maximum(0.0, np.abs(tau * dtheta) @ mixing.T + np.abs(theta - rest) @ mixing.T)


@dataclass(frozen=True, eq=False)
class SynthData:
    emg: EmgRecording
    markers: MarkerTrajectory
    angles: np.ndarray  # (m, 29) rad at the marker rate
    angle_times: np.ndarray
    schedule: tuple
    mixing: np.ndarray


def generate_synthetic(cfg: SynthConfig, skeleton: HandSkeleton | None = None) -> SynthData:
    """Deterministic synthetic EMG, markers and joint angles sharing one time base."""
    skeleton = skeleton or default_skeleton()
    ss = np.random.SeedSequence(cfg.seed)
    r_mix, r_traj, r_car, r_bg = (np.random.default_rng(s) for s in ss.spawn(4))
    mixing = cfg.mixing if cfg.mixing is not None else default_mixing(cfg.n_channels, r_mix)
    traj = joint_trajectories(cfg, skeleton, r_traj)

    m = int(round(cfg.duration_s * cfg.marker_fs))
    mt = np.arange(m) / cfg.marker_fs
    angles, _ = traj(mt)
    hand = fka(angles, skeleton, strict=True)
    body = np.array(list(skeleton.body_markers.values()), dtype=float)
    frames = np.concatenate([hand, np.broadcast_to(body, (m,) + body.shape)], axis=1)
    labels = skeleton.marker_labels + tuple(skeleton.body_markers)
    markers = MarkerTrajectory(frames, labels, fs=cfg.marker_fs)

    n = int(round(cfg.duration_s * cfg.emg_fs))
    et = np.arange(n) / cfg.emg_fs
    ct = np.arange(int(np.ceil(cfg.duration_s * cfg.control_fs)) + 1) / cfg.control_fs
    th, dth = traj(ct)
    act_ctrl = activation(th, dth, mixing, skeleton.rest_pose, cfg.speed_tau_s)
    hum = cfg.line_hum_50hz_ampl * np.sin(2 * np.pi * 50.0 * et) if cfg.line_hum_50hz_ampl else 0.0
    counts = np.empty((n, cfg.n_channels), dtype=np.int16)
    for c0 in range(0, cfg.n_channels, _CHUNK):
        c1 = min(cfg.n_channels, c0 + _CHUNK)
        carrier = band_limited_noise(r_car, n, c1 - c0, cfg.emg_fs)
        background = band_limited_noise(r_bg, n, c1 - c0, cfg.emg_fs)
        a = np.column_stack([np.interp(et, ct, act_ctrl[:, c]) for c in range(c0, c1)])
        volts = cfg.emg_scale_v * (a * carrier + cfg.noise_std * background)
        counts[:, c0:c1] = quantize(volts + np.reshape(hum, (-1, 1)) if cfg.line_hum_50hz_ampl else volts)
    emg = EmgRecording(counts, fs=cfg.emg_fs, grid=cfg.grid or default_grid(cfg.n_channels))
    return SynthData(emg, markers, angles, mt, prompt_schedule(cfg.duration_s, cfg.prompt_s, cfg.n_poses),
                     mixing)
