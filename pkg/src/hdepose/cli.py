"""Command-line entry point: ``hdepose <subcommand> [--config file.json] [flags]``.

Every subcommand writes its artifacts plus ``manifest.json`` (configuration,
seed, library versions and a SHA-256 of each output) into ``--out``. Timing
goes to ``timing.log`` only, so CSV/JSON outputs are reproducible byte for byte.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__, stats
from .dataio import (
    DataError,
    SynthConfig,
    align,
    default_grid,
    generate_synthetic,
    grid_mixing,
    load_emg,
    load_markers_csv,
    save_emg,
    save_markers_csv,
    select_grid,
    slide_for_prompt,
    subset_recording,
)
from .emgproc import EmgEnvelope, EmgProcError, Standardizer, ndv, ndv_compare, rms_envelope
from .estimator import (
    EstimatorError,
    ModelWeights,
    NetworkConfig,
    TrainHyper,
    butterworth_lowpass,
    infer,
    load_checkpoint,
    postprocess,
    save_checkpoint,
    save_loss_csv,
    split_train_test,
    train,
)
from .evalspm import EvalError, cjd, cmcjd, performance, segment_movements, spm_one_sample_t
from .impedance import (
    AMP_INPUT_IMPEDANCE_OHM,
    ELECTRODE_AREA_CM2,
    ImpedanceError,
    aggregate_bode,
    compare_emg,
    divider_attenuation,
    fit_rc,
    load_impedance_csv,
    normalize_by_area,
    per_interface,
    rc_impedance,
    save_impedance_csv,
    spectrogram,
    synthetic_spectra,
)
from .kinematics import JOINT_NAMES, N_JOINTS, KinematicsError, default_skeleton, ika_series, load_angles_csv
from .kinematics import save_angles_csv
from .svgplot import Figure

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ---- parameters, config files and manifests ------------------------------------

@dataclass(frozen=True)
class Param:
    name: str
    type: type
    default: object = None
    help: str = ""
    choices: tuple | None = None
    many: bool = False  # list of values
    required: bool = False

    def schema(self) -> dict:
        base = {int: {"type": "integer"}, float: {"type": "number"}, str: {"type": "string"},
                bool: {"type": "boolean"}}[self.type]
        if self.choices:
            base = {**base, "enum": list(self.choices)}
        return {"type": "array", "items": base} if self.many else base


def _schema(params) -> dict:
    return {"type": "object", "properties": {p.name: p.schema() for p in params}, "additionalProperties": False}


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _add_params(parser, params) -> None:
    parser.add_argument("--config", help="JSON config file; command-line flags override its values")
    for p in params:
        kw = {"default": None, "help": p.help + (" (required)" if p.required else f" (default: {p.default!r})")}
        kw["type"] = _bool if p.type is bool else p.type
        if p.choices:
            kw["choices"] = p.choices
        if p.many:
            kw["nargs"] = "+"
        parser.add_argument("--" + p.name.replace("_", "-"), dest=p.name, **kw)


def _read_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: the top level must be an object")
    return doc


def resolve(params, file_cfg: dict | None, flags: dict) -> dict:
    """defaults < config file < flags, validated against the parameter schema."""
    cfg = {p.name: p.default for p in params}
    file_cfg = dict(file_cfg or {})
    try:
        jsonschema.validate(file_cfg, _schema(params))
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config: {e.message} at {'/'.join(map(str, e.absolute_path)) or 'top level'}") from e
    cfg.update(file_cfg)
    cfg.update({k: v for k, v in flags.items() if v is not None and k in cfg})
    missing = [p.name for p in params if p.required and cfg[p.name] is None]
    if missing:
        raise ConfigError(f"missing required parameter(s): {', '.join(missing)}")
    return cfg


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    return {"hdepose": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "jsonschema": getattr(jsonschema, "__version__", "unknown"),
            "python": platform.python_version()}


class Run:
    """Output directory bookkeeping for one subcommand invocation."""

    def __init__(self, command: str, cfg: dict, out):
        self.command, self.cfg = command, cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[Path] = []
        self.notes: list[str] = []
        self._t0 = time.perf_counter()
        self._timing: list[str] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        if p not in self.outputs:
            self.outputs.append(p)
        return p

    def adopt(self, paths) -> None:
        for p in paths:
            if p not in self.outputs:
                self.outputs.append(p)

    def write_json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
        return p

    def time(self, label: str, seconds: float) -> None:
        self._timing.append(f"{label}\t{seconds:.6f}")

    def _relative(self, v):
        """Existing paths are recorded relative to the output directory so manifests do not depend on it."""
        if isinstance(v, dict):
            return {k: self._relative(x) for k, x in v.items()}
        if isinstance(v, list):
            return [self._relative(x) for x in v]
        if isinstance(v, str) and v and os.path.exists(v):
            return Path(os.path.relpath(v, self.out)).as_posix()
        return v

    def finish(self) -> Path:
        self.time("total_s", time.perf_counter() - self._t0)
        (self.out / "timing.log").write_text("\n".join(self._timing) + "\n")
        files = {str(p.relative_to(self.out)): _sha256(p) for p in sorted(self.outputs)}
        man = {"command": self.command, "config": self._relative(self.cfg), "seed": self.cfg.get("seed"),
               "versions": versions(), "outputs": files, "logs": ["timing.log"], "notes": self.notes}
        mp = self.out / "manifest.json"
        mp.write_text(json.dumps(_jsonable(man), indent=2, sort_keys=True) + "\n")
        return mp


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else None
    if isinstance(o, Path):
        return str(o)
    return o


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows[0], rows[1:]


# ---- shared file formats -------------------------------------------------------

def save_schedule_csv(path, schedule) -> None:
    _write_rows(Path(path), ["pose_id", "start_s", "duration_s"], [(int(p), float(s), float(d)) for p, s, d in schedule])


def load_schedule_csv(path) -> tuple:
    _, rows = _read_table(path)
    return tuple((int(r[0]), float(r[1]), float(r[2])) for r in rows)


def save_aligned_csv(path, times, split, envelope, angles_norm) -> None:
    C = envelope.shape[1]
    header = ["time_s", "split", *(f"ch{c}" for c in range(C)), *JOINT_NAMES]
    rows = ([t, s, *e, *a] for t, s, e, a in zip(times, split, envelope, angles_norm))
    _write_rows(Path(path), header, rows)


def load_aligned_csv(path):
    """Returns (times, split labels, envelope n x C, normalised angles n x 29)."""
    header, rows = _read_table(path)
    if header[:2] != ["time_s", "split"] or tuple(header[-N_JOINTS:]) != JOINT_NAMES:
        raise DataError(f"{path}: not an aligned dataset")
    C = len(header) - 2 - N_JOINTS
    split = np.array([r[1] for r in rows])
    num = np.array([[float(v) for i, v in enumerate(r) if i != 1] for r in rows]).reshape(-1, 1 + C + N_JOINTS)
    return num[:, 0], split, num[:, 1:1 + C], num[:, 1 + C:]


def save_pred_csv(path, times, angles_norm) -> None:
    _write_rows(Path(path), ["time_s", *JOINT_NAMES], ([t, *a] for t, a in zip(times, angles_norm)))


def load_pred_csv(path):
    header, rows = _read_table(path)
    if tuple(header[1:]) != JOINT_NAMES:
        raise DataError(f"{path}: not an angle prediction file")
    a = np.array(rows, dtype=float).reshape(-1, 1 + N_JOINTS)
    return a[:, 0], a[:, 1:]


# ---- subcommands ---------------------------------------------------------------

SYNTH = [
    Param("out", str, None, "output directory", required=True),
    Param("seed", int, 0, "random seed"),
    Param("duration_s", float, 300.0, "recording length in seconds"),
    Param("n_channels", int, 64, "EMG channels"),
    Param("grid", str, "", "electrode grid as ROWSxCOLS; empty picks the default for the channel count"),
    Param("mixing", str, "sparse", "activation mixing model", ("sparse", "grid")),
    Param("prompt_s", float, 8.0, "prompt duration"),
    Param("n_poses", int, 16, "distinct prompted poses"),
    Param("noise_std", float, 0.05, "background noise relative to the envelope unit"),
    Param("line_hum_50hz_ampl", float, 0.0, "50 Hz interference amplitude in volts"),
    Param("speed_tau_s", float, 0.1, "weight of the angular-speed term in the activation"),
]


def _parse_grid(s: str, n_channels: int) -> tuple[int, int]:
    if not s:
        return default_grid(n_channels)
    try:
        r, c = (int(v) for v in s.lower().split("x"))
    except ValueError as e:
        raise ConfigError(f"grid must look like 6x16, got {s!r}") from e
    return r, c


def cmd_synth(cfg: dict) -> Run:
    run = Run("synth", cfg, cfg["out"])
    grid = _parse_grid(cfg["grid"], cfg["n_channels"])
    if grid[0] * grid[1] != cfg["n_channels"]:
        raise ConfigError(f"grid {grid} does not hold {cfg['n_channels']} channels")
    mixing = grid_mixing(grid, np.random.default_rng(cfg["seed"])) if cfg["mixing"] == "grid" else None
    sc = SynthConfig(seed=cfg["seed"], duration_s=cfg["duration_s"], n_channels=cfg["n_channels"], grid=grid,
                     mixing=mixing, noise_std=cfg["noise_std"], line_hum_50hz_ampl=cfg["line_hum_50hz_ampl"],
                     prompt_s=cfg["prompt_s"], n_poses=cfg["n_poses"], speed_tau_s=cfg["speed_tau_s"])
    t0 = time.perf_counter()
    d = generate_synthetic(sc)
    run.time("generate_s", time.perf_counter() - t0)
    side = save_emg(run.path("emg.bin"), d.emg)
    run.adopt([side])
    save_markers_csv(run.path("markers.csv"), d.markers)
    save_angles_csv(run.path("angles.csv"), d.angle_times, d.angles)
    save_schedule_csv(run.path("schedule.csv"), d.schedule)
    _write_rows(run.path("mixing.csv"), ["channel", *JOINT_NAMES], ([c, *row] for c, row in enumerate(d.mixing)))
    return run


PREPROCESS = [
    Param("input", str, None, "directory holding emg.bin, angles.csv (or markers.csv) and schedule.csv", required=True),
    Param("out", str, None, "output directory", required=True),
    Param("grid_select", str, "", "electrode subset", ("", "32x2", "16x4", "16x2", "32x1-proximal", "32x1-distal")),
    Param("window_len", int, 200, "RMS window in samples"),
    Param("slide", int, 0, "RMS slide in samples; 0 derives it from the prompt duration"),
    Param("test_fraction", float, 1.0 / 6.0, "held-out fraction at the end of the recording"),
    Param("angles_from_markers", bool, False, "recover joint angles from markers with inverse kinematics"),
]


def cmd_preprocess(cfg: dict) -> Run:
    run = Run("preprocess", cfg, cfg["out"])
    src = Path(cfg["input"])
    rec = load_emg(src / "emg.bin")
    channels = np.arange(rec.n_channels)
    if cfg["grid_select"]:
        channels = select_grid(rec, cfg["grid_select"])
        rec = subset_recording(rec, channels)
    schedule = load_schedule_csv(src / "schedule.csv") if (src / "schedule.csv").exists() else ()
    slide = cfg["slide"]
    if not slide:
        if not schedule:
            raise ConfigError("slide = 0 needs a schedule.csv to derive it from")
        slide = slide_for_prompt(max(d for _, _, d in schedule))
    sk = default_skeleton()
    if cfg["angles_from_markers"]:
        mk = load_markers_csv(src / "markers.csv")
        t0 = time.perf_counter()
        angles, _ = ika_series(mk.select(sk.marker_labels), sk)
        run.time("ika_s", time.perf_counter() - t0)
        at = mk.times()
    else:
        at, angles = load_angles_csv(src / "angles.csv")
    env_raw, t = rms_envelope(rec, cfg["window_len"], slide)
    ds = align(EmgEnvelope(env_raw, t, cfg["window_len"], slide), angles, at, sk.rest_pose, schedule)
    tr, te = split_train_test(len(ds), test_fraction=cfg["test_fraction"])
    st = Standardizer.fit(ds.envelope[tr])
    for d in st.dead:
        run.notes.append(f"dead channel {d}")
    split = np.where(np.isin(np.arange(len(ds)), te), "test", "train")
    save_aligned_csv(run.path("aligned.csv"), ds.timestamps, split, st.apply(ds.envelope), ds.angles_norm)
    save_schedule_csv(run.path("schedule.csv"), schedule)
    run.write_json("preprocess.json", {"window_len": cfg["window_len"], "slide": slide,
                                       "channels": channels.tolist(), "standardizer": st.to_dict(),
                                       "n_train": len(tr), "n_test": len(te), "fs": rec.fs})
    return run


TRAIN = [
    Param("data", str, None, "aligned.csv from preprocess", required=True),
    Param("out", str, None, "output directory", required=True),
    Param("seed", int, 0, "initialisation and shuffling seed"),
    Param("hidden", int, [128, 128], "hidden layer widths", many=True),
    Param("activation", str, "softplus", "hidden activation", ("softplus", "tanh", "relu", "linear")),
    Param("learning_rate", float, 1e-5, "Adam step size"),
    Param("adam_eps", float, 1e-3, "Adam epsilon"),
    Param("beta1", float, 0.9, "Adam beta1"),
    Param("beta2", float, 0.99, "Adam beta2"),
    Param("batch_size", int, 2000, "minibatch rows"),
    Param("epochs", int, 200, "passes over the training rows"),
]


def cmd_train(cfg: dict) -> Run:
    run = Run("train", cfg, cfg["out"])
    _, split, env, ang = load_aligned_csv(cfg["data"])
    tr, te = split == "train", split == "test"
    net = NetworkConfig(env.shape[1], N_JOINTS, tuple(cfg["hidden"]), cfg["activation"])
    model = ModelWeights.init(net, cfg["seed"])
    try:
        hy = TrainHyper(cfg["learning_rate"], cfg["adam_eps"], cfg["beta1"], cfg["beta2"], cfg["batch_size"],
                        cfg["epochs"], cfg["seed"])
    except ValueError as e:
        raise ConfigError(str(e)) from e
    val = (env[te], ang[te]) if te.sum() >= 2 else None
    res = train(model, env[tr], ang[tr], hy, val=val)
    run.time("train_s", res.seconds)
    save_checkpoint(run.path("model.json"), model, {"seed": cfg["seed"], "epochs": cfg["epochs"]})
    save_loss_csv(run.path("loss.csv"), res)
    fig = Figure("Training loss", "epoch", "MSE", logy=True)
    fig.line(np.arange(len(res.loss_history)), res.loss_history, "train")
    if res.val_history:
        fig.line(np.arange(len(res.val_history)), res.val_history, "held-out")
    fig.save(run.path("loss.svg"))
    return run


INFER = [
    Param("model", str, None, "model.json from train", required=True),
    Param("data", str, None, "aligned.csv from preprocess", required=True),
    Param("out", str, None, "output directory", required=True),
    Param("rows", str, "test", "which rows to run the recursion over", ("test", "all")),
    Param("filter", str, "none", "post-hoc low-pass", ("none", "causal", "zero_phase")),
    Param("cutoff_hz", float, 1.0, "low-pass cutoff"),
    Param("filter_order", int, 6, "Butterworth order"),
]


def cmd_infer(cfg: dict) -> Run:
    run = Run("infer", cfg, cfg["out"])
    model = load_checkpoint(cfg["model"]).model
    t, split, env, ang = load_aligned_csv(cfg["data"])
    rows = np.flatnonzero(split == "test") if cfg["rows"] == "test" else np.arange(len(t))
    if rows.size == 0:
        raise DataError("no rows to run inference on")
    if env.shape[1] != model.config.n_emg_inputs:
        raise DataError(f"model expects {model.config.n_emg_inputs} channels, data has {env.shape[1]}")
    init = ang[rows[0] - 1] if rows[0] > 0 else np.zeros(N_JOINTS)
    res = infer(model, env[rows], init)
    run.time("mean_step_latency_ms", res.mean_latency_ms)
    pred = res.angles
    if cfg["filter"] != "none":
        fs = 1.0 / float(np.median(np.diff(t))) if len(t) > 1 else 1.0
        pred = butterworth_lowpass(pred, cfg["cutoff_hz"], fs, cfg["filter_order"],
                                   zero_phase=cfg["filter"] == "zero_phase", steady_start=True)
    save_pred_csv(run.path("predicted.csv"), t[rows], pred)
    return run


def _actual_at(aligned_path, times):
    t, _, _, ang = load_aligned_csv(aligned_path)
    idx = np.searchsorted(t, times)
    if np.any(idx >= len(t)) or not np.allclose(t[np.minimum(idx, len(t) - 1)], times, rtol=0, atol=1e-9):
        raise DataError(f"prediction times do not match the rows of {aligned_path}")
    return ang[idx]


EVALUATE = [
    Param("actual", str, None, "aligned.csv per subject", many=True, required=True),
    Param("predicted", str, None, "predicted.csv per subject (setup A)", many=True, required=True),
    Param("predicted_b", str, [], "predicted.csv per subject for a second setup", many=True),
    Param("label_a", str, "A", "name of setup A"),
    Param("label_b", str, "B", "name of setup B"),
    Param("alternative", str, "two-sided", "paired t alternative", ("two-sided", "less", "greater")),
    Param("out", str, None, "output directory", required=True),
]


def _subject_metrics(actual_path, pred_path, sk):
    times, pred = load_pred_csv(pred_path)
    act = _actual_at(actual_path, times)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ma, mp = postprocess(act, sk.rest_pose, sk), postprocess(pred, sk.rest_pose, sk)
        return performance(act, pred, ma, mp, sk.marker_labels)


def cmd_evaluate(cfg: dict) -> Run:
    run = Run("evaluate", cfg, cfg["out"])
    A, P, B = cfg["actual"], cfg["predicted"], cfg["predicted_b"]
    if len(A) != len(P) or (B and len(B) != len(A)):
        raise ConfigError("actual, predicted and predicted_b need one entry per subject")
    sk = default_skeleton()
    reps_a = [_subject_metrics(a, p, sk) for a, p in zip(A, P)]
    reps_b = [_subject_metrics(a, p, sk) for a, p in zip(A, B)] if B else []
    rows = []
    for k, r in enumerate(reps_a):
        rows.append([k, cfg["label_a"], r.mpcc, r.md])
    for k, r in enumerate(reps_b):
        rows.append([k, cfg["label_b"], r.mpcc, r.md])
    _write_rows(run.path("subjects.csv"), ["subject", "setup", "mpcc", "md_mm"], rows)
    report = {"setups": {cfg["label_a"]: [r.to_dict() for r in reps_a]}}
    if reps_b:
        report["setups"][cfg["label_b"]] = [r.to_dict() for r in reps_b]
        tests = {}
        for metric in ("mpcc", "md"):
            a = [getattr(r, metric) for r in reps_a]
            b = [getattr(r, metric) for r in reps_b]
            if len(a) < 2:
                run.notes.append("paired t-test needs at least two subjects")
                break
            try:
                tests[metric] = stats.paired_t(a, b, cfg["alternative"]).to_dict()
                if len(a) >= 3:
                    tests[metric]["shapiro_wilk_of_differences"] = \
                        stats.shapiro_wilk(np.subtract(a, b)).to_dict()
            except stats.StatsError as e:
                run.notes.append(f"{metric}: {e}")
        report["paired_t"] = tests
    run.write_json("report.json", report)
    for metric, name, unit in (("mpcc", "MPCC", ""), ("md", "MD", " (mm)")):
        groups = {cfg["label_a"]: [getattr(r, metric) for r in reps_a]}
        if reps_b:
            groups[cfg["label_b"]] = [getattr(r, metric) for r in reps_b]
        Figure(name, "setup", name + unit).box(groups).save(run.path(f"{metric}.svg"))
    return run


SPM = [
    Param("actual", str, None, "aligned.csv per subject", many=True, required=True),
    Param("predicted", str, None, "predicted.csv per subject (setup A)", many=True, required=True),
    Param("predicted_b", str, [], "predicted.csv per subject for a second setup", many=True),
    Param("schedule", str, None, "schedule.csv per subject", many=True, required=True),
    Param("n_nodes", int, 256, "nodes per resampled movement"),
    Param("alpha", float, 0.05, "family-wise error rate"),
    Param("out", str, None, "output directory", required=True),
]


def _movement_curves(actual_paths, pred_paths, sched_paths, n_nodes):
    """pose_id -> list of (n_nodes x 29) difference curves, one per subject and repetition."""
    curves: dict[int, list] = {}
    for a, p, s in zip(actual_paths, pred_paths, sched_paths):
        times, pred = load_pred_csv(p)
        act = _actual_at(a, times)
        dt = float(np.median(np.diff(times))) if len(times) > 1 else 0.0
        inside = [(pid, st, du) for pid, st, du in load_schedule_csv(s)
                  if st >= times[0] - 1e-9 and st + du <= times[-1] + dt + 1e-9]
        if not inside:
            continue
        for (pid, _, _), seg in zip(inside, segment_movements(pred - act, times, inside, n_nodes)):
            curves.setdefault(pid, []).append(seg)
    return curves


def _cjd_set(curves, alpha, notes):
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for pid in sorted(curves):
            segs = curves[pid]
            if len(segs) < 3:  # with df = 1 the 1-D EC density never decays, so no threshold exists
                notes.append(f"movement {pid}: only {len(segs)} repetition(s), skipped")
                continue
            D = np.stack(segs, axis=2)  # nodes x joints x k
            res = [spm_one_sample_t(D[:, j, :], alpha) for j in range(D.shape[1])]
            out[pid] = (cjd([r.f_series for r in res], pid), res)
    return out


def cmd_spm(cfg: dict) -> Run:
    run = Run("spm", cfg, cfg["out"])
    A, P, B, S = cfg["actual"], cfg["predicted"], cfg["predicted_b"], cfg["schedule"]
    if not (len(A) == len(P) == len(S)) or (B and len(B) != len(A)):
        raise ConfigError("actual, predicted, predicted_b and schedule need one entry per subject")
    sets = [_cjd_set(_movement_curves(A, P, S, cfg["n_nodes"]), cfg["alpha"], run.notes)]
    if B:
        sets.append(_cjd_set(_movement_curves(A, B, S, cfg["n_nodes"]), cfg["alpha"], run.notes))
    common = sorted(set.intersection(*(set(s) for s in sets)))
    if not common:
        raise DataError("no movement has the three or more repetitions SPM needs")
    rows = []
    for pid in common:
        for i in range(cfg["n_nodes"]):
            rows.append([pid, i, *(v for s in sets for v in (s[pid][0].mean[i], s[pid][0].iqr[i]))])
    header = ["movement", "node", "cjd_mean_a", "cjd_iqr_a"] + (["cjd_mean_b", "cjd_iqr_b"] if B else [])
    _write_rows(run.path("cjd.csv"), header, rows)
    summary = {"movements": common,
               "t_crit": {str(pid): [r.t_crit for r in sets[0][pid][1]] for pid in common},
               "fwhm": {str(pid): [r.fwhm for r in sets[0][pid][1]] for pid in common},
               "repetitions": {str(pid): int(sets[0][pid][1][0].dof + 1) for pid in common}}
    if B:
        summary["cmcjd"] = cmcjd([sets[0][p][0] for p in common], [sets[1][p][0] for p in common])
    run.write_json("spm.json", summary)
    x = np.arange(cfg["n_nodes"]) / (cfg["n_nodes"] - 1) * 100
    fig = Figure("Cross-joint derivative", "movement (%)", "CJD")
    for k, s in enumerate(sets):
        c = s[common[0]][0]
        fig.line(x, c.mean, "AB"[k] + f" movement {common[0]}", band=(c.mean - c.iqr / 2, c.mean + c.iqr / 2))
    fig.line(x, np.zeros_like(x), "significance boundary", color="#888888")
    fig.save(run.path("cjd.svg"))
    return run


VARIANCE = [
    Param("emg", str, None, "96-channel emg.bin files (one per session)", many=True, required=True),
    Param("window_len", int, 200, "RMS window"),
    Param("slide", int, 25, "RMS slide"),
    Param("rows", int, 6, "grid rows (proximo-distal)"),
    Param("cols", int, 16, "grid columns (circumferential)"),
    Param("out", str, None, "output directory", required=True),
]


def cmd_variance(cfg: dict) -> Run:
    run = Run("variance", cfg, cfg["out"])
    grid = (cfg["rows"], cfg["cols"])
    envs, cmap = [], None
    for p in cfg["emg"]:
        rec = load_emg(p)
        if rec.n_channels != grid[0] * grid[1]:
            raise DataError(f"{p}: {rec.n_channels} channels do not fill a {grid[0]}x{grid[1]} grid")
        cmap = rec.channel_map if rec.grid == grid else None
        envs.append(rms_envelope(rec, cfg["window_len"], cfg["slide"])[0])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        r = ndv(envs, grid, cmap)
    run.notes.extend(str(w.message) for w in caught)
    cmp_ = ndv_compare(r.proximo_distal, r.circumferential)
    rows = [["proximo_distal", i, v] for i, v in enumerate(r.proximo_distal)]
    rows += [["circumferential", i, v] for i, v in enumerate(r.circumferential)]
    _write_rows(run.path("ndv.csv"), ["direction", "index", "ndv"], rows)
    run.write_json("variance.json", {**cmp_.to_dict(), "excluded_channels": list(r.excluded)})
    Figure("Normalised dimensional variance", "direction", "NDV").box(
        {"proximo-distal": r.proximo_distal, "circumferential": r.circumferential}).save(run.path("ndv.svg"))
    return run


IMPEDANCE = [
    Param("input", str, "", "impedance CSV (pair, frequency_hz, magnitude_ohm, phase_deg); empty synthesises one"),
    Param("seed", int, 0, "seed for synthetic spectra"),
    Param("n_pairs", int, 32, "synthetic electrode pairs"),
    Param("r_median", float, 661e3, "synthetic per-electrode median R (ohm)"),
    Param("c_median", float, 4.8e-9, "synthetic per-electrode median C (F)"),
    Param("spread", float, 0.3, "log-normal scatter of synthetic R and C"),
    Param("f_eval", float, 50.0, "frequency for the summary values (Hz)"),
    Param("z_in", float, AMP_INPUT_IMPEDANCE_OHM, "amplifier input impedance (ohm)"),
    Param("area_cm2", float, ELECTRODE_AREA_CM2, "electrode area"),
    Param("emg_a", str, "", "emg.bin recorded with the first electrode type"),
    Param("emg_b", str, "", "emg.bin recorded with the second electrode type"),
    Param("channel", int, 0, "channel used for the spectrogram comparison"),
    Param("out", str, None, "output directory", required=True),
]


def cmd_impedance(cfg: dict) -> Run:
    run = Run("impedance", cfg, cfg["out"])
    if cfg["input"]:
        f, z, ids = load_impedance_csv(cfg["input"])
    else:
        f, z, _ = synthetic_spectra(np.random.default_rng(cfg["seed"]), cfg["n_pairs"], cfg["r_median"],
                                    cfg["c_median"], cfg["spread"])
        ids = [str(i) for i in range(len(z))]
        save_impedance_csv(run.path("spectra.csv"), f, z, ids)
    zi = per_interface(z)
    fits = [fit_rc(f, zz) for zz in zi]
    _write_rows(run.path("fits.csv"), ["pair", "R_ohm", "C_F", "corner_hz", "residual", "flagged"],
                [[i, ft.model.R, ft.model.C, ft.model.corner_hz, ft.residual, int(ft.flagged)]
                 for i, ft in zip(ids, fits)])
    bode = aggregate_bode(f, zi)
    _write_rows(run.path("bode.csv"), ["frequency_hz", "median_mag_ohm", "iqr_mag_ohm", "median_phase_deg",
                                       "iqr_phase_deg"],
                zip(f, bode.median_mag, bode.iqr_mag, bode.median_phase_deg, bode.iqr_phase_deg))
    mag_e = bode.at(cfg["f_eval"])["median_mag"]
    z_eval = np.array([complex(rc_impedance(ft.model, cfg["f_eval"])) for ft in fits])
    g, db = divider_attenuation(float(np.median(np.abs(z_eval))), cfg["z_in"])
    summary = {"f_eval_hz": cfg["f_eval"], "median_magnitude_ohm": mag_e,
               "median_fit_R_ohm": float(np.median([ft.model.R for ft in fits])),
               "median_fit_C_F": float(np.median([ft.model.C for ft in fits])),
               "area_normalised_ohm_cm2": normalize_by_area(mag_e, cfg["area_cm2"]),
               "divider_gain": abs(g), "divider_db": db,
               "flagged_pairs": [i for i, ft in zip(ids, fits) if ft.flagged]}
    if cfg["emg_a"] and cfg["emg_b"]:
        ra, rb = load_emg(cfg["emg_a"]), load_emg(cfg["emg_b"])
        ch = cfg["channel"]
        if ch >= min(ra.n_channels, rb.n_channels):
            raise ConfigError(f"channel {ch} is out of range")
        va, vb = ra.volts()[:, ch], rb.volts()[:, ch]
        n = min(len(va), len(vb))
        mv, ddb = compare_emg(va[:n], vb[:n], ra.fs)
        summary["emg_comparison"] = {"rms_rmse_mV": mv, "spectrogram_rmse_dB": ddb}
        sa, sb = spectrogram(va[:n], ra.fs), spectrogram(vb[:n], rb.fs)
        _write_rows(run.path("spectrum.csv"), ["frequency_hz", "mean_db_a", "mean_db_b"],
                    zip(sa.freqs, sa.db.mean(axis=0), sb.db.mean(axis=0)))
    run.write_json("impedance.json", summary)
    q1, q3 = bode.median_mag - bode.iqr_mag / 2, bode.median_mag + bode.iqr_mag / 2
    Figure("Electrode-skin impedance", "frequency (Hz)", "|Z| (ohm)", logx=True, logy=True).line(
        f, bode.median_mag, "median", band=(np.maximum(q1, bode.median_mag * 1e-3), q3)).save(run.path("bode_mag.svg"))
    Figure("Electrode-skin phase", "frequency (Hz)", "phase (deg)", logx=True).line(
        f, bode.median_phase_deg, "median").save(run.path("bode_phase.svg"))
    return run


PIPELINE = [
    Param("out", str, None, "output directory", required=True),
    Param("seed", int, 0, "base seed; subject k uses seed + k"),
    Param("n_subjects", int, 2, "synthetic subjects"),
    Param("duration_s", float, 300.0, "recording length per subject"),
    Param("n_channels", int, 64, "EMG channels per subject"),
    Param("prompt_s", float, 8.0, "prompt duration"),
    Param("n_poses", int, 16, "distinct prompted poses"),
    Param("grid_select", str, "", "electrode subset for training", PREPROCESS[2].choices),
    Param("hidden", int, [128, 128], "hidden layer widths", many=True),
    Param("learning_rate", float, 1e-5, "Adam step size"),
    Param("batch_size", int, 2000, "minibatch rows"),
    Param("epochs", int, 200, "training epochs"),
    Param("test_fraction", float, 1.0 / 6.0, "held-out fraction"),
    Param("variance_duration_s", float, 60.0, "length of the 96-channel variance recording"),
    Param("n_nodes", int, 256, "SPM nodes per movement"),
]


def cmd_pipeline(cfg: dict) -> Run:
    """synth -> preprocess -> train -> infer (raw and causal-filtered) -> evaluate -> spm, plus variance and impedance."""
    run = Run("pipeline", cfg, cfg["out"])
    out = run.out
    aligned, raw, filt, scheds = [], [], [], []
    for k in range(cfg["n_subjects"]):
        sub = out / f"subject{k}"
        steps = [
            (cmd_synth, SYNTH, {"out": str(sub / "synth"), "seed": cfg["seed"] + k, "duration_s": cfg["duration_s"],
                                "n_channels": cfg["n_channels"], "prompt_s": cfg["prompt_s"],
                                "n_poses": cfg["n_poses"]}),
            (cmd_preprocess, PREPROCESS, {"input": str(sub / "synth"), "out": str(sub / "preprocess"),
                                          "grid_select": cfg["grid_select"], "test_fraction": cfg["test_fraction"],
                                          "slide": _pipeline_slide(cfg["prompt_s"])}),
            (cmd_train, TRAIN, {"data": str(sub / "preprocess" / "aligned.csv"), "out": str(sub / "train"),
                                "seed": cfg["seed"] + k, "hidden": cfg["hidden"],
                                "learning_rate": cfg["learning_rate"], "batch_size": cfg["batch_size"],
                                "epochs": cfg["epochs"]}),
            (cmd_infer, INFER, {"model": str(sub / "train" / "model.json"),
                                "data": str(sub / "preprocess" / "aligned.csv"), "out": str(sub / "infer")}),
            (cmd_infer, INFER, {"model": str(sub / "train" / "model.json"),
                                "data": str(sub / "preprocess" / "aligned.csv"), "out": str(sub / "infer_filtered"),
                                "filter": "causal"}),
        ]
        for fn, params, c in steps:
            _run_step(run, fn, params, c)
        aligned.append(str(sub / "preprocess" / "aligned.csv"))
        raw.append(str(sub / "infer" / "predicted.csv"))
        filt.append(str(sub / "infer_filtered" / "predicted.csv"))
        scheds.append(str(sub / "preprocess" / "schedule.csv"))
    _run_step(run, cmd_evaluate, EVALUATE, {"actual": aligned, "predicted": raw, "predicted_b": filt,
                                            "label_a": "raw", "label_b": "filtered", "out": str(out / "evaluate")})
    try:
        _run_step(run, cmd_spm, SPM, {"actual": aligned, "predicted": raw, "predicted_b": filt, "schedule": scheds,
                                      "n_nodes": cfg["n_nodes"], "out": str(out / "spm")})
    except DataError as e:
        run.notes.append(f"spm skipped: {e}")
    _run_step(run, cmd_synth, SYNTH, {"out": str(out / "variance_data"), "seed": cfg["seed"] + 1000,
                                      "duration_s": cfg["variance_duration_s"], "n_channels": 96, "grid": "6x16",
                                      "mixing": "grid", "prompt_s": cfg["prompt_s"], "n_poses": cfg["n_poses"]})
    _run_step(run, cmd_variance, VARIANCE, {"emg": [str(out / "variance_data" / "emg.bin")],
                                            "out": str(out / "variance")})
    _run_step(run, cmd_impedance, IMPEDANCE, {"seed": cfg["seed"], "out": str(out / "impedance")})
    return run


def _pipeline_slide(prompt_s: float) -> int:
    try:
        return slide_for_prompt(prompt_s)
    except DataError:
        return 25


def _run_step(parent: Run, fn, params, cfg) -> None:
    child = fn(resolve(params, cfg, {}))
    mp = child.finish()
    parent.adopt([*child.outputs, mp])
    parent.notes.extend(f"{child.command}: {n}" for n in child.notes)


COMMANDS = {
    "synth": (cmd_synth, SYNTH, "generate a seeded synthetic subject"),
    "preprocess": (cmd_preprocess, PREPROCESS, "EMG envelopes aligned with normalised joint angles"),
    "variance": (cmd_variance, VARIANCE, "grid variance (NDV) and one-tailed U test"),
    "impedance": (cmd_impedance, IMPEDANCE, "R-C fits, Bode summary, divider effect and EMG comparison"),
    "train": (cmd_train, TRAIN, "teacher-forced training of the per-joint network"),
    "infer": (cmd_infer, INFER, "free-running recursive inference"),
    "evaluate": (cmd_evaluate, EVALUATE, "MPCC / MD per subject and paired t-tests between setups"),
    "spm": (cmd_spm, SPM, "SPM t-curves, CJD per movement and CMCJD between setups"),
    "pipeline": (cmd_pipeline, PIPELINE, "every stage on synthetic subjects"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdepose", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"hdepose {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, params, help_) in COMMANDS.items():
        _add_params(sub.add_parser(name, help=help_, description=help_), params)
    return ap


def _exit_code(e: BaseException) -> int:
    if isinstance(e, (ConfigError, jsonschema.ValidationError)):
        return EXIT_CONFIG
    if isinstance(e, (EstimatorError, stats.StatsError, FloatingPointError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    if isinstance(e, (DataError, EmgProcError, EvalError, ImpedanceError, KinematicsError, OSError, ValueError)):
        return EXIT_DATA
    return EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn, params, _ = COMMANDS[args.command]
    try:
        file_cfg = _read_config(args.config) if args.config else {}
        cfg = resolve(params, file_cfg.get(args.command, file_cfg), vars(args))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            run = fn(cfg)
            run.finish()
    except Exception as e:  # noqa: BLE001 - every failure becomes a JSON error record
        code = _exit_code(e)
        print(json.dumps({"error": type(e).__name__, "message": str(e), "exit_code": code}), file=sys.stderr)
        return code
    print(json.dumps({"command": args.command, "out": str(run.out), "outputs": len(run.outputs)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
