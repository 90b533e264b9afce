"""EMG envelope extraction and grid variance (NDV) analysis.

Envelope: counts -> volts, per-channel offset removal, rectification,
sliding-window RMS, division by 1e-4 and per-channel standardisation.
Windows are left-aligned and time-stamped at their centre.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import stats
from .dataio import EmgRecording

WINDOW_LEN = 200
ENVELOPE_SCALE = 1e-4
NDV_GRID = (6, 16)  # rows (proximo-distal) x cols (circumferential)


class EmgProcError(ValueError):
    pass


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    dead: tuple[int, ...] = ()

    @classmethod
    def fit(cls, values: np.ndarray) -> "Standardizer":
        """Per-channel mean and population std; zero-std channels are flagged and get std 1."""
        v = np.asarray(values, dtype=float)
        if len(v) == 0:
            raise EmgProcError("cannot fit standardisation on zero rows")
        mean = v.mean(axis=0)
        std = v.std(axis=0)
        dead = np.flatnonzero(~(std > 0))
        if dead.size:
            warnings.warn(f"dead channels (zero std): {dead.tolist()}", stacklevel=2)
            std = std.copy()
            std[dead] = 1.0
        return cls(mean, std, tuple(int(d) for d in dead))

    def apply(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape[-1] != len(self.mean):
            raise EmgProcError(f"expected {len(self.mean)} channels, got {v.shape[-1]}")
        return (v - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "dead": list(self.dead)}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float), tuple(d.get("dead", ())))


@dataclass(frozen=True, eq=False)
class EmgEnvelope:
    values: np.ndarray  # (n, C)
    times: np.ndarray  # window centres, s
    window_len: int
    slide: int
    scaled: bool = True
    standardizer: Standardizer | None = None
    fs: float = 2048.0

    def __post_init__(self):
        if self.window_len <= 0 or self.slide <= 0:
            raise EmgProcError("window_len and slide must be positive")
        if len(self.values) != len(self.times):
            raise EmgProcError("one timestamp per envelope row")

    @property
    def per_channel_mean(self):
        return None if self.standardizer is None else self.standardizer.mean

    @property
    def per_channel_std(self):
        return None if self.standardizer is None else self.standardizer.std


def window_starts(n: int, window_len: int, slide: int) -> np.ndarray:
    if window_len > n:
        raise EmgProcError(f"window of {window_len} samples is longer than the signal ({n})")
    if slide < 1:
        raise EmgProcError("slide must be >= 1")
    return np.arange(0, n - window_len + 1, slide)


def sliding_rms(x: np.ndarray, window_len: int, slide: int) -> np.ndarray:
    """RMS over left-aligned windows [k*slide, k*slide + window_len) along axis 0."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    window_starts(len(x), window_len, slide)
    v = sliding_window_view(x, window_len, axis=0)[::slide]  # (k, C, W), no copy
    out = np.sqrt(np.einsum("kcw,kcw->kc", v, v) / window_len)
    return out[:, 0] if squeeze else out


def window_centres(n: int, window_len: int, slide: int, fs: float, start_index: int = 0) -> np.ndarray:
    return (window_starts(n, window_len, slide) + (window_len - 1) / 2.0 - start_index) / fs


def rms_envelope(rec: EmgRecording, window_len: int = WINDOW_LEN, slide: int = 25,
                 scale: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Unstandardised envelope and window-centre times."""
    c = rec.samples.astype(float)
    v = (c - c.mean(axis=0)) * rec.volts_per_count  # offset removed in counts, then volts
    env = sliding_rms(np.abs(v), window_len, slide)
    if scale:
        env /= ENVELOPE_SCALE
    return env, window_centres(rec.n_samples, window_len, slide, rec.fs, rec.start_index)


def preprocess(rec: EmgRecording, window_len: int = WINDOW_LEN, slide: int = 25,
               standardizer: Standardizer | None = None, train_rows=None,
               scale: bool = True) -> EmgEnvelope:
    """Full envelope pipeline.

    Statistics come from ``standardizer`` when given; otherwise they are fit
    on ``train_rows`` of this recording's envelope (all rows by default).
    """
    env, t = rms_envelope(rec, window_len, slide, scale)
    if standardizer is None:
        standardizer = Standardizer.fit(env if train_rows is None else env[train_rows])
    return EmgEnvelope(standardizer.apply(env), t, window_len, slide, scale, standardizer, rec.fs)


# ---- NDV ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NdvResult:
    proximo_distal: np.ndarray  # E1, one per column
    circumferential: np.ndarray  # E2, one per row
    excluded: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"proximo_distal": self.proximo_distal.tolist(),
                "circumferential": self.circumferential.tolist(), "excluded": list(self.excluded)}


def ndv(envelopes, grid: tuple[int, int] = NDV_GRID, channel_map=None) -> NdvResult:
    """Normalised dimensional variance of an RMS matrix on a rows x cols grid.

    ``envelopes`` is one n x C matrix or a list of per-session matrices that
    are stacked in time. Channel c sits at ``channel_map[c]`` (row-major by
    default). Variances use the n-1 denominator.
    """
    if isinstance(envelopes, (list, tuple)):
        envelopes = np.vstack([np.asarray(e, dtype=float) for e in envelopes])
    B = np.asarray(envelopes, dtype=float)
    rows, cols = grid
    if B.ndim != 2 or B.shape[1] != rows * cols:
        raise EmgProcError(f"expected an n x {rows * cols} matrix for a {rows}x{cols} grid")
    mu = B.mean(axis=0)
    bad = np.flatnonzero(~(np.abs(mu) > 0))
    if bad.size:
        warnings.warn(f"channels with zero temporal mean excluded: {bad.tolist()}", stacklevel=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        Cn = B / mu
    Cn[:, bad] = np.nan
    if channel_map is None:
        channel_map = [(c // cols, c % cols) for c in range(rows * cols)]
    G = np.empty((len(B), cols, rows))
    for ch, (r, c) in enumerate(channel_map):
        G[:, c, r] = Cn[:, ch]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        d1 = np.nanvar(G, axis=2, ddof=1)  # along the rows -> n x cols
        d2 = np.nanvar(G, axis=1, ddof=1)  # along the columns -> n x rows
    return NdvResult(d1.mean(axis=0), d2.mean(axis=0), tuple(int(b) for b in bad))


@dataclass
class NdvComparison:
    report: stats.TestReport
    median_pd: float
    median_circ: float
    iqr_pd: float
    iqr_circ: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"test": self.report.to_dict(), "median_proximo_distal": self.median_pd,
                "median_circumferential": self.median_circ, "iqr_proximo_distal": self.iqr_pd,
                "iqr_circumferential": self.iqr_circ, **self.extra}


def ndv_compare(pd, circ) -> NdvComparison:
    """One-tailed U test of proximo-distal < circumferential NDV."""
    rep = stats.mann_whitney_u(pd, circ, "less")
    return NdvComparison(rep, float(np.median(pd)), float(np.median(circ)), stats.iqr(pd), stats.iqr(circ))


# ---- envelope CSV ------------------------------------------------------

def save_envelope(path, env: EmgEnvelope) -> Path:
    """CSV (time_s, ch0..) plus a JSON sidecar; returns the sidecar path."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", *(f"ch{c}" for c in range(env.values.shape[1]))])
        for t, row in zip(env.times, env.values):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
    side = path.with_suffix(".json")
    meta = {"window_len": env.window_len, "slide": env.slide, "scale": ENVELOPE_SCALE if env.scaled else None,
            "fs": env.fs, "standardizer": env.standardizer.to_dict() if env.standardizer else None}
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def load_envelope(path) -> EmgEnvelope:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    st = meta.get("standardizer")
    return EmgEnvelope(data[:, 1:], data[:, 0], int(meta["window_len"]), int(meta["slide"]),
                       meta.get("scale") is not None, Standardizer.from_dict(st) if st else None,
                       float(meta.get("fs", 2048.0)))
