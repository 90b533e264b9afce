"""Skin-electrode impedance: parallel R-C model, Bode summaries, divider gain, spectrogram comparison."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from . import stats
from .emgproc import sliding_rms

ELECTRODE_AREA_CM2 = math.pi * 0.2 ** 2  # 4 mm disc
AMP_INPUT_IMPEDANCE_OHM = 80e6
N_FREQS = 50
RESIDUAL_FLAG = 0.05  # rms of the log-magnitude / phase (rad) misfit


class ImpedanceError(ValueError):
    pass


@dataclass(frozen=True)
class RcModel:
    R: float  # ohm
    C: float  # farad

    def __post_init__(self):
        if not self.R > 0 or not self.C >= 0:
            raise ImpedanceError("need R > 0 and C >= 0")

    @property
    def tau(self) -> float:
        return self.R * self.C

    @property
    def corner_hz(self) -> float:
        return math.inf if self.C == 0 else 1.0 / (2 * math.pi * self.tau)


def frequency_grid(n: int = N_FREQS, f_lo: float = 1.0, f_hi: float = 1e4) -> np.ndarray:
    return np.geomspace(f_lo, f_hi, n)


def rc_impedance(model: RcModel, f_hz) -> np.ndarray:
    """Z = R / (1 + j 2 pi f R C)."""
    f = np.asarray(f_hz, dtype=float)
    if np.any(f < 0):
        raise ImpedanceError("frequency must be non-negative")
    return model.R / (1.0 + 1j * 2 * np.pi * f * model.R * model.C)


@dataclass(frozen=True)
class RcFit:
    model: RcModel
    residual: float
    flagged: bool


def fit_rc(f_hz, z) -> RcFit:
    """Least squares on log|Z| and phase over (log R, tau = RC >= 0)."""
    f = np.asarray(f_hz, dtype=float)
    z = np.asarray(z, dtype=complex)
    if f.shape != z.shape or f.ndim != 1:
        raise ImpedanceError("frequencies and impedances must be matching 1-D arrays")
    if len(np.unique(f)) < 2:
        raise ImpedanceError("need at least two distinct frequencies to identify R and C")
    if np.any(np.abs(z) <= 0) or not np.all(np.isfinite(z)):
        raise ImpedanceError("impedances must be finite and non-zero")
    w = 2 * np.pi * f
    logmag, phase = np.log(np.abs(z)), np.angle(z)

    def resid(p):
        logR, tau = p
        wt = w * tau
        return np.concatenate([logmag - (logR - 0.5 * np.log1p(wt * wt)), phase + np.arctan(wt)])

    # start: R from the low-frequency magnitude corrected by its phase, tau from tan(-phase) = w tau
    tau0 = float(np.median(np.clip(np.tan(-phase.clip(-1.5, 0.0)), 0, None) / w))
    R0 = float(np.median(np.abs(z) * np.sqrt(1 + (w * tau0) ** 2)))
    scale_tau = max(tau0, 1.0 / w.max())
    sol = least_squares(resid, [math.log(R0), tau0], bounds=([-np.inf, 0.0], [np.inf, np.inf]),
                        x_scale=[1.0, scale_tau], xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    logR, tau = sol.x
    R = math.exp(logR)
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    return RcFit(RcModel(R, float(tau / R)), rms, rms > RESIDUAL_FLAG)


@dataclass(frozen=True, eq=False)
class BodeSummary:
    freqs: np.ndarray
    median_mag: np.ndarray
    iqr_mag: np.ndarray
    median_phase_deg: np.ndarray
    iqr_phase_deg: np.ndarray

    def at(self, f_hz: float) -> dict:
        """Values interpolated (in log frequency) at ``f_hz``."""
        lf = np.log(self.freqs)
        g = lambda y: float(np.interp(math.log(f_hz), lf, y))  # noqa: E731
        return {"freq_hz": f_hz, "median_mag": g(self.median_mag), "iqr_mag": g(self.iqr_mag),
                "median_phase_deg": g(self.median_phase_deg), "iqr_phase_deg": g(self.iqr_phase_deg)}


def _iqr_cols(x: np.ndarray) -> np.ndarray:
    q1, q3 = np.percentile(x, [25, 75], axis=0)
    return q3 - q1


def aggregate_bode(freqs, z_pairs) -> BodeSummary:
    """Median and IQR over electrode pairs (rows of ``z_pairs``) at each frequency."""
    f = np.asarray(freqs, dtype=float)
    z = np.atleast_2d(np.asarray(z_pairs, dtype=complex))
    if z.shape[1] != len(f):
        raise ImpedanceError(f"spectra have {z.shape[1]} points but the grid has {len(f)}")
    if np.any(np.diff(f) <= 0):
        raise ImpedanceError("frequency grid must be strictly increasing")
    mag, ph = np.abs(z), np.degrees(np.angle(z))
    return BodeSummary(f, np.median(mag, axis=0), _iqr_cols(mag), np.median(ph, axis=0), _iqr_cols(ph))


def stack_spectra(spectra) -> tuple[np.ndarray, np.ndarray]:
    """[(freqs, z), ...] -> (freqs, pairs x freqs) after checking every grid is identical."""
    f0 = np.asarray(spectra[0][0], dtype=float)
    for f, _ in spectra[1:]:
        if np.shape(f) != f0.shape or not np.allclose(f, f0, rtol=1e-12, atol=0):
            raise ImpedanceError("spectra use different frequency grids")
    return f0, np.array([np.asarray(z, dtype=complex) for _, z in spectra])


def per_interface(z_pair):
    """Single electrode-skin impedance from a two-electrode series measurement (equal split)."""
    return np.asarray(z_pair) / 2.0


def divider_attenuation(z_e, z_in=AMP_INPUT_IMPEDANCE_OHM) -> tuple[complex, float]:
    """Gain zIn / (zIn + zE) of the electrode / amplifier divider and its magnitude in dB."""
    z_in = complex(z_in)
    if abs(z_in) == 0:
        raise ImpedanceError("amplifier input impedance must be non-zero")
    g = z_in / (z_in + complex(z_e))
    return g, 20.0 * math.log10(abs(g))


def normalize_by_area(z_magnitude, area_cm2: float = ELECTRODE_AREA_CM2):
    if not area_cm2 > 0:
        raise ImpedanceError("area must be positive")
    return np.asarray(z_magnitude, dtype=float) * area_cm2 if np.ndim(z_magnitude) else float(z_magnitude) * area_cm2


# ---- spectrogram ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Spectrogram:
    times: np.ndarray
    freqs: np.ndarray
    db: np.ndarray  # frames x bins
    win_len: int
    hop: int


def hann(n: int) -> np.ndarray:
    """Periodic raised-cosine window."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def spectrogram(x, fs_hz: float, win_len: int = 256, hop: int | None = None,
                floor_db: float = -120.0) -> Spectrogram:
    """Short-time power spectrum in dB.

    Bin powers are one-sided and scaled so that each frame's bins sum to the
    energy of the windowed frame, sum((w * x)^2).
    """
    x = np.asarray(x, dtype=float)
    hop = hop or win_len // 2
    if win_len < 2 or hop < 1 or win_len > len(x):
        raise ImpedanceError(f"invalid window {win_len} / hop {hop} for {len(x)} samples")
    w = hann(win_len)
    frames = np.lib.stride_tricks.sliding_window_view(x, win_len)[::hop] * w
    X = np.fft.rfft(frames, axis=1)
    p = np.abs(X) ** 2 / win_len
    p[:, 1:(win_len + 1) // 2] *= 2.0  # fold negative frequencies (Nyquist bin stays single)
    db = 10.0 * np.log10(np.maximum(p, 10.0 ** (floor_db / 10.0)))
    times = (np.arange(len(frames)) * hop + (win_len - 1) / 2.0) / fs_hz
    return Spectrogram(times, np.fft.rfftfreq(win_len, 1.0 / fs_hz), db, win_len, hop)


def rms_trace(x, window_len: int = 200, slide: int = 25) -> np.ndarray:
    """Sliding RMS of the offset-free, rectified signal (same windows as the envelope pipeline)."""
    x = np.asarray(x, dtype=float)
    return sliding_rms(np.abs(x - x.mean()), window_len, slide)


def compare_emg(a, b, fs_hz: float, window_len: int = 200, slide: int = 25,
                win_len: int = 256, hop: int | None = None) -> tuple[float, float]:
    """(RMSE between RMS traces in mV, RMSE between spectrograms in dB); inputs in volts."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ImpedanceError("signals must have equal length")
    ra, rb = rms_trace(a, window_len, slide), rms_trace(b, window_len, slide)
    sa, sb = spectrogram(a, fs_hz, win_len, hop), spectrogram(b, fs_hz, win_len, hop)
    return rmse(ra, rb) * 1e3, rmse(sa.db, sb.db)


def rmse(a, b) -> float:
    return float(np.sqrt(np.mean((np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) ** 2)))


# ---- measurement CSV and synthetic sweeps -------------------------------

def save_impedance_csv(path, freqs, z_pairs, pair_ids=None) -> None:
    z = np.atleast_2d(np.asarray(z_pairs, dtype=complex))
    pair_ids = list(range(len(z))) if pair_ids is None else list(pair_ids)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair", "frequency_hz", "magnitude_ohm", "phase_deg"])
        for pid, row in zip(pair_ids, z):
            for f, v in zip(freqs, row):
                w.writerow([pid, repr(float(f)), repr(float(abs(v))), repr(float(np.degrees(np.angle(v))))])


def load_impedance_csv(path) -> tuple[np.ndarray, np.ndarray, list]:
    """Returns (freqs, pairs x freqs complex impedances, pair ids)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    need = {"pair", "frequency_hz", "magnitude_ohm", "phase_deg"}
    if not rows or not need <= set(rows[0]):
        raise ImpedanceError(f"{path}: expected columns {sorted(need)}")
    spectra: dict[str, list] = {}
    for r in rows:
        mag, ph = float(r["magnitude_ohm"]), math.radians(float(r["phase_deg"]))
        spectra.setdefault(r["pair"], []).append((float(r["frequency_hz"]), mag * complex(math.cos(ph), math.sin(ph))))
    ids = list(spectra)
    f, z = stack_spectra([(np.array([p[0] for p in spectra[i]]), np.array([p[1] for p in spectra[i]]))
                          for i in ids])
    return f, z, ids


def synthetic_spectra(rng: np.random.Generator, n_pairs: int, r_median: float, c_median: float,
                      spread: float = 0.5, freqs=None, noise: float = 0.0) -> tuple[np.ndarray, np.ndarray, list]:
    """Series pair spectra of log-normally scattered R-C electrodes (two per pair)."""
    freqs = frequency_grid() if freqs is None else np.asarray(freqs, dtype=float)
    z, models = [], []
    for _ in range(n_pairs):
        zp = 0
        for _ in range(2):
            m = RcModel(r_median * math.exp(spread * rng.standard_normal()),
                        c_median * math.exp(spread * rng.standard_normal()))
            models.append(m)
            zp = zp + rc_impedance(m, freqs)
        if noise:
            zp = zp * np.exp(noise * (rng.standard_normal(len(freqs)) + 1j * rng.standard_normal(len(freqs))))
        z.append(zp)
    return freqs, np.array(z), models


def summarize_fits(freqs, z_pairs) -> dict:
    fits = [fit_rc(freqs, zp) for zp in per_interface(z_pairs)]
    Rs = [f.model.R for f in fits]
    Cs = [f.model.C for f in fits]
    return {"R_median_ohm": float(np.median(Rs)), "R_iqr_ohm": stats.iqr(Rs),
            "C_median_F": float(np.median(Cs)), "C_iqr_F": stats.iqr(Cs),
            "flagged_pairs": [i for i, f in enumerate(fits) if f.flagged]}
