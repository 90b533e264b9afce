"""Estimation metrics and one-sample 1-D SPM with a random-field threshold.

Conventions: a continuum has n nodes with unit spacing, D is n x k (k
curves, e.g. subjects). Cross-joint summaries (CJD) take the node-wise
mean and IQR over the 29 joint curves of F = t_crit - t.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import stats
from .kinematics import TIP_MARKERS

N_NODES = 256
ALPHA = 0.05


class EvalError(ValueError):
    pass


# ---- performance metrics ----------------------------------------------

@dataclass
class PerformanceReport:
    mpcc: float | None = None
    pcc_quartiles: tuple | None = None
    per_joint_pcc: list | None = None
    md: float | None = None
    wfd_quartiles: tuple | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"mpcc": self.mpcc, "pcc_quartiles": list(self.pcc_quartiles) if self.pcc_quartiles else None,
             "per_joint_pcc": self.per_joint_pcc, "md_mm": self.md,
             "wfd_quartiles_mm": list(self.wfd_quartiles) if self.wfd_quartiles else None}
        d.update(self.extra)
        return d


def per_joint_pcc(actual: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Pearson r per column; NaN where either column is constant."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 2 or len(a) < 2:
        raise EvalError(f"actual {a.shape} and predicted {p.shape} must be equal n x J with n >= 2")
    out = np.full(a.shape[1], np.nan)
    for j in range(a.shape[1]):
        try:
            out[j] = stats.pearson(a[:, j], p[:, j])
        except stats.StatsError:
            pass
    return out


def mpcc(actual: np.ndarray, predicted: np.ndarray) -> PerformanceReport:
    r = per_joint_pcc(actual, predicted)
    ok = np.isfinite(r)
    if not ok.any():
        raise EvalError("every joint has zero variance")
    if not ok.all():
        warnings.warn(f"zero-variance joints excluded from MPCC: {np.flatnonzero(~ok).tolist()}", stacklevel=2)
    good = r[ok]
    return PerformanceReport(mpcc=float(good.mean()), pcc_quartiles=stats.quartiles(good),
                             per_joint_pcc=[None if not np.isfinite(v) else float(v) for v in r])


def wfd(actual_markers: np.ndarray, predicted_markers: np.ndarray, labels,
        tips=TIP_MARKERS) -> tuple[np.ndarray, float, tuple]:
    """Per-frame mean fingertip distance (mm), its temporal mean and quartiles."""
    labels = list(labels)
    missing = [t for t in tips if t not in labels]
    if missing:
        raise EvalError(f"fingertip markers missing: {', '.join(missing)}")
    idx = [labels.index(t) for t in tips]
    a = np.asarray(actual_markers, dtype=float)[:, idx]
    p = np.asarray(predicted_markers, dtype=float)[:, idx]
    if a.shape != p.shape:
        raise EvalError("actual and predicted marker series differ in shape")
    series = np.linalg.norm(a - p, axis=-1).mean(axis=1)
    return series, float(series.mean()), stats.quartiles(series)


def performance(actual_angles, predicted_angles, actual_markers=None, predicted_markers=None,
                labels=None) -> PerformanceReport:
    rep = mpcc(actual_angles, predicted_angles)
    if actual_markers is not None:
        _, rep.md, rep.wfd_quartiles = wfd(actual_markers, predicted_markers, labels)
    return rep


# ---- 1-D SPM -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpmResult:
    t_series: np.ndarray
    t_crit: float
    f_series: np.ndarray
    dof: int
    fwhm: float
    resels: float
    flagged_nodes: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"t": self.t_series.tolist(), "t_crit": self.t_crit, "f": self.f_series.tolist(),
                "dof": self.dof, "fwhm": self.fwhm, "resels": self.resels,
                "flagged_nodes": list(self.flagged_nodes)}


def estimate_fwhm(residuals: np.ndarray) -> float:
    """Smoothness from normalised residual gradients (nodes along axis 0)."""
    r = np.asarray(residuals, dtype=float)
    ssq = (r ** 2).sum(axis=1)
    dx = np.gradient(r, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = (dx ** 2).sum(axis=1) / ssq
    v = v[np.isfinite(v)]
    if v.size == 0:
        return math.inf
    resels_per_node = np.sqrt(v / (4.0 * math.log(2.0)))
    return float(1.0 / resels_per_node.mean())


def ec_density_t(u: float, df: float) -> tuple[float, float]:
    """0-D and 1-D Euler-characteristic densities of a Student t field."""
    rho0 = stats.t_sf(u, df)
    rho1 = math.sqrt(4.0 * math.log(2.0)) / (2.0 * math.pi) * (1.0 + u * u / df) ** (-(df - 1.0) / 2.0)
    return rho0, rho1


def rft_threshold(alpha: float, df: float, n_nodes: int, fwhm: float) -> float:
    """u such that the expected Euler characteristic of the excursion set equals ``alpha``."""
    if not 0 < alpha < 1:
        raise EvalError("alpha must lie in (0, 1)")
    resels = (n_nodes - 1) / fwhm if math.isfinite(fwhm) and fwhm > 0 else 0.0

    def excess(u):
        r0, r1 = ec_density_t(u, df)
        return r0 + resels * r1 - alpha

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise EvalError("could not bracket the critical threshold")
    return float(brentq(excess, 0.0, hi, xtol=1e-12, rtol=1e-12))


def spm_one_sample_t(D: np.ndarray, alpha: float = ALPHA, eps: float = 1e-12) -> SpmResult:
    """Node-wise one-sample t of D (n nodes x k curves) against zero, with RFT critical threshold."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise EvalError("D must be n nodes x k curves")
    n, k = D.shape
    if k < 2 or n < 3:
        raise EvalError(f"need k >= 2 curves and n >= 3 nodes, got k={k}, n={n}")
    mean = D.mean(axis=1)
    sd = D.std(axis=1, ddof=1)
    flagged = np.flatnonzero(sd <= eps * max(1.0, float(np.abs(D).max())))
    if flagged.size:
        warnings.warn(f"zero-variance nodes guarded: {flagged.tolist()}", stacklevel=2)
    sd_safe = np.where(sd > 0, sd, eps)
    t = mean / (sd_safe / math.sqrt(k))
    t[(sd == 0) & (mean == 0)] = 0.0
    fwhm = estimate_fwhm(D - mean[:, None])
    df = k - 1
    u = rft_threshold(alpha, df, n, fwhm)
    resels = (n - 1) / fwhm if math.isfinite(fwhm) else 0.0
    return SpmResult(t, u, u - t, df, fwhm, resels, tuple(int(i) for i in flagged))


# ---- movement segmentation and CJD --------------------------------------

def resample(x: np.ndarray, n_nodes: int = N_NODES) -> np.ndarray:
    """Linear resampling of rows onto ``n_nodes`` equally spaced points (ends kept)."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise EvalError("need at least two rows to resample")
    src = np.linspace(0.0, 1.0, len(x))
    dst = np.linspace(0.0, 1.0, n_nodes)
    flat = x.reshape(len(x), -1)
    out = np.column_stack([np.interp(dst, src, flat[:, c]) for c in range(flat.shape[1])])
    return out.reshape((n_nodes,) + x.shape[1:])


def segment_movements(values: np.ndarray, times: np.ndarray, schedule, n_nodes: int = N_NODES,
                      tol: float = 1e-9) -> list[np.ndarray]:
    """Cut a recording into one resampled slice per prompt (pose_id, start_s, duration_s)."""
    values = np.asarray(values)
    times = np.asarray(times, dtype=float)
    if len(values) != len(times):
        raise EvalError("values and times differ in length")
    sched = sorted((float(s), float(d), int(p)) for p, s, d in schedule)
    for (s0, d0, _), (s1, _, _) in zip(sched, sched[1:]):
        if s0 + d0 > s1 + tol:
            raise EvalError(f"prompts starting at {s0} s and {s1} s overlap")
    dt = float(np.median(np.diff(times))) if len(times) > 1 else 0.0
    out = []
    for s, d, p in sched:
        if s < times[0] - dt - tol or s + d > times[-1] + dt + tol:
            raise EvalError(f"prompt {p} ({s} s + {d} s) does not fit the recording")
        sel = (times >= s - tol) & (times < s + d - tol)
        if sel.sum() < 2:
            raise EvalError(f"prompt {p} at {s} s covers fewer than two samples")
        out.append(resample(values[sel], n_nodes))
    return out


@dataclass(frozen=True, eq=False)
class CjdResult:
    mean: np.ndarray
    iqr: np.ndarray
    movement_id: int | None = None

    def to_dict(self) -> dict:
        return {"movement": self.movement_id, "mean": self.mean.tolist(), "iqr": self.iqr.tolist()}


def cjd(f_signals, movement_id=None) -> CjdResult:
    """Node-wise mean and IQR across joints of F curves (J x n)."""
    F = np.asarray(f_signals, dtype=float)
    if F.ndim != 2:
        raise EvalError("F signals must be a joints x nodes matrix of equal-length rows")
    q1, q3 = np.percentile(F, [25, 75], axis=0)
    return CjdResult(F.mean(axis=0), q3 - q1, movement_id)


def movement_cjd(D_joints: np.ndarray, alpha: float = ALPHA, movement_id=None) -> tuple[CjdResult, list]:
    """SPM for each joint's n x k difference matrix, then the cross-joint summary."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = [spm_one_sample_t(Dj, alpha) for Dj in D_joints]
    return cjd([r.f_series for r in res], movement_id), res


def cmcjd(cjd_a, cjd_b) -> float:
    """Mean over movements of the RMS difference between mean-CJD curves."""
    if len(cjd_a) != len(cjd_b) or not len(cjd_a):
        raise EvalError("CJD sets must hold the same, non-zero number of movements")
    vals = []
    for a, b in zip(cjd_a, cjd_b):
        ma = a.mean if isinstance(a, CjdResult) else np.asarray(a, dtype=float)
        mb = b.mean if isinstance(b, CjdResult) else np.asarray(b, dtype=float)
        if ma.shape != mb.shape:
            raise EvalError("movement curves differ in node count")
        vals.append(math.sqrt(float(np.mean((ma - mb) ** 2))))
    return float(np.mean(vals))


def smooth_gaussian_field(rng: np.random.Generator, n_nodes: int, k: int, fwhm: float) -> np.ndarray:
    """Unit-variance Gaussian random field (n_nodes x k) with the given FWHM in nodes."""
    sigma = fwhm / math.sqrt(8.0 * math.log(2.0))
    half = int(math.ceil(4 * sigma))
    kern = np.exp(-0.5 * (np.arange(-half, half + 1) / sigma) ** 2)
    kern /= math.sqrt((kern ** 2).sum())
    z = rng.standard_normal((n_nodes + 2 * half, k))
    y = np.apply_along_axis(lambda c: np.convolve(c, kern, mode="valid"), 0, z)
    return y
