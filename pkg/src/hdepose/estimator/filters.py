"""Digital Butterworth low-pass from the analog prototype."""
from __future__ import annotations

import numpy as np
from scipy.signal import sosfilt, sosfilt_zi, sosfiltfilt


def butter_lowpass_sos(order: int, cutoff_hz: float, fs_hz: float) -> np.ndarray:
    """Second-order sections (one first-order section for odd orders).

    Analog poles on the left half of the unit circle are scaled to the
    pre-warped cutoff 2 fs tan(pi fc / fs) and mapped with the bilinear
    transform; all zeros land on z = -1. Each section has unit DC gain.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not 0 < cutoff_hz < fs_hz / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie in (0, {fs_hz / 2}) Hz")
    k = 2.0 * fs_hz
    wc = k * np.tan(np.pi * cutoff_hz / fs_hz)
    poles = wc * np.exp(1j * np.pi * (2 * np.arange(1, order + 1) + order - 1) / (2 * order))
    zp = (k + poles) / (k - poles)
    sections = []
    for p in zp[: order // 2]:  # one of each conjugate pair
        a = np.array([1.0, -2.0 * p.real, abs(p) ** 2])
        g = a.sum() / 4.0
        sections.append([g, 2 * g, g, *a])
    if order % 2:
        p = zp[order // 2].real
        g = (1.0 - p) / 2.0
        sections.insert(0, [g, g, 0.0, 1.0, -p, 0.0])
    return np.array(sections)


def butterworth_lowpass(x, cutoff_hz: float = 1.0, fs_hz: float = 2048.0 / 25, order: int = 6,
                        zero_phase: bool = False, steady_start: bool = False, axis: int = 0) -> np.ndarray:
    """Low-pass filter ``x`` along ``axis``.

    Causal by default. ``steady_start`` initialises the filter state as if
    the first sample had been held forever; ``zero_phase`` runs it forwards
    and backwards instead.
    """
    sos = butter_lowpass_sos(order, cutoff_hz, fs_hz)
    x = np.asarray(x, dtype=float)
    if zero_phase:
        return sosfiltfilt(sos, x, axis=axis)
    if not steady_start:
        return sosfilt(sos, x, axis=axis)
    xm = np.moveaxis(x, axis, 0)
    zi = sosfilt_zi(sos).reshape(sos.shape[0], 2, *([1] * (xm.ndim - 1))) * xm[0]
    y, _ = sosfilt(sos, xm, axis=0, zi=zi)
    return np.moveaxis(y, 0, axis)
