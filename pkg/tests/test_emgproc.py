import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdepose.dataio import EmgRecording
from hdepose.emgproc import (
    EmgProcError,
    Standardizer,
    load_envelope,
    ndv,
    ndv_compare,
    preprocess,
    rms_envelope,
    save_envelope,
    sliding_rms,
    window_centres,
)


def naive_rms(x, W, s):
    """Window-by-window quadratic mean, written out longhand."""
    out = []
    k = 0
    while k * s + W <= len(x):
        seg = x[k * s:k * s + W]
        out.append([math.sqrt(sum(v * v for v in seg[:, c]) / W) for c in range(x.shape[1])])
        k += 1
    return np.array(out)


@pytest.mark.parametrize("slide", [1, 25, 29, 33])
def test_sliding_rms_matches_naive(slide):
    rng = np.random.default_rng(slide)
    x = rng.normal(size=(700, 3))
    np.testing.assert_allclose(sliding_rms(x, 200, slide), naive_rms(x, 200, slide), rtol=1e-12, atol=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 12), st.integers(0, 60))
def test_sliding_rms_window_count(W, s, extra):
    x = np.ones(W + extra)
    out = sliding_rms(x, W, s)
    assert len(out) == extra // s + 1
    np.testing.assert_allclose(out, 1.0)


def test_sliding_rms_errors():
    with pytest.raises(EmgProcError):
        sliding_rms(np.ones(10), 11, 1)
    with pytest.raises(EmgProcError):
        sliding_rms(np.ones(10), 5, 0)


def test_window_centres():
    t = window_centres(400, 200, 25, 2048.0)
    assert t[0] == pytest.approx(99.5 / 2048)
    np.testing.assert_allclose(np.diff(t), 25 / 2048)
    assert 200 / 2048 * 1e3 == pytest.approx(97.7, abs=0.05)


def _sine_recording(A_volts, f=64.0, n=4096, fs=2048.0):
    vpc = 2.4 / 65536 / 192
    t = np.arange(n) / fs
    counts = np.round(A_volts * np.sin(2 * np.pi * f * t) / vpc).astype(np.int16)
    return EmgRecording(counts[:, None], grid=(1, 1))


def test_sine_rms():
    A = 1e-3
    env, _ = rms_envelope(_sine_recording(A), 192, 25, scale=False)  # 192 samples = 6 periods of 64 Hz
    np.testing.assert_allclose(env, A / math.sqrt(2), rtol=0.01)
    scaled, _ = rms_envelope(_sine_recording(A), 192, 25)
    np.testing.assert_allclose(scaled, A / math.sqrt(2) / 1e-4, rtol=0.01)


def test_constant_channel_is_zero_and_flagged_dead():
    rec = EmgRecording(np.full((500, 2), 123, dtype=np.int16), grid=(1, 2))
    env, _ = rms_envelope(rec, 200, 25)
    assert np.all(env == 0)
    with pytest.warns(UserWarning, match="dead"):
        out = preprocess(rec, 200, 25)
    assert out.standardizer.dead == (0, 1)
    np.testing.assert_array_equal(out.standardizer.std, 1.0)


def test_standardized_training_channels():
    rng = np.random.default_rng(0)
    rec = EmgRecording(rng.integers(-3000, 3000, (8000, 8)).astype(np.int16), grid=(2, 4))
    env = preprocess(rec, 200, 29, train_rows=slice(0, 200))
    z = env.values[:200]
    assert np.all(np.abs(z.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(z.std(axis=0) - 1) < 1e-9)
    # statistics reused on new data
    again = preprocess(rec, 200, 29, standardizer=env.standardizer)
    np.testing.assert_array_equal(again.values, env.values)


def test_standardization_idempotent():
    z = Standardizer.fit(np.random.default_rng(1).normal(3, 2, (300, 5))).apply(
        np.random.default_rng(1).normal(3, 2, (300, 5)))
    np.testing.assert_allclose(Standardizer.fit(z).apply(z), z, atol=1e-12)


def test_envelope_csv_round_trip(tmp_path):
    rec = EmgRecording(np.random.default_rng(2).integers(-500, 500, (1000, 4)).astype(np.int16), grid=(2, 2))
    env = preprocess(rec, 200, 33)
    save_envelope(tmp_path / "env.csv", env)
    back = load_envelope(tmp_path / "env.csv")
    np.testing.assert_array_equal(back.values, env.values)
    np.testing.assert_array_equal(back.times, env.times)
    assert (back.window_len, back.slide) == (200, 33)
    np.testing.assert_array_equal(back.standardizer.mean, env.standardizer.mean)


# ---- NDV ------------------------------------------------------------

def test_ndv_identical_channels_zero():
    B = np.outer(np.linspace(1, 2, 20), np.ones(96))
    r = ndv(B)
    np.testing.assert_allclose(r.proximo_distal, 0, atol=1e-15)
    np.testing.assert_allclose(r.circumferential, 0, atol=1e-15)
    assert r.proximo_distal.shape == (16,) and r.circumferential.shape == (6,)


def test_ndv_hand_computed_2x2():
    # channels row-major on a 2 x 2 grid: c0=(r0,c0) c1=(r0,c1) c2=(r1,c0) c3=(r1,c1)
    B = np.array([[1.0, 2.0, 3.0, 4.0],
                  [3.0, 2.0, 1.0, 4.0]])
    # temporal means are 2, 2, 2, 4 -> normalised rows
    n = np.array([[0.5, 1.0, 1.5, 1.0],
                  [1.5, 1.0, 0.5, 1.0]])
    # along rows (fixed column): col0 pairs (c0,c2), col1 pairs (c1,c3); var with n-1 of two values = d^2/2
    e1 = [np.mean([(0.5 - 1.5) ** 2 / 2, (1.5 - 0.5) ** 2 / 2]), np.mean([0.0, 0.0])]
    # along columns (fixed row): row0 pairs (c0,c1), row1 pairs (c2,c3)
    e2 = [np.mean([(0.5 - 1.0) ** 2 / 2, (1.5 - 1.0) ** 2 / 2]), np.mean([(1.5 - 1.0) ** 2 / 2, (0.5 - 1.0) ** 2 / 2])]
    assert n[0, 0] == 0.5
    r = ndv(B, grid=(2, 2))
    np.testing.assert_allclose(r.proximo_distal, e1)
    np.testing.assert_allclose(r.circumferential, e2)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_ndv_scale_invariant(c):
    B = np.random.default_rng(3).uniform(0.5, 2.0, (30, 96))
    a, b = ndv(B), ndv(c * B)
    np.testing.assert_allclose(a.proximo_distal, b.proximo_distal, rtol=1e-9)
    np.testing.assert_allclose(a.circumferential, b.circumferential, rtol=1e-9)


def test_ndv_sessions_concatenate_and_zero_mean_channel_excluded():
    rng = np.random.default_rng(4)
    s1, s2 = rng.uniform(1, 2, (10, 96)), rng.uniform(1, 2, (12, 96))
    r = ndv([s1, s2])
    np.testing.assert_allclose(r.proximo_distal, ndv(np.vstack([s1, s2])).proximo_distal)
    s1[:, 5] = 0
    s2[:, 5] = 0
    with pytest.warns(UserWarning, match="excluded"):
        r = ndv([s1, s2])
    assert r.excluded == (5,) and np.all(np.isfinite(r.proximo_distal))


def test_ndv_shape_mismatch():
    with pytest.raises(EmgProcError):
        ndv(np.ones((3, 95)))


def test_ndv_compare_symmetric():
    x = np.random.default_rng(5).uniform(size=40)
    c = ndv_compare(x, x.copy())
    assert c.report.statistic == pytest.approx(800.0)
    assert c.report.p_value == pytest.approx(0.5, abs=0.02)
    assert c.median_pd == c.median_circ
    d = c.to_dict()
    assert d["test"]["alternative"] == "less"
