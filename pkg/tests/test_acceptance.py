"""End-to-end acceptance checks, one test per criterion, each at its stated tolerance."""
import filecmp
import itertools
import json
import math
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter1d

from hdepose import cli
from hdepose.dataio import EmgRecording, SynthConfig, align, generate_synthetic, grid_mixing
from hdepose.emgproc import EmgEnvelope, Standardizer, ndv, ndv_compare, preprocess, rms_envelope, sliding_rms
from hdepose.estimator import (
    ModelWeights,
    NetworkConfig,
    TrainHyper,
    backprop,
    butterworth_lowpass,
    forward,
    infer,
    mse,
    postprocess,
    split_train_test,
    train,
)
from hdepose.evalspm import mpcc, spm_one_sample_t, wfd
from hdepose.impedance import RcModel, divider_attenuation, fit_rc, frequency_grid, normalize_by_area, rc_impedance
from hdepose.kinematics import default_skeleton, fka, ika
from hdepose.kinematics.skeleton import THUMB, WRIST
from hdepose.stats import mann_whitney_p, mann_whitney_u, t_pvalue


# ---- 1. kinematics round trip ----------------------------------------------------

@pytest.mark.slow
def test_criterion_1_kinematics_round_trip(report):
    sk = default_skeleton()
    poses = sk.random_pose(np.random.default_rng(2024), 10_000)
    t0 = time.perf_counter()
    frames = fka(poses, sk)
    wrist_err = thumb_err = 0.0
    finger_mm = []
    for a, fr in zip(poses, frames):
        r = ika(fr, sk)
        wrist_err = max(wrist_err, float(np.abs(r.angles[WRIST] - a[WRIST]).max()))
        thumb_err = max(thumb_err, float(np.abs(r.angles[THUMB] - a[THUMB]).max()))
        finger_mm.append(r.per_phase_residual["fingers"])
    secs = time.perf_counter() - t0
    mean_mm, sd_mm = float(np.mean(finger_mm)), float(np.std(finger_mm))
    ok = wrist_err < 1e-6 and thumb_err < 1e-6 and mean_mm < 1.0 and secs < 300
    report(1, ok, f"10000 poses, wrist max err {wrist_err:.2e} rad, thumb {thumb_err:.2e} rad, "
                  f"finger reprojection {mean_mm:.3f} +- {sd_mm:.3f} mm (published 0.35 +- 0.42), {secs:.0f} s")
    assert ok


# ---- 2. envelope pipeline ---------------------------------------------------------

def _naive_rms(x, W, s):
    rows = []
    k = 0
    while k * s + W <= len(x):
        rows.append([math.sqrt(math.fsum(v * v for v in x[k * s:k * s + W, c]) / W) for c in range(x.shape[1])])
        k += 1
    return np.array(rows)


def test_criterion_2_envelope(report):
    vpc = 2.4 / 2 ** 16 / 192
    fs, f = 2048.0, 64.0
    t = np.arange(8192) / fs
    worst_sine = 0.0
    for A in (2e-4, 1e-3, 5e-3):
        counts = np.round(A * np.sin(2 * np.pi * f * t) / vpc).astype(np.int16)
        env, _ = rms_envelope(EmgRecording(counts[:, None], grid=(1, 1)), 192, 25, scale=False)
        worst_sine = max(worst_sine, float(np.abs(env / (A / math.sqrt(2)) - 1).max()))

    rng = np.random.default_rng(0)
    worst_naive = 0.0
    for i in range(100):
        x = rng.normal(size=(rng.integers(200, 600), 2)) * rng.uniform(0.1, 10)
        W, s = 200, [25, 29, 33][i % 3]
        ref = _naive_rms(x, W, s)
        got = sliding_rms(x, W, s)
        assert got.shape == ref.shape
        worst_naive = max(worst_naive, float(np.abs(got - ref).max() / np.abs(ref).max()))

    rec = EmgRecording(rng.integers(-5000, 5000, (20000, 16)).astype(np.int16), grid=(2, 8))
    env = preprocess(rec, 200, 25, train_rows=slice(0, 600))
    z = env.values[:600]
    m_err = float(np.abs(z.mean(axis=0)).max())
    s_err = float(np.abs(z.std(axis=0) - 1).max())
    ok = worst_sine <= 0.01 and worst_naive <= 1e-12 and m_err < 1e-9 and s_err < 1e-9
    report(2, ok, f"sine RMS rel err {worst_sine:.2e}; naive oracle max rel diff {worst_naive:.1e} over 100 signals; "
                  f"standardised |mean| {m_err:.1e}, |std-1| {s_err:.1e}")
    assert ok


# ---- 3. statistics kernel --------------------------------------------------------

def _enumerated_p(a, b):
    pooled = np.concatenate([a, b])
    n, n1 = len(pooled), len(a)
    wins = (pooled[:, None] > pooled[None, :]).astype(float)
    masks = np.zeros((math.comb(n, n1), n))
    for k, idx in enumerate(itertools.combinations(range(n), n1)):
        masks[k, list(idx)] = 1.0
    us = np.einsum("ki,ij,kj->k", masks, wins, 1.0 - masks)
    u = wins[:n1, n1:].sum()
    lo, hi = np.mean(us <= u + 1e-9), np.mean(us >= u - 1e-9)
    return {"less": lo, "greater": hi, "two-sided": min(1.0, 2 * min(lo, hi))}


def test_criterion_3_statistics(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for n1, n2 in itertools.product(range(1, 9), repeat=2):
        x = rng.permutation(n1 + n2).astype(float)  # tie-free
        ref = _enumerated_p(x[:n1], x[n1:])
        for alt, p in ref.items():
            worst = max(worst, abs(mann_whitney_u(x[:n1], x[n1:], alt).p_value - p))
    p_fig, _ = mann_whitney_p(1549, 192, 72, "less")
    p_t = t_pvalue(-1.63, 28, "less")
    ok = worst <= 0.02 and 0.5 * 1.43e-22 <= p_fig <= 2 * 1.43e-22 and abs(p_t - 0.058) <= 0.002
    report(3, ok, f"U vs enumeration max |dp| {worst:.1e} over 64 size pairs x 3 alternatives; "
                  f"U=1549 p={p_fig:.3g} (ref 1.43e-22); paired t p={p_t:.4f} (ref 0.058)")
    assert ok


# ---- 4. Butterworth ----------------------------------------------------------------

def _steady_db(f, fs=2048 / 25):
    n = int(fs * 120)
    t = np.arange(n) / fs
    y = butterworth_lowpass(np.sin(2 * np.pi * f * t), 1.0, fs, 6)[n // 2:]
    basis = np.column_stack([np.sin(2 * np.pi * f * t[n // 2:]), np.cos(2 * np.pi * f * t[n // 2:])])
    c = np.linalg.lstsq(basis, y, rcond=None)[0]
    return 20 * math.log10(math.hypot(*c))


def test_criterion_4_filter(report):
    at_fc, decade = _steady_db(1.0), _steady_db(10.0)
    ok = abs(at_fc + 3.01) <= 0.1 and decade <= -115.0
    report(4, ok, f"gain {at_fc:.3f} dB at 1 Hz, {decade:.1f} dB at 10 Hz (steady-state sinusoids, fs 81.92 Hz)")
    assert ok


# ---- 5. estimator -----------------------------------------------------------------

def _fd_worst(seed):
    rng = np.random.default_rng(seed)
    model = ModelWeights.init(NetworkConfig(int(rng.integers(2, 8)), int(rng.integers(2, 6)),
                                            tuple(int(h) for h in rng.integers(2, 9, rng.integers(1, 3)))), seed)
    c = model.config
    B = int(rng.integers(2, 10))
    x, p, y = rng.normal(size=(B, c.n_emg_inputs)), rng.normal(size=(B, c.n_joints)), rng.normal(size=(B, c.n_joints))
    _, dW, db = backprop(model, x, p, y)
    worst = 0.0
    for param, grad in zip(model.params(), [*dW, *db]):
        flat, g = param.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + 1e-6
            up = mse(model, x, p, y)
            flat[i] = old - 1e-6
            down = mse(model, x, p, y)
            flat[i] = old
            num = (up - down) / 2e-6
            worst = max(worst, abs(num - g[i]) / max(abs(num), abs(g[i]), 1e-7))
    return worst


def _invariance_holds(seed):
    rng = np.random.default_rng(seed)
    model = ModelWeights.init(NetworkConfig(6, 5, (7, 4)), seed)
    x, p = rng.normal(size=(4, 6)), rng.normal(size=(4, 5))
    base = forward(model, x, p)
    for j in range(5):
        q = p.copy()
        q[:, j] = rng.normal(scale=100, size=4)
        if not np.array_equal(forward(model, x, q)[:, j], base[:, j]):
            return False
    return True


ACCEPT_NET = dict(hidden=(64, 64), learning_rate=1e-3, epochs=60)


@pytest.mark.slow
def test_criterion_5_estimator(report):
    grad_err = max(_fd_worst(s) for s in range(10))
    invariant = all(_invariance_holds(s) for s in range(10))

    sk = default_skeleton()
    d = generate_synthetic(SynthConfig(seed=0, duration_s=300.0, n_channels=64))
    env_raw, t = rms_envelope(d.emg, 200, 25)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = align(EmgEnvelope(env_raw, t, 200, 25), d.angles, d.angle_times, sk.rest_pose)
    tr, te = split_train_test(len(ds))
    st = Standardizer.fit(ds.envelope[tr])
    X, Y = st.apply(ds.envelope), ds.angles_norm

    model = ModelWeights.init(NetworkConfig(64, 29, ACCEPT_NET["hidden"]), 0)
    init = Y[te[0] - 1]
    baseline = infer(model, X[te], init).angles
    hy = TrainHyper(learning_rate=ACCEPT_NET["learning_rate"], epochs=ACCEPT_NET["epochs"])
    res = train(model, X[tr], Y[tr], hy)
    out = infer(model, X[te], init)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m_true = postprocess(Y[te], sk.rest_pose, sk)
        md_base = wfd(m_true, postprocess(baseline, sk.rest_pose, sk), sk.marker_labels)[1]
        md = wfd(m_true, postprocess(out.angles, sk.rest_pose, sk), sk.marker_labels)[1]
    score = mpcc(Y[te], out.angles).mpcc
    drop = 1 - md / md_base
    ok = (grad_err < 1e-4 and invariant and score >= 0.6 and drop >= 0.3 and res.seconds < 1800)
    report(5, ok, f"FD max rel err {grad_err:.1e}; own-angle invariance {'exact' if invariant else 'BROKEN'}; "
                  f"held-out MPCC {score:.3f}, MD {md:.1f} mm vs untrained {md_base:.1f} mm ({100 * drop:.0f}% lower); "
                  f"training {res.seconds:.0f} s; latency {out.mean_latency_ms:.2f} ms/step "
                  f"(published dry 32x2: MPCC 0.76, MD 26.9 mm, reported only)")
    assert ok


# ---- 6. SPM null false-positive rate ----------------------------------------------------

def test_criterion_6_spm_null(report):
    rng = np.random.default_rng(6)
    sims, k, n, fwhm = 2000, 16, 100, 20.0
    sigma = fwhm / math.sqrt(8 * math.log(2))
    pad = int(4 * sigma) + 1
    t0 = time.perf_counter()
    hits = 0
    for _ in range(sims):
        D = gaussian_filter1d(rng.standard_normal((n + 2 * pad, k)), sigma, axis=0)[pad:pad + n]
        r = spm_one_sample_t(D, 0.05)
        hits += bool(r.t_series.max() > r.t_crit)
    secs = time.perf_counter() - t0
    fwe = hits / sims
    ok = 0.03 <= fwe <= 0.08 and secs < 600
    report(6, ok, f"family-wise error {fwe:.4f} over {sims} null simulations (k=16, 100 nodes, FWHM 20), {secs:.0f} s")
    assert ok


# ---- 7. impedance ---------------------------------------------------------------

def test_criterion_7_impedance(report):
    f = frequency_grid()
    worst_fit = 0.0
    for R in (1e4, 2.2e5, 6.61e5, 3e6):
        for C in (1e-10, 1e-9, 4.8e-9, 5e-8):
            fit = fit_rc(f, rc_impedance(RcModel(R, C), f))
            worst_fit = max(worst_fit, abs(fit.model.R / R - 1), abs(fit.model.C / C - 1))
    worst_corner = 0.0
    for R, C in ((6.61e5, 4.8e-9), (2.14e5, 1e-8), (1e3, 1e-6)):
        m = RcModel(R, C)
        z = complex(rc_impedance(m, m.corner_hz))
        worst_corner = max(worst_corner, abs(abs(z) / (R / math.sqrt(2)) - 1),
                           abs(math.degrees(math.atan2(z.imag, z.real)) + 45.0) / 45.0,
                           abs(m.corner_hz * 2 * math.pi * R * C - 1))
    g, db = divider_attenuation(661e3, 80e6)
    area = normalize_by_area(661e3, 0.1257)
    ok = worst_fit <= 0.01 and worst_corner <= 1e-9 and abs(abs(g) - 0.9918) <= 1e-4 and abs(area / 83e3 - 1) <= 0.01
    report(7, ok, f"(R, C) recovery max rel err {worst_fit:.1e}; corner identities {worst_corner:.1e}; "
                  f"divider gain {abs(g):.5f} ({db:.4f} dB); area-normalised {area / 1e3:.2f} kOhm cm2 (ref 83)")
    assert ok


# ---- 8. end-to-end determinism --------------------------------------------------------

PIPELINE_CFG = {"n_subjects": 2, "duration_s": 32, "n_channels": 16, "prompt_s": 2, "n_poses": 2,
                "hidden": [16, 16], "learning_rate": 0.003, "batch_size": 200, "epochs": 4, "test_fraction": 0.25,
                "variance_duration_s": 8, "n_nodes": 64}


def test_criterion_8_determinism(report, tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"pipeline": {**PIPELINE_CFG, "seed": 7}}))
    runs = [tmp_path / "run1", tmp_path / "run2"]
    codes = [cli.main(["pipeline", "--config", str(cfg), "--out", str(r)]) for r in runs]
    capsys.readouterr()
    files = sorted(p.relative_to(runs[0]) for p in runs[0].rglob("*") if p.suffix in (".csv", ".json"))
    other = sorted(p.relative_to(runs[1]) for p in runs[1].rglob("*") if p.suffix in (".csv", ".json"))
    differ = [str(p) for p in files if not filecmp.cmp(runs[0] / p, runs[1] / p, shallow=False)]
    ok = codes == [0, 0] and files == other and len(files) > 0 and not differ
    report(8, ok, f"{len(files)} CSV/JSON artifacts from two pipeline runs, {len(differ)} differing"
                  + (f" ({', '.join(differ[:3])})" if differ else ""))
    assert ok


# ---- 9. NDV sanity ---------------------------------------------------------------------

def test_criterion_9_ndv(report):
    grid = (6, 16)
    cfg = SynthConfig(seed=9, duration_s=30.0, n_channels=96, grid=grid,
                      mixing=grid_mixing(grid, np.random.default_rng(9)))
    d = generate_synthetic(cfg)
    env, _ = rms_envelope(d.emg, 200, 25)
    r = ndv(env, grid, d.emg.channel_map)
    c = ndv_compare(r.proximo_distal, r.circumferential)
    ok = c.report.p_value < 0.01
    report(9, ok, f"median NDV proximo-distal {c.median_pd:.4f} vs circumferential {c.median_circ:.4f}, "
                  f"one-tailed U={c.report.statistic:.0f}, p={c.report.p_value:.2e}")
    assert ok
