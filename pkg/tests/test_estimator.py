import numpy as np
import pytest
import scipy.signal
from hypothesis import given, settings
from hypothesis import strategies as st

from hdepose.estimator import (
    AdamState,
    EstimatorError,
    ModelWeights,
    NetworkConfig,
    TrainHyper,
    adam_step,
    backprop,
    butter_lowpass_sos,
    butterworth_lowpass,
    forward,
    infer,
    load_checkpoint,
    mse,
    postprocess,
    predict_one_step,
    save_checkpoint,
    save_loss_csv,
    split_train_test,
    teacher_forced,
    train,
)
from hdepose.kinematics import default_skeleton, fka


def _small(seed=0, act="softplus", hidden=(5, 4), E=6, J=4):
    return ModelWeights.init(NetworkConfig(E, J, hidden, act), seed)


def _batch(model, B=7, seed=1):
    rng = np.random.default_rng(seed)
    c = model.config
    return (rng.normal(size=(B, c.n_emg_inputs)), rng.normal(size=(B, c.n_joints)),
            rng.normal(size=(B, c.n_joints)))


# ---- gradients -----------------------------------------------------------

@pytest.mark.parametrize("act", ["softplus", "tanh", "linear"])
def test_backprop_matches_central_differences(act):
    model = _small(3, act, hidden=(12, 10), E=10, J=5)
    x, p, y = _batch(model, 9)
    _, dW, db = backprop(model, x, p, y)
    rng = np.random.default_rng(4)
    h = 1e-6
    worst = 0.0
    for param, grad in zip(model.params(), [*dW, *db]):
        flat, gflat = param.reshape(-1), grad.reshape(-1)
        for i in rng.choice(flat.size, min(flat.size, 100), replace=False):
            old = flat[i]
            flat[i] = old + h
            up = mse(model, x, p, y)
            flat[i] = old - h
            down = mse(model, x, p, y)
            flat[i] = old
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - gflat[i]) / max(abs(num), abs(gflat[i]), 1e-8))
    assert worst < 1e-4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_backprop_random_models(seed):
    model = _small(seed, hidden=(3,), E=3, J=3)
    x, p, y = _batch(model, 4, seed + 1)
    _, dW, _ = backprop(model, x, p, y)
    W = model.W[0].reshape(-1)
    i = seed % W.size
    old = W[i]
    W[i] = old + 1e-6
    up = mse(model, x, p, y)
    W[i] = old - 1e-6
    down = mse(model, x, p, y)
    W[i] = old
    num = (up - down) / 2e-6
    g = dW[0].reshape(-1)[i]
    assert abs(num - g) <= 1e-4 * max(abs(num), abs(g), 1e-6)


def test_zero_error_zero_gradient_and_batch_duplication():
    model = _small(5)
    x, p, _ = _batch(model)
    y = forward(model, x, p)
    loss, dW, db = backprop(model, x, p, y)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in [*dW, *db])
    _, _, y = _batch(model, seed=9)
    _, dW1, db1 = backprop(model, x, p, y)
    _, dW2, db2 = backprop(model, np.vstack([x, x]), np.vstack([p, p]), np.vstack([y, y]))
    for a, b in zip([*dW1, *db1], [*dW2, *db2]):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


# ---- structure -------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.floats(-100, 100))
def test_output_j_ignores_its_own_previous_angle(j, value):
    model = _small(7)
    x, p, _ = _batch(model, 3)
    base = forward(model, x, p)
    q = p.copy()
    q[:, j] = value
    out = forward(model, x, q)
    assert np.array_equal(out[:, j], base[:, j])


def test_other_joints_do_influence():
    model = _small(7)
    x, p, _ = _batch(model, 3)
    q = p.copy()
    q[:, 0] += 1.0
    assert not np.allclose(forward(model, x, q)[:, 1:], forward(model, x, p)[:, 1:])


def test_zero_weights_zero_output():
    model = ModelWeights.zeros(NetworkConfig(6, 4, (5,)))
    x, p, _ = _batch(model)
    assert np.all(forward(model, x, p) == 0)


def test_linear_identity_network():
    # a single linear layer that copies EMG channel j to joint j
    cfg = NetworkConfig(3, 3, (), "linear")
    m = ModelWeights.zeros(cfg)
    for j in range(3):
        m.W[0][j, j, 0] = 1.0
    x = np.random.default_rng(0).normal(size=(5, 3))
    np.testing.assert_array_equal(forward(m, x, np.zeros((5, 3))), x)
    np.testing.assert_array_equal(forward(m, x[0], np.zeros(3)), x[0])


def test_shape_errors():
    m = _small()
    with pytest.raises(EstimatorError):
        forward(m, np.zeros((2, 5)), np.zeros((2, 4)))
    with pytest.raises(EstimatorError):
        NetworkConfig(activation="swish")
    with pytest.raises(EstimatorError):
        ModelWeights(m.config, m.W[:1], m.b[:1])


# ---- Adam ------------------------------------------------------------------

def test_adam_zero_gradient_is_a_no_op():
    p = [np.array([1.0, -2.0])]
    st_ = AdamState.like(p)
    for _ in range(3):
        adam_step(p, [np.zeros(2)], st_, TrainHyper())
    np.testing.assert_array_equal(p[0], [1.0, -2.0])


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10).filter(lambda g: abs(g) > 1e-6), st.floats(1e-6, 1e-1))
def test_adam_first_step_closed_form(g, lr):
    hy = TrainHyper(learning_rate=lr)
    p = [np.array([0.5])]
    adam_step(p, [np.array([g])], AdamState.like(p), hy)
    expected = 0.5 - lr * g / (abs(g) + hy.adam_eps / np.sqrt(1 - hy.beta2))
    assert p[0][0] == pytest.approx(expected, rel=1e-12)


def test_paper_default_hyper_parameters():
    hy = TrainHyper()
    assert (hy.learning_rate, hy.adam_eps, hy.beta1, hy.beta2, hy.batch_size, hy.epochs) == \
        (1e-5, 1e-3, 0.9, 0.99, 2000, 200)


# ---- training ----------------------------------------------------------------

def _linear_problem(n=3000, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 4))
    A = rng.normal(size=(4, 3))
    return X, X @ A


def test_linear_realizable_target_trains_to_zero():
    X, Y = _linear_problem()
    m = ModelWeights.init(NetworkConfig(4, 3, (), "linear"), 0)
    res = train(m, X, Y, TrainHyper(learning_rate=0.01, batch_size=200, epochs=100))
    assert res.loss_history[-1] < 1e-12


def test_training_is_deterministic(tmp_path):
    X, Y = _linear_problem(800)
    hy = TrainHyper(learning_rate=1e-2, batch_size=100, epochs=5, seed=3)
    runs = []
    for k in range(2):
        m = ModelWeights.init(NetworkConfig(4, 3, (6,)), 1)
        r = train(m, X, Y, hy)
        save_loss_csv(tmp_path / f"l{k}.csv", r)
        save_checkpoint(tmp_path / f"m{k}.json", m)
        runs.append(r.loss_history)
    assert runs[0] == runs[1]
    assert (tmp_path / "l0.csv").read_bytes() == (tmp_path / "l1.csv").read_bytes()
    assert (tmp_path / "m0.json").read_bytes() == (tmp_path / "m1.json").read_bytes()


def test_training_errors():
    X, Y = _linear_problem(50)
    m = ModelWeights.init(NetworkConfig(4, 3, ()), 0)
    with pytest.raises(EstimatorError, match="batch"):
        train(m, X, Y, TrainHyper(batch_size=100))
    with pytest.raises(EstimatorError, match="non-finite"), np.errstate(all="ignore"):
        train(m, X * 1e300, Y * 1e300, TrainHyper(batch_size=10, epochs=2, learning_rate=1.0))


def test_teacher_forced_and_split():
    env, ang = np.arange(10.0)[:, None], np.arange(10.0)[:, None] * 2
    x, p, y = teacher_forced(env, ang)
    assert x[0, 0] == 1 and p[0, 0] == 0 and y[0, 0] == 2
    tr, te = split_train_test(12)
    assert len(te) == 2 and tr[-1] + 1 == te[0]
    tr, te = split_train_test(6, trial_ids=[0, 0, 1, 1, 2, 2])
    assert list(te) == [4, 5]


# ---- inference ---------------------------------------------------------------

def test_infer_fixed_point_constant_series():
    m = _small(2)
    e = np.random.default_rng(0).normal(size=6)
    a = np.zeros(4)
    for _ in range(500):  # iterate to the fixed point
        a = forward(m, e, a)
    res = infer(m, np.tile(e, (20, 1)), a)
    np.testing.assert_allclose(res.angles, np.tile(a, (20, 1)), atol=1e-12)


def test_infer_first_step_equals_teacher_forced():
    m = _small(3)
    x, p, _ = _batch(m, 5)
    res = infer(m, x, p[0])
    np.testing.assert_array_equal(res.angles[0], predict_one_step(m, x[:1], p[:1])[0])
    assert res.angles.shape == (5, 4) and len(res.step_latency_s) == 5


def test_infer_latency_budget():
    m = ModelWeights.init(NetworkConfig(), 0)
    env = np.random.default_rng(0).normal(size=(200, 64))
    res = infer(m, env, np.zeros(29))
    assert res.mean_latency_ms < 10.0


def test_infer_non_finite_aborts():
    m = _small(1, act="linear", hidden=())
    with pytest.raises(EstimatorError, match="non-finite"), np.errstate(all="ignore"):
        infer(m, np.full((3, 6), np.inf), np.zeros(4))


def test_checkpoint_round_trip(tmp_path):
    m = _small(8)
    save_checkpoint(tmp_path / "c.json", m, {"note": "x"})
    ck = load_checkpoint(tmp_path / "c.json")
    assert ck.model.config == m.config and ck.meta == {"note": "x"}
    for a, b in zip(ck.model.params(), m.params()):
        assert a.tobytes() == b.tobytes()
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(EstimatorError):
        load_checkpoint(tmp_path / "bad.json")


def test_postprocess_is_forward_kinematics():
    sk = default_skeleton()
    ang = np.zeros((2, 29))
    np.testing.assert_array_equal(postprocess(ang, sk.rest_pose, sk), fka(np.tile(sk.rest_pose, (2, 1)), sk))


# ---- Butterworth -------------------------------------------------------------

def _steady_gain(f, fs=2048 / 25, fc=1.0, n_periods=None):
    n = int(fs * 120)
    t = np.arange(n) / fs
    y = butterworth_lowpass(np.sin(2 * np.pi * f * t), fc, fs)
    tail = slice(n // 2, n)  # transients have long decayed
    basis = np.column_stack([np.sin(2 * np.pi * f * t[tail]), np.cos(2 * np.pi * f * t[tail])])
    coef = np.linalg.lstsq(basis, y[tail], rcond=None)[0]
    return 20 * np.log10(np.hypot(*coef))


def test_minus_three_db_at_cutoff():
    assert _steady_gain(1.0) == pytest.approx(-3.0103, abs=0.1)


def test_decade_attenuation():
    assert _steady_gain(10.0) <= -115.0


def test_dc_gain_unity_and_monotone_response():
    sos = butter_lowpass_sos(6, 1.0, 2048 / 25)
    w, h = scipy.signal.sosfreqz(sos, worN=np.linspace(0, 40, 400), fs=2048 / 25)
    assert abs(h[0]) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(np.abs(h)) <= 1e-12)


@pytest.mark.parametrize("order,fc,fs", [(6, 1.0, 81.92), (5, 3.0, 100.0), (2, 10.0, 1000.0), (1, 0.5, 20.0)])
def test_design_matches_reference(order, fc, fs):
    ours = butter_lowpass_sos(order, fc, fs)
    ref = scipy.signal.butter(order, fc, fs=fs, output="sos")
    w = np.linspace(0, fs / 2, 300, endpoint=False)
    _, h1 = scipy.signal.sosfreqz(ours, worN=w, fs=fs)
    _, h2 = scipy.signal.sosfreqz(ref, worN=w, fs=fs)
    np.testing.assert_allclose(h1, h2, atol=1e-9)


def test_filter_linearity_and_options():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(500, 3)), rng.normal(size=(500, 3))
    np.testing.assert_allclose(butterworth_lowpass(2 * a + 3 * b),
                               2 * butterworth_lowpass(a) + 3 * butterworth_lowpass(b), atol=1e-9)
    const = np.full((300, 2), 4.0)
    np.testing.assert_allclose(butterworth_lowpass(const, steady_start=True), 4.0, atol=1e-12)
    np.testing.assert_allclose(butterworth_lowpass(const, zero_phase=True), 4.0, atol=1e-9)
    with pytest.raises(ValueError):
        butter_lowpass_sos(6, 50.0, 81.92)
