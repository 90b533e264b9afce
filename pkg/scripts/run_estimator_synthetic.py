"""Train the per-joint recursive estimator on a synthetic recording and score it on held-out rows.

    python scripts/run_estimator_synthetic.py --lr 1e-3 --epochs 60 --hidden 64 64
"""
import argparse
import time
import warnings

from hdepose.dataio import SynthConfig, align, generate_synthetic
from hdepose.emgproc import EmgEnvelope, Standardizer, rms_envelope
from hdepose.estimator import (ModelWeights, NetworkConfig, TrainHyper, butterworth_lowpass, infer, postprocess,
                               split_train_test, train)
from hdepose.evalspm import mpcc, wfd
from hdepose.kinematics import default_skeleton


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--duration", type=float, default=300.0)
    ap.add_argument("--channels", type=int, default=64)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--hidden", type=int, nargs="+", default=[64, 64])
    a = ap.parse_args()

    sk = default_skeleton()
    d = generate_synthetic(SynthConfig(seed=a.seed, duration_s=a.duration, n_channels=a.channels))
    env, t = rms_envelope(d.emg, 200, 25)
    warnings.simplefilter("ignore")
    ds = align(EmgEnvelope(env, t, 200, 25), d.angles, d.angle_times, sk.rest_pose)
    tr, te = split_train_test(len(ds))
    st = Standardizer.fit(ds.envelope[tr])
    X, Y = st.apply(ds.envelope), ds.angles_norm
    model = ModelWeights.init(NetworkConfig(a.channels, 29, tuple(a.hidden)), a.seed)
    init = Y[te[0] - 1]
    untrained = infer(model, X[te], init).angles

    def log(epoch, loss, val):
        if epoch % 10 == 0:
            print(f"epoch {epoch:4d}  train {loss:.5f}  held-out {val:.5f}", flush=True)

    t0 = time.perf_counter()
    res = train(model, X[tr], Y[tr], TrainHyper(learning_rate=a.lr, epochs=a.epochs), val=(X[te], Y[te]), log=log)
    print(f"trained in {time.perf_counter() - t0:.0f} s")
    out = infer(model, X[te], init)
    m_true = postprocess(Y[te], sk.rest_pose, sk)
    for name, pred in (("untrained", untrained), ("raw", out.angles),
                       ("causal 1 Hz", butterworth_lowpass(out.angles)),
                       ("zero-phase 1 Hz", butterworth_lowpass(out.angles, zero_phase=True))):
        md = wfd(m_true, postprocess(pred, sk.rest_pose, sk), sk.marker_labels)[1]
        print(f"{name:>16}: MPCC {mpcc(Y[te], pred).mpcc:.3f}  MD {md:.1f} mm")
    print(f"latency {out.mean_latency_ms:.3f} ms/step, final loss {res.loss_history[-1]:.5f}")


if __name__ == "__main__":
    main()
