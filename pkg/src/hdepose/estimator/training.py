"""Teacher-forced training, recursive inference and post-processing."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from ..kinematics import HandSkeleton, denormalize_angles, fka
from .network import EstimatorError, ModelWeights, backprop, forward
from .optim import AdamState, TrainHyper, adam_step


def split_train_test(n_rows: int, trial_ids=None, test_fraction: float = 1.0 / 6.0):
    """Index arrays (train, test).

    With trial ids the last trial is held out; otherwise the last
    ``test_fraction`` of rows, kept contiguous so no test window overlaps training.
    """
    idx = np.arange(n_rows)
    if trial_ids is not None:
        trial_ids = np.asarray(trial_ids)
        last = trial_ids.max()
        return idx[trial_ids != last], idx[trial_ids == last]
    n_test = max(1, int(round(n_rows * test_fraction)))
    return idx[: n_rows - n_test], idx[n_rows - n_test:]


def teacher_forced(envelope: np.ndarray, angles: np.ndarray):
    """(emg_t, angles_{t-1}) -> angles_t triples for t = 1..n-1."""
    envelope = np.asarray(envelope, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if len(envelope) != len(angles):
        raise EstimatorError("envelope and angles must have the same number of rows")
    return envelope[1:], angles[:-1], angles[1:]


@dataclass
class TrainResult:
    model: ModelWeights
    loss_history: list = field(default_factory=list)
    val_history: list = field(default_factory=list)
    seconds: float = 0.0


def train(model: ModelWeights, envelope: np.ndarray, angles: np.ndarray, hyper: TrainHyper,
          val: tuple[np.ndarray, np.ndarray] | None = None, log=None) -> TrainResult:
    """Minibatch Adam on the mean squared error with ground-truth previous angles as inputs.

    ``envelope`` and ``angles`` are consecutive rows of one recording (angles
    normalised). The model is updated in place. ``loss_history`` holds the
    mean minibatch loss of every epoch.
    """
    X, P, Y = teacher_forced(envelope, angles)
    if len(X) < hyper.batch_size:
        raise EstimatorError(f"{len(X)} training rows is fewer than one batch of {hyper.batch_size}")
    rng = np.random.default_rng(hyper.seed)
    params = model.params()
    state = AdamState.like(params)
    n_batches = len(X) // hyper.batch_size
    out = TrainResult(model)
    t0 = time.perf_counter()
    for epoch in range(hyper.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for k in range(n_batches):
            b = order[k * hyper.batch_size:(k + 1) * hyper.batch_size]
            loss, dW, db = backprop(model, X[b], P[b], Y[b])
            if not np.isfinite(loss):
                raise EstimatorError(f"non-finite loss at epoch {epoch}, batch {k}; "
                                     f"try a smaller learning rate (now {hyper.learning_rate})")
            adam_step(params, [*dW, *db], state, hyper)
            total += loss
        out.loss_history.append(total / n_batches)
        if val is not None:
            vx, vp, vy = teacher_forced(*val)
            out.val_history.append(float(np.mean((forward(model, vx, vp) - vy) ** 2)))
        if log is not None:
            log(epoch, out.loss_history[-1], out.val_history[-1] if out.val_history else None)
    out.seconds = time.perf_counter() - t0
    return out


@dataclass
class InferResult:
    angles: np.ndarray  # (n, J), normalised
    step_latency_s: np.ndarray

    @property
    def mean_latency_ms(self) -> float:
        return float(1e3 * self.step_latency_s.mean()) if len(self.step_latency_s) else 0.0


def infer(model: ModelWeights, envelope: np.ndarray, init_angles: np.ndarray) -> InferResult:
    """Free-running recursion: the estimate at row t is the previous-angle input at row t+1."""
    env = np.asarray(envelope, dtype=float)
    prev = np.asarray(init_angles, dtype=float).copy()
    out = np.empty((len(env), model.config.n_joints))
    lat = np.empty(len(env))
    clock = time.perf_counter
    for t in range(len(env)):
        t0 = clock()
        prev = forward(model, env[t], prev)
        lat[t] = clock() - t0
        if not np.all(np.isfinite(prev)):
            raise EstimatorError(f"non-finite estimate at row {t}")
        out[t] = prev
    return InferResult(out, lat)


def predict_one_step(model: ModelWeights, envelope: np.ndarray, prev_angles: np.ndarray) -> np.ndarray:
    """Teacher-forced predictions (each row gets the true previous angles)."""
    return forward(model, envelope, prev_angles)


def postprocess(angles_norm: np.ndarray, rest_pose, skeleton: HandSkeleton) -> np.ndarray:
    """Normalised angles -> marker positions through forward kinematics (out-of-range angles clamped)."""
    return fka(denormalize_angles(angles_norm, rest_pose), skeleton, strict=False)


def save_loss_csv(path, result: TrainResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        has_val = bool(result.val_history)
        w.writerow(["epoch", "loss", *(["val_loss"] if has_val else [])])
        for e, loss in enumerate(result.loss_history):
            w.writerow([e, repr(float(loss)), *([repr(float(result.val_history[e]))] if has_val else [])])
