"""Recursive per-joint pose estimator."""
from .filters import butter_lowpass_sos, butterworth_lowpass
from .network import (
    EstimatorError,
    ModelWeights,
    NetworkConfig,
    backprop,
    forward,
    load_checkpoint,
    mse,
    save_checkpoint,
)
from .optim import AdamState, TrainHyper, adam_step
from .training import (
    InferResult,
    TrainResult,
    infer,
    postprocess,
    predict_one_step,
    save_loss_csv,
    split_train_test,
    teacher_forced,
    train,
)

__all__ = [
    "AdamState", "EstimatorError", "InferResult", "ModelWeights", "NetworkConfig", "TrainHyper",
    "TrainResult", "adam_step", "backprop", "butter_lowpass_sos", "butterworth_lowpass", "forward",
    "infer", "load_checkpoint", "mse", "postprocess", "predict_one_step", "save_checkpoint", "save_loss_csv",
    "split_train_test", "teacher_forced", "train",
]
