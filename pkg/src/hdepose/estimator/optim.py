"""Adam with the bias correction folded into the step size."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrainHyper:
    learning_rate: float = 1e-5
    adam_eps: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.99
    batch_size: int = 2000
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or not self.learning_rate > 0 or not self.adam_eps > 0:
            raise ValueError("invalid training hyper-parameters")


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list, grads: list, state: AdamState, hyper: TrainHyper) -> None:
    """In-place update.

    p -= lr_t * m / (sqrt(v) + eps) with lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t),
    so at t = 1 a constant gradient g moves p by -lr * g / (|g| + eps / sqrt(1 - b2)).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient and state lists differ in length")
    b1, b2 = hyper.beta1, hyper.beta2
    state.step += 1
    t = state.step
    lr_t = hyper.learning_rate * np.sqrt(1.0 - b2 ** t) / (1.0 - b1 ** t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr_t * m / (np.sqrt(v) + hyper.adam_eps)
