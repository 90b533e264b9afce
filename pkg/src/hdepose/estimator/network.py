"""Per-joint recursive regression network.

One small MLP per joint. Sub-network j sees the EMG row and the previous
angles of every joint except j. All 29 sub-networks are evaluated together
with batched matmuls: layer weights are stacked as (J, fan_in, fan_out).
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_FORMAT = "hdepose-rnet"
CHECKPOINT_VERSION = 1


class EstimatorError(ValueError):
    pass


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# name -> (f, f' expressed through the pre-activation)
ACTIVATIONS = {
    "softplus": (_softplus, _sigmoid),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(z.dtype)),
    "linear": (lambda z: z, np.ones_like),
}


@dataclass(frozen=True)
class NetworkConfig:
    n_emg_inputs: int = 64
    n_joints: int = 29
    hidden_layers: tuple[int, ...] = (128, 128)
    activation: str = "softplus"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise EstimatorError(f"unknown activation {self.activation!r}")
        if self.n_emg_inputs < 1 or self.n_joints < 2 or any(h < 1 for h in self.hidden_layers):
            raise EstimatorError("layer widths must be positive and n_joints >= 2")
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))

    @property
    def input_width(self) -> int:
        return self.n_emg_inputs + self.n_joints - 1

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_width, *self.hidden_layers, 1)

    def to_dict(self) -> dict:
        return {"n_emg_inputs": self.n_emg_inputs, "n_joints": self.n_joints,
                "hidden_layers": list(self.hidden_layers), "activation": self.activation}


@dataclass(eq=False)
class ModelWeights:
    config: NetworkConfig
    W: list  # (J, fan_in, fan_out) per layer
    b: list  # (J, fan_out) per layer

    def __post_init__(self):
        J, widths = self.config.n_joints, self.config.widths
        if len(self.W) != len(widths) - 1 or len(self.b) != len(self.W):
            raise EstimatorError("layer count does not match the configuration")
        for l, (w, b) in enumerate(zip(self.W, self.b)):
            if w.shape != (J, widths[l], widths[l + 1]) or b.shape != (J, widths[l + 1]):
                raise EstimatorError(f"layer {l}: shapes {w.shape}, {b.shape} do not match the configuration")

    @classmethod
    def init(cls, config: NetworkConfig, seed: int = 0) -> "ModelWeights":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
        rng = np.random.default_rng(seed)
        J, widths = config.n_joints, config.widths
        W, b = [], []
        for fi, fo in zip(widths[:-1], widths[1:]):
            lim = 1.0 / np.sqrt(fi)
            W.append(rng.uniform(-lim, lim, (J, fi, fo)))
            b.append(rng.uniform(-lim, lim, (J, fo)))
        return cls(config, W, b)

    @classmethod
    def zeros(cls, config: NetworkConfig) -> "ModelWeights":
        J, widths = config.n_joints, config.widths
        return cls(config, [np.zeros((J, fi, fo)) for fi, fo in zip(widths[:-1], widths[1:])],
                   [np.zeros((J, fo)) for fo in widths[1:]])

    def params(self) -> list[np.ndarray]:
        return [*self.W, *self.b]

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.config, [w.copy() for w in self.W], [b.copy() for b in self.b])

    def n_params(self) -> int:
        return sum(p.size for p in self.params())


def _exclusion_index(J: int) -> np.ndarray:
    return np.array([[k for k in range(J) if k != j] for j in range(J)])


def joint_inputs(model: ModelWeights, emg: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """Stacked sub-network inputs, shape (J, B, E + J - 1)."""
    cfg = model.config
    emg = np.atleast_2d(np.asarray(emg, dtype=float))
    prev = np.atleast_2d(np.asarray(prev, dtype=float))
    if emg.shape[1] != cfg.n_emg_inputs or prev.shape[1] != cfg.n_joints or len(emg) != len(prev):
        raise EstimatorError(f"expected (B, {cfg.n_emg_inputs}) EMG and (B, {cfg.n_joints}) angles, "
                             f"got {emg.shape} and {prev.shape}")
    J, B = cfg.n_joints, len(emg)
    others = prev[:, _exclusion_index(J)].transpose(1, 0, 2)  # (J, B, J-1)
    return np.concatenate([np.broadcast_to(emg, (J, B, emg.shape[1])), others], axis=2)


def _forward_cache(model: ModelWeights, emg, prev):
    f, _ = ACTIVATIONS[model.config.activation]
    h = joint_inputs(model, emg, prev)
    hs, zs = [h], []
    last = len(model.W) - 1
    for l, (W, b) in enumerate(zip(model.W, model.b)):
        z = h @ W + b[:, None, :]
        zs.append(z)
        h = z if l == last else f(z)
        hs.append(h)
    return hs, zs


def forward(model: ModelWeights, emg, prev) -> np.ndarray:
    """Angles for each row: (B, J), or (J,) for a single row."""
    single = np.ndim(emg) == 1
    hs, _ = _forward_cache(model, emg, prev)
    out = hs[-1][:, :, 0].T
    return out[0] if single else out


def mse(model: ModelWeights, emg, prev, target) -> float:
    return float(np.mean((forward(model, emg, prev) - np.atleast_2d(target)) ** 2))


def backprop(model: ModelWeights, emg, prev, target) -> tuple[float, list, list]:
    """Loss and exact gradients of the mean squared error over all rows and joints.

    Returns (loss, dW, db) with dW/db shaped like ``model.W``/``model.b``.
    """
    _, fprime = ACTIVATIONS[model.config.activation]
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if len(target) == 0:
        raise EstimatorError("empty batch")
    hs, zs = _forward_cache(model, emg, prev)
    y = hs[-1][:, :, 0].T
    if not np.all(np.isfinite(y)):
        raise EstimatorError("non-finite activations in forward pass")
    err = y - target
    loss = float(np.mean(err ** 2))
    delta = (2.0 / err.size) * err.T[:, :, None]  # (J, B, 1)
    L = len(model.W)
    dW, db = [None] * L, [None] * L
    for l in range(L - 1, -1, -1):
        dW[l] = hs[l].transpose(0, 2, 1) @ delta
        db[l] = delta.sum(axis=1)
        if l:
            delta = (delta @ model.W[l].transpose(0, 2, 1)) * fprime(zs[l - 1])
    return loss, dW, db


# ---- checkpoint --------------------------------------------------------

def _enc(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d: dict) -> np.ndarray:
    return np.frombuffer(base64.b64decode(d["data"]), dtype="<f8").reshape(d["shape"]).copy()


@dataclass
class Checkpoint:
    model: ModelWeights
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, model: ModelWeights, meta: dict | None = None) -> None:
    """JSON with base64 little-endian float64 arrays; no timestamps, so identical models give identical bytes."""
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "config": model.config.to_dict(),
           "W": [_enc(w) for w in model.W], "b": [_enc(b) for b in model.b], "meta": meta or {}}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise EstimatorError(f"{path}: not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise EstimatorError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    c = doc["config"]
    cfg = NetworkConfig(c["n_emg_inputs"], c["n_joints"], tuple(c["hidden_layers"]), c["activation"])
    return Checkpoint(ModelWeights(cfg, [_dec(w) for w in doc["W"]], [_dec(b) for b in doc["b"]]), doc["meta"])
