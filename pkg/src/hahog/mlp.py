"""Small feed-forward binary classifier trained by back-propagation.

Training runs in double precision with an Adam-style optimizer and is fully
deterministic given (seed, data, config).  Serialized models carry
single-precision weights and embed the feature configuration they were
trained for, so a model file is self-describing.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ModelFormatError
from .features import FeatureConfig

MAGIC = b"HAHOG-MLP\x01"
ALPHA_EPS = 1e-12  # forward output clamped to the open interval (0, 1)


@dataclass
class TrainConfig:
    """Hyperparameters; the seed fixes all stochasticity."""

    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 40
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    patience: int = 10

    def __post_init__(self) -> None:
        if (
            self.learning_rate <= 0
            or self.batch_size <= 0
            or self.epochs < 0
            or not (0 < self.beta1 < 1)
            or not (0 < self.beta2 < 1)
            or self.adam_eps <= 0
            or self.patience <= 0
        ):
            raise ConfigError("invalid training hyperparameters")


@dataclass
class MlpModel:
    """Layer dimensions, weights, and biases; output unit is logistic."""

    layer_dims: list[int]
    weights: list[np.ndarray]  # weights[i] has shape (dims[i+1], dims[i])
    biases: list[np.ndarray]
    activations: list[str] = field(default_factory=list)
    feature_config: FeatureConfig | None = None

    def __post_init__(self) -> None:
        n = len(self.layer_dims) - 1
        if len(self.weights) != n or len(self.biases) != n:
            raise ConfigError("weights/biases inconsistent with layer_dims")
        if not self.activations:
            self.activations = ["relu"] * (n - 1) + ["logistic"]
        if self.activations[-1] != "logistic" or self.layer_dims[-1] != 1:
            raise ConfigError("output layer must be a single logistic unit")
        for i in range(n):
            if self.weights[i].shape != (self.layer_dims[i + 1], self.layer_dims[i]):
                raise ConfigError(f"weight {i} shape mismatch")
            if self.biases[i].shape != (self.layer_dims[i + 1],):
                raise ConfigError(f"bias {i} shape mismatch")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activations=list(self.activations),
            feature_config=self.feature_config,
        )


def init_model(
    layer_dims: list[int],
    seed: int = 0,
    feature_config: FeatureConfig | None = None,
) -> MlpModel:
    """Fan-in scaled uniform initialization from a seeded generator."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for din, dout in zip(layer_dims[:-1], layer_dims[1:]):
        bound = 1.0 / np.sqrt(din)
        weights.append(rng.uniform(-bound, bound, size=(dout, din)))
        biases.append(np.zeros(dout))
    return MlpModel(
        layer_dims=list(layer_dims),
        weights=weights,
        biases=biases,
        feature_config=feature_config,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic, no overflow for large |z|."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logits(model: MlpModel, x: np.ndarray) -> np.ndarray:
    a = x
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        if i < len(model.weights) - 1:
            a = np.maximum(z, 0.0)
        else:
            return z[..., 0]
    raise AssertionError("unreachable")


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray | float:
    """Score in the open interval (0, 1); accepts one vector or a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if x.shape[-1] != model.input_dim:
        raise ConfigError(
            f"input has {x.shape[-1]} features, model expects {model.input_dim}"
        )
    z = _logits(model, x if not single else x[None, :])
    alpha = np.clip(_sigmoid(z), ALPHA_EPS, 1.0 - ALPHA_EPS)
    return float(alpha[0]) if single else alpha


def _loss_and_grads(model, xb, yb):
    """Mean binary cross-entropy and its gradients for one batch."""
    acts = [xb]
    a = xb
    for i in range(len(model.weights) - 1):
        a = np.maximum(a @ model.weights[i].T + model.biases[i], 0.0)
        acts.append(a)
    z = a @ model.weights[-1].T + model.biases[-1]
    z = z[:, 0]
    # log(1 + e^z) - y*z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - yb * z))

    n = xb.shape[0]
    delta = ((_sigmoid(z) - yb) / n)[:, None]
    gw, gb = [None] * len(model.weights), [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (acts[i] > 0)
    return loss, gw, gb


def train(
    model: MlpModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig
) -> tuple[MlpModel, list[float]]:
    """Minimize mean binary cross-entropy with seeded mini-batch Adam.

    Returns a new model and the per-epoch training loss history.  Identical
    (seed, data, config) yield bit-identical weights.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DataError("x must be (n, d) with matching labels")
    if not np.isfinite(x).all():
        raise DataError("non-finite feature values in training data")
    if not (np.any(y == 1.0) and np.any(y == 0.0)):
        raise DataError("training data must contain both classes")

    model = model.copy()
    if cfg.epochs == 0:
        return model, []

    rng = np.random.default_rng(cfg.seed)
    params = model.weights + model.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    t = 0
    history: list[float] = []
    best = np.inf
    stale = 0
    n = x.shape[0]
    nw = len(model.weights)

    for _epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = perm[s : s + cfg.batch_size]
            loss, gw, gb = _loss_and_grads(model, x[idx], y[idx])
            total += loss * idx.size
            t += 1
            lr_t = cfg.learning_rate * np.sqrt(1 - cfg.beta2**t) / (1 - cfg.beta1**t)
            for p, g, mi, vi in zip(params, gw + gb, m, v):
                mi *= cfg.beta1
                mi += (1 - cfg.beta1) * g
                vi *= cfg.beta2
                vi += (1 - cfg.beta2) * g * g
                p -= lr_t * mi / (np.sqrt(vi) + cfg.adam_eps)
        epoch_loss = total / n
        history.append(epoch_loss)
        if epoch_loss < best - 1e-12:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return model, history


def grad_check(model: MlpModel, x: np.ndarray, y: float, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Error is |analytic - numeric| / max(1, |analytic| + |numeric|), evaluated
    over every weight and bias in double precision.
    """
    x = np.asarray(x, dtype=np.float64)[None, :]
    yb = np.asarray([float(y)])
    _, gw, gb = _loss_and_grads(model, x, yb)
    analytic = gw + gb
    params = model.weights + model.biases

    def loss_at() -> float:
        loss, _, _ = _loss_and_grads(model, x, yb)
        return loss

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = loss_at()
            flat[i] = orig - step
            lm = loss_at()
            flat[i] = orig
            gn = (lp - lm) / (2 * step)
            err = abs(gflat[i] - gn) / max(1.0, abs(gflat[i]) + abs(gn))
            worst = max(worst, err)
    return worst


def model_bytes(model: MlpModel) -> bytes:
    """Serialized form: magic, self-describing JSON header, float32 blocks."""
    header = {
        "layer_dims": model.layer_dims,
        "activations": model.activations,
        "feature_config": (
            model.feature_config.to_dict() if model.feature_config else None
        ),
    }
    hjson = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(hjson)))
    buf.write(hjson)
    for w, b in zip(model.weights, model.biases):
        buf.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return buf.getvalue()


def save_model(model: MlpModel, path: str | Path) -> None:
    Path(path).write_bytes(model_bytes(model))


def load_model(path: str | Path) -> MlpModel:
    """Read a model file; weights are upcast to float64 for inference."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ModelFormatError(f"{path}: bad magic header")
    off = len(MAGIC)
    try:
        (hlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        header = json.loads(raw[off : off + hlen].decode("utf-8"))
        off += hlen
        dims = [int(d) for d in header["layer_dims"]]
        acts = [str(a) for a in header["activations"]]
        fc = header.get("feature_config")
    except (struct.error, json.JSONDecodeError, KeyError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: unreadable header") from exc

    weights, biases = [], []
    for din, dout in zip(dims[:-1], dims[1:]):
        wn, bn = 4 * dout * din, 4 * dout
        if off + wn + bn > len(raw):
            raise ModelFormatError(f"{path}: truncated weight payload")
        w = np.frombuffer(raw, dtype="<f4", count=dout * din, offset=off)
        off += wn
        b = np.frombuffer(raw, dtype="<f4", count=dout, offset=off)
        off += bn
        weights.append(w.reshape(dout, din).astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(raw):
        raise ModelFormatError(f"{path}: trailing bytes after weight payload")
    try:
        return MlpModel(
            layer_dims=dims,
            weights=weights,
            biases=biases,
            activations=acts,
            feature_config=FeatureConfig.from_dict(fc) if fc else None,
        )
    except ConfigError as exc:
        raise ModelFormatError(f"{path}: inconsistent shapes") from exc


def with_feature_config(model: MlpModel, fc: FeatureConfig) -> MlpModel:
    out = model.copy()
    out.feature_config = fc
    return out
