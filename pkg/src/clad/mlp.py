"""Cost-sensitive feedforward network trained by mini-batch backprop.

The network maps the 13 standardized features through configurable
hidden layers to a single sigmoid output. Training minimizes the
weighted binary cross-entropy

    L(batch) = mean_i w_i * ce(y_i, p_i) + l2/2 * sum ||W||^2

(bias terms are not regularized), so the data-term gradient is linear in
the instance weights. Features are z-scored with statistics taken from
the training rows only; the fitted statistics travel with the model.

Optimizer constants (documented in docs/config.md): SGD is plain;
Adam uses beta1=0.9, beta2=0.999, eps=1e-8; RMSprop uses rho=0.9,
eps=1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import ModelFormatError, TrainingError, ValidationError
from .model_io import decode_model, encode_model

ACTIVATIONS = ("relu", "sigmoid", "tanh")
OPTIMIZERS = ("sgd", "adam", "rmsprop")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
RMSPROP_RHO = 0.9
OPT_EPS = 1e-8

_P_EPS = 1e-12
_STD_FLOOR = 1e-8


@dataclass(frozen=True)
class MlpParams:
    hidden_layers: tuple[int, ...] = (4, 4, 6, 8)
    activation: str = "relu"
    optimizer: str = "adam"
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 30
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if any(h < 1 for h in self.hidden_layers):
            raise ValidationError(f"hidden layer widths must be >= 1, got {self.hidden_layers}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not (self.learning_rate > 0):
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2 < 0:
            raise ValidationError(f"l2 must be >= 0, got {self.l2}")

    def as_dict(self) -> dict:
        return {
            "hidden_layers": list(self.hidden_layers),
            "activation": self.activation,
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "l2": self.l2,
            "seed": self.seed,
        }


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return _sigmoid(z)


def _act_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    # Derivative at pre-activation z (a = activation(z) reused where cheaper).
    if kind == "relu":
        return (z > 0.0).astype(float)
    if kind == "tanh":
        return 1.0 - a * a
    return a * (1.0 - a)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class MlpModel:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    feature_means: np.ndarray
    feature_stds: np.ndarray
    schema: tuple[str, ...]
    params: MlpParams
    history: tuple[dict, ...] = field(compare=False, default=())

    def __eq__(self, other) -> bool:
        if not isinstance(other, MlpModel):
            return NotImplemented
        return (
            self.schema == other.schema
            and self.params == other.params
            and len(self.weights) == len(other.weights)
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
            and np.array_equal(self.feature_means, other.feature_means)
            and np.array_equal(self.feature_stds, other.feature_stds)
        )

    def __hash__(self):
        return hash((self.schema, self.params))

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.feature_means) / self.feature_stds

    def forward(self, x_std: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """All pre-activations and activations; the last activation is p."""
        zs: list[np.ndarray] = []
        activations: list[np.ndarray] = [x_std]
        a = x_std
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            zs.append(z)
            a = _sigmoid(z) if i == last else _act(z, self.params.activation)
            activations.append(a)
        return zs, activations

    def predict_proba_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != len(self.schema):
            raise ValidationError(
                f"feature matrix has {x.shape[1] if x.ndim == 2 else '?'} columns, "
                f"model expects {len(self.schema)}"
            )
        _, acts = self.forward(self.standardize(x))
        return np.clip(acts[-1][:, 0], _P_EPS, 1.0 - _P_EPS)

    def predict_proba(self, rec) -> float:
        return float(self.predict_proba_matrix(rec.features()[None, :])[0])

    def to_bytes(self) -> bytes:
        payload = {
            "schema": list(self.schema),
            "params": self.params.as_dict(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
        }
        return encode_model("mlp", payload)

    @classmethod
    def from_payload(cls, doc: dict) -> "MlpModel":
        try:
            params = MlpParams(**doc["params"])
            return cls(
                weights=tuple(np.asarray(w, dtype=float) for w in doc["weights"]),
                biases=tuple(np.asarray(b, dtype=float) for b in doc["biases"]),
                feature_means=np.asarray(doc["feature_means"], dtype=float),
                feature_stds=np.asarray(doc["feature_stds"], dtype=float),
                schema=tuple(doc["schema"]),
                params=params,
            )
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed mlp payload: {exc}") from None

    @classmethod
    def from_bytes(cls, blob: bytes) -> "MlpModel":
        return cls.from_payload(decode_model(blob, expect_family="mlp"))


def serialize(model: MlpModel) -> bytes:
    return model.to_bytes()


def deserialize(blob: bytes) -> MlpModel:
    return MlpModel.from_bytes(blob)


def predict_proba(model: MlpModel, rec) -> float:
    return model.predict_proba(rec)


def init_model(
    params: MlpParams,
    schema: Sequence[str],
    feature_means: np.ndarray | None = None,
    feature_stds: np.ndarray | None = None,
) -> MlpModel:
    """Seeded He-uniform (relu) or Xavier-uniform (sigmoid/tanh) init."""
    rng = np.random.default_rng(params.seed)
    sizes = [len(schema), *params.hidden_layers, 1]
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if params.activation == "relu":
            bound = np.sqrt(6.0 / fan_in)
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    d = len(schema)
    return MlpModel(
        weights=tuple(weights),
        biases=tuple(biases),
        feature_means=np.zeros(d) if feature_means is None else feature_means,
        feature_stds=np.ones(d) if feature_stds is None else feature_stds,
        schema=tuple(schema),
        params=params,
    )


def loss(model: MlpModel, x_std: np.ndarray, y: np.ndarray, weights: np.ndarray) -> float:
    """Weighted cross-entropy (batch mean) plus the L2 penalty."""
    _, acts = model.forward(x_std)
    p = np.clip(acts[-1][:, 0], _P_EPS, 1.0 - _P_EPS)
    data = float(np.mean(weights * -(y * np.log(p) + (1 - y) * np.log(1 - p))))
    if model.params.l2 > 0:
        data += 0.5 * model.params.l2 * sum(float(np.sum(w * w)) for w in model.weights)
    return data


def gradient(
    model: MlpModel, x_std: np.ndarray, y: np.ndarray, weights: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Analytic backprop gradient of ``loss`` w.r.t. weights and biases."""
    if len(x_std) == 0:
        raise ValidationError("empty batch")
    zs, acts = model.forward(x_std)
    batch = len(x_std)
    p = acts[-1][:, 0]
    # d(mean_i w_i ce_i)/dz_out for the sigmoid output unit
    delta = (weights * (p - y) / batch)[:, None]
    d_weights: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    d_biases: list[np.ndarray] = [np.empty(0)] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        d_weights[layer] = acts[layer].T @ delta
        d_biases[layer] = delta.sum(axis=0)
        if model.params.l2 > 0:
            d_weights[layer] = d_weights[layer] + model.params.l2 * model.weights[layer]
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * _act_grad(
                zs[layer - 1], acts[layer], model.params.activation
            )
    return d_weights, d_biases


class _Optimizer:
    def __init__(self, params: MlpParams, shapes):
        self.kind = params.optimizer
        self.lr = params.learning_rate
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, values, grads):
        self.t += 1
        out = []
        for i, (value, grad) in enumerate(zip(values, grads)):
            if self.kind == "sgd":
                out.append(value - self.lr * grad)
            elif self.kind == "rmsprop":
                self.v[i] = RMSPROP_RHO * self.v[i] + (1 - RMSPROP_RHO) * grad * grad
                out.append(value - self.lr * grad / (np.sqrt(self.v[i]) + OPT_EPS))
            else:  # adam
                self.m[i] = ADAM_BETA1 * self.m[i] + (1 - ADAM_BETA1) * grad
                self.v[i] = ADAM_BETA2 * self.v[i] + (1 - ADAM_BETA2) * grad * grad
                m_hat = self.m[i] / (1 - ADAM_BETA1**self.t)
                v_hat = self.v[i] / (1 - ADAM_BETA2**self.t)
                out.append(value - self.lr * m_hat / (np.sqrt(v_hat) + OPT_EPS))
        return out


def fit(
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    params: MlpParams,
    schema: Sequence[str],
) -> MlpModel:
    """Standardize, initialize from the seed, and run the epoch loop.

    Deterministic for a fixed seed: initialization and per-epoch shuffle
    order come from one seeded generator.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    w = np.asarray(weights, dtype=float)
    n = len(y)
    if x.shape[0] != n or len(w) != n:
        raise ValidationError(f"shape mismatch: x={x.shape}, y={n}, weights={len(w)}")
    if n == 0:
        raise ValidationError("empty training set")
    if not np.all(np.isfinite(x)):
        raise TrainingError("non-finite feature value in training matrix")
    if not np.all(w > 0):
        raise ValidationError("weights must be strictly positive")
    w = w / w.mean()

    means = x.mean(axis=0)
    stds = np.maximum(x.std(axis=0), _STD_FLOOR)
    x_std = (x - means) / stds

    model = init_model(params, schema, feature_means=means, feature_stds=stds)
    shuffle_rng = np.random.default_rng(params.seed + 1)
    n_layers = len(model.weights)
    opt_w = _Optimizer(params, [w_.shape for w_ in model.weights])
    opt_b = _Optimizer(params, [b.shape for b in model.biases])

    cur_w = list(model.weights)
    cur_b = list(model.biases)
    history: list[dict] = []
    for epoch in range(params.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, params.batch_size):
            idx = order[start : start + params.batch_size]
            working = MlpModel(
                weights=tuple(cur_w),
                biases=tuple(cur_b),
                feature_means=means,
                feature_stds=stds,
                schema=tuple(schema),
                params=params,
            )
            d_w, d_b = gradient(working, x_std[idx], y[idx], w[idx])
            cur_w = opt_w.step(cur_w, d_w)
            cur_b = opt_b.step(cur_b, d_b)
        working = MlpModel(
            weights=tuple(cur_w),
            biases=tuple(cur_b),
            feature_means=means,
            feature_stds=stds,
            schema=tuple(schema),
            params=params,
        )
        epoch_loss = loss(working, x_std, y, w)
        if not np.isfinite(epoch_loss) or any(not np.all(np.isfinite(m)) for m in cur_w):
            raise TrainingError(f"training diverged at epoch {epoch} (non-finite loss)")
        history.append({"epoch": epoch, "train_loss": epoch_loss})

    return MlpModel(
        weights=tuple(cur_w),
        biases=tuple(cur_b),
        feature_means=means,
        feature_stds=stds,
        schema=tuple(schema),
        params=params,
        history=tuple(history),
    )


def train(ds: Dataset, params: MlpParams, weights: np.ndarray) -> MlpModel:
    """Train on a labeled dataset with per-instance cost weights."""
    return fit(ds.matrix(), ds.labels(), weights, params, ds.schema)
