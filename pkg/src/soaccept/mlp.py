"""Feed-forward sigmoid network trained with mini-batch SGD.

The architecture is fixed at five hidden layers:
[d_in, h1, h2, h3, h4, h5, 1], logistic activation everywhere, binary
cross-entropy loss.  The loss and its gradients are computed from the
output pre-activation, keeping saturated probabilities finite.  Inputs
are expected standardized; the pipeline persists the scaler alongside
the model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .seeding import derive_seed

MODEL_SCHEMA_VERSION = 1
N_HIDDEN_LAYERS = 5


class MlpError(ValueError):
    pass


class DivergenceError(MlpError):
    """Raised when the epoch loss stops being finite."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(
            f"training diverged at epoch {epoch}: loss is no longer finite; "
            "lower the learning rate"
        )


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple = (64, 64, 32, 32, 16)
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if len(self.hidden) != N_HIDDEN_LAYERS:
            raise MlpError(f"hidden must list exactly {N_HIDDEN_LAYERS} layer widths")
        if any(h < 1 for h in self.hidden):
            raise MlpError("hidden layer widths must be >= 1")
        if not self.learning_rate > 0:
            raise MlpError("learning_rate must be positive")
        if self.batch_size < 1:
            raise MlpError("batch_size must be >= 1")
        if self.epochs < 1:
            raise MlpError("epochs must be >= 1")


@dataclass
class MlpModel:
    weights: list  # per layer, shape (n_out, n_in)
    biases: list  # per layer, shape (n_out,)
    config: MlpConfig
    n_features: int
    loss_history: tuple = ()


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(z_out, y) -> float:
    """Mean binary cross-entropy from output pre-activations."""
    z = np.asarray(z_out, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    # softplus(z) - y*z, with softplus written to avoid exp overflow
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(softplus - y * z))


def _forward(weights, biases, x):
    """Activations per layer plus the output pre-activation."""
    activations = [x]
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = _sigmoid(a @ w.T + b)
        activations.append(a)
    z_out = a @ weights[-1].T + biases[-1]
    return activations, z_out


def loss_and_gradients(weights, biases, x, y):
    """Mean BCE over the batch and exact gradients for every parameter."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    n = x.shape[0]
    activations, z_out = _forward(weights, biases, x)
    loss = bce_loss(z_out, y)
    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    delta = (_sigmoid(z_out) - y) / n
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = delta.T @ activations[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            a = activations[layer]
            delta = (delta @ weights[layer]) * a * (1.0 - a)
    return loss, grads_w, grads_b


def init_parameters(n_features: int, config: MlpConfig):
    """Uniform Glorot weights, zero biases, drawn layer by layer."""
    rng = np.random.default_rng(config.seed)
    sizes = [n_features, *config.hidden, 1]
    weights = []
    biases = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return weights, biases


def fit_mlp(x, y, config: MlpConfig | None = None) -> MlpModel:
    """Train with mini-batch SGD under a seeded per-epoch shuffle.

    The full-data loss is recorded after every epoch; a non-finite value
    aborts with DivergenceError naming the epoch (1-based).
    """
    if config is None:
        config = MlpConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise MlpError("x must be 2-d with one label per row")
    if x.shape[0] == 0:
        raise MlpError("cannot train on zero rows")
    if not np.isin(np.unique(y), (0, 1)).all():
        raise MlpError("labels must be 0/1")
    n, d = x.shape
    weights, biases = init_parameters(d, config)
    # separate stream for the shuffles so init and SGD do not interleave
    rng = np.random.default_rng(derive_seed(config.seed, "sgd"))
    history = []
    # overflow shows up as a non-finite epoch loss and raises below,
    # so the intermediate numpy warnings carry no extra information
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                batch = order[start : start + config.batch_size]
                _, gw, gb = loss_and_gradients(weights, biases, x[batch], y[batch])
                for layer in range(len(weights)):
                    weights[layer] -= config.learning_rate * gw[layer]
                    biases[layer] -= config.learning_rate * gb[layer]
            _, z_out = _forward(weights, biases, x)
            epoch_loss = bce_loss(z_out, y)
            if not np.isfinite(epoch_loss):
                raise DivergenceError(epoch)
            history.append(epoch_loss)
    return MlpModel(
        weights=weights,
        biases=biases,
        config=config,
        n_features=d,
        loss_history=tuple(history),
    )


def mlp_predict_proba(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise MlpError(f"expected {model.n_features} feature columns")
    _, z_out = _forward(model.weights, model.biases, x)
    return _sigmoid(z_out).ravel()


def mlp_predict(model: MlpModel, x) -> np.ndarray:
    return (mlp_predict_proba(model, x) >= 0.5).astype(np.int64)


def mlp_to_dict(model: MlpModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "mlp",
        "config": {
            "hidden": list(model.config.hidden),
            "learning_rate": model.config.learning_rate,
            "batch_size": model.config.batch_size,
            "epochs": model.config.epochs,
            "seed": model.config.seed,
        },
        "n_features": model.n_features,
        "weights": [[[float(v) for v in row] for row in w] for w in model.weights],
        "biases": [[float(v) for v in b] for b in model.biases],
        "loss_history": [float(v) for v in model.loss_history],
    }


def mlp_from_dict(payload: dict) -> MlpModel:
    version = payload.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise MlpError(f"unsupported model schema version: {version!r}")
    if payload.get("kind") != "mlp":
        raise MlpError(f"not an mlp model file: kind={payload.get('kind')!r}")
    cfg = payload["config"]
    config = MlpConfig(
        hidden=tuple(cfg["hidden"]),
        learning_rate=cfg["learning_rate"],
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        seed=cfg["seed"],
    )
    return MlpModel(
        weights=[np.asarray(w, dtype=np.float64) for w in payload["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in payload["biases"]],
        config=config,
        n_features=int(payload["n_features"]),
        loss_history=tuple(payload["loss_history"]),
    )


def save_mlp(model: MlpModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mlp_to_dict(model), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_mlp(path) -> MlpModel:
    with open(path, "r", encoding="utf-8") as fh:
        return mlp_from_dict(json.load(fh))
