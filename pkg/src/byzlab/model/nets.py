"""Training substrate: multinomial logistic regression and a one-hidden-
layer tanh network, with exact analytic gradients and seeded SGD.

Parameters are always handled as one flat float64 vector so the protocol
and aggregation layers never care about architecture. Gradients are the
exact gradients of mean cross-entropy; ``local_train`` is a pure
function of (inputs, rng state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from byzlab.errors import ConfigError, EvalError
from byzlab.model.data import Dataset

_ARCHS = ("logreg", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    arch: str = "logreg"
    features: int = 20
    classes: int = 3
    hidden: int = 16  # mlp only

    def __post_init__(self):
        if self.arch not in _ARCHS:
            raise ConfigError(f"unknown architecture {self.arch!r}; expected {_ARCHS}")
        if self.features < 1 or self.classes < 2:
            raise ConfigError("need at least 1 feature and 2 classes")
        if self.arch == "mlp" and self.hidden < 1:
            raise ConfigError("mlp needs hidden width >= 1")

    @property
    def dim(self) -> int:
        if self.arch == "logreg":
            return self.classes * (self.features + 1)
        return self.hidden * (self.features + 1) + self.classes * (self.hidden + 1)


def init_params(spec: ModelSpec, rng: np.random.Generator | None = None,
                scale: float = 0.1) -> np.ndarray:
    """Zero initialization by default; small random if an rng is given."""
    if rng is None:
        return np.zeros(spec.dim, dtype=np.float64)
    return rng.normal(0.0, scale, size=spec.dim)


def _unpack(spec: ModelSpec, w: np.ndarray):
    if spec.arch == "logreg":
        k = spec.classes * spec.features
        W = w[:k].reshape(spec.classes, spec.features)
        b = w[k:]
        return W, b
    f, H, C = spec.features, spec.hidden, spec.classes
    i = 0
    W1 = w[i : i + H * f].reshape(H, f); i += H * f
    b1 = w[i : i + H]; i += H
    W2 = w[i : i + C * H].reshape(C, H); i += C * H
    b2 = w[i : i + C]
    return W1, b1, W2, b2


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict_logits(spec: ModelSpec, w: np.ndarray, X: np.ndarray) -> np.ndarray:
    if spec.arch == "logreg":
        W, b = _unpack(spec, w)
        return X @ W.T + b
    W1, b1, W2, b2 = _unpack(spec, w)
    hidden = np.tanh(X @ W1.T + b1)
    return hidden @ W2.T + b2


def predict(spec: ModelSpec, w: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.argmax(predict_logits(spec, w, X), axis=1)


def loss(spec: ModelSpec, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy."""
    if len(X) == 0:
        raise EvalError("loss over an empty batch")
    probs = _softmax(predict_logits(spec, w, X))
    return float(-np.mean(np.log(probs[np.arange(len(y)), y] + 1e-300)))


def grad(spec: ModelSpec, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact gradient of the mean cross-entropy loss, flattened."""
    n = len(X)
    if n == 0:
        raise EvalError("gradient over an empty batch")
    if spec.arch == "logreg":
        W, _ = _unpack(spec, w)
        probs = _softmax(X @ W.T + w[spec.classes * spec.features :])
        probs[np.arange(n), y] -= 1.0
        probs /= n
        dW = probs.T @ X
        db = probs.sum(axis=0)
        return np.concatenate([dW.ravel(), db])
    W1, b1, W2, b2 = _unpack(spec, w)
    pre = X @ W1.T + b1
    hidden = np.tanh(pre)
    probs = _softmax(hidden @ W2.T + b2)
    probs[np.arange(n), y] -= 1.0
    probs /= n
    dW2 = probs.T @ hidden
    db2 = probs.sum(axis=0)
    dhidden = (probs @ W2) * (1.0 - hidden * hidden)
    dW1 = dhidden.T @ X
    db1 = dhidden.sum(axis=0)
    return np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])


def local_train(
    spec: ModelSpec,
    start: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    epochs: int,
    lr: float,
    batch_size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run seeded minibatch SGD and return the update (trained - start).

    Deterministic given the rng state: one shuffle per epoch, batches in
    shuffle order, the final short batch included.
    """
    if len(X) == 0:
        raise EvalError("cannot train on an empty shard")
    if batch_size < 1:
        raise ConfigError("batch size must be >= 1")
    w = np.array(start, dtype=np.float64, copy=True)
    n = len(X)
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            w -= lr * grad(spec, w, X[idx], y[idx])
    return w - np.asarray(start, dtype=np.float64)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def evaluate(spec: ModelSpec, w: np.ndarray, dataset: Dataset) -> float:
    """Main-task accuracy: fraction of non-tail samples classified correctly."""
    keep = ~dataset.tail_mask
    if not keep.any():
        raise EvalError("dataset has no non-tail samples to evaluate")
    pred = predict(spec, w, dataset.features[keep])
    return float(np.mean(pred == dataset.labels[keep]))


def backdoor_eval(spec: ModelSpec, w: np.ndarray, dataset: Dataset) -> float:
    """Backdoor-task accuracy: fraction of tail samples sent to the target."""
    if not dataset.tail_mask.any():
        raise EvalError("dataset has no tail samples to evaluate")
    pred = predict(spec, w, dataset.features[dataset.tail_mask])
    return float(np.mean(pred == dataset.backdoor_target))
