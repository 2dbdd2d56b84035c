"""Small differentiable classifiers with hand-derived gradients.

Two model families cover the desk-scale experiments: multinomial
softmax regression and a one-hidden-layer perceptron.  Both expose the
mean cross-entropy loss and its exact analytic gradient over a batch,
operating on a single flat float64 parameter vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .numerics import TOL_ZERO_NORM, as_params, l2_norm

SOFTMAX = "softmax-regression"
MLP = "mlp-1h"


@dataclass(frozen=True)
class Model:
    """Architecture descriptor; parameters live outside in a flat vector."""

    kind: str
    n_in: int
    n_cls: int
    hidden: int | None = None
    activation: str = "tanh"

    def __post_init__(self):
        if self.kind not in (SOFTMAX, MLP):
            raise ConfigError(f"unknown model kind {self.kind!r}", field="model.kind")
        if self.n_in < 1 or self.n_cls < 2:
            raise ConfigError("need n_in >= 1 and n_cls >= 2", field="model")
        if self.kind == MLP:
            if not self.hidden or self.hidden < 1:
                raise ConfigError("mlp-1h requires hidden >= 1", field="model.hidden")
            if self.activation not in ("tanh", "relu"):
                raise ConfigError(f"unknown activation {self.activation!r}",
                                  field="model.activation")

    @property
    def dim(self) -> int:
        if self.kind == SOFTMAX:
            return self.n_cls * self.n_in + self.n_cls
        h = self.hidden
        return h * self.n_in + h + self.n_cls * h + self.n_cls

    def blocks(self) -> list[tuple[str, slice]]:
        """Named slices of the flat vector, one per weight matrix or bias."""
        if self.kind == SOFTMAX:
            w = self.n_cls * self.n_in
            return [("w", slice(0, w)), ("b", slice(w, w + self.n_cls))]
        h = self.hidden
        w1 = h * self.n_in
        b1 = w1 + h
        w2 = b1 + self.n_cls * h
        b2 = w2 + self.n_cls
        return [("w1", slice(0, w1)), ("b1", slice(w1, b1)),
                ("w2", slice(b1, w2)), ("b2", slice(w2, b2))]

    def init_params(self, rng: np.random.Generator, std: float = 0.1) -> np.ndarray:
        return std * rng.standard_normal(self.dim)


def _unpack_softmax(model, x):
    w_end = model.n_cls * model.n_in
    w = x[:w_end].reshape(model.n_cls, model.n_in)
    b = x[w_end:]
    return w, b


def _unpack_mlp(model, x):
    h, n_in, n_cls = model.hidden, model.n_in, model.n_cls
    o = 0
    w1 = x[o:o + h * n_in].reshape(h, n_in)
    o += h * n_in
    b1 = x[o:o + h]
    o += h
    w2 = x[o:o + n_cls * h].reshape(n_cls, h)
    o += n_cls * h
    b2 = x[o:]
    return w1, b1, w2, b2


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grad(model: Model, x: np.ndarray, batch) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its exact gradient.

    The gradient is assembled in block order (weights before biases,
    first layer before second), matching :meth:`Model.blocks`.
    """
    x = as_params(x)
    if x.shape[0] != model.dim:
        raise ConfigError(f"param vector length {x.shape[0]} != model dim {model.dim}")
    feats, labels = batch.features, batch.labels
    n = feats.shape[0]
    if n == 0:
        raise ConfigError("empty batch")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(feats)):
        raise NumericError("non-finite input to loss_and_grad")

    if model.kind == SOFTMAX:
        w, b = _unpack_softmax(model, x)
        logits = feats @ w.T + b
        logp = _log_softmax(logits)
        loss = -logp[np.arange(n), labels].sum() / n
        dlogits = np.exp(logp)
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n
        grad = np.concatenate([(dlogits.T @ feats).ravel(), dlogits.sum(axis=0)])
        return float(loss), grad

    w1, b1, w2, b2 = _unpack_mlp(model, x)
    z1 = feats @ w1.T + b1
    if model.activation == "tanh":
        h = np.tanh(z1)
        dh_dz = 1.0 - h * h
    else:
        h = np.maximum(z1, 0.0)
        dh_dz = (z1 > 0.0).astype(np.float64)
    logits = h @ w2.T + b2
    logp = _log_softmax(logits)
    loss = -logp[np.arange(n), labels].sum() / n
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    dh = (dlogits @ w2) * dh_dz
    grad = np.concatenate([
        (dh.T @ feats).ravel(),
        dh.sum(axis=0),
        (dlogits.T @ h).ravel(),
        dlogits.sum(axis=0),
    ])
    return float(loss), grad


def perturbed_grad(model: Model, x: np.ndarray, direction: np.ndarray,
                   rho: float, batch) -> np.ndarray:
    """Gradient at ``x + rho * direction/||direction||``.

    A direction of (near-)zero norm, or rho = 0, means no shift at all;
    this is exactly the situation in round 0 when the server
    pseudo-gradient is still the zero vector.
    """
    if rho < 0:
        raise ConfigError("rho must be >= 0")
    if rho == 0.0:
        return loss_and_grad(model, x, batch)[1]
    norm = l2_norm(direction)
    if norm <= TOL_ZERO_NORM:
        return loss_and_grad(model, x, batch)[1]
    shifted = x + (rho / norm) * direction
    return loss_and_grad(model, shifted, batch)[1]


def accuracy(model: Model, x: np.ndarray, features: np.ndarray,
             labels: np.ndarray) -> float:
    x = as_params(x)
    if model.kind == SOFTMAX:
        w, b = _unpack_softmax(model, x)
        logits = features @ w.T + b
    else:
        w1, b1, w2, b2 = _unpack_mlp(model, x)
        z1 = features @ w1.T + b1
        h = np.tanh(z1) if model.activation == "tanh" else np.maximum(z1, 0.0)
        logits = h @ w2.T + b2
    return float(np.mean(np.argmax(logits, axis=1) == labels))
