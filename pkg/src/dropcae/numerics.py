"""Dense linear algebra, layers and the ADAM optimizer for the selector model.

Everything is plain float64 numpy in row-major layout: a "matrix" is a 2-D
C-contiguous ndarray, batches are rows and features are columns. No ML
framework is used; gradients are derived by hand and checked against finite
differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError

ACTIVATIONS = ("relu", "sigmoid", "identity")


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D C-contiguous float64 array."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {out.shape}")
    return out


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def relu(z):
    return np.maximum(z, 0.0)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Standard matrix product of two 2-D arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


@dataclass
class DenseLayer:
    """Fully connected layer: activation(x @ weights.T + bias).

    weights has shape (out_size, in_size), bias (out_size,).
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise DimensionError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"bias shape {self.bias.shape} does not match {self.weights.shape[0]} outputs"
            )
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")

    @property
    def in_size(self) -> int:
        return self.weights.shape[1]

    @property
    def out_size(self) -> int:
        return self.weights.shape[0]


def init_dense(rng: np.random.Generator, out_size: int, in_size: int,
               activation: str = "identity") -> DenseLayer:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero bias."""
    bound = math.sqrt(6.0 / (in_size + out_size))
    w = rng.uniform(-bound, bound, size=(out_size, in_size))
    return DenseLayer(w, np.zeros(out_size), activation)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return relu(z)
    if activation == "sigmoid":
        return sigmoid(z)
    return z


def _activation_grad(z: np.ndarray, activation: str) -> np.ndarray:
    # relu subgradient at 0 is taken as 0
    if activation == "relu":
        return (z > 0).astype(np.float64)
    if activation == "sigmoid":
        s = sigmoid(z)
        return s * (1.0 - s)
    return np.ones_like(z)


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """Row-wise forward pass of a batch x with shape (batch, in_size)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.in_size:
        raise DimensionError(
            f"input shape {x.shape} does not match layer in_size {layer.in_size}"
        )
    z = x @ layer.weights.T + layer.bias
    return _activate(z, layer.activation)


def dense_backward(layer: DenseLayer, x: np.ndarray, upstream: np.ndarray):
    """Reverse-mode gradients of dense_forward.

    Returns (grad_weights, grad_bias, grad_input) for the given batch and
    upstream gradient (same shape as the forward output).
    """
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.in_size:
        raise DimensionError(
            f"input shape {x.shape} does not match layer in_size {layer.in_size}"
        )
    if upstream.shape != (x.shape[0], layer.out_size):
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match output "
            f"({x.shape[0]}, {layer.out_size})"
        )
    z = x @ layer.weights.T + layer.bias
    delta = upstream * _activation_grad(z, layer.activation)
    grad_w = delta.T @ x
    grad_b = delta.sum(axis=0)
    grad_x = delta @ layer.weights
    return grad_w, grad_b, grad_x


@dataclass
class AdamState:
    """Moment accumulators and step counter for one parameter array."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: np.ndarray, lr: float = 0.001,
                   beta1: float = 0.9, beta2: float = 0.999,
                   epsilon: float = 1e-8) -> "AdamState":
        return cls(np.zeros_like(params), np.zeros_like(params), 0, lr, beta1, beta2, epsilon)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState):
    """One bias-corrected ADAM update; params and state are updated in place."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise DimensionError(
            f"params {params.shape}, grads {grads.shape} and moments {state.m.shape} differ"
        )
    state.step += 1
    t = state.step
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grads * grads
    # exact-zero gradients decay the moments into denormal range, which
    # stalls the fpu; flush far below any meaningful magnitude
    state.m[np.abs(state.m) < 1e-290] = 0.0
    state.v[state.v < 1e-290] = 0.0
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


def milestone_lr(base_lr: float, epoch: int, milestones, gamma: float) -> float:
    """base_lr decayed by gamma once per milestone already reached."""
    hits = sum(1 for m in milestones if m <= epoch)
    return base_lr * gamma ** hits
