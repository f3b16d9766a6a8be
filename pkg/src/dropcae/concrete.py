"""Binary-concrete and concrete-softmax sampling plus temperature annealing.

A binary concrete sample relaxes a Bernoulli gate: with logistic noise L and
temperature tau, the sample is sigmoid((log_alpha + L)/tau). As tau shrinks
the sample saturates towards the hard 0/1 gate, and the keep probability of
the underlying Bernoulli is sigmoid(log_alpha) = alpha/(1+alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .numerics import sigmoid


def logistic_noise(rng: np.random.Generator, shape=None):
    """L = log(u) - log(1-u) with u ~ Uniform(0,1)."""
    u = rng.random(shape)
    return np.log(u) - np.log1p(-u)


def gumbel_noise(rng: np.random.Generator, shape=None):
    """G = -log(-log(u)) with u ~ Uniform(0,1)."""
    u = rng.random(shape)
    return -np.log(-np.log(u))


def logistic_from_uniform(u):
    """Deterministic map from uniform draws to logistic noise."""
    u = np.asarray(u, dtype=np.float64)
    return np.log(u) - np.log1p(-u)


def sample_binary_concrete(log_alpha, tau: float, noise):
    """Relaxed Bernoulli sample sigmoid((log_alpha + noise)/tau).

    Works elementwise on arrays; log_alpha broadcasts against noise.
    """
    if tau <= 0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    val = sigmoid((np.asarray(log_alpha, dtype=np.float64) + noise) / tau)
    if np.ndim(val) == 0:
        return float(val)
    return val


def binary_concrete_grad(log_alpha, tau: float, noise):
    """d sample / d log_alpha for the same noise: X(1-X)/tau."""
    if tau <= 0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    x = sigmoid((np.asarray(log_alpha, dtype=np.float64) + noise) / tau)
    val = x * (1.0 - x) / tau
    if np.ndim(val) == 0:
        return float(val)
    return val


def sample_concrete_softmax(log_alphas, tau: float, gumbel):
    """Concrete (Gumbel-softmax) sample: softmax((log_alphas + gumbel)/tau).

    Reference implementation for the categorical form; the selector model
    itself uses the binary form above.
    """
    if tau <= 0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    logits = (np.asarray(log_alphas, dtype=np.float64) + gumbel) / tau
    logits = logits - logits.max()
    e = np.exp(logits)
    return e / e.sum()


@dataclass
class SelectorParams:
    """Learnable per-band log-odds of keeping each band."""

    log_alpha: np.ndarray

    @classmethod
    def zeros(cls, d: int) -> "SelectorParams":
        # log_alpha = 0 means keep probability 0.5 for every band
        return cls(np.zeros(d))

    @property
    def d(self) -> int:
        return self.log_alpha.shape[0]

    def keep_probability(self) -> np.ndarray:
        return sigmoid(self.log_alpha)

    def dropout_rate(self) -> np.ndarray:
        return 1.0 - self.keep_probability()


@dataclass
class AnnealSchedule:
    """Exponential temperature decay from tau0 to tauC over a fixed step count.

    total_steps is ceil(n_samples * epochs / batch_size); training advances the
    schedule once per mini-batch and clamps at total_steps, so a run that keeps
    its last partial batch simply holds tauC for the few extra batches.
    """

    tau0: float
    tauC: float
    total_steps: int
    current_step: int = 0

    def __post_init__(self):
        if not (self.tau0 >= self.tauC > 0):
            raise ParameterError(
                f"need tau0 >= tauC > 0, got tau0={self.tau0}, tauC={self.tauC}"
            )
        if self.total_steps < 1:
            raise ParameterError(f"total_steps must be >= 1, got {self.total_steps}")

    @classmethod
    def for_run(cls, tau0: float, tauC: float, n_samples: int, epochs: int,
                batch_size: int) -> "AnnealSchedule":
        total = -(-n_samples * epochs // batch_size)  # ceiling division
        return cls(tau0, tauC, total)

    def advance(self) -> None:
        self.current_step = min(self.current_step + 1, self.total_steps)

    def temperature(self) -> float:
        return temperature_at(self, self.current_step)


def temperature_at(schedule: AnnealSchedule, step: int) -> float:
    """tau0 * (tauC/tau0)^(step/total_steps), exact at both endpoints."""
    if step < 0 or step > schedule.total_steps:
        raise ParameterError(
            f"step {step} outside schedule range [0, {schedule.total_steps}]"
        )
    if step == 0:
        return schedule.tau0
    if step == schedule.total_steps:
        return schedule.tauC
    ratio = schedule.tauC / schedule.tau0
    return schedule.tau0 * math.pow(ratio, step / schedule.total_steps)
