"""Dropout-gated concrete autoencoder: selector layer, decoder, loss, training.

The model keeps one flat float64 parameter vector theta laid out as
[w1, b1, w2, b2, log_alpha]; the decoder layers and the selector are views
into it, so in-place kernel updates are visible everywhere. Per run, the
seeded RNG is consumed in a fixed order: decoder weights w1 then w2 at init,
then per epoch one permutation, then per batch one (batch, d) uniform block
(row-major, i.e. band-major within each sample). Runs are bit-reproducible
per backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .concrete import AnnealSchedule, SelectorParams
from .errors import DimensionError, DomainError, ParameterError, TrainingError
from .numerics import AdamState, DenseLayer, matmul, milestone_lr, sigmoid

SCHEDULE_PRESETS = {
    "T1": dict(tau0=1.0, tauC=0.001, epochs=40, batch_size=1),
    "T2": dict(tau0=1.0, tauC=0.001, epochs=200, batch_size=256),
    "T3": dict(tau0=1.0, tauC=0.01, epochs=200, batch_size=32),
}


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    k: int
    seed: int = 0
    base_lr: float = 0.001
    lr_milestones: tuple = (15, 30)
    lr_gamma: float = 0.1
    lam: float = 0.005
    tau0: float = 1.0
    tauC: float = 0.001
    hidden: int = 128
    full_bce: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")

    @classmethod
    def for_schedule(cls, name: str, k: int, seed: int = 0, **overrides) -> "TrainConfig":
        if name not in SCHEDULE_PRESETS:
            raise ParameterError(f"unknown schedule {name!r}; presets: T1, T2, T3")
        params = dict(SCHEDULE_PRESETS[name])
        params.update(overrides)
        return cls(k=k, seed=seed, **params)


@dataclass
class BandSubset:
    """The k selected band indices (ascending) plus per-band keep probabilities."""

    indices: list
    scores: np.ndarray
    k: int

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "indices": [int(i) for i in self.indices],
            "scores": [float(s) for s in self.scores],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "BandSubset":
        return cls(list(obj["indices"]), np.asarray(obj["scores"], dtype=np.float64),
                   int(obj["k"]))


@dataclass
class EpochStats:
    epoch: int
    loss: float
    recon_term: float
    reg_term: float
    tau: float
    lr: float
    top_k: list


@dataclass
class TrainingTrace:
    epochs: list = field(default_factory=list)
    final_scores: np.ndarray | None = None

    def to_json_dict(self) -> dict:
        return {
            "epochs": [
                {
                    "epoch": e.epoch,
                    "loss": e.loss,
                    "recon_term": e.recon_term,
                    "reg_term": e.reg_term,
                    "tau": e.tau,
                    "lr": e.lr,
                    "top_k": [int(i) for i in e.top_k],
                }
                for e in self.epochs
            ],
            "final_scores": [float(s) for s in self.final_scores],
        }


def _layout(d: int, hidden: int):
    sizes = (hidden * d, hidden, d * hidden, d, d)
    offsets = np.concatenate(([0], np.cumsum(sizes))).tolist()
    return sizes, offsets


class DropoutCae:
    """Selector gates + two-layer decoder (d -> hidden relu -> d sigmoid)."""

    def __init__(self, selector: SelectorParams, decoder, schedule: AnnealSchedule,
                 lam: float, rng_seed: int, theta: np.ndarray):
        self.selector = selector
        self.decoder = decoder
        self.schedule = schedule
        self.lam = lam
        self.rng_seed = rng_seed
        self.theta = theta

    @property
    def d(self) -> int:
        return self.selector.d

    @property
    def hidden(self) -> int:
        return self.decoder[0].out_size

    @classmethod
    def init(cls, d: int, config: TrainConfig, n_samples: int,
             rng: np.random.Generator) -> "DropoutCae":
        h = config.hidden
        sizes, off = _layout(d, h)
        theta = np.zeros(off[-1])
        w1 = theta[off[0]:off[1]].reshape(h, d)
        b1 = theta[off[1]:off[2]]
        w2 = theta[off[2]:off[3]].reshape(d, h)
        b2 = theta[off[3]:off[4]]
        log_alpha = theta[off[4]:off[5]]
        bound1 = np.sqrt(6.0 / (d + h))
        bound2 = np.sqrt(6.0 / (h + d))
        w1[:] = rng.uniform(-bound1, bound1, size=(h, d))
        w2[:] = rng.uniform(-bound2, bound2, size=(d, h))
        decoder = (DenseLayer(w1, b1, "relu"), DenseLayer(w2, b2, "sigmoid"))
        schedule = AnnealSchedule.for_run(
            config.tau0, config.tauC, n_samples, config.epochs, config.batch_size
        )
        return cls(SelectorParams(log_alpha), decoder, schedule, config.lam,
                   config.seed, theta)


def forward(model: DropoutCae, batch: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Reconstruction of the gated batch: decoder(batch * masks)."""
    batch = np.asarray(batch, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.d:
        raise DimensionError(f"batch shape {batch.shape} does not match d={model.d}")
    if masks.shape != batch.shape:
        raise DimensionError(f"mask shape {masks.shape} != batch shape {batch.shape}")
    layer1, layer2 = model.decoder
    gated = batch * masks
    a1 = np.maximum(matmul(gated, layer1.weights.T) + layer1.bias, 0.0)
    return sigmoid(matmul(a1, layer2.weights.T) + layer2.bias)


def loss(batch: np.ndarray, recon: np.ndarray, masks: np.ndarray, lam: float,
         full_bce: bool = False):
    """(total, recon_term, reg_term) averaged over the batch rows.

    recon_term = -(1/B) sum x*ln(xhat) (plus the complementary term when
    full_bce is on); reg_term = (lam/B) sum masks.
    """
    batch = np.asarray(batch, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    if batch.shape != recon.shape or batch.shape != masks.shape:
        raise DimensionError(
            f"shapes differ: batch {batch.shape}, recon {recon.shape}, masks {masks.shape}"
        )
    if np.any(recon <= 0.0) or (full_bce and np.any(recon >= 1.0)):
        raise DomainError("reconstruction values must lie in (0, 1)")
    b = batch.shape[0]
    recon_term = -float(np.sum(batch * np.log(recon))) / b
    if full_bce:
        recon_term -= float(np.sum((1.0 - batch) * np.log1p(-recon))) / b
    reg_term = lam * float(np.sum(masks)) / b
    return recon_term + reg_term, recon_term, reg_term


def backward(model: DropoutCae, batch: np.ndarray, masks: np.ndarray, tau: float,
             full_bce: bool = False) -> dict:
    """Exact gradients of the loss w.r.t. decoder parameters and log_alpha.

    masks must have been sampled at temperature tau; both the reconstruction
    path and the regularizer path into log_alpha are included.
    """
    batch = np.asarray(batch, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    if batch.shape != masks.shape or batch.shape[1] != model.d:
        raise DimensionError(
            f"batch {batch.shape} / masks {masks.shape} inconsistent with d={model.d}"
        )
    layer1, layer2 = model.decoder
    b = batch.shape[0]
    gated = batch * masks
    a1 = np.maximum(gated @ layer1.weights.T + layer1.bias, 0.0)
    xhat = sigmoid(a1 @ layer2.weights.T + layer2.bias)

    if full_bce:
        delta2 = (xhat - batch) / b
    else:
        delta2 = -batch * (1.0 - xhat) / b
    grad_w2 = delta2.T @ a1
    grad_b2 = delta2.sum(axis=0)
    delta1 = (delta2 @ layer2.weights) * (a1 > 0)
    grad_w1 = delta1.T @ gated
    grad_b1 = delta1.sum(axis=0)
    dgated = delta1 @ layer1.weights
    dmask = dgated * batch + model.lam / b
    grad_log_alpha = (dmask * masks * (1.0 - masks)).sum(axis=0) / tau
    return {
        "w1": grad_w1,
        "b1": grad_b1,
        "w2": grad_w2,
        "b2": grad_b2,
        "log_alpha": grad_log_alpha,
    }


def select_bands(scores, k: int) -> BandSubset:
    """Indices of the k largest keep probabilities; ties favor the lower band."""
    scores = np.asarray(scores, dtype=np.float64)
    d = scores.shape[0]
    if not (1 <= k <= d):
        raise ParameterError(f"k must be in [1, {d}], got {k}")
    order = np.lexsort((np.arange(d), -scores))
    indices = sorted(int(i) for i in order[:k])
    return BandSubset(indices, scores.copy(), k)


def train(dataset, config: TrainConfig):
    """Run the full training loop and return (BandSubset, TrainingTrace)."""
    from .backend import get_backend

    x = dataset.values
    n, d = x.shape
    if config.k > d:
        raise ParameterError(f"k={config.k} exceeds band count d={d}")

    rng = np.random.default_rng(config.seed)
    model = DropoutCae.init(d, config, n, rng)
    kernels = get_backend()

    state = AdamState.for_params(model.theta, lr=config.base_lr)
    trace = TrainingTrace()
    bsz = config.batch_size

    for epoch in range(config.epochs):
        state.lr = milestone_lr(config.base_lr, epoch, config.lr_milestones,
                                config.lr_gamma)
        perm = rng.permutation(n)
        batch_losses = []
        recon_sum = 0.0
        reg_sum = 0.0
        tau = model.schedule.temperature()
        for start in range(0, n, bsz):
            idx = perm[start:start + bsz]
            xb = np.ascontiguousarray(x[idx])
            u = rng.random((idx.shape[0], d))
            tau = model.schedule.temperature()
            state.step += 1
            total, recon_term, reg_term = kernels.train_step(
                xb, u, model.theta, state.m, state.v, state.step,
                state.lr, state.beta1, state.beta2, state.epsilon,
                tau, config.lam, d, config.hidden, config.full_bce,
            )
            if not np.isfinite(total):
                raise TrainingError(
                    f"non-finite loss {total} at epoch {epoch}, batch {start // bsz}",
                    epoch=epoch, batch=start // bsz,
                )
            model.schedule.advance()
            batch_losses.append(total)
            recon_sum += recon_term
            reg_sum += reg_term
        n_batches = len(batch_losses)
        scores = model.selector.keep_probability()
        trace.epochs.append(EpochStats(
            epoch=epoch,
            loss=float(np.mean(batch_losses)),
            recon_term=recon_sum / n_batches,
            reg_term=reg_sum / n_batches,
            tau=tau,
            lr=state.lr,
            top_k=select_bands(scores, config.k).indices,
        ))

    scores = model.selector.keep_probability()
    subset = select_bands(scores, config.k)
    trace.final_scores = scores
    return subset, trace
