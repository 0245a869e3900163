"""Heteroscedastic regression objectives and the mini-batch training loop.

The central objective is the variance-weighted Gaussian negative log
likelihood: the plain NLL term is multiplied by the predicted variance raised
to a fixed power ``beta``, with the weight factor excluded from
differentiation (a stop-gradient).  ``beta = 0`` recovers the plain NLL;
``beta = 1`` makes the mean gradient independent of the predicted variance,
matching a squared-error fit of the mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import GaussianPrediction, TwoHeadNetwork, backward_batch, forward_batch
from .seeding import spawn_rng

_OPTIMIZERS = ("adam", "sgd")

# spawn_key tags for the independent RNG streams a training run uses
_STREAM_SHUFFLE = 101
_STREAM_MASK = 102
_STREAM_WEIGHT_DRAW = 103


class TrainingDivergedError(RuntimeError):
    """Raised when a non-finite loss or gradient appears during training."""


def _validate_terms(mu: np.ndarray, sigma2: np.ndarray, y: np.ndarray) -> None:
    if np.any(sigma2 <= 0.0):
        raise ValueError("predicted variance must be strictly positive")


def nll_terms(mu: np.ndarray, sigma2: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise Gaussian negative log likelihood, constant terms dropped."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _validate_terms(mu, sigma2, y)
    return 0.5 * np.log(sigma2) + (mu - y) ** 2 / (2.0 * sigma2)


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return beta


def beta_nll_terms(
    mu: np.ndarray, sigma2: np.ndarray, y: np.ndarray, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise weighted NLL values and their stop-gradient weights.

    The weight is sigma2**beta, treated as a constant during
    differentiation.  At beta = 0 the weight is exactly 1 and the values are
    bit-for-bit identical to ``nll_terms``.
    """
    beta = _check_beta(beta)
    base = nll_terms(mu, sigma2, y)
    weight = np.asarray(sigma2, dtype=np.float64) ** beta
    return weight * base, weight


def beta_nll_grads(
    mu: np.ndarray, sigma2: np.ndarray, y: np.ndarray, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise loss derivatives (d/d mean, d/d variance).

    The weight factor is held fixed, so these are the stop-gradient
    derivatives:

        d/d mean     = (mean - y) / sigma2**(1 - beta)
        d/d variance = (sigma2 - (y - mean)**2) / (2 * sigma2**(2 - beta))
    """
    beta = _check_beta(beta)
    mu = np.asarray(mu, dtype=np.float64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _validate_terms(mu, sigma2, y)
    d_mean = (mu - y) / sigma2 ** (1.0 - beta)
    d_variance = (sigma2 - (y - mu) ** 2) / (2.0 * sigma2 ** (2.0 - beta))
    return d_mean, d_variance


def nll_loss(pred: GaussianPrediction, y: float) -> float:
    """Gaussian NLL of one prediction against one target."""
    return float(nll_terms(np.float64(pred.mean), np.float64(pred.variance), np.float64(y)))


def beta_nll_loss(pred: GaussianPrediction, y: float, beta: float) -> tuple[float, float]:
    """Weighted NLL of one prediction; returns (value, stop-gradient weight)."""
    value, weight = beta_nll_terms(
        np.float64(pred.mean), np.float64(pred.variance), np.float64(y), beta
    )
    return float(value), float(weight)


def beta_nll_output_grads(
    pred: GaussianPrediction, y: float, beta: float
) -> tuple[float, float]:
    """Loss derivatives w.r.t. one prediction's mean and variance."""
    d_mean, d_variance = beta_nll_grads(
        np.float64(pred.mean), np.float64(pred.variance), np.float64(y), beta
    )
    return float(d_mean), float(d_variance)


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters for one training run.

    ``lr_schedule`` is (initial rate, decay step in epochs, decay factor): the
    rate is multiplied by the factor once per completed decay step.
    ``kl_weight`` is only meaningful for variational posteriors and must be
    left None otherwise.
    """

    beta: float = 0.5
    epochs: int = 100
    batch_size: int = 128
    lr_schedule: tuple[float, int, float] = (1e-3, 100, 0.1)
    optimizer: str = "adam"
    seed: int = 0
    kl_weight: float | None = None

    def __post_init__(self) -> None:
        _check_beta(self.beta)
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        initial, step, factor = self.lr_schedule
        if initial <= 0 or step < 1 or factor <= 0:
            raise ValueError(f"invalid lr_schedule {self.lr_schedule}")
        object.__setattr__(self, "lr_schedule", (float(initial), int(step), float(factor)))
        if self.optimizer not in _OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {_OPTIMIZERS}, got {self.optimizer!r}")
        if self.kl_weight is not None and self.kl_weight <= 0:
            raise ValueError(f"kl_weight must be positive when given, got {self.kl_weight}")


def learning_rate_at(schedule: tuple[float, int, float], epoch: int) -> float:
    """Step-decay rate in effect during the given zero-based epoch."""
    initial, step, factor = schedule
    return float(initial * factor ** (epoch // step))


@dataclass
class TrainingTrace:
    """Per-epoch training record: mean loss, training MSE, learning rate."""

    epoch: list[int] = field(default_factory=list)
    mean_loss: list[float] = field(default_factory=list)
    mse: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)

    def append(self, epoch: int, mean_loss: float, mse: float, lr: float) -> None:
        self.epoch.append(int(epoch))
        self.mean_loss.append(float(mean_loss))
        self.mse.append(float(mse))
        self.learning_rate.append(float(lr))

    def __len__(self) -> int:
        return len(self.epoch)


class Adam:
    """Adam with the usual bias-corrected moment estimates."""

    def __init__(self, dim: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        params -= lr * mhat / (np.sqrt(vhat) + self.eps)


class SGD:
    def __init__(self, dim: int):
        pass

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        params -= lr * grad


def make_optimizer(name: str, dim: int):
    if name == "adam":
        return Adam(dim)
    if name == "sgd":
        return SGD(dim)
    raise ValueError(f"unknown optimizer {name!r}")


def _batch_slices(n: int, batch_size: int) -> list[np.ndarray]:
    n_batches = max(1, int(np.ceil(n / batch_size)))
    return [np.arange(i * batch_size, min((i + 1) * batch_size, n)) for i in range(n_batches)]


def train(
    net: TwoHeadNetwork,
    data,
    cfg: TrainingConfig,
    regularizer=None,
    mask_sampler=None,
) -> tuple[TwoHeadNetwork, TrainingTrace]:
    """Mini-batch training of one network under the weighted NLL.

    ``data`` is any object with ``inputs`` (n, d) and ``targets`` (n,) arrays.
    The input network is never mutated; a trained copy is returned together
    with the per-epoch trace.  Shuffling is reseeded per epoch from
    ``cfg.seed`` so a run is reproducible from the config alone.

    ``regularizer``: optional callable theta -> (value, grad) added to every
    batch objective (already weighted by the caller).
    ``mask_sampler``: optional callable rng -> flat weight mask, drawn freshly
    for every forward pass (one mask per batch).
    """
    X = np.asarray(data.inputs, dtype=np.float64)
    y = np.asarray(data.targets, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"bad training data shapes: inputs {X.shape}, targets {y.shape}")
    n = X.shape[0]
    if n == 0:
        raise ValueError("training data is empty")

    trained = net.copy()
    theta = trained.params
    opt = make_optimizer(cfg.optimizer, theta.size)
    trace = TrainingTrace()
    slices = _batch_slices(n, cfg.batch_size)

    for epoch in range(cfg.epochs):
        lr = learning_rate_at(cfg.lr_schedule, epoch)
        perm = spawn_rng(cfg.seed, _STREAM_SHUFFLE, epoch).permutation(n)
        loss_sum = 0.0
        se_sum = 0.0
        for b, sl in enumerate(slices):
            idx = perm[sl]
            Xb, yb = X[idx], y[idx]
            mask = None
            if mask_sampler is not None:
                mask = mask_sampler(spawn_rng(cfg.seed, _STREAM_MASK, epoch, b))
            mu, sigma2 = forward_batch(trained, Xb, mask)
            values, _ = beta_nll_terms(mu, sigma2, yb, cfg.beta)
            batch_loss = float(values.sum())
            d_mean, d_variance = beta_nll_grads(mu, sigma2, yb, cfg.beta)
            if not np.isfinite(batch_loss) or not (
                np.all(np.isfinite(d_mean)) and np.all(np.isfinite(d_variance))
            ):
                raise TrainingDivergedError(
                    f"non-finite loss or gradient at epoch {epoch}, batch {b}"
                )
            scale = 1.0 / len(idx)
            grad = backward_batch(trained, Xb, d_mean * scale, d_variance * scale, mask)
            batch_objective = batch_loss * scale
            if regularizer is not None:
                reg_value, reg_grad = regularizer(theta)
                batch_objective += float(reg_value)
                grad = grad + reg_grad
            if not np.isfinite(batch_objective) or not np.all(np.isfinite(grad)):
                raise TrainingDivergedError(
                    f"non-finite loss or gradient at epoch {epoch}, batch {b}"
                )
            opt.step(theta, grad, lr)
            loss_sum += batch_loss
            se_sum += float(((mu - yb) ** 2).sum())
        trace.append(epoch, loss_sum / n, se_sum / n, lr)

    return trained, trace
