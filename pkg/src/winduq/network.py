"""Fully-connected two-head Gaussian regression networks, implemented in numpy.

A network maps an input vector to the mean and variance of a Gaussian
predictive distribution.  Both heads share a stack of hidden layers; the mean
head is linear and the variance head passes through a softplus plus a floor,
so the predicted variance is always positive.  Parameters live in one flat
float64 vector, which keeps optimizers, posterior samplers and checkpointing
trivial: every consumer sees the same layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import spawn_rng

CHECKPOINT_LAYOUT_VERSION = 1

_ACTIVATIONS = ("relu", "sigmoid")


@dataclass(frozen=True)
class ArchitectureSpec:
    """Static description of a two-head network.

    ``hidden_widths`` lists the hidden layer sizes in order; the two output
    heads are single linear units on top of the last hidden layer.
    ``variance_floor`` is added to the softplus output of the variance head.
    """

    input_dim: int
    hidden_widths: tuple[int, ...]
    hidden_activation: str = "relu"
    variance_floor: float = 1e-6

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.hidden_widths:
            raise ValueError("hidden_widths must be non-empty")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden widths must be positive, got {self.hidden_widths}")
        if self.hidden_activation not in _ACTIVATIONS:
            raise ValueError(
                f"hidden_activation must be one of {_ACTIVATIONS}, got {self.hidden_activation!r}"
            )
        if not np.isfinite(self.variance_floor) or self.variance_floor < 0:
            raise ValueError(f"variance_floor must be finite and >= 0, got {self.variance_floor}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) for each hidden layer, in order."""
        dims = []
        fan_in = self.input_dim
        for width in self.hidden_widths:
            dims.append((fan_in, width))
            fan_in = width
        return dims

    @property
    def n_parameters(self) -> int:
        n = sum((fi + 1) * fo for fi, fo in self.layer_dims)
        n += 2 * (self.hidden_widths[-1] + 1)  # mean head + variance head
        return n

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "hidden_activation": self.hidden_activation,
            "variance_floor": self.variance_floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_widths=tuple(d["hidden_widths"]),
            hidden_activation=str(d["hidden_activation"]),
            variance_floor=float(d["variance_floor"]),
        )


@dataclass(frozen=True)
class GaussianPrediction:
    """Mean and variance of a single Gaussian predictive distribution."""

    mean: float
    variance: float


@dataclass
class _Slot:
    name: str
    shape: tuple[int, ...]
    start: int
    stop: int
    is_weight: bool  # False for bias vectors


def parameter_layout(spec: ArchitectureSpec) -> list[_Slot]:
    """Flat-vector layout: hidden W/b pairs in order, then mean head, then variance head."""
    slots: list[_Slot] = []
    pos = 0

    def add(name: str, shape: tuple[int, ...], is_weight: bool) -> None:
        nonlocal pos
        size = int(np.prod(shape))
        slots.append(_Slot(name, shape, pos, pos + size, is_weight))
        pos += size

    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        add(f"hidden{i}.W", (fan_in, fan_out), True)
        add(f"hidden{i}.b", (fan_out,), False)
    width = spec.hidden_widths[-1]
    add("mean.W", (width,), True)
    add("mean.b", (), False)
    add("variance.W", (width,), True)
    add("variance.b", (), False)
    return slots


def weight_position_mask(spec: ArchitectureSpec) -> np.ndarray:
    """Boolean vector over the flat layout, True at weight (non-bias) entries."""
    mask = np.zeros(spec.n_parameters, dtype=bool)
    for slot in parameter_layout(spec):
        if slot.is_weight:
            mask[slot.start : slot.stop] = True
    return mask


@dataclass
class TwoHeadNetwork:
    """An architecture plus one concrete flat parameter vector."""

    spec: ArchitectureSpec
    params: np.ndarray
    _slots: list[_Slot] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.spec.n_parameters,):
            raise ValueError(
                f"parameter vector has shape {self.params.shape}, "
                f"expected ({self.spec.n_parameters},)"
            )
        self._slots = parameter_layout(self.spec)

    def copy(self) -> "TwoHeadNetwork":
        return TwoHeadNetwork(self.spec, self.params.copy())

    def with_params(self, params: np.ndarray) -> "TwoHeadNetwork":
        return TwoHeadNetwork(self.spec, np.asarray(params, dtype=np.float64).copy())

    def _views(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        return {s.name: flat[s.start : s.stop].reshape(s.shape) for s in self._slots}


def init_parameters(spec: ArchitectureSpec, seed: int) -> TwoHeadNetwork:
    """Deterministic uniform fan-in initialization.

    Weights are drawn from U(-a, a) with a = sqrt(6 / fan_in), the He-uniform
    bound appropriate for relu stacks; biases start at zero, which puts the
    initial variance prediction near softplus(0) = ln 2.
    """
    rng = spawn_rng(seed)
    flat = np.zeros(spec.n_parameters, dtype=np.float64)
    net = TwoHeadNetwork(spec, flat)
    views = net._views(net.params)
    for slot in net._slots:
        if slot.is_weight:
            fan_in = slot.shape[0] if len(slot.shape) > 1 else spec.hidden_widths[-1]
            bound = np.sqrt(6.0 / fan_in)
            views[slot.name][...] = rng.uniform(-bound, bound, size=slot.shape)
    return net


def softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + exp(z)) computed without overflow for large |z|."""
    return np.logaddexp(0.0, z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_inputs(spec: ArchitectureSpec, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ValueError(f"inputs have shape {X.shape}, expected (n, {spec.input_dim})")
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs contain non-finite values")
    return X


def _effective_params(net: TwoHeadNetwork, weight_mask: np.ndarray | None) -> np.ndarray:
    if weight_mask is None:
        return net.params
    mask = np.asarray(weight_mask, dtype=np.float64)
    if mask.shape != net.params.shape:
        raise ValueError(
            f"weight mask has shape {mask.shape}, expected {net.params.shape}"
        )
    return net.params * mask


def _forward_cached(net: TwoHeadNetwork, X: np.ndarray, weight_mask: np.ndarray | None):
    """Shared forward pass returning intermediate activations for backprop."""
    params = _effective_params(net, weight_mask)
    views = net._views(params)
    spec = net.spec
    h = X
    hs = [h]  # layer inputs
    zs = []
    for i in range(len(spec.hidden_widths)):
        z = h @ views[f"hidden{i}.W"] + views[f"hidden{i}.b"]
        if spec.hidden_activation == "relu":
            h = np.maximum(z, 0.0)
        else:
            h = sigmoid(z)
        zs.append(z)
        hs.append(h)
    mu = h @ views["mean.W"] + views["mean.b"]
    s = h @ views["variance.W"] + views["variance.b"]
    sigma2 = softplus(s) + spec.variance_floor
    return views, hs, zs, s, mu, sigma2


def forward_batch(
    net: TwoHeadNetwork, X: np.ndarray, weight_mask: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Predict (means, variances) for a batch of row-vector inputs."""
    X = _check_inputs(net.spec, X)
    _, _, _, _, mu, sigma2 = _forward_cached(net, X, weight_mask)
    return mu, sigma2


def forward(
    net: TwoHeadNetwork, x: np.ndarray, weight_mask: np.ndarray | None = None
) -> GaussianPrediction:
    """Predict a single input vector. Pure: never mutates the network."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D input vector, got shape {x.shape}")
    mu, sigma2 = forward_batch(net, x[None, :], weight_mask)
    return GaussianPrediction(mean=float(mu[0]), variance=float(sigma2[0]))


def backward_batch(
    net: TwoHeadNetwork,
    X: np.ndarray,
    d_mean: np.ndarray,
    d_variance: np.ndarray,
    weight_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Flat parameter gradient of sum_i [d_mean_i * mu_i + d_variance_i * sigma2_i].

    ``d_mean`` and ``d_variance`` are the upstream loss derivatives with
    respect to each row's predicted mean and variance.  When a weight mask is
    given the gradient is taken with respect to the unmasked parameters of the
    masked network (zeroed positions receive zero gradient).
    """
    X = _check_inputs(net.spec, X)
    d_mean = np.asarray(d_mean, dtype=np.float64)
    d_variance = np.asarray(d_variance, dtype=np.float64)
    n = X.shape[0]
    if d_mean.shape != (n,) or d_variance.shape != (n,):
        raise ValueError("upstream gradients must be 1-D arrays matching the batch size")
    if not (np.all(np.isfinite(d_mean)) and np.all(np.isfinite(d_variance))):
        raise ValueError("upstream gradients contain non-finite values")

    views, hs, zs, s, _, _ = _forward_cached(net, X, weight_mask)
    spec = net.spec
    grad = np.zeros_like(net.params)
    gnet = TwoHeadNetwork(spec, grad)
    gviews = gnet._views(gnet.params)

    # d sigma2 / d s = sigmoid(s); the floor is additive and drops out.
    gs = d_variance * sigmoid(s)
    h_last = hs[-1]
    gviews["mean.W"][...] = h_last.T @ d_mean
    gviews["mean.b"][...] = d_mean.sum()
    gviews["variance.W"][...] = h_last.T @ gs
    gviews["variance.b"][...] = gs.sum()

    gh = np.outer(d_mean, views["mean.W"]) + np.outer(gs, views["variance.W"])
    for i in reversed(range(len(spec.hidden_widths))):
        if spec.hidden_activation == "relu":
            gz = gh * (zs[i] > 0.0)
        else:
            a = hs[i + 1]
            gz = gh * a * (1.0 - a)
        gviews[f"hidden{i}.W"][...] = hs[i].T @ gz
        gviews[f"hidden{i}.b"][...] = gz.sum(axis=0)
        if i > 0:
            gh = gz @ views[f"hidden{i}.W"].T

    if weight_mask is not None:
        grad *= np.asarray(weight_mask, dtype=np.float64)
    return grad


def backward(
    net: TwoHeadNetwork,
    x: np.ndarray,
    upstream: tuple[float, float],
    weight_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Single-input flat gradient given upstream (d/d mean, d/d variance)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D input vector, got shape {x.shape}")
    d_mean, d_variance = (float(upstream[0]), float(upstream[1]))
    return backward_batch(
        net,
        x[None, :],
        np.array([d_mean]),
        np.array([d_variance]),
        weight_mask,
    )


def save_checkpoint(net: TwoHeadNetwork, path: str | Path, seed: int | None = None) -> None:
    """Write a self-describing JSON checkpoint.

    Floats are serialized via repr, which round-trips float64 bit-exactly.
    """
    record = {
        "layout_version": CHECKPOINT_LAYOUT_VERSION,
        "spec": net.spec.to_dict(),
        "seed": seed,
        "parameters": [float(v) for v in net.params],
    }
    Path(path).write_text(json.dumps(record))


def load_checkpoint(path: str | Path) -> tuple[TwoHeadNetwork, int | None]:
    record = json.loads(Path(path).read_text())
    version = record.get("layout_version")
    if version != CHECKPOINT_LAYOUT_VERSION:
        raise ValueError(
            f"unsupported checkpoint layout version {version!r}; "
            f"this build reads version {CHECKPOINT_LAYOUT_VERSION}"
        )
    spec = ArchitectureSpec.from_dict(record["spec"])
    params = np.asarray(record["parameters"], dtype=np.float64)
    net = TwoHeadNetwork(spec, params)
    return net, record.get("seed")
