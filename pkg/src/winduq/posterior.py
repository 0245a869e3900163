"""Approximate posteriors over network weights.

Three interchangeable samplers produce Monte Carlo draws of Gaussian
predictions for a given input:

* ``deep_ensemble``: independently trained networks; one draw per member.
* ``mc_dropconnect``: one network trained and evaluated with per-weight
  Bernoulli masks, resampled on every forward pass.  Biases are never masked.
* ``bayes_by_backprop``: a factorized Gaussian over the flat weight vector
  with std = softplus(rho), trained against a unit Gaussian prior by
  reparameterized sampling, one weight draw per batch.

All kinds share the flat parameter layout from :mod:`winduq.network`, so a
draw is always "a parameter vector plus a forward pass".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .losses import (
    TrainingConfig,
    TrainingDivergedError,
    TrainingTrace,
    beta_nll_grads,
    beta_nll_terms,
    learning_rate_at,
    make_optimizer,
    train,
    _batch_slices,
    _STREAM_SHUFFLE,
    _STREAM_WEIGHT_DRAW,
)
from .network import (
    ArchitectureSpec,
    GaussianPrediction,
    TwoHeadNetwork,
    backward_batch,
    forward_batch,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
    sigmoid,
    softplus,
    weight_position_mask,
)
from .seeding import derive_seed, spawn_rng

SAMPLER_KINDS = ("deep_ensemble", "mc_dropconnect", "bayes_by_backprop")

POSTERIOR_FORMAT_VERSION = 1

# spawn_key tags for fit-level streams
_STREAM_MEMBER = 201
_STREAM_INIT = 202


@dataclass(frozen=True)
class PosteriorSampler:
    """Choice of posterior approximation plus its sampler-specific knobs.

    ``sample_count`` is the number of Monte Carlo draws taken at prediction
    time.  For deep ensembles it must equal ``ensemble_size``: one draw per
    member, no resampling.
    """

    kind: str
    sample_count: int
    ensemble_size: int = 5
    drop_rate: float = 0.01
    init_sigma: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"kind must be one of {SAMPLER_KINDS}, got {self.kind!r}")
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")
        if self.kind == "deep_ensemble":
            if self.ensemble_size < 1:
                raise ValueError(f"ensemble_size must be >= 1, got {self.ensemble_size}")
            if self.sample_count != self.ensemble_size:
                raise ValueError(
                    f"deep_ensemble draws one prediction per member: sample_count "
                    f"{self.sample_count} != ensemble_size {self.ensemble_size}"
                )
        if self.kind == "mc_dropconnect" and not 0.0 <= self.drop_rate < 1.0:
            raise ValueError(f"drop_rate must lie in [0, 1), got {self.drop_rate}")
        if self.kind == "bayes_by_backprop" and self.init_sigma <= 0:
            raise ValueError(f"init_sigma must be positive, got {self.init_sigma}")


def sample_weight_mask(
    spec: ArchitectureSpec, drop_rate: float, rng: np.random.Generator
) -> np.ndarray:
    """One Bernoulli keep-mask over the flat layout; bias entries stay 1."""
    mask = np.ones(spec.n_parameters, dtype=np.float64)
    wpos = weight_position_mask(spec)
    mask[wpos] = rng.random(int(wpos.sum())) >= drop_rate
    return mask


def kl_to_unit_gaussian(mean: np.ndarray, rho: np.ndarray) -> float:
    """KL( N(mean, softplus(rho)^2) || N(0, I) ), summed over coordinates."""
    mean = np.asarray(mean, dtype=np.float64)
    sigma = softplus(np.asarray(rho, dtype=np.float64))
    return float(np.sum(-np.log(sigma) + (sigma**2 + mean**2 - 1.0) / 2.0))


def kl_to_unit_gaussian_grads(
    mean: np.ndarray, rho: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the closed-form KL with respect to (mean, rho)."""
    mean = np.asarray(mean, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    sigma = softplus(rho)
    d_mean = mean.copy()
    d_rho = (sigma - 1.0 / sigma) * sigmoid(rho)
    return d_mean, d_rho


def softplus_inverse(y: float) -> float:
    # solves softplus(x) = y for y > 0
    if y <= 0:
        raise ValueError(f"softplus inverse needs a positive argument, got {y}")
    return float(y + np.log1p(-np.exp(-y)))


@dataclass
class EnsemblePosterior:
    kind = "deep_ensemble"
    spec: ArchitectureSpec
    members: list[TwoHeadNetwork]
    member_seeds: list[int]
    sample_count: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        self.sample_count = len(self.members)


@dataclass
class DropConnectPosterior:
    kind = "mc_dropconnect"
    spec: ArchitectureSpec
    network: TwoHeadNetwork
    drop_rate: float
    sample_count: int


@dataclass
class VariationalPosterior:
    kind = "bayes_by_backprop"
    spec: ArchitectureSpec
    mean: np.ndarray
    rho: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.rho = np.asarray(self.rho, dtype=np.float64)
        n = self.spec.n_parameters
        if self.mean.shape != (n,) or self.rho.shape != (n,):
            raise ValueError("variational parameter vectors do not match the architecture")

    @property
    def weight_std(self) -> np.ndarray:
        return softplus(self.rho)

    def kl(self) -> float:
        return kl_to_unit_gaussian(self.mean, self.rho)


FittedPosterior = EnsemblePosterior | DropConnectPosterior | VariationalPosterior


def _fit_ensemble(
    sampler: PosteriorSampler,
    spec: ArchitectureSpec,
    data,
    cfg: TrainingConfig,
) -> tuple[EnsemblePosterior, list[TrainingTrace]]:
    members = []
    seeds = []
    traces = []
    for k in range(sampler.ensemble_size):
        member_seed = derive_seed(cfg.seed, _STREAM_MEMBER, k)
        net0 = init_parameters(spec, derive_seed(member_seed, 1))
        cfg_k = replace(cfg, seed=derive_seed(member_seed, 2))
        net_k, trace_k = train(net0, data, cfg_k)
        members.append(net_k)
        seeds.append(member_seed)
        traces.append(trace_k)
    return EnsemblePosterior(spec, members, seeds), traces


def _fit_dropconnect(
    sampler: PosteriorSampler,
    spec: ArchitectureSpec,
    data,
    cfg: TrainingConfig,
) -> tuple[DropConnectPosterior, list[TrainingTrace]]:
    net0 = init_parameters(spec, derive_seed(cfg.seed, _STREAM_INIT))
    rate = sampler.drop_rate

    def mask_sampler(rng: np.random.Generator) -> np.ndarray:
        return sample_weight_mask(spec, rate, rng)

    net, trace = train(net0, data, cfg, mask_sampler=mask_sampler)
    return DropConnectPosterior(spec, net, rate, sampler.sample_count), [trace]


def _fit_variational(
    sampler: PosteriorSampler,
    spec: ArchitectureSpec,
    data,
    cfg: TrainingConfig,
) -> tuple[VariationalPosterior, list[TrainingTrace]]:
    X = np.asarray(data.inputs, dtype=np.float64)
    y = np.asarray(data.targets, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"bad training data shapes: inputs {X.shape}, targets {y.shape}")
    n = X.shape[0]
    if n == 0:
        raise ValueError("training data is empty")
    kl_weight = cfg.kl_weight
    assert kl_weight is not None  # enforced by fit()

    p = spec.n_parameters
    init_net = init_parameters(spec, derive_seed(cfg.seed, _STREAM_INIT))
    v = np.concatenate([init_net.params, np.full(p, softplus_inverse(sampler.init_sigma))])
    mean, rho = v[:p], v[p:]

    opt = make_optimizer(cfg.optimizer, 2 * p)
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
            eps = spawn_rng(cfg.seed, _STREAM_WEIGHT_DRAW, epoch, b).standard_normal(p)
            sigma_q = softplus(rho)
            theta = mean + sigma_q * eps
            net_b = TwoHeadNetwork(spec, theta)
            mu, sigma2 = forward_batch(net_b, Xb)
            values, _ = beta_nll_terms(mu, sigma2, yb, cfg.beta)
            d_mean_up, d_var_up = beta_nll_grads(mu, sigma2, yb, cfg.beta)
            g_theta = backward_batch(net_b, Xb, d_mean_up, d_var_up)
            kl_value = kl_to_unit_gaussian(mean, rho)
            kl_d_mean, kl_d_rho = kl_to_unit_gaussian_grads(mean, rho)
            grad = np.concatenate(
                [
                    g_theta + kl_weight * kl_d_mean,
                    g_theta * eps * sigmoid(rho) + kl_weight * kl_d_rho,
                ]
            )
            batch_objective = float(values.sum()) + kl_weight * kl_value
            if not np.isfinite(batch_objective) or not np.all(np.isfinite(grad)):
                raise TrainingDivergedError(
                    f"non-finite loss or gradient at epoch {epoch}, batch {b}"
                )
            opt.step(v, grad, lr)
            loss_sum += batch_objective
            se_sum += float(((mu - yb) ** 2).sum())
        trace.append(epoch, loss_sum / n, se_sum / n, lr)

    return VariationalPosterior(spec, mean.copy(), rho.copy(), sampler.sample_count), [trace]


def fit(
    sampler: PosteriorSampler,
    spec: ArchitectureSpec,
    data,
    cfg: TrainingConfig,
) -> tuple[FittedPosterior, list[TrainingTrace]]:
    """Train the chosen posterior approximation on a dataset.

    ``cfg.kl_weight`` must be set for ``bayes_by_backprop`` and left None for
    the other kinds.  Determinism: the result is a pure function of
    (sampler, spec, data, cfg).
    """
    if sampler.kind == "bayes_by_backprop":
        if cfg.kl_weight is None:
            raise ValueError("bayes_by_backprop requires cfg.kl_weight")
        return _fit_variational(sampler, spec, data, cfg)
    if cfg.kl_weight is not None:
        raise ValueError(f"kl_weight is only meaningful for bayes_by_backprop, not {sampler.kind}")
    if sampler.kind == "deep_ensemble":
        return _fit_ensemble(sampler, spec, data, cfg)
    return _fit_dropconnect(sampler, spec, data, cfg)


def _param_views(spec: ArchitectureSpec, thetas: np.ndarray) -> dict[str, np.ndarray]:
    from .network import parameter_layout

    s = thetas.shape[0]
    return {
        slot.name: thetas[:, slot.start : slot.stop].reshape((s, *slot.shape))
        for slot in parameter_layout(spec)
    }


def _forward_many(
    spec: ArchitectureSpec, thetas: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Forward one input vector under S different parameter vectors at once."""
    s = thetas.shape[0]
    views = _param_views(spec, thetas)
    h = np.broadcast_to(x, (s, x.size))
    for i in range(len(spec.hidden_widths)):
        z = np.einsum("si,sio->so", h, views[f"hidden{i}.W"]) + views[f"hidden{i}.b"]
        h = np.maximum(z, 0.0) if spec.hidden_activation == "relu" else sigmoid(z)
    mu = np.einsum("si,si->s", h, views["mean.W"]) + views["mean.b"]
    pre = np.einsum("si,si->s", h, views["variance.W"]) + views["variance.b"]
    return mu, softplus(pre) + spec.variance_floor


def draw_parameter_matrix(
    fp: FittedPosterior, n_draws: int, rng: np.random.Generator
) -> np.ndarray:
    """(n_draws, P) parameter vectors sampled from the fitted posterior."""
    if isinstance(fp, EnsemblePosterior):
        if n_draws != len(fp.members):
            raise ValueError(
                f"deep_ensemble yields exactly {len(fp.members)} draws, requested {n_draws}"
            )
        return np.stack([m.params for m in fp.members])
    if isinstance(fp, DropConnectPosterior):
        masks = np.stack(
            [sample_weight_mask(fp.spec, fp.drop_rate, rng) for _ in range(n_draws)]
        )
        return fp.network.params[None, :] * masks
    if isinstance(fp, VariationalPosterior):
        eps = rng.standard_normal((n_draws, fp.mean.size))
        return fp.mean[None, :] + softplus(fp.rho)[None, :] * eps
    raise TypeError(f"not a fitted posterior: {type(fp).__name__}")


def draw_prediction_arrays(
    fp: FittedPosterior, x: np.ndarray, n_draws: int | None = None, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """(means, variances) of S posterior draws for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != fp.spec.input_dim:
        raise ValueError(f"expected an input vector of length {fp.spec.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    s = fp.sample_count if n_draws is None else int(n_draws)
    thetas = draw_parameter_matrix(fp, s, spawn_rng(seed))
    return _forward_many(fp.spec, thetas, x)


def draw_predictions(
    fp: FittedPosterior, x: np.ndarray, n_draws: int | None = None, seed: int = 0
) -> list[GaussianPrediction]:
    """S Monte Carlo predictions for one input, as Gaussian mean/variance pairs."""
    mu, sigma2 = draw_prediction_arrays(fp, x, n_draws, seed)
    return [GaussianPrediction(float(m), float(v)) for m, v in zip(mu, sigma2)]


# ---------------------------------------------------------------------------
# persistence


def save_posterior(fp: FittedPosterior, directory: str | Path, extra: dict | None = None) -> None:
    """Write a posterior to a directory as a manifest plus JSON payload files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "format_version": POSTERIOR_FORMAT_VERSION,
        "kind": fp.kind,
        "sample_count": fp.sample_count,
        "spec": fp.spec.to_dict(),
    }
    if extra:
        manifest["training"] = extra
    if isinstance(fp, EnsemblePosterior):
        files = []
        for k, member in enumerate(fp.members):
            name = f"member_{k:02d}.json"
            save_checkpoint(member, directory / name, seed=fp.member_seeds[k])
            files.append(name)
        manifest["members"] = files
        manifest["member_seeds"] = [int(s) for s in fp.member_seeds]
    elif isinstance(fp, DropConnectPosterior):
        save_checkpoint(fp.network, directory / "network.json")
        manifest["network"] = "network.json"
        manifest["drop_rate"] = fp.drop_rate
    elif isinstance(fp, VariationalPosterior):
        payload = {
            "mean": [float(v) for v in fp.mean],
            "rho": [float(v) for v in fp.rho],
        }
        (directory / "variational.json").write_text(json.dumps(payload))
        manifest["variational"] = "variational.json"
    else:
        raise TypeError(f"not a fitted posterior: {type(fp).__name__}")
    (directory / "posterior.json").write_text(json.dumps(manifest, indent=1))


def load_posterior(directory: str | Path) -> FittedPosterior:
    directory = Path(directory)
    manifest = json.loads((directory / "posterior.json").read_text())
    version = manifest.get("format_version")
    if version != POSTERIOR_FORMAT_VERSION:
        raise ValueError(f"unsupported posterior format version {version!r}")
    spec = ArchitectureSpec.from_dict(manifest["spec"])
    kind = manifest["kind"]
    if kind == "deep_ensemble":
        members = []
        for name in manifest["members"]:
            net, _ = load_checkpoint(directory / name)
            members.append(net)
        return EnsemblePosterior(spec, members, [int(s) for s in manifest["member_seeds"]])
    if kind == "mc_dropconnect":
        net, _ = load_checkpoint(directory / manifest["network"])
        return DropConnectPosterior(
            spec, net, float(manifest["drop_rate"]), int(manifest["sample_count"])
        )
    if kind == "bayes_by_backprop":
        payload = json.loads((directory / manifest["variational"]).read_text())
        return VariationalPosterior(
            spec,
            np.asarray(payload["mean"], dtype=np.float64),
            np.asarray(payload["rho"], dtype=np.float64),
            int(manifest["sample_count"]),
        )
    raise ValueError(f"unknown posterior kind {kind!r}")
