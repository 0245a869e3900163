"""Experiment harness: configs, runners, result tables, run manifests.

Three canned experiments cover the capabilities end to end:

* ``synthetic_ood``: train on the noisy sine benchmark, decompose on a grid
  spanning the training interval and the extrapolation region beyond it.
* ``data_property``: train on a (surrogate or real) wind power table and
  relate the decomposed uncertainties to sample density and the speed band
  where most observations live.
* ``dataset_scaling``: train on growing subsets of an autoregressive hourly
  power series and track how epistemic uncertainty shrinks with data volume.

Every run writes deterministic CSV tables (floats via repr, so reruns are
byte-identical) plus a ``manifest.json`` describing config, data fingerprint
and produced artifacts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    PowerCurveSpec,
    RegressionDataset,
    current_speed_column,
    load_scada_csv,
    make_hourly_power_series,
    make_power_curve_table,
    make_sine_dataset,
    preprocess_power_table,
    subsample_dataset,
    window_power_table,
    window_univariate_series,
)
from .losses import TrainingConfig
from .metrics import joint_density_ranks, mse, spearman
from .network import ArchitectureSpec
from .posterior import SAMPLER_KINDS, PosteriorSampler, fit, load_posterior, save_posterior
from .seeding import derive_seed
from .uncertainty import decompose_batch

EXPERIMENTS = ("synthetic_ood", "data_property", "dataset_scaling", "decompose")

OUT_DIR_ENV_VAR = "WINDUQ_OUT_DIR"

# seed-derivation tags for the independent streams one run uses
_TAG_DATA = 401
_TAG_FIT = 402
_TAG_DECOMP = 403
_TAG_SUBSET = 404


class ConfigError(ValueError):
    """Raised for unreadable, unknown or ill-typed configuration input."""


# ---------------------------------------------------------------------------
# defaults

_DEFAULT_BETAS: dict[str, dict[str, tuple[float, ...]]] = {
    "synthetic_ood": {k: (0.0, 0.5, 1.0) for k in SAMPLER_KINDS},
    "data_property": {
        "mc_dropconnect": (0.4, 0.8),
        "bayes_by_backprop": (0.4, 0.6),
        "deep_ensemble": (0.2, 0.8),
    },
    "dataset_scaling": {k: (0.6,) for k in SAMPLER_KINDS},
    "decompose": {k: () for k in SAMPLER_KINDS},
}

_DEFAULT_EPOCHS: dict[str, dict[str, int]] = {
    "synthetic_ood": {
        "deep_ensemble": 600,
        "mc_dropconnect": 600,
        "bayes_by_backprop": 600,
    },
    "data_property": {
        "deep_ensemble": 20,
        "mc_dropconnect": 150,
        "bayes_by_backprop": 300,
    },
    "dataset_scaling": {
        "deep_ensemble": 15,
        "mc_dropconnect": 120,
        "bayes_by_backprop": 200,
    },
    "decompose": {k: 0 for k in SAMPLER_KINDS},
}

_DEFAULT_LR: dict[str, dict[str, tuple[float, int, float]]] = {
    "synthetic_ood": {
        "deep_ensemble": (1e-2, 200, 0.3),
        "mc_dropconnect": (1e-2, 200, 0.3),
        "bayes_by_backprop": (3e-3, 200, 0.3),
    },
    "data_property": {
        "deep_ensemble": (1e-3, 10, 0.1),
        "mc_dropconnect": (1e-3, 60, 0.1),
        "bayes_by_backprop": (1e-3, 100, 0.1),
    },
    "dataset_scaling": {
        "deep_ensemble": (1e-3, 10, 0.1),
        "mc_dropconnect": (1e-3, 100, 0.1),
        "bayes_by_backprop": (1e-4, 100, 0.1),
    },
    "decompose": {k: (1e-3, 100, 0.1) for k in SAMPLER_KINDS},
}

_DEFAULT_HIDDEN: dict[str, tuple[int, ...]] = {
    "synthetic_ood": (32, 32),
    "data_property": (64, 64, 64),
    "dataset_scaling": (32, 32),
    "decompose": (32, 32),
}

# multivariate power-table windows vs univariate autoregressive windows
_DEFAULT_LAGS: dict[str, int] = {
    "synthetic_ood": 10,
    "data_property": 10,
    "dataset_scaling": 24,
    "decompose": 10,
}


@dataclass
class ExperimentConfig:
    """Fully resolved settings for one harness invocation."""

    experiment: str
    out_dir: Path
    samplers: tuple[str, ...] = SAMPLER_KINDS
    seeds: tuple[int, ...] = (1,)
    dataset: Path | None = None
    # network
    hidden_widths: tuple[int, ...] = (32, 32)
    activation: str = "relu"
    variance_floor: float = 1e-6
    # training
    batch_size: int = 128
    optimizer: str = "adam"
    betas: dict[str, tuple[float, ...]] = field(default_factory=dict)
    epochs: dict[str, int] = field(default_factory=dict)
    lr: dict[str, tuple[float, int, float]] = field(default_factory=dict)
    # samplers
    mc_samples: int = 30
    ensemble_size: int = 5
    drop_rate: float = 0.01
    init_sigma: float = 0.05
    kl_weight: float | None = None  # None = 1 / (nearest-integer batch count)
    save_posteriors: bool = False
    # synthetic_ood
    grid_points: int = 301
    sine_n_train: int = 1000
    sine_n_test: int = 200
    sine_noise_scale: float = 0.3
    # data_property
    surrogate_n: int = 8000
    outlier_fraction: float = 0.03
    surrogate_seed: int = 7
    lags: int = 10
    density_bins: int = 30
    band: tuple[float, float] = (2.0, 11.0)
    # dataset_scaling
    series_n: int = 4344
    series_seed: int = 11
    test_fraction: float = 0.1
    ratios: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    # decompose
    posterior_dir: Path | None = None


# ---------------------------------------------------------------------------
# config file parsing


def _parse_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {raw!r}") from exc


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {raw!r}") from exc


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected true/false, got {raw!r}")


def _parse_list(raw: str) -> list[str]:
    items = [part.strip() for part in raw.split(",")]
    if any(not item for item in items):
        raise ConfigError(f"malformed comma list {raw!r}")
    return items


def _parse_floats(raw: str) -> tuple[float, ...]:
    return tuple(_parse_float(v) for v in _parse_list(raw))


def _parse_ints(raw: str) -> tuple[int, ...]:
    return tuple(_parse_int(v) for v in _parse_list(raw))


def _parse_lr(raw: str) -> tuple[float, int, float]:
    parts = _parse_list(raw)
    if len(parts) != 3:
        raise ConfigError(f"lr wants 'initial, decay_step, decay_factor', got {raw!r}")
    return (_parse_float(parts[0]), _parse_int(parts[1]), _parse_float(parts[2]))


def _parse_kl_weight(raw: str) -> float | None:
    if raw.strip().lower() == "auto":
        return None
    if "/" in raw:
        num, _, den = raw.partition("/")
        return _parse_float(num) / _parse_float(den)
    return _parse_float(raw)


def _parse_samplers(raw: str) -> tuple[str, ...]:
    kinds = tuple(_parse_list(raw))
    bad = [k for k in kinds if k not in SAMPLER_KINDS]
    if bad:
        raise ConfigError(f"unknown sampler kinds {bad}; valid: {list(SAMPLER_KINDS)}")
    if len(set(kinds)) != len(kinds):
        raise ConfigError(f"duplicate sampler kinds in {raw!r}")
    return kinds


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat 'key = value' file; '#' lines are comments."""
    entries: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}:{line_no}: empty key")
        if key in entries:
            raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _known_keys() -> set[str]:
    keys = {
        "experiment", "samplers", "seeds", "out_dir", "dataset",
        "hidden_widths", "activation", "variance_floor",
        "batch_size", "optimizer", "betas", "epochs", "lr",
        "mc_samples", "ensemble_size", "drop_rate", "init_sigma", "kl_weight",
        "save_posteriors",
        "grid_points", "sine_n_train", "sine_n_test", "sine_noise_scale",
        "surrogate_n", "outlier_fraction", "surrogate_seed", "lags",
        "density_bins", "band",
        "series_n", "series_seed", "test_fraction", "ratios",
        "posterior_dir",
    }
    for kind in SAMPLER_KINDS:
        keys.update({f"{kind}.epochs", f"{kind}.lr", f"{kind}.betas"})
    return keys


def build_config(experiment: str, entries: dict[str, str]) -> ExperimentConfig:
    """Resolve raw key-value entries against per-experiment defaults.

    Unknown keys are rejected outright; ``experiment`` inside the file must
    agree with the subcommand that was invoked.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; valid: {list(EXPERIMENTS)}")
    unknown = sorted(set(entries) - _known_keys())
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; valid keys: {sorted(_known_keys())}")
    declared = entries.get("experiment")
    if declared is not None and declared != experiment:
        raise ConfigError(
            f"config declares experiment {declared!r} but the {experiment!r} command was invoked"
        )

    cfg = ExperimentConfig(
        experiment=experiment,
        out_dir=Path(entries.get("out_dir", f"runs/{experiment}")),
        hidden_widths=_DEFAULT_HIDDEN[experiment],
        lags=_DEFAULT_LAGS[experiment],
        betas=dict(_DEFAULT_BETAS[experiment]),
        epochs=dict(_DEFAULT_EPOCHS[experiment]),
        lr=dict(_DEFAULT_LR[experiment]),
    )

    simple = {
        "samplers": ("samplers", _parse_samplers),
        "seeds": ("seeds", _parse_ints),
        "hidden_widths": ("hidden_widths", _parse_ints),
        "activation": ("activation", str),
        "variance_floor": ("variance_floor", _parse_float),
        "batch_size": ("batch_size", _parse_int),
        "optimizer": ("optimizer", str),
        "mc_samples": ("mc_samples", _parse_int),
        "ensemble_size": ("ensemble_size", _parse_int),
        "drop_rate": ("drop_rate", _parse_float),
        "init_sigma": ("init_sigma", _parse_float),
        "kl_weight": ("kl_weight", _parse_kl_weight),
        "save_posteriors": ("save_posteriors", _parse_bool),
        "grid_points": ("grid_points", _parse_int),
        "sine_n_train": ("sine_n_train", _parse_int),
        "sine_n_test": ("sine_n_test", _parse_int),
        "sine_noise_scale": ("sine_noise_scale", _parse_float),
        "surrogate_n": ("surrogate_n", _parse_int),
        "outlier_fraction": ("outlier_fraction", _parse_float),
        "surrogate_seed": ("surrogate_seed", _parse_int),
        "lags": ("lags", _parse_int),
        "density_bins": ("density_bins", _parse_int),
        "series_n": ("series_n", _parse_int),
        "series_seed": ("series_seed", _parse_int),
        "test_fraction": ("test_fraction", _parse_float),
        "ratios": ("ratios", _parse_floats),
    }
    for key, raw in entries.items():
        if key == "experiment":
            continue
        if key == "out_dir":
            cfg.out_dir = Path(raw)
        elif key == "dataset":
            cfg.dataset = Path(raw)
        elif key == "posterior_dir":
            cfg.posterior_dir = Path(raw)
        elif key == "band":
            lo_hi = _parse_floats(raw)
            if len(lo_hi) != 2 or lo_hi[0] >= lo_hi[1]:
                raise ConfigError(f"band wants 'low, high' with low < high, got {raw!r}")
            cfg.band = (lo_hi[0], lo_hi[1])
        elif key == "betas":
            values = _parse_floats(raw)
            cfg.betas = {k: values for k in SAMPLER_KINDS}
        elif key == "epochs":
            value = _parse_int(raw)
            cfg.epochs = {k: value for k in SAMPLER_KINDS}
        elif key == "lr":
            triple = _parse_lr(raw)
            cfg.lr = {k: triple for k in SAMPLER_KINDS}
        elif "." in key:
            kind, _, attr = key.partition(".")
            if attr == "betas":
                cfg.betas[kind] = _parse_floats(raw)
            elif attr == "epochs":
                cfg.epochs[kind] = _parse_int(raw)
            elif attr == "lr":
                cfg.lr[kind] = _parse_lr(raw)
        elif key in simple:
            attr, parser = simple[key]
            try:
                setattr(cfg, attr, parser(raw))
            except ConfigError as exc:
                raise ConfigError(f"key {key!r}: {exc}") from exc

    _validate_config(cfg)
    return cfg


def _validate_config(cfg: ExperimentConfig) -> None:
    if not cfg.seeds:
        raise ConfigError("seeds must not be empty")
    if not cfg.samplers:
        raise ConfigError("samplers must not be empty")
    if cfg.experiment == "dataset_scaling":
        if not cfg.ratios or any(not 0 < r <= 1 for r in cfg.ratios):
            raise ConfigError(f"ratios must lie in (0, 1], got {cfg.ratios}")
    if cfg.experiment == "synthetic_ood" and cfg.grid_points < 2:
        raise ConfigError(f"grid_points must be >= 2, got {cfg.grid_points}")
    if cfg.experiment == "decompose" and cfg.posterior_dir is None:
        raise ConfigError("decompose needs a posterior_dir config entry")
    if cfg.experiment == "decompose" and cfg.dataset is None:
        raise ConfigError("decompose needs --dataset pointing at a CSV of input rows")


def auto_kl_weight(n_train: int, batch_size: int) -> float:
    """1 / (number of batches), with the batch count taken to the nearest integer."""
    if n_train < 1 or batch_size < 1:
        raise ValueError("need positive n_train and batch_size")
    return 1.0 / max(1, round(n_train / batch_size))


# ---------------------------------------------------------------------------
# deterministic table output


def format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row width {len(row)} != header width {len(header)}")
        lines.append(",".join(format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _dataset_fingerprint(ds: RegressionDataset) -> dict:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(ds.inputs).tobytes())
    digest.update(np.ascontiguousarray(ds.targets).tobytes())
    return {
        "tag": ds.tag,
        "rows": len(ds),
        "features": ds.inputs.shape[1],
        "provenance": ds.provenance,
        "sha256": digest.hexdigest(),
    }


def _config_echo(cfg: ExperimentConfig) -> dict:
    echo = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, dict):
            value = {k: list(v) if isinstance(v, tuple) else v for k, v in value.items()}
        elif isinstance(value, tuple):
            value = list(value)
        echo[f.name] = value
    return echo


def write_manifest(out_dir: Path, manifest: dict) -> Path:
    """Write manifest.json after checking every listed artifact exists non-empty."""
    for name in manifest.get("artifacts", []):
        target = out_dir / name
        if not target.is_file() or target.stat().st_size == 0:
            raise RuntimeError(f"manifest lists missing or empty artifact {target}")
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return path


def _sampler_for(cfg: ExperimentConfig, kind: str) -> PosteriorSampler:
    count = cfg.ensemble_size if kind == "deep_ensemble" else cfg.mc_samples
    return PosteriorSampler(
        kind=kind,
        sample_count=count,
        ensemble_size=cfg.ensemble_size,
        drop_rate=cfg.drop_rate,
        init_sigma=cfg.init_sigma,
    )


def _training_config(
    cfg: ExperimentConfig, kind: str, beta: float, fit_seed: int, n_train: int
) -> TrainingConfig:
    kl = None
    if kind == "bayes_by_backprop":
        kl = cfg.kl_weight if cfg.kl_weight is not None else auto_kl_weight(n_train, cfg.batch_size)
    return TrainingConfig(
        beta=beta,
        epochs=cfg.epochs[kind],
        batch_size=cfg.batch_size,
        lr_schedule=cfg.lr[kind],
        optimizer=cfg.optimizer,
        seed=fit_seed,
        kl_weight=kl,
    )


def _beta_token(beta: float) -> str:
    return format(beta, "g").replace(".", "p").replace("-", "m")


def _spearman_or_blank(a, b) -> float | str:
    # rank correlation, or a blank cell where it is undefined
    try:
        return spearman(a, b)
    except ValueError:
        return ""


# ---------------------------------------------------------------------------
# runners


def run_synthetic_ood(cfg: ExperimentConfig) -> dict:
    """Sine benchmark: decompose over [0, 15] after training on [0, 10]."""
    t0 = time.monotonic()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(0.0, 15.0, cfg.grid_points)
    grid_inputs = grid[:, None]
    in_domain = grid <= 10.0
    beyond = grid >= 10.0
    artifacts: list[str] = []
    cells: list[dict] = []
    summary_rows: list[list] = []
    fingerprints = []

    for seed in cfg.seeds:
        train, test = make_sine_dataset(
            seed=derive_seed(seed, _TAG_DATA),
            n_train=cfg.sine_n_train,
            n_test=cfg.sine_n_test,
            noise_scale=cfg.sine_noise_scale,
        )
        fingerprints.append(_dataset_fingerprint(train))
        spec = ArchitectureSpec(1, cfg.hidden_widths, cfg.activation, cfg.variance_floor)
        for k_idx, kind in enumerate(cfg.samplers):
            fit_seed = derive_seed(seed, _TAG_FIT, k_idx)
            for b_idx, beta in enumerate(cfg.betas[kind]):
                sampler = _sampler_for(cfg, kind)
                tc = _training_config(cfg, kind, beta, fit_seed, len(train))
                fp, _ = fit(sampler, spec, train, tc)
                dec_grid = decompose_batch(
                    fp, grid_inputs, seed=derive_seed(seed, _TAG_DECOMP, k_idx, b_idx, 0)
                )
                dec_test = decompose_batch(
                    fp, test.inputs, seed=derive_seed(seed, _TAG_DECOMP, k_idx, b_idx, 1)
                )
                name = f"synthetic_{kind}_beta{_beta_token(beta)}_seed{seed}.csv"
                write_csv(
                    cfg.out_dir / name,
                    ["x", "mean", "aleatoric", "epistemic", "total"],
                    [
                        [grid[i], dec_grid.mean[i], dec_grid.aleatoric[i],
                         dec_grid.epistemic[i], dec_grid.total[i]]
                        for i in range(grid.size)
                    ],
                )
                artifacts.append(name)
                mean_eu_id = float(dec_grid.epistemic[in_domain].mean())
                mean_eu_ood = float(dec_grid.epistemic[beyond].mean())
                au_id = dec_grid.aleatoric[in_domain]
                stats = {
                    "mse_test": mse(dec_test.mean, test.targets),
                    "mean_eu_id": mean_eu_id,
                    "mean_eu_ood": mean_eu_ood,
                    "eu_ood_ratio": mean_eu_ood / mean_eu_id if mean_eu_id > 0 else float("inf"),
                    "spearman_au_x": _spearman_or_blank(au_id, grid[in_domain]),
                    "au_iqr_id": float(np.percentile(au_id, 75) - np.percentile(au_id, 25)),
                }
                if cfg.save_posteriors:
                    pdir = f"posterior_{kind}_beta{_beta_token(beta)}_seed{seed}"
                    save_posterior(fp, cfg.out_dir / pdir, extra={"seed": seed, "beta": beta})
                cells.append(
                    {"sampler": kind, "beta": beta, "seed": seed, "file": name, **stats}
                )
                summary_rows.append(
                    [kind, beta, seed, stats["mse_test"], stats["mean_eu_id"],
                     stats["mean_eu_ood"], stats["eu_ood_ratio"], stats["spearman_au_x"],
                     stats["au_iqr_id"]]
                )

    write_csv(
        cfg.out_dir / "summary.csv",
        ["sampler", "beta", "seed", "mse_test", "mean_eu_id", "mean_eu_ood",
         "eu_ood_ratio", "spearman_au_x", "au_iqr_id"],
        summary_rows,
    )
    artifacts.append("summary.csv")
    manifest = {
        "experiment": cfg.experiment,
        "status": "ok",
        "config": _config_echo(cfg),
        "datasets": fingerprints,
        "cells": cells,
        "artifacts": artifacts,
        "wall_time_s": time.monotonic() - t0,
    }
    write_manifest(cfg.out_dir, manifest)
    return manifest


def _load_property_table(cfg: ExperimentConfig):
    if cfg.dataset is not None:
        table, diagnostics = load_scada_csv(cfg.dataset)
        source = f"csv:{cfg.dataset}"
    else:
        table = make_power_curve_table(
            seed=cfg.surrogate_seed,
            n=cfg.surrogate_n,
            spec=PowerCurveSpec(outlier_fraction=cfg.outlier_fraction),
        )
        diagnostics = []
        source = f"surrogate(seed={cfg.surrogate_seed}, n={cfg.surrogate_n})"
    return table, diagnostics, source


def run_data_property(cfg: ExperimentConfig) -> dict:
    """Wind table: relate decomposed uncertainty to density and speed band."""
    t0 = time.monotonic()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    table, diagnostics, source = _load_property_table(cfg)
    clean, stats = preprocess_power_table(table)
    train, _val, test = window_power_table(clean, stats, lags=cfg.lags)
    speed_phys = current_speed_column(test)
    speed_idx = test.feature_names.index("speed_now")
    density_rank = joint_density_ranks(
        test.inputs[:, speed_idx], test.targets, bins=cfg.density_bins
    )
    lo, hi = cfg.band
    in_band = (speed_phys >= lo) & (speed_phys <= hi)
    if not in_band.any() or in_band.all():
        raise RuntimeError(
            f"speed band [{lo}, {hi}] does not split the test rows; cannot compare"
        )

    spec = ArchitectureSpec(
        test.inputs.shape[1], cfg.hidden_widths, cfg.activation, cfg.variance_floor
    )
    artifacts: list[str] = []
    cells: list[dict] = []
    summary_rows: list[list] = []

    for seed in cfg.seeds:
        for k_idx, kind in enumerate(cfg.samplers):
            fit_seed = derive_seed(seed, _TAG_FIT, k_idx)
            for b_idx, beta in enumerate(cfg.betas[kind]):
                sampler = _sampler_for(cfg, kind)
                tc = _training_config(cfg, kind, beta, fit_seed, len(train))
                fp, _ = fit(sampler, spec, train, tc)
                dec = decompose_batch(
                    fp, test.inputs, seed=derive_seed(seed, _TAG_DECOMP, k_idx, b_idx)
                )
                name = f"property_{kind}_beta{_beta_token(beta)}_seed{seed}.csv"
                write_csv(
                    cfg.out_dir / name,
                    ["wind_speed", "power", "mean", "aleatoric", "epistemic", "total",
                     "density_rank"],
                    [
                        [speed_phys[i], test.targets[i], dec.mean[i], dec.aleatoric[i],
                         dec.epistemic[i], dec.total[i], density_rank[i]]
                        for i in range(len(test))
                    ],
                )
                artifacts.append(name)
                row_stats = {
                    "mse_test": mse(dec.mean, test.targets),
                    "mean_eu_in_band": float(dec.epistemic[in_band].mean()),
                    "mean_eu_out_band": float(dec.epistemic[~in_band].mean()),
                    "spearman_au_density": _spearman_or_blank(dec.aleatoric, density_rank),
                }
                if cfg.save_posteriors:
                    pdir = f"posterior_{kind}_beta{_beta_token(beta)}_seed{seed}"
                    save_posterior(fp, cfg.out_dir / pdir, extra={"seed": seed, "beta": beta})
                cells.append(
                    {"sampler": kind, "beta": beta, "seed": seed, "file": name, **row_stats}
                )
                summary_rows.append(
                    [kind, beta, seed, row_stats["mse_test"], row_stats["mean_eu_in_band"],
                     row_stats["mean_eu_out_band"], row_stats["spearman_au_density"],
                     int(in_band.sum()), int((~in_band).sum())]
                )

    write_csv(
        cfg.out_dir / "summary.csv",
        ["sampler", "beta", "seed", "mse_test", "mean_eu_in_band", "mean_eu_out_band",
         "spearman_au_density", "n_in_band", "n_out_band"],
        summary_rows,
    )
    artifacts.append("summary.csv")
    manifest = {
        "experiment": cfg.experiment,
        "status": "ok",
        "config": _config_echo(cfg),
        "source": source,
        "load_diagnostics": diagnostics[:20],
        "datasets": [_dataset_fingerprint(train), _dataset_fingerprint(test)],
        "cells": cells,
        "artifacts": artifacts,
        "wall_time_s": time.monotonic() - t0,
    }
    write_manifest(cfg.out_dir, manifest)
    return manifest


def _load_series(cfg: ExperimentConfig) -> tuple[np.ndarray, str]:
    if cfg.dataset is not None:
        raw = np.genfromtxt(cfg.dataset, delimiter=",", names=True)
        names = raw.dtype.names or ()
        if "power" in names:
            series = np.asarray(raw["power"], dtype=np.float64)
        elif len(names) == 1:
            series = np.asarray(raw[names[0]], dtype=np.float64)
        else:
            raise ConfigError(
                f"{cfg.dataset}: expected a single-column CSV or a 'power' column, got {names}"
            )
        return series, f"csv:{cfg.dataset}"
    series = make_hourly_power_series(seed=cfg.series_seed, n=cfg.series_n)
    return series, f"surrogate(seed={cfg.series_seed}, n={cfg.series_n})"


def run_dataset_scaling(cfg: ExperimentConfig) -> dict:
    """Grow the training subset and track mean epistemic uncertainty."""
    t0 = time.monotonic()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    series, source = _load_series(cfg)
    pool, test = window_univariate_series(series, lags=cfg.lags, test_fraction=cfg.test_fraction)
    spec = ArchitectureSpec(
        pool.inputs.shape[1], cfg.hidden_widths, cfg.activation, cfg.variance_floor
    )
    beta_by_kind = {k: (v[0] if v else 0.6) for k, v in cfg.betas.items()}

    artifacts: list[str] = []
    cells: list[dict] = []
    rows: list[list] = []
    summary_rows: list[list] = []

    for seed in cfg.seeds:
        for k_idx, kind in enumerate(cfg.samplers):
            beta = beta_by_kind[kind]
            per_ratio_eu: list[float] = []
            for r_idx, ratio in enumerate(cfg.ratios):
                subset = subsample_dataset(
                    pool, ratio, seed=derive_seed(seed, _TAG_SUBSET, r_idx)
                )
                fit_seed = derive_seed(seed, _TAG_FIT, k_idx, r_idx)
                tc = _training_config(cfg, kind, beta, fit_seed, len(subset))
                sampler = _sampler_for(cfg, kind)
                fp, _ = fit(sampler, spec, subset, tc)
                dec = decompose_batch(
                    fp, test.inputs, seed=derive_seed(seed, _TAG_DECOMP, k_idx, r_idx)
                )
                mean_eu = float(dec.epistemic.mean())
                per_ratio_eu.append(mean_eu)
                row = {
                    "sampler": kind,
                    "seed": seed,
                    "ratio": ratio,
                    "n_train": len(subset),
                    "kl_weight": tc.kl_weight,
                    "mse_test": mse(dec.mean, test.targets),
                    "mean_aleatoric": float(dec.aleatoric.mean()),
                    "mean_epistemic": mean_eu,
                }
                cells.append(row)
                rows.append(
                    [kind, seed, ratio, row["n_train"],
                     row["kl_weight"] if row["kl_weight"] is not None else "",
                     row["mse_test"], row["mean_aleatoric"], row["mean_epistemic"]]
                )
            trend = _spearman_or_blank(np.asarray(cfg.ratios), np.asarray(per_ratio_eu))
            summary_rows.append(
                [kind, seed, trend, per_ratio_eu[0], per_ratio_eu[-1]]
            )

    write_csv(
        cfg.out_dir / "scaling.csv",
        ["sampler", "seed", "ratio", "n_train", "kl_weight", "mse_test",
         "mean_aleatoric", "mean_epistemic"],
        rows,
    )
    write_csv(
        cfg.out_dir / "summary.csv",
        ["sampler", "seed", "spearman_ratio_eu", "eu_first_ratio", "eu_last_ratio"],
        summary_rows,
    )
    artifacts.extend(["scaling.csv", "summary.csv"])
    manifest = {
        "experiment": cfg.experiment,
        "status": "ok",
        "config": _config_echo(cfg),
        "source": source,
        "datasets": [_dataset_fingerprint(pool), _dataset_fingerprint(test)],
        "cells": cells,
        "artifacts": artifacts,
        "wall_time_s": time.monotonic() - t0,
    }
    write_manifest(cfg.out_dir, manifest)
    return manifest


def _load_feature_csv(path: Path) -> tuple[np.ndarray, list[str]]:
    raw = np.genfromtxt(path, delimiter=",", names=True)
    names = list(raw.dtype.names or ())
    if not names:
        raise ConfigError(f"{path}: expected a CSV with a header row")
    X = np.column_stack([np.asarray(raw[n], dtype=np.float64) for n in names])
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigError(f"{path}: no data rows")
    if not np.all(np.isfinite(X)):
        raise ConfigError(f"{path}: non-finite feature values")
    return X, names


def run_decompose(cfg: ExperimentConfig) -> dict:
    """Ad-hoc decomposition of a saved posterior over a CSV of inputs."""
    t0 = time.monotonic()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    assert cfg.posterior_dir is not None and cfg.dataset is not None
    fp = load_posterior(cfg.posterior_dir)
    X, names = _load_feature_csv(cfg.dataset)
    if X.shape[1] != fp.spec.input_dim:
        raise ConfigError(
            f"posterior expects {fp.spec.input_dim} features, CSV has {X.shape[1]}"
        )
    n_draws = None if fp.kind == "deep_ensemble" else cfg.mc_samples
    dec = decompose_batch(fp, X, n_draws, seed=cfg.seeds[0])
    name = "decomposition.csv"
    write_csv(
        cfg.out_dir / name,
        names + ["mean", "aleatoric", "epistemic", "total"],
        [
            list(X[i]) + [dec.mean[i], dec.aleatoric[i], dec.epistemic[i], dec.total[i]]
            for i in range(X.shape[0])
        ],
    )
    manifest = {
        "experiment": cfg.experiment,
        "status": "ok",
        "config": _config_echo(cfg),
        "posterior_kind": fp.kind,
        "rows": int(X.shape[0]),
        "artifacts": [name],
        "wall_time_s": time.monotonic() - t0,
    }
    write_manifest(cfg.out_dir, manifest)
    return manifest


RUNNERS = {
    "synthetic_ood": run_synthetic_ood,
    "data_property": run_data_property,
    "dataset_scaling": run_dataset_scaling,
    "decompose": run_decompose,
}
