"""Datasets: the synthetic sine benchmark, SCADA-style wind tables, windowing.

The SCADA path mirrors a fixed pipeline: load a raw table, repair negative
power readings, drop rows with missing values, min-max normalize every
variable to [0, 1], then slice lagged windows and split chronologically.
A bundled power-curve surrogate generator produces tables with the same
qualitative shape (long-tailed speeds, saturating curve, heteroscedastic
scatter, off-curve outliers) for self-contained runs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import spawn_rng

SCADA_COLUMNS = ("timestamp", "wind_speed", "wind_direction", "active_power")


@dataclass(frozen=True)
class FeatureScaling:
    """Min-max statistics used to map features and target into [0, 1]."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_min", np.asarray(self.feature_min, dtype=np.float64))
        object.__setattr__(self, "feature_max", np.asarray(self.feature_max, dtype=np.float64))

    def denormalize_feature(self, column: np.ndarray, index: int) -> np.ndarray:
        lo, hi = self.feature_min[index], self.feature_max[index]
        return lo + np.asarray(column) * (hi - lo)

    def denormalize_targets(self, y: np.ndarray) -> np.ndarray:
        return self.target_min + np.asarray(y) * (self.target_max - self.target_min)


@dataclass
class RegressionDataset:
    """Inputs, targets, optional scaling record, split tag, provenance note."""

    inputs: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    tag: str = ""
    provenance: str = ""
    scaling: FeatureScaling | None = None

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 2:
            raise ValueError(f"inputs must be 2-D, got shape {self.inputs.shape}")
        if self.targets.shape != (self.inputs.shape[0],):
            raise ValueError(
                f"targets shape {self.targets.shape} does not match {self.inputs.shape[0]} rows"
            )
        if len(self.feature_names) != self.inputs.shape[1]:
            raise ValueError("feature_names must match the input width")
        if self.scaling is not None and self.inputs.size:
            lo, hi = self.inputs.min(), self.inputs.max()
            if lo < -1e-9 or hi > 1.0 + 1e-9:
                raise ValueError(
                    f"scaled inputs must lie in [0, 1], found range [{lo}, {hi}]"
                )

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class ScadaTable:
    """Columnar wind turbine table in physical units."""

    timestamp: np.ndarray  # strings, kept only for chronology/provenance
    wind_speed: np.ndarray
    wind_direction: np.ndarray
    active_power: np.ndarray

    def __post_init__(self) -> None:
        self.timestamp = np.asarray(self.timestamp)
        self.wind_speed = np.asarray(self.wind_speed, dtype=np.float64)
        self.wind_direction = np.asarray(self.wind_direction, dtype=np.float64)
        self.active_power = np.asarray(self.active_power, dtype=np.float64)
        n = len(self.timestamp)
        for name in ("wind_speed", "wind_direction", "active_power"):
            if len(getattr(self, name)) != n:
                raise ValueError("all columns must have equal length")

    def __len__(self) -> int:
        return len(self.timestamp)


# ---------------------------------------------------------------------------
# synthetic sine benchmark


def sine_mean(x: np.ndarray) -> np.ndarray:
    return x * np.sin(x)


def sine_conditional_variance(x: np.ndarray, noise_scale: float = 0.3) -> np.ndarray:
    """Ground-truth Var[y | x] for the sine benchmark: scale^2 * (x^2 + 1)."""
    return noise_scale**2 * (np.asarray(x, dtype=np.float64) ** 2 + 1.0)


def make_sine_dataset(
    seed: int,
    n_train: int = 1000,
    n_test: int = 200,
    noise_scale: float = 0.3,
    train_range: tuple[float, float] = (0.0, 10.0),
    test_range: tuple[float, float] = (10.0, 15.0),
) -> tuple[RegressionDataset, RegressionDataset]:
    """y = x sin x + e1 x + e2 with e1, e2 ~ N(0, noise_scale^2).

    Training inputs are uniform on ``train_range``; the test inputs live on
    the disjoint ``test_range`` so the test split probes extrapolation.
    Inputs and targets are left in raw units.
    """
    if n_train < 1 or n_test < 0:
        raise ValueError("need n_train >= 1 and n_test >= 0")
    if noise_scale < 0:
        raise ValueError(f"noise_scale must be >= 0, got {noise_scale}")
    rng = spawn_rng(seed)

    def draw(n: int, lo: float, hi: float, tag: str) -> RegressionDataset:
        x = rng.uniform(lo, hi, size=n)
        e1 = rng.normal(0.0, noise_scale, size=n)
        e2 = rng.normal(0.0, noise_scale, size=n)
        y = sine_mean(x) + e1 * x + e2
        return RegressionDataset(
            inputs=x[:, None],
            targets=y,
            feature_names=("x",),
            tag=tag,
            provenance=f"synthetic sine benchmark, noise_scale={noise_scale}, seed={seed}",
        )

    train = draw(n_train, *train_range, "train")
    test = draw(n_test, *test_range, "test")
    return train, test


# ---------------------------------------------------------------------------
# SCADA ingestion and preprocessing


def load_scada_csv(
    path: str | Path, column_map: dict[str, str] | None = None
) -> tuple[ScadaTable, list[str]]:
    """Read a raw SCADA CSV into a table, collecting per-row diagnostics.

    ``column_map`` maps the canonical names (timestamp, wind_speed,
    wind_direction, active_power) to the file's header names.  Rows whose
    numeric fields cannot be parsed are dropped and reported; more than 50%
    bad rows aborts with an error.  Empty numeric fields become NaN so the
    preprocessing stage can drop them explicitly.
    """
    path = Path(path)
    colmap = {name: name for name in SCADA_COLUMNS}
    if column_map:
        unknown = set(column_map) - set(SCADA_COLUMNS)
        if unknown:
            raise ValueError(f"column_map refers to unknown canonical names: {sorted(unknown)}")
        colmap.update(column_map)

    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, expected a CSV header")
        missing = [colmap[c] for c in SCADA_COLUMNS if colmap[c] not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing required columns {missing}")
        stamps: list[str] = []
        speeds: list[float] = []
        directions: list[float] = []
        powers: list[float] = []
        diagnostics: list[str] = []
        total = 0

        def parse(raw: str | None) -> float:
            if raw is None or raw.strip() == "":
                return math.nan
            return float(raw)

        for line_no, row in enumerate(reader, start=2):
            total += 1
            try:
                speed = parse(row[colmap["wind_speed"]])
                direction = parse(row[colmap["wind_direction"]])
                power = parse(row[colmap["active_power"]])
            except ValueError:
                diagnostics.append(f"line {line_no}: unparseable numeric field")
                continue
            stamps.append(row[colmap["timestamp"]])
            speeds.append(speed)
            directions.append(direction)
            powers.append(power)

    if total == 0:
        raise ValueError(f"{path}: no data rows")
    if len(diagnostics) * 2 > total:
        raise ValueError(
            f"{path}: {len(diagnostics)} of {total} rows invalid; first: {diagnostics[0]}"
        )
    table = ScadaTable(
        timestamp=np.array(stamps, dtype=object),
        wind_speed=np.array(speeds),
        wind_direction=np.array(directions),
        active_power=np.array(powers),
    )
    return table, diagnostics


@dataclass(frozen=True)
class ColumnStats:
    """Per-column min/max recorded by preprocessing, in physical units."""

    minima: dict[str, float]
    maxima: dict[str, float]


def preprocess_power_table(table: ScadaTable) -> tuple[ScadaTable, ColumnStats]:
    """Repair, filter and normalize a raw table.

    In order: negative power readings are replaced by the sample mean of the
    nonnegative power entries; rows with NaN in any numeric column are
    dropped; every numeric column is min-max normalized to [0, 1].  The
    min/max used are recorded so downstream consumers can map back to
    physical units.
    """
    power = table.active_power.copy()
    nonneg = power[power >= 0]
    nonneg = nonneg[np.isfinite(nonneg)]
    negative = np.isfinite(power) & (power < 0)
    if negative.any():
        if nonneg.size == 0:
            raise ValueError("cannot repair negative power: no nonnegative entries")
        power[negative] = nonneg.mean()

    keep = (
        np.isfinite(table.wind_speed)
        & np.isfinite(table.wind_direction)
        & np.isfinite(power)
    )
    if not keep.any():
        raise ValueError("no rows left after dropping missing values")

    columns = {
        "wind_speed": table.wind_speed[keep],
        "wind_direction": table.wind_direction[keep],
        "active_power": power[keep],
    }
    minima: dict[str, float] = {}
    maxima: dict[str, float] = {}
    normalized: dict[str, np.ndarray] = {}
    for name, col in columns.items():
        lo, hi = float(col.min()), float(col.max())
        if hi == lo:
            raise ValueError(f"column {name} is constant; min-max normalization undefined")
        minima[name] = lo
        maxima[name] = hi
        normalized[name] = (col - lo) / (hi - lo)

    clean = ScadaTable(
        timestamp=table.timestamp[keep],
        wind_speed=normalized["wind_speed"],
        wind_direction=normalized["wind_direction"],
        active_power=normalized["active_power"],
    )
    return clean, ColumnStats(minima, maxima)


# ---------------------------------------------------------------------------
# windowing


def _lagged(col: np.ndarray, lags: int) -> np.ndarray:
    # rows t = lags .. n-1; columns are col[t-lags] .. col[t-1]
    return np.lib.stride_tricks.sliding_window_view(col, lags)[:-1]


def window_power_table(
    clean: ScadaTable,
    stats: ColumnStats,
    lags: int = 10,
    split: tuple[float, float, float] = (9 / 11, 1 / 11, 1 / 11),
) -> tuple[RegressionDataset, RegressionDataset, RegressionDataset]:
    """Lagged windows over a normalized table, split chronologically.

    Each row t >= lags becomes one sample: the previous ``lags`` values of
    speed, direction and power, plus the current speed and direction
    (3 * lags + 2 features).  The target is the current power.  The split is
    train/validation/test in time order; train and validation sizes are
    floored, the remainder is the test set.
    """
    n = len(clean)
    if lags < 1:
        raise ValueError(f"lags must be >= 1, got {lags}")
    if n <= lags:
        raise ValueError(f"need more than {lags} rows to build windows, got {n}")
    if not math.isclose(sum(split), 1.0, rel_tol=0, abs_tol=1e-9) or any(
        s < 0 for s in split
    ):
        raise ValueError(f"split fractions must be nonnegative and sum to 1, got {split}")

    speed_lags = _lagged(clean.wind_speed, lags)
    direction_lags = _lagged(clean.wind_direction, lags)
    power_lags = _lagged(clean.active_power, lags)
    current_speed = clean.wind_speed[lags:]
    current_direction = clean.wind_direction[lags:]
    X = np.hstack(
        [speed_lags, direction_lags, power_lags, current_speed[:, None], current_direction[:, None]]
    )
    y = clean.active_power[lags:]

    names = (
        tuple(f"speed_lag{k}" for k in range(lags, 0, -1))
        + tuple(f"direction_lag{k}" for k in range(lags, 0, -1))
        + tuple(f"power_lag{k}" for k in range(lags, 0, -1))
        + ("speed_now", "direction_now")
    )
    per_feature_source = (
        ["wind_speed"] * lags + ["wind_direction"] * lags + ["active_power"] * lags
        + ["wind_speed", "wind_direction"]
    )
    scaling = FeatureScaling(
        feature_min=np.array([stats.minima[c] for c in per_feature_source]),
        feature_max=np.array([stats.maxima[c] for c in per_feature_source]),
        target_min=stats.minima["active_power"],
        target_max=stats.maxima["active_power"],
    )

    n_windows = X.shape[0]
    n_train = int(n_windows * split[0])
    n_val = int(n_windows * split[1])
    bounds = (0, n_train, n_train + n_val, n_windows)
    tags = ("train", "validation", "test")
    out = []
    for tag, lo, hi in zip(tags, bounds[:-1], bounds[1:]):
        out.append(
            RegressionDataset(
                inputs=X[lo:hi],
                targets=y[lo:hi],
                feature_names=names,
                tag=tag,
                provenance=f"windowed power table, lags={lags}",
                scaling=scaling,
            )
        )
    return out[0], out[1], out[2]


def current_speed_column(ds: RegressionDataset) -> np.ndarray:
    """Physical-unit current wind speed for each row of a windowed dataset."""
    if ds.scaling is None:
        raise ValueError("dataset carries no scaling record")
    idx = ds.feature_names.index("speed_now")
    return ds.scaling.denormalize_feature(ds.inputs[:, idx], idx)


def window_univariate_series(
    series: np.ndarray,
    lags: int = 24,
    test_fraction: float = 0.1,
) -> tuple[RegressionDataset, RegressionDataset]:
    """Autoregressive windows over a single series, most recent part as test.

    The series is min-max normalized (NaN entries dropped first); each row
    t >= lags predicts value t from the previous ``lags`` values.  The test
    set is the most recent ceil(test_fraction * n_windows) rows.
    """
    series = np.asarray(series, dtype=np.float64).ravel()
    series = series[np.isfinite(series)]
    n = series.size
    if lags < 1:
        raise ValueError(f"lags must be >= 1, got {lags}")
    if n <= lags:
        raise ValueError(f"need more than {lags} points, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    lo, hi = float(series.min()), float(series.max())
    if hi == lo:
        raise ValueError("constant series; min-max normalization undefined")
    norm = (series - lo) / (hi - lo)

    X = _lagged(norm, lags)
    y = norm[lags:]
    n_windows = X.shape[0]
    n_test = int(math.ceil(test_fraction * n_windows))
    if n_test >= n_windows:
        raise ValueError("test fraction leaves no training rows")
    names = tuple(f"lag{k}" for k in range(lags, 0, -1))
    scaling = FeatureScaling(
        feature_min=np.full(lags, lo),
        feature_max=np.full(lags, hi),
        target_min=lo,
        target_max=hi,
    )

    def cut(a_lo: int, a_hi: int, tag: str) -> RegressionDataset:
        return RegressionDataset(
            inputs=X[a_lo:a_hi],
            targets=y[a_lo:a_hi],
            feature_names=names,
            tag=tag,
            provenance=f"univariate windows, lags={lags}",
            scaling=scaling,
        )

    return cut(0, n_windows - n_test, "train"), cut(n_windows - n_test, n_windows, "test")


def subsample_dataset(ds: RegressionDataset, ratio: float, seed: int) -> RegressionDataset:
    """Uniform subset without replacement, size round(ratio * n).

    Subsets for different ratios are drawn independently (not nested).  Row
    order is preserved.  ratio = 1.0 returns the dataset unchanged.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    n = len(ds)
    size = int(math.floor(ratio * n + 0.5))
    if size < 1:
        raise ValueError(f"ratio {ratio} selects no rows from {n}")
    idx = np.sort(spawn_rng(seed).choice(n, size=size, replace=False))
    return RegressionDataset(
        inputs=ds.inputs[idx],
        targets=ds.targets[idx],
        feature_names=ds.feature_names,
        tag=ds.tag,
        provenance=f"{ds.provenance} | subsampled ratio={ratio}",
        scaling=ds.scaling,
    )


# ---------------------------------------------------------------------------
# bundled surrogate generators


@dataclass(frozen=True)
class PowerCurveSpec:
    """Shape of the synthetic turbine used by the bundled surrogate."""

    cut_in: float = 3.0
    rated_speed: float = 12.0
    rated_power: float = 2000.0
    weibull_shape: float = 2.0
    weibull_scale: float = 8.0
    noise_base: float = 0.01  # noise std as a fraction of rated power, at low speed
    noise_peak: float = 0.06  # added noise fraction approached near rated speed
    outlier_fraction: float = 0.03

    def __post_init__(self) -> None:
        if not 0 < self.cut_in < self.rated_speed:
            raise ValueError("need 0 < cut_in < rated_speed")
        if self.rated_power <= 0 or self.weibull_shape <= 0 or self.weibull_scale <= 0:
            raise ValueError("rated_power and Weibull parameters must be positive")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError(f"outlier_fraction must lie in [0, 1), got {self.outlier_fraction}")


def power_curve(speeds: np.ndarray, spec: PowerCurveSpec = PowerCurveSpec()) -> np.ndarray:
    """Idealized saturating turbine curve: 0 below cut-in, rated above rated."""
    v = np.asarray(speeds, dtype=np.float64)
    u = np.clip((v - spec.cut_in) / (spec.rated_speed - spec.cut_in), 0.0, 1.0)
    ramp = u * u * (3.0 - 2.0 * u)  # smooth monotone ramp
    return spec.rated_power * ramp


def make_power_curve_table(
    seed: int, n: int = 8000, spec: PowerCurveSpec = PowerCurveSpec()
) -> ScadaTable:
    """Surrogate SCADA table: long-tailed speeds, heteroscedastic scatter.

    Speeds follow a Weibull distribution whose density mode sits inside the
    2-11 m/s band; measurement noise grows along the ramp toward rated speed,
    so scatter is widest where the curve saturates.  A configurable fraction
    of rows is pushed below the curve (curtailment-style outliers), and the
    additive noise produces occasional small negative power readings near
    cut-in, exercising the repair rule.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = spawn_rng(seed)
    speeds = spec.weibull_scale * rng.weibull(spec.weibull_shape, size=n)
    speeds = np.clip(speeds, 0.0, 2.5 * spec.rated_speed)
    clean_power = power_curve(speeds, spec)
    ramp = clean_power / spec.rated_power
    noise_std = spec.rated_power * (spec.noise_base + spec.noise_peak * ramp)
    power = clean_power + rng.normal(0.0, 1.0, size=n) * noise_std
    outliers = rng.random(n) < spec.outlier_fraction
    power[outliers] = rng.uniform(0.0, np.maximum(clean_power[outliers], 1e-9))
    directions = rng.uniform(0.0, 360.0, size=n)
    stamps = np.array([f"t{i:07d}" for i in range(n)], dtype=object)
    return ScadaTable(stamps, speeds, directions, power)


def make_hourly_power_series(seed: int, n: int = 4344) -> np.ndarray:
    """Synthetic hourly wind power series for the data-volume experiment.

    A smooth pseudo-wind-speed signal (diurnal + weekly cycles plus AR(1)
    gusts) is pushed through the idealized power curve with mild additive
    noise, giving an autocorrelated, bounded series in physical units.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    rng = spawn_rng(seed)
    t = np.arange(n)
    base = 8.0 + 2.5 * np.sin(2 * np.pi * t / 24.0) + 1.5 * np.sin(2 * np.pi * t / (24.0 * 7))
    gusts = np.empty(n)
    gusts[0] = 0.0
    shocks = rng.normal(0.0, 1.2, size=n)
    for i in range(1, n):
        gusts[i] = 0.85 * gusts[i - 1] + shocks[i]
    speeds = np.maximum(base + gusts, 0.0)
    spec = PowerCurveSpec()
    power = power_curve(speeds, spec) + rng.normal(0.0, 0.015 * spec.rated_power, size=n)
    return power
