"""winduq: variance-based uncertainty decomposition for wind power regression.

Train a two-head Gaussian network under a variance-weighted NLL, approximate
the posterior over its weights (deep ensembles, Monte Carlo DropConnect, or
Bayes by backprop), and split the predictive variance of the resulting
Gaussian mixture into aleatoric and epistemic parts via the law of total
variance.
"""

from .data import (
    ColumnStats,
    FeatureScaling,
    PowerCurveSpec,
    RegressionDataset,
    ScadaTable,
    load_scada_csv,
    make_hourly_power_series,
    make_power_curve_table,
    make_sine_dataset,
    power_curve,
    preprocess_power_table,
    sine_conditional_variance,
    subsample_dataset,
    window_power_table,
    window_univariate_series,
)
from .losses import (
    TrainingConfig,
    TrainingDivergedError,
    TrainingTrace,
    beta_nll_loss,
    beta_nll_output_grads,
    learning_rate_at,
    nll_loss,
    train,
)
from .metrics import joint_density_ranks, mse, spearman
from .network import (
    ArchitectureSpec,
    GaussianPrediction,
    TwoHeadNetwork,
    backward,
    forward,
    forward_batch,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
)
from .posterior import (
    SAMPLER_KINDS,
    DropConnectPosterior,
    EnsemblePosterior,
    PosteriorSampler,
    VariationalPosterior,
    draw_predictions,
    fit,
    kl_to_unit_gaussian,
    load_posterior,
    save_posterior,
)
from .uncertainty import (
    BatchDecomposition,
    UncertaintyEstimate,
    decompose,
    decompose_batch,
)

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec",
    "BatchDecomposition",
    "ColumnStats",
    "DropConnectPosterior",
    "EnsemblePosterior",
    "FeatureScaling",
    "GaussianPrediction",
    "PosteriorSampler",
    "PowerCurveSpec",
    "RegressionDataset",
    "SAMPLER_KINDS",
    "ScadaTable",
    "TrainingConfig",
    "TrainingDivergedError",
    "TrainingTrace",
    "TwoHeadNetwork",
    "UncertaintyEstimate",
    "VariationalPosterior",
    "backward",
    "beta_nll_loss",
    "beta_nll_output_grads",
    "decompose",
    "decompose_batch",
    "draw_predictions",
    "fit",
    "forward",
    "forward_batch",
    "init_parameters",
    "joint_density_ranks",
    "kl_to_unit_gaussian",
    "learning_rate_at",
    "load_checkpoint",
    "load_posterior",
    "load_scada_csv",
    "make_hourly_power_series",
    "make_power_curve_table",
    "make_sine_dataset",
    "mse",
    "nll_loss",
    "power_curve",
    "preprocess_power_table",
    "save_checkpoint",
    "save_posterior",
    "sine_conditional_variance",
    "spearman",
    "subsample_dataset",
    "train",
    "window_power_table",
    "window_univariate_series",
]
