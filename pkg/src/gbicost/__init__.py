"""Generalized Bayesian inference with an amortized cost-regression network.

The package trains a network to predict the expected distance between a
simulator's outputs and a target datapoint, then samples generalized
posteriors exp(-beta * cost) * prior with MCMC, alongside exact
ground-truth samplers and a kernel-ABC baseline on four benchmark tasks.
"""

from .distances import (
    DistanceConfig,
    energy_distance,
    median_heuristic_bandwidth,
    mmd2_biased,
    mse_distance,
)
from .metrics import C2stConfig, c2st, cost_accuracy, predictive_distance
from .nets import (
    AdamState,
    FitConfig,
    NetArch,
    NetParams,
    SetEmbedArch,
    adam_step,
    backward,
    fit_regression,
    forward,
    mlp_init,
    regression_arch,
)
from .sampling import (
    GaussianProposal,
    PosteriorSamples,
    Potential,
    PriorProposal,
    SliceConfig,
    abc_kernel_sample,
    gbi_log_potential,
    linear_gaussian_gt,
    rejection_sample_gt,
    slice_sample,
)
from .targets import (
    MisspecConfig,
    NoiseConfig,
    ObservationSet,
    SimDataset,
    TargetSet,
    build_target_set,
    make_misspecified_observations,
    sample_training_pairs,
    simulate_dataset,
    well_specified_observations,
)
from .tasks import PriorBounds, Task, get_task

__version__ = "0.1.0"

__all__ = [
    "DistanceConfig", "mse_distance", "mmd2_biased", "energy_distance",
    "median_heuristic_bandwidth",
    "NetArch", "SetEmbedArch", "NetParams", "AdamState", "FitConfig",
    "regression_arch", "mlp_init", "forward", "backward", "adam_step",
    "fit_regression",
    "Task", "PriorBounds", "get_task",
    "SimDataset", "TargetSet", "NoiseConfig", "MisspecConfig",
    "ObservationSet", "simulate_dataset", "build_target_set",
    "well_specified_observations", "make_misspecified_observations",
    "sample_training_pairs",
    "Potential", "gbi_log_potential", "SliceConfig", "PosteriorSamples",
    "slice_sample", "PriorProposal", "GaussianProposal",
    "rejection_sample_gt", "linear_gaussian_gt", "abc_kernel_sample",
    "predictive_distance", "C2stConfig", "c2st", "cost_accuracy",
    "__version__",
]
