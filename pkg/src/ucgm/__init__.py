"""Unified continuous generative modeling at desk scale.

One trainer and one sampler cover diffusion, flow matching, and consistency
training as parameterizations of a single interpolation framework, with
closed-form probability-flow oracles for low-dimensional mixtures serving as
ground truth in the test suite.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .transport import (
    Coefficients,
    TransportFamily,
    family_names,
    get_family,
    validate_family,
)
from .prediction import interpolate, predict_x, predict_z, target_field
from .timedist import (
    BetaParams,
    KumaParams,
    beta_cdf,
    build_schedule,
    fit_kuma_to_target,
    kumaraswamy,
    sample_beta,
    timeshift,
)
from .oracle import (
    GaussianMixture,
    Schedule,
    gaussian_optimal_predictor,
    linear_schedule,
    ou_schedule,
    pf_ode_drift,
    quantile_transport,
    rk4_integrate,
    triangular_schedule,
    velocity_drift,
)
from .estimator import MLPParams, forward, init_mlp, load_weights, save_weights
from .trainer import TrainerConfig, default_trainer_config, train
from .sampler import SamplerConfig, SamplingTrace, euler_reference, sample
from .data_metrics import (
    Dataset,
    energy_distance,
    make_dataset,
    wasserstein1_1d,
)

__all__ = [
    "__version__",
    "Coefficients",
    "TransportFamily",
    "family_names",
    "get_family",
    "validate_family",
    "interpolate",
    "predict_x",
    "predict_z",
    "target_field",
    "BetaParams",
    "KumaParams",
    "beta_cdf",
    "build_schedule",
    "fit_kuma_to_target",
    "kumaraswamy",
    "sample_beta",
    "timeshift",
    "GaussianMixture",
    "Schedule",
    "gaussian_optimal_predictor",
    "linear_schedule",
    "ou_schedule",
    "pf_ode_drift",
    "quantile_transport",
    "rk4_integrate",
    "triangular_schedule",
    "velocity_drift",
    "MLPParams",
    "forward",
    "init_mlp",
    "load_weights",
    "save_weights",
    "TrainerConfig",
    "default_trainer_config",
    "train",
    "SamplerConfig",
    "SamplingTrace",
    "euler_reference",
    "sample",
    "Dataset",
    "energy_distance",
    "make_dataset",
    "wasserstein1_1d",
]
