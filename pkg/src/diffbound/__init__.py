"""Tiny denoising diffusion models with certified Wasserstein-distance bounds.

The library trains small noise-prediction networks on 2-D toy distributions,
then evaluates an upper bound on the 1-Wasserstein distance between the data
distribution and the distribution the sampler actually generates.  Everything
is numpy double precision and deterministically seeded.
"""

__version__ = "0.1.0"

from .schedule import NoiseSchedule, linear_schedule, constant_schedule, cosine_schedule
from .forward import sample_forward_marginal, forward_step, posterior_mean, prior_kl
from .denoiser import (
    DenoiserNet,
    DiffusionModel,
    init_model,
    denoise_mean,
    decode,
    backward_step,
    reconstruct,
    generate,
    estimate_lipschitz,
)
from .trainer import TrainConfig, TrainingDiverged, train
from .data import SampleSet, uniform_square, uniform_circle, domain_diameter
from .bound import (
    BoundReport,
    McConfig,
    gaussian_pair_distance,
    lipschitz_factors,
    wasserstein_bound,
    lambda_sweep,
    lambda_star,
    check_contraction,
    check_iterated_contraction,
)
from .transport import W1Estimate, exact_w1, sliced_w1_lower, trivial_coupling_upper
from .checkpoint import save_model, load_model, CheckpointError
from .config import ExperimentConfig, ConfigError, load_config

__all__ = [
    "NoiseSchedule",
    "linear_schedule",
    "constant_schedule",
    "cosine_schedule",
    "sample_forward_marginal",
    "forward_step",
    "posterior_mean",
    "prior_kl",
    "DenoiserNet",
    "DiffusionModel",
    "init_model",
    "denoise_mean",
    "decode",
    "backward_step",
    "reconstruct",
    "generate",
    "estimate_lipschitz",
    "TrainConfig",
    "TrainingDiverged",
    "train",
    "SampleSet",
    "uniform_square",
    "uniform_circle",
    "domain_diameter",
    "BoundReport",
    "McConfig",
    "gaussian_pair_distance",
    "lipschitz_factors",
    "wasserstein_bound",
    "lambda_sweep",
    "lambda_star",
    "check_contraction",
    "check_iterated_contraction",
    "W1Estimate",
    "exact_w1",
    "sliced_w1_lower",
    "trivial_coupling_upper",
    "save_model",
    "load_model",
    "CheckpointError",
    "ExperimentConfig",
    "ConfigError",
    "load_config",
]
