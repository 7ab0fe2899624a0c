"""Latent-space realism enhancement for a toy Wasserstein GAN.

Invert a sample to a latent, walk the great circle of the latent sphere
toward a protoimage, then interpolate back by an optimized amount.
"""
from .autodiff import AdamState, Tape, adam_step, check_gradient, value_and_grad
from .config import ConfigError, RunConfig, load_config
from .estimators import GeneratorInverter, LatentEnhancer, WGANSampler
from .gan import (MlpParams, MlpSpec, TrainConfig, criticize, generate, init_mlp, load_checkpoint,
                  sample_dataset, save_checkpoint, train_wgan)
from .inversion import InversionConfig, invert
from .metrics import GaussianSummary, fit_gaussian, frechet_between, frechet_distance
from .pipeline import PipelineConfig, compare_methods, enhance_batch
from .proto import ProtoConfig, find_proto, walk_trace
from .sigma import SigmaConfig, grid_oracle_sigma, optimize_sigma, sigma_objective
from .sphere import naive_walk, project_to_sphere, sample_prior, sphere_interpolate, truncation_resample

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Tape", "adam_step", "check_gradient", "value_and_grad",
    "ConfigError", "RunConfig", "load_config",
    "GeneratorInverter", "LatentEnhancer", "WGANSampler",
    "MlpParams", "MlpSpec", "TrainConfig", "criticize", "generate", "init_mlp", "load_checkpoint",
    "sample_dataset", "save_checkpoint", "train_wgan",
    "InversionConfig", "invert",
    "GaussianSummary", "fit_gaussian", "frechet_between", "frechet_distance",
    "PipelineConfig", "compare_methods", "enhance_batch",
    "ProtoConfig", "find_proto", "walk_trace",
    "SigmaConfig", "grid_oracle_sigma", "optimize_sigma", "sigma_objective",
    "naive_walk", "project_to_sphere", "sample_prior", "sphere_interpolate", "truncation_resample",
]
