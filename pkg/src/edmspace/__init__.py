"""Diffusion-model sampling design space: schedules, preconditioned denoisers,
ODE/SDE samplers, toy training and error analysis, checked against analytic
denoisers."""

__version__ = "0.1.0"

from .core import Dataset, RngStream, as_tensor, dataset_load, dataset_save, gaussian, rng_stream
from .denoiser import (AnalyticDenoiser, Denoiser, GaussianDenoiser, PreconditionedDenoiser, analytic_denoise,
                       gaussian_denoise, precond_coeffs, score)
from .samplers import (StochasticParams, Trajectory, encode, ode_derivative, sample_euler,
                       sample_euler_maruyama, sample_heun, sample_rk2_alpha, sample_stochastic)
from .schedules import Schedule, ScheduleParams, StepPlan, steps_edm, steps_iddpm, steps_ve, steps_vp

__all__ = [
    "Dataset", "RngStream", "as_tensor", "dataset_load", "dataset_save", "gaussian", "rng_stream",
    "AnalyticDenoiser", "Denoiser", "GaussianDenoiser", "PreconditionedDenoiser", "analytic_denoise",
    "gaussian_denoise", "precond_coeffs", "score",
    "StochasticParams", "Trajectory", "encode", "ode_derivative", "sample_euler", "sample_euler_maruyama",
    "sample_heun", "sample_rk2_alpha", "sample_stochastic",
    "Schedule", "ScheduleParams", "StepPlan", "steps_edm", "steps_iddpm", "steps_ve", "steps_vp",
]
