"""Denoisers D(x; sigma): exact analytic oracles and the preconditioned network wrapper.

All denoisers take a batch ``x`` of shape (B, *sample_shape) and a scalar
noise level.  One call counts as one function evaluation (NFE) regardless of
batch size, so NFE per trajectory is the number of calls made by a sampler.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Dataset
from .schedules import PRESETS, DomainError, Schedule, ScheduleParams, iddpm_u, nearest_u


def _check_sigma(sigma) -> float:
    sigma = float(sigma)
    if not (np.isfinite(sigma) and sigma > 0):
        raise DomainError(f"denoiser needs sigma > 0, got {sigma}")
    return sigma


class Denoiser:
    """Base class: subclasses implement ``_denoise(x, sigma)`` on batches."""

    sample_shape: tuple | None = None

    def __init__(self):
        self._lock = threading.Lock()
        self._nfe = 0

    @property
    def nfe(self) -> int:
        return self._nfe

    def reset_nfe(self) -> None:
        with self._lock:
            self._nfe = 0

    def __call__(self, x, sigma, aug_label=None):
        sigma = _check_sigma(sigma)
        x = np.asarray(x, dtype=np.float64)
        with self._lock:
            self._nfe += 1
        return self._denoise(x, sigma, aug_label)

    def _denoise(self, x, sigma, aug_label):
        raise NotImplementedError


class AnalyticDenoiser(Denoiser):
    """Ideal denoiser of a finite dataset: softmax-weighted mean of the points."""

    def __init__(self, dataset: Dataset):
        super().__init__()
        self.dataset = dataset
        self.sample_shape = dataset.sample_shape
        self._flat = np.ascontiguousarray(dataset.flat())

    def _denoise(self, x, sigma, aug_label):
        batch = x.reshape(-1, self._flat.shape[1])
        return kernels.mixture_denoise(batch, self._flat, sigma).reshape(x.shape)

    def log_density(self, x, sigma):
        """log p(x; sigma) of the noised dataset, one value per batch row."""
        sigma = _check_sigma(sigma)
        batch = np.asarray(x, dtype=np.float64).reshape(-1, self._flat.shape[1])
        d = batch.shape[1]
        sq = ((batch[:, None, :] - self._flat[None, :, :]) ** 2).sum(-1)
        logits = -0.5 * sq / sigma**2
        top = logits.max(axis=1, keepdims=True)
        lse = top[:, 0] + np.log(np.exp(logits - top).sum(axis=1))
        return lse - np.log(len(self._flat)) - 0.5 * d * np.log(2 * np.pi * sigma**2)


class GaussianDenoiser(Denoiser):
    """Ideal denoiser when the data are N(0, sigma_data^2 I)."""

    def __init__(self, sigma_data: float = 0.5, sample_shape: tuple = (1,)):
        super().__init__()
        if not sigma_data > 0:
            raise ValueError("sigma_data must be > 0")
        self.sigma_data = float(sigma_data)
        self.sample_shape = tuple(sample_shape)

    def _denoise(self, x, sigma, aug_label):
        sd2 = self.sigma_data**2
        return (sd2 / (sd2 + sigma * sigma)) * x

    def log_density(self, x, sigma):
        sigma = _check_sigma(sigma)
        batch = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
        var = self.sigma_data**2 + sigma**2
        return -0.5 * (batch**2).sum(1) / var - 0.5 * batch.shape[1] * np.log(2 * np.pi * var)


def analytic_denoise(dataset: Dataset, x, sigma):
    """D(x; sigma) for a finite dataset; ``x`` may be one sample or a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == dataset.sample_shape
    out = AnalyticDenoiser(dataset)(x[None] if single else x, sigma)
    return out[0] if single else out


def gaussian_denoise(sigma_data: float, x, sigma):
    return GaussianDenoiser(sigma_data)(np.asarray(x, dtype=np.float64), sigma)


def score(D: Denoiser, x, sigma):
    """grad log p(x; sigma) = (D(x; sigma) - x) / sigma^2."""
    x = np.asarray(x, dtype=np.float64)
    return (D(x, sigma) - x) / (float(sigma) ** 2)


# ------------------------------------------------------------- preconditioning


@dataclass(frozen=True)
class PrecondCoeffs:
    c_skip: float
    c_out: float
    c_in: float
    c_noise: float


def precond_coeffs(framework: str, sigma, sigma_data: float = 0.5, u_table: np.ndarray | None = None,
                   params: ScheduleParams | None = None) -> PrecondCoeffs:
    """Skip/output/input scalings and the noise conditioning for ``framework``.

    ``sigma`` may be a scalar or an array; fields broadcast accordingly.
    """
    sig = np.asarray(sigma, dtype=np.float64)
    if np.any(~np.isfinite(sig) | (sig <= 0)):
        raise DomainError(f"sigma must be > 0, got {sigma!r}")
    one = np.ones_like(sig)
    if framework == "edm":
        sd2 = sigma_data * sigma_data
        root = np.sqrt(sig * sig + sd2)
        out = (sd2 / (sig * sig + sd2), sig * sigma_data / root, 1.0 / root, 0.25 * np.log(sig))
    elif framework == "vp":
        p = params or PRESETS["vp"]
        t = Schedule("vp", p).inverse(sig)
        out = (one, -sig, 1.0 / np.sqrt(sig * sig + 1.0), (p.M - 1) * t)
    elif framework == "ve":
        out = (one, sig, one, np.log(0.5 * sig))
    elif framework == "iddpm":
        if u_table is None:
            raise ValueError("iddpm preconditioning needs the u table")
        out = (one, -sig, 1.0 / np.sqrt(sig * sig + 1.0), np.asarray(nearest_u(sig, u_table), dtype=np.float64))
    else:
        raise ValueError(f"unknown framework {framework!r}")
    if sig.ndim == 0:
        return PrecondCoeffs(*(float(v) for v in out))
    return PrecondCoeffs(*(np.broadcast_to(v, sig.shape).copy() for v in out))


class PreconditionedDenoiser(Denoiser):
    """D(x; sigma) = c_skip x + c_out F(c_in x; c_noise) around a raw network F.

    ``net(x_in, c_noise, aug_label)`` maps a (B, d) batch to (B, d).  Sampling
    passes ``aug_label=None``, which networks treat as the all-zero label.
    """

    def __init__(self, net, framework: str = "edm", sigma_data: float = 0.5,
                 u_table: np.ndarray | None = None, params: ScheduleParams | None = None,
                 sample_shape: tuple | None = None):
        super().__init__()
        self.net = net
        self.framework = framework
        self.sigma_data = float(sigma_data)
        if framework == "iddpm" and u_table is None:
            p = params or PRESETS["iddpm"]
            u_table = iddpm_u(p.M, p.C1, p.C2)
        self.u_table = u_table
        self.params = params
        self.sample_shape = sample_shape

    def coeffs(self, sigma) -> PrecondCoeffs:
        return precond_coeffs(self.framework, sigma, self.sigma_data, self.u_table, self.params)

    def _denoise(self, x, sigma, aug_label):
        c = self.coeffs(sigma)
        flat = x.reshape(len(x), -1)
        F = np.asarray(self.net(c.c_in * flat, c.c_noise, aug_label), dtype=np.float64)
        return (c.c_skip * flat + c.c_out * F).reshape(x.shape)


def precond_denoise(net, framework: str, x, sigma, sigma_data: float = 0.5, **kw):
    return PreconditionedDenoiser(net, framework, sigma_data, **kw)(x, sigma)
