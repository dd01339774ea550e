"""Error measurements for samplers: local truncation error, global convergence
order, encode/decode round trips, and repeated noise add/remove cycles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, RngStream
from .denoiser import AnalyticDenoiser, Denoiser, GaussianDenoiser
from .samplers import CHURN_CLAMP, _rk2_step, encode, ode_derivative, sample_euler, sample_rk2_alpha
from .schedules import Schedule, StepPlan, steps_edm


@dataclass(frozen=True)
class ErrorCurve:
    abscissa: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    metric: str = "RMSE"
    abscissa_name: str = "sigma"

    def rows(self):
        return list(zip(self.abscissa.tolist(), self.mean.tolist(), self.std.tolist()))


def _rms(diff: np.ndarray) -> np.ndarray:
    """Per-row ||v|| / sqrt(dim)."""
    flat = diff.reshape(len(diff), -1)
    return np.sqrt(np.mean(flat * flat, axis=1))


def _draw_clean(D: Denoiser, n: int, rng: RngStream) -> np.ndarray:
    if isinstance(D, AnalyticDenoiser):
        data = D.dataset.samples
        return data[rng.integers(0, len(data), (n,))]
    if isinstance(D, GaussianDenoiser):
        return D.sigma_data * rng.normal((n, *D.sample_shape))
    raise TypeError("ground-truth sampling needs an analytic or Gaussian denoiser")


def _solver_step(kind: str, D, sched, x, t, t_next):
    if kind == "euler":
        return x + (t_next - t) * ode_derivative(D, sched, x, t)
    if kind == "heun":
        return _rk2_step(D, sched, x, t, t_next, 1.0)[0]
    raise ValueError(f"unknown solver {kind!r} (euler, heun)")


def truncation_scan(D: Denoiser, plan: StepPlan, substeps: int = 200, trials: int = 100,
                    rng: RngStream | None = None, solver: str = "euler") -> ErrorCurve:
    """Local error of one solver step at each step of ``plan``.

    For step i, x_{i-1} is a fresh sample of the noisy marginal at t_{i-1};
    the reference is ``substeps`` Euler steps over uniform subintervals of
    [t_{i-1}, t_i].  Abscissa is sigma at the start of each step, ascending.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if not isinstance(D, (AnalyticDenoiser, GaussianDenoiser)):
        raise TypeError("truncation_scan needs an analytic or Gaussian denoiser for ground truth")
    sched = plan.schedule
    means, stds = np.empty(plan.N), np.empty(plan.N)
    for i in range(plan.N):
        t0, t1 = plan.t[i], plan.t[i + 1]
        y = _draw_clean(D, trials, rng)
        x = float(sched.s(t0)) * (y + plan.sigma[i] * rng.normal(y.shape))
        step = _solver_step(solver, D, sched, x, t0, t1)
        fine = x
        grid = np.linspace(t0, t1, substeps + 1)
        grid[0], grid[-1] = t0, t1
        for k in range(substeps):
            fine = fine + (grid[k + 1] - grid[k]) * ode_derivative(D, sched, fine, grid[k])
        err = _rms(step - fine)
        means[i], stds[i] = err.mean(), err.std()
    return ErrorCurve(plan.sigma[:-1][::-1].copy(), means[::-1], stds[::-1])


def convergence_errors(D: Denoiser, N_list, kind: str = "heun", trials: int = 16, rng: RngStream | None = None,
                       alpha: float = 1.0, sigma_min: float = 0.002, sigma_max: float = 80.0, rho: float = 7.0,
                       ref_factor: int = 8, stop_at_sigma_min: bool = False, x0=None) -> ErrorCurve:
    """Endpoint RMSE against a Heun reference run with ``ref_factor`` times the largest N.

    ``stop_at_sigma_min`` drops the final step into sigma = 0, which matters for
    finite datasets whose endpoints all collapse exactly onto data points.
    """
    N_list = sorted(int(n) for n in N_list)
    if x0 is None:
        shape = D.sample_shape or (1,)
        x0 = sigma_max * rng.normal((trials, *shape))

    def endpoint(N, which, a):
        plan = steps_edm(N, sigma_min, sigma_max, rho)
        if stop_at_sigma_min:
            return _run_to_sigma_min(D, plan, x0, which, a)
        sched = plan.schedule
        if which == "euler":
            return sample_euler(D, sched, plan, x0).final
        return sample_rk2_alpha(D, sched, plan, x0, a).final

    ref = endpoint(ref_factor * N_list[-1], "heun", 1.0)
    errs = [_rms(endpoint(n, kind, alpha) - ref) for n in N_list]
    return ErrorCurve(np.array(N_list, float), np.array([e.mean() for e in errs]),
                      np.array([e.std() for e in errs]), "RMSE", "N")


def _run_to_sigma_min(D, plan, x0, kind, alpha):
    sched = plan.schedule
    x = x0
    for i in range(plan.N - 1):
        if kind == "euler":
            x = x + (plan.t[i + 1] - plan.t[i]) * ode_derivative(D, sched, x, plan.t[i])
        else:
            x = _rk2_step(D, sched, x, plan.t[i], plan.t[i + 1], alpha)[0]
    return x


def fit_slope(curve: ErrorCurve) -> float:
    """Least-squares slope of log(error) against log(abscissa)."""
    return float(np.polyfit(np.log(curve.abscissa), np.log(curve.mean), 1)[0])


def convergence_order(D: Denoiser, N_list, kind: str = "heun", trials: int = 16, rng: RngStream | None = None,
                      **kw) -> float:
    return fit_slope(convergence_errors(D, N_list, kind, trials, rng, **kw))


def roundtrip_error(D: Denoiser, N_list, dataset: Dataset, trials: int | None = None,
                    sigma_min: float = 0.002, sigma_max: float = 80.0, rho: float = 7.0,
                    stop_at_sigma_min: bool = False) -> ErrorCurve:
    """Encode dataset samples to the prior and decode them with the same plan.

    Uses the first ``trials`` samples (cycling through the dataset), Heun in
    both directions.  With ``stop_at_sigma_min`` the comparison is between
    the upward and downward states at sigma_min, skipping the final step
    into sigma = 0 that snaps finite-dataset samples onto data points.
    """
    data = dataset.samples
    trials = trials or len(data)
    x = data[np.arange(trials) % len(data)]
    means, stds = [], []
    for N in N_list:
        plan = steps_edm(int(N), sigma_min, sigma_max, rho)
        up = encode(D, plan.schedule, plan, x, retain=stop_at_sigma_min)
        if stop_at_sigma_min:
            err = _rms(_run_to_sigma_min(D, plan, up.final, "heun", 1.0) - up.xs[1])
        else:
            err = _rms(sample_rk2_alpha(D, plan.schedule, plan, up.final, 1.0).final - x)
        means.append(err.mean())
        stds.append(err.std())
    return ErrorCurve(np.array(N_list, float), np.array(means), np.array(stds), "RMSE", "N")


def nearest_point_distance(x: np.ndarray, dataset: Dataset) -> np.ndarray:
    flat = x.reshape(len(x), -1)
    data = dataset.flat()
    d2 = ((flat[:, None, :] - data[None, :, :]) ** 2).sum(-1)
    return np.sqrt(d2.min(axis=1))


def churn_degradation(D: AnalyticDenoiser, sigma: float, iterations: int, S_noise: float = 1.0,
                      trials: int = 100, rng: RngStream | None = None, record=None) -> ErrorCurve:
    """Repeatedly raise the noise level by (1 + gamma) and solve back down.

    gamma is fixed at the clamp value sqrt(2) - 1.  The metric is the
    distance of D(x; sigma) to the nearest dataset point, recorded at the
    iteration counts in ``record`` (default: 0 and a geometric grid up to
    ``iterations``).  ``drift`` is the metric minus its value at iteration 0.
    """
    if not isinstance(D, AnalyticDenoiser):
        raise TypeError("churn_degradation needs an analytic denoiser")
    if record is None:
        record = sorted({0, iterations} | {int(v) for v in np.geomspace(1, max(iterations, 1), 12)}) \
            if iterations > 0 else [0]
    record = sorted(set(int(r) for r in record if 0 <= r <= iterations))
    sched = Schedule("edm")
    y = _draw_clean(D, trials, rng)
    x = y + sigma * rng.normal(y.shape)
    sigma_hat = sigma + CHURN_CLAMP * sigma
    inject = math.sqrt(sigma_hat**2 - sigma**2) * S_noise
    means, stds = [], []
    it = 0
    for target in record:
        while it < target:
            x = x + inject * rng.normal(x.shape)
            x = _rk2_step(D, sched, x, sigma_hat, sigma, 1.0)[0]
            it += 1
        dist = nearest_point_distance(D(x, sigma), D.dataset)
        means.append(dist.mean())
        stds.append(dist.std())
    return ErrorCurve(np.array(record, float), np.array(means), np.array(stds), "nearest-point distance",
                      "iteration")


def drift(curve: ErrorCurve) -> np.ndarray:
    return curve.mean - curve.mean[0]
