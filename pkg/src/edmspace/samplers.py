"""Probability-flow ODE and SDE integrators.

Every sampler works on a batch ``x0`` of shape (B, *sample_shape) and walks a
``StepPlan`` from t_0 down to t_N (where sigma = 0).  ``nfe`` on the returned
trajectory counts denoiser calls per trajectory.

Random draws: a trajectory's latent is drawn first by the caller, then the
samplers draw one noise tensor per step in step order.  ``rng`` is either a
single ``RngStream`` shared by the whole batch, or a sequence holding one
stream per batch row.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream, rng_stream
from .denoiser import Denoiser
from .schedules import Schedule, StepPlan

CHURN_CLAMP = math.sqrt(2.0) - 1.0
SAMPLERS = ("euler", "heun", "rk2", "stochastic", "em")


class UnsupportedConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class StochasticParams:
    S_churn: float = 0.0
    S_tmin: float = 0.0
    S_tmax: float = math.inf
    S_noise: float = 1.0

    def __post_init__(self):
        if self.S_churn < 0 or self.S_tmin < 0 or self.S_tmax < self.S_tmin or not self.S_noise > 0:
            raise ValueError(f"invalid stochastic parameters {self}")

    def gamma(self, t: float, N: int) -> float:
        if self.S_tmin <= t <= self.S_tmax:
            return min(self.S_churn / N, CHURN_CLAMP)
        return 0.0


# Grid-search results for the stochastic sampler (churn, tmin, tmax, noise).
STOCHASTIC_PRESETS = {
    "cifar-vp": StochasticParams(30.0, 0.01, 1.0, 1.007),
    "cifar-ve": StochasticParams(80.0, 0.05, 1.0, 1.007),
    "imagenet-pretrained": StochasticParams(80.0, 0.05, 50.0, 1.003),
    "imagenet-ours": StochasticParams(40.0, 0.05, 50.0, 1.003),
}


@dataclass
class Trajectory:
    final: np.ndarray
    nfe: int
    ts: np.ndarray
    xs: list | None = None
    diagnostics: dict = field(default_factory=dict)


# ------------------------------------------------------------------ helpers


def _draw(rng, like: np.ndarray) -> np.ndarray:
    if isinstance(rng, RngStream):
        return rng.normal(like.shape)
    if len(rng) != len(like):
        raise ValueError(f"need one stream per batch row ({len(like)}), got {len(rng)}")
    return np.stack([r.normal(like.shape[1:]) for r in rng])


def draw_latents(rng, count_or_batch, sample_shape, plan: StepPlan) -> np.ndarray:
    """x0 ~ N(0, (sigma_0 s(t_0))^2 I) for each trajectory."""
    scale = plan.sigma[0] * float(plan.schedule.s(plan.t[0]))
    if isinstance(rng, RngStream):
        return scale * rng.normal((int(count_or_batch), *sample_shape))
    return scale * np.stack([r.normal(tuple(sample_shape)) for r in rng])


def ode_derivative(D: Denoiser, sched: Schedule, x: np.ndarray, t: float) -> np.ndarray:
    """dx/dt of the probability-flow ODE at (x, t); needs sigma(t) > 0."""
    sig, sig_dot, s, s_dot = sched.eval(t)
    return (sig_dot / sig + s_dot / s) * x - (sig_dot * s / sig) * D(x / s, sig)


class _Recorder:
    def __init__(self, x0, retain):
        self.xs = [x0] if retain else None

    def push(self, x):
        if self.xs is not None:
            self.xs.append(x)


def _rk2_step(D, sched, x, t, t_next, alpha, d=None):
    """One general second-order Runge-Kutta step; returns (x_next, calls)."""
    h = t_next - t
    if d is None:
        d = ode_derivative(D, sched, x, t)
    calls = 1
    # exact landing point for alpha == 1 keeps this identical to Heun
    t_mid = t_next if alpha == 1.0 else t + alpha * h
    if t_mid > 0:
        x_mid = x + alpha * h * d
        d_mid = ode_derivative(D, sched, x_mid, t_mid)
        calls += 1
        w = 1.0 / (2.0 * alpha)
        return x + h * ((1.0 - w) * d + w * d_mid), calls
    return x + h * d, calls


# ----------------------------------------------------------------- samplers


def sample_euler(D: Denoiser, sched: Schedule, plan: StepPlan, x0, retain: bool = False) -> Trajectory:
    x = np.asarray(x0, dtype=np.float64)
    rec = _Recorder(x, retain)
    for i in range(plan.N):
        t, t_next = plan.t[i], plan.t[i + 1]
        x = x + (t_next - t) * ode_derivative(D, sched, x, t)
        rec.push(x)
    return Trajectory(x, plan.N, plan.t, rec.xs)


def sample_rk2_alpha(D: Denoiser, sched: Schedule, plan: StepPlan, x0, alpha: float = 1.0,
                     retain: bool = False) -> Trajectory:
    """Second-order RK family; alpha = 1 is Heun, 0.5 midpoint, 2/3 Ralston."""
    if not 0 < alpha <= 1.2:
        raise ValueError(f"alpha must lie in (0, 1.2], got {alpha}")
    x = np.asarray(x0, dtype=np.float64)
    rec = _Recorder(x, retain)
    nfe = 0
    for i in range(plan.N):
        x, calls = _rk2_step(D, sched, x, plan.t[i], plan.t[i + 1], alpha)
        nfe += calls
        rec.push(x)
    return Trajectory(x, nfe, plan.t, rec.xs)


def sample_heun(D: Denoiser, sched: Schedule, plan: StepPlan, x0, retain: bool = False) -> Trajectory:
    return sample_rk2_alpha(D, sched, plan, x0, 1.0, retain)


def sample_stochastic(D: Denoiser, sched: Schedule, plan: StepPlan, x0, sp: StochasticParams, rng,
                      u_table: np.ndarray | None = None, retain: bool = False) -> Trajectory:
    """Heun sampling with per-step noise injection ("churn").

    Each step raises the noise level from t_i to (1 + gamma_i) t_i by adding
    fresh noise, then takes a Heun step back down to t_{i+1}.  With
    ``u_table`` the raised level snaps to the nearest entry so a denoiser
    trained on discrete levels is only queried on those.
    """
    if sched.kind != "edm":
        raise UnsupportedConfiguration("the stochastic sampler requires sigma(t) = t and s(t) = 1")
    x = np.asarray(x0, dtype=np.float64)
    rec = _Recorder(x, retain)
    gammas = np.zeros(plan.N)
    nfe = 0
    for i in range(plan.N):
        t, t_next = plan.t[i], plan.t[i + 1]
        eps = _draw(rng, x)
        gamma = sp.gamma(t, plan.N)
        t_hat = t
        if gamma > 0:
            t_hat = t + gamma * t
            if u_table is not None:
                t_hat = float(u_table[np.argmin(np.abs(u_table - t_hat))])
            x = x + math.sqrt(max(t_hat * t_hat - t * t, 0.0)) * sp.S_noise * eps
        gammas[i] = gamma
        x, calls = _rk2_step(D, sched, x, t_hat, t_next, 1.0)
        nfe += calls
        rec.push(x)
    return Trajectory(x, nfe, plan.t, rec.xs, {"gamma": gammas})


def sample_euler_maruyama(D: Denoiser, sched: Schedule, plan: StepPlan, x0, rng, beta_fn=None,
                          retain: bool = False) -> Trajectory:
    """Reverse-time Langevin SDE, Euler-Maruyama with drift/diffusion at the step start.

    ``beta_fn(t)`` sets the Langevin strength; the default sigma_dot/sigma
    matches the usual reverse SDE.  The step into sigma = 0 is a plain Euler
    step since the Langevin term is not defined there.
    """
    if beta_fn is None:
        def beta_fn(t):
            sig, sig_dot, _, _ = sched.eval(t)
            return sig_dot / sig
    x = np.asarray(x0, dtype=np.float64)
    rec = _Recorder(x, retain)
    for i in range(plan.N):
        t, t_next = plan.t[i], plan.t[i + 1]
        h = t_next - t
        z = _draw(rng, x)
        sig, sig_dot, s, s_dot = sched.eval(t)
        den = D(x / s, sig)
        d = (sig_dot / sig + s_dot / s) * x - (sig_dot * s / sig) * den
        beta = float(beta_fn(t))
        x_new = x + h * d
        if beta > 0 and plan.sigma[i + 1] > 0:
            score = (den - x / s) / (sig * sig)
            x_new = x_new - h * beta * sig * sig * s * score + s * math.sqrt(2.0 * beta * abs(h)) * sig * z
        x = x_new
        rec.push(x)
    return Trajectory(x, plan.N, plan.t, rec.xs)


def encode(D: Denoiser, sched: Schedule, plan: StepPlan, x_data, retain: bool = False) -> Trajectory:
    """Run the ODE upward from data to the plan's largest noise level.

    The first leg starts at sigma = 0, where no derivative exists, so it is an
    Euler step using the derivative of the data at the first positive level.
    """
    x = np.asarray(x_data, dtype=np.float64)
    rec = _Recorder(x, retain)
    up = plan.reversed_positive()
    x = x + up[0] * ode_derivative(D, sched, x, up[0])
    rec.push(x)
    nfe = 1
    for k in range(len(up) - 1):
        x, calls = _rk2_step(D, sched, x, up[k], up[k + 1], 1.0)
        nfe += calls
        rec.push(x)
    return Trajectory(x, nfe, np.append(0.0, up), rec.xs)


# ------------------------------------------------------------ batch driver


def run_sampler(kind: str, D: Denoiser, plan: StepPlan, count: int, seed: int, sample_shape: tuple,
                sp: StochasticParams | None = None, alpha: float = 1.0, u_table=None,
                block: int = 64, threads: int = 1) -> tuple[np.ndarray, int]:
    """Sample ``count`` trajectories; trajectory k uses stream (seed, k).

    Work is split into fixed-size blocks so the result does not depend on
    ``threads``.  Returns (endpoints, NFE per trajectory).
    """
    if kind not in SAMPLERS:
        raise ValueError(f"unknown sampler {kind!r}; choose from {SAMPLERS}")
    if kind == "stochastic" and plan.schedule.kind != "edm":
        raise UnsupportedConfiguration("the stochastic sampler requires the edm schedule (sigma(t) = t)")
    sched = plan.schedule

    def run_block(start):
        streams = [rng_stream(seed, k) for k in range(start, min(start + block, count))]
        x0 = draw_latents(streams, len(streams), sample_shape, plan)
        if kind == "euler":
            tr = sample_euler(D, sched, plan, x0)
        elif kind == "heun":
            tr = sample_heun(D, sched, plan, x0)
        elif kind == "rk2":
            tr = sample_rk2_alpha(D, sched, plan, x0, alpha)
        elif kind == "stochastic":
            tr = sample_stochastic(D, sched, plan, x0, sp or StochasticParams(), streams, u_table)
        else:
            tr = sample_euler_maruyama(D, sched, plan, x0, streams)
        return tr.final, tr.nfe

    starts = list(range(0, count, block))
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_block, starts))
    else:
        parts = [run_block(s) for s in starts]
    return np.concatenate([p[0] for p in parts]), (parts[0][1] if parts else 0)
