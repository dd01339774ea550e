"""Noise schedules sigma(t), scalings s(t), and discrete time-step plans."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

KINDS = ("vp", "ve", "edm")
FRAMEWORKS = ("vp", "ve", "iddpm", "edm")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleParams:
    beta_d: float = 19.9
    beta_min: float = 0.1
    eps_s: float = 1e-3
    eps_t: float = 1e-5
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    rho: float = 7.0
    M: int = 1000
    C1: float = 0.001
    C2: float = 0.008
    j0: int = 8

    def __post_init__(self):
        if not self.sigma_min < self.sigma_max:
            raise ValueError("sigma_min must be < sigma_max")
        if not self.rho >= 1:
            raise ValueError("rho must be >= 1")
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if not 0 < self.C1 < 1:
            raise ValueError("C1 must lie in (0, 1)")


# Named presets.  VE has a wider sigma range for the network than for sampling.
PRESETS = {
    "edm": ScheduleParams(sigma_min=0.002, sigma_max=80.0, rho=7.0),
    "vp": ScheduleParams(beta_d=19.9, beta_min=0.1, eps_s=1e-3, eps_t=1e-5, sigma_min=0.002, sigma_max=80.0),
    "ve": ScheduleParams(sigma_min=0.02, sigma_max=80.0),
    "ve-model": ScheduleParams(sigma_min=0.02, sigma_max=100.0),
    "iddpm": ScheduleParams(M=1000, C1=0.001, C2=0.008, j0=8, sigma_min=0.002, sigma_max=80.0),
}


def preset(name: str, **overrides) -> ScheduleParams:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class Schedule:
    kind: str = "edm"
    params: ScheduleParams = ScheduleParams()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"schedule kind must be one of {KINDS}, got {self.kind!r}")

    def _check(self, t, strict: bool):
        t = np.asarray(t, dtype=np.float64)
        bad = ~np.isfinite(t) | (t <= 0 if strict else t < 0)
        if np.any(bad):
            raise DomainError(f"t={t!r} outside the {self.kind} schedule domain")
        return t

    def _vp_exponent(self, t):
        p = self.params
        return 0.5 * p.beta_d * t * t + p.beta_min * t

    def sigma(self, t):
        """sigma(t); defined for t >= 0 (sigma(0) = 0)."""
        t = self._check(t, strict=False)
        if self.kind == "edm":
            out = t
        elif self.kind == "ve":
            out = np.sqrt(t)
        else:
            out = np.sqrt(np.expm1(self._vp_exponent(t)))
        return out[()] if out.ndim == 0 else out

    def s(self, t):
        t = self._check(t, strict=False)
        out = np.exp(-0.5 * self._vp_exponent(t)) if self.kind == "vp" else np.ones_like(t)
        return out[()] if out.ndim == 0 else out

    def eval(self, t):
        """(sigma, sigma_dot, s, s_dot) at t > 0."""
        t = self._check(t, strict=True)
        if self.kind == "edm":
            out = (t, np.ones_like(t), np.ones_like(t), np.zeros_like(t))
        elif self.kind == "ve":
            sig = np.sqrt(t)
            out = (sig, 0.5 / sig, np.ones_like(t), np.zeros_like(t))
        else:
            p = self.params
            a = self._vp_exponent(t)
            beta = p.beta_d * t + p.beta_min
            sig = np.sqrt(np.expm1(a))
            s = np.exp(-0.5 * a)
            out = (sig, beta * np.exp(a) / (2.0 * sig), s, -0.5 * beta * s)
        if t.ndim == 0:
            return tuple(float(v) for v in out)
        return out

    def inverse(self, sigma):
        """t such that sigma(t) == sigma; sigma must be > 0."""
        sigma = np.asarray(sigma, dtype=np.float64)
        if np.any(~np.isfinite(sigma) | (sigma <= 0)):
            raise DomainError(f"sigma={sigma!r} must be finite and > 0")
        if self.kind == "edm":
            out = sigma
        elif self.kind == "ve":
            out = sigma * sigma
        else:
            p = self.params
            a = np.log1p(sigma * sigma)
            # algebraically (sqrt(b^2 + 2 bd a) - b) / bd, rearranged to avoid cancellation
            out = 2.0 * a / (p.beta_min + np.sqrt(p.beta_min**2 + 2.0 * p.beta_d * a))
        return out[()] if out.ndim == 0 else out


def schedule_eval(sched: Schedule, t):
    return sched.eval(t)


def schedule_invert(sched: Schedule, sigma):
    return sched.inverse(sigma)


def fg_from_schedule(sched: Schedule, t):
    """Drift and diffusion coefficients (f(t), g(t)) of the forward SDE."""
    sig, sig_dot, s, s_dot = sched.eval(t)
    return s_dot / s, s * np.sqrt(2.0 * sig_dot * sig)


def schedule_from_fg(f, g, t: float, n: int = 4096):
    """Recover (sigma(t), s(t)) from callables f, g by quadrature from 0.

    s(t) = exp(int_0^t f) and sigma(t)^2 = int_0^t g^2 / s^2.
    """
    grid = np.linspace(0.0, t, 2 * n + 1)
    h = t / (2 * n)

    def simpson_cumulative(vals):
        # cumulative Simpson on pairs of panels, returned at the even nodes
        pair = h / 3.0 * (vals[0:-2:2] + 4.0 * vals[1:-1:2] + vals[2::2])
        return np.concatenate([[0.0], np.cumsum(pair)])

    fv = np.asarray(f(grid), dtype=np.float64)
    log_s_even = simpson_cumulative(fv)
    # s is needed at odd nodes too: trapezoid over the half panel
    log_s = np.empty_like(grid)
    log_s[0::2] = log_s_even
    log_s[1::2] = log_s_even[:-1] + 0.5 * h * (fv[0:-1:2] + fv[1::2])
    s_grid = np.exp(log_s)
    integrand = np.asarray(g(grid), dtype=np.float64) ** 2 / s_grid**2
    var = simpson_cumulative(integrand)[-1]
    return math.sqrt(var), float(s_grid[-1])


# ------------------------------------------------------------- step plans


@dataclass(frozen=True)
class StepPlan:
    framework: str
    t: np.ndarray  # N+1 entries, t[N] has sigma 0
    sigma: np.ndarray
    schedule: Schedule

    def __post_init__(self):
        for name in ("t", "sigma"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        sig = self.sigma
        if sig.shape != self.t.shape or sig.size < 2:
            raise ValueError("plan needs matching t and sigma of length N+1 >= 2")
        if sig[-1] != 0.0 or np.any(sig[:-1] <= 0) or np.any(np.diff(sig) >= 0):
            raise ValueError("plan sigma must be strictly decreasing and end at exactly 0")

    @property
    def N(self) -> int:
        return self.t.size - 1

    def reversed_positive(self) -> np.ndarray:
        return self.t[:-1][::-1]


def _ramp(N: int) -> np.ndarray:
    # i/(N-1) for i < N, with the N = 1 convention of 0
    return np.arange(N) / (N - 1) if N > 1 else np.zeros(1)


def edm_sigmas(N: int, sigma_min: float, sigma_max: float, rho: float) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    if not rho >= 1:
        raise ValueError("rho must be >= 1")
    hi, lo = sigma_max ** (1.0 / rho), sigma_min ** (1.0 / rho)
    sig = (hi + _ramp(N) * (lo - hi)) ** rho
    sig[0] = sigma_max
    if N > 1:
        sig[-1] = sigma_min
    return np.append(sig, 0.0)


def steps_edm(N: int, sigma_min: float = 0.002, sigma_max: float = 80.0, rho: float = 7.0,
              schedule: Schedule | None = None) -> StepPlan:
    """Power-rho interpolation between sigma_max and sigma_min.

    With a non-identity ``schedule`` the time points are t_i = sigma^-1(sigma_i).
    """
    schedule = schedule or Schedule("edm")
    sig = edm_sigmas(N, sigma_min, sigma_max, rho)
    t = np.append(schedule.inverse(sig[:-1]), 0.0)
    if schedule.kind == "edm":
        t = sig.copy()
    return StepPlan("edm", t, sig, schedule)


def steps_vp(N: int, eps_s: float = 1e-3, params: ScheduleParams | None = None) -> StepPlan:
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < eps_s < 1:
        raise ValueError("eps_s must lie in (0, 1)")
    sched = Schedule("vp", params or PRESETS["vp"])
    t = np.append(1.0 + _ramp(N) * (eps_s - 1.0), 0.0)
    if N > 1:
        t[N - 1] = eps_s
    return StepPlan("vp", t, sched.sigma(t), sched)


def steps_ve(N: int, sigma_min: float = 0.02, sigma_max: float = 80.0) -> StepPlan:
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    sig = sigma_max * (sigma_min / sigma_max) ** _ramp(N)
    sig = np.append(sig, 0.0)
    return StepPlan("ve", sig * sig, sig, Schedule("ve", ScheduleParams(sigma_min=sigma_min, sigma_max=sigma_max)))


@lru_cache(maxsize=16)
def _iddpm_u(M: int, C1: float, C2: float) -> np.ndarray:
    j = np.arange(M + 1, dtype=np.float64)
    alpha_bar = np.sin(0.5 * np.pi * j / (M * (1.0 + C2))) ** 2
    u = np.zeros(M + 1)
    for k in range(M, 0, -1):
        ratio = max(alpha_bar[k - 1] / alpha_bar[k], C1)
        u[k - 1] = math.sqrt((u[k] ** 2 + 1.0) / ratio - 1.0)
    u.setflags(write=False)
    return u


def iddpm_u(M: int = 1000, C1: float = 0.001, C2: float = 0.008) -> np.ndarray:
    """The discrete noise levels u_0 > u_1 > ... > u_M = 0."""
    if M < 2 or not 0 < C1 < 1:
        raise ValueError("need M >= 2 and 0 < C1 < 1")
    return _iddpm_u(int(M), float(C1), float(C2))


def nearest_u(sigma, u: np.ndarray):
    """Index j minimising |u_j - sigma|; ties go to the smaller j."""
    sigma = np.asarray(sigma, dtype=np.float64)
    idx = np.argmin(np.abs(u[None, :] - sigma.reshape(-1, 1)), axis=1)
    return int(idx[0]) if sigma.ndim == 0 else idx


def steps_iddpm(N: int, M: int = 1000, C1: float = 0.001, C2: float = 0.008, j0: int = 8) -> StepPlan:
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > M - j0:
        raise ValueError(f"N={N} exceeds M - j0 = {M - j0}")
    u = iddpm_u(M, C1, C2)
    i = np.arange(N)
    j = np.floor(j0 + (M - 1 - j0) / (N - 1) * i).astype(np.int64) if N > 1 else np.array([j0])
    t = np.append(u[j], 0.0)
    params = ScheduleParams(M=M, C1=C1, C2=C2, j0=j0, sigma_min=float(u[M - 1]), sigma_max=float(u[0]))
    return StepPlan("iddpm", t, t.copy(), Schedule("edm", params))


def make_plan(framework: str, N: int, params: ScheduleParams | None = None) -> StepPlan:
    """Time steps of ``framework`` using ``params`` (defaults to that framework's preset)."""
    p = params or preset(framework)
    if framework == "edm":
        return steps_edm(N, p.sigma_min, p.sigma_max, p.rho)
    if framework == "vp":
        return steps_vp(N, p.eps_s, p)
    if framework == "ve":
        return steps_ve(N, p.sigma_min, p.sigma_max)
    if framework == "iddpm":
        return steps_iddpm(N, p.M, p.C1, p.C2, p.j0)
    raise ValueError(f"unknown framework {framework!r}; choose from {FRAMEWORKS}")
