import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edmspace.schedules import (DomainError, Schedule, ScheduleParams, fg_from_schedule, iddpm_u, make_plan,
                                nearest_u, schedule_from_fg, steps_edm, steps_iddpm, steps_ve, steps_vp)

VP = Schedule("vp")
VE = Schedule("ve")
EDM = Schedule("edm")


def test_vp_sigma_at_one():
    assert 151 <= VP.sigma(1.0) <= 153
    assert VP.sigma(1.0) == pytest.approx(152.2, abs=0.05)


def test_edm_eval():
    assert EDM.eval(3.0) == (3.0, 1.0, 1.0, 0.0)


def test_ve_eval():
    sig, sig_dot, s, s_dot = VE.eval(4.0)
    assert (sig, sig_dot, s, s_dot) == (2.0, 0.25, 1.0, 0.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        EDM.eval(0.0)
    with pytest.raises(DomainError):
        VP.sigma(-1.0)
    with pytest.raises(DomainError):
        VE.inverse(0.0)


def test_inverses():
    assert EDM.inverse(80.0) == 80.0
    assert VE.inverse(2.0) == 4.0
    assert VP.inverse(VP.sigma(1.0)) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("sched", [VP, VE, EDM], ids=["vp", "ve", "edm"])
def test_derivatives_match_finite_differences(sched):
    rng = np.random.default_rng(1)
    for t in rng.uniform(0.05, 1.0, 100):
        sig, sig_dot, s, s_dot = sched.eval(t)
        h = 1e-6 * t
        fd_sig = (sched.sigma(t + h) - sched.sigma(t - h)) / (2 * h)
        fd_s = (sched.s(t + h) - sched.s(t - h)) / (2 * h)
        assert sig_dot == pytest.approx(fd_sig, rel=1e-6)
        assert s_dot == pytest.approx(fd_s, rel=1e-6, abs=1e-12)


@settings(max_examples=200)
@given(st.floats(1e-3, 5.0))
def test_vp_scaling_identity(t):
    sig = VP.sigma(t)
    assert VP.s(t) == pytest.approx(1 / math.sqrt(sig * sig + 1), rel=1e-12)


@settings(max_examples=200)
@given(st.sampled_from(["vp", "ve", "edm"]), st.floats(1e-4, 1e4))
def test_sigma_of_inverse(kind, sigma):
    sched = Schedule(kind)
    assert sched.sigma(sched.inverse(sigma)) == pytest.approx(sigma, rel=1e-10)


@settings(max_examples=100)
@given(st.sampled_from(["vp", "ve", "edm"]), st.floats(1e-3, 2.0), st.floats(1e-3, 2.0))
def test_sigma_strictly_increasing(kind, a, b):
    if a == b:
        return
    sched = Schedule(kind)
    lo, hi = min(a, b), max(a, b)
    assert sched.sigma(lo) < sched.sigma(hi)
    assert sched.s(lo) > 0


def test_edm_steps_examples():
    plan = steps_edm(10, 0.002, 80, 7)
    assert plan.sigma[0] == 80 and plan.sigma[9] == 0.002 and plan.sigma[10] == 0
    assert plan.sigma[5] == pytest.approx(1.502, abs=5e-4)
    assert steps_edm(3, 0.002, 80, 1).sigma[1] == pytest.approx(40.001, rel=1e-12)


def test_edm_single_step_plan():
    plan = steps_edm(1, 0.002, 80, 7)
    assert plan.N == 1
    assert list(plan.sigma) == [80.0, 0.0]


def test_edm_steps_bad_args():
    for args in [(0, 0.002, 80, 7), (4, 80, 0.002, 7), (4, 0.002, 80, 0.5)]:
        with pytest.raises(ValueError):
            steps_edm(*args)


def test_edm_steps_in_vp_time():
    plan = steps_edm(8, 0.002, 80, 7, schedule=VP)
    assert np.allclose(VP.sigma(plan.t), plan.sigma, rtol=1e-10)


def test_vp_steps():
    assert list(steps_vp(2, 1e-3).t[:2]) == [1.0, 1e-3]
    assert steps_vp(3, 1e-3).t[1] == pytest.approx(0.5005, rel=1e-14)
    t = steps_vp(256, 1e-3).t[:-1]
    gaps = np.diff(t)
    assert np.all(gaps < 0) and np.allclose(gaps, gaps[0], rtol=1e-9)


def test_ve_steps():
    plan = steps_ve(3, 0.02, 80)
    assert plan.sigma[1] == pytest.approx(math.sqrt(80 * 0.02), rel=1e-12)
    assert plan.sigma[0] == 80 and plan.sigma[2] == pytest.approx(0.02, rel=1e-14)
    ratios = plan.sigma[1:-1] / plan.sigma[:-2]
    assert np.allclose(ratios, ratios[0])
    assert np.allclose(plan.t, plan.sigma**2)


def test_iddpm_constants():
    u = iddpm_u(1000, 0.001, 0.008)
    assert u[1000] == 0
    assert u[0] == pytest.approx(20291, rel=0.01)
    assert u[1] == pytest.approx(642, rel=0.01)
    assert np.all(np.diff(u) < 0)


def test_iddpm_steps():
    plan = steps_iddpm(18)
    u = iddpm_u()
    assert plan.t[0] == u[8]
    assert plan.t[-2] == u[999]
    with pytest.raises(ValueError):
        steps_iddpm(993)
    assert steps_iddpm(992).N == 992


def test_nearest_u_ties_go_to_smaller_index():
    u = np.array([4.0, 2.0, 0.0])
    assert nearest_u(3.0, u) == 0
    assert nearest_u(1.0, u) == 1
    assert list(nearest_u(np.array([3.9, 0.2]), u)) == [0, 2]


@pytest.mark.parametrize("framework", ["edm", "vp", "ve", "iddpm"])
@pytest.mark.parametrize("N", [1, 2, 7, 64])
def test_every_plan_is_well_formed(framework, N):
    plan = make_plan(framework, N)
    assert plan.sigma[-1] == 0.0
    assert np.all(np.diff(plan.sigma) < 0)


@pytest.mark.parametrize("N", [8, 18, 32, 64, 256])
def test_edm_step_size_shrinks_toward_sigma_min(N):
    steps = -np.diff(steps_edm(N, 0.002, 80, 7).sigma[:-1])
    assert np.all(np.diff(steps) < 0)


def test_iddpm_step_size_trend():
    # strictly monotone for short plans; longer plans only on average because the
    # floor in the index selection and the growing u gaps near j = M add jitter
    steps = -np.diff(steps_iddpm(8).sigma[:-1])
    assert np.all(np.diff(steps) < 0)
    for N in (32, 64, 256):
        steps = -np.diff(steps_iddpm(N).sigma[:-1])
        quarters = [q.mean() for q in np.array_split(steps, 4)]
        assert np.all(np.diff(quarters) < 0)
    steps = -np.diff(steps_iddpm(32).sigma[:-1])
    assert steps[-1] > steps[-2]


def test_fg_edm_and_ve():
    f, g = fg_from_schedule(EDM, 2.0)
    assert f == 0 and g == pytest.approx(2.0)
    f, g = fg_from_schedule(VE, 4.0)
    assert f == 0 and g == pytest.approx(1.0)


def test_fg_vp_drift():
    p = ScheduleParams()
    f, _ = fg_from_schedule(VP, 0.5)
    assert f == pytest.approx(-0.5 * (p.beta_d * 0.5 + p.beta_min), rel=1e-12)


@pytest.mark.parametrize("sched,t", [(VP, 0.5), (VP, 1.0), (EDM, 3.0), (VE, 2.0)], ids=["vp.5", "vp1", "edm", "ve"])
def test_schedule_from_fg_roundtrip(sched, t):
    def f(tt):
        tt = np.maximum(tt, 1e-300)
        return np.array([fg_from_schedule(sched, v)[0] for v in np.atleast_1d(tt)])

    def g(tt):
        tt = np.maximum(tt, 1e-300)
        return np.array([fg_from_schedule(sched, v)[1] for v in np.atleast_1d(tt)])

    sig, s = schedule_from_fg(f, g, t, n=2000)
    assert sig == pytest.approx(float(sched.sigma(t)), rel=1e-6)
    assert s == pytest.approx(float(sched.s(t)), rel=1e-6)
