import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edmspace.core import Dataset, grid2d, rng_stream, two_point
from edmspace.denoiser import (AnalyticDenoiser, GaussianDenoiser, PreconditionedDenoiser, analytic_denoise,
                               gaussian_denoise, precond_coeffs, precond_denoise, score)
from edmspace.schedules import DomainError, iddpm_u
from edmspace.training import loss_weight

TP = two_point()


def test_single_point_dataset(backend):
    ds = Dataset(np.array([[0.3, -2.0]]))
    x = rng_stream(0, 0).normal((5, 2)) * 10
    assert np.array_equal(analytic_denoise(ds, x, 0.7), np.broadcast_to([0.3, -2.0], (5, 2)))


def test_two_point_symmetry(backend):
    for sigma in (0.01, 1.0, 100.0):
        assert analytic_denoise(TP, np.array([0.0]), sigma)[0] == 0.0


def test_two_point_tanh_example(backend):
    assert analytic_denoise(TP, np.array([0.5]), 1.0)[0] == pytest.approx(math.tanh(0.5), abs=1e-15)
    assert math.tanh(0.5) == pytest.approx(0.46212, abs=1e-5)


def test_tanh_matches_direct_weight_sum():
    # the oracle itself, checked against brute-force Gaussian weights
    x, sigma = 0.37, 0.8
    w = np.exp(-((x - np.array([-1.0, 1.0])) ** 2) / (2 * sigma**2))
    assert (w @ [-1.0, 1.0]) / w.sum() == pytest.approx(math.tanh(x / sigma**2), rel=1e-14)


def test_sigma_must_be_positive():
    with pytest.raises(DomainError):
        analytic_denoise(TP, np.array([0.1]), 0.0)
    with pytest.raises(DomainError):
        precond_coeffs("edm", -1.0)


def test_gaussian_denoiser_examples():
    assert gaussian_denoise(0.5, np.array([[1.0]]), 0.5)[0, 0] == 0.5
    assert gaussian_denoise(0.5, np.array([[1.0]]), 1e-9)[0, 0] == pytest.approx(1.0)
    out = gaussian_denoise(0.5, np.array([[80.0]]), 80.0)[0, 0]
    assert out / 80 == pytest.approx(0.0000390601, rel=1e-4) or out == pytest.approx(0.00312, abs=1e-5)


def test_gaussian_denoiser_far_field():
    # sigma_data^2/(sigma_data^2 + sigma^2) at sigma = 80 is 3.906e-5, so D(80) = 0.003125
    out = gaussian_denoise(0.5, np.array([[80.0]]), 80.0)[0, 0]
    assert out == pytest.approx(80 * 0.25 / (0.25 + 6400), rel=1e-14)


def test_score_examples():
    D = AnalyticDenoiser(TP)
    assert score(D, np.array([[0.5]]), 1.0)[0, 0] == pytest.approx(math.tanh(0.5) - 0.5, abs=1e-15)
    G = GaussianDenoiser(0.5)
    x = np.array([[1.3]])
    assert score(G, x, 2.0)[0, 0] == pytest.approx(-1.3 / (0.25 + 4.0), rel=1e-14)
    single = AnalyticDenoiser(Dataset(np.array([[0.25]])))
    assert score(single, np.array([[0.25]]), 3.0)[0, 0] == 0.0


def _fd_grad(logp, x, h):
    g = np.zeros_like(x)
    for j in range(x.shape[1]):
        e = np.zeros_like(x)
        e[:, j] = h
        g[:, j] = (logp(x + e) - logp(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("D", [AnalyticDenoiser(TP), AnalyticDenoiser(grid2d()), GaussianDenoiser(0.5)],
                         ids=["two-point", "grid2d", "gaussian"])
def test_score_is_gradient_of_log_density(D):
    rng = np.random.default_rng(3)
    d = 1 if isinstance(D, GaussianDenoiser) else D.dataset.dim
    for _ in range(50):
        sigma = float(np.exp(rng.uniform(np.log(0.2), np.log(20))))
        x = rng.normal(size=(1, d)) * (1 + sigma)
        fd = _fd_grad(lambda z: D.log_density(z, sigma), x, 1e-5 * sigma)
        assert np.allclose(score(D, x, sigma), fd, rtol=1e-6, atol=1e-9 / sigma)


def test_large_sigma_gives_mean(backend):
    ds = Dataset(np.array([[0.0, 1.0], [2.0, 5.0], [4.0, 0.0]]))
    out = analytic_denoise(ds, np.array([3.0, -1.0]), 1e6)
    assert np.allclose(out, ds.samples.mean(0), atol=1e-6)


def test_small_sigma_gives_nearest_point(backend):
    ds = grid2d()
    x = np.array([0.9, -1.2])
    assert np.array_equal(analytic_denoise(ds, x, 1e-3), [1.0, -1.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100))
def test_output_in_convex_hull(seed, sigma):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.normal(size=(5, 3)))
    x = rng.normal(size=(4, 3)) * 5
    out = analytic_denoise(ds, x, sigma)
    lo, hi = ds.samples.min(0), ds.samples.max(0)
    assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


def test_nfe_counts_calls():
    D = AnalyticDenoiser(TP)
    for _ in range(3):
        D(np.zeros((10, 1)), 1.0)
    assert D.nfe == 3
    D.reset_nfe()
    assert D.nfe == 0


def test_edm_coefficients_example():
    c = precond_coeffs("edm", 0.5, 0.5)
    assert c.c_skip == pytest.approx(0.5, rel=1e-15)
    assert c.c_out == pytest.approx(math.sqrt(0.125), rel=1e-15)
    assert c.c_in == pytest.approx(math.sqrt(2), rel=1e-15)
    assert c.c_noise == pytest.approx(0.25 * math.log(0.5), rel=1e-15)


def test_edm_coefficients_small_sigma():
    c = precond_coeffs("edm", 1e-9, 0.5)
    assert c.c_skip == pytest.approx(1.0) and c.c_out == pytest.approx(0.0, abs=1e-8)


def test_other_frameworks():
    assert precond_coeffs("ve", 2.0) == precond_coeffs("ve", 2.0)
    c = precond_coeffs("ve", 2.0)
    assert (c.c_skip, c.c_out, c.c_in, c.c_noise) == (1.0, 2.0, 1.0, 0.0)
    c = precond_coeffs("vp", 3.0)
    assert (c.c_skip, c.c_out) == (1.0, -3.0)
    assert c.c_in == pytest.approx(1 / math.sqrt(10))
    assert 0 < c.c_noise < 999
    u = iddpm_u()
    c = precond_coeffs("iddpm", float(u[500]), u_table=u)
    assert c.c_noise == 500
    with pytest.raises(ValueError):
        precond_coeffs("iddpm", 1.0)


@settings(max_examples=200)
@given(st.floats(1e-4, 1e4), st.floats(0.05, 5))
def test_edm_coefficient_identities(sigma, sd):
    c = precond_coeffs("edm", sigma, sd)
    assert c.c_in**2 * (sigma**2 + sd**2) == pytest.approx(1, abs=1e-12)
    assert c.c_out**2 == pytest.approx(sigma**2 * sd**2 / (sigma**2 + sd**2), rel=1e-12)
    assert loss_weight(sigma, sd) * c.c_out**2 == pytest.approx(1, abs=1e-12)


def _zero_net(x, c_noise, label):
    return np.zeros_like(x)


def test_zero_network():
    x = np.array([[0.7], [-2.0]])
    c = precond_coeffs("edm", 1.5, 0.5)
    assert np.array_equal(precond_denoise(_zero_net, "edm", x, 1.5), c.c_skip * x)
    for fw in ("vp", "ve", "iddpm"):
        assert np.array_equal(precond_denoise(_zero_net, fw, x, 1.5), x)


@pytest.mark.parametrize("fw", ["edm", "vp", "ve", "iddpm"])
def test_backsolved_network_reproduces_target(fw):
    target = AnalyticDenoiser(TP)
    sigma = 0.8
    D = PreconditionedDenoiser(None, fw, 0.5)
    c = D.coeffs(sigma)

    def ideal(x_in, c_noise, label):
        x = x_in / c.c_in
        return (target(x, sigma) - c.c_skip * x) / c.c_out

    D.net = ideal
    x = rng_stream(2, 0).normal((20, 1)) * 2
    assert np.allclose(D(x, sigma), target(x, sigma), rtol=1e-12, atol=1e-12)


def test_precond_counts_nfe():
    D = PreconditionedDenoiser(_zero_net, "edm")
    D(np.zeros((3, 1)), 1.0)
    D(np.zeros((3, 1)), 2.0)
    assert D.nfe == 2
