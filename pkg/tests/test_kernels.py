import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edmspace import kernels


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 6), st.integers(1, 4), st.floats(0.01, 100), st.integers(0, 2**31))
def test_mixture_backends_agree(B, Y, d, sigma, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(B, d)) * 3
    data = rng.normal(size=(Y, d))
    a = kernels.mixture_denoise_numba(x, data, sigma)
    b = kernels.mixture_denoise_numpy(x, data, sigma)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.integers(1, 3), st.integers(0, 2**31))
def test_resample_backends_agree(H, W, C, seed):
    rng = np.random.default_rng(seed)
    img = rng.normal(size=(H, W, C))
    A = rng.normal(size=(2, 2))
    c = rng.normal(size=2) * 3
    a = kernels.affine_resample_numba(img, A, c)
    b = kernels.affine_resample_numpy(img, A, c)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_far_points_flush_to_zero(backend):
    # sigma far below the point spacing: naive exponentials would underflow to 0/0
    out = kernels.mixture_denoise(np.array([[0.2]]), np.array([[-1.0], [1.0]]), 1e-3)
    assert out[0, 0] == 1.0


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, EDM_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", "from edmspace import kernels; print(kernels.backend())"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")
def test_default_backend_is_numba():
    env = {k: v for k, v in os.environ.items() if k != "EDM_NUMBA"}
    out = subprocess.run([sys.executable, "-c", "from edmspace import kernels; print(kernels.backend())"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numba"
