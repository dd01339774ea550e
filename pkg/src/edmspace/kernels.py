"""Hot numeric kernels.

Each kernel has a pure-numpy implementation and a numba ``@njit`` loop
implementation.  The numba path is used when numba imports cleanly and the
environment variable ``EDM_NUMBA`` is not set to ``0``; the choice is made once
at import time so a process never mixes backends.
"""

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("EDM_NUMBA", "1").strip() not in ("0", "false", "off")

# exp(-700) relative to the largest weight; anything smaller is flushed to zero
LOG_FLUSH = -700.0


def backend():
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Ideal denoiser for a finite point set (softmax-weighted average of points)
# ---------------------------------------------------------------------------


def mixture_denoise_numpy(x, data, sigma):
    """x: (B, d), data: (Y, d) -> (B, d)."""
    inv_var = 1.0 / (sigma * sigma)
    # ||x||^2 is constant per row, so only x.y - |y|^2/2 enters the softmax
    half_sq = 0.5 * np.einsum("kd,kd->k", data, data)
    logits = (np.einsum("bd,kd->bk", x, data) - half_sq[None, :]) * inv_var
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w[logits < LOG_FLUSH] = 0.0
    num = np.einsum("bk,kd->bd", w, data)
    return num / w.sum(axis=1, keepdims=True)


def _mixture_denoise_loops(x, data, sigma):
    B, d = x.shape
    Y = data.shape[0]
    inv_var = 1.0 / (sigma * sigma)
    half_sq = np.empty(Y)
    for k in range(Y):
        acc = 0.0
        for j in range(d):
            acc += data[k, j] * data[k, j]
        half_sq[k] = 0.5 * acc
    out = np.empty((B, d))
    logits = np.empty(Y)
    for b in range(B):
        top = -np.inf
        for k in range(Y):
            acc = 0.0
            for j in range(d):
                acc += x[b, j] * data[k, j]
            v = (acc - half_sq[k]) * inv_var
            logits[k] = v
            if v > top:
                top = v
        total = 0.0
        for j in range(d):
            out[b, j] = 0.0
        for k in range(Y):
            v = logits[k] - top
            if v < LOG_FLUSH:
                continue
            w = np.exp(v)
            total += w
            for j in range(d):
                out[b, j] += w * data[k, j]
        for j in range(d):
            out[b, j] /= total
    return out


# ---------------------------------------------------------------------------
# Bilinear resampling of an HxWxC image through a pixel-space affine map
# ---------------------------------------------------------------------------


def _pixel_grid(H, W):
    # doubled, centred pixel coordinates: integers of the parity of W (or H)
    u = 2.0 * np.arange(W) + 1.0 - W
    v = 2.0 * np.arange(H) + 1.0 - H
    return u, v


def affine_resample_numpy(image, A, c):
    """Sample ``image`` at source = A @ (u, v) + c for every output pixel.

    ``A``/``c`` act on doubled centred pixel coordinates (u = 2j + 1 - W).
    Reads outside the image clamp to the nearest edge pixel.
    """
    H, W, C = image.shape
    u, v = _pixel_grid(H, W)
    uu, vv = np.meshgrid(u, v)  # (H, W), uu varies along columns
    su = A[0, 0] * uu + A[0, 1] * vv + c[0]
    sv = A[1, 0] * uu + A[1, 1] * vv + c[1]
    # back to (fractional) pixel indices
    fj = np.clip((su + (W - 1)) * 0.5, 0.0, W - 1.0)
    fi = np.clip((sv + (H - 1)) * 0.5, 0.0, H - 1.0)
    j0 = np.floor(fj).astype(np.int64)
    i0 = np.floor(fi).astype(np.int64)
    tj = (fj - j0)[..., None]
    ti = (fi - i0)[..., None]
    j1 = np.minimum(j0 + 1, W - 1)
    i1 = np.minimum(i0 + 1, H - 1)
    top = image[i0, j0] * (1.0 - tj) + image[i0, j1] * tj
    bot = image[i1, j0] * (1.0 - tj) + image[i1, j1] * tj
    return top * (1.0 - ti) + bot * ti


def _affine_resample_loops(image, A, c):
    H, W, C = image.shape
    out = np.empty((H, W, C))
    for i in range(H):
        v = 2.0 * i + 1.0 - H
        for j in range(W):
            u = 2.0 * j + 1.0 - W
            su = A[0, 0] * u + A[0, 1] * v + c[0]
            sv = A[1, 0] * u + A[1, 1] * v + c[1]
            fj = min(max((su + (W - 1)) * 0.5, 0.0), W - 1.0)
            fi = min(max((sv + (H - 1)) * 0.5, 0.0), H - 1.0)
            j0 = int(np.floor(fj))
            i0 = int(np.floor(fi))
            tj = fj - j0
            ti = fi - i0
            j1 = min(j0 + 1, W - 1)
            i1 = min(i0 + 1, H - 1)
            for ch in range(C):
                top = image[i0, j0, ch] * (1.0 - tj) + image[i0, j1, ch] * tj
                bot = image[i1, j0, ch] * (1.0 - tj) + image[i1, j1, ch] * tj
                out[i, j, ch] = top * (1.0 - ti) + bot * ti
    return out


if HAVE_NUMBA:
    mixture_denoise_numba = numba.njit(cache=True, nogil=True)(_mixture_denoise_loops)
    affine_resample_numba = numba.njit(cache=True, nogil=True)(_affine_resample_loops)
else:  # pragma: no cover
    mixture_denoise_numba = _mixture_denoise_loops
    affine_resample_numba = _affine_resample_loops


def mixture_denoise(x, data, sigma):
    x = np.ascontiguousarray(x, dtype=np.float64)
    data = np.ascontiguousarray(data, dtype=np.float64)
    if USE_NUMBA:
        return mixture_denoise_numba(x, data, float(sigma))
    return mixture_denoise_numpy(x, data, float(sigma))


def affine_resample(image, A, c):
    image = np.ascontiguousarray(image, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    if USE_NUMBA:
        return affine_resample_numba(image, A, c)
    return affine_resample_numpy(image, A, c)
