"""Geometric augmentation with a conditioning label.

Transforms act on normalized image coordinates in [-1, 1]^2 centred on the
image; an output pixel at q reads the input at M^-1 q (bilinear, edge clamp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import RngStream

AUGMENTATIONS = ("xflip", "yflip", "scale", "rotate", "aniso", "translate")
LABEL_DIM = 9


@dataclass(frozen=True)
class AugmentConstants:
    A_prob: float = 0.12
    A_scale: float = 2.0**0.2
    A_aniso: float = 2.0**0.2
    A_trans: float = 1.0 / 8.0
    active: tuple = AUGMENTATIONS

    def __post_init__(self):
        if not 0 <= self.A_prob <= 1:
            raise ValueError("A_prob must lie in [0, 1]")
        unknown = set(self.active) - set(AUGMENTATIONS)
        if unknown:
            raise ValueError(f"unknown augmentations {sorted(unknown)}")

    def probabilities(self) -> np.ndarray:
        p = np.array([1.0] + [self.A_prob] * 5)
        return p * np.array([name in self.active for name in AUGMENTATIONS])


@dataclass(frozen=True)
class AugmentParams:
    """a0..a7 plus which of the six augmentations fired; fired-off entries are 0."""

    a: np.ndarray
    enabled: np.ndarray
    constants: AugmentConstants = AugmentConstants()

    @classmethod
    def zeros(cls, constants: AugmentConstants = AugmentConstants()) -> "AugmentParams":
        return cls(np.zeros(8), np.zeros(6, dtype=bool), constants)

    @classmethod
    def of(cls, constants: AugmentConstants = AugmentConstants(), **values) -> "AugmentParams":
        """Build from keyword values a0=..., a7=...; flags follow non-zero entries."""
        a = np.zeros(8)
        for k, v in values.items():
            a[int(k[1:])] = v
        groups = [(0,), (1,), (2,), (3,), (4, 5), (6, 7)]
        enabled = np.array([any(a[i] != 0 for i in g) for g in groups])
        return cls(a, enabled, constants)


# parameter slots owned by each augmentation
_SLOTS = ((0,), (1,), (2,), (3,), (4, 5), (6, 7))


def draw_augment_batch(rng: RngStream, constants: AugmentConstants, n: int):
    """Vectorised draws; returns (a (n, 8), enabled (n, 6)).

    The stream is consumed in a fixed pattern regardless of the constants.
    """
    coins = rng.uniform(0.0, 1.0, (n, 6))
    bits = rng.integers(0, 2, (n, 2)).astype(np.float64)
    normals = rng.normal((n, 4))
    angles = rng.uniform(-math.pi, math.pi, (n, 2))
    enabled = coins < constants.probabilities()[None, :]
    a = np.column_stack([bits[:, 0], bits[:, 1], normals[:, 0], angles[:, 0],
                         angles[:, 1], normals[:, 1], normals[:, 2], normals[:, 3]])
    for k, slots in enumerate(_SLOTS):
        a[np.ix_(~enabled[:, k], slots)] = 0.0
    return a, enabled


def draw_augment(rng: RngStream, constants: AugmentConstants = AugmentConstants()) -> AugmentParams:
    a, enabled = draw_augment_batch(rng, constants, 1)
    return AugmentParams(a[0], enabled[0], constants)


# ---------------------------------------------------------------- matrices


def scale2d(sx: float, sy: float) -> np.ndarray:
    return np.array([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])


def rotate2d(theta: float) -> np.ndarray:
    c, s = _cos_sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def translate2d(tx: float, ty: float) -> np.ndarray:
    return np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])


def _cos_sin(theta: float):
    # exact values at quarter turns so axis-aligned rotations stay integer-exact
    q = theta / (0.5 * math.pi)
    k = round(q)
    if abs(q - k) < 1e-12:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[k % 4]
    return math.cos(theta), math.sin(theta)


def augment_matrix(p: AugmentParams) -> np.ndarray:
    """Compose flip, flip, scale, rotate, anisotropy, translate (left to right)."""
    a = p.a
    c = p.constants
    s = c.A_scale ** a[2]
    an = c.A_aniso ** a[5]
    factors = [
        scale2d(1.0 - 2.0 * a[0], 1.0),
        scale2d(1.0, 1.0 - 2.0 * a[1]),
        scale2d(s, s),
        rotate2d(-a[3]),
        rotate2d(a[4]),
        scale2d(an, 1.0 / an),
        rotate2d(-a[4]),
        translate2d(c.A_trans * a[6], c.A_trans * a[7]),
    ]
    m = np.eye(3)
    for f in factors:
        m = m @ f
    return m


def augment_label(p: AugmentParams) -> np.ndarray:
    a = p.a
    c3, s3 = _cos_sin(a[3])
    c4, s4 = _cos_sin(a[4])
    return np.array([a[0], a[1], a[2], c3 - 1.0, s3, a[5] * c4, a[5] * s4, a[6], a[7]])


def invert_affine(m: np.ndarray) -> np.ndarray:
    """Inverse of a 3x3 affine matrix via the closed-form 2x2 inverse."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.array_equal(m[2], [0.0, 0.0, 1.0]):
        raise ValueError("expected a 3x3 affine matrix with bottom row (0, 0, 1)")
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    det = a * d - b * c
    if det == 0:
        raise ValueError("singular transform")
    A = np.array([[d, -b], [-c, a]]) / det
    t = -A @ m[:2, 2]
    out = np.eye(3)
    out[:2, :2] = A
    out[:2, 2] = t + 0.0  # drop negative zeros
    return out


def apply_affine(image, m: np.ndarray) -> np.ndarray:
    """Resample an HxWxC image so that output(q) = input(m^-1 q)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ValueError(f"apply_affine needs an HxWxC tensor, got shape {image.shape}")
    H, W, _ = image.shape
    inv = invert_affine(m)
    # normalized x = u / W with u = 2j + 1 - W (and likewise y), so in
    # doubled pixel units the map is diag(W, H) inv diag(1/W, 1/H)
    dims = (float(W), float(H))
    A = inv[:2, :2].copy()
    if W != H:
        A[0, 1] *= dims[0] / dims[1]
        A[1, 0] *= dims[1] / dims[0]
    c = inv[:2, 2] * np.array(dims)
    return kernels.affine_resample(image, A, c)


def augment_image(image, p: AugmentParams):
    return apply_affine(image, augment_matrix(p)), augment_label(p)


def make_augment_fn(sample_shape: tuple, constants: AugmentConstants = AugmentConstants()):
    """Batch hook for training: augments flattened HxWxC rows, returns (rows, labels)."""
    if len(sample_shape) != 3:
        raise ValueError("augmentation needs HxWxC samples")

    def fn(batch, rng):
        a, enabled = draw_augment_batch(rng, constants, len(batch))
        out = np.empty_like(batch)
        labels = np.empty((len(batch), LABEL_DIM))
        for k in range(len(batch)):
            p = AugmentParams(a[k], enabled[k], constants)
            img, labels[k] = augment_image(batch[k].reshape(sample_shape), p)
            out[k] = img.ravel()
        return out, labels

    return fn
