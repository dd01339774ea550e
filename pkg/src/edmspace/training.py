"""Toy-scale denoiser training: noise-level sampling, loss weighting, a small MLP
with hand-written gradients, and plain SGD."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Dataset, FormatError, RngStream
from .denoiser import Denoiser, PreconditionedDenoiser, precond_coeffs
from .schedules import PRESETS, Schedule

WEIGHTS_MAGIC = b"EDMW"
WEIGHTS_VERSION = 1
LABEL_DIM = 9


@dataclass(frozen=True)
class TrainConfig:
    P_mean: float = -1.2
    P_std: float = 1.2
    sigma_data: float = 0.5
    framework: str = "edm"
    lr: float = 0.02
    batch: int = 256
    steps: int = 5000
    record_every: int = 100

    def __post_init__(self):
        if not self.P_std > 0:
            raise ValueError("P_std must be > 0")
        if self.framework not in ("edm", "vp", "ve"):
            raise ValueError("training supports the edm, vp and ve frameworks")


# ------------------------------------------------------------------ network


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class MlpDenoiser:
    """Fully connected net F(x_in, c_noise[, label]) with SiLU hidden layers.

    The input is the concatenation of the scaled sample, the noise
    conditioning scalar, and (if ``label_dim`` > 0) the augmentation label.
    The output layer starts at zero so the initial D is the skip path alone.
    """

    def __init__(self, widths, label_dim: int = 0, rng: RngStream | None = None, zero_output: bool = True):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"bad layer widths {widths}")
        self.label_dim = int(label_dim)
        if widths[0] != widths[-1] + 1 + self.label_dim:
            raise ValueError("input width must be data dim + 1 (noise) + label dim")
        self.widths = widths
        self.weights = []
        self.biases = []
        for k, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            last = k == len(widths) - 2
            if last and zero_output:
                W = np.zeros((fan_in, fan_out))
            elif rng is None:
                raise ValueError("rng required for random initialisation")
            else:
                W = rng.normal((fan_in, fan_out)) * np.sqrt(1.0 / fan_in)
            self.weights.append(W)
            self.biases.append(np.zeros(fan_out))

    @property
    def data_dim(self) -> int:
        return self.widths[-1]

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def params(self) -> list:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat) -> None:
        pos = 0
        for p in self.params():
            p[...] = np.asarray(flat[pos : pos + p.size]).reshape(p.shape)
            pos += p.size

    def copy(self) -> "MlpDenoiser":
        other = MlpDenoiser.__new__(MlpDenoiser)
        other.label_dim, other.widths = self.label_dim, list(self.widths)
        other.weights = [W.copy() for W in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def _inputs(self, x_in, c_noise, aug_label):
        x_in = np.asarray(x_in, dtype=np.float64).reshape(len(x_in), -1)
        cols = [x_in, np.broadcast_to(np.asarray(c_noise, dtype=np.float64), (len(x_in),))[:, None]]
        if self.label_dim:
            if aug_label is None:
                aug_label = np.zeros((len(x_in), self.label_dim))
            cols.append(np.broadcast_to(aug_label, (len(x_in), self.label_dim)))
        return np.concatenate(cols, axis=1)

    def forward(self, x_in, c_noise, aug_label=None, keep: bool = False):
        h = self._inputs(x_in, c_noise, aug_label)
        cache = [h]
        n = len(self.weights)
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            if k < n - 1:
                cache.append(z)
                h = z * _sigmoid(z)
                cache.append(h)
            else:
                h = z
        return (h, cache) if keep else h

    __call__ = forward

    def backward(self, cache, grad_out):
        """Gradients of sum(grad_out * F) w.r.t. every parameter, as params() order."""
        grads = [None] * (2 * len(self.weights))
        g = grad_out
        n = len(self.weights)
        for k in range(n - 1, -1, -1):
            h_in = cache[2 * k]
            grads[2 * k] = h_in.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                z = cache[2 * k - 1]
                sg = _sigmoid(z)
                g = (g @ self.weights[k].T) * (sg * (1.0 + z * (1.0 - sg)))
        return grads

    # ---- weights file

    def save(self, path) -> None:
        parts = [WEIGHTS_MAGIC, struct.pack("<III", WEIGHTS_VERSION, len(self.weights), self.label_dim)]
        for W in self.weights:
            parts.append(struct.pack("<II", *W.shape))
        for W, b in zip(self.weights, self.biases):
            parts += [np.asarray(W, "<f8").tobytes(), np.asarray(b, "<f8").tobytes()]
        Path(path).write_bytes(b"".join(parts))

    @classmethod
    def load(cls, path) -> "MlpDenoiser":
        buf = Path(path).read_bytes()
        if buf[:4] != WEIGHTS_MAGIC:
            raise FormatError("bad weights magic", 0)
        if len(buf) < 16:
            raise FormatError("truncated weights header", len(buf))
        version, layers, label_dim = struct.unpack_from("<III", buf, 4)
        if version != WEIGHTS_VERSION:
            raise FormatError(f"unsupported weights version {version}", 4)
        pos = 16
        if len(buf) < pos + 8 * layers:
            raise FormatError("truncated layer dims", len(buf))
        shapes = [struct.unpack_from("<II", buf, pos + 8 * k) for k in range(layers)]
        pos += 8 * layers
        for k in range(1, layers):
            if shapes[k][0] != shapes[k - 1][1]:
                raise FormatError(f"layer {k} input width does not match previous output", 16 + 8 * k)
        net = cls.__new__(cls)
        net.label_dim = label_dim
        net.widths = [shapes[0][0]] + [s[1] for s in shapes]
        net.weights, net.biases = [], []
        for fi, fo in shapes:
            need = 8 * (fi * fo + fo)
            if len(buf) < pos + need:
                raise FormatError("truncated weights payload", len(buf))
            W = np.frombuffer(buf, "<f8", fi * fo, pos).reshape(fi, fo).astype(np.float64)
            b = np.frombuffer(buf, "<f8", fo, pos + 8 * fi * fo).astype(np.float64)
            net.weights.append(W)
            net.biases.append(b)
            pos += need
        if pos != len(buf):
            raise FormatError("trailing bytes after weights", pos)
        return net


# --------------------------------------------------------- loss components


def sample_sigma_train(rng: RngStream, cfg: TrainConfig, shape=()):
    """Training noise levels for ``cfg.framework``; log-normal for edm."""
    if cfg.framework == "edm":
        return np.exp(cfg.P_mean + cfg.P_std * rng.normal(shape))
    if cfg.framework == "vp":
        p = PRESETS["vp"]
        return Schedule("vp", p).sigma(rng.uniform(p.eps_t, 1.0, shape))
    p = PRESETS["ve-model"]
    return np.exp(rng.uniform(np.log(p.sigma_min), np.log(p.sigma_max), shape))


def loss_weight(sigma, sigma_data: float = 0.5, framework: str = "edm"):
    """lambda(sigma); for edm this is 1 / c_out^2."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if framework == "edm":
        out = (sigma * sigma + sigma_data * sigma_data) / (sigma * sigma_data) ** 2
    else:
        out = 1.0 / (sigma * sigma)
    return out[()] if out.ndim == 0 else out


def edm_loss(net: MlpDenoiser, y, rng: RngStream, cfg: TrainConfig, sigma=None, aug_label=None,
             want_grads: bool = True, per_sample: bool = False):
    """Weighted denoising loss on batch ``y`` (B, d) in the network's own frame.

    The network sees c_in (y + n) and is regressed onto (y - c_skip (y + n)) / c_out
    with per-sample weight lambda c_out^2.  Returns (loss, grads or None), plus
    (sigma, per-sample losses) when ``per_sample`` is set.
    """
    y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    B, d = y.shape
    if d != net.data_dim:
        raise ValueError(f"batch dim {d} does not match network output {net.data_dim}")
    if sigma is None:
        sigma = sample_sigma_train(rng, cfg, (B,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (B,))
    noisy = y + sigma[:, None] * rng.normal((B, d))
    c = precond_coeffs(cfg.framework, sigma, cfg.sigma_data)
    target = (y - c.c_skip[:, None] * noisy) / c.c_out[:, None]
    weight = loss_weight(sigma, cfg.sigma_data, cfg.framework) * c.c_out**2
    F, cache = net.forward(c.c_in[:, None] * noisy, c.c_noise, aug_label, keep=True)
    resid = F - target
    terms = weight * np.mean(resid * resid, axis=1)
    loss = float(np.sum(terms) / B)
    grads = net.backward(cache, 2.0 * weight[:, None] * resid / (B * d)) if want_grads else None
    if per_sample:
        return loss, grads, (sigma, terms)
    return loss, grads


@dataclass
class LossRecord:
    step: int
    loss: float
    bucket_edges: tuple
    bucket_losses: list = field(default_factory=list)


SIGMA_BUCKETS = (0.0, 0.1, 1.0, 10.0, np.inf)


def train_loop(net: MlpDenoiser, dataset: Dataset, cfg: TrainConfig, rng: RngStream, aug_fn=None):
    """Plain SGD on the weighted denoising loss.

    ``aug_fn(batch, rng) -> (batch, labels)`` optionally augments each batch.
    Emits a LossRecord every ``cfg.record_every`` steps (and at the last step)
    with the window's mean loss and per-sigma-bucket means (NaN if empty).
    """
    data = dataset.flat()
    records = []
    window = []
    for step in range(1, cfg.steps + 1):
        y = data[rng.integers(0, len(data), (cfg.batch,))]
        labels = None
        if aug_fn is not None:
            y, labels = aug_fn(y, rng)
        loss, grads, terms = edm_loss(net, y, rng, cfg, aug_label=labels, per_sample=True)
        for p, g in zip(net.params(), grads):
            p -= cfg.lr * g
        window.append(terms)
        if step % cfg.record_every == 0 or step == cfg.steps:
            records.append(_record(step, window))
            window = []
    return net, records


def _record(step, window):
    sig = np.concatenate([s for s, _ in window])
    val = np.concatenate([v for _, v in window])
    buckets = []
    for lo, hi in zip(SIGMA_BUCKETS[:-1], SIGMA_BUCKETS[1:]):
        m = (sig >= lo) & (sig < hi)
        buckets.append(float(val[m].mean()) if m.any() else float("nan"))
    return LossRecord(step, float(val.mean()), SIGMA_BUCKETS, buckets)


def loss_profile(D: Denoiser, dataset: Dataset, sigmas, draws: int, rng: RngStream, cfg: TrainConfig):
    """Monte-Carlo estimate of the weighted denoising loss of ``D`` at each sigma.

    Returns rows (sigma, mean loss, standard error).
    """
    data = dataset.flat()
    rows = []
    for sigma in sigmas:
        sigma = float(sigma)
        y = data[rng.integers(0, len(data), (draws,))]
        x = y + sigma * rng.normal(y.shape)
        den = D(x.reshape((draws, *dataset.sample_shape)), sigma).reshape(draws, -1)
        per = loss_weight(sigma, cfg.sigma_data, cfg.framework) * np.mean((den - y) ** 2, axis=1)
        rows.append((sigma, float(per.mean()), float(per.std(ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0))
    return rows


def as_denoiser(net: MlpDenoiser, cfg: TrainConfig | None = None) -> PreconditionedDenoiser:
    cfg = cfg or TrainConfig()
    return PreconditionedDenoiser(net, cfg.framework, cfg.sigma_data, sample_shape=(net.data_dim,))
