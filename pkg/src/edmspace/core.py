"""Tensors, seeded random streams, datasets and the shared binary file formats.

Tensors are plain ``float64`` numpy arrays.  ``as_tensor`` is the validating
constructor: it copies into a read-only C-contiguous buffer and rejects
non-finite values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TENSOR_MAGIC = b"EDMT"
DATASET_MAGIC = b"EDMD"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """Malformed binary file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


# ---------------------------------------------------------------- tensors


def as_tensor(values, *, copy: bool = True) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=copy, order="C")
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if any(n <= 0 for n in arr.shape):
        raise ValueError(f"tensor shape must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains NaN or Inf")
    arr.setflags(write=False)
    return arr


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.add(a, b)


def scale(a: float, x: np.ndarray) -> np.ndarray:
    return np.multiply(a, x)


def axpy(a: float, x: np.ndarray, y) -> np.ndarray:
    """a*x + y."""
    return a * x + y


def l2norm(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    top = float(np.max(np.abs(x))) if x.size else 0.0
    if top == 0.0 or not np.isfinite(top):
        return top
    # scale first so squares neither overflow nor underflow
    return top * float(np.sqrt(np.sum(np.square(x / top))))


# ------------------------------------------------------------------ random


@dataclass(frozen=True)
class RngStream:
    """A Philox counter-based stream keyed by (global_seed, stream_id).

    Two streams with the same key produce the same values on any platform;
    different stream ids are statistically independent.
    """

    global_seed: int
    stream_id: int
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        key = np.array([self.global_seed & (2**64 - 1), self.stream_id & (2**64 - 1)], dtype=np.uint64)
        object.__setattr__(self, "generator", np.random.Generator(np.random.Philox(key=key)))

    def normal(self, shape=()) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def uniform(self, low=0.0, high=1.0, shape=()):
        return self.generator.uniform(low, high, shape)

    def integers(self, low, high, shape=()):
        return self.generator.integers(low, high, shape)


def rng_stream(global_seed: int, stream_id: int) -> RngStream:
    return RngStream(int(global_seed), int(stream_id))


def gaussian(rng: RngStream, shape, stddev: float) -> np.ndarray:
    """I.i.d. N(0, stddev^2) draws; consumes stream values even when stddev is 0."""
    if not stddev >= 0:
        raise ValueError(f"stddev must be >= 0, got {stddev}")
    return stddev * rng.normal(shape)


# ----------------------------------------------------------------- dataset


@dataclass(frozen=True)
class Dataset:
    samples: np.ndarray  # (count, *sample_shape)
    name: str = "dataset"

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim < 2 or arr.shape[0] == 0:
            raise ValueError("dataset must hold at least one sample of rank >= 1")
        object.__setattr__(self, "samples", as_tensor(arr))

    @classmethod
    def from_list(cls, samples, name: str = "dataset") -> "Dataset":
        samples = [np.asarray(s, dtype=np.float64) for s in samples]
        if not samples:
            raise ValueError("dataset must be non-empty")
        shape = samples[0].shape
        if any(s.shape != shape for s in samples):
            raise ValueError("dataset samples must share one shape")
        return cls(np.stack(samples), name)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_shape(self) -> tuple:
        return self.samples.shape[1:]

    @property
    def dim(self) -> int:
        return int(np.prod(self.sample_shape))

    def flat(self) -> np.ndarray:
        return self.samples.reshape(len(self), -1)

    def empirical_std(self) -> float:
        return float(np.std(self.samples))


def two_point() -> Dataset:
    return Dataset(np.array([[-1.0], [1.0]]), "two-point")


def gaussian_dataset(sigma_data: float, count: int = 1024, seed: int = 0) -> Dataset:
    rng = rng_stream(seed, 0)
    return Dataset(gaussian(rng, (count, 1), sigma_data), f"gaussian:{sigma_data!r}")


def grid2d(k: int = 3, spacing: float = 1.0) -> Dataset:
    ticks = (np.arange(k) - (k - 1) / 2) * spacing
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    return Dataset(np.stack([xx.ravel(), yy.ravel()], axis=1), "grid2d")


def builtin_dataset(spec: str, seed: int = 0, count: int = 1024) -> Dataset:
    if spec == "two-point":
        return two_point()
    if spec == "grid2d":
        return grid2d()
    if spec.startswith("gaussian:"):
        return gaussian_dataset(float(spec.split(":", 1)[1]), count, seed)
    raise ValueError(f"unknown built-in dataset {spec!r} (two-point, gaussian:<sigma>, grid2d)")


# -------------------------------------------------------------- file IO


def _tensor_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, dtype="<f8")
    head = TENSOR_MAGIC + struct.pack("<II", FORMAT_VERSION, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr).tobytes()


def _read_tensor(buf: bytes, pos: int) -> tuple[np.ndarray, int]:
    if buf[pos : pos + 4] != TENSOR_MAGIC:
        raise FormatError("bad tensor magic", pos)
    if len(buf) < pos + 12:
        raise FormatError("truncated tensor header", len(buf))
    version, rank = struct.unpack_from("<II", buf, pos + 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported tensor version {version}", pos + 4)
    if rank == 0:
        raise FormatError("tensor rank must be >= 1", pos + 8)
    pos += 12
    if len(buf) < pos + 4 * rank:
        raise FormatError("truncated tensor dims", len(buf))
    dims = struct.unpack_from(f"<{rank}I", buf, pos)
    if any(d == 0 for d in dims):
        raise FormatError("zero tensor dimension", pos)
    pos += 4 * rank
    nbytes = 8 * int(np.prod(dims))
    if len(buf) < pos + nbytes:
        raise FormatError("truncated tensor payload", len(buf))
    arr = np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=pos).reshape(dims)
    if not np.all(np.isfinite(arr)):
        raise FormatError("non-finite tensor value", pos)
    return arr.astype(np.float64), pos + nbytes


def tensor_save(arr: np.ndarray, path) -> None:
    Path(path).write_bytes(_tensor_bytes(as_tensor(arr)))


def tensor_load(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    arr, end = _read_tensor(buf, 0)
    if end != len(buf):
        raise FormatError("trailing bytes after tensor", end)
    return as_tensor(arr, copy=False)


def dataset_save(ds: Dataset, path) -> None:
    if len(ds) == 0:
        raise ValueError("refusing to save an empty dataset")
    parts = [DATASET_MAGIC, struct.pack("<II", FORMAT_VERSION, len(ds))]
    parts += [_tensor_bytes(s) for s in ds.samples]
    Path(path).write_bytes(b"".join(parts))


def dataset_load(path, name: str | None = None) -> Dataset:
    buf = Path(path).read_bytes()
    if buf[:4] != DATASET_MAGIC:
        raise FormatError("bad dataset magic", 0)
    if len(buf) < 12:
        raise FormatError("truncated dataset header", len(buf))
    version, count = struct.unpack_from("<II", buf, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported dataset version {version}", 4)
    if count == 0:
        raise FormatError("empty dataset", 8)
    pos = 12
    samples = []
    for _ in range(count):
        start = pos
        arr, pos = _read_tensor(buf, pos)
        if samples and arr.shape != samples[0].shape:
            raise FormatError(f"sample shape {arr.shape} differs from {samples[0].shape}", start)
        samples.append(arr)
    if pos != len(buf):
        raise FormatError("trailing bytes after dataset", pos)
    return Dataset(np.stack(samples), name or Path(path).stem)
