import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edmspace.core import (Dataset, FormatError, as_tensor, axpy, dataset_load, dataset_save, gaussian, grid2d,
                           l2norm, rng_stream, scale, tensor_load, tensor_save, two_point)


def test_same_key_same_draws():
    a = rng_stream(7, 0).normal(100)
    b = rng_stream(7, 0).normal(100)
    assert np.array_equal(a, b)


def test_streams_uncorrelated():
    a = rng_stream(7, 0).normal(100_000)
    b = rng_stream(7, 1).normal(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_standard_normal_moments():
    z = rng_stream(7, 0).normal(100_000)
    assert abs(z.mean()) < 0.02
    assert abs(z.var() - 1) < 0.02


def test_block_draw_equals_sequential_draws():
    # lets samplers pre-draw per-trajectory noise without changing stream order
    block = rng_stream(3, 9).normal((5, 3))
    r = rng_stream(3, 9)
    seq = np.stack([r.normal(3) for _ in range(5)])
    assert np.array_equal(block, seq)


def test_gaussian_zero_stddev():
    assert np.all(gaussian(rng_stream(1, 0), (10,), 0.0) == 0)


def test_gaussian_stddev_80():
    x = gaussian(rng_stream(1, 0), (100_000,), 80.0)
    assert abs(x.std() - 80) < 1


def test_gaussian_scaling_identity():
    a = 2 * gaussian(rng_stream(5, 2), (50,), 1.0)
    b = gaussian(rng_stream(5, 2), (50,), 2.0)
    assert np.array_equal(a, b)


def test_gaussian_negative_stddev():
    with pytest.raises(ValueError):
        gaussian(rng_stream(1, 0), (3,), -1.0)


def test_tensor_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_tensor([1.0, np.nan])
    with pytest.raises(ValueError):
        as_tensor([np.inf])


def test_tensor_is_immutable():
    t = as_tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t[0] = 3.0


@given(st.floats(-1e6, 1e6), st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_norm_is_homogeneous(a, xs):
    x = np.array(xs)
    assert np.isclose(l2norm(scale(a, x)), abs(a) * l2norm(x), rtol=1e-12, atol=1e-300)


@given(st.lists(st.floats(-1e300, 1e300), min_size=1, max_size=20))
def test_axpy_identity(xs):
    x = np.array(xs)
    assert np.array_equal(axpy(1.0, x, 0.0), x)


def test_dataset_roundtrip(tmp_path):
    ds = two_point()
    dataset_save(ds, tmp_path / "d.edmd")
    back = dataset_load(tmp_path / "d.edmd")
    assert back.samples.tobytes() == ds.samples.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(0, 2**32))
def test_dataset_roundtrip_random(tmp_path_factory, count, shape, seed):
    path = tmp_path_factory.mktemp("ds") / "d.edmd"
    ds = Dataset(rng_stream(seed, 0).normal((count, *shape)))
    dataset_save(ds, path)
    assert dataset_load(path).samples.tobytes() == ds.samples.tobytes()


def test_tensor_roundtrip(tmp_path):
    x = rng_stream(0, 0).normal((3, 4, 2))
    tensor_save(x, tmp_path / "t.edmt")
    assert np.array_equal(tensor_load(tmp_path / "t.edmt"), x)


def test_tensor_layout(tmp_path):
    tensor_save(np.array([[1.0, 2.0]]), tmp_path / "t.edmt")
    raw = (tmp_path / "t.edmt").read_bytes()
    assert raw[:4] == b"EDMT"
    assert struct.unpack("<IIII", raw[4:20]) == (1, 2, 1, 2)
    assert struct.unpack("<2d", raw[20:]) == (1.0, 2.0)


def test_bad_magic(tmp_path):
    p = tmp_path / "d.edmd"
    dataset_save(two_point(), p)
    raw = bytearray(p.read_bytes())
    raw[0:4] = b"XXXX"
    p.write_bytes(bytes(raw))
    with pytest.raises(FormatError) as exc:
        dataset_load(p)
    assert exc.value.offset == 0


def test_truncated_payload_names_offset(tmp_path):
    p = tmp_path / "d.edmd"
    dataset_save(two_point(), p)
    raw = p.read_bytes()
    p.write_bytes(raw[:-3])
    with pytest.raises(FormatError) as exc:
        dataset_load(p)
    assert "offset" in str(exc.value)
    assert exc.value.offset == len(raw) - 3


def test_shape_mismatch_rejected(tmp_path):
    from edmspace.core import _tensor_bytes
    p = tmp_path / "d.edmd"
    body = b"EDMD" + struct.pack("<II", 1, 2) + _tensor_bytes(np.zeros(1)) + _tensor_bytes(np.zeros(2))
    p.write_bytes(body)
    with pytest.raises(FormatError) as exc:
        dataset_load(p)
    assert exc.value.offset == 12 + 24


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        Dataset.from_list([])
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 1)))


def test_uniform_shape_required():
    with pytest.raises(ValueError):
        Dataset.from_list([np.zeros(2), np.zeros(3)])


def test_grid2d_is_centred():
    g = grid2d()
    assert g.samples.shape == (9, 2)
    assert np.allclose(g.samples.mean(0), 0)
