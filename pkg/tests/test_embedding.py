import numpy as np
import pytest

from arrivalnet.embedding import EmbeddingParams, embed, positional_encoding, value_encoding
from arrivalnet.errors import ConfigError, DimensionError
from arrivalnet.tensor import Tensor, tsum
from conftest import check_grads


def test_positional_encoding_layout():
    pe = positional_encoding(10, 16).data
    np.testing.assert_allclose(pe[:, 0], np.sin(np.arange(1, 11)), atol=1e-15)
    np.testing.assert_allclose(pe[:, 1], np.cos(np.arange(1, 11)), atol=1e-15)
    assert np.all(np.abs(pe) <= 1.0)
    np.testing.assert_allclose(pe[2, 4], np.sin(3 / 20 ** (4 / 16)))
    np.testing.assert_array_equal(pe, positional_encoding(10, 16).data)


def test_positional_rows_distinct():
    pe = positional_encoding(10, 16).data
    for i in range(10):
        for j in range(i + 1, 10):
            assert not np.allclose(pe[i], pe[j])


def test_positional_odd_width():
    with pytest.raises(ConfigError):
        positional_encoding(10, 15)


def _params(rng, c=7, d=16, n_p=10, n_f=10):
    return EmbeddingParams.init(rng, c, d, n_p, n_f)


def test_value_encoding_shapes_and_linearity():
    rng = np.random.default_rng(0)
    p = _params(rng)
    assert value_encoding(np.ones((10, 7)), p).shape == (10, 16)
    np.testing.assert_array_equal(value_encoding(np.zeros((10, 7)), p).data, 0.0)
    with pytest.raises(DimensionError):
        value_encoding(np.ones((10, 5)), p)


def test_value_encoding_centre_delta():
    rng = np.random.default_rng(1)
    p = _params(rng, c=4, d=4)
    k = np.zeros((3, 4, 4))
    k[1] = np.eye(4)
    p.value_kernel = Tensor(k)
    x = rng.normal(size=(10, 4))
    np.testing.assert_array_equal(value_encoding(x, p).data, x)


def test_embed_shape_and_block_identity():
    rng = np.random.default_rng(2)
    p = _params(rng, c=5)
    x = rng.normal(size=(10, 5))
    ctx = np.broadcast_to([1.0, 0.0], (10, 2))
    assert embed(x, None, p).shape == (20, 16)
    w = np.zeros((20, 10))
    w[:10] = np.eye(10)
    p.align_weights = Tensor(w)
    expected = value_encoding(x, p).data + positional_encoding(10, 16).data
    np.testing.assert_allclose(embed(x, None, p).data[:10], expected, atol=1e-13)
    np.testing.assert_array_equal(embed(x, None, p).data[10:], 0.0)
    with pytest.raises(DimensionError):
        embed(x, ctx[:5], p)


def test_embed_linear_in_value_input():
    rng = np.random.default_rng(3)
    p = _params(rng)
    a, b = rng.normal(size=(10, 7)), rng.normal(size=(10, 7))
    pe_term = embed(np.zeros((10, 7)), None, p).data
    lhs = embed(a + b, None, p).data - pe_term
    rhs = (embed(a, None, p).data - pe_term) + (embed(b, None, p).data - pe_term)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_embed_batched_matches_unbatched():
    rng = np.random.default_rng(4)
    p = _params(rng)
    x = rng.normal(size=(3, 10, 7))
    batched = embed(x, None, p).data
    for i in range(3):
        np.testing.assert_allclose(batched[i], embed(x[i], None, p).data, atol=1e-13)


def test_embed_gradient():
    rng = np.random.default_rng(5)
    p = _params(rng, c=7)
    x = Tensor(rng.uniform(-2, 2, size=(10, 5)), requires_grad=True)
    ctx = Tensor(np.broadcast_to([1.0, 1.0], (10, 2)).copy())
    w = rng.normal(size=(20, 16))
    err = check_grads(lambda: tsum(embed(x, ctx, p) * w), [x, p.value_kernel, p.align_weights], rng, 20)
    assert err < 1e-4
