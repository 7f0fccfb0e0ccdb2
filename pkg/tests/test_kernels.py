import os
import subprocess
import sys

import numpy as np
import pytest

from arrivalnet import kernels
from arrivalnet.kernels import available_backends, get_backend

needs_compiled = pytest.mark.skipif("cython" not in available_backends(), reason="extension not built")


def test_numpy_backend_always_available():
    assert "numpy" in available_backends()
    assert kernels.BACKEND in available_backends()


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("fortran")


@needs_compiled
@pytest.mark.parametrize("shape,k", [((3, 4, 5, 2), 3), ((2, 1, 6, 4), 7), ((1, 8, 2, 3), 11), ((4, 1, 1, 2), 5)])
def test_conv_backends_bit_identical(shape, k):
    rng = np.random.default_rng(0)
    x = rng.normal(size=shape)
    ker = rng.normal(size=(k, k, shape[3], 3))
    g = rng.normal(size=shape[:3] + (3,))
    c, p = get_backend("cython"), get_backend("numpy")
    np.testing.assert_array_equal(c.conv2d_same(x, ker), p.conv2d_same(x, ker))
    np.testing.assert_array_equal(c.conv2d_same_kernel_grad(x, g, k, k), p.conv2d_same_kernel_grad(x, g, k, k))


@needs_compiled
@pytest.mark.parametrize("t", [4, 15, 20, 64])
def test_dft_backends_agree(t):
    x = np.random.default_rng(t).normal(size=(3, t, 4))
    (cr, ci), (pr, pi) = get_backend("cython").dft_parts(x, t // 2), get_backend("numpy").dft_parts(x, t // 2)
    np.testing.assert_allclose(cr, pr, atol=1e-11)
    np.testing.assert_allclose(ci, pi, atol=1e-11)


def test_pure_python_switch():
    code = "from arrivalnet import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, ARRIVALNET_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
