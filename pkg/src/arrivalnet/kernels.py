"""Backend selection for the hot kernels.

The compiled extension is preferred; the NumPy implementation is used when it
is missing or when the environment variable ``ARRIVALNET_PURE_PYTHON`` is set
to a non-empty value other than ``0``.
"""

import os

import numpy as np

from . import _kernels_py

_FORCE_PURE = os.environ.get("ARRIVALNET_PURE_PYTHON", "") not in ("", "0")

try:
    if _FORCE_PURE:
        raise ImportError("pure-python backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "numpy"


def available_backends():
    """Names of the backends importable in this environment."""
    names = ["numpy"]
    try:
        from . import _ckernels  # noqa: F401

        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return _impl
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def conv2d_same(x, kernel):
    return _impl.conv2d_same(np.ascontiguousarray(x, dtype=np.float64),
                             np.ascontiguousarray(kernel, dtype=np.float64))


def conv2d_same_kernel_grad(x, grad_out, kh, kw):
    return _impl.conv2d_same_kernel_grad(np.ascontiguousarray(x, dtype=np.float64),
                                         np.ascontiguousarray(grad_out, dtype=np.float64),
                                         kh, kw)


def dft_parts(x, n_freq):
    return _impl.dft_parts(np.ascontiguousarray(x, dtype=np.float64), n_freq)
