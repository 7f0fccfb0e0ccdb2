"""NumPy reference implementations of the hot kernels.

These are used when the compiled ``_ckernels`` extension is unavailable (or
when ``ARRIVALNET_PURE_PYTHON=1``). Every function here has an identically
named counterpart in ``_ckernels.pyx``; the two must agree to rounding.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _effective_kernel(kernel, height, width):
    # Taps further than (H-1, W-1) from the centre only ever see zero padding.
    kh, kw = kernel.shape[:2]
    ry = min(kh // 2, height - 1)
    rx = min(kw // 2, width - 1)
    cy, cx = kh // 2, kw // 2
    return kernel[cy - ry:cy + ry + 1, cx - rx:cx + rx + 1], ry, rx


def conv2d_same(x, kernel):
    """Zero-padded 'same' cross-correlation.

    x: (B, H, W, Cin), kernel: (kh, kw, Cin, Cout) with odd kh, kw.
    Returns (B, H, W, Cout).
    """
    b, h, w, cin = x.shape
    k, ry, rx = _effective_kernel(kernel, h, w)
    cout = k.shape[3]
    xp = np.pad(x, ((0, 0), (ry, ry), (rx, rx), (0, 0)))
    # (B, H, W, Cin, kh, kw) -> (B*H*W, kh*kw*Cin) in (kh, kw, Cin) order
    win = sliding_window_view(xp, (2 * ry + 1, 2 * rx + 1), axis=(1, 2))
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(b * h * w, -1)
    out = cols @ k.reshape(-1, cout)
    return out.reshape(b, h, w, cout)


def conv2d_same_kernel_grad(x, grad_out, kh, kw):
    """Gradient of ``conv2d_same`` with respect to a (kh, kw, Cin, Cout) kernel."""
    b, h, w, cin = x.shape
    cout = grad_out.shape[3]
    ry = min(kh // 2, h - 1)
    rx = min(kw // 2, w - 1)
    xp = np.pad(x, ((0, 0), (ry, ry), (rx, rx), (0, 0)))
    win = sliding_window_view(xp, (2 * ry + 1, 2 * rx + 1), axis=(1, 2))
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(b * h * w, -1)
    geff = (cols.T @ grad_out.reshape(-1, cout)).reshape(2 * ry + 1, 2 * rx + 1, cin, cout)
    grad = np.zeros((kh, kw, cin, cout))
    cy, cx = kh // 2, kw // 2
    grad[cy - ry:cy + ry + 1, cx - rx:cx + rx + 1] = geff
    return grad


def dft_parts(x, n_freq):
    """Real and imaginary DFT coefficients for bins 1..n_freq along axis 1.

    x: (B, T, D). Returns two arrays of shape (B, n_freq, D).
    """
    t = x.shape[1]
    ang = 2.0 * np.pi * (np.outer(np.arange(1, n_freq + 1), np.arange(t)) % t) / t
    re = np.einsum("ft,btd->bfd", np.cos(ang), x)
    im = -np.einsum("ft,btd->bfd", np.sin(ang), x)
    return re, im
