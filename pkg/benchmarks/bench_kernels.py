"""Compare the compiled and NumPy kernel backends on model-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from arrivalnet.kernels import available_backends, get_backend

# (batch, rows, cols, cin, cout, k): grids seen for T=15 with d_model=16
CONV_CASES = [
    (32, 8, 2, 16, 16, 11),
    (32, 3, 5, 16, 16, 11),
    (32, 2, 7, 16, 16, 11),
    (96, 4, 4, 16, 16, 11),
]
DFT_CASES = [(32, 15, 16), (32, 20, 16), (256, 64, 16)]


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    header = "case".ljust(34) + "".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += "     speedup"
    print(header)

    rows = []
    for b, h, w, cin, cout, k in CONV_CASES:
        x = rng.standard_normal((b, h, w, cin))
        ker = rng.standard_normal((k, k, cin, cout))
        g = rng.standard_normal((b, h, w, cout))
        rows.append((f"conv fwd  {b}x{h}x{w}x{cin} k{k}",
                     lambda m, x=x, ker=ker: m.conv2d_same(x, ker)))
        rows.append((f"conv grad {b}x{h}x{w}x{cin} k{k}",
                     lambda m, x=x, g=g, k=k: m.conv2d_same_kernel_grad(x, g, k, k)))
    for b, t, d in DFT_CASES:
        x = rng.standard_normal((b, t, d))
        rows.append((f"dft       {b}x{t}x{d}", lambda m, x=x, t=t: m.dft_parts(x, t // 2)))

    for name, fn in rows:
        times = [_time(lambda: fn(get_backend(be)), args.repeat) for be in backends]
        line = name.ljust(34) + "".join(f"{ms:10.3f}ms" for ms in times)
        if len(times) > 1:
            line += f"{times[1] / times[0]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
