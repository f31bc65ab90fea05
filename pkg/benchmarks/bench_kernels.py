"""Benchmark the compiled kernel extension against the numpy fallback.

Times the four hot kernels (im2col, col2im_add, maxpool forward/backward)
on full-scale feature-map shapes, plus an end-to-end conv2d layer through
whichever backend the package selected at import.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

import sal360.kernels as selected
from sal360 import tensor as T
from sal360.kernels import pure

try:
    from sal360.kernels import _core as ext
except ImportError:
    ext = None


def bench(fn, repeats):
    # one warmup, then best-of-N wall time
    fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rng):
    """(name, make_call(backend)) pairs on representative shapes."""
    # encoder block 4 at full scale: 512 channels on a 20x40 latent grid,
    # padded for a 3x3 window
    xp = np.ascontiguousarray(rng.standard_normal((512, 22, 42)))
    oh, ow = 20, 40
    gcols = np.ascontiguousarray(rng.standard_normal((512 * 9, oh * ow)))
    # first pooling layer of the expert stream
    pool_x = np.ascontiguousarray(rng.standard_normal((16, 160, 160)))
    pool_g = np.ascontiguousarray(rng.standard_normal((16, 80, 80)))
    _, pool_idx = pure.maxpool_forward(pool_x, 2, 2, 2, 2)

    def im2col(mod):
        return lambda: mod.im2col(xp, 3, 3, 1, 1, 0, oh)

    def col2im(mod):
        def run():
            gxp = np.zeros_like(xp)
            mod.col2im_add(gxp, gcols, 3, 3, 1, 1, 0, oh)
        return run

    def pool_fwd(mod):
        return lambda: mod.maxpool_forward(pool_x, 2, 2, 2, 2)

    def pool_bwd(mod):
        return lambda: mod.maxpool_backward(pool_g, pool_idx, 160, 160)

    return [
        ("im2col 512x20x40 k3", im2col),
        ("col2im_add 512x20x40 k3", col2im),
        ("maxpool fwd 16x160x160", pool_fwd),
        ("maxpool bwd 16x160x160", pool_bwd),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"selected backend: {selected.BACKEND}")
    if ext is None:
        print("compiled extension not built; timing the numpy fallback only\n")

    header = f"{'kernel':<28} {'numpy':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, make in kernel_cases(rng):
        t_pure = bench(make(pure), args.repeats)
        if ext is not None:
            t_ext = bench(make(ext), args.repeats)
            print(f"{name:<28} {t_pure * 1e3:>8.2f}ms {t_ext * 1e3:>8.2f}ms "
                  f"{t_pure / t_ext:>7.2f}x")
        else:
            print(f"{name:<28} {t_pure * 1e3:>8.2f}ms {'-':>10} {'-':>8}")

    # end-to-end conv layer through the selected backend
    x = T.Tensor(rng.standard_normal((1, 512, 20, 40)))
    w = T.Tensor(rng.standard_normal((64, 512, 3, 3)))
    with T.no_grad():
        t_conv = bench(lambda: T.conv2d(x, w, padding=(1, 1)), args.repeats)
    print(f"\nconv2d 512->64 3x3 on 20x40 ({selected.BACKEND} backend): "
          f"{t_conv * 1e3:.2f}ms")


if __name__ == "__main__":
    main()
