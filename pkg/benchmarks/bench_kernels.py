"""Compare the compiled kernels against the numpy fallback.

Times the three hot kernels on a stock workload (4 channels, 257 bins,
512 frames, 3 mixture components) plus a full 10-iteration EM run per
backend, and checks that both backends agree.

Run with:  python3 benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

from beamkit import _kernels
from beamkit._kernels import _numpy as numpy_impl
from beamkit.cgmm import run_em
from beamkit.spectral import MultichannelSpectrum

try:
    from beamkit._kernels import _core as cython_impl
except ImportError:
    cython_impl = None


def best_of(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_kernels(channels, bins, frames, components, repeats):
    rng = np.random.default_rng(0)
    y = rng.standard_normal((channels, bins, frames)) + 1j * rng.standard_normal(
        (channels, bins, frames)
    )
    weights = rng.uniform(0.0, 1.0, (bins, frames))
    mats = numpy_impl.accumulate_weighted_outer(y, weights) + 2.0 * channels * np.eye(channels)
    stacked = np.tile(mats, (components, 1, 1))

    cases = {
        "accumulate_weighted_outer": lambda impl: impl.accumulate_weighted_outer(y, weights),
        "quad_forms": lambda impl: impl.quad_forms(y, mats),
        "chol_inverse_logdet": lambda impl: impl.chol_inverse_logdet(stacked),
    }
    print(f"kernel workload: M={channels} F={bins} T={frames} K={components}")
    header = f"{'kernel':<28}{'numpy':>12}{'cython':>12}{'speedup':>10}{'max_diff':>12}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_np, ref = best_of(lambda: call(numpy_impl), repeats)
        if cython_impl is None:
            print(f"{name:<28}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'n/a':>10}{'n/a':>12}")
            continue
        t_cy, out = best_of(lambda: call(cython_impl), repeats)
        if isinstance(ref, tuple):
            diff = max(np.abs(a - b).max() for a, b in zip(ref, out))
        else:
            diff = np.abs(ref - out).max()
        print(
            f"{name:<28}{t_np * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms"
            f"{t_np / t_cy:>9.2f}x{diff:>12.2e}"
        )


def bench_em(channels, bins, frames, repeats):
    rng = np.random.default_rng(1)
    data = rng.standard_normal((channels, bins, frames)) + 1j * rng.standard_normal(
        (channels, bins, frames)
    )
    spec = MultichannelSpectrum(
        data, frame_hop=(bins - 1), fft_size=2 * (bins - 1), sample_rate=16000
    )
    masks = rng.uniform(0.0, 1.0, (3, bins, frames))
    masks /= masks.sum(axis=0)
    mask_list = [masks[0], masks[1], masks[2]]

    backends = [("numpy", numpy_impl)]
    if cython_impl is not None:
        backends.append(("cython", cython_impl))
    print("\nfull 10-iteration EM per backend:")
    originals = {
        name: getattr(_kernels, name)
        for name in ("accumulate_weighted_outer", "quad_forms", "chol_inverse_logdet")
    }
    finals = {}
    try:
        for label, impl in backends:
            for name in originals:
                setattr(_kernels, name, getattr(impl, name))
            elapsed, state = best_of(lambda: run_em(spec, mask_list, prior=True), repeats)
            finals[label] = state.log_likelihoods[-1]
            print(f"  {label:<8}{elapsed * 1e3:>10.1f} ms")
    finally:
        for name, fn in originals.items():
            setattr(_kernels, name, fn)
    if len(finals) == 2:
        gap = abs(finals["numpy"] - finals["cython"]) / abs(finals["numpy"])
        print(f"  final log-likelihood relative gap: {gap:.2e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--channels", type=int, default=4)
    parser.add_argument("--bins", type=int, default=257)
    parser.add_argument("--frames", type=int, default=512)
    parser.add_argument("--components", type=int, default=3)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"selected backend at import: {_kernels.backend()}")
    if cython_impl is None:
        print("compiled extension not available; showing numpy timings only")
    bench_kernels(args.channels, args.bins, args.frames, args.components, args.repeats)
    bench_em(args.channels, args.bins, args.frames, args.repeats)


if __name__ == "__main__":
    main()
