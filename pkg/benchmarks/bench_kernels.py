"""Time the batched eigen-kernels: compiled core, numpy fallback and LAPACK.

Usage: python benchmarks/bench_kernels.py [--n 3] [--batch 100000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from lagmc._kernels import compiled_available, get_backend


def _best(func, arg, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(arg)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--batch", type=int, default=100000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = ["python"] + (["compiled"] if compiled_available() else [])
    print(f"{'n':>3} {'batch':>8} {'kernel':>22} {'seconds':>10} {'per matrix (us)':>16}")
    for n in args.n:
        a = rng.normal(size=(args.batch, n, n))
        mats = 0.5 * (a + np.swapaxes(a, 1, 2))
        ref = np.linalg.eigvalsh(mats)[:, ::-1]
        for name in backends:
            mod = get_backend(name)
            vals, _ = mod.jacobi_eigh(mats)
            err = np.abs(vals - ref).max()
            for label, f in ((f"{name}.jacobi_eigh", mod.jacobi_eigh),
                             (f"{name}.phase_ginv", mod.phase_and_inverse_metric)):
                t = _best(f, mats, args.repeat)
                print(f"{n:>3} {args.batch:>8} {label:>22} {t:>10.4f} {1e6 * t / args.batch:>16.3f}"
                      + (f"   max |err| vs eigvalsh {err:.1e}" if label.endswith("eigh") else ""))
        t = _best(np.linalg.eigh, mats, args.repeat)
        print(f"{n:>3} {args.batch:>8} {'numpy.linalg.eigh':>22} {t:>10.4f} {1e6 * t / args.batch:>16.3f}")


if __name__ == "__main__":
    main()
