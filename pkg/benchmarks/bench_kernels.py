"""Benchmark the JIT kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py
The selected default path depends on DIALECTID_NO_NUMBA; this script always
times both implementations explicitly (numba timings exclude compilation,
which the first untimed call absorbs).
"""
import time

import numpy as np
import scipy.sparse

from dialectid import _kernels


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm-up (and JIT compile for the numba path)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_conv():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(256, 4, 400))
    w = rng.normal(size=(8, 4, 8))
    b = rng.normal(size=8)
    stride = 2
    t_out = (400 - 8) // stride + 1
    g = rng.normal(size=(256, 8, t_out))
    rows = []
    np_fwd = timeit(_kernels.conv1d_forward_np, x, w, b, stride)
    np_bwd = timeit(_kernels.conv1d_backward_np, x, w, stride, g)
    rows.append(("conv1d forward (256x4x400)", np_fwd, None))
    rows.append(("conv1d backward (256x4x400)", np_bwd, None))
    if _kernels.NUMBA_ENABLED:
        nb_fwd = timeit(_kernels.conv1d_forward, x, w, b, stride)
        nb_bwd = timeit(_kernels.conv1d_backward, x, w, stride, g)
        rows[0] = (rows[0][0], np_fwd, nb_fwd)
        rows[1] = (rows[1][0], np_bwd, nb_bwd)
    return rows


def bench_svm():
    rng = np.random.default_rng(1)
    X = scipy.sparse.random(2000, 500, density=0.05, random_state=2,
                            format="csr", dtype=np.float64)
    y = np.where(rng.random(2000) < 0.5, 1.0, -1.0)
    order = np.stack([rng.permutation(2000) for _ in range(20)]).astype(np.int64)
    args = (X.data.astype(np.float64), X.indices.astype(np.int64),
            X.indptr.astype(np.int64), 500, y, order, 0.01)
    np_t = timeit(_kernels.svm_epochs_np, *args, repeat=3)
    nb_t = timeit(_kernels.svm_epochs, *args, repeat=3) if _kernels.NUMBA_ENABLED else None
    return [("svm 20 epochs (2000x500 csr)", np_t, nb_t)]


def main():
    print("numba enabled: %s" % _kernels.NUMBA_ENABLED)
    print("%-32s %12s %12s %9s" % ("kernel", "numpy (s)", "numba (s)", "speedup"))
    for name, np_t, nb_t in bench_conv() + bench_svm():
        if nb_t is None:
            print("%-32s %12.4f %12s %9s" % (name, np_t, "-", "-"))
        else:
            print("%-32s %12.4f %12.4f %8.1fx" % (name, np_t, nb_t, np_t / nb_t))


if __name__ == "__main__":
    main()
