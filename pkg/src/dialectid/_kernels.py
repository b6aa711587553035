"""Hot numeric kernels with JIT and pure-numpy implementations.

The inner loops that dominate training time (1-D convolution forward and
backward for the twin network, and the per-sample hinge subgradient sweep
for the SVM) exist in two interchangeable versions:

* numba ``@njit`` loops (default when numba imports cleanly), and
* vectorized pure-numpy fallbacks.

Set ``DIALECTID_NO_NUMBA=1`` before import to force the numpy path, e.g.
to debug or to benchmark one against the other (see
``benchmarks/bench_kernels.py``). Both paths are deterministic; all
randomness (shuffles, sampling) stays outside the kernels so the two paths
see identical inputs.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("DIALECTID_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

if not _DISABLED:
    try:
        from numba import njit
    except ImportError:
        _DISABLED = True

NUMBA_ENABLED = not _DISABLED


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _windows(x, kernel, stride):
    # (B, C, L) -> (B, C, T, K) view of the strided convolution windows
    win = np.lib.stride_tricks.sliding_window_view(x, kernel, axis=2)
    return win[:, :, ::stride, :]


def conv1d_forward_np(x, w, b, stride):
    """Valid 1-D convolution. x (B,Cin,L), w (Cout,Cin,K), b (Cout,) -> (B,Cout,T)."""
    win = _windows(x, w.shape[2], stride)
    return np.einsum("ock,bctk->bot", w, win, optimize=True) + b[None, :, None]


def conv1d_backward_np(x, w, stride, gout):
    """Gradients of conv1d_forward wrt input, weights and bias.

    gout is the (B,Cout,T) upstream gradient; dw and db are summed over the
    batch, dx matches x.
    """
    kernel = w.shape[2]
    win = _windows(x, kernel, stride)
    dw = np.einsum("bot,bctk->ock", gout, win, optimize=True)
    db = gout.sum(axis=(0, 2))
    dx = np.zeros_like(x)
    spread = np.einsum("bot,ock->bctk", gout, w, optimize=True)
    pos = stride * np.arange(gout.shape[2])
    for k in range(kernel):
        # for fixed k the window positions are distinct, so += is safe
        dx[:, :, pos + k] += spread[:, :, :, k]
    return dx, dw, db


def svm_epochs_np(data, indices, indptr, dim, y, order, C):
    """Subgradient sweep for one binary hinge problem on CSR features.

    Minimizes 0.5*||w||^2 + C * sum_i hinge(y_i * (w.x_i + b)) with the
    1/(lambda*t) step schedule, lambda = 1/(C*N). ``order`` holds the
    pre-shuffled sample index per (epoch, step); the bias is unregularized.
    """
    n = indptr.shape[0] - 1
    lam = 1.0 / (C * n)
    w = np.zeros(dim)
    b = 0.0
    t = 0
    for e in range(order.shape[0]):
        for s in range(n):
            i = order[e, s]
            t += 1
            lo, hi = indptr[i], indptr[i + 1]
            cols = indices[lo:hi]
            vals = data[lo:hi]
            margin = y[i] * (float(vals @ w[cols]) + b)
            w *= 1.0 - 1.0 / t
            if margin < 1.0:
                coef = y[i] / (lam * t)
                w[cols] += coef * vals
                b += coef
    return w, b


# ---------------------------------------------------------------------------
# numba implementations (same contracts, explicit loops)
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def _conv1d_forward_nb(x, w, b, stride):
        bsz, cin, length = x.shape
        cout, _, kernel = w.shape
        t_out = (length - kernel) // stride + 1
        out = np.empty((bsz, cout, t_out))
        for n in range(bsz):
            for o in range(cout):
                for t in range(t_out):
                    acc = b[o]
                    base = t * stride
                    for c in range(cin):
                        for k in range(kernel):
                            acc += w[o, c, k] * x[n, c, base + k]
                    out[n, o, t] = acc
        return out

    @njit(cache=True)
    def _conv1d_backward_nb(x, w, stride, gout):
        bsz, cin, length = x.shape
        cout, _, kernel = w.shape
        t_out = gout.shape[2]
        dx = np.zeros((bsz, cin, length))
        dw = np.zeros((cout, cin, kernel))
        db = np.zeros(cout)
        for n in range(bsz):
            for o in range(cout):
                for t in range(t_out):
                    g = gout[n, o, t]
                    db[o] += g
                    base = t * stride
                    for c in range(cin):
                        for k in range(kernel):
                            dw[o, c, k] += g * x[n, c, base + k]
                            dx[n, c, base + k] += g * w[o, c, k]
        return dx, dw, db

    @njit(cache=True)
    def _svm_epochs_nb(data, indices, indptr, dim, y, order, C):
        n = indptr.shape[0] - 1
        lam = 1.0 / (C * n)
        w = np.zeros(dim)
        b = 0.0
        t = 0
        for e in range(order.shape[0]):
            for s in range(n):
                i = order[e, s]
                t += 1
                acc = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    acc += data[p] * w[indices[p]]
                margin = y[i] * (acc + b)
                scale = 1.0 - 1.0 / t
                for j in range(dim):
                    w[j] *= scale
                if margin < 1.0:
                    coef = y[i] / (lam * t)
                    for p in range(indptr[i], indptr[i + 1]):
                        w[indices[p]] += coef * data[p]
                    b += coef
        return w, b

    conv1d_forward = _conv1d_forward_nb
    conv1d_backward = _conv1d_backward_nb
    svm_epochs = _svm_epochs_nb
else:
    conv1d_forward = conv1d_forward_np
    conv1d_backward = conv1d_backward_np
    svm_epochs = svm_epochs_np
