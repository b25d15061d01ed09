"""Shared test oracles: independent of the library code paths they check."""

import numpy as np

from verilab import autodiff as ad


def matmul_triple_loop(a, b):
    """Reference matrix product, three explicit loops."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def central_difference(f, x0, h=1e-5):
    """Central finite-difference gradient of a scalar function of a vector."""
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        g.flat[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def rel_error(a, b):
    # the floor keeps a pair of (numerically) zero gradients comparable
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / denom)


def grad_of(build_loss, x0):
    """Analytic gradient of build_loss(Tensor) -> scalar Tensor at x0."""
    xt = ad.Tensor(np.asarray(x0, dtype=np.float64))
    loss = build_loss(xt)
    (g,) = ad.backward(loss, [xt])
    return g


def value_of(build_loss, x0):
    return build_loss(ad.Tensor(np.asarray(x0, dtype=np.float64))).item()
