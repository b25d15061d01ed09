"""Dense float64 tensors with reverse-mode automatic differentiation.

Everything here is deliberately small: the only consumers are MLPs,
max-distance layers and the cross-entropy / KL losses built on top of
them.  Each operation returns a new Tensor that remembers its parents
and a closure mapping the output adjoint to parent adjoints; backward()
replays those closures in reverse topological order.  All storage is
float64 and all forward passes are plain numpy, so identical inputs
produce bit-identical outputs.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError, NumericError


class Tensor:
    """A float64 array plus the bookkeeping for one reverse sweep.

    Adjoints live in .grad (same shape as .data) and are defined only
    after backward() has been called on a scalar descendant.
    """

    __slots__ = ("data", "grad", "_parents", "_backprop")

    def __init__(self, data, _parents=(), _backprop=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._backprop = _backprop

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _topo_order(root):
    # Iterative post-order DFS: parents appear before children.
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def backward(loss, leaves=None):
    """Populate adjoints for every tensor reachable from ``loss``.

    ``loss`` must be scalar.  When ``leaves`` is given, returns their
    gradients in order; a leaf not connected to the loss gets zeros.
    """
    if loss.data.ndim != 0:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    order = _topo_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node._backprop is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._backprop(node.grad)):
            if g is None:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
    if leaves is None:
        return None
    return [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
            for leaf in leaves]


# ---------------------------------------------------------------------------
# elementwise / structural ops


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise DimensionError(f"add: shapes {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data, (a, b))
    out._backprop = lambda g: (g, g)
    return out


def scale(a, c):
    a = _as_tensor(a)
    c = float(c)
    out = Tensor(a.data * c, (a,))
    out._backprop = lambda g: (g * c,)
    return out


def relu(x):
    x = _as_tensor(x)
    out = Tensor(np.maximum(x.data, 0.0), (x,))
    mask = (x.data > 0.0).astype(np.float64)  # subgradient 0 at the kink
    out._backprop = lambda g: (g * mask,)
    return out


def affine(x, w, b):
    """Batched x @ w + b for x[n,d], w[d,m], b[m]."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise DimensionError(
            f"affine: expected 2-D x, 2-D w, 1-D b, got {x.data.shape}, {w.data.shape}, {b.data.shape}")
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"affine: nonconforming shapes {x.data.shape}, {w.data.shape}, {b.data.shape}")
    out = Tensor(x.data @ w.data + b.data, (x, w, b))

    def backprop(g):
        return g @ w.data.T, x.data.T @ g, g.sum(axis=0)

    out._backprop = backprop
    return out


# ---------------------------------------------------------------------------
# softmax-family losses


def log_softmax(logits):
    """Row-wise log softmax with max subtraction; rows must be finite."""
    logits = _as_tensor(logits)
    if logits.data.ndim != 2 or logits.data.shape[1] < 2:
        raise DimensionError(f"log_softmax: expected [n,M] with M>=2, got {logits.data.shape}")
    if not np.isfinite(logits.data).all():
        raise NumericError("log_softmax: non-finite logits")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = Tensor(shifted - lse, (logits,))
    probs = np.exp(out.data)

    def backprop(g):
        return (g - probs * g.sum(axis=1, keepdims=True),)

    out._backprop = backprop
    return out


def nll_mean(log_probs, labels):
    """Mean negative log probability of the labelled class per row."""
    log_probs = _as_tensor(log_probs)
    n, m = log_probs.data.shape
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (n,):
        raise DimensionError(f"nll_mean: {n} rows but labels shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= m):
        raise IndexError(f"nll_mean: label out of range [0,{m})")
    rows = np.arange(n)
    out = Tensor(-log_probs.data[rows, y].mean(), (log_probs,))

    def backprop(g):
        d = np.zeros_like(log_probs.data)
        d[rows, y] = -1.0 / n
        return (d * g,)

    out._backprop = backprop
    return out


def cross_entropy(logits, labels):
    """Mean cross entropy between softmax(logits) rows and integer labels."""
    return nll_mean(log_softmax(logits), labels)


def kl_from_log_probs(lp, lq):
    # mean over rows of sum_j p_j (lp_j - lq_j), p = exp(lp)
    lp, lq = _as_tensor(lp), _as_tensor(lq)
    if lp.data.shape != lq.data.shape:
        raise DimensionError(f"kl: shapes {lp.data.shape} vs {lq.data.shape}")
    n = lp.data.shape[0]
    p = np.exp(lp.data)
    diff = lp.data - lq.data
    out = Tensor((p * diff).sum(axis=1).mean(), (lp, lq))

    def backprop(g):
        gp = g * (p * diff + p) / n
        gq = -g * p / n
        return gp, gq

    out._backprop = backprop
    return out


def kl_divergence(p_logits, q_logits):
    """Mean row-wise KL(softmax(p_logits) || softmax(q_logits)).

    Differentiable with respect to both arguments; zero exactly when the
    rows coincide and never below -1e-12 otherwise.
    """
    p_logits, q_logits = _as_tensor(p_logits), _as_tensor(q_logits)
    if p_logits.data.shape != q_logits.data.shape:
        raise DimensionError(
            f"kl_divergence: shapes {p_logits.data.shape} vs {q_logits.data.shape}")
    return kl_from_log_probs(log_softmax(p_logits), log_softmax(q_logits))


# ---------------------------------------------------------------------------
# max-distance unit


def _tie_sign(diffs):
    # sign convention at an exact zero difference: +1
    return np.where(diffs >= 0.0, 1.0, -1.0)


def linf_unit(x, w, b):
    """max_k |x_k - w_k| + b for vectors x, w and scalar b.

    The subgradient routes through the first maximizing coordinate only.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    b = _as_tensor(b)
    if x.data.shape != w.data.shape or x.data.ndim != 1:
        raise DimensionError(f"linf_unit: shapes {x.data.shape} vs {w.data.shape}")
    diffs = x.data - w.data
    absd = np.abs(diffs)
    k = int(np.argmax(absd))
    out = Tensor(absd[k] + float(b.data), (x, w, b))
    s = float(_tie_sign(diffs[k : k + 1])[0])

    def backprop(g):
        gx = np.zeros_like(x.data)
        gx[k] = s * g
        return gx, -gx, np.asarray(g, dtype=np.float64).reshape(b.data.shape)

    out._backprop = backprop
    return out


def linf_layer(x, w, b):
    """Batched layer of max-distance units.

    x[n,d], w[m,d], b[m] -> out[n,m] with out[i,k] = max_j |x[i,j]-w[k,j]| + b[k].
    """
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise DimensionError(
            f"linf_layer: expected 2-D x, 2-D w, 1-D b, got {x.data.shape}, {w.data.shape}, {b.data.shape}")
    if x.data.shape[1] != w.data.shape[1] or w.data.shape[0] != b.data.shape[0]:
        raise DimensionError(
            f"linf_layer: nonconforming shapes {x.data.shape}, {w.data.shape}, {b.data.shape}")
    diffs = x.data[:, None, :] - w.data[None, :, :]  # [n,m,d]
    absd = np.abs(diffs)
    kstar = absd.argmax(axis=2)  # first maximizer per (i,k)
    n, m = kstar.shape
    ii, kk = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    maxval = absd[ii, kk, kstar]
    signs = _tie_sign(diffs[ii, kk, kstar])
    out = Tensor(maxval + b.data, (x, w, b))

    def backprop(g):
        contrib = g * signs  # [n,m]
        gx = np.zeros_like(x.data)
        np.add.at(gx, (ii.ravel(), kstar.ravel()), contrib.ravel())
        gw = np.zeros_like(w.data)
        np.add.at(gw, (kk.ravel(), kstar.ravel()), -contrib.ravel())
        return gx, gw, g.sum(axis=0)

    out._backprop = backprop
    return out
