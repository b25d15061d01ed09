"""Classifier definitions: plain MLPs and stacked max-distance nets.

Both kinds are described by a ModelSpec (kind + layer widths) and a flat
float64 parameter vector (ModelParams).  Forward passes build an
autodiff graph, so the same code path serves prediction, attacks and
training; callers that only need values read ``.data``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ContractError, DimensionError, ParseError

MLP = "mlp"
LINF_NET = "linf_dist_net"

MODEL_MAGIC = "verilab-model v1"


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    layer_widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if self.kind not in (MLP, LINF_NET):
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if any(w <= 0 for w in widths):
            raise ConfigError(f"layer widths must be positive, got {widths}")
        if widths[-1] < 2:
            raise ConfigError("need at least 2 output classes")
        if self.kind == MLP and len(widths) < 3:
            raise ConfigError("mlp needs at least one hidden layer")
        if self.kind == LINF_NET and len(widths) < 2:
            raise ConfigError("distance net needs at least one layer")

    @property
    def input_dim(self):
        return self.layer_widths[0]

    @property
    def num_classes(self):
        return self.layer_widths[-1]


@dataclass
class ModelParams:
    """All weights as one flat float64 vector, partitioned per layer."""

    flat: np.ndarray

    def copy(self):
        return ModelParams(self.flat.copy())


def layer_shapes(spec):
    """Per-layer (weight shape, bias shape) in storage order."""
    shapes = []
    widths = spec.layer_widths
    for din, dout in zip(widths[:-1], widths[1:]):
        if spec.kind == MLP:
            shapes.append(((din, dout), (dout,)))
        else:
            # one distance vector per unit, unit-major
            shapes.append(((dout, din), (dout,)))
    return shapes


def num_params(spec):
    return sum(int(np.prod(ws)) + bs[0] for ws, bs in layer_shapes(spec))


def init_params(spec, seed, init_range=(0.0, 1.0)):
    """Deterministic initialization.

    MLP weights are zero-mean gaussian scaled by sqrt(2/fan_in) with zero
    biases; distance-net anchor vectors are uniform over ``init_range``
    (any finite choice keeps the net 1-Lipschitz).
    """
    rng = np.random.default_rng(seed)
    chunks = []
    for wshape, bshape in layer_shapes(spec):
        if spec.kind == MLP:
            fan_in = wshape[0]
            w = rng.standard_normal(wshape) * np.sqrt(2.0 / fan_in)
        else:
            lo, hi = init_range
            w = rng.uniform(lo, hi, size=wshape)
        chunks.append(w.ravel())
        chunks.append(np.zeros(bshape))
    return ModelParams(np.concatenate(chunks))


def param_tensors(spec, params):
    """Wrap the flat vector as per-layer (W, b) leaf tensors (views)."""
    if params.flat.size != num_params(spec):
        raise DimensionError(
            f"parameter vector has {params.flat.size} entries, spec needs {num_params(spec)}")
    tensors = []
    off = 0
    for wshape, bshape in layer_shapes(spec):
        wn = int(np.prod(wshape))
        w = ad.Tensor(params.flat[off : off + wn].reshape(wshape))
        off += wn
        b = ad.Tensor(params.flat[off : off + bshape[0]])
        off += bshape[0]
        tensors.append((w, b))
    return tensors


def flatten_grads(spec, tensors):
    """Concatenate per-layer leaf gradients back into flat-vector order."""
    chunks = []
    for w, b in tensors:
        chunks.append((w.grad if w.grad is not None else np.zeros_like(w.data)).ravel())
        chunks.append(b.grad if b.grad is not None else np.zeros_like(b.data))
    return np.concatenate(chunks)


def forward_from_tensors(spec, tensors, x):
    """Forward pass reusing existing parameter leaves (for training)."""
    x = x if isinstance(x, ad.Tensor) else ad.Tensor(x)
    if x.data.ndim != 2 or x.data.shape[1] != spec.input_dim:
        raise DimensionError(
            f"input batch shape {x.data.shape} does not match input width {spec.input_dim}")
    h = x
    if spec.kind == MLP:
        for i, (w, b) in enumerate(tensors):
            h = ad.affine(h, w, b)
            if i < len(tensors) - 1:
                h = ad.relu(h)
        return h
    for w, b in tensors:
        h = ad.linf_layer(h, w, b)
    return ad.scale(h, -1.0)  # logits are negated final-layer distances


def forward_logits(spec, params, x_batch):
    """Logits tensor for a batch; differentiable w.r.t. inputs and params."""
    return forward_from_tensors(spec, param_tensors(spec, params), x_batch)


def predict(logits):
    """Row-wise argmax with ties broken by lowest index."""
    arr = logits.data if isinstance(logits, ad.Tensor) else np.asarray(logits)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr.argmax(axis=1)


def margin(g, y):
    """max_i g_i - g_y over all classes; nonnegative, zero iff y attains the max."""
    arr = g.data if isinstance(g, ad.Tensor) else np.asarray(g, dtype=np.float64)
    y = int(y)
    if y < 0 or y >= arr.shape[-1]:
        raise IndexError(f"class {y} out of range [0,{arr.shape[-1]})")
    return float(arr.max() - arr[y])


def margins_batch(logits, labels):
    arr = logits.data if isinstance(logits, ad.Tensor) else np.asarray(logits)
    y = np.asarray(labels, dtype=np.int64)
    return arr.max(axis=1) - arr[np.arange(arr.shape[0]), y]


# ---------------------------------------------------------------------------
# model file format: two header lines then raw little-endian float64 block


def save_model(spec, params, path):
    desc = f"{spec.kind} {','.join(str(w) for w in spec.layer_widths)}"
    with open(path, "wb") as fh:
        fh.write(f"{MODEL_MAGIC}\n{desc}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(params.flat, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    nl1 = blob.find(b"\n")
    if nl1 < 0 or blob[:nl1].decode("ascii", "replace") != MODEL_MAGIC:
        raise ParseError(f"not a model file (expected {MODEL_MAGIC!r} header)", offset=0)
    nl2 = blob.find(b"\n", nl1 + 1)
    if nl2 < 0:
        raise ParseError("missing model descriptor line", offset=nl1 + 1)
    desc = blob[nl1 + 1 : nl2].decode("ascii", "replace").split()
    if len(desc) != 2:
        raise ParseError(f"bad descriptor line {desc!r}", offset=nl1 + 1)
    kind, widths_s = desc
    try:
        widths = tuple(int(w) for w in widths_s.split(","))
        spec = ModelSpec(kind, widths)
    except (ValueError, ConfigError) as exc:
        raise ParseError(f"bad model descriptor: {exc}", offset=nl1 + 1) from exc
    body = blob[nl2 + 1 :]
    want = num_params(spec) * 8
    if len(body) != want:
        raise ParseError(
            f"parameter block has {len(body)} bytes, expected {want}", offset=nl2 + 1)
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if not np.isfinite(flat).all():
        raise ParseError("non-finite parameter values", offset=nl2 + 1)
    return spec, ModelParams(flat)


def require_kind(spec, kind, what):
    if spec.kind != kind:
        raise ContractError(f"{what} requires a {kind} model, got {spec.kind}")
