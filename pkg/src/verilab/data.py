"""Synthetic dataset generation, flawed training-set variants, and I/O.

Three generators cover the toy tasks: gaussian class blobs, a 1-D
piecewise label distribution on [0,1] whose positive rate alternates
between 1/4 and 1 on cells of width eps, and a noiseless circular
decision rule on the unit square.

The four training-set variants: quality (identity), noise (inputs
replaced by uniform draws over the clamp range), mislabeling (labels
replaced by uniform class draws), poisoning (inputs nudged by a
targeted 100-step attack against a reference model, labels kept).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import attacks, presets
from .errors import ConfigError, ParseError

DATASET_MAGIC = b"VLDS"
DATASET_VERSION = 1

VARIANTS = ("quality", "noise", "mislabeling", "poisoning")


@dataclass
class Dataset:
    inputs: np.ndarray  # float64 [n,d]
    labels: np.ndarray  # int64 [n]
    num_classes: int
    clamp: tuple[float, float] | None = (0.0, 1.0)

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.shape != (self.inputs.shape[0],):
            raise ConfigError(
                f"inputs {self.inputs.shape} and labels {self.labels.shape} do not line up")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigError(f"labels out of range [0,{self.num_classes})")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic dataset; a pure function of its fields."""

    kind: str  # gaussians | d1_piecewise | circle_oracle
    n: int
    seed: int = 0
    means: tuple | None = None  # gaussians: one mean vector per class
    cov: float | tuple | None = None  # isotropic sigma^2 per class (scalar → shared)
    eps: float | None = None  # d1_piecewise cell width
    center: tuple = (0.5, 0.5)
    radius: float = 0.4
    clamp: tuple | None | str = "default"

    def __post_init__(self):
        if self.kind not in ("gaussians", "d1_piecewise", "circle_oracle"):
            raise ConfigError(f"unknown synthetic kind {self.kind!r}")
        if self.n < 0:
            raise ConfigError("sample count must be >= 0")
        if self.kind == "gaussians":
            if not self.means or len(self.means) < 2:
                raise ConfigError("gaussians need one mean per class (>=2 classes)")
            sigmas = self._sigmas()
            if any(s <= 0 for s in sigmas):
                raise ConfigError("gaussian variances must be positive")
        if self.kind == "d1_piecewise":
            if self.eps is None or not 0 < self.eps <= 0.5:
                raise ConfigError("d1_piecewise needs 0 < eps <= 1/2")
        if self.kind == "circle_oracle" and self.radius <= 0:
            raise ConfigError("circle radius must be positive")

    def _sigmas(self):
        m = len(self.means) if self.means else 0
        if self.cov is None:
            return [1.0] * m
        if np.isscalar(self.cov):
            return [float(self.cov)] * m
        return [float(c) for c in self.cov]


def piecewise_cell_index(x, eps):
    """Cell index of x in the width-eps tiling of [0,1].

    Cell boundaries belong to the cell on their left; 0 belongs to cell 0.
    """
    x = np.asarray(x, dtype=np.float64)
    ncells = int(round(1.0 / eps))
    j = np.floor(x / eps).astype(np.int64)
    on_boundary = (j >= 1) & (x == j * eps)
    j = j - on_boundary
    return np.clip(j, 0, ncells - 1)


def piecewise_positive_rate(x, eps):
    """Probability of the positive class at x: 1/4 on even cells, 1 on odd."""
    j = piecewise_cell_index(x, eps)
    return np.where(j % 2 == 0, 0.25, 1.0)


def circle_labels(X, center=(0.5, 0.5), radius=0.4):
    """1 inside the circle, 0 outside."""
    d = np.linalg.norm(np.asarray(X, dtype=np.float64) - np.asarray(center), axis=1)
    return (d < radius).astype(np.int64)


def gen_synthetic(spec):
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussians":
        means = np.asarray(spec.means, dtype=np.float64)
        m, d = means.shape
        sigmas = np.asarray(spec._sigmas())
        y = rng.integers(0, m, size=spec.n)
        X = means[y] + rng.standard_normal((spec.n, d)) * np.sqrt(sigmas[y])[:, None]
        clamp = None if spec.clamp == "default" else spec.clamp
        return Dataset(X, y, num_classes=m, clamp=clamp)
    if spec.kind == "d1_piecewise":
        x = rng.random(spec.n)
        u = rng.random(spec.n)
        y = (u < piecewise_positive_rate(x, spec.eps)).astype(np.int64)
        clamp = (0.0, 1.0) if spec.clamp == "default" else spec.clamp
        return Dataset(x[:, None], y, num_classes=2, clamp=clamp)
    X = rng.random((spec.n, 2))
    y = circle_labels(X, spec.center, spec.radius)
    clamp = (0.0, 1.0) if spec.clamp == "default" else spec.clamp
    return Dataset(X, y, num_classes=2, clamp=clamp)


# ---------------------------------------------------------------------------
# flawed training-set constructions


def make_quality(dataset):
    """The identity variant, named so configs can request all four uniformly."""
    return Dataset(dataset.inputs.copy(), dataset.labels.copy(),
                   dataset.num_classes, dataset.clamp)


def make_noise(dataset, seed):
    """Replace every input with uniform noise over the clamp range."""
    if dataset.clamp is None:
        raise ConfigError("noise variant needs a clamped dataset (no uniform "
                          "distribution on an unbounded range)")
    rng = np.random.default_rng(seed)
    lo, hi = dataset.clamp
    X = rng.uniform(lo, hi, size=dataset.inputs.shape)
    return Dataset(X, dataset.labels.copy(), dataset.num_classes, dataset.clamp)


def make_mislabeling(dataset, seed):
    """Replace every label with a uniform class draw; inputs untouched."""
    if dataset.num_classes < 2:
        raise ConfigError("mislabeling needs at least 2 classes")
    rng = np.random.default_rng(seed)
    y = rng.integers(0, dataset.num_classes, size=len(dataset))
    return Dataset(dataset.inputs.copy(), y, dataset.num_classes, dataset.clamp)


def cyclic_shift_permutation(num_classes):
    return tuple((c + 1) % num_classes for c in range(num_classes))


def make_poisoning(dataset, reference_spec, reference_params, threat,
                   permutation_seed=None, steps=presets.POISON_STEPS,
                   step_size=None, permutation=None):
    """Perturb inputs toward a deterministic wrong class; labels stay correct.

    Each input is pushed by ``steps`` projected-gradient iterations (step
    eps/5 by default) to be classified as perm(label) by the reference
    model.  The permutation defaults to the cyclic label shift; passing
    ``permutation_seed`` draws a random derangement instead.
    """
    m = dataset.num_classes
    if permutation is None:
        if permutation_seed is None:
            permutation = cyclic_shift_permutation(m)
        else:
            rng = np.random.default_rng(permutation_seed)
            while True:
                p = rng.permutation(m)
                if (p != np.arange(m)).all():
                    permutation = tuple(int(v) for v in p)
                    break
    permutation = tuple(int(v) for v in permutation)
    if sorted(permutation) != list(range(m)):
        raise ConfigError(f"{permutation} is not a permutation of [0,{m})")
    if any(permutation[c] == c for c in range(m)):
        raise ConfigError(f"permutation {permutation} maps a class to itself")
    if step_size is None:
        step_size = threat.eps * presets.POISON_STEP_FRACTION
    targets = np.asarray([permutation[int(c)] for c in dataset.labels], dtype=np.int64)
    if len(dataset) == 0 or threat.eps == 0.0:
        X_adv = dataset.inputs.copy()
    else:
        X_adv = attacks.pgd_batch(reference_spec, reference_params, dataset.inputs,
                                  dataset.labels, threat, "adversarial_targeted",
                                  steps, step_size, rng=None, target=targets)
    return Dataset(X_adv, dataset.labels.copy(), m, dataset.clamp)


def make_variant(dataset, variant, seed=0, **poison_kwargs):
    if variant == "quality":
        return make_quality(dataset)
    if variant == "noise":
        return make_noise(dataset, seed)
    if variant == "mislabeling":
        return make_mislabeling(dataset, seed)
    if variant == "poisoning":
        return make_poisoning(dataset, **poison_kwargs)
    raise ConfigError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# binary format: magic, version, u32 n/d/M, clamp flag + range, inputs, labels


def save_dataset(dataset, path):
    n, d = dataset.inputs.shape
    flag = 0 if dataset.clamp is None else 1
    lo, hi = dataset.clamp if dataset.clamp is not None else (0.0, 0.0)
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(bytes([DATASET_VERSION]))
        fh.write(struct.pack("<IIII", n, d, dataset.num_classes, flag))
        fh.write(struct.pack("<dd", lo, hi))
        fh.write(np.ascontiguousarray(dataset.inputs, dtype="<f8").tobytes())
        fh.write(dataset.labels.astype("<u4").tobytes())


def load_dataset(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != DATASET_MAGIC:
        raise ParseError(f"bad magic {blob[:4]!r}, expected {DATASET_MAGIC!r}", offset=0)
    if len(blob) < 5 or blob[4] != DATASET_VERSION:
        raise ParseError("unsupported dataset version", offset=4)
    header_end = 5 + 16 + 16
    if len(blob) < header_end:
        raise ParseError("truncated header", offset=len(blob))
    n, d, m, flag = struct.unpack("<IIII", blob[5:21])
    lo, hi = struct.unpack("<dd", blob[21:37])
    clamp = (lo, hi) if flag else None
    inputs_end = header_end + n * d * 8
    if len(blob) < inputs_end:
        raise ParseError("truncated input block", offset=len(blob))
    labels_end = inputs_end + n * 4
    if len(blob) != labels_end:
        raise ParseError(
            f"expected {labels_end} bytes total, found {len(blob)}",
            offset=min(len(blob), labels_end))
    X = np.frombuffer(blob[header_end:inputs_end], dtype="<f8").reshape(n, d)
    y = np.frombuffer(blob[inputs_end:labels_end], dtype="<u4").astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= m):
        bad = int(np.flatnonzero((y < 0) | (y >= m))[0])
        raise ParseError(f"label {y[bad]} out of range [0,{m})", offset=inputs_end + bad * 4)
    try:
        return Dataset(X.astype(np.float64), y, num_classes=m, clamp=clamp)
    except ConfigError as exc:
        raise ParseError(str(exc), offset=header_end) from exc


def load_dataset_text(path, num_classes=None, clamp=None):
    """One example per line: ``label,feat1,feat2,...``."""
    rows = []
    labels = []
    offset = 0
    with open(path, "rb") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped:
                parts = stripped.split(b",")
                try:
                    labels.append(int(parts[0]))
                    rows.append([float(p) for p in parts[1:]])
                except ValueError as exc:
                    raise ParseError(f"bad line {stripped!r}: {exc}", offset=offset) from exc
                if len(rows) > 1 and len(rows[-1]) != len(rows[0]):
                    raise ParseError("inconsistent feature count", offset=offset)
            offset += len(line)
    if not rows:
        raise ParseError("no examples in text dataset", offset=0)
    y = np.asarray(labels, dtype=np.int64)
    m = num_classes if num_classes is not None else int(y.max()) + 1
    return Dataset(np.asarray(rows, dtype=np.float64), y, num_classes=m, clamp=clamp)
