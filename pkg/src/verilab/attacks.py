"""Projected-gradient perturbation search plus an exhaustive oracle.

Four objectives share one PGD loop:

  hypocritical            descend CE toward the true label; success = now correct
  adversarial_untargeted  ascend CE; success = now wrong
  adversarial_targeted    descend CE toward a target class; success = predicts target
  stability               ascend KL from the clean output distribution;
                          success = prediction changed

Evaluation attacks default to a zero start plus (restarts-1) random
starts; training attacks use a random start.  Every random draw comes
from a stream seeded by (seed, example index, restart), so results do
not depend on worker count or batch composition.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import models, presets
from .errors import ConfigError, NumericError, ResourceError

OBJECTIVES = ("hypocritical", "adversarial_untargeted", "adversarial_targeted", "stability")

GRID_BUDGET = 10**6


@dataclass(frozen=True)
class ThreatModel:
    """Perturbation budget: norm ball of radius eps inside a clamp box.

    ``clamp=None`` means the input space is unbounded.
    """

    norm: str
    eps: float
    clamp: tuple[float, float] | None = (0.0, 1.0)

    def __post_init__(self):
        if self.norm not in ("linf", "l2"):
            raise ConfigError(f"unknown norm {self.norm!r}")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")
        if self.clamp is not None:
            lo, hi = self.clamp
            if not lo < hi:
                raise ConfigError(f"clamp range {self.clamp} is empty")


@dataclass(frozen=True)
class AttackConfig:
    objective: str
    steps: int = presets.EVAL_ATTACK_STEPS
    step_size: float | None = None  # None -> eps/4
    restarts: int = 1
    random_start: bool = False
    seed: int = 0
    target: int | None = None

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ConfigError("step_size must be > 0")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.objective == "adversarial_targeted" and self.target is None:
            raise ConfigError("targeted objective needs a target class")


def objective_success(objective, pred, y, pred_clean=None, target=None):
    """Success predicate of each objective, vectorized over predictions."""
    pred = np.asarray(pred)
    if objective == "hypocritical":
        return pred == y
    if objective == "adversarial_untargeted":
        return pred != y
    if objective == "adversarial_targeted":
        return pred == target
    return pred != pred_clean  # stability


def _clamp(x, clamp):
    if clamp is None:
        return x
    return np.clip(x, clamp[0], clamp[1])


def _project_delta(delta, threat):
    if threat.norm == "linf":
        return np.clip(delta, -threat.eps, threat.eps)
    nrm = float(np.linalg.norm(delta))
    if nrm > threat.eps:
        return delta * (threat.eps / nrm)
    return delta


def _random_delta(rng, d, threat):
    if threat.norm == "linf":
        return rng.uniform(-threat.eps, threat.eps, size=d)
    v = rng.standard_normal(d)
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        return np.zeros(d)
    radius = threat.eps * rng.random() ** (1.0 / d)
    return v * (radius / nrm)


def _loss_and_grad(spec, params, x_row, objective, y, target, clean_logits):
    xt = ad.Tensor(x_row[None, :])
    logits = models.forward_logits(spec, params, xt)
    if objective == "hypocritical":
        loss = ad.cross_entropy(logits, [y])
    elif objective == "adversarial_untargeted":
        loss = ad.cross_entropy(logits, [y])
    elif objective == "adversarial_targeted":
        loss = ad.cross_entropy(logits, [target])
    else:
        loss = ad.kl_from_log_probs(ad.Tensor(clean_logits), ad.log_softmax(logits))
    (g,) = ad.backward(loss, [xt])
    g = g[0]
    if not np.isfinite(g).all():
        raise NumericError(f"non-finite gradient during {objective} attack")
    return g, logits.data[0]


def _ascend(objective):
    return objective in ("adversarial_untargeted", "stability")


def pgd(spec, params, x, y, threat, cfg, example_index=0):
    """Attack a single example; returns (x_adv, success).

    The first successful iterate across restarts is returned; otherwise
    the final iterate of the last restart.
    """
    x = np.asarray(x, dtype=np.float64)
    step = cfg.step_size if cfg.step_size is not None else presets.default_step_size(threat.eps)
    pred_clean = None
    clean_log_probs = None
    if cfg.objective == "stability":
        clean_logits = models.forward_logits(spec, params, x[None, :]).data
        pred_clean = int(models.predict(clean_logits)[0])
        shifted = clean_logits - clean_logits.max(axis=1, keepdims=True)
        clean_log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def succeeded(x_cur):
        logits = models.forward_logits(spec, params, x_cur[None, :]).data
        pred = int(models.predict(logits)[0])
        return bool(objective_success(cfg.objective, pred, y, pred_clean, cfg.target))

    sign = 1.0 if _ascend(cfg.objective) else -1.0
    x_cur = x
    for restart in range(cfg.restarts):
        rng = np.random.default_rng((cfg.seed, example_index, restart))
        if cfg.random_start or restart > 0:
            delta = _project_delta(_random_delta(rng, x.size, threat), threat)
            x_cur = _clamp(x + delta, threat.clamp)
        else:
            x_cur = x.copy()
        if succeeded(x_cur):
            return x_cur, True
        for _ in range(cfg.steps):
            g, _ = _loss_and_grad(spec, params, x_cur, cfg.objective, y, cfg.target,
                                  clean_log_probs)
            if threat.norm == "linf":
                move = np.sign(g) * step
            else:
                nrm = float(np.linalg.norm(g))
                move = g * (step / nrm) if nrm > 0 else np.zeros_like(g)
            x_cur = x_cur + sign * move
            x_cur = _clamp(x + _project_delta(x_cur - x, threat), threat.clamp)
            if succeeded(x_cur):
                return x_cur, True
    return x_cur, False


def pgd_batch(spec, params, X, labels, threat, objective, steps, step_size,
              rng=None, target=None):
    """Fixed-step batched PGD without early exit (training / poisoning).

    ``labels`` is the per-example CE target for the CE objectives and the
    true labels for the stability objective (unused there).  A random
    start is drawn from ``rng`` when given, else the start is zero.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    clean_log_probs = None
    if objective == "stability":
        clean_logits = models.forward_logits(spec, params, X).data
        shifted = clean_logits - clean_logits.max(axis=1, keepdims=True)
        clean_log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    if objective == "adversarial_targeted":
        t = np.asarray(target, dtype=np.int64)
        ce_labels = np.full(n, int(t), dtype=np.int64) if t.ndim == 0 else t
    else:
        ce_labels = np.asarray(labels, dtype=np.int64)

    if rng is not None:
        if threat.norm == "linf":
            delta = rng.uniform(-threat.eps, threat.eps, size=(n, d))
        else:
            v = rng.standard_normal((n, d))
            nrm = np.linalg.norm(v, axis=1, keepdims=True)
            nrm[nrm == 0] = 1.0
            radius = threat.eps * rng.random((n, 1)) ** (1.0 / d)
            delta = v / nrm * radius
        X_cur = _clamp(X + delta, threat.clamp)
    else:
        X_cur = X.copy()

    sign = 1.0 if _ascend(objective) else -1.0
    for _ in range(steps):
        xt = ad.Tensor(X_cur)
        logits = models.forward_logits(spec, params, xt)
        if objective == "stability":
            # per-row sums keep row gradients independent of the batch
            loss = ad.scale(ad.kl_from_log_probs(ad.Tensor(clean_log_probs),
                                                 ad.log_softmax(logits)), float(n))
        else:
            loss = ad.scale(ad.cross_entropy(logits, ce_labels), float(n))
        (g,) = ad.backward(loss, [xt])
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient during batched {objective} attack")
        if threat.norm == "linf":
            move = np.sign(g) * step_size
        else:
            nrm = np.linalg.norm(g, axis=1, keepdims=True)
            move = np.where(nrm > 0, g * (step_size / np.where(nrm == 0, 1.0, nrm)), 0.0)
        X_cur = X_cur + sign * move
        delta = X_cur - X
        if threat.norm == "linf":
            delta = np.clip(delta, -threat.eps, threat.eps)
        else:
            nrm = np.linalg.norm(delta, axis=1, keepdims=True)
            factor = np.where(nrm > threat.eps, threat.eps / np.where(nrm == 0, 1.0, nrm), 1.0)
            delta = delta * factor
        X_cur = _clamp(X + delta, threat.clamp)
    return X_cur


# ---------------------------------------------------------------------------
# exhaustive oracle


def _ball_grid(x, threat, grid_points_per_dim):
    d = x.size
    if grid_points_per_dim**d > GRID_BUDGET:
        raise ResourceError(
            f"grid {grid_points_per_dim}^{d} exceeds the {GRID_BUDGET} point budget")
    lo = x - threat.eps
    hi = x + threat.eps
    if threat.clamp is not None:
        lo = np.maximum(lo, threat.clamp[0])
        hi = np.minimum(hi, threat.clamp[1])
    axes = [np.linspace(lo[i], hi[i], grid_points_per_dim) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    pts = np.concatenate([pts, x[None, :]], axis=0)  # ball center always present
    if threat.norm == "l2":
        keep = np.linalg.norm(pts - x, axis=1) <= threat.eps + 1e-12
        pts = pts[keep]
    return pts


def brute_force_search(predict_fn, x, y, threat, objective, grid_points_per_dim,
                       target=None, batch=65536):
    """Exhaustively test the objective over a grid of the feasible ball."""
    x = np.asarray(x, dtype=np.float64)
    pred_clean = int(np.asarray(predict_fn(x[None, :]))[0])
    pts = _ball_grid(x, threat, grid_points_per_dim)
    for start in range(0, pts.shape[0], batch):
        chunk = pts[start : start + batch]
        preds = np.asarray(predict_fn(chunk))
        if objective_success(objective, preds, y, pred_clean, target).any():
            return True
    return False


def brute_force_attack(spec, params, x, y, threat, objective, grid_points_per_dim,
                       target=None):
    """Grid oracle against a stored model; success is monotone in grid density."""

    def predict_fn(batch):
        return models.predict(models.forward_logits(spec, params, batch).data)

    return brute_force_search(predict_fn, x, y, threat, objective,
                              grid_points_per_dim, target=target)


# ---------------------------------------------------------------------------
# batch driver


@dataclass
class AttackLedger:
    """Per-example attack outcome for one objective."""

    success: np.ndarray  # bool [n]
    points: np.ndarray  # float64 [n,d]

    @property
    def success_rate(self):
        return float(self.success.mean()) if self.success.size else float("nan")


def batch_attack(spec, params, dataset, threat, cfg, workers=1, indices=None):
    """Map pgd over (a subset of) a dataset.

    RNG streams are keyed by the absolute example index, so the result
    is identical for any worker count and any index subset.
    """
    X = dataset.inputs
    y = dataset.labels
    idx = np.arange(len(y)) if indices is None else np.asarray(indices, dtype=np.int64)
    n = idx.size
    success = np.zeros(n, dtype=bool)
    points = np.empty((n, X.shape[1]), dtype=np.float64)

    def run(slot):
        i = int(idx[slot])
        pt, ok = pgd(spec, params, X[i], int(y[i]), threat, cfg, example_index=i)
        return slot, pt, ok

    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for slot, pt, ok in pool.map(run, range(n)):
                points[slot] = pt
                success[slot] = ok
    else:
        for slot in range(n):
            _, pt, ok = run(slot)
            points[slot] = pt
            success[slot] = ok
    return AttackLedger(success=success, points=points)
