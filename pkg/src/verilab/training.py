"""Training procedures: standard, adversarial (worst-case CE), and the two
KL-regularized trade-off methods.

Per batch the four methods minimize

  standard   CE(p(x), y)
  pgd_at     CE(p(x_adv), y)            x_adv  ascends CE inside the ball
  trades     CE(p(x), y) + lambda * KL(p(x) || p(x_sta))
                                        x_sta  ascends KL(p(x) || p(x'))
  thrm       CE(p(x), y) + lambda * KL(p(x) || p(x_hyp))
                                        x_hyp  descends CE inside the ball

Inner points are recomputed every batch with fresh random starts and
treated as constants: gradients never flow through the attack
trajectory.  At lambda=0 the KL term is skipped outright and at eps=0
the inner point is the clean input, so both collapses reproduce the
standard loss bit for bit.

The optimizer is SGD with momentum; weight decay is added to the
gradient.  Everything is seeded, so a config and seed pin the final
parameters exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import attacks, models, presets, risk
from .errors import ConfigError, NumericError

METHODS = ("standard", "pgd_at", "trades", "thrm")

_INNER_OBJECTIVE = {
    "pgd_at": "adversarial_untargeted",
    "trades": "stability",
    "thrm": "hypocritical",
}


@dataclass(frozen=True)
class TrainConfig:
    method: str = "standard"
    epochs: int = 10
    batch_size: int = 64
    lr: float = 0.1
    momentum: float = presets.MOMENTUM
    weight_decay: float = presets.WEIGHT_DECAY
    lr_decay_epochs: tuple[int, ...] = ()
    lr_decay_factor: float = presets.LR_DECAY_FACTOR
    lam: float = 1.0
    threat: attacks.ThreatModel | None = None
    attack: attacks.AttackConfig | None = None
    seed: int = 0
    eval_every: int = 0  # 0 = no in-training attack estimates

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown training method {self.method!r}")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.method != "standard" and self.threat is None:
            raise ConfigError(f"{self.method} needs a threat model")


def _inner_attack_config(cfg):
    if cfg.attack is not None:
        return cfg.attack
    return attacks.AttackConfig(
        objective=_INNER_OBJECTIVE[cfg.method],
        steps=presets.TRAIN_ATTACK_STEPS,
        step_size=None,
        random_start=True,
        seed=cfg.seed,
    )


def inner_points(spec, params, X, y, cfg, rng):
    """The per-batch attack points for the robust methods."""
    acfg = _inner_attack_config(cfg)
    step = acfg.step_size if acfg.step_size is not None else \
        presets.default_step_size(cfg.threat.eps)
    return attacks.pgd_batch(spec, params, X, y, cfg.threat,
                             _INNER_OBJECTIVE[cfg.method], acfg.steps, step,
                             rng=rng if acfg.random_start else None)


def batch_loss(spec, params, X, y, cfg, attack_points=None):
    """Loss tensor for one batch plus the parameter leaves.

    ``attack_points`` are the frozen inner-attack inputs for the robust
    methods (ignored for standard training).
    """
    tensors = models.param_tensors(spec, params)
    y = np.asarray(y, dtype=np.int64)
    if cfg.method == "standard":
        loss = ad.cross_entropy(models.forward_from_tensors(spec, tensors, X), y)
    elif cfg.method == "pgd_at":
        loss = ad.cross_entropy(models.forward_from_tensors(spec, tensors, attack_points), y)
    else:
        clean_logits = models.forward_from_tensors(spec, tensors, X)
        loss = ad.cross_entropy(clean_logits, y)
        if cfg.lam != 0.0:
            adv_logits = models.forward_from_tensors(spec, tensors, attack_points)
            loss = ad.add(loss, ad.scale(ad.kl_divergence(clean_logits, adv_logits), cfg.lam))
    return loss, tensors


@dataclass
class EpochMetrics:
    epoch: int
    mean_loss: float
    train_acc: float
    lr: float
    extra: dict = field(default_factory=dict)

    def format_line(self):
        parts = [f"epoch={self.epoch}", f"loss={self.mean_loss!r}",
                 f"acc={self.train_acc!r}", f"lr={self.lr!r}"]
        parts += [f"{k}={v!r}" for k, v in sorted(self.extra.items())]
        return " ".join(parts)


def _quick_attack_estimates(spec, params, dataset, cfg):
    """Cheap 5-step success-rate probes recorded in the metrics log."""
    suite = {}
    for name, objective in (("hyp5", "hypocritical"), ("adv5", "adversarial_untargeted")):
        acfg = attacks.AttackConfig(objective=objective, steps=5, seed=cfg.seed)
        led = attacks.batch_attack(spec, params, dataset, cfg.threat, acfg)
        suite[name] = round(led.success_rate, 4)
    return suite


def train(spec, init_params, dataset, cfg):
    """Run the configured method; returns (final params, per-epoch metrics)."""
    if len(dataset) == 0:
        raise ConfigError("cannot train on an empty dataset")
    if dataset.dim != spec.input_dim or dataset.num_classes != spec.num_classes:
        raise ConfigError(
            f"dataset ({dataset.dim}-D, {dataset.num_classes} classes) does not fit "
            f"model ({spec.input_dim}-D, {spec.num_classes} classes)")
    params = init_params.copy()
    velocity = np.zeros_like(params.flat)
    lr = cfg.lr
    n = len(dataset)
    metrics = []
    # at lambda=0 the KL term is skipped, so the inner attack is dead weight
    needs_attack = cfg.method != "standard" and not (
        cfg.method in ("trades", "thrm") and cfg.lam == 0.0)
    for epoch in range(1, cfg.epochs + 1):
        if epoch in cfg.lr_decay_epochs:
            lr *= cfg.lr_decay_factor
        order = np.random.default_rng((cfg.seed, epoch)).permutation(n)
        losses = []
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start : start + cfg.batch_size]
            X, y = dataset.inputs[sel], dataset.labels[sel]
            pts = None
            if needs_attack:
                rng = np.random.default_rng((cfg.seed, epoch, batch_idx))
                pts = inner_points(spec, params, X, y, cfg, rng)
            loss, tensors = batch_loss(spec, params, X, y, cfg, attack_points=pts)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(
                    f"non-finite loss {value} at epoch {epoch} batch {batch_idx}")
            ad.backward(loss)
            grad = models.flatten_grads(spec, tensors)
            grad += cfg.weight_decay * params.flat
            velocity = cfg.momentum * velocity + grad
            params.flat -= lr * velocity
            losses.append(value)
        pred = models.predict(models.forward_logits(spec, params, dataset.inputs).data)
        acc = float((pred == dataset.labels).mean())
        extra = {}
        if cfg.eval_every and epoch % cfg.eval_every == 0 and cfg.threat is not None:
            extra = _quick_attack_estimates(spec, params, dataset, cfg)
        metrics.append(EpochMetrics(epoch, float(np.mean(losses)), acc, lr, extra))
    return params, metrics


def save_metrics(metrics, path):
    with open(path, "w", encoding="ascii") as fh:
        for m in metrics:
            fh.write(m.format_line() + "\n")


def lambda_sweep(spec, dataset, base_cfg, lambdas, eval_dataset, eval_cfgs=None,
                 workers=1):
    """Independent trainings per lambda (shared init seed), each evaluated
    on the held-out set; returns [(lambda, params, RiskReport), ...]."""
    if not lambdas:
        raise ConfigError("lambda sweep needs at least one value")
    if base_cfg.threat is None:
        raise ConfigError("lambda sweep needs a threat model for evaluation")
    if eval_cfgs is None:
        eval_cfgs = evaluation_suite(seed=base_cfg.seed)
    results = []
    for lam in lambdas:
        cfg = replace(base_cfg, lam=float(lam))
        params0 = models.init_params(spec, cfg.seed)
        params, _ = train(spec, params0, dataset, cfg)
        ledger = risk.build_ledger(spec, params, eval_dataset, base_cfg.threat,
                                   eval_cfgs, workers=workers)
        results.append((float(lam), params, risk.estimate_risks(ledger)))
    return results


def evaluation_suite(steps=presets.EVAL_ATTACK_STEPS, step_size=None, restarts=1,
                     seed=0, target=None):
    """Standard evaluation attack suite: zero start, 20 steps, eps/4."""
    suite = {
        name: attacks.AttackConfig(objective=name, steps=steps, step_size=step_size,
                                   restarts=restarts, random_start=False, seed=seed)
        for name in ("hypocritical", "adversarial_untargeted", "stability")
    }
    if target is not None:
        suite["adversarial_targeted"] = attacks.AttackConfig(
            objective="adversarial_targeted", steps=steps, step_size=step_size,
            restarts=restarts, random_start=False, seed=seed, target=target)
    return suite
