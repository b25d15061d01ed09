"""Experiment configuration files.

The format is an INI-style sectioned key=value file (configparser
grammar, ``#`` comments).  Sections and keys:

  [dataset]
    kind        gaussians | d1_piecewise | circle_oracle | file
    n, seed     sample count and generator seed
    eval_n, eval_seed   held-out split (defaults: n, seed+1)
    variant     quality | noise | mislabeling | poisoning   (default quality)
    variant_seed        seed for noise/mislabeling draws    (default seed)
    clamp       "lo hi" or "none"
    means       gaussians: per-class mean vectors, ';'-separated ("x y ; x y")
    cov         gaussians: isotropic variance, scalar or per-class list
    eps         d1_piecewise cell width
    center, radius      circle_oracle geometry
    path, format        file kind: dataset path, binary | text
    reference_model     poisoning: path of trained reference model
    poison_norm, poison_eps, poison_steps   poisoning attack budget

  [model]
    kind        mlp | linf_dist_net
    widths      layer widths, space separated ("2 16 16 2")
    init_seed   parameter init seed (default 0)

  [train]
    method      standard | pgd_at | trades | thrm
    epochs, batch_size, lr, momentum, weight_decay
    lr_decay_epochs     space-separated epoch numbers
    lr_decay_factor
    lambda      trade-off weight (trades/thrm)
    lambdas     space-separated sweep values; presence turns cmd_train
                into a sweep
    seed
    attack_norm, attack_eps, attack_steps, attack_step_size
                inner-attack budget for the robust methods
                (defaults: the named presets; step = eps/4)

  [eval]
    norm, eps   threat model for evaluation attacks
    steps, step_size, restarts, seed, repeats
    target      optional target class for a targeted attack pass

  [certify]
    eps         single certification radius
    eps_list    space-separated radii (sweep)
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from . import attacks, data, models, presets, training
from .errors import ConfigError

_SECTIONS = ("dataset", "model", "train", "eval", "certify")


@dataclass
class ExperimentConfig:
    dataset: dict
    model: dict
    train: dict
    eval: dict
    certify: dict
    path: str


class _Section:
    def __init__(self, name, mapping):
        self.name = name
        self.mapping = dict(mapping)

    def get(self, key, default=None):
        return self.mapping.get(key, default)

    def _convert(self, key, conv, default):
        raw = self.mapping.get(key)
        if raw is None or raw == "":
            return default
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key} = {raw!r}: {exc}") from exc

    def get_int(self, key, default=None):
        return self._convert(key, int, default)

    def get_float(self, key, default=None):
        return self._convert(key, float, default)

    def get_floats(self, key, default=None):
        return self._convert(key, lambda s: tuple(float(v) for v in s.split()), default)

    def get_ints(self, key, default=None):
        return self._convert(key, lambda s: tuple(int(v) for v in s.split()), default)

    def get_bool(self, key, default=False):
        raw = self.mapping.get(key)
        if raw is None:
            return default
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"[{self.name}] {key} = {raw!r}: expected a boolean")


def load_config(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in {path}")
    sections = {name: dict(parser[name]) if parser.has_section(name) else {}
                for name in _SECTIONS}
    return ExperimentConfig(path=path, **sections)


def _section(cfg, name):
    return _Section(name, getattr(cfg, name))


def _parse_clamp(raw):
    if raw is None:
        return "default"
    if raw.strip().lower() == "none":
        return None
    parts = raw.split()
    if len(parts) != 2:
        raise ConfigError(f"clamp must be 'lo hi' or 'none', got {raw!r}")
    lo, hi = float(parts[0]), float(parts[1])
    return (lo, hi)


def _parse_means(raw):
    if raw is None:
        return None
    means = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if chunk:
            means.append(tuple(float(v) for v in chunk.split()))
    return tuple(means)


def synthetic_spec(cfg, seed_override=None, eval_split=False):
    sec = _section(cfg, "dataset")
    kind = sec.get("kind")
    if kind is None:
        raise ConfigError("[dataset] kind is required")
    if kind == "file":
        raise ConfigError("[dataset] kind=file has no synthetic spec")
    seed = sec.get_int("seed", 0) if seed_override is None else seed_override
    n = sec.get_int("n")
    if n is None:
        raise ConfigError("[dataset] n is required for synthetic kinds")
    if eval_split:
        n = sec.get_int("eval_n", n)
        seed = sec.get_int("eval_seed", seed + 1) if seed_override is None \
            else seed_override + 1
    clamp = _parse_clamp(sec.get("clamp"))
    try:
        if kind == "gaussians":
            means = _parse_means(sec.get("means"))
            if means is None:
                raise ConfigError("[dataset] gaussians need means")
            cov_raw = sec.get("cov")
            cov = tuple(float(v) for v in cov_raw.split()) if cov_raw else None
            if cov is not None and len(cov) == 1:
                cov = cov[0]
            return data.SyntheticSpec(kind=kind, n=n, seed=seed, means=means,
                                      cov=cov, clamp=clamp)
        if kind == "d1_piecewise":
            return data.SyntheticSpec(kind=kind, n=n, seed=seed,
                                      eps=sec.get_float("eps"), clamp=clamp)
        if kind == "circle_oracle":
            center = sec.get_floats("center", (0.5, 0.5))
            return data.SyntheticSpec(kind=kind, n=n, seed=seed, center=tuple(center),
                                      radius=sec.get_float("radius", 0.4), clamp=clamp)
    except ValueError as exc:
        raise ConfigError(f"[dataset]: {exc}") from exc
    raise ConfigError(f"unknown dataset kind {kind!r}")


def load_base_dataset(cfg, seed_override=None, eval_split=False):
    sec = _section(cfg, "dataset")
    if sec.get("kind") == "file":
        path = sec.get("eval_path" if eval_split else "path")
        if path is None:
            raise ConfigError("[dataset] kind=file needs path (and eval_path for eval)")
        if sec.get("format", "binary") == "text":
            return data.load_dataset_text(path)
        return data.load_dataset(path)
    return data.gen_synthetic(synthetic_spec(cfg, seed_override, eval_split))


def variant_kwargs(cfg, threat_default_clamp):
    """Poisoning settings pulled from the [dataset] section."""
    sec = _section(cfg, "dataset")
    ref = sec.get("reference_model")
    if ref is None:
        raise ConfigError("[dataset] poisoning needs reference_model")
    if not os.path.exists(ref):
        raise FileNotFoundError(f"reference model {ref} does not exist")
    norm = sec.get("poison_norm", "linf")
    eps = sec.get_float("poison_eps")
    if eps is None:
        raise ConfigError("[dataset] poisoning needs an explicit poison_eps")
    ref_spec, ref_params = models.load_model(ref)
    threat = attacks.ThreatModel(norm, eps, threat_default_clamp)
    return dict(reference_spec=ref_spec, reference_params=ref_params, threat=threat,
                steps=sec.get_int("poison_steps", presets.POISON_STEPS))


def training_dataset(cfg, seed_override=None):
    """The [dataset] section realized as a training set, variant applied."""
    sec = _section(cfg, "dataset")
    base = load_base_dataset(cfg, seed_override)
    variant = sec.get("variant", "quality")
    if variant not in data.VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    if variant == "poisoning":
        return data.make_variant(base, variant, **variant_kwargs(cfg, base.clamp))
    vseed = sec.get_int("variant_seed", sec.get_int("seed", 0))
    if seed_override is not None:
        vseed = seed_override
    return data.make_variant(base, variant, seed=vseed)


def model_spec(cfg):
    sec = _section(cfg, "model")
    kind = sec.get("kind")
    widths = sec.get_ints("widths")
    if kind is None or widths is None:
        raise ConfigError("[model] kind and widths are required")
    return models.ModelSpec(kind, widths)


def train_config(cfg, seed_override=None):
    sec = _section(cfg, "train")
    method = sec.get("method", "standard")
    if method not in training.METHODS:
        raise ConfigError(f"[train] unknown method {method!r}")
    threat = None
    attack = None
    if method != "standard":
        norm = sec.get("attack_norm", "linf")
        eps = sec.get_float("attack_eps", presets.default_eps(norm))
        dataset_clamp = _parse_clamp(_section(cfg, "dataset").get("clamp"))
        if dataset_clamp == "default":
            kind = _section(cfg, "dataset").get("kind")
            dataset_clamp = None if kind == "gaussians" else (0.0, 1.0)
        threat = attacks.ThreatModel(norm, eps, dataset_clamp)
        attack = attacks.AttackConfig(
            objective=training._INNER_OBJECTIVE[method],
            steps=sec.get_int("attack_steps", presets.TRAIN_ATTACK_STEPS),
            step_size=sec.get_float("attack_step_size"),
            random_start=True,
            seed=sec.get_int("seed", 0) if seed_override is None else seed_override)
    return training.TrainConfig(
        method=method,
        epochs=sec.get_int("epochs", 10),
        batch_size=sec.get_int("batch_size", 64),
        lr=sec.get_float("lr", 0.1),
        momentum=sec.get_float("momentum", presets.MOMENTUM),
        weight_decay=sec.get_float("weight_decay", presets.WEIGHT_DECAY),
        lr_decay_epochs=sec.get_ints("lr_decay_epochs", ()),
        lr_decay_factor=sec.get_float("lr_decay_factor", presets.LR_DECAY_FACTOR),
        lam=sec.get_float("lambda", 1.0),
        threat=threat,
        attack=attack,
        seed=sec.get_int("seed", 0) if seed_override is None else seed_override,
    )


def eval_threat(cfg):
    sec = _section(cfg, "eval")
    norm = sec.get("norm", "linf")
    eps = sec.get_float("eps", presets.default_eps(norm))
    clamp = _parse_clamp(_section(cfg, "dataset").get("clamp"))
    if clamp == "default":
        kind = _section(cfg, "dataset").get("kind")
        clamp = None if kind == "gaussians" else (0.0, 1.0)
    return attacks.ThreatModel(norm, eps, clamp)


def eval_suite(cfg, seed_override=None):
    sec = _section(cfg, "eval")
    seed = sec.get_int("seed", 0) if seed_override is None else seed_override
    return training.evaluation_suite(
        steps=sec.get_int("steps", presets.EVAL_ATTACK_STEPS),
        step_size=sec.get_float("step_size"),
        restarts=sec.get_int("restarts", 1),
        seed=seed,
        target=sec.get_int("target"))


def eval_repeats(cfg):
    return _section(cfg, "eval").get_int("repeats", 1)
