"""Command-line surface.

Subcommands: gen, train, eval, certify, analytic.  Shared flags:
--config, --seed, --workers, --out.  Reruns with the same config and
seed write byte-identical files at any worker count.

Exit codes: 0 success, 2 configuration/contract error, 3 I/O error,
4 numeric error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from fractions import Fraction

from . import analytic, certify as certify_mod, config as config_mod
from . import data, models, risk, training
from .errors import (ConfigError, ContractError, DimensionError, NumericError,
                     ParseError, VerilabError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _ensure_out(args):
    if args.out is None:
        raise ConfigError("--out directory is required")
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _load_config(args):
    if args.config is None:
        raise ConfigError("--config is required")
    return config_mod.load_config(args.config)


def cmd_gen(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    base = config_mod.load_base_dataset(cfg, seed_override=args.seed)
    eval_ds = config_mod.load_base_dataset(cfg, seed_override=args.seed, eval_split=True)
    sec = cfg.dataset
    variants = sec.get("variants", sec.get("variant", "quality")).split()
    for variant in variants:
        if variant not in data.VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
        if variant == "poisoning":
            ds = data.make_variant(base, variant,
                                   **config_mod.variant_kwargs(cfg, base.clamp))
        else:
            vseed = args.seed if args.seed is not None else int(sec.get("variant_seed",
                                                                        sec.get("seed", 0)))
            ds = data.make_variant(base, variant, seed=vseed)
        data.save_dataset(ds, os.path.join(out, f"train_{variant}.vlds"))
    data.save_dataset(eval_ds, os.path.join(out, "eval_clean.vlds"))
    return EXIT_OK


def _train_once(cfg, args, tcfg, spec, train_ds):
    sec = config_mod._section(cfg, "model")
    params0 = models.init_params(spec, sec.get_int("init_seed", 0))
    return training.train(spec, params0, train_ds, tcfg)


def cmd_train(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    spec = config_mod.model_spec(cfg)
    train_ds = config_mod.training_dataset(cfg, seed_override=args.seed)
    tcfg = config_mod.train_config(cfg, seed_override=args.seed)
    lambdas = config_mod._section(cfg, "train").get_floats("lambdas")
    if lambdas:
        eval_ds = config_mod.load_base_dataset(cfg, seed_override=args.seed,
                                               eval_split=True)
        suite = config_mod.eval_suite(cfg, seed_override=args.seed)
        threat = config_mod.eval_threat(cfg)
        results = training.lambda_sweep(spec, train_ds, replace(tcfg, threat=threat),
                                        lambdas, eval_ds, suite, workers=args.workers)
        lines = ["lambda risk_nat risk_hyp_Dminus"]
        for lam, params, report in results:
            tag = repr(lam).replace(".", "p")
            models.save_model(spec, params, os.path.join(out, f"model_lam{tag}.vlmodel"))
            risk.save_report(report, os.path.join(out, f"report_lam{tag}.txt"))
            lines.append(f"{lam!r} {report.risk_nat!r} "
                         + ("undefined" if report.risk_hyp_Dminus is None
                            else repr(report.risk_hyp_Dminus)))
        with open(os.path.join(out, "sweep_summary.txt"), "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
        return EXIT_OK
    params, metrics = _train_once(cfg, args, tcfg, spec, train_ds)
    models.save_model(spec, params, os.path.join(out, "model.vlmodel"))
    training.save_metrics(metrics, os.path.join(out, "metrics.log"))
    return EXIT_OK


def cmd_eval(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    if args.model is None:
        raise ConfigError("--model is required for eval")
    spec, params = models.load_model(args.model)
    eval_ds = config_mod.load_base_dataset(cfg, seed_override=args.seed, eval_split=True)
    threat = config_mod.eval_threat(cfg)
    repeats = config_mod.eval_repeats(cfg)
    base_seed = args.seed if args.seed is not None else \
        config_mod._section(cfg, "eval").get_int("seed", 0)
    reports = []
    for run in range(repeats):
        suite = config_mod.eval_suite(cfg, seed_override=base_seed + run)
        ledger = risk.build_ledger(spec, params, eval_ds, threat, suite,
                                   workers=args.workers)
        reports.append(risk.estimate_risks(ledger))
    path = os.path.join(out, "report.txt")
    if repeats == 1:
        risk.save_report(reports[0], path)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(risk.format_report_aggregate(reports))
    return EXIT_OK


def cmd_certify(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    if args.model is None:
        raise ConfigError("--model is required for certify")
    spec, params = models.load_model(args.model)
    eval_ds = config_mod.load_base_dataset(cfg, seed_override=args.seed, eval_split=True)
    sec = config_mod._section(cfg, "certify")
    eps_list = sec.get_floats("eps_list")
    suite = config_mod.eval_suite(cfg, seed_override=args.seed)
    if eps_list:
        lines = ["eps cert_hyp_upper_Dminus cert_adv_lower emp_hyp_Dminus emp_adv_acc"]
        for eps in eps_list:
            rep = certify_mod.certify_model(spec, params, eval_ds, eps,
                                            attack_suite=suite, workers=args.workers)
            fmt = lambda v: "undefined" if v is None else repr(v)
            lines.append(f"{eps!r} {fmt(rep.cert_hyp_upper_Dminus)} "
                         f"{rep.cert_adv_lower!r} {fmt(rep.emp_hyp_Dminus)} "
                         f"{rep.emp_adv_acc!r}")
        with open(os.path.join(out, "cert_sweep.txt"), "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
        return EXIT_OK
    eps = sec.get_float("eps")
    if eps is None:
        eps = config_mod.eval_threat(cfg).eps
    rep = certify_mod.certify_model(spec, params, eval_ds, eps, attack_suite=suite,
                                    workers=args.workers)
    certify_mod.save_cert_report(rep, os.path.join(out, "cert.txt"))
    return EXIT_OK


def cmd_analytic(args):
    out = _ensure_out(args)
    if args.which == "example1":
        try:
            eps = Fraction(args.eps)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad eps {args.eps!r}: {exc}") from exc
        rows = analytic.example1_table(eps)
        with open(os.path.join(out, "example1.txt"), "w", encoding="ascii") as fh:
            fh.write(analytic.format_example1_table(rows))
        return EXIT_OK
    try:
        eps = float(Fraction(args.eps))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad eps {args.eps!r}: {exc}") from exc
    b_grid = [float(b) for b in args.b_grid.split()] if args.b_grid else \
        [i / 20 for i in range(21)]
    points = analytic.example2_curves(b_grid, eps=eps, resolution=args.resolution)
    with open(os.path.join(out, "example2.txt"), "w", encoding="ascii") as fh:
        fh.write(analytic.format_example2_curves(points))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="verilab",
        description="generate data, train, attack, evaluate and certify small classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override config seeds")
        p.add_argument("--workers", type=int, default=1, help="attack worker threads")
        p.add_argument("--out", help="output directory")

    p_gen = sub.add_parser("gen", help="write clean + flawed dataset files")
    common(p_gen)
    p_train = sub.add_parser("train", help="train a model (or a lambda sweep)")
    common(p_train)
    p_eval = sub.add_parser("eval", help="attack a model and write the risk report")
    common(p_eval)
    p_eval.add_argument("--model", help="model file to evaluate")
    p_cert = sub.add_parser("certify", help="margin certificates for a distance net")
    common(p_cert)
    p_cert.add_argument("--model", help="model file to certify")
    p_an = sub.add_parser("analytic", help="closed-form toy tables and curves")
    common(p_an)
    p_an.add_argument("which", choices=("example1", "example2"))
    p_an.add_argument("--eps", default="1/4", help="ball radius (fraction ok)")
    p_an.add_argument("--b-grid", dest="b_grid", help="thresholds, space separated")
    p_an.add_argument("--resolution", type=int, default=2000)
    return parser


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "certify": cmd_certify,
    "analytic": cmd_analytic,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ContractError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except VerilabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
