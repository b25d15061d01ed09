"""Margin certificates for max-distance nets.

A stacked max-distance net is 1-Lipschitz in the sup norm, so one
forward pass bounds how far every logit can move inside an eps-ball:

  * a misclassified example with max_i g_i(x) - g_y(x) >= 2*eps cannot be
    perturbed to predict y; the fraction of misclassified examples with
    margin < 2*eps is an attack-independent upper bound on the
    correction risk over that set;
  * a correctly classified example with g_y(x) - max_{i!=y} g_i(x) > 2*eps
    keeps its prediction; the certified fraction lower-bounds accuracy
    under any attack.

Boundary ties are counted conservatively: margin exactly 2*eps stays in
the upper bound's complement per the strict predicate, and the
adversarial certificate demands a strictly larger gap.  The clamp box is
ignored (a clamped ball is a subset of the ball), which only adds slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attacks, models, risk, training
from .errors import ConfigError, ContractError

CERT_FIELDS = ("eps", "cert_hyp_upper_Dminus", "cert_adv_lower",
               "emp_hyp_Dminus", "emp_adv_acc")


@dataclass
class CertReport:
    eps: float
    n: int
    n_minus: int
    cert_hyp_upper_Dminus: float | None  # fraction of misclassified with margin < 2 eps
    cert_adv_lower: float  # certified-accurate fraction of the whole set
    emp_hyp_Dminus: float | None  # attack-bounded counterpart (PGD)
    emp_adv_acc: float  # accuracy on attacked examples (PGD)
    margins_minus: np.ndarray | None = None  # per misclassified example
    gaps_plus: np.ndarray | None = None  # per correct example


def _forward_stats(spec, params, dataset):
    logits = models.forward_logits(spec, params, dataset.inputs).data
    pred = models.predict(logits)
    wrong = pred != dataset.labels
    margins = models.margins_batch(logits, dataset.labels)
    # gap to the runner-up class, for the correctly classified rows
    part = np.partition(logits, -2, axis=1)
    runner_up = part[:, -2]
    gaps = logits[np.arange(len(dataset)), dataset.labels] - runner_up
    return pred, wrong, margins, gaps


def _empirical(spec, params, dataset, threat, suite, workers):
    ledger = risk.build_ledger(spec, params, dataset, threat, suite, workers=workers)
    report = risk.estimate_risks(ledger)
    emp_adv_acc = float(((~ledger.nat_wrong) & ~ledger.adv_success).mean())
    return report.risk_hyp_Dminus, emp_adv_acc


def certify_model(spec, params, dataset, eps, attack_suite=None, workers=1,
                  with_empirical=True):
    """One forward pass per example; optional PGD run for the empirical
    counterparts.  The model must be a max-distance net."""
    models.require_kind(spec, models.LINF_NET, "certification")
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    if len(dataset) == 0:
        raise ContractError("cannot certify an empty dataset")
    _, wrong, margins, gaps = _forward_stats(spec, params, dataset)
    n_minus = int(wrong.sum())
    margins_minus = margins[wrong]
    gaps_plus = gaps[~wrong]
    cert_hyp = float((margins_minus < 2.0 * eps).mean()) if n_minus else None
    cert_adv = float(((~wrong) & (gaps > 2.0 * eps)).mean())
    emp_hyp = None
    emp_adv = float("nan")
    if with_empirical:
        threat = attacks.ThreatModel("linf", eps, dataset.clamp)
        suite = attack_suite if attack_suite is not None else training.evaluation_suite()
        emp_hyp, emp_adv = _empirical(spec, params, dataset, threat, suite, workers)
        if emp_hyp is not None and cert_hyp is not None and emp_hyp > cert_hyp:
            raise ContractError(
                f"soundness violated: empirical correction risk {emp_hyp} exceeds "
                f"certified bound {cert_hyp}")
        if emp_adv < cert_adv:
            raise ContractError(
                f"soundness violated: attacked accuracy {emp_adv} below certified "
                f"lower bound {cert_adv}")
    return CertReport(eps=float(eps), n=len(dataset), n_minus=n_minus,
                      cert_hyp_upper_Dminus=cert_hyp, cert_adv_lower=cert_adv,
                      emp_hyp_Dminus=emp_hyp, emp_adv_acc=emp_adv,
                      margins_minus=margins_minus, gaps_plus=gaps_plus)


def certify_hypocritical(spec, params, dataset, eps, **kwargs):
    """Certified upper bound on the correction risk over misclassified rows."""
    return certify_model(spec, params, dataset, eps, **kwargs)


def certify_adversarial(spec, params, dataset, eps, **kwargs):
    """Certified lower bound on accuracy under any in-ball attack."""
    return certify_model(spec, params, dataset, eps, **kwargs)


def format_cert_report(report):
    def fmt(v):
        if v is None:
            return "undefined"
        if isinstance(v, float) and np.isnan(v):
            return "undefined"
        return repr(float(v)) if isinstance(v, float) else str(v)

    lines = ["verilab-certreport v1",
             f"n = {report.n}", f"n_minus = {report.n_minus}"]
    for name in CERT_FIELDS:
        lines.append(f"{name} = {fmt(getattr(report, name))}")
    return "\n".join(lines) + "\n"


def save_cert_report(report, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_cert_report(report))
