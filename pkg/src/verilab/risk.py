"""Empirical risk estimation and mechanical checks of the exact
decomposition identities between natural, adversarial, hypocritical and
stability risk.

All risks are means of 0/1 indicators over one verification set, so the
decompositions hold as finite-sample identities whenever the per-example
flags are mutually consistent; build_ledger constructs them that way and
IndicatorLedger.validate() states the exact constraints.

Attack-based flags are lower bounds of the true ball-maximum indicators;
reports therefore carry empirical (attack-bounded) values.  Certified
upper bounds live in the certify module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attacks, models
from .errors import ConfigError, ContractError

LEMMA_TOL = 1e-12

REPORT_FIELDS = (
    "risk_nat",
    "risk_adv_D",
    "risk_hyp_D",
    "risk_sta_D",
    "risk_adv_Dplus",
    "risk_hyp_Dminus",
    "risk_sta_Dminus",
    "risk_hyp_bar_Dminus",
    "residual_thm1",
    "residual_thm2",
    "residual_thm3",
)


@dataclass
class IndicatorLedger:
    """Per-example 0/1 outcomes of the clean pass and the attacks.

    Invariants (all enforced by build_ledger, checked by validate):
      * correctly classified rows: hyp_success=1 (the zero perturbation
        already predicts the label), hyp_changed=0, sta_success equals
        adv_success (identical ball predicates when the clean prediction
        is the label);
      * misclassified rows: adv_success=1 (the zero perturbation already
        errs), and hyp_success <= hyp_changed <= sta_success.
    """

    nat_wrong: np.ndarray
    adv_success: np.ndarray
    hyp_success: np.ndarray
    sta_success: np.ndarray
    hyp_changed: np.ndarray
    targeted_success: np.ndarray | None = None
    target: int | None = None

    def __post_init__(self):
        for name in ("nat_wrong", "adv_success", "hyp_success", "sta_success", "hyp_changed"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=bool))

    @property
    def n(self):
        return int(self.nat_wrong.size)

    def validate(self):
        plus = ~self.nat_wrong
        minus = self.nat_wrong
        if not self.hyp_success[plus].all():
            raise ContractError("correct rows must have hyp_success set")
        if self.hyp_changed[plus].any():
            raise ContractError("correct rows must have hyp_changed clear")
        if (self.sta_success[plus] != self.adv_success[plus]).any():
            raise ContractError("on correct rows stability and adversarial flags coincide")
        if not self.adv_success[minus].all():
            raise ContractError("misclassified rows must have adv_success set")
        if (self.hyp_success[minus] & ~self.hyp_changed[minus]).any():
            raise ContractError("a corrected row is a changed row")
        if (self.hyp_changed[minus] & ~self.sta_success[minus]).any():
            raise ContractError("a changed row is an unstable row")
        return self


@dataclass
class RiskReport:
    """All estimated risks plus the decomposition residuals.

    Conditional risks over an empty partition are None (undefined) and
    the residuals that would need them are skipped (None).
    """

    n: int
    n_plus: int
    n_minus: int
    risk_nat: float
    risk_adv_D: float
    risk_hyp_D: float
    risk_sta_D: float
    risk_adv_Dplus: float | None
    risk_hyp_Dminus: float | None
    risk_sta_Dminus: float | None
    risk_hyp_bar_Dminus: float | None
    residual_thm1: float | None = None
    residual_thm2: float | None = None
    residual_thm3: float | None = None
    lemma1_ok: bool | None = None


@dataclass
class DecompositionCheck:
    residual_thm1: float | None
    residual_thm2: float | None
    residual_thm3: float | None
    lemma1_ok: bool | None


def _mean(mask):
    return float(mask.mean())


def build_ledger(spec, params, dataset, threat, attack_cfgs, workers=1):
    """Run the attack suite over a dataset and assemble consistent flags.

    ``attack_cfgs`` maps objective name to AttackConfig and must contain
    "hypocritical", "adversarial_untargeted" and "stability"; an optional
    "adversarial_targeted" entry adds targeted flags on the misclassified
    rows.  The untargeted attack runs on correctly classified rows (its
    predicate is trivially true elsewhere), the correction and stability
    attacks run on misclassified rows; on correct rows the stability and
    adversarial ball predicates are one and the same, so one search
    serves both.  Any prediction change found by the correction attack
    also witnesses instability and is folded into the stability flag.
    """
    for key in ("hypocritical", "adversarial_untargeted", "stability"):
        if key not in attack_cfgs:
            raise ConfigError(f"attack suite is missing the {key!r} config")
    X, y = dataset.inputs, dataset.labels
    n = len(y)
    logits = models.forward_logits(spec, params, X).data
    pred = models.predict(logits)
    nat_wrong = pred != y
    idx_plus = np.flatnonzero(~nat_wrong)
    idx_minus = np.flatnonzero(nat_wrong)

    adv_success = nat_wrong.copy()  # misclassified rows succeed at delta=0
    hyp_success = ~nat_wrong  # correct rows succeed at delta=0
    sta_success = np.zeros(n, dtype=bool)
    hyp_changed = np.zeros(n, dtype=bool)

    if idx_plus.size:
        led = attacks.batch_attack(spec, params, dataset, threat,
                                   attack_cfgs["adversarial_untargeted"],
                                   workers=workers, indices=idx_plus)
        adv_success[idx_plus] = led.success
        sta_success[idx_plus] = led.success
    if idx_minus.size:
        led_hyp = attacks.batch_attack(spec, params, dataset, threat,
                                       attack_cfgs["hypocritical"],
                                       workers=workers, indices=idx_minus)
        hyp_success[idx_minus] = led_hyp.success
        pred_hyp = models.predict(models.forward_logits(spec, params, led_hyp.points).data)
        hyp_changed[idx_minus] = pred_hyp != pred[idx_minus]
        led_sta = attacks.batch_attack(spec, params, dataset, threat,
                                       attack_cfgs["stability"],
                                       workers=workers, indices=idx_minus)
        sta_success[idx_minus] = led_sta.success | hyp_changed[idx_minus]

    targeted = None
    target = None
    if "adversarial_targeted" in attack_cfgs:
        cfg_t = attack_cfgs["adversarial_targeted"]
        target = cfg_t.target
        targeted = np.zeros(n, dtype=bool)
        if idx_minus.size:
            led_t = attacks.batch_attack(spec, params, dataset, threat, cfg_t,
                                         workers=workers, indices=idx_minus)
            targeted[idx_minus] = led_t.success

    return IndicatorLedger(nat_wrong, adv_success, hyp_success, sta_success,
                           hyp_changed, targeted_success=targeted, target=target).validate()


def estimate_risks(ledger):
    """Turn a ledger into a RiskReport, residuals included."""
    if ledger.n == 0:
        raise ContractError("cannot estimate risks from an empty ledger")
    nat = ledger.nat_wrong
    plus = ~nat
    minus = nat
    n_plus = int(plus.sum())
    n_minus = int(minus.sum())
    report = RiskReport(
        n=ledger.n,
        n_plus=n_plus,
        n_minus=n_minus,
        risk_nat=_mean(nat),
        risk_adv_D=_mean(nat | ledger.adv_success),
        risk_hyp_D=_mean(~nat | ledger.hyp_success),
        risk_sta_D=_mean(ledger.sta_success),
        risk_adv_Dplus=_mean(ledger.adv_success[plus]) if n_plus else None,
        risk_hyp_Dminus=_mean(ledger.hyp_success[minus]) if n_minus else None,
        risk_sta_Dminus=_mean(ledger.sta_success[minus]) if n_minus else None,
        risk_hyp_bar_Dminus=_mean(ledger.hyp_changed[minus]) if n_minus else None,
    )
    check = check_decompositions(report)
    report.residual_thm1 = check.residual_thm1
    report.residual_thm2 = check.residual_thm2
    report.residual_thm3 = check.residual_thm3
    report.lemma1_ok = check.lemma1_ok
    return report


def check_decompositions(report):
    """Residuals of the three decomposition identities plus the
    correction/change/instability inequality chain on misclassified rows."""
    r = report
    thm1 = thm2 = thm3 = None
    lemma = None
    if r.risk_adv_Dplus is not None:
        thm1 = abs(r.risk_adv_D - (r.risk_nat + (1.0 - r.risk_nat) * r.risk_adv_Dplus))
    if r.risk_hyp_Dminus is not None:
        thm2 = abs(r.risk_hyp_D - (1.0 - (1.0 - r.risk_hyp_Dminus) * r.risk_nat))
    if r.risk_adv_Dplus is not None and r.risk_sta_Dminus is not None:
        thm3 = abs(r.risk_sta_D - ((1.0 - r.risk_nat) * r.risk_adv_Dplus
                                   + r.risk_nat * r.risk_sta_Dminus))
    if r.risk_hyp_Dminus is not None:
        lemma = (r.risk_hyp_Dminus <= r.risk_hyp_bar_Dminus + LEMMA_TOL
                 and r.risk_hyp_bar_Dminus <= r.risk_sta_Dminus + LEMMA_TOL)
    return DecompositionCheck(thm1, thm2, thm3, lemma)


def attack_success_rate(ledger, objective="hypocritical"):
    """Success rate over the relevant partition; None when it is empty.

    The hypocritical rate is the risk on misclassified rows, bit for bit.
    """
    minus = ledger.nat_wrong
    if objective == "hypocritical":
        if not minus.any():
            return None
        return _mean(ledger.hyp_success[minus])
    if objective == "adversarial_targeted":
        if ledger.targeted_success is None:
            raise ContractError("ledger carries no targeted-attack flags")
        if not minus.any():
            return None
        return _mean(ledger.targeted_success[minus])
    raise ConfigError(f"no success-rate semantics for objective {objective!r}")


# ---------------------------------------------------------------------------
# report serialization (fixed field names, machine-diffable)


def _fmt(value):
    if value is None:
        return "undefined"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_report(report):
    lines = ["verilab-riskreport v1"]
    for name in ("n", "n_plus", "n_minus"):
        lines.append(f"{name} = {_fmt(getattr(report, name))}")
    for name in REPORT_FIELDS:
        lines.append(f"{name} = {_fmt(getattr(report, name))}")
    lines.append(f"lemma1_ok = {_fmt(report.lemma1_ok)}")
    return "\n".join(lines) + "\n"


def format_report_aggregate(reports):
    """Mean and standard deviation per field over repeated runs."""
    lines = [f"verilab-riskreport v1 aggregate runs={len(reports)}"]
    for name in ("n", "n_plus", "n_minus"):
        vals = [getattr(rep, name) for rep in reports]
        lines.append(f"{name}_mean = {_fmt(float(np.mean(vals)))}")
        lines.append(f"{name}_std = {_fmt(float(np.std(vals)))}")
    for name in REPORT_FIELDS:
        vals = [getattr(rep, name) for rep in reports]
        if any(v is None for v in vals):
            lines.append(f"{name}_mean = undefined")
            lines.append(f"{name}_std = undefined")
        else:
            lines.append(f"{name}_mean = {_fmt(float(np.mean(vals)))}")
            lines.append(f"{name}_std = {_fmt(float(np.std(vals)))}")
    ok = [rep.lemma1_ok for rep in reports]
    lines.append(f"lemma1_ok = {_fmt(None if any(v is None for v in ok) else all(ok))}")
    return "\n".join(lines) + "\n"


def save_report(report, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_report(report))


def load_report(path):
    """Parse a report file back into a RiskReport (round-trip helper)."""
    values = {}
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "verilab-riskreport v1":
            raise ConfigError(f"not a risk report: header {header!r}")
        for line in fh:
            key, _, raw = line.strip().partition(" = ")
            values[key] = raw
    def conv(key, kind):
        raw = values[key]
        if raw == "undefined":
            return None
        if kind is bool:
            return raw == "true"
        return kind(raw)
    kwargs = {name: conv(name, int) for name in ("n", "n_plus", "n_minus")}
    for name in REPORT_FIELDS:
        kwargs[name] = conv(name, float)
    kwargs["lemma1_ok"] = conv("lemma1_ok", bool)
    return RiskReport(**kwargs)
