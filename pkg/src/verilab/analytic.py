"""Closed-form risk computation for the two toy distributions.

Toy 1 lives on [0,1] with uniform marginal; the positive-class rate
alternates between 1/4 and 1 on cells of width eps, so 1/(2*eps) must be
an integer for the cells to tile [0,1].  Boundary points belong to the
cell on their left (a measure-zero choice that pins the sampled and
analytic pipelines to the same function).  Risks for the two reference
classifiers come out as exact rationals: a point is attackable iff its
eps-ball (clipped to [0,1]) meets a region predicted differently, and
correctable iff the ball meets a region predicted as the true label.

Toy 2 is the unit square with a circular ground-truth class and a
horizontal-threshold classifier; precision, recall and the two
conditional risks are area ratios, integrated on a fine midpoint grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import attacks, data, risk
from .errors import ConfigError

CLASSIFIERS = ("bayes_optimal", "all_one")


@dataclass(frozen=True)
class Example1Row:
    classifier: str
    r_nat: Fraction
    r_hyp_D: Fraction
    r_adv_D: Fraction
    r_hyp_Dminus: Fraction
    r_adv_Dplus: Fraction
    r_sta_D: Fraction
    r_sta_Dminus: Fraction


@dataclass(frozen=True)
class Example2Point:
    b: float
    precision: float | None
    recall: float | None
    adv_risk_Dplus: float | None
    hyp_risk_Dminus: float | None


def _check_eps(eps):
    eps = Fraction(eps)
    if not 0 < eps <= Fraction(1, 2):
        raise ConfigError(f"eps must lie in (0, 1/2], got {eps}")
    if (1 / (2 * eps)).denominator != 1:
        raise ConfigError(f"1/(2*eps) must be an integer so cells tile [0,1], got eps={eps}")
    return eps


def _merge_intervals(intervals):
    merged = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def _overlap(intervals, a, b):
    total = Fraction(0)
    for lo, hi in intervals:
        total += max(Fraction(0), min(b, hi) - max(a, lo))
    return total


def _example1_row(name, eps, preds):
    """Exact risks of one piecewise-constant classifier on the toy line."""
    ncells = int(1 / eps)
    etas = [Fraction(1, 4) if j % 2 == 0 else Fraction(1) for j in range(ncells)]
    cells = [(j * eps, (j + 1) * eps) for j in range(ncells)]
    # where each prediction can be reached within eps (ball clipped to [0,1])
    reach = {}
    for s in (+1, -1):
        region = _merge_intervals([cells[j] for j in range(ncells) if preds[j] == s])
        reach[s] = _merge_intervals(
            [(max(Fraction(0), a - eps), min(Fraction(1), b + eps)) for a, b in region])

    r_nat = r_adv = r_hyp = r_sta = Fraction(0)
    num_hyp_minus = num_adv_plus = num_sta_minus = Fraction(0)
    for j in range(ncells):
        a, b = cells[j]
        eta = etas[j]
        s = preds[j]
        p_correct = eta if s == +1 else 1 - eta
        p_wrong = 1 - p_correct
        flip = _overlap(reach[-s], a, b)  # measure reaching the opposite prediction
        pos = _overlap(reach[+1], a, b)
        neg = _overlap(reach[-1], a, b)
        r_nat += (b - a) * p_wrong
        r_adv += eta * neg + (1 - eta) * pos  # y=+1 wants a "-" region, y=-1 a "+"
        r_hyp += eta * pos + (1 - eta) * neg
        r_sta += flip
        num_adv_plus += p_correct * flip
        num_hyp_minus += p_wrong * flip  # binary: the flip lands on y
        num_sta_minus += p_wrong * flip
    return Example1Row(
        classifier=name,
        r_nat=r_nat,
        r_hyp_D=r_hyp,
        r_adv_D=r_adv,
        r_hyp_Dminus=num_hyp_minus / r_nat if r_nat else Fraction(0),
        r_adv_Dplus=num_adv_plus / (1 - r_nat) if r_nat != 1 else Fraction(0),
        r_sta_D=r_sta,
        r_sta_Dminus=num_sta_minus / r_nat if r_nat else Fraction(0),
    )


def example1_table(eps):
    """Exact risk rows for the Bayes-optimal and always-positive classifiers."""
    eps = _check_eps(eps)
    ncells = int(1 / eps)
    bayes = [-1 if j % 2 == 0 else +1 for j in range(ncells)]
    all_one = [+1] * ncells
    return (_example1_row("bayes_optimal", eps, bayes),
            _example1_row("all_one", eps, all_one))


def example1_predictor(name, eps):
    """The toy classifiers as batch predictors (class 1 = positive)."""
    eps_f = float(Fraction(eps))
    if name == "all_one":
        return lambda X: np.ones(np.asarray(X).shape[0], dtype=np.int64)
    if name == "bayes_optimal":
        def predict(X):
            j = data.piecewise_cell_index(np.asarray(X)[:, 0], eps_f)
            return (j % 2 == 1).astype(np.int64)
        return predict
    raise ConfigError(f"unknown toy classifier {name!r}")


# ---------------------------------------------------------------------------
# toy 2: circle ground truth vs horizontal threshold, area-ratio metrics


def example2_curves(b_grid, eps=0.1, resolution=2000, center=(0.5, 0.5), radius=0.4):
    """Precision/recall and the conditional risks over a threshold grid.

    Metrics are ratios of areas inside the unit square, computed by
    midpoint-rule integration at ``resolution`` cells per axis; ratios
    with zero denominator are None.
    """
    if eps <= 0:
        raise ConfigError("eps must be > 0")
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    b_grid = [float(b) for b in b_grid]
    if any(not 0 <= b <= 1 for b in b_grid):
        raise ConfigError("thresholds must lie in [0,1]")
    grid = (np.arange(resolution) + 0.5) / resolution
    uu, vv = np.meshgrid(grid, grid, indexing="ij")
    inside = (uu - center[0]) ** 2 + (vv - center[1]) ** 2 < radius**2

    def ratio(num_mask, den_mask):
        den = int(den_mask.sum())
        if den == 0:
            return None
        return float(num_mask.sum()) / den

    points = []
    for b in b_grid:
        pred_pos = vv > b
        tp = inside & pred_pos
        fp = ~inside & pred_pos
        fn = inside & ~pred_pos
        correct = tp | (~inside & ~pred_pos)
        wrong = fp | fn
        # flipping the threshold classifier only needs to move the second
        # coordinate across b, so reachability is a band around the line
        can_pos = vv > b - eps  # some x' in the ball predicts positive
        can_neg = vv <= b + eps  # some x' in the ball predicts negative
        adv_reach = np.where(inside, can_neg, can_pos)  # reach a wrong prediction
        hyp_reach = np.where(inside, can_pos, can_neg)  # reach the true label
        points.append(Example2Point(
            b=b,
            precision=ratio(tp, tp | fp),
            recall=ratio(tp, tp | fn),
            adv_risk_Dplus=ratio(correct & adv_reach, correct),
            hyp_risk_Dminus=ratio(wrong & hyp_reach, wrong),
        ))
    return points


def format_example2_curves(points):
    def fmt(v):
        return "undefined" if v is None else repr(v)

    lines = ["b precision recall adv_risk_Dplus hyp_risk_Dminus"]
    for p in points:
        lines.append(" ".join([repr(p.b), fmt(p.precision), fmt(p.recall),
                               fmt(p.adv_risk_Dplus), fmt(p.hyp_risk_Dminus)]))
    return "\n".join(lines) + "\n"


def format_example1_table(rows):
    lines = ["classifier r_nat r_hyp_D r_adv_D r_hyp_Dminus r_adv_Dplus"]
    for row in rows:
        lines.append(" ".join([row.classifier, str(row.r_nat), str(row.r_hyp_D),
                               str(row.r_adv_D), str(row.r_hyp_Dminus),
                               str(row.r_adv_Dplus)]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# sampled-pipeline consistency


@dataclass(frozen=True)
class QuantityComparison:
    name: str
    sampled: float
    exact: Fraction
    sigma3: float  # three binomial standard deviations at the exact rate
    ok: bool


@dataclass(frozen=True)
class Example1Comparison:
    classifier: str
    n: int
    seed: int
    quantities: tuple[QuantityComparison, ...]

    @property
    def all_ok(self):
        return all(q.ok for q in self.quantities)


def _sampled_ledger(predictor, dataset, eps, grid_points):
    """Ledger from the exhaustive 1-D ball search (the attack oracle)."""
    threat = attacks.ThreatModel("linf", eps, clamp=(0.0, 1.0))
    pred = predictor(dataset.inputs)
    nat_wrong = pred != dataset.labels
    n = len(dataset)
    adv = nat_wrong.copy()
    hyp = ~nat_wrong
    sta = np.zeros(n, dtype=bool)
    changed = np.zeros(n, dtype=bool)
    for i in range(n):
        x, y = dataset.inputs[i], int(dataset.labels[i])
        if nat_wrong[i]:
            ok = attacks.brute_force_search(predictor, x, y, threat, "hypocritical",
                                            grid_points)
            hyp[i] = ok
            changed[i] = ok  # binary task: correcting is the only possible change
            sta[i] = ok
        else:
            ok = attacks.brute_force_search(predictor, x, y, threat,
                                            "adversarial_untargeted", grid_points)
            adv[i] = ok
            sta[i] = ok
    return risk.IndicatorLedger(nat_wrong, adv, hyp, sta, changed).validate()


def example1_sampler_consistency(n, seed, eps, grid_points=513, classifier="all_one"):
    """Sampled-pipeline risks vs the exact table, at 3 binomial sigma."""
    if n < 10**4:
        raise ConfigError("need n >= 10^4 for the 3-sigma comparison to mean anything")
    eps_exact = _check_eps(eps)
    rows = {row.classifier: row for row in example1_table(eps_exact)}
    exact = rows[classifier]
    spec = data.SyntheticSpec(kind="d1_piecewise", n=n, seed=seed, eps=float(eps_exact))
    dataset = data.gen_synthetic(spec)
    ledger = _sampled_ledger(example1_predictor(classifier, eps_exact), dataset,
                             float(eps_exact), grid_points)
    report = risk.estimate_risks(ledger)

    def compare(name, sampled, exact_value, count):
        if sampled is None:
            sampled = float("nan")
            ok = count == 0
            sigma3 = 0.0
        else:
            p = float(exact_value)
            sigma3 = 3.0 * np.sqrt(p * (1.0 - p) / count) if count else 0.0
            ok = abs(sampled - p) <= sigma3 if sigma3 > 0 else sampled == p
        return QuantityComparison(name, sampled, Fraction(exact_value), sigma3, ok)

    quantities = (
        compare("risk_nat", report.risk_nat, exact.r_nat, report.n),
        compare("risk_adv_D", report.risk_adv_D, exact.r_adv_D, report.n),
        compare("risk_hyp_D", report.risk_hyp_D, exact.r_hyp_D, report.n),
        compare("risk_hyp_Dminus", report.risk_hyp_Dminus, exact.r_hyp_Dminus,
                report.n_minus),
        compare("risk_adv_Dplus", report.risk_adv_Dplus, exact.r_adv_Dplus,
                report.n_plus),
    )
    return Example1Comparison(classifier, n, seed, quantities)
