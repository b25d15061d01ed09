#!/usr/bin/env python3
"""Two closed-form toy worlds where every risk is computable exactly.

Toy 1 (a line with alternating label rates) shows that the classifier
minimizing natural risk is maximally concealable, while the crude
always-positive classifier conceals nothing: an inherent tension.
Toy 2 (a circle vs a threshold) traces the same tension as a continuous
curve over the threshold.
"""

from fractions import Fraction

import numpy as np

from verilab import analytic

print("=== toy 1: exact risk table (cells of width 1/4) ===")
rows = analytic.example1_table(Fraction(1, 4))
print(f"{'':>14} {'bayes_optimal':>14} {'all_one':>9}")
names = [("natural risk", "r_nat"), ("concealment risk, all data", "r_hyp_D"),
         ("error-inducing risk, all data", "r_adv_D"),
         ("concealment risk on errors", "r_hyp_Dminus"),
         ("error-inducing risk on correct", "r_adv_Dplus")]
for label, attr in names:
    print(f"{label:>31} {str(getattr(rows[0], attr)):>10} {str(getattr(rows[1], attr)):>9}")

print("\nthe accuracy-optimal rule hides every mistake; the blunt rule hides none.")

print("\n=== toy 1: sampled pipeline agrees with the closed form ===")
cmp = analytic.example1_sampler_consistency(20_000, seed=0, eps=Fraction(1, 4))
for q in cmp.quantities:
    print(f"{q.name:>16}: sampled {q.sampled:.4f} vs exact {float(q.exact):.4f} "
          f"(3-sigma {q.sigma3:.4f}) {'ok' if q.ok else 'DISAGREES'}")

print("\n=== toy 2: trade-off curve over the threshold ===")
points = analytic.example2_curves(np.linspace(0.1, 0.9, 9), eps=0.1, resolution=1000)
print(f"{'b':>5} {'precision':>10} {'recall':>7} {'inducing risk':>14} {'concealing risk':>16}")
for p in points:
    print(f"{p.b:>5.2f} {p.precision:>10.3f} {p.recall:>7.3f} "
          f"{p.adv_risk_Dplus:>14.3f} {p.hyp_risk_Dminus:>16.3f}")
