#!/usr/bin/env python3
"""Substandard models look great on concealing perturbations.

Builds the four training-set variants (quality / noise / mislabeling /
poisoning), trains one MLP per variant, and compares clean accuracy
against accuracy on concealing perturbations.  The flawed models fail on
clean data yet pass almost everywhere once a false friend is allowed to
nudge the verification inputs.
"""

from verilab import (ModelSpec, SyntheticSpec, ThreatModel, TrainConfig,
                     build_ledger, estimate_risks, evaluation_suite, gen_synthetic,
                     init_params, make_mislabeling, make_noise, make_poisoning,
                     make_quality, train)

make = lambda n, seed: gen_synthetic(SyntheticSpec(
    kind="gaussians", n=n, seed=seed, means=((-1.0, 0.0), (1.0, 0.0)), cov=0.2,
    clamp=(-3.0, 3.0)))
clean_train = make(2000, 0)
eval_ds = make(2000, 1)
spec = ModelSpec("mlp", (2, 64, 64, 2))


def fit(dataset, weight_decay):
    cfg = TrainConfig(method="standard", epochs=40, batch_size=128, lr=0.1,
                      weight_decay=weight_decay, seed=0)
    params, _ = train(spec, init_params(spec, 0), dataset, cfg)
    return params


print("training the reference (quality) model first ...")
reference = fit(make_quality(clean_train), 5e-4)

variants = {
    "quality": (make_quality(clean_train), 5e-4),
    # weight decay off for the degenerate sets, as is usual when fitting noise
    "noise": (make_noise(clean_train, seed=2), 0.0),
    "mislabeling": (make_mislabeling(clean_train, seed=2), 0.0),
    "poisoning": (make_poisoning(clean_train, spec, reference,
                                 ThreatModel("l2", 1.5, clamp=(-3.0, 3.0))), 5e-4),
}

threat = ThreatModel("linf", 1.0, clamp=(-3.0, 3.0))
print(f"\n{'variant':<12} {'clean acc':>9} {'adv acc':>8} {'concealed acc':>13}")
for name, (dataset, wd) in variants.items():
    params = fit(dataset, wd)
    ledger = build_ledger(spec, params, eval_ds, threat, evaluation_suite(seed=0))
    report = estimate_risks(ledger)
    clean_acc = 1.0 - report.risk_nat
    adv_acc = ((~ledger.nat_wrong) & ~ledger.adv_success).mean()
    concealed_acc = (ledger.hyp_success | ~ledger.nat_wrong).mean()
    print(f"{name:<12} {clean_acc:>9.3f} {adv_acc:>8.3f} {concealed_acc:>13.3f}")

print("\nlow clean accuracy + high concealed accuracy = a verification stage")
print("that can be gamed; never trust perturbable verification data.")
