import numpy as np
import pytest

from verilab import attacks, certify, data, models, training
from verilab.attacks import ThreatModel
from verilab.errors import ContractError


def tiny_net(seed, widths=(2, 6, 2)):
    spec = models.ModelSpec("linf_dist_net", widths)
    return spec, models.init_params(spec, seed)


def square_dataset(rng, n=20):
    X = rng.random((n, 2))
    y = rng.integers(0, 2, size=n)
    return data.Dataset(X, y, num_classes=2)


class TestCertifyContracts:
    def test_mlp_rejected(self):
        spec = models.ModelSpec("mlp", (2, 4, 2))
        params = models.init_params(spec, 0)
        ds = square_dataset(np.random.default_rng(0))
        with pytest.raises(ContractError):
            certify.certify_hypocritical(spec, params, ds, 0.1)

    def test_eps_zero_hyp_bound_is_zero(self):
        spec, params = tiny_net(1)
        ds = square_dataset(np.random.default_rng(1))
        rep = certify.certify_model(spec, params, ds, 0.0, with_empirical=False)
        if rep.n_minus:
            assert rep.cert_hyp_upper_Dminus == 0.0  # margins never go below zero

    def test_eps_zero_adv_equals_strict_margin_accuracy(self):
        spec, params = tiny_net(2)
        ds = square_dataset(np.random.default_rng(2))
        rep = certify.certify_model(spec, params, ds, 0.0, with_empirical=False)
        logits = models.forward_logits(spec, params, ds.inputs).data
        pred = models.predict(logits)
        correct = pred == ds.labels
        part = np.partition(logits, -2, axis=1)
        strict = logits[np.arange(len(ds)), ds.labels] - part[:, -2] > 0
        assert rep.cert_adv_lower == (correct & strict).mean()

    def test_all_large_margins_bound_zero(self):
        # anchors far from the data force one unit to dominate
        spec = models.ModelSpec("linf_dist_net", (2, 2))
        flat = np.array([5.0, 5.0, 0.5, 0.5, 0.0, 0.0])
        params = models.ModelParams(flat)
        X = np.array([[0.0, 0.0], [0.1, 0.2]])
        y = np.array([0, 0])  # both predicted 1 (closer anchor), margins ~4
        ds = data.Dataset(X, y, num_classes=2)
        rep = certify.certify_model(spec, params, ds, 0.5, with_empirical=False)
        assert rep.n_minus == 2
        assert rep.cert_hyp_upper_Dminus == 0.0

    def test_monotone_in_eps(self):
        spec, params = tiny_net(3)
        ds = square_dataset(np.random.default_rng(3), n=40)
        hyp = []
        adv = []
        for eps in (0.0, 0.05, 0.1, 0.2, 0.4):
            rep = certify.certify_model(spec, params, ds, eps, with_empirical=False)
            hyp.append(rep.cert_hyp_upper_Dminus)
            adv.append(rep.cert_adv_lower)
        assert all(a <= b for a, b in zip(hyp, hyp[1:]))
        assert all(a >= b for a, b in zip(adv, adv[1:]))

    def test_attack_independent(self):
        spec, params = tiny_net(4)
        ds = square_dataset(np.random.default_rng(4))
        reps = [certify.certify_model(spec, params, ds, 0.1,
                                      attack_suite=training.evaluation_suite(seed=s))
                for s in (0, 99)]
        assert reps[0].cert_hyp_upper_Dminus == reps[1].cert_hyp_upper_Dminus
        assert reps[0].cert_adv_lower == reps[1].cert_adv_lower


class TestSoundness:
    def test_empirical_below_certified_and_grid_respects_certificates(self):
        rng = np.random.default_rng(7)
        eps = 0.08
        threat = ThreatModel("linf", eps, (0.0, 1.0))
        for trial in range(10):
            spec, params = tiny_net(100 + trial)
            ds = square_dataset(rng, n=15)
            rep = certify.certify_model(spec, params, ds, eps,
                                        attack_suite=training.evaluation_suite(steps=10))
            if rep.emp_hyp_Dminus is not None:
                assert rep.emp_hyp_Dminus <= rep.cert_hyp_upper_Dminus
            assert rep.emp_adv_acc >= rep.cert_adv_lower
            logits = models.forward_logits(spec, params, ds.inputs).data
            pred = models.predict(logits)
            margins = models.margins_batch(logits, ds.labels)
            for i in range(len(ds)):
                if pred[i] != ds.labels[i] and margins[i] >= 2 * eps:
                    # certified-uncorrectable: the grid oracle must agree
                    assert not attacks.brute_force_attack(
                        spec, params, ds.inputs[i], int(ds.labels[i]), threat,
                        "hypocritical", 31)

    def test_certified_robust_never_flipped_by_grid(self):
        rng = np.random.default_rng(8)
        eps = 0.05
        threat = ThreatModel("linf", eps, (0.0, 1.0))
        flips_checked = 0
        for trial in range(10):
            spec, params = tiny_net(200 + trial)
            ds = square_dataset(rng, n=15)
            logits = models.forward_logits(spec, params, ds.inputs).data
            pred = models.predict(logits)
            part = np.partition(logits, -2, axis=1)
            gaps = logits[np.arange(len(ds)), ds.labels] - part[:, -2]
            for i in range(len(ds)):
                if pred[i] == ds.labels[i] and gaps[i] > 2 * eps:
                    flips_checked += 1
                    assert not attacks.brute_force_attack(
                        spec, params, ds.inputs[i], int(ds.labels[i]), threat,
                        "adversarial_untargeted", 31)
        assert flips_checked > 0


class TestCertReportFile:
    def test_fields_serialized(self, tmp_path):
        spec, params = tiny_net(5)
        ds = square_dataset(np.random.default_rng(5))
        rep = certify.certify_model(spec, params, ds, 0.1, with_empirical=False)
        path = tmp_path / "cert.txt"
        certify.save_cert_report(rep, path)
        text = path.read_text()
        for field in certify.CERT_FIELDS:
            assert f"{field} = " in text
