import numpy as np
import pytest

from verilab import attacks, data, models
from verilab.attacks import AttackConfig, ThreatModel
from verilab.errors import ConfigError, ResourceError


def affine_mlp(w, b):
    """An MLP that is exactly affine on [0,1]^2: relu kept active by a
    large hidden bias, which the output layer then cancels."""
    spec = models.ModelSpec("mlp", (2, 2, 2))
    shift = 10.0
    w1 = np.eye(2)
    b1 = np.full(2, shift)
    w2 = np.asarray(w, dtype=np.float64)
    b2 = np.asarray(b, dtype=np.float64) - w2.T @ np.full(2, shift)
    flat = np.concatenate([w1.ravel(), b1, w2.ravel(), b2])
    return spec, models.ModelParams(flat)


def random_mlp(rng, widths=(2, 8, 2)):
    spec = models.ModelSpec("mlp", widths)
    params = models.init_params(spec, int(rng.integers(0, 2**31)))
    return spec, params


def corner_search_success(spec, params, x, y, threat, objective, target=None):
    """All corners of the clipped box plus the center; exact for affine nets."""
    lo = np.maximum(x - threat.eps, threat.clamp[0])
    hi = np.minimum(x + threat.eps, threat.clamp[1])
    corners = np.array([[a, b] for a in (lo[0], hi[0]) for b in (lo[1], hi[1])]
                       + [list(x)])
    preds = models.predict(models.forward_logits(spec, params, corners).data)
    clean = models.predict(models.forward_logits(spec, params, x[None, :]).data)[0]
    return bool(attacks.objective_success(objective, preds, y, clean, target).any())


class TestPgdContracts:
    def test_eps_zero_returns_input(self):
        rng = np.random.default_rng(0)
        spec, params = random_mlp(rng)
        x = np.array([0.4, 0.6])
        threat = ThreatModel("linf", 0.0)
        for objective in ("hypocritical", "adversarial_untargeted", "stability"):
            cfg = AttackConfig(objective=objective, steps=5, step_size=1.0,
                               random_start=True)
            x_adv, ok = attacks.pgd(spec, params, x, 0, threat, cfg)
            assert np.array_equal(x_adv, x)
            if objective == "stability":
                assert not ok

    def test_eps_zero_hypocritical_success_iff_correct(self):
        rng = np.random.default_rng(1)
        spec, params = random_mlp(rng)
        threat = ThreatModel("linf", 0.0)
        cfg = AttackConfig(objective="hypocritical", steps=1, step_size=1.0)
        for _ in range(20):
            x = rng.random(2)
            pred = models.predict(models.forward_logits(spec, params, x[None, :]).data)[0]
            for y in (0, 1):
                _, ok = attacks.pgd(spec, params, x, y, threat, cfg)
                assert ok == (pred == y)

    def test_already_correct_succeeds_at_step_zero(self):
        rng = np.random.default_rng(2)
        spec, params = random_mlp(rng)
        x = rng.random(2)
        pred = int(models.predict(models.forward_logits(spec, params, x[None, :]).data)[0])
        cfg = AttackConfig(objective="hypocritical", steps=3)
        x_adv, ok = attacks.pgd(spec, params, x, pred, ThreatModel("linf", 0.1), cfg)
        assert ok and np.array_equal(x_adv, x)

    @pytest.mark.parametrize("norm", ["linf", "l2"])
    def test_feasibility(self, norm):
        rng = np.random.default_rng(3)
        spec, params = random_mlp(rng)
        threat = ThreatModel(norm, 0.15)
        cfg = AttackConfig(objective="adversarial_untargeted", steps=12,
                           step_size=0.05, restarts=3, random_start=True, seed=9)
        for i in range(25):
            x = rng.random(2)
            y = int(rng.integers(0, 2))
            x_adv, _ = attacks.pgd(spec, params, x, y, threat, cfg, example_index=i)
            delta = x_adv - x
            if norm == "linf":
                assert np.abs(delta).max() <= threat.eps + 1e-9
            else:
                assert np.linalg.norm(delta) <= threat.eps + 1e-9
            assert x_adv.min() >= 0.0 and x_adv.max() <= 1.0

    def test_linear_model_matches_corner_search(self):
        rng = np.random.default_rng(4)
        threat = ThreatModel("linf", 0.3)
        cfg = AttackConfig(objective="adversarial_untargeted", steps=10)
        agreements = 0
        for trial in range(50):
            w = rng.standard_normal((2, 2))
            b = rng.standard_normal(2) * 0.1
            spec, params = affine_mlp(w, b)
            x = rng.random(2)
            y = int(rng.integers(0, 2))
            _, got = attacks.pgd(spec, params, x, y, threat, cfg, example_index=trial)
            want = corner_search_success(spec, params, x, y, threat,
                                         "adversarial_untargeted")
            assert got == want
            agreements += got
        assert agreements > 0  # the radius is large enough that many flips exist

    def test_targeted_needs_target(self):
        with pytest.raises(ConfigError):
            AttackConfig(objective="adversarial_targeted", steps=1)

    @pytest.mark.parametrize("norm", ["linf", "l2"])
    def test_batched_runner_feasible(self, norm):
        rng = np.random.default_rng(13)
        spec, params = random_mlp(rng)
        X = rng.random((16, 2))
        y = rng.integers(0, 2, size=16)
        threat = ThreatModel(norm, 0.1)
        out = attacks.pgd_batch(spec, params, X, y, threat, "adversarial_untargeted",
                                steps=8, step_size=0.04,
                                rng=np.random.default_rng(1))
        delta = out - X
        if norm == "linf":
            assert np.abs(delta).max() <= threat.eps + 1e-9
        else:
            assert np.linalg.norm(delta, axis=1).max() <= threat.eps + 1e-9
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestBruteForce:
    def test_eps_zero_reduces_to_clean_predicate(self):
        rng = np.random.default_rng(5)
        spec, params = random_mlp(rng)
        x = rng.random(2)
        pred = int(models.predict(models.forward_logits(spec, params, x[None, :]).data)[0])
        threat = ThreatModel("linf", 0.0)
        assert attacks.brute_force_attack(spec, params, x, pred, threat,
                                          "hypocritical", 5)
        assert not attacks.brute_force_attack(spec, params, x, 1 - pred, threat,
                                              "hypocritical", 5)

    def test_budget_enforced(self):
        rng = np.random.default_rng(6)
        spec, params = random_mlp(rng, widths=(4, 4, 2))
        with pytest.raises(ResourceError):
            attacks.brute_force_attack(spec, params, np.zeros(4), 0,
                                       ThreatModel("linf", 0.1), "hypocritical", 100)

    @pytest.mark.parametrize("objective", attacks.OBJECTIVES)
    def test_pgd_never_beats_grid(self, objective):
        rng = np.random.default_rng(7)
        threat = ThreatModel("linf", 0.12)
        for trial in range(50):
            spec, params = random_mlp(rng)
            x = rng.random(2)
            y = int(rng.integers(0, 2))
            target = 1 - y
            cfg = AttackConfig(objective=objective, steps=10, restarts=2,
                               seed=trial, target=target if
                               objective == "adversarial_targeted" else None)
            _, pgd_ok = attacks.pgd(spec, params, x, y, threat, cfg, example_index=trial)
            if pgd_ok:
                grid_ok = attacks.brute_force_attack(
                    spec, params, x, y, threat, objective, 41,
                    target=target if objective == "adversarial_targeted" else None)
                assert grid_ok, f"PGD won but the grid oracle lost ({objective})"


class TestBatchAttack:
    def make_dataset(self, rng, n=12):
        X = rng.random((n, 2))
        y = rng.integers(0, 2, size=n)
        return data.Dataset(X, y, num_classes=2)

    def test_empty_dataset(self):
        rng = np.random.default_rng(8)
        spec, params = random_mlp(rng)
        ds = data.Dataset(np.empty((0, 2)), np.empty(0, dtype=int), num_classes=2)
        led = attacks.batch_attack(spec, params, ds, ThreatModel("linf", 0.1),
                                   AttackConfig(objective="hypocritical", steps=2))
        assert led.success.size == 0

    def test_worker_count_invariance(self):
        rng = np.random.default_rng(9)
        spec, params = random_mlp(rng)
        ds = self.make_dataset(rng)
        threat = ThreatModel("linf", 0.2)
        cfg = AttackConfig(objective="hypocritical", steps=8, restarts=2,
                           random_start=True, seed=3)
        led1 = attacks.batch_attack(spec, params, ds, threat, cfg, workers=1)
        led4 = attacks.batch_attack(spec, params, ds, threat, cfg, workers=4)
        assert np.array_equal(led1.success, led4.success)
        assert np.array_equal(led1.points, led4.points)

    def test_subset_matches_full_run(self):
        rng = np.random.default_rng(10)
        spec, params = random_mlp(rng)
        ds = self.make_dataset(rng)
        threat = ThreatModel("linf", 0.2)
        cfg = AttackConfig(objective="adversarial_untargeted", steps=8,
                           restarts=2, random_start=True, seed=3)
        full = attacks.batch_attack(spec, params, ds, threat, cfg)
        idx = [1, 4, 7]
        sub = attacks.batch_attack(spec, params, ds, threat, cfg, indices=idx)
        assert np.array_equal(sub.success, full.success[idx])
        assert np.array_equal(sub.points, full.points[idx])


class TestMonotonicity:
    def test_restart_dominance(self):
        rng = np.random.default_rng(11)
        spec, params = random_mlp(rng)
        ds = TestBatchAttack().make_dataset(rng, n=30)
        threat = ThreatModel("linf", 0.08)
        rates = []
        for restarts in (1, 2, 4):
            cfg = AttackConfig(objective="hypocritical", steps=4, restarts=restarts,
                               seed=5)
            led = attacks.batch_attack(spec, params, ds, threat, cfg)
            rates.append(led.success.sum())
        assert rates[0] <= rates[1] <= rates[2]

    def test_eps_monotone_via_nested_solutions(self):
        # success at eps implies success at eps' >= eps once the smaller
        # ball's solution is replayed inside the larger ball
        rng = np.random.default_rng(12)
        spec, params = random_mlp(rng)
        cfg = AttackConfig(objective="adversarial_untargeted", steps=6, seed=1)
        for trial in range(20):
            x = rng.random(2)
            y = int(rng.integers(0, 2))
            small = ThreatModel("linf", 0.05)
            large = ThreatModel("linf", 0.15)
            x_small, ok_small = attacks.pgd(spec, params, x, y, small, cfg,
                                            example_index=trial)
            x_large, ok_large = attacks.pgd(spec, params, x, y, large, cfg,
                                            example_index=trial)
            pred = models.predict(models.forward_logits(spec, params,
                                                        x_small[None, :]).data)[0]
            replay_ok = bool(attacks.objective_success("adversarial_untargeted",
                                                       pred, y))
            assert (not ok_small) or (ok_large or replay_ok)
