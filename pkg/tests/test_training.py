import numpy as np
import pytest

from verilab import autodiff as ad, data, models, training
from verilab.attacks import ThreatModel
from verilab.data import SyntheticSpec
from verilab.errors import ConfigError, NumericError
from verilab.training import TrainConfig

from util import central_difference, rel_error


def blobs(n=200, seed=0, cov=0.05, spread=1.0):
    spec = SyntheticSpec(kind="gaussians", n=n, seed=seed,
                         means=((-spread, 0.0), (spread, 0.0)), cov=cov)
    return data.gen_synthetic(spec)


def mlp_spec():
    return models.ModelSpec("mlp", (2, 16, 2))


THREAT = ThreatModel("linf", 0.1, None)


def robust_cfg(method, lam=1.0, eps=0.1, **kw):
    return TrainConfig(method=method, epochs=2, batch_size=32, lr=0.05, lam=lam,
                       threat=ThreatModel("linf", eps, None), seed=7, **kw)


class TestCollapseIdentities:
    def batch(self, seed=0):
        ds = blobs(n=32, seed=seed)
        return ds.inputs, ds.labels

    def test_lambda_zero_trades_and_thrm_equal_standard_bitwise(self):
        spec = mlp_spec()
        params = models.init_params(spec, 1)
        X, y = self.batch()
        std_cfg = TrainConfig(method="standard", seed=7)
        std_loss, _ = training.batch_loss(spec, params, X, y, std_cfg)
        for method in ("trades", "thrm"):
            cfg = robust_cfg(method, lam=0.0)
            pts = training.inner_points(spec, params, X, y, cfg,
                                        np.random.default_rng(0))
            loss, _ = training.batch_loss(spec, params, X, y, cfg, attack_points=pts)
            assert loss.item() == std_loss.item()

    def test_eps_zero_pgd_at_equals_standard_bitwise(self):
        spec = mlp_spec()
        params = models.init_params(spec, 2)
        X, y = self.batch(1)
        std_loss, _ = training.batch_loss(spec, params, X, y,
                                          TrainConfig(method="standard", seed=7))
        cfg = robust_cfg("pgd_at", eps=0.0)
        pts = training.inner_points(spec, params, X, y, cfg, np.random.default_rng(3))
        assert np.array_equal(pts, X)
        loss, _ = training.batch_loss(spec, params, X, y, cfg, attack_points=pts)
        assert loss.item() == std_loss.item()


class TestLossGradients:
    @pytest.mark.parametrize("method,lam", [("standard", 0.0), ("pgd_at", 0.0),
                                            ("trades", 2.5), ("thrm", 2.5)])
    def test_matches_finite_differences_on_frozen_attack_points(self, method, lam):
        spec = mlp_spec()
        params = models.init_params(spec, 4)
        ds = blobs(n=16, seed=2)
        X, y = ds.inputs, ds.labels
        if method == "standard":
            cfg = TrainConfig(method="standard", seed=7)
            pts = None
        else:
            cfg = robust_cfg(method, lam=lam)
            pts = training.inner_points(spec, params, X, y, cfg,
                                        np.random.default_rng(5))
        loss, tensors = training.batch_loss(spec, params, X, y, cfg, attack_points=pts)
        ad.backward(loss)
        grad = models.flatten_grads(spec, tensors)

        def loss_at(flat):
            p = models.ModelParams(flat.copy())
            val, _ = training.batch_loss(spec, p, X, y, cfg, attack_points=pts)
            return val.item()

        fd = central_difference(loss_at, params.flat)
        assert rel_error(grad, fd) < 1e-4


class TestTrainLoop:
    def test_converges_on_separable_blobs(self):
        ds = blobs(n=300, seed=3, cov=0.03)
        spec = mlp_spec()
        cfg = TrainConfig(method="standard", epochs=40, batch_size=32, lr=0.1,
                          weight_decay=0.0, seed=0)
        params, metrics = training.train(spec, models.init_params(spec, 0), ds, cfg)
        assert metrics[-1].train_acc >= 0.99

    def test_deterministic(self):
        ds = blobs(n=120, seed=4)
        spec = mlp_spec()
        cfg = TrainConfig(method="thrm", epochs=3, batch_size=32, lr=0.05, lam=1.0,
                          threat=ThreatModel("linf", 0.1, None), seed=9)
        a, _ = training.train(spec, models.init_params(spec, 9), ds, cfg)
        b, _ = training.train(spec, models.init_params(spec, 9), ds, cfg)
        assert np.array_equal(a.flat, b.flat)

    def test_empty_dataset_rejected(self):
        ds = data.Dataset(np.empty((0, 2)), np.empty(0, dtype=int), num_classes=2)
        with pytest.raises(ConfigError):
            training.train(mlp_spec(), models.init_params(mlp_spec(), 0), ds,
                           TrainConfig(method="standard", epochs=1))

    def test_robust_method_needs_threat(self):
        with pytest.raises(ConfigError):
            TrainConfig(method="pgd_at", epochs=1)

    def test_lr_decay_applied(self):
        ds = blobs(n=64, seed=5)
        spec = mlp_spec()
        cfg = TrainConfig(method="standard", epochs=3, batch_size=32, lr=0.1,
                          lr_decay_epochs=(2,), lr_decay_factor=0.5, seed=0)
        _, metrics = training.train(spec, models.init_params(spec, 0), ds, cfg)
        assert metrics[0].lr == 0.1 and metrics[1].lr == 0.05 and metrics[2].lr == 0.05

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_non_finite_loss_aborts(self):
        ds = blobs(n=32, seed=6)
        spec = mlp_spec()
        params = models.init_params(spec, 0)
        params.flat[:] = 1e300  # forward overflows to inf logits
        cfg = TrainConfig(method="standard", epochs=1, batch_size=32, lr=0.1, seed=0)
        with pytest.raises((NumericError,)):
            training.train(spec, params, ds, cfg)

    def test_periodic_attack_estimates_recorded(self):
        ds = blobs(n=64, seed=12)
        spec = mlp_spec()
        cfg = TrainConfig(method="pgd_at", epochs=2, batch_size=32, lr=0.05,
                          threat=ThreatModel("linf", 0.1, None), seed=0, eval_every=2)
        _, metrics = training.train(spec, models.init_params(spec, 0), ds, cfg)
        assert metrics[0].extra == {}
        assert set(metrics[1].extra) == {"hyp5", "adv5"}

    def test_metrics_log_round_trip(self, tmp_path):
        ds = blobs(n=64, seed=7)
        spec = mlp_spec()
        cfg = TrainConfig(method="standard", epochs=2, batch_size=32, seed=0)
        _, metrics = training.train(spec, models.init_params(spec, 0), ds, cfg)
        path = tmp_path / "metrics.log"
        training.save_metrics(metrics, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2 and lines[0].startswith("epoch=1 loss=")


class TestLambdaSweep:
    def test_single_zero_lambda_equals_standard_run(self):
        ds = blobs(n=100, seed=8)
        eval_ds = blobs(n=60, seed=9)
        spec = mlp_spec()
        base = TrainConfig(method="thrm", epochs=3, batch_size=32, lr=0.05,
                           threat=ThreatModel("linf", 0.1, None), seed=3)
        (lam, params, report), = training.lambda_sweep(
            spec, ds, base, [0.0], eval_ds,
            training.evaluation_suite(steps=5, seed=1))
        assert lam == 0.0
        std_cfg = TrainConfig(method="standard", epochs=3, batch_size=32, lr=0.05,
                              seed=3)
        std_params, _ = training.train(spec, models.init_params(spec, 3), ds, std_cfg)
        assert np.array_equal(params.flat, std_params.flat)

    def test_output_length_and_order(self):
        ds = blobs(n=80, seed=10)
        eval_ds = blobs(n=40, seed=11)
        spec = mlp_spec()
        base = TrainConfig(method="trades", epochs=1, batch_size=40, lr=0.05,
                           threat=ThreatModel("linf", 0.05, None), seed=2)
        lams = [0.0, 1.0, 5.0]
        out = training.lambda_sweep(spec, ds, base, lams, eval_ds,
                                    training.evaluation_suite(steps=3, seed=0))
        assert [lam for lam, _, _ in out] == lams
