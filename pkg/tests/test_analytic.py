from fractions import Fraction

import numpy as np
import pytest

from verilab import analytic
from verilab.errors import ConfigError

F = Fraction


class TestExample1Exact:
    @pytest.mark.parametrize("eps", [F(1, 4), F(1, 8), F(1, 6), F(1, 2)])
    def test_reference_rows(self, eps):
        bayes, all_one = analytic.example1_table(eps)
        assert bayes.classifier == "bayes_optimal"
        assert (bayes.r_nat, bayes.r_hyp_D, bayes.r_adv_D,
                bayes.r_hyp_Dminus, bayes.r_adv_Dplus) == (
            F(1, 8), F(1), F(1), F(1), F(1))
        assert (all_one.r_nat, all_one.r_hyp_D, all_one.r_adv_D,
                all_one.r_hyp_Dminus, all_one.r_adv_Dplus) == (
            F(3, 8), F(5, 8), F(3, 8), F(0), F(0))

    def test_rows_satisfy_identities_exactly(self):
        for row in analytic.example1_table(F(1, 4)):
            assert row.r_adv_D == row.r_nat + (1 - row.r_nat) * row.r_adv_Dplus
            assert row.r_hyp_D == 1 - (1 - row.r_hyp_Dminus) * row.r_nat
            assert row.r_sta_D == ((1 - row.r_nat) * row.r_adv_Dplus
                                   + row.r_nat * row.r_sta_Dminus)
            assert row.r_hyp_Dminus <= row.r_sta_Dminus

    def test_all_one_identity_numerically(self):
        _, all_one = analytic.example1_table(F(1, 4))
        assert 1 - (1 - F(0)) * F(3, 8) == F(5, 8) == all_one.r_hyp_D

    @pytest.mark.parametrize("eps", [F(0), F(3, 5), F(1, 3), F(2, 5), 0.1])
    def test_non_tiling_eps_rejected(self, eps):
        with pytest.raises(ConfigError):
            analytic.example1_table(eps)

    def test_float_dyadic_eps_accepted(self):
        rows = analytic.example1_table(0.25)
        assert rows[0].r_nat == F(1, 8)


class TestExample2:
    def test_b_one_recall_zero(self):
        (pt,) = analytic.example2_curves([1.0], resolution=400)
        assert pt.recall == 0.0
        assert pt.precision is None  # nothing predicted positive

    def test_b_zero_recall_one(self):
        (pt,) = analytic.example2_curves([0.0], resolution=400)
        assert pt.recall == 1.0

    def test_ratios_in_unit_interval(self):
        pts = analytic.example2_curves(np.linspace(0, 1, 11), resolution=400)
        for p in pts:
            for v in (p.precision, p.recall, p.adv_risk_Dplus, p.hyp_risk_Dminus):
                assert v is None or 0.0 <= v <= 1.0

    def test_trade_off_opposition(self):
        # wherever one conditional risk moves appreciably between grid
        # points, the other moves the opposite way
        bs = np.linspace(0.0, 1.0, 21)
        pts = analytic.example2_curves(bs, resolution=1000)
        adv = [p.adv_risk_Dplus for p in pts]
        hyp = [p.hyp_risk_Dminus for p in pts]
        assert all(v is not None for v in adv + hyp)
        moved = 0
        for a0, a1, h0, h1 in zip(adv, adv[1:], hyp, hyp[1:]):
            da, dh = a1 - a0, h1 - h0
            if max(abs(da), abs(dh)) > 2e-3:
                moved += 1
                assert da * dh <= 1e-6, (da, dh)
        assert moved >= 10  # the trade-off is present, not vacuous
        assert max(adv) - min(adv) > 0.05 and max(hyp) - min(hyp) > 0.05

    def test_resolution_stability(self):
        bs = [0.2, 0.5, 0.8]
        coarse = analytic.example2_curves(bs, resolution=2000)
        fine = analytic.example2_curves(bs, resolution=4000)
        for a, b in zip(coarse, fine):
            for va, vb in ((a.precision, b.precision), (a.recall, b.recall),
                           (a.adv_risk_Dplus, b.adv_risk_Dplus),
                           (a.hyp_risk_Dminus, b.hyp_risk_Dminus)):
                assert abs(va - vb) < 1e-3

    def test_bad_inputs(self):
        with pytest.raises(ConfigError):
            analytic.example2_curves([0.5], eps=0.0)
        with pytest.raises(ConfigError):
            analytic.example2_curves([1.5])


class TestSamplerConsistency:
    def test_all_one_matches_table(self):
        cmp = analytic.example1_sampler_consistency(100_000, seed=0, eps=F(1, 4))
        by_name = {q.name: q for q in cmp.quantities}
        assert by_name["risk_nat"].exact == F(3, 8)
        assert cmp.all_ok, [q for q in cmp.quantities if not q.ok]

    def test_bayes_matches_table(self):
        cmp = analytic.example1_sampler_consistency(100_000, seed=1, eps=F(1, 4),
                                                    classifier="bayes_optimal")
        by_name = {q.name: q for q in cmp.quantities}
        assert by_name["risk_hyp_D"].exact == F(1)
        assert by_name["risk_hyp_D"].sampled == 1.0  # sigma is zero at p=1
        assert cmp.all_ok, [q for q in cmp.quantities if not q.ok]

    def test_deterministic(self):
        a = analytic.example1_sampler_consistency(10_000, seed=3, eps=F(1, 4))
        b = analytic.example1_sampler_consistency(10_000, seed=3, eps=F(1, 4))
        assert a == b

    def test_small_n_rejected(self):
        with pytest.raises(ConfigError):
            analytic.example1_sampler_consistency(100, seed=0, eps=F(1, 4))
