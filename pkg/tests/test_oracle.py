import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telesim import oracle as orc
from telesim.exceptions import DomainError
from telesim.qubit import f_max_from_purity

PAPER = dict(p=0.01, mu=0.011, eta_i=0.13, eta_s=6.3e-3)


def paper_budget(**overrides):
    return orc.noise_probabilities(**{**PAPER, **overrides})


class TestNoiseProbabilities:
    def test_paper_values(self):
        b = paper_budget()
        assert b.p11 == pytest.approx(0.01 * 0.011 * 0.13 / 8 * 6.3e-3, rel=1e-12)
        assert b.p11 == pytest.approx(1.7875e-6 * 6.3e-3, rel=1e-4)
        assert b.p20 == pytest.approx(0.01 * 0.011**2 * 0.87 / 32 * 6.3e-3, rel=1e-12)
        assert b.p02 == pytest.approx(0.01**2 * 0.13**2 / 16 * 6.3e-3, rel=1e-12)
        # two-idler noise dominates the two-WCS noise at these settings
        assert b.p02 > b.p20

    def test_mu_zero_limit(self):
        b = paper_budget(mu=0.0)
        assert b.p11 == 0.0
        assert b.p20 == 0.0
        assert b.p02 == pytest.approx(0.01**2 * 0.13**2 * 6.3e-3 / 16)

    def test_unit_heralding_kills_p20(self):
        assert paper_budget(eta_i=1.0).p20 == 0.0

    def test_exact_p02_prefactor(self):
        approx = paper_budget().p02
        exact = orc.noise_probabilities(**PAPER, exact_p02=True).p02
        assert exact == pytest.approx(approx * (1 - 0.011 - 0.011**2 / 2), rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            orc.noise_probabilities(-0.1, 0.01, 0.1, 0.1)
        with pytest.raises(DomainError):
            orc.noise_probabilities(0.01, 1.2, 0.1, 0.1)


class TestPredictions:
    def test_paper_fidelity_and_purity(self):
        b = paper_budget()
        f = orc.predicted_fidelity(b)
        assert 0.925 <= f <= 0.935
        assert f == pytest.approx(0.9329, abs=5e-4)
        pur = orc.predicted_purity(b)
        assert 0.865 <= pur <= 0.880
        assert pur == pytest.approx(0.8748, abs=5e-4)

    def test_no_noise(self):
        b = orc.NoiseBudget(p=0, mu=0, eta_i=0, eta_s=0, p11=1e-6, p20=0, p02=0)
        assert orc.predicted_fidelity(b) == pytest.approx(1.0)
        assert orc.predicted_purity(b) == pytest.approx(1.0)

    def test_pure_noise(self):
        b = orc.NoiseBudget(p=0, mu=0, eta_i=0, eta_s=0, p11=0, p20=1e-7, p02=2e-7)
        assert orc.predicted_fidelity(b) == pytest.approx(0.5)
        assert orc.predicted_purity(b) == pytest.approx(0.5)

    def test_zero_denominator(self):
        b = orc.NoiseBudget(p=0, mu=0, eta_i=0, eta_s=0, p11=0, p20=0, p02=0)
        with pytest.raises(DomainError):
            orc.predicted_fidelity(b)

    @given(
        st.floats(1e-4, 0.1),
        st.floats(1e-4, 0.1),
        st.floats(0.01, 1.0),
        st.floats(1e-4, 1.0),
    )
    @settings(max_examples=300)
    def test_fmax_equals_fidelity(self, p, mu, eta_i, eta_s):
        # the model is exactly depolarizing, so the purity ceiling is tight
        b = orc.noise_probabilities(p, mu, eta_i, eta_s)
        f = orc.predicted_fidelity(b)
        assert f_max_from_purity(orc.predicted_purity(b)) == pytest.approx(f, abs=1e-12)
        assert 0.5 <= f <= 1.0

    def test_monotone_in_mu_and_eta_i(self):
        # decreasing in mu once past the P20-dominated regime, increasing in eta_i
        mus = np.linspace(0.03, 0.2, 60)
        fs = [orc.predicted_fidelity(paper_budget(mu=m)) for m in mus]
        assert all(a > b for a, b in zip(fs, fs[1:]))
        # increasing in eta_i where the two-WCS term dominates the noise;
        # once two-idler noise (~eta_i^2) takes over the trend reverses
        etas = np.linspace(0.02, 0.95, 60)
        fs = [
            orc.predicted_fidelity(orc.noise_probabilities(1e-4, 0.1, e, 6.3e-3))
            for e in etas
        ]
        assert all(a < b for a, b in zip(fs, fs[1:]))


class TestSnrCondition:
    def test_paper_margins(self):
        holds, (m1, m2) = orc.snr_condition(0.01, 0.011, 0.13)
        assert holds
        assert m1 == pytest.approx(47.27, abs=0.01)
        assert m2 == pytest.approx(16.92, abs=0.01)

    def test_first_margin_unity_fails(self):
        holds, (m1, _) = orc.snr_condition(0.001, 4 * 0.13, 0.13)
        assert m1 == pytest.approx(1.0)
        assert not holds

    def test_p_zero_second_margin_infinite(self):
        holds, (m1, m2) = orc.snr_condition(0.0, 0.011, 0.13)
        assert math.isinf(m2)
        assert holds == (m1 >= 10.0)

    def test_threshold_override(self):
        holds, _ = orc.snr_condition(0.01, 0.011, 0.13, threshold=50.0)
        assert not holds


class TestGsiIdeal:
    def test_values(self):
        assert orc.gsi_ideal(0.01) == pytest.approx(101.0)
        assert orc.gsi_ideal(1.0) == pytest.approx(2.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            orc.gsi_ideal(0.0)
        with pytest.raises(DomainError):
            orc.gsi_ideal(-0.3)


class TestFibreInvariance:
    def test_paper_attenuation(self):
        f_with, f_without, delta = orc.fibre_invariance_check(paper_budget(), 0.368)
        assert abs(delta) < 1e-12
        assert f_without == pytest.approx(0.9329, abs=5e-4)
        assert f_with == pytest.approx(f_without)

    def test_identity(self):
        f_with, f_without, delta = orc.fibre_invariance_check(paper_budget(), 1.0)
        assert delta == 0.0

    def test_random_grid(self):
        rng = np.random.default_rng(21)
        for _ in range(10_000):
            p, mu, eta_i, eta_s = rng.uniform(1e-4, 1.0, size=4)
            eta = rng.uniform(1e-3, 1.0)
            b = orc.noise_probabilities(p, mu, eta_i, eta_s)
            _, _, delta = orc.fibre_invariance_check(b, eta)
            assert abs(delta) < 1e-12

    def test_idler_only_loss_breaks_invariance(self):
        _, _, delta = orc.fibre_invariance_check(paper_budget(), 0.368, arms="idler")
        # P02 shrinks by eta^2 while P11 only by eta, so F shifts (upward here)
        assert abs(delta) > 1e-6

    def test_domain(self):
        with pytest.raises(DomainError):
            orc.fibre_invariance_check(paper_budget(), 0.0)
        with pytest.raises(DomainError):
            orc.fibre_invariance_check(paper_budget(), 0.5, arms="signal")


class TestReportsAndSweeps:
    def test_budget_report_keys(self):
        rep = orc.budget_report(paper_budget())
        for key in ("p11", "p20", "p02", "fidelity", "purity", "f_max", "snr_holds"):
            assert key in rep
        assert rep["snr_holds"] is True
        assert rep["gsi_ideal"] == pytest.approx(101.0)

    def test_sweep_rows(self):
        rows = list(orc.sweep_budgets([0.005, 0.01], [0.011, 0.02], 0.13, 6.3e-3))
        assert len(rows) == 4
        for row in rows:
            assert set(row) == {"p", "mu", "eta_i", "eta_s", "P11", "P20", "P02", "F", "P"}
            assert 0.5 <= row["F"] <= 1.0
