import logging

import numpy as np
import pytest
from hypothesis import given, strategies

from cavity_transport.baselines import (COLLECTIVE, INDIVIDUAL, baseline_prediction, broadening_estimate,
                                        classify_regime, current_g0, current_g0_two_band,
                                        enhancement_ceiling, perturbative_parameter,
                                        second_order_broadening, tavis_cummings_frequencies)
from cavity_transport.model import ModelParams, bloch_basis
from cavity_transport.selfenergy import lead_rates
from cavity_transport.spectral import FrequencyGrid

rates = strategies.floats(min_value=1e-6, max_value=1.0)


class TestCurrentG0:
    def test_matched_hopping(self):
        assert current_g0(0.01, 0.005) == pytest.approx(0.0025)

    def test_weak_hopping(self):
        gamma, t = 0.1, 1e-4
        assert current_g0(gamma, t) == pytest.approx(2 * t ** 2 / gamma, rel=1e-5)

    def test_narrow_lead(self):
        assert current_g0(2.5e-4, 0.07) == pytest.approx(1.24999e-4, rel=1e-5)

    def test_blocked_band(self):
        assert current_g0(0.01, 0.0) == 0.0

    @given(rates, rates, strategies.floats(min_value=1e-3, max_value=1e3))
    def test_depends_on_ratio_only(self, gamma, t, scale):
        assert current_g0(scale * gamma, scale * t) == pytest.approx(scale * current_g0(gamma, t), rel=1e-9)

    @given(rates, rates)
    def test_bounded_and_monotone(self, gamma, t):
        current = current_g0(gamma, t)
        assert 0 <= current <= gamma / 2
        assert current_g0(gamma, 1.5 * t) >= current


class TestTwoBand:
    def test_blocked_lower_band(self):
        assert current_g0_two_band(0.01, 1e-5, 0.0) == pytest.approx(5e-6)

    def test_equal_rates(self):
        assert current_g0_two_band(0.01, 0.01, 0.0) == pytest.approx(current_g0(0.01, 0.0) + 0.005)

    def test_enhancement_parameters(self):
        assert current_g0_two_band(1e-2, 1e-5, 5e-5) == pytest.approx(5.5e-6)

    def test_warns_outside_blocked_regime(self, caplog):
        with caplog.at_level(logging.WARNING, logger="cavity_transport.baselines"):
            current_g0_two_band(0.01, 1e-5, 0.005)
        assert "t1 << Gamma1" in caplog.text

    def test_quiet_inside_blocked_regime(self, caplog):
        with caplog.at_level(logging.WARNING, logger="cavity_transport.baselines"):
            current_g0_two_band(0.01, 1e-5, 5e-5)
        assert caplog.text == ""


class TestEnhancementCeiling:
    def test_equal_rates(self):
        assert enhancement_ceiling(0.01, 0.01, 0.0) == pytest.approx(2.0)

    def test_rate_ratio(self):
        assert enhancement_ceiling(1e-2, 1e-4, 5e-5) == pytest.approx(1.01 / (1e-4 + 1e-2))
        assert enhancement_ceiling(1e-2, 1e-4, 5e-5) == pytest.approx(100.0, rel=1e-2)

    @given(rates, rates, strategies.floats(min_value=0.0, max_value=1.0))
    def test_at_least_one_for_blocked_band(self, gamma1, gamma2, fraction):
        t1 = 0.5 * fraction * gamma1
        assert enhancement_ceiling(gamma1, gamma2, t1) >= 1.0 - 1e-12


class TestBroadening:
    def test_needs_a_photon_or_an_electron(self):
        assert broadening_estimate(0.03, 5e-3, 0.0, 0.0) == 0.0

    def test_half_filled(self):
        assert broadening_estimate(0.03, 5e-3, 0.0, 0.5) == pytest.approx(0.36)

    def test_quadratic_in_coupling(self):
        assert broadening_estimate(0.06, 5e-3, 0.5, 0.5) == pytest.approx(4 * broadening_estimate(0.03, 5e-3, 0.5, 0.5))

    def test_frequency_resolved_matches_estimate_on_resonance(self):
        params = ModelParams(n_sites=1, t1=0.07, t2=0.07, g=0.03, kappa=5e-3, gamma1=2.5e-4, gamma2=2.5e-4)
        basis = bloch_basis(params)
        grid = FrequencyGrid(-1.0, 1.0, 9)
        occupations = {1: np.array([0.8]), 2: np.array([0.5])}

        chi = second_order_broadening(params, basis, grid, occupations)

        lower = chi[1].values[grid.index_of(-0.5), 0, 0]
        upper = chi[2].values[grid.index_of(0.5), 0, 0]
        assert lower.real == pytest.approx(0.36 + lead_rates(params, basis, 1)[0, 0], rel=1e-6)
        assert upper.real == pytest.approx(broadening_estimate(0.03, 5e-3, 0.0, 0.2)
                                           + lead_rates(params, basis, 2)[0, 0], rel=1e-6)

    def test_frequency_resolved_falls_off_resonance(self):
        params = ModelParams(n_sites=4, t1=0.07, t2=0.07, g=0.03, kappa=5e-3)
        basis = bloch_basis(params)
        grid = FrequencyGrid(-2.0, 2.0, 4097)
        chi = second_order_broadening(params, basis, grid)[1]
        light = chi.values - lead_rates(params, basis, 1)[None]

        assert np.allclose(light, np.conj(np.swapaxes(light, 1, 2)))
        assert light.real.min() >= 0
        k = 0
        peak = grid.omegas[np.argmax(light[:, k, k].real)]
        assert peak == pytest.approx(basis.energies(1)[k], abs=2 * grid.d_omega)

    def test_prediction_fields(self):
        params = ModelParams(n_sites=5, t2=0.07, g=0.03, kappa=5e-3)
        prediction = baseline_prediction(params)
        assert prediction.j0 == pytest.approx(current_g0(params.gamma2, params.t2))
        assert prediction.j0_per_band[1] == 0.0
        np.testing.assert_allclose(prediction.chi_estimate[1], 0.36)
        np.testing.assert_allclose(prediction.chi_estimate[2], 0.36)
        assert prediction.perturbative_parameter == pytest.approx(720.0)
        assert prediction.regime == INDIVIDUAL
        for value in (prediction.j0, prediction.j0_two_band, prediction.enhancement_ceiling):
            assert np.isfinite(value) and value >= 0


class TestTavisCummings:
    @pytest.mark.parametrize("n", [1, 3, 10])
    def test_collective_splitting(self, n):
        params = ModelParams(n_sites=n, t1=0.0, t2=0.0, g=0.01)
        frequencies = tavis_cummings_frequencies(params)
        assert len(frequencies) == n + 1
        assert frequencies[0] == pytest.approx(1 - 0.01 * np.sqrt(n))
        assert frequencies[-1] == pytest.approx(1 + 0.01 * np.sqrt(n))
        np.testing.assert_allclose(frequencies[1:-1], 1.0)

    def test_dispersive_chain(self):
        params = ModelParams(n_sites=6, t1=0.0, t2=0.07, g=0.03)
        basis = bloch_basis(params)
        frequencies = tavis_cummings_frequencies(params)
        assert np.all(np.diff(frequencies) >= 0)
        assert frequencies.sum() == pytest.approx(1 + (basis.energies(2) - basis.energies(1)).sum())


class TestRegime:
    def test_individual(self):
        params = ModelParams(t2=0.07, kappa=5e-3, g=0.03)
        assert classify_regime(params) == INDIVIDUAL

    def test_collective(self):
        params = ModelParams(t2=2.5e-3, kappa=0.05, g=0.005)
        assert classify_regime(params) == COLLECTIVE

    def test_strong_coupling_is_collective(self):
        params = ModelParams(t2=0.07, kappa=5e-3, g=0.3)
        assert classify_regime(params) == COLLECTIVE

    def test_perturbative_parameter_uses_smaller_rate(self):
        params = ModelParams(g=0.01, kappa=0.05, gamma1=0.01, gamma2=1e-3)
        assert perturbative_parameter(params) == pytest.approx(2.0)
