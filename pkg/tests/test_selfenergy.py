from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies

from cavity_transport.errors import GridMismatchError, NumericalConsistencyError
from cavity_transport.model import BANDS, ModelParams, bloch_basis, contact_pair
from cavity_transport.selfenergy import (electron_greater_se, electron_lesser_se, electron_retarded_se,
                                         lead_rates, photon_greater_se, photon_lesser_se,
                                         photon_retarded_se)
from cavity_transport.solver import initial_state
from cavity_transport.spectral import FrequencyGrid, GridFunction, bath_photon_propagator
from cavity_transport.util import check_positive

ETA = 0.02


@pytest.fixture
def grid():
    return FrequencyGrid(-4.0, 4.0, 8193)


@pytest.fixture
def params():
    return ModelParams(n_sites=1, g=0.05, kappa=0.05, gamma1=0.01, gamma2=0.01)


def level(grid, energy, flavour):
    """Lesser (flavour=1) or greater (flavour=-1) function of a single sharp level"""
    weight = 2 * np.pi * ETA / np.pi / ((grid.omegas - energy) ** 2 + ETA ** 2)
    return GridFunction(grid, (flavour * 1j * weight)[:, None, None])


def empty(grid, n=1):
    return GridFunction(grid, np.zeros((grid.n_points, n, n), dtype=complex))


def direct_correlation(f, h, grid, indices):
    """int dw'/2pi f(w + w') h(w') by explicit summation at selected grid indices"""
    result = []
    for i in indices:
        total = 0j
        for j in range(grid.n_points):
            shifted = i + j - grid.centre
            if 0 <= shifted < grid.n_points:
                total += f[shifted] * h[j]
        result.append(total * grid.d_omega / (2 * np.pi))
    return np.array(result)


class TestElectronLesser:
    def test_bare_lead_term(self, grid):
        params = ModelParams(n_sites=4, g=0.0, gamma1=0.01, gamma2=0.02)
        basis = bloch_basis(params)
        source, _ = contact_pair(basis)
        d_greater, _ = bath_photon_propagator(params, grid)

        result = electron_lesser_se({band: empty(grid, 4) for band in BANDS}, d_greater, params, basis)
        for band in BANDS:
            np.testing.assert_allclose(result[band].values, 1j * params.gamma(band) * source[None].repeat(grid.n_points, 0))

    def test_empty_other_band_leaves_leads_only(self, grid, params):
        basis = bloch_basis(params)
        d_greater, _ = bath_photon_propagator(params, grid)
        result = electron_lesser_se({band: empty(grid) for band in BANDS}, d_greater, params, basis)
        np.testing.assert_allclose(result[1].values, 1j * params.gamma1)

    def test_filled_upper_level(self, grid, params):
        basis = bloch_basis(params)
        d_greater, _ = bath_photon_propagator(params, grid)
        filled = level(grid, params.omega2, 1)
        result = electron_lesser_se({1: empty(grid), 2: filled}, d_greater, params, basis)

        light = result[1].values[:, 0, 0] - 1j * params.gamma1
        # emission of a cavity photon from omega2 leaves weight at omega2 - omega0
        assert grid.omegas[np.argmax(light.imag)] == pytest.approx(params.omega2 - params.omega_cav, abs=0.01)

        indices = [grid.index_of(omega) for omega in np.linspace(-1.0, 0.5, 10)]
        expected = 1j * params.g ** 2 * direct_correlation(filled.values[:, 0, 0], d_greater.values, grid, indices)
        np.testing.assert_allclose(light[indices], expected, rtol=1e-8, atol=1e-12)

    def test_grid_mismatch(self, grid, params):
        basis = bloch_basis(params)
        other = FrequencyGrid(-4.0, 4.0, 4097)
        d_greater, _ = bath_photon_propagator(params, other)
        with pytest.raises(GridMismatchError):
            electron_lesser_se({band: empty(grid) for band in BANDS}, d_greater, params, basis)


class TestElectronGreater:
    def test_bare_lead_term(self, grid):
        params = ModelParams(n_sites=4, g=0.0, gamma1=0.01, gamma2=0.02)
        basis = bloch_basis(params)
        _, drain = contact_pair(basis)
        _, d_lesser = bath_photon_propagator(params, grid)

        result = electron_greater_se({band: empty(grid, 4) for band in BANDS}, d_lesser, params, basis)
        for band in BANDS:
            np.testing.assert_allclose(result[band].values[grid.centre], -1j * params.gamma(band) * drain)

    def test_full_other_band_leaves_leads_only(self, grid, params):
        basis = bloch_basis(params)
        _, d_lesser = bath_photon_propagator(params, grid)
        result = electron_greater_se({band: empty(grid) for band in BANDS}, d_lesser, params, basis)
        np.testing.assert_allclose(result[2].values, -1j * params.gamma2)

    def test_empty_upper_level_thermal_weights(self, grid, params):
        params = replace(params, n_ph=1.0)
        basis = bloch_basis(params)
        _, d_lesser = bath_photon_propagator(params, grid)
        hole = level(grid, params.omega2, -1)
        result = electron_greater_se({1: empty(grid), 2: hole}, d_lesser, params, basis)

        light = 1j * (result[1].values[:, 0, 0] + 1j * params.gamma1)
        assert np.all(light.real >= -1e-12)
        # emission from omega2 + omega0 outweighs absorption from omega2 - omega0 by (N_ph + 1) / N_ph
        emission = light.real[grid.index_of(params.omega2 + params.omega_cav)]
        absorption = light.real[grid.index_of(params.omega2 - params.omega_cav)]
        assert emission / absorption == pytest.approx((params.n_ph + 1) / params.n_ph, rel=1e-2)


class TestElectronRetarded:
    def test_bare_leads(self, grid):
        params = ModelParams(n_sites=3, g=0.0, gamma1=0.01, gamma2=0.02)
        basis = bloch_basis(params)
        d_greater, d_lesser = bath_photon_propagator(params, grid)
        zeros = {band: empty(grid, 3) for band in BANDS}
        sigma = electron_retarded_se(electron_lesser_se(zeros, d_greater, params, basis),
                                     electron_greater_se(zeros, d_lesser, params, basis), params, basis)

        for band in BANDS:
            expected = -0.5j * lead_rates(params, basis, band)
            np.testing.assert_allclose(sigma[band].retarded.values, np.broadcast_to(expected, (grid.n_points, 3, 3)))
            np.testing.assert_allclose(sigma[band].advanced.values,
                                       np.conj(np.swapaxes(sigma[band].retarded.values, 1, 2)))
            np.testing.assert_allclose(sigma[band].chi.values[grid.centre], lead_rates(params, basis, band),
                                       atol=1e-15)

    @settings(max_examples=5)
    @given(strategies.floats(min_value=0.01, max_value=0.08), strategies.floats(min_value=0.0, max_value=2.0))
    def test_dressed_self_energy_is_positive(self, g, n_ph):
        params = ModelParams(n_sites=3, t1=0.01, t2=0.1, g=g, kappa=0.05, gamma1=0.01, gamma2=0.01, n_ph=n_ph)
        state = initial_state(params)
        lesser = {band: state.greens[band].lesser for band in BANDS}
        greater = {band: state.greens[band].greater for band in BANDS}
        sigma = electron_retarded_se(electron_lesser_se(lesser, state.photon.greater, params, state.basis),
                                     electron_greater_se(greater, state.photon.lesser, params, state.basis),
                                     params, state.basis)

        for band in BANDS:
            check_positive(-1j * sigma[band].lesser.values, "-i Sigma<")
            check_positive(1j * sigma[band].greater.values, "i Sigma>")
            diagonal = np.diagonal(sigma[band].retarded.values, axis1=1, axis2=2)
            assert np.all(diagonal.imag <= 1e-12)

    def test_non_hermitian_rates_rejected(self, grid, params):
        basis = bloch_basis(params)
        bad = GridFunction(grid, np.full((grid.n_points, 1, 1), 0.3 + 0.0j))
        with pytest.raises(NumericalConsistencyError):
            electron_retarded_se({1: bad, 2: bad}, {1: empty(grid), 2: empty(grid)}, params, basis)


class TestPhotonSelfEnergy:
    @pytest.mark.parametrize("n_ph", [0.0, 0.5, 2.0])
    def test_bath_only(self, grid, n_ph):
        params = ModelParams(n_sites=1, g=0.0, kappa=0.05, n_ph=n_ph)
        zeros = {band: empty(grid) for band in BANDS}
        greater = photon_greater_se(zeros, zeros, params)
        lesser = photon_lesser_se(zeros, zeros, params)
        omegas = grid.omegas

        positive = omegas > 0
        np.testing.assert_allclose(greater.values[positive], -1j * params.kappa * (n_ph + 1))
        np.testing.assert_allclose(greater.values[~positive & (omegas < 0)], -1j * params.kappa * n_ph)
        np.testing.assert_allclose(lesser.values, greater.values[::-1])

    def test_half_filled_bath(self, grid):
        params = ModelParams(n_sites=1, g=0.0, kappa=0.05, n_ph=0.5)
        zeros = {band: empty(grid) for band in BANDS}
        lesser = photon_lesser_se(zeros, zeros, params)
        np.testing.assert_allclose(lesser.values[grid.omegas > 0], -0.5j * params.kappa)

    @pytest.mark.parametrize("n_ph", [0.0, 1.0])
    def test_bath_retarded(self, grid, n_ph):
        params = ModelParams(n_sites=1, g=0.0, kappa=0.05, n_ph=n_ph)
        zeros = {band: empty(grid) for band in BANDS}
        pi = photon_retarded_se(photon_lesser_se(zeros, zeros, params),
                                photon_greater_se(zeros, zeros, params), params)

        sign = np.sign(grid.omegas)
        np.testing.assert_allclose(pi.chi.values, params.kappa * sign)
        np.testing.assert_allclose(pi.retarded.values, -0.5j * params.kappa * sign)
        np.testing.assert_allclose(pi.advanced.values, np.conj(pi.retarded.values))

    def test_polarization_of_filled_lower_and_empty_upper_level(self, grid, params):
        lesser = {1: level(grid, params.omega1, 1), 2: empty(grid)}
        greater = {1: empty(grid), 2: level(grid, params.omega2, -1)}
        result = photon_greater_se(greater, lesser, params)

        bath = -1j * params.kappa * (np.heaviside(grid.omegas, 0.5))
        polarization = 1j * (result.values - bath)
        assert np.all(polarization.real >= -1e-12)
        assert grid.omegas[np.argmax(polarization.real)] == pytest.approx(params.omega2 - params.omega1, abs=0.01)

        indices = [grid.index_of(omega) for omega in np.linspace(0.5, 1.5, 10)]
        expected = params.g ** 2 * direct_correlation(greater[2].values[:, 0, 0], lesser[1].values[:, 0, 0],
                                                      grid, indices)
        np.testing.assert_allclose(polarization[indices], expected, rtol=1e-8, atol=1e-12)

    def test_polarization_rate_is_transformed(self, grid, params):
        lesser = {1: level(grid, params.omega1, 1), 2: empty(grid)}
        greater = {1: empty(grid), 2: level(grid, params.omega2, -1)}
        pi = photon_retarded_se(photon_lesser_se(lesser, greater, params),
                                photon_greater_se(greater, lesser, params), params)

        np.testing.assert_allclose(pi.retarded.values.imag, -0.5 * pi.chi.values, atol=1e-12)
        # level-reflection: a positive rate peak pulls Re Pi^r negative below and positive above
        peak = grid.index_of(params.omega2 - params.omega1)
        assert pi.retarded.values[peak - 200].real < 0 < pi.retarded.values[peak + 200].real

    def test_grid_mismatch(self, grid, params):
        other = FrequencyGrid(-4.0, 4.0, 4097)
        with pytest.raises(GridMismatchError):
            photon_greater_se({1: empty(grid), 2: empty(grid)}, {1: empty(other), 2: empty(other)}, params)
