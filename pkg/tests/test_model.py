import numpy as np
import pytest
from hypothesis import given, strategies

from cavity_transport.errors import ConfigurationError
from cavity_transport.model import (BANDS, ModelParams, bloch_basis, contact_matrix, contact_pair,
                                    dispersion)


chain_lengths = strategies.integers(min_value=1, max_value=40)


class TestModelParams:
    def test_defaults_are_valid(self):
        params = ModelParams()
        assert params.omega2 - params.omega1 == pytest.approx(1.0)
        assert params.omega_cav == 1.0

    @pytest.mark.parametrize("changes, key", [
        ({"n_sites": 0}, "model.n_sites"),
        ({"n_sites": 2.5}, "model.n_sites"),
        ({"kappa": 0.0}, "model.kappa"),
        ({"gamma1": -1e-3}, "model.gamma1"),
        ({"gamma2": 0.0}, "model.gamma2"),
        ({"t1": -0.1}, "model.t1"),
        ({"g": -0.01}, "model.g"),
        ({"n_ph": -0.5}, "model.n_ph"),
        ({"omega2": 0.6}, "model.omega2 - model.omega1"),
    ])
    def test_rejects_invalid_values(self, changes, key):
        with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
            ModelParams(**changes)

    def test_shifted_bands_keep_unit_splitting(self):
        params = ModelParams(omega1=0.0, omega2=1.0)
        assert params.onsite(2) - params.onsite(1) == 1.0

    def test_band_accessors(self):
        params = ModelParams(t1=0.01, t2=0.07, gamma1=1e-2, gamma2=1e-5)
        assert params.hopping(1) == 0.01
        assert params.hopping(2) == 0.07
        assert params.gamma(1) == 1e-2
        assert params.gamma(2) == 1e-5
        assert params.other_band(1) == 2
        assert params.other_band(2) == 1

    def test_unknown_band(self):
        with pytest.raises(ValueError):
            ModelParams().hopping(3)

    def test_keys_match_as_dict(self):
        params = ModelParams()
        assert tuple(params.as_dict()) == ModelParams.keys()
        assert "n_ph" in ModelParams.keys()


class TestBlochBasis:
    def test_single_site(self):
        basis = bloch_basis(ModelParams(n_sites=1))
        assert basis.phi[0, 0] == pytest.approx(1.0)

    def test_two_sites(self):
        phi = bloch_basis(ModelParams(n_sites=2)).phi
        root = 1 / np.sqrt(2)
        np.testing.assert_allclose(phi, [[root, root], [root, -root]], atol=1e-12)

    @given(chain_lengths)
    def test_orthonormal_and_complete(self, n):
        phi = bloch_basis(ModelParams(n_sites=n)).phi
        np.testing.assert_allclose(phi.T @ phi, np.eye(n), atol=1e-12)
        np.testing.assert_allclose(phi @ phi.T, np.eye(n), atol=1e-12)

    @given(chain_lengths, strategies.floats(min_value=0.0, max_value=0.2))
    def test_diagonalises_the_hopping_matrix(self, n, t):
        params = ModelParams(n_sites=n, t2=t)
        basis = bloch_basis(params)
        hopping = params.omega2 * np.eye(n) - t * (np.eye(n, k=1) + np.eye(n, k=-1))
        np.testing.assert_allclose(basis.phi.T @ hopping @ basis.phi, np.diag(basis.energies(2)), atol=1e-12)

    @given(strategies.integers(min_value=2, max_value=40), strategies.floats(min_value=1e-3, max_value=0.2))
    def test_bandwidth_below_four_t(self, n, t):
        energies = bloch_basis(ModelParams(n_sites=n, t2=t)).energies(2)
        assert energies.max() - energies.min() < 4 * t


class TestDispersion:
    def test_flat_lower_band(self):
        params = ModelParams(n_sites=7, t1=0.0)
        assert all(dispersion(params, 1, k) == params.omega1 for k in range(1, 8))

    @pytest.mark.parametrize("n", [1, 3, 5, 11])
    def test_middle_mode_of_odd_chain(self, n):
        params = ModelParams(n_sites=n, t2=0.07)
        assert dispersion(params, 2, (n + 1) // 2) == pytest.approx(params.omega2, abs=1e-15)

    def test_lowest_upper_mode(self):
        params = ModelParams(n_sites=30, t2=0.07)
        assert dispersion(params, 2, 1) == pytest.approx(0.36072, abs=1e-5)

    def test_matches_basis(self):
        params = ModelParams(n_sites=6, t1=0.01, t2=0.07)
        basis = bloch_basis(params)
        for band in BANDS:
            expected = [dispersion(params, band, k) for k in range(1, 7)]
            np.testing.assert_array_equal(basis.energies(band), expected)

    @pytest.mark.parametrize("band, mode", [(0, 1), (3, 1), (1, 0), (2, 7), (1, 1.5)])
    def test_out_of_range(self, band, mode):
        with pytest.raises(ValueError):
            dispersion(ModelParams(n_sites=6), band, mode)


class TestContactMatrix:
    def test_single_site(self):
        basis = bloch_basis(ModelParams(n_sites=1))
        source, drain = contact_pair(basis)
        np.testing.assert_allclose(source, [[1.0]])
        np.testing.assert_allclose(drain, [[1.0]])

    def test_two_sites(self):
        basis = bloch_basis(ModelParams(n_sites=2))
        np.testing.assert_allclose(contact_matrix(basis, 1).sigma, [[0.5, 0.5], [0.5, 0.5]], atol=1e-12)

    def test_interior_site_rejected(self):
        basis = bloch_basis(ModelParams(n_sites=4))
        with pytest.raises(ValueError):
            contact_matrix(basis, 2)

    @given(chain_lengths)
    def test_rank_one_symmetric_with_equal_diagonals(self, n):
        basis = bloch_basis(ModelParams(n_sites=n))
        source, drain = contact_pair(basis)
        for sigma in (source, drain):
            np.testing.assert_allclose(sigma, sigma.T)
            assert np.linalg.matrix_rank(sigma, tol=1e-10) == 1
        np.testing.assert_allclose(np.diag(source), np.diag(drain), atol=1e-12)

    @given(chain_lengths)
    def test_lead_broadening_is_positive(self, n):
        basis = bloch_basis(ModelParams(n_sites=n))
        source, drain = contact_pair(basis)
        total = source + drain
        assert np.linalg.eigvalsh(total).min() > -1e-12
        assert np.trace(total) == pytest.approx(2 * np.sum(basis.phi[0] ** 2))
