"""
Keldysh flavours of the electron and photon self-energies.

The electron self-energy of band alpha collects the light-matter exchange
with the other band (second order in g, dressed internal lines) and the
wide-band lead terms: injection at site 1 and extraction at site N. The
photon self-energy collects the interband polarization and the bath.

Lead and bath terms are frequency independent (or piecewise constant) and
are added in closed form; only the light-matter parts go through the
causal transform.
"""

from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np

from cavity_transport.model import BANDS, BlochBasis, ModelParams, contact_pair
from cavity_transport.spectral import (GridFunction, check_same_grid, bath_occupation,
                                       checked_rates, cross_correlate, retarded_from_rates)


@dataclass(frozen=True)
class BandSelfEnergy:
    """The four flavours of the self-energy of one band, N x N per frequency"""

    lesser: GridFunction
    greater: GridFunction
    retarded: GridFunction
    advanced: GridFunction

    @property
    def chi(self) -> GridFunction:
        """(GridFunction) Broadening i (Sigma> - Sigma<), Hermitian PSD"""
        return self.lesser.with_values(1j * (self.greater.values - self.lesser.values))


@dataclass(frozen=True)
class ElectronSelfEnergy:
    """Self-energies of both bands, indexed by band"""

    bands: Dict[int, BandSelfEnergy]

    def __getitem__(self, band: int) -> BandSelfEnergy:
        return self.bands[band]

    @property
    def truncated(self) -> bool:
        return any(band.retarded.truncated for band in self.bands.values())


@dataclass(frozen=True)
class PhotonSelfEnergy:
    """Polarization plus bath, scalar per frequency"""

    lesser: GridFunction
    greater: GridFunction
    retarded: GridFunction
    advanced: GridFunction

    @property
    def chi(self) -> GridFunction:
        """(GridFunction) Rate i (Pi> - Pi<); the bath alone gives kappa sign(w)"""
        return self.lesser.with_values((1j * (self.greater.values - self.lesser.values)).real)


def _lead_term(grid_function: GridFunction, sigma: np.ndarray, amplitude: complex) -> np.ndarray:
    """amplitude * sigma repeated at every frequency of the grid"""
    n = grid_function.grid.n_points
    return np.broadcast_to(amplitude * sigma, (n,) + sigma.shape).astype(complex)


def _light_part(green: GridFunction, photon: GridFunction, params: ModelParams) -> np.ndarray:
    """i g^2 int dw'/2pi G(w + w') D(w')"""
    if params.g == 0:
        return np.zeros(green.values.shape, dtype=complex)
    coupling = params.g ** 2
    return 1j * coupling * cross_correlate(green, photon).values


def electron_lesser_se(g_lesser: Mapping[int, GridFunction], d_greater: GridFunction,
                       params: ModelParams, basis: BlochBasis) -> Dict[int, GridFunction]:
    """Construct Sigma<_alpha for both bands.

        Sigma<_alpha(w) = i g^2 int dw'/2pi G<_alpha'(w + w') D>(w') + i Gamma_alpha sigma^1

    Band alpha is fed by the lesser function of the other band alpha'.

    Parameters:
        g_lesser (dict<int, GridFunction>): G<_alpha keyed by band.
        d_greater (GridFunction): Greater photon propagator.
        params (ModelParams): The model.
        basis (BlochBasis): The Bloch basis of the chain.

    Returns:
        (dict<int, GridFunction>): Sigma<_alpha keyed by band.

    Raises:
        GridMismatchError: If the inputs do not share a grid.
    """
    check_same_grid(d_greater, *g_lesser.values())
    source, _ = contact_pair(basis)

    result = {}
    for band in BANDS:
        other = g_lesser[params.other_band(band)]
        values = _light_part(other, d_greater, params)
        values += _lead_term(other, source, 1j * params.gamma(band))
        result[band] = other.with_values(values)
    return result


def electron_greater_se(g_greater: Mapping[int, GridFunction], d_lesser: GridFunction,
                        params: ModelParams, basis: BlochBasis) -> Dict[int, GridFunction]:
    """Construct Sigma>_alpha for both bands.

        Sigma>_alpha(w) = i g^2 int dw'/2pi G>_alpha'(w + w') D<(w') - i Gamma_alpha sigma^N

    The drain is empty, so extraction enters the greater flavour at site N.

    Raises:
        GridMismatchError: If the inputs do not share a grid.
    """
    check_same_grid(d_lesser, *g_greater.values())
    _, drain = contact_pair(basis)

    result = {}
    for band in BANDS:
        other = g_greater[params.other_band(band)]
        values = _light_part(other, d_lesser, params)
        values += _lead_term(other, drain, -1j * params.gamma(band))
        result[band] = other.with_values(values)
    return result


def lead_rates(params: ModelParams, basis: BlochBasis, band: int) -> np.ndarray:
    """(np.ndarray) Returns the lead broadening Gamma_alpha (sigma^1 + sigma^N)"""
    source, drain = contact_pair(basis)
    return params.gamma(band) * (source + drain)


def electron_retarded_se(lesser: Mapping[int, GridFunction], greater: Mapping[int, GridFunction],
                         params: ModelParams, basis: BlochBasis) -> ElectronSelfEnergy:
    """Complete the electron self-energy with its retarded and advanced flavours.

    chi = i (Sigma> - Sigma<) is split into the lead part Gamma (sigma^1 + sigma^N),
    whose retarded counterpart is -i chi_lead / 2 exactly, and the light part,
    which goes through the causal transform.

    Parameters:
        lesser (dict<int, GridFunction>): Sigma<_alpha keyed by band.
        greater (dict<int, GridFunction>): Sigma>_alpha keyed by band.
        params (ModelParams): The model.
        basis (BlochBasis): The Bloch basis of the chain.

    Returns:
        (ElectronSelfEnergy): All four flavours for both bands.

    Raises:
        NumericalConsistencyError: If chi is not Hermitian beyond tolerance.
    """
    bands = {}
    for band in BANDS:
        check_same_grid(lesser[band], greater[band])
        chi = lesser[band].with_values(1j * (greater[band].values - lesser[band].values))
        checked_rates(chi, name=f"chi_{band}")

        lead = lead_rates(params, basis, band)
        if params.g == 0:
            light = chi.with_values(np.zeros(chi.values.shape, dtype=complex))
        else:
            light = chi.with_values(chi.values - lead[None])
        retarded = retarded_from_rates(light)
        values = retarded.values - 0.5j * lead[None]
        retarded = retarded.with_values(values, truncated=retarded.truncated)
        advanced = retarded.with_values(np.conj(np.swapaxes(values, 1, 2)), truncated=retarded.truncated)

        bands[band] = BandSelfEnergy(lesser[band], greater[band], retarded, advanced)

    return ElectronSelfEnergy(bands)


def _trace_correlation(f: GridFunction, h: GridFunction) -> np.ndarray:
    """Tr int dw'/2pi F(w + w') H(w') with the matrix product inside the trace"""
    transposed = h.with_values(np.swapaxes(h.values, 1, 2))
    return cross_correlate(f, transposed).values.sum(axis=(1, 2))


def _polarization(first: Mapping[int, GridFunction], second: Mapping[int, GridFunction],
                  params: ModelParams) -> np.ndarray:
    """-i g^2 sum_{alpha != alpha'} Tr int dw'/2pi X_alpha(w + w') Y_alpha'(w')"""
    n = first[BANDS[0]].grid.n_points
    if params.g == 0:
        return np.zeros(n, dtype=complex)

    total = np.zeros(n, dtype=complex)
    for band in BANDS:
        total += _trace_correlation(first[band], second[params.other_band(band)])
    coupling = params.g ** 2
    return -1j * coupling * total


def photon_greater_se(g_greater: Mapping[int, GridFunction], g_lesser: Mapping[int, GridFunction],
                      params: ModelParams) -> GridFunction:
    """Construct Pi>(w).

        Pi>(w) = -i g^2 Tr sum_{alpha != alpha'} int dw'/2pi G>_alpha(w + w') G<_alpha'(w')
                 - i kappa [(N_ph + 1) theta(w) + N_ph theta(-w)]

    Raises:
        GridMismatchError: If the inputs do not share a grid.
    """
    check_same_grid(*g_greater.values(), *g_lesser.values())
    grid = g_greater[BANDS[0]].grid

    values = _polarization(g_greater, g_lesser, params)
    values += -1j * params.kappa * bath_occupation(grid.omegas, params.n_ph)
    return GridFunction(grid, values)


def photon_lesser_se(g_lesser: Mapping[int, GridFunction], g_greater: Mapping[int, GridFunction],
                     params: ModelParams) -> GridFunction:
    """Construct Pi<(w), the mirror of Pi> with flavours and bath weights exchanged.

        Pi<(w) = -i g^2 Tr sum_{alpha != alpha'} int dw'/2pi G<_alpha(w + w') G>_alpha'(w')
                 - i kappa [N_ph theta(w) + (N_ph + 1) theta(-w)]

    Raises:
        GridMismatchError: If the inputs do not share a grid.
    """
    check_same_grid(*g_greater.values(), *g_lesser.values())
    grid = g_lesser[BANDS[0]].grid

    values = _polarization(g_lesser, g_greater, params)
    values += -1j * params.kappa * bath_occupation(-grid.omegas, params.n_ph)
    return GridFunction(grid, values)


def photon_retarded_se(lesser: GridFunction, greater: GridFunction, params: ModelParams) -> PhotonSelfEnergy:
    """Complete the photon self-energy with its retarded and advanced flavours.

    The bath rate kappa sign(w) contributes -i kappa sign(w) / 2 exactly; its
    principal part is dropped (frequency-independent bath). The polarization
    rate goes through the causal transform.

    Raises:
        NumericalConsistencyError: If i (Pi> - Pi<) is not real beyond tolerance.
    """
    check_same_grid(lesser, greater)
    bath = params.kappa * np.sign(lesser.grid.omegas)

    chi = lesser.with_values(1j * (greater.values - lesser.values))
    rates = checked_rates(chi, name="photon chi")

    light = np.zeros_like(bath) if params.g == 0 else rates - bath
    retarded = retarded_from_rates(chi.with_values(light))
    values = retarded.values - 0.5j * bath
    retarded = retarded.with_values(values, truncated=retarded.truncated)
    advanced = retarded.with_values(np.conj(values), truncated=retarded.truncated)

    return PhotonSelfEnergy(lesser, greater, retarded, advanced)
