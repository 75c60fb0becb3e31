"""
Closed-form estimates used as oracles and reference scales: the g = 0
current, its two-band extension, the enhancement ceiling, the light-induced
broadening of Bloch states and the Tavis-Cummings polariton frequencies.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from cavity_transport.model import BANDS, BlochBasis, ModelParams, bloch_basis
from cavity_transport.selfenergy import lead_rates
from cavity_transport.spectral import FrequencyGrid, GridFunction, bath_propagator_values

log = logging.getLogger(__name__)

# Two-band formula assumes t1 << Gamma1; warn above this ratio
TWO_BAND_HOPPING_RATIO = 0.2
# Occupation assumed for open bands in the high-bias regime
DEFAULT_OCCUPATION = 0.5

INDIVIDUAL = "individual"
COLLECTIVE = "collective"


@dataclass(frozen=True)
class BaselinePrediction:
    """Closed-form reference values for one parameter point"""

    j0: float
    j0_per_band: Dict[int, float]
    j0_two_band: float
    enhancement_ceiling: float
    chi_estimate: Dict[int, np.ndarray] = field(repr=False)
    perturbative_parameter: float
    regime: str


def current_g0(gamma: float, t: float) -> float:
    """Current of one band at g = 0, electrons crossing one by one.

        J = (Gamma / 2) / (1 + (Gamma / 2t)^2)

    Parameters:
        gamma (float): Lead rate Gamma > 0.
        t (float): Hopping rate t >= 0.

    Returns:
        (float): The current, in [0, Gamma / 2].
    """
    # same expression written without dividing by t
    return 2 * gamma * t ** 2 / (4 * t ** 2 + gamma ** 2)


def current_g0_two_band(gamma1: float, gamma2: float, t1: float) -> float:
    """(float) Returns (Gamma1 / 2) [(2 t1 / Gamma1)^2 + Gamma2 / Gamma1]

    Valid for a nearly blocked lower band (t1 << Gamma1) and an open upper
    band (t2 >> Gamma2).
    """
    if t1 > TWO_BAND_HOPPING_RATIO * gamma1:
        log.warning("two-band g = 0 current assumes t1 << Gamma1, got t1 / Gamma1 = %.3g", t1 / gamma1)
    return 0.5 * gamma1 * ((2 * t1 / gamma1) ** 2 + gamma2 / gamma1)


def enhancement_ceiling(gamma1: float, gamma2: float, t1: float) -> float:
    """(float) Returns the saturated J / J0 = [1 + Gamma2/Gamma1] / [(2 t1/Gamma1)^2 + Gamma2/Gamma1]"""
    ratio = gamma2 / gamma1
    return (1 + ratio) / ((2 * t1 / gamma1) ** 2 + ratio)


def broadening_estimate(g: float, kappa: float, n_ph: float, n_upper: float) -> float:
    """(float) Returns the light-induced broadening (4 g^2 / kappa)(N_ph + n) of a lower-band state

    n_upper is the occupation of the resonant upper-band state. The upper
    band obeys the same law with n replaced by the hole occupation of the
    lower band.
    """
    return 4 * g ** 2 / kappa * (n_ph + n_upper)


def _default_occupations(basis: BlochBasis) -> Dict[int, np.ndarray]:
    return {band: np.full(basis.n_sites, DEFAULT_OCCUPATION) for band in BANDS}


def second_order_broadening(params: ModelParams, basis: BlochBasis, grid: FrequencyGrid,
                            occupations: Mapping[int, np.ndarray] = None) -> Dict[int, GridFunction]:
    """Frequency-resolved broadening from bare Bloch states and the bath photon.

    With sharp Bloch levels and the bath propagator D1 in the lesser and
    greater self-energies, the light part is diagonal in k:

        chi_{alpha,k}(w) = g^2 [n' i D1>(w' - w) + (1 - n') i D1<(w' - w)]

    where w' = omega_{alpha',k} and n' = n_{alpha',k} belong to the other
    band. The lead broadening Gamma_alpha (sigma^1 + sigma^N) is added.

    Parameters:
        params (ModelParams): The model.
        basis (BlochBasis): The Bloch basis of the chain.
        grid (FrequencyGrid): Frequencies to evaluate at.
        occupations (dict<int, np.ndarray>): n_{alpha,k} per band; 1/2 when omitted.

    Returns:
        (dict<int, GridFunction>): chi_alpha as N x N matrices keyed by band.
    """
    occupations = occupations or _default_occupations(basis)
    omegas = grid.omegas
    result = {}
    for band in BANDS:
        other = params.other_band(band)
        levels = basis.energies(other)
        filled = np.asarray(occupations[other], dtype=float)

        greater, lesser = bath_propagator_values(params, levels[None, :] - omegas[:, None])
        light = params.g ** 2 * (filled * (1j * greater).real + (1 - filled) * (1j * lesser).real)

        values = np.zeros((grid.n_points, basis.n_sites, basis.n_sites), dtype=complex)
        diagonal = np.arange(basis.n_sites)
        values[:, diagonal, diagonal] = light
        values += lead_rates(params, basis, band)[None]
        result[band] = GridFunction(grid, values)
    return result


def tavis_cummings_frequencies(params: ModelParams) -> np.ndarray:
    """Single-excitation spectrum of the generalized Tavis-Cummings model.

    The cavity mode omega_cav couples with strength g to N transitions of
    energies omega_{2,k} - omega_{1,k}. At zero bandwidth the outermost
    eigenvalues are omega_cav +- g sqrt(N) on resonance.

    Returns:
        (np.ndarray): The N + 1 eigenfrequencies in ascending order.
    """
    basis = bloch_basis(params)
    n = params.n_sites
    hamiltonian = np.zeros((n + 1, n + 1))
    hamiltonian[0, 0] = params.omega_cav
    hamiltonian[0, 1:] = hamiltonian[1:, 0] = params.g
    hamiltonian[1:, 1:] = np.diag(basis.energies(2) - basis.energies(1))
    return np.linalg.eigvalsh(hamiltonian)


def perturbative_parameter(params: ModelParams) -> float:
    """(float) Returns g^2 / (Gamma kappa) with the smaller of the two lead rates"""
    return params.g ** 2 / (min(params.gamma1, params.gamma2) * params.kappa)


def classify_regime(params: ModelParams) -> str:
    """(str) Returns "individual" when kappa and g both stay below the bandwidth 4 t2"""
    bandwidth = 4 * params.t2
    if params.kappa < bandwidth and params.g < bandwidth:
        return INDIVIDUAL
    return COLLECTIVE


def baseline_prediction(params: ModelParams, occupations: Mapping[int, np.ndarray] = None) -> BaselinePrediction:
    """Evaluate every closed-form baseline for a parameter point.

    Parameters:
        params (ModelParams): The model.
        occupations (dict<int, np.ndarray>): n_{alpha,k} per band, used by the
                                             broadening estimate; 1/2 when omitted.
    """
    basis = bloch_basis(params)
    occupations = occupations or _default_occupations(basis)

    per_band = {band: current_g0(params.gamma(band), params.hopping(band)) for band in BANDS}
    chi = {
        1: broadening_estimate(params.g, params.kappa, params.n_ph, np.asarray(occupations[2], dtype=float)),
        2: broadening_estimate(params.g, params.kappa, params.n_ph, 1 - np.asarray(occupations[1], dtype=float)),
    }

    return BaselinePrediction(
        j0=sum(per_band.values()),
        j0_per_band=per_band,
        j0_two_band=current_g0_two_band(params.gamma1, params.gamma2, params.t1),
        enhancement_ceiling=enhancement_ceiling(params.gamma1, params.gamma2, params.t1),
        chi_estimate=chi,
        perturbative_parameter=perturbative_parameter(params),
        regime=classify_regime(params),
    )
