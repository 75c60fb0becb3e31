"""
Measurable quantities extracted from a self-consistent state: transmission
spectra, steady and partial currents, electron and cavity densities of
states, occupations, the cavity photon number and the Rabi splittings.

Everything here is a pure function of an immutable state.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Tuple

import numpy as np
import scipy.signal

from cavity_transport.errors import NumericalConsistencyError
from cavity_transport.model import BANDS, BlochBasis, ModelParams, contact_pair
from cavity_transport.spectral import GridFunction, integrate
from cavity_transport.util import hermitian_part, refine_peak

if TYPE_CHECKING:
    from cavity_transport.solver import BandGreens, ConvergedState

log = logging.getLogger(__name__)

# Absolute |Im T| tolerated before casting a transmission to real, per unit of max |T|
IMAGINARY_TOLERANCE = 1e-10
# Occupation eigenvalues may leave [0, 1] by this much before the state is rejected
OCCUPATION_SLACK = 1e-6
# Exterior polariton peaks are searched outside the band window widened by this many kappa
WINDOW_KAPPAS = 3


@dataclass(frozen=True)
class Transmission:
    """Transmission of one band and its two contact-resolved parts.

    source is Tr[sigma^1 o (A - Im G<)], the empty-state density at the
    injection site; drain is Tr[sigma^N o Im G<], the filled-state density
    at the extraction site. Their sum is the Landauer form
    total = Tr[sigma^1 o A + (sigma^N - sigma^1) o Im G<].
    """

    total: GridFunction
    source: GridFunction
    drain: GridFunction


@dataclass(frozen=True)
class Populations:
    """Steady-state occupations of both bands"""

    n_kk: Dict[int, np.ndarray] = field(repr=False)
    n_site: Dict[int, np.ndarray]
    totals: Dict[int, float]

    @property
    def n1(self) -> float:
        return self.totals[1]

    @property
    def n2(self) -> float:
        return self.totals[2]


@dataclass(frozen=True)
class RabiSplittings:
    """Collective splitting omega_n and spectral splitting omega_s.

    omega_s is None when the cavity spectrum has no polariton pair outside
    the band window. imbalance_negative flags N1 < N2, where omega_n is 0.
    """

    omega_n: float
    omega_s: Optional[float]
    imbalance_negative: bool = False


@dataclass(frozen=True)
class TransportReport:
    """Every observable of a converged (or explicitly accepted) state"""

    t1: Transmission = field(repr=False)
    t2: Transmission = field(repr=False)
    j: float
    j_source: float
    j_drain: float
    j1: float
    j2: float
    j_over_gamma1: float
    a_electron: Dict[int, GridFunction] = field(repr=False)
    a_cavity: GridFunction = field(repr=False)
    populations: Populations
    n_cav: float
    rabi: RabiSplittings
    iterations: int
    converged: bool
    residual_history: List[float] = field(repr=False)
    truncation_metric: float

    @property
    def omega_n(self) -> float:
        return self.rabi.omega_n

    @property
    def omega_s(self) -> Optional[float]:
        return self.rabi.omega_s


def _hadamard_trace(sigma: np.ndarray, matrices: np.ndarray) -> np.ndarray:
    """Tr[sigma o M] = sum_{k,k'} sigma_kk' M_kk' at every frequency"""
    return np.einsum("kl,wkl->w", sigma, matrices)


def _as_real(values: np.ndarray, name: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    imaginary = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if imaginary > IMAGINARY_TOLERANCE * scale:
        raise NumericalConsistencyError(f"{name} has an imaginary part of {imaginary:.3e}")
    return values.real.copy()


def spectral_matrix(greens: "BandGreens") -> np.ndarray:
    """(np.ndarray) Returns A = i (G^r - G^a) for every frequency"""
    return 1j * (greens.retarded.values - greens.advanced.values)


def band_transmission(greens: "BandGreens", basis: BlochBasis, band: int = None) -> Transmission:
    """Transmission of one band from its Green's functions.

        T(w) = Tr[sigma^1 o A(w) + (sigma^N - sigma^1) o Im G<(w)]

    Parameters:
        greens (BandGreens): Retarded, advanced and lesser functions of the band.
        basis (BlochBasis): The Bloch basis of the chain.
        band (int): Band index, only used in error messages.

    Raises:
        NumericalConsistencyError: If the transmission is not real.
    """
    source_sigma, drain_sigma = contact_pair(basis)
    spectral = spectral_matrix(greens)
    filled = greens.lesser.values.imag

    name = f"T{band}" if band else "T"
    source = _as_real(_hadamard_trace(source_sigma, spectral - filled), name)
    drain = _hadamard_trace(drain_sigma, filled)

    grid = greens.lesser.grid
    return Transmission(total=GridFunction(grid, source + drain),
                        source=GridFunction(grid, source),
                        drain=GridFunction(grid, drain))


def transmission(state: "ConvergedState", basis: BlochBasis, band: int) -> Transmission:
    """(Transmission) Returns T_alpha(w) for one band of a state"""
    return band_transmission(state.greens[band], basis, band)


def steady_current(t1: Transmission, t2: Transmission, params: ModelParams) -> Tuple[float, float, float]:
    """Total current and its source-side and drain-side estimates.

        J = sum_alpha (Gamma_alpha / 2) int dw/2pi T_alpha(w) = (J_source + J_drain) / 2

    J_source = sum_alpha Gamma_alpha <1 - n_{alpha,1}> counts injection and
    J_drain = sum_alpha Gamma_alpha <n_{alpha,N}> extraction; both are
    reported positive and coincide in a steady state.

    Returns:
        (tuple<float, float, float>): (J, J_source, J_drain).
    """
    j_source = 0.0
    j_drain = 0.0
    for band, spectrum in zip(BANDS, (t1, t2)):
        gamma = params.gamma(band)
        j_source += gamma * integrate(spectrum.source).real
        j_drain += gamma * integrate(spectrum.drain).real
    return 0.5 * (j_source + j_drain), j_source, j_drain


def partial_currents(t1: Transmission, t2: Transmission, params: ModelParams) -> Tuple[float, float]:
    """Split the current at the midpoint between the two band centres.

    J1 integrates sum_alpha (Gamma_alpha / 2) T_alpha over w < (w1 + w2) / 2
    and J2 over the rest, so J1 + J2 = J.

    Returns:
        (tuple<float, float>): (J1, J2).
    """
    grid = t1.total.grid
    midpoint = 0.5 * (params.omega1 + params.omega2)
    lower = grid.omegas < midpoint

    weighted = sum(0.5 * params.gamma(band) * spectrum.total.values
                   for band, spectrum in zip(BANDS, (t1, t2)))
    j1 = integrate(GridFunction(grid, np.where(lower, weighted, 0.0))).real
    j2 = integrate(GridFunction(grid, np.where(lower, 0.0, weighted))).real
    return j1, j2


def electron_spectral(state: "ConvergedState", band: int) -> GridFunction:
    """(GridFunction) Returns the spectral matrix A_alpha = i (G^r - G^a) = -2 Im G^r"""
    greens = state.greens[band]
    return greens.retarded.with_values(spectral_matrix(greens))


def photon_dos(state: "ConvergedState") -> GridFunction:
    """(GridFunction) Returns the cavity photon DOS A_c(w) = -2 Im D^r(w)"""
    retarded = state.photon.retarded
    return retarded.with_values(-2 * retarded.values.imag)


def sum_rule_deficit(greens: Mapping[int, "BandGreens"]) -> float:
    """(float) Returns max_alpha |1 - Tr int A_alpha dw/2pi / N|

    The spectral weight of every Bloch state integrates to one over an
    infinite window; the deficit measures what the finite window misses.
    """
    deficit = 0.0
    for band_greens in greens.values():
        spectral = band_greens.retarded.with_values(spectral_matrix(band_greens))
        weight = np.trace(integrate(spectral)).real
        n = spectral.values.shape[1]
        deficit = max(deficit, abs(1.0 - weight / n))
    return deficit


def _clamp_occupations(matrix: np.ndarray, band: int) -> np.ndarray:
    eigenvalues, vectors = np.linalg.eigh(matrix)
    low, high = float(eigenvalues.min()), float(eigenvalues.max())
    if low < -OCCUPATION_SLACK or high > 1 + OCCUPATION_SLACK:
        raise NumericalConsistencyError(
            f"band {band} occupations leave [0, 1]: eigenvalues in [{low:.3e}, {high:.3e}]")
    if low < 0 or high > 1:
        log.warning("band %d occupations clamped to [0, 1] (eigenvalues in [%.3e, %.3e]); "
                    "grid truncation suspected", band, low, high)
        eigenvalues = np.clip(eigenvalues, 0.0, 1.0)
        matrix = (vectors * eigenvalues) @ np.conj(vectors.T)
    return matrix


def populations(state: "ConvergedState", basis: BlochBasis) -> Populations:
    """Occupation matrices in the Bloch basis and site occupations of both bands.

        n_{alpha,kk'} = int dw/2pi (-i G<_{alpha,kk'}(w))
        n_{alpha,j} = sum_{kk'} phi_k^j phi_k'^j n_{alpha,kk'}

    Raises:
        NumericalConsistencyError: If an occupation eigenvalue leaves
                                   [-1e-6, 1 + 1e-6].
    """
    n_kk, n_site, totals = {}, {}, {}
    phi = basis.phi
    for band in BANDS:
        lesser = state.greens[band].lesser
        matrix = hermitian_part(integrate(lesser.with_values(-1j * lesser.values)))
        matrix = _clamp_occupations(matrix, band)

        n_kk[band] = matrix
        n_site[band] = np.clip(np.einsum("jk,kl,jl->j", phi, matrix, phi).real, 0.0, 1.0)
        totals[band] = float(np.trace(matrix).real)

    return Populations(n_kk=n_kk, n_site=n_site, totals=totals)


def photon_number(d_lesser: GridFunction) -> float:
    """(float) Returns N_cav = -(int dw/2pi Im D<(w) + 1) / 2"""
    return -0.5 * (integrate(d_lesser).imag + 1.0)


def cavity_population(state: "ConvergedState") -> float:
    """(float) Returns the mean cavity photon number of a state"""
    return photon_number(state.photon.lesser)


def band_window(params: ModelParams) -> Tuple[float, float]:
    """(tuple<float, float>) Returns the transition window the polaritons lie outside of"""
    half_width = 2 * (params.t1 + params.t2) + WINDOW_KAPPAS * params.kappa
    centre = params.omega2 - params.omega1
    return centre - half_width, centre + half_width


def rabi_splittings(state: "ConvergedState", pops: Populations, params: ModelParams) -> RabiSplittings:
    """Collective and spectral vacuum Rabi splittings.

    omega_n = g sqrt(N1 - N2). omega_s is half the separation of the
    strongest maxima of A_c(w > 0) below and above the band window,
    located with sub-bin refinement.

    Parameters:
        state (ConvergedState): The state whose cavity spectrum is analysed.
        pops (Populations): Occupations of the same state.
        params (ModelParams): The model.
    """
    imbalance = pops.n1 - pops.n2
    negative = imbalance < 0
    if negative:
        log.debug("population imbalance N1 - N2 = %.3e < 0, omega_n reported as 0", imbalance)
    omega_n = 0.0 if negative else params.g * math.sqrt(imbalance)

    spectrum = photon_dos(state)
    omegas = spectrum.grid.omegas
    values = spectrum.values
    lo, hi = band_window(params)

    peaks, _ = scipy.signal.find_peaks(values)
    peaks = peaks[omegas[peaks] > 0]
    below = peaks[omegas[peaks] < lo]
    above = peaks[omegas[peaks] > hi]
    if params.g == 0 or below.size == 0 or above.size == 0:
        return RabiSplittings(omega_n, None, negative)

    lower = refine_peak(omegas, values, int(below[np.argmax(values[below])]))
    upper = refine_peak(omegas, values, int(above[np.argmax(values[above])]))
    return RabiSplittings(omega_n, 0.5 * (upper - lower), negative)


def transport_report(state: "ConvergedState") -> TransportReport:
    """Collect every observable of a state into one report.

    Parameters:
        state (ConvergedState): The state, converged or accepted as is.

    Returns:
        (TransportReport): Currents, spectra, occupations and splittings.
    """
    params, basis = state.params, state.basis
    t1 = transmission(state, basis, 1)
    t2 = transmission(state, basis, 2)
    j, j_source, j_drain = steady_current(t1, t2, params)
    j1, j2 = partial_currents(t1, t2, params)
    pops = populations(state, basis)

    return TransportReport(
        t1=t1, t2=t2,
        j=j, j_source=j_source, j_drain=j_drain, j1=j1, j2=j2,
        j_over_gamma1=j / params.gamma1,
        a_electron={band: electron_spectral(state, band) for band in BANDS},
        a_cavity=photon_dos(state),
        populations=pops,
        n_cav=cavity_population(state),
        rabi=rabi_splittings(state, pops, params),
        iterations=state.iterations,
        converged=state.converged,
        residual_history=list(state.residual_history),
        truncation_metric=state.truncation_metric,
    )
