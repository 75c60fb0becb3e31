"""
Dyson and Keldysh assembly and the self-consistent Born loop.

Iteration 0 is the exact lead-dressed solution at g = 0 with the photon
dressed by its bath only. Every later iteration rebuilds the electron
self-energies from the current Green's functions, mixes them with the
previous ones, solves the electron Dyson and Keldysh equations, then does
the same for the photon. The loop stops once the current and the cavity
photon number no longer change.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Tuple

import numpy as np

from cavity_transport import observables
from cavity_transport.errors import ConfigurationError, NotConvergedError, SingularMatrixError
from cavity_transport.model import BANDS, BlochBasis, ModelParams, bloch_basis
from cavity_transport.selfenergy import (ElectronSelfEnergy, PhotonSelfEnergy, electron_greater_se,
                                         electron_lesser_se, electron_retarded_se, photon_greater_se,
                                         photon_lesser_se, photon_retarded_se)
from cavity_transport.spectral import (FrequencyGrid, GridFunction, bath_photon_propagator,
                                       check_same_grid, make_grid)
from cavity_transport.util import check_positive, relative_change

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Controls of the fixed-point loop.

    mixing is the weight of the new candidate self-energy; tol bounds the
    relative change of the tracked observables (J and N_cav).
    """

    mixing: float = 0.5
    tol: float = 1e-6
    max_iter: int = 200
    check_invariants: bool = True

    def __post_init__(self):
        if not 0 < self.mixing <= 1:
            raise ConfigurationError(f"solver.mixing must lie in (0, 1], got {self.mixing!r}")
        if not self.tol > 0:
            raise ConfigurationError(f"solver.tol must be > 0, got {self.tol!r}")
        if isinstance(self.max_iter, bool) or int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigurationError(f"solver.max_iter must be an integer >= 1, got {self.max_iter!r}")


@dataclass(frozen=True)
class BandGreens:
    """Electron Green's functions of one band, N x N per frequency"""

    retarded: GridFunction
    advanced: GridFunction
    lesser: GridFunction
    greater: GridFunction


@dataclass(frozen=True)
class PhotonGreens:
    """Cavity propagator of A = a + a^dagger, scalar per frequency"""

    retarded: GridFunction
    advanced: GridFunction
    lesser: GridFunction
    greater: GridFunction


@dataclass(frozen=True)
class ConvergedState:
    """Snapshot of the loop: Green's functions, self-energies and metadata.

    When converged is False the state is the last iterate of a loop that
    ran out of iterations.
    """

    params: ModelParams
    basis: BlochBasis = field(repr=False)
    grid: FrequencyGrid
    greens: Dict[int, BandGreens] = field(repr=False)
    photon: PhotonGreens = field(repr=False)
    electron_se: ElectronSelfEnergy = field(repr=False)
    photon_se: PhotonSelfEnergy = field(repr=False)
    iterations: int
    residual_history: List[float] = field(repr=False)
    converged: bool
    current: float
    n_cav: float
    truncation_metric: float
    truncated: bool = False


def dyson_electron(sigma_retarded: GridFunction, basis: BlochBasis, band: int) -> Tuple[GridFunction, GridFunction]:
    """Solve G^r(w) = [(w - omega_{alpha,k}) delta_kk' - Sigma^r(w)]^-1 at every frequency.

    Parameters:
        sigma_retarded (GridFunction): Retarded self-energy of the band, leads included.
        basis (BlochBasis): The Bloch basis of the chain.
        band (int): Band index alpha.

    Returns:
        (tuple<GridFunction, GridFunction>): (G^r, G^a) with G^a = (G^r)^dagger.

    Raises:
        SingularMatrixError: If the matrix is singular at some frequency.
    """
    omegas = sigma_retarded.grid.omegas
    n = basis.n_sites
    inverse = (omegas[:, None, None] * np.eye(n)
               - np.diag(basis.energies(band))[None]
               - sigma_retarded.values)

    try:
        retarded = np.linalg.inv(inverse)
    except np.linalg.LinAlgError:
        for index, matrix in enumerate(inverse):
            if np.linalg.matrix_rank(matrix) < n:
                raise SingularMatrixError(
                    f"electron Dyson matrix of band {band} is singular at omega = {omegas[index]:.6g}",
                    omega=float(omegas[index])) from None
        raise

    bad = ~np.all(np.isfinite(retarded), axis=(1, 2))
    if np.any(bad):
        omega = float(omegas[np.argmax(bad)])
        raise SingularMatrixError(
            f"electron Dyson inversion of band {band} is not finite at omega = {omega:.6g}", omega=omega)

    advanced = np.conj(np.swapaxes(retarded, 1, 2))
    return sigma_retarded.with_values(retarded), sigma_retarded.with_values(advanced)


def keldysh_electron(g_retarded: GridFunction, sigma: GridFunction, g_advanced: GridFunction) -> GridFunction:
    """(GridFunction) Returns G^r Sigma G^a for Sigma = Sigma< or Sigma>"""
    check_same_grid(g_retarded, sigma, g_advanced)
    return sigma.with_values(g_retarded.values @ sigma.values @ g_advanced.values)


def dyson_photon(pi_retarded: GridFunction, params: ModelParams) -> Tuple[GridFunction, GridFunction]:
    """Solve D^r(w) = [(w^2 - w0^2) / (2 w0) - Pi^r(w)]^-1.

    The bath part of Pi^r supplies the -i 0+ regularisation of the free
    propagator 2 w0 / (w^2 - w0^2).

    Returns:
        (tuple<GridFunction, GridFunction>): (D^r, D^a = conj(D^r)).

    Raises:
        SingularMatrixError: If the denominator vanishes at some frequency.
    """
    omegas = pi_retarded.grid.omegas
    w0 = params.omega_cav
    denominator = (omegas ** 2 - w0 ** 2) / (2 * w0) - pi_retarded.values

    zero = denominator == 0
    if np.any(zero):
        omega = float(omegas[np.argmax(zero)])
        raise SingularMatrixError(f"photon Dyson denominator vanishes at omega = {omega:.6g}", omega=omega)

    retarded = 1.0 / denominator
    return pi_retarded.with_values(retarded), pi_retarded.with_values(np.conj(retarded))


def keldysh_photon(d_retarded: GridFunction, pi: GridFunction, d_advanced: GridFunction) -> GridFunction:
    """(GridFunction) Returns D^r Pi D^a for Pi = Pi< or Pi>"""
    check_same_grid(d_retarded, pi, d_advanced)
    return pi.with_values(d_retarded.values * pi.values * d_advanced.values)


def _electron_greens(sigma: ElectronSelfEnergy, basis: BlochBasis) -> Dict[int, BandGreens]:
    greens = {}
    for band in BANDS:
        retarded, advanced = dyson_electron(sigma[band].retarded, basis, band)
        lesser = keldysh_electron(retarded, sigma[band].lesser, advanced)
        greater = keldysh_electron(retarded, sigma[band].greater, advanced)
        greens[band] = BandGreens(retarded, advanced, lesser, greater)
    return greens


def _photon_greens(pi: PhotonSelfEnergy, params: ModelParams) -> PhotonGreens:
    retarded, advanced = dyson_photon(pi.retarded, params)
    lesser = keldysh_photon(retarded, pi.lesser, advanced)
    greater = keldysh_photon(retarded, pi.greater, advanced)
    return PhotonGreens(retarded, advanced, lesser, greater)


def _mix(candidate: GridFunction, old: GridFunction, mixing: float) -> GridFunction:
    if mixing == 1:
        return candidate
    return candidate.with_values(mixing * candidate.values + (1 - mixing) * old.values)


def _check_invariants(greens: Mapping[int, BandGreens], sigma: ElectronSelfEnergy, photon: PhotonGreens,
                      pi: PhotonSelfEnergy, iteration: int):
    """Positivity of every occupation-like flavour"""
    label = f" (iteration {iteration})"
    for band in BANDS:
        check_positive(-1j * greens[band].lesser.values, f"-i G<_{band}{label}")
        check_positive(1j * greens[band].greater.values, f"i G>_{band}{label}")
        check_positive(-1j * sigma[band].lesser.values, f"-i Sigma<_{band}{label}")
        check_positive(1j * sigma[band].greater.values, f"i Sigma>_{band}{label}")
        check_positive(sigma[band].chi.values, f"chi_{band}{label}")
    check_positive(1j * pi.lesser.values, f"i Pi<{label}")
    check_positive(1j * pi.greater.values, f"i Pi>{label}")
    check_positive(1j * photon.lesser.values, f"i D<{label}")
    check_positive(1j * photon.greater.values, f"i D>{label}")


def _observables(greens: Mapping[int, BandGreens], photon: PhotonGreens, params: ModelParams,
                 basis: BlochBasis) -> Tuple[float, float]:
    """(J, N_cav) tracked for convergence"""
    t1 = observables.band_transmission(greens[1], basis, 1)
    t2 = observables.band_transmission(greens[2], basis, 2)
    current, _, _ = observables.steady_current(t1, t2, params)
    return current, observables.photon_number(photon.lesser)


def initial_state(params: ModelParams, grid: FrequencyGrid = None, basis: BlochBasis = None) -> ConvergedState:
    """Iteration 0: the exact g = 0 solution with leads, the photon dressed by its bath.

    Parameters:
        params (ModelParams): The model; g is ignored here.
        grid (FrequencyGrid): Frequency grid, built from params when omitted.
        basis (BlochBasis): Bloch basis, built from params when omitted.
    """
    basis = basis or bloch_basis(params)
    grid = grid or make_grid(params)
    bare = replace(params, g=0.0)

    empty = {band: GridFunction(grid, np.zeros((grid.n_points, basis.n_sites, basis.n_sites), dtype=complex))
             for band in BANDS}
    d_greater, d_lesser = bath_photon_propagator(params, grid)

    sigma = electron_retarded_se(electron_lesser_se(empty, d_greater, bare, basis),
                                 electron_greater_se(empty, d_lesser, bare, basis), bare, basis)
    greens = _electron_greens(sigma, basis)

    pi = photon_retarded_se(photon_lesser_se(empty, empty, bare), photon_greater_se(empty, empty, bare), bare)
    retarded, advanced = dyson_photon(pi.retarded, params)
    photon = PhotonGreens(retarded, advanced, d_lesser, d_greater)

    current, n_cav = _observables(greens, photon, params, basis)
    return ConvergedState(params=params, basis=basis, grid=grid, greens=greens, photon=photon,
                          electron_se=sigma, photon_se=pi, iterations=0, residual_history=[],
                          converged=False, current=current, n_cav=n_cav,
                          truncation_metric=observables.sum_rule_deficit(greens))


def iterate(state: ConvergedState, options: SolverOptions = None) -> ConvergedState:
    """Apply one full self-consistent cycle to a state.

    Parameters:
        state (ConvergedState): The current iterate.
        options (SolverOptions): Mixing and invariant checks.

    Returns:
        (ConvergedState): The next iterate; converged is set when the
                          residual drops below options.tol.

    Raises:
        NumericalConsistencyError: If an invariant fails and checks are on.
    """
    options = options or SolverOptions()
    params, basis = state.params, state.basis
    iteration = state.iterations + 1

    lesser = {band: state.greens[band].lesser for band in BANDS}
    greater = {band: state.greens[band].greater for band in BANDS}
    candidate_lesser = electron_lesser_se(lesser, state.photon.greater, params, basis)
    candidate_greater = electron_greater_se(greater, state.photon.lesser, params, basis)
    sigma = electron_retarded_se(
        {band: _mix(candidate_lesser[band], state.electron_se[band].lesser, options.mixing) for band in BANDS},
        {band: _mix(candidate_greater[band], state.electron_se[band].greater, options.mixing) for band in BANDS},
        params, basis)
    greens = _electron_greens(sigma, basis)

    lesser = {band: greens[band].lesser for band in BANDS}
    greater = {band: greens[band].greater for band in BANDS}
    pi = photon_retarded_se(
        _mix(photon_lesser_se(lesser, greater, params), state.photon_se.lesser, options.mixing),
        _mix(photon_greater_se(greater, lesser, params), state.photon_se.greater, options.mixing),
        params)
    photon = _photon_greens(pi, params)

    if options.check_invariants:
        _check_invariants(greens, sigma, photon, pi, iteration)

    current, n_cav = _observables(greens, photon, params, basis)
    residual = max(relative_change(current, state.current), relative_change(n_cav, state.n_cav))
    log.info("iteration %d: residual %.3e, J = %.6e, N_cav = %.6e", iteration, residual, current, n_cav)

    return ConvergedState(params=params, basis=basis, grid=state.grid, greens=greens, photon=photon,
                          electron_se=sigma, photon_se=pi, iterations=iteration,
                          residual_history=state.residual_history + [residual],
                          converged=residual < options.tol, current=current, n_cav=n_cav,
                          truncation_metric=observables.sum_rule_deficit(greens),
                          truncated=sigma.truncated or pi.retarded.truncated)


def scba_solve(params: ModelParams, grid: FrequencyGrid = None, options: SolverOptions = None) -> ConvergedState:
    """Run the self-consistent Born loop to convergence.

    Parameters:
        params (ModelParams): The model.
        grid (FrequencyGrid): Frequency grid, make_grid(params) when omitted.
        options (SolverOptions): Loop controls.

    Returns:
        (ConvergedState): The converged state.

    Raises:
        NotConvergedError: After options.max_iter iterations without
                           convergence; carries the last state.
        NumericalConsistencyError: If an invariant fails at some iteration.
    """
    options = options or SolverOptions()
    grid = grid or make_grid(params)
    log.debug("scba: N = %d, g = %g, %d grid points", params.n_sites, params.g, grid.n_points)

    state = initial_state(params, grid)
    if options.check_invariants:
        _check_invariants(state.greens, state.electron_se, state.photon, state.photon_se, 0)

    while state.iterations < options.max_iter:
        state = iterate(state, options)
        if state.converged:
            log.debug("scba converged after %d iterations, J = %.6e", state.iterations, state.current)
            if state.truncated:
                log.warning("spectral weight at the grid edges; causal transforms carry a truncation bias")
            return state

    raise NotConvergedError(
        f"no convergence after {options.max_iter} iterations (last residual "
        f"{state.residual_history[-1]:.3e}, tol {options.tol:.1e})",
        state, state.residual_history)
