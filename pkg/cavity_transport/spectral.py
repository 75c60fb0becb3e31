"""
Frequency-grid infrastructure and the numerical kernels shared by every
self-energy: the causal transform, frequency cross-correlation and grid
integration.

All Green's functions and self-energies live on one uniform grid that is
symmetric about zero and contains omega = 0 as a node (n_points = 2^p + 1).
With that layout omega_i + omega_j is again a grid node, which keeps the
cross-correlation exact up to window truncation.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import scipy.fft
import scipy.integrate
import scipy.signal

from cavity_transport.errors import ConfigurationError, GridMismatchError, NumericalConsistencyError
from cavity_transport.model import BANDS, ModelParams
from cavity_transport.util import hermitian_part, hermiticity_error

log = logging.getLogger(__name__)

# Finest spectral feature must span this many grid spacings
RESOLUTION_FACTOR = 8
# Margin around the spectral support, in units of the broadest rate
MARGIN_FACTOR = 20
# Relative weight at a window edge above which a causal transform is flagged
EDGE_TOLERANCE = 1e-6
# Relative size of Im(chi) tolerated before chi is declared non-real
REALNESS_TOLERANCE = 1e-8
# Distance from a grid node, in spacings, below which a band centre counts as on the node
NODE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Optional overrides for the frequency grid; None keeps the default"""

    omega_min: Optional[float] = None
    omega_max: Optional[float] = None
    d_omega: Optional[float] = None


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency axis, symmetric about 0 with an odd number of points"""

    omega_min: float
    omega_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ConfigurationError(f"grid n_points must be odd and >= 3, got {self.n_points}")
        if not math.isclose(self.omega_min, -self.omega_max, rel_tol=1e-12, abs_tol=1e-15):
            raise ConfigurationError(
                f"grid window must be symmetric about 0, got [{self.omega_min}, {self.omega_max}]")

    @property
    def d_omega(self) -> float:
        return (self.omega_max - self.omega_min) / (self.n_points - 1)

    @property
    def centre(self) -> int:
        """(int) Index of the omega = 0 node"""
        return (self.n_points - 1) // 2

    @cached_property
    def omegas(self) -> np.ndarray:
        """(np.ndarray) The sampled frequencies"""
        return self.d_omega * (np.arange(self.n_points) - self.centre)

    def index_of(self, omega: float) -> int:
        """(int) Returns the index of the node nearest to 'omega'"""
        index = int(round(omega / self.d_omega)) + self.centre
        return min(max(index, 0), self.n_points - 1)


@dataclass(frozen=True)
class GridFunction:
    """Samples of a scalar or N x N matrix function on a frequency grid.

    values has shape (n_points,) for the scalar flavour and
    (n_points, N, N) for the matrix flavour. 'truncated' is set by
    transforms that found non-negligible weight at the window edges.
    """

    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)
    truncated: bool = False

    def __post_init__(self):
        shape = self.values.shape
        if not shape or shape[0] != self.grid.n_points:
            raise GridMismatchError(
                f"grid function has {shape[0] if shape else 0} samples, grid has {self.grid.n_points}")
        if len(shape) not in (1, 3) or (len(shape) == 3 and shape[1] != shape[2]):
            raise ValueError(f"grid function values must be (n,) or (n, N, N), got {shape}")

    @property
    def is_matrix(self) -> bool:
        return self.values.ndim == 3

    def with_values(self, values: np.ndarray, truncated: bool = False) -> "GridFunction":
        """(GridFunction) Returns a function on the same grid with new samples"""
        return GridFunction(self.grid, values, truncated=truncated)


def required_window(params: ModelParams) -> Tuple[float, float]:
    """(tuple<float, float>) Returns the (lo, hi) frequencies a grid must contain

    The window covers both dressed bands and the cavity resonances at
    +-omega_cav, padded by a margin of MARGIN_FACTOR times the broadest rate.
    """
    margin = MARGIN_FACTOR * max(params.kappa, params.gamma1, params.gamma2,
                                 params.g ** 2 / params.kappa)
    lo = min(params.omega1 - 2 * params.t1, params.omega2 - 2 * params.t2,
             -params.omega_cav) - margin
    hi = max(params.omega1 + 2 * params.t1, params.omega2 + 2 * params.t2,
             params.omega_cav) + margin
    return lo, hi


def max_spacing(params: ModelParams) -> float:
    """(float) Returns the coarsest grid spacing that resolves every line width"""
    return min(params.gamma1, params.gamma2, params.kappa) / RESOLUTION_FACTOR


def _narrow_level_on_node(params: ModelParams, d_omega: float) -> bool:
    """True when a band with unresolved interior levels has its centre on a grid node.

    Away from the contacts a level of band alpha only broadens through the
    chain, by about t_alpha^2 / Gamma_alpha; for N >= 3 and a width below the
    spacing the bare Dyson inversion meets a near-singular matrix at omega_alpha.
    """
    if params.n_sites < 3:
        return False
    for band in BANDS:
        if params.hopping(band) ** 2 / params.gamma(band) < d_omega:
            position = params.onsite(band) / d_omega
            if abs(position - round(position)) < NODE_TOLERANCE:
                return True
    return False


def make_grid(params: ModelParams, overrides: GridSpec = None) -> FrequencyGrid:
    """Construct a frequency grid obeying the resolution and coverage bounds.

    By default the half-width is the smallest symmetric window containing
    required_window(params) and the number of points is 2^p + 1 with the
    smallest p meeting the resolution bound.

    Parameters:
        params (ModelParams): The model the grid is built for.
        overrides (GridSpec): Optional window bounds and/or spacing.

    Raises:
        ConfigurationError: If an override violates the symmetry, coverage or
                            resolution bound; the message names the bound.
    """
    overrides = overrides or GridSpec()
    lo, hi = required_window(params)
    half_width = max(-lo, hi)
    spacing = max_spacing(params)
    window_fixed = overrides.omega_min is not None or overrides.omega_max is not None

    if window_fixed:
        omega_min = overrides.omega_min if overrides.omega_min is not None else -overrides.omega_max
        omega_max = overrides.omega_max if overrides.omega_max is not None else -overrides.omega_min
        if not math.isclose(omega_min, -omega_max, rel_tol=1e-12):
            raise ConfigurationError(
                f"grid window must be symmetric about 0, got [{omega_min}, {omega_max}]")
        if omega_max < half_width:
            raise ConfigurationError(
                f"coverage bound violated: window [{omega_min}, {omega_max}] must contain "
                f"[{-half_width:.6g}, {half_width:.6g}]")
        half_width = omega_max

    if overrides.d_omega is not None:
        if not overrides.d_omega > 0:
            raise ConfigurationError(f"grid.d_omega must be > 0, got {overrides.d_omega!r}")
        if overrides.d_omega > spacing:
            raise ConfigurationError(
                f"resolution bound violated: d_omega = {overrides.d_omega:.6g} exceeds "
                f"min(gamma1, gamma2, kappa) / {RESOLUTION_FACTOR} = {spacing:.6g}")
        half_points = math.ceil(half_width / overrides.d_omega - 1e-9)
    else:
        half_points = 2 ** max(1, math.ceil(math.log2(half_width / spacing)))
        # n_points - 1 = 2 * half_points is then a power of two as well
        while half_width / half_points > spacing:
            half_points *= 2
        if not window_fixed and _narrow_level_on_node(params, half_width / half_points):
            half_width += 0.5 * half_width / half_points
            while half_width / half_points > spacing:
                half_points *= 2

    grid = FrequencyGrid(-half_width, half_width, 2 * half_points + 1)
    log.debug("frequency grid: [%g, %g], %d points, d_omega = %.3e",
              grid.omega_min, grid.omega_max, grid.n_points, grid.d_omega)
    return grid


def check_same_grid(*functions: GridFunction):
    """Raises GridMismatchError unless every function lives on the first one's grid"""
    grid = functions[0].grid
    for function in functions[1:]:
        if function.grid != grid:
            raise GridMismatchError(f"grid mismatch: {function.grid} vs {grid}")


def integrate(f: GridFunction):
    """Trapezoidal integral of f over the grid, divided by 2 pi.

    Parameters:
        f (GridFunction): Scalar or matrix grid function.

    Returns:
        (complex | np.ndarray): int f(omega) d omega / 2 pi; an N x N array
                                for the matrix flavour.
    """
    result = scipy.integrate.trapezoid(f.values, dx=f.grid.d_omega, axis=0) / (2 * np.pi)
    return complex(result) if np.ndim(result) == 0 else result


def checked_rates(chi: GridFunction, name: str = "chi") -> np.ndarray:
    """(np.ndarray) Returns the samples of a rate function after validating them

    Scalar rates must be real and are returned as a real array. Matrix
    rates must be Hermitian at every frequency; current-carrying states
    have imaginary off-diagonal rates, so the complex samples are kept.

    Raises:
        NumericalConsistencyError: If the scalar imaginary part, or the
                                   deviation from Hermiticity, exceeds
                                   REALNESS_TOLERANCE relative to max |chi|.
    """
    values = chi.values
    if values.size == 0 or not np.iscomplexobj(values):
        return values

    scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
    if chi.is_matrix:
        deviation = hermiticity_error(values)
        if deviation > REALNESS_TOLERANCE * scale:
            raise NumericalConsistencyError(
                f"{name} must be Hermitian: max |chi - chi^dagger| = {deviation:.3e} at scale {scale:.3e}")
        return hermitian_part(values)

    imaginary = float(np.max(np.abs(values.imag)))
    if imaginary > REALNESS_TOLERANCE * scale:
        raise NumericalConsistencyError(
            f"{name} must be real: max |Im| = {imaginary:.3e} at scale {scale:.3e}")
    return values.real


def _hilbert(rates: np.ndarray) -> np.ndarray:
    """Discrete (1 / pi) p.v. int dw' f(w') / (w - w') of a real array along axis 0"""
    n = rates.shape[0]
    n_fft = scipy.fft.next_fast_len(2 * n)

    # theta(t) in the conjugate domain, theta(0) = 1/2, doubled
    step = np.zeros(n_fft)
    step[0] = 1.0
    step[1:(n_fft + 1) // 2] = 2.0
    if n_fft % 2 == 0:
        step[n_fft // 2] = 1.0
    step = step.reshape((n_fft,) + (1,) * (rates.ndim - 1))

    analytic = scipy.fft.ifft(scipy.fft.fft(rates, n=n_fft, axis=0) * step, axis=0)[:n]
    return analytic.imag


def retarded_from_rates(chi: GridFunction) -> GridFunction:
    """Build the causal function X^r whose anti-Hermitian part is -i chi / 2.

    Implements X^r(w) = -i chi(w) / 2 + (1 / 2 pi) p.v. int dw' chi(w') / (w - w')
    through the real-time route: transform chi, multiply by the step
    function theta(t), transform back. The input is zero-padded to twice
    its length so the periodic transform does not wrap around. Matrix rates
    are transformed elementwise, real and imaginary parts separately.

    Parameters:
        chi (GridFunction): Real scalar or Hermitian matrix rate function.

    Returns:
        (GridFunction): X^r; 'truncated' is set when chi has weight above
                        EDGE_TOLERANCE * max|chi| at a window edge.
    """
    rates = checked_rates(chi)

    if not np.any(rates):
        return chi.with_values(np.zeros(rates.shape, dtype=complex))

    scale = float(np.max(np.abs(rates)))
    edge = max(float(np.max(np.abs(rates[0]))), float(np.max(np.abs(rates[-1]))))
    truncated = edge > EDGE_TOLERANCE * scale
    if truncated:
        log.debug("causal transform: edge weight %.3e of %.3e, truncation bias expected", edge, scale)

    if np.iscomplexobj(rates):
        principal = _hilbert(rates.real) + 1j * _hilbert(rates.imag)
    else:
        principal = _hilbert(rates)

    return chi.with_values(0.5 * principal - 0.5j * rates, truncated=truncated)


def cross_correlate(f: GridFunction, h: GridFunction) -> GridFunction:
    """Frequency cross-correlation C(w) = int dw' / 2 pi f(w + w') h(w').

    Samples of f outside the window count as zero. h may be scalar (it then
    multiplies every matrix element of f) or a matrix of the same shape as f
    (elementwise product).

    Raises:
        GridMismatchError: If f and h live on different grids.
    """
    check_same_grid(f, h)
    grid = f.grid
    n = grid.n_points

    kernel = h.values[::-1]
    if f.is_matrix and not h.is_matrix:
        kernel = kernel[:, None, None]
    elif h.is_matrix and not f.is_matrix:
        raise ValueError("cannot correlate a scalar function with a matrix kernel")

    full = scipy.signal.fftconvolve(f.values, kernel, axes=0)
    # full[k] = sum_j f[k - (n - 1) + j] h[j]; row i + centre pairs w_i + w_j with f
    values = full[grid.centre:grid.centre + n] * (grid.d_omega / (2 * np.pi))

    return f.with_values(values)


def bath_occupation(omegas: np.ndarray, n_ph: float) -> np.ndarray:
    """(np.ndarray) Returns (N_ph + 1) theta(w) + N_ph theta(-w), with theta(0) = 1/2"""
    step = np.heaviside(omegas, 0.5)
    return (n_ph + 1) * step + n_ph * (1 - step)


def bath_propagator_values(params: ModelParams, omegas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Greater and lesser cavity propagators at g = 0, dressed by the bath only.

        D1>(w) = -4 i kappa w0^2 [(N_ph + 1) theta(w) + N_ph theta(-w)]
                 / ((w^2 - w0^2)^2 + kappa^2 w0^2),      D1<(w) = D1>(-w)

    For w0 = 1 this is the resonant closed form. At w = 0 the bath damping
    vanishes with sign(w), which the denominator reproduces.

    Parameters:
        params (ModelParams): The model.
        omegas (np.ndarray): Frequencies to evaluate at, on or off a grid.

    Returns:
        (tuple<np.ndarray, np.ndarray>): (D1>, D1<).
    """
    omegas = np.asarray(omegas, dtype=float)
    w0 = params.omega_cav
    kappa = params.kappa
    denominator = (omegas ** 2 - w0 ** 2) ** 2 + (kappa * w0 * np.sign(omegas)) ** 2
    weight = 4 * w0 ** 2 / denominator

    greater = -1j * kappa * bath_occupation(omegas, params.n_ph) * weight
    lesser = -1j * kappa * bath_occupation(-omegas, params.n_ph) * weight
    return greater, lesser


def bath_photon_propagator(params: ModelParams, grid: FrequencyGrid) -> Tuple[GridFunction, GridFunction]:
    """(tuple<GridFunction, GridFunction>) Returns (D1>, D1<) sampled on a grid"""
    greater, lesser = bath_propagator_values(params, grid.omegas)
    return GridFunction(grid, greater), GridFunction(grid, lesser)
