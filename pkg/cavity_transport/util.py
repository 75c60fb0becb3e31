"""
Some utility & miscellany for the transport engine
"""

import numpy as np

from cavity_transport.errors import NumericalConsistencyError

# Default tolerance used for positivity checks, relative to the largest
# eigenvalue magnitude found on the grid
PSD_TOLERANCE = 1e-10


def hermitian_part(matrices: np.ndarray) -> np.ndarray:
    """(np.ndarray) Returns (M + M^dagger) / 2 for a stack of square matrices

    Parameters:
        matrices (np.ndarray): Array of shape (..., N, N).
    """
    return 0.5 * (matrices + np.conj(np.swapaxes(matrices, -1, -2)))


def hermiticity_error(matrices: np.ndarray) -> float:
    """(float) Returns max |M - M^dagger| over a stack of square matrices"""
    if matrices.size == 0:
        return 0.0
    return float(np.max(np.abs(matrices - np.conj(np.swapaxes(matrices, -1, -2)))))


def check_positive(matrices: np.ndarray, name: str, tolerance: float = PSD_TOLERANCE):
    """Check that a stack of matrices is Hermitian positive semidefinite.

    Tolerances are relative to the largest absolute entry on the grid, so
    round-off from FFT correlations does not trip the check.

    Parameters:
        matrices (np.ndarray): Array of shape (n_points, N, N) or (n_points,).
        name (str): Name used in the error message, e.g. "-i G<_1".
        tolerance (float): Relative tolerance on Hermiticity and eigenvalues.

    Raises:
        NumericalConsistencyError: If a matrix is not Hermitian or has an
                                   eigenvalue below -tolerance * scale.
    """
    if matrices.ndim == 1:
        matrices = matrices[:, None, None]

    scale = float(np.max(np.abs(matrices))) if matrices.size else 0.0
    if scale == 0.0:
        return

    herm = hermiticity_error(matrices)
    if herm > tolerance * scale:
        raise NumericalConsistencyError(
            f"{name} is not Hermitian (max deviation {herm:.3e}, scale {scale:.3e})")

    eigenvalues = np.linalg.eigvalsh(hermitian_part(matrices))
    lowest = float(np.min(eigenvalues))
    if lowest < -tolerance * scale:
        index = int(np.argmin(np.min(eigenvalues, axis=-1)))
        raise NumericalConsistencyError(
            f"{name} is not positive semidefinite at grid index {index} "
            f"(eigenvalue {lowest:.3e}, scale {scale:.3e}); the grid is likely too coarse")


def refine_peak(x: np.ndarray, y: np.ndarray, index: int) -> float:
    """(float) Returns the sub-bin position of a local maximum

    A parabola is fitted through the sample at 'index' and its two
    neighbours; edge samples are returned unrefined.

    Parameters:
        x (np.ndarray): Uniformly spaced abscissa.
        y (np.ndarray): Sampled function.
        index (int): Index of the local maximum.
    """
    if index <= 0 or index >= len(y) - 1:
        return float(x[index])

    left, centre, right = y[index - 1], y[index], y[index + 1]
    curvature = left - 2 * centre + right
    if curvature == 0:
        return float(x[index])

    shift = 0.5 * (left - right) / curvature
    return float(x[index] + shift * (x[1] - x[0]))


def relative_change(new: float, old: float, floor: float = 1e-14) -> float:
    """(float) Returns |new - old| / max(|new|, floor)"""
    return abs(new - old) / max(abs(new), floor)
