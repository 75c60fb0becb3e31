"""
Exceptions raised by the transport engine
"""


class TransportError(Exception):
    """Base class for every error raised on purpose by the engine"""


class ConfigurationError(TransportError, ValueError):
    """Invalid parameters or configuration entries.

    The message names the offending key path (e.g. "model.kappa") or the
    violated bound.
    """


class GridMismatchError(TransportError, ValueError):
    """Two grid functions were combined that do not live on the same grid"""


class NumericalConsistencyError(TransportError):
    """A numerical invariant (positivity, Hermiticity, realness, occupation
    bounds, current identities) was violated beyond tolerance"""


class SingularMatrixError(NumericalConsistencyError):
    """A Dyson inversion met a singular matrix"""

    def __init__(self, message: str, omega: float = None):
        """
        Parameters:
            message (str): Description of the failure.
            omega (float): The frequency at which the inversion failed.
        """
        super().__init__(message)
        self.omega = omega


class DegenerateSteadyStateError(NumericalConsistencyError):
    """The Liouvillian has more than one steady state"""

    def __init__(self, message: str, null_dimension: int):
        super().__init__(message)
        self.null_dimension = null_dimension


class DimensionCapError(TransportError):
    """The master-equation Hilbert space exceeds the configured cap"""

    def __init__(self, message: str, required: int, cap: int):
        super().__init__(message)
        self.required = required
        self.cap = cap


class NotConvergedError(TransportError):
    """The self-consistent loop ran out of iterations.

    The last state is kept so callers can still inspect or write it.
    """

    def __init__(self, message: str, state, residual_history):
        """
        Parameters:
            message (str): Description of the failure.
            state (ConvergedState): The last iterate, flagged unconverged.
            residual_history (list<float>): Residual after every iteration.
        """
        super().__init__(message)
        self.state = state
        self.residual_history = list(residual_history)
