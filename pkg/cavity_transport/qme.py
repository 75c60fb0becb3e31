"""
Exact Lindblad steady states of short chains, used as ground truth for the
Green's function solver.

Fermionic modes are ordered site-major, band-minor: mode m = 2 (j - 1) +
(alpha - 1). Annihilators carry Jordan-Wigner parity strings over all
preceding modes, so they anticommute across sites and bands. The cavity
mode is truncated at photon_cutoff quanta and sits after the fermions in
the tensor product.

Operators are qutip Qobj; the generator is qutip's column-stacked
liouvillian and rho comes from qutip.steadystate.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import qutip
import scipy.sparse
import scipy.sparse.linalg

from cavity_transport.errors import (ConfigurationError, DegenerateSteadyStateError,
                                     DimensionCapError, NumericalConsistencyError)
from cavity_transport.model import BANDS, ModelParams
from cavity_transport.util import hermitian_part, relative_change

log = logging.getLogger(__name__)

# Tolerances on the physicality of rho
TRACE_TOLERANCE = 1e-10
EIGENVALUE_TOLERANCE = 1e-10
# The three current expressions must agree to this fraction of sum(Gamma)
CURRENT_TOLERANCE = 1e-8
# Liouvillian eigenvalues below this fraction of its scale count as zero
NULL_TOLERANCE = 1e-9
# Number of eigenvalues sought around zero for the uniqueness check
NULL_EIGENVALUES = 3
# Relative change of J under cutoff - 1 below which the cutoff is trusted
CUTOFF_TOLERANCE = 1e-3
# Default agreement bounds of compare: |delta J| in units of min(Gamma),
# |delta n_site| absolute, |delta N_cav| relative to max(1, N_cav)
J_TOLERANCE = 0.15
N_SITE_TOLERANCE = 0.05
N_CAV_TOLERANCE = 0.1


@dataclass(frozen=True)
class QmeProblem:
    """A master-equation run: the model, the photon truncation and the caps"""

    params: ModelParams
    photon_cutoff: int = 4
    rotating_wave: bool = False
    max_sites: int = 3
    max_dim: int = 4096

    def __post_init__(self):
        for name in ("photon_cutoff", "max_sites", "max_dim"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigurationError(f"qme.{name} must be an integer >= 1, got {value!r}")

    @property
    def hilbert_dim(self) -> int:
        """(int) Returns 4^N (photon_cutoff + 1)"""
        return 4 ** self.params.n_sites * (self.photon_cutoff + 1)

    def with_cutoff(self, photon_cutoff: int) -> "QmeProblem":
        return replace(self, photon_cutoff=photon_cutoff)


@dataclass(frozen=True)
class FockOperators:
    """Annihilators on the full fermion x photon space"""

    fermions: Dict[Tuple[int, int], qutip.Qobj] = field(repr=False)
    photon: qutip.Qobj = field(repr=False)
    dim: int

    def c(self, band: int, site: int) -> qutip.Qobj:
        """(Qobj) Returns c_{alpha,j}"""
        return self.fermions[(band, site)]

    def number(self, band: int, site: int) -> qutip.Qobj:
        """(Qobj) Returns n_{alpha,j} = c^dagger c"""
        annihilator = self.c(band, site)
        return annihilator.dag() * annihilator


@dataclass(frozen=True)
class Liouvillian:
    """Generator of the master equation and the operators it was built from"""

    superoperator: qutip.Qobj = field(repr=False)
    hamiltonian: qutip.Qobj = field(repr=False)
    collapse: List[qutip.Qobj] = field(repr=False)
    problem: QmeProblem
    operators: FockOperators = field(repr=False)

    @property
    def matrix(self) -> scipy.sparse.csr_matrix:
        """(csr_matrix) Returns the column-stacked generator as a scipy matrix"""
        return self.superoperator.to("csr").data_as("csr_matrix")


@dataclass(frozen=True)
class QmeSteadyState:
    """The unique steady state and its observables.

    current is the trace formula sum_alpha Tr[(Gamma/2) n_{alpha,1} D[c^dagger_{alpha,1}] rho];
    current_in and current_out are the injection and extraction forms.
    """

    rho: np.ndarray = field(repr=False)
    problem: QmeProblem
    operators: FockOperators = field(repr=False)
    current: float
    current_in: float
    current_out: float
    n_site: Dict[int, np.ndarray]
    n_cav: float
    residual: float
    cutoff_converged: bool = False


@dataclass(frozen=True)
class DiffReport:
    """Differences between the Green's function and master-equation results"""

    j_negf: float
    j_qme: float
    delta_j: float
    delta_n_site: Dict[int, np.ndarray]
    delta_n_cav: float
    j_tolerance: float
    n_site_tolerance: float
    n_cav_tolerance: float
    j_within: bool
    n_site_within: bool
    n_cav_within: bool

    @property
    def within_tolerance(self) -> bool:
        """(bool) Returns True when current, occupations and photon number all agree"""
        return self.j_within and self.n_site_within and self.n_cav_within


def check_caps(problem: QmeProblem):
    """Raises DimensionCapError when N or the Hilbert dimension exceeds its cap"""
    n = problem.params.n_sites
    if n > problem.max_sites:
        raise DimensionCapError(
            f"master equation limited to N <= {problem.max_sites} sites, got N = {n}; "
            f"raise qme.max_sites to at least {n}", required=n, cap=problem.max_sites)
    if problem.hilbert_dim > problem.max_dim:
        raise DimensionCapError(
            f"Hilbert dimension 4^{n} x {problem.photon_cutoff + 1} = {problem.hilbert_dim} exceeds the cap; "
            f"raise qme.max_dim to at least {problem.hilbert_dim}",
            required=problem.hilbert_dim, cap=problem.max_dim)


def mode_index(band: int, site: int) -> int:
    """(int) Returns the position 2 (j - 1) + (alpha - 1) of a mode in the ordering"""
    return 2 * (site - 1) + (band - 1)


def fock_operators(n_sites: int, photon_cutoff: int) -> FockOperators:
    """Construct c_{alpha,j} with parity strings and the truncated photon annihilator.

    Index 0 of every two-level factor is the empty mode, so destroy(2) lowers
    and sigmaz is the parity (-1)^n.

    Parameters:
        n_sites (int): Chain length N.
        photon_cutoff (int): Largest photon number kept.
    """
    n_modes = 2 * n_sites
    identity = qutip.qeye(2)
    parity = qutip.sigmaz()
    lower = qutip.destroy(2)
    photon_identity = qutip.qeye(photon_cutoff + 1)

    fermions = {}
    for site in range(1, n_sites + 1):
        for band in BANDS:
            m = mode_index(band, site)
            factors = [parity] * m + [lower] + [identity] * (n_modes - m - 1) + [photon_identity]
            fermions[(band, site)] = qutip.tensor(factors)

    photon = qutip.tensor([identity] * n_modes + [qutip.destroy(photon_cutoff + 1)])
    return FockOperators(fermions=fermions, photon=photon, dim=2 ** n_modes * (photon_cutoff + 1))


def system_hamiltonian(problem: QmeProblem, operators: FockOperators) -> qutip.Qobj:
    """Chain, cavity and light-matter coupling.

        H = sum w_alpha n_{alpha,j} - sum t_alpha (c^dagger_{alpha,j} c_{alpha,j+1} + h.c.)
            + w0 a^dagger a + g sum_j (c^dagger_{2,j} c_{1,j} + h.c.)(a + a^dagger)

    With rotating_wave the coupling keeps only c^dagger_2 c_1 a + h.c.
    """
    params = problem.params
    n = params.n_sites
    a = operators.photon

    hamiltonian = params.omega_cav * a.dag() * a
    for band in BANDS:
        for site in range(1, n + 1):
            hamiltonian += params.onsite(band) * operators.number(band, site)
        for site in range(1, n):
            hop = operators.c(band, site).dag() * operators.c(band, site + 1)
            hamiltonian -= params.hopping(band) * (hop + hop.dag())

    if params.g:
        for site in range(1, n + 1):
            excite = operators.c(2, site).dag() * operators.c(1, site)
            if problem.rotating_wave:
                coupling = excite * a
                hamiltonian += params.g * (coupling + coupling.dag())
            else:
                hamiltonian += params.g * (excite + excite.dag()) * (a + a.dag())

    return hamiltonian


def jump_operators(problem: QmeProblem, operators: FockOperators) -> List[Tuple[float, qutip.Qobj]]:
    """(list<tuple<float, Qobj>>) Returns (rate, b) pairs of the dissipators rate D[b]

    Here D[b] rho = 2 b rho b^dagger - {b^dagger b, rho}. Rates: (kappa/2)(1 + N_ph)
    on a, (kappa/2) N_ph on a^dagger, and Gamma_alpha / 2 on c^dagger_{alpha,1}
    and on c_{alpha,N}.
    """
    params = problem.params
    a = operators.photon
    jumps = [(0.5 * params.kappa * (1 + params.n_ph), a)]
    if params.n_ph:
        jumps.append((0.5 * params.kappa * params.n_ph, a.dag()))
    for band in BANDS:
        rate = 0.5 * params.gamma(band)
        jumps.append((rate, operators.c(band, 1).dag()))
        jumps.append((rate, operators.c(band, params.n_sites)))
    return jumps


def collapse_operators(problem: QmeProblem, operators: FockOperators) -> List[qutip.Qobj]:
    """(list<Qobj>) Returns sqrt(2 rate) b for every jump, the form qutip expects"""
    return [np.sqrt(2 * rate) * jump for rate, jump in jump_operators(problem, operators)]


def build_liouvillian(problem: QmeProblem) -> Liouvillian:
    """Assemble the master-equation generator.

        d rho / dt = -i [H, rho] + (kappa/2)(1 + N_ph) D[a] rho + (kappa/2) N_ph D[a^dagger] rho
                     + sum_alpha (Gamma_alpha / 2)(D[c^dagger_{alpha,1}] rho + D[c_{alpha,N}] rho)

    Parameters:
        problem (QmeProblem): The run.

    Returns:
        (Liouvillian): The generator as a qutip superoperator.

    Raises:
        DimensionCapError: If N or the Hilbert dimension exceeds its cap.
    """
    check_caps(problem)
    operators = fock_operators(problem.params.n_sites, problem.photon_cutoff)
    hamiltonian = system_hamiltonian(problem, operators)
    collapse = collapse_operators(problem, operators)
    superoperator = qutip.liouvillian(hamiltonian, collapse)
    log.debug("liouvillian: Hilbert dimension %d, %d collapse operators", operators.dim, len(collapse))
    return Liouvillian(superoperator=superoperator, hamiltonian=hamiltonian, collapse=collapse,
                       problem=problem, operators=operators)


def _null_dimension(matrix: scipy.sparse.csr_matrix, scale: float) -> Optional[int]:
    """Count Liouvillian eigenvalues at zero, None when the eigensolver fails"""
    k = min(NULL_EIGENVALUES, matrix.shape[0] - 2)
    try:
        eigenvalues = scipy.sparse.linalg.eigs(matrix.tocsc(), k=k, sigma=-NULL_TOLERANCE * scale,
                                               return_eigenvectors=False)
    except (scipy.sparse.linalg.ArpackNoConvergence, RuntimeError) as error:
        log.warning("uniqueness check skipped, eigensolver failed: %s", error)
        return None
    return int(np.sum(np.abs(eigenvalues) < NULL_TOLERANCE * scale))


def _solve(liouvillian: Liouvillian) -> qutip.Qobj:
    """Steady state by sparse LU, falling back to inverse power iteration"""
    try:
        return qutip.steadystate(liouvillian.superoperator, method="direct")
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as error:
        log.warning("direct steady-state solve failed (%s), trying inverse power iteration", error)

    try:
        return qutip.steadystate(liouvillian.superoperator, method="power")
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as error:
        raise NumericalConsistencyError(f"master-equation steady state not found: {error}") from error


def _physical_rho(state: qutip.Qobj) -> np.ndarray:
    rho = state.full()
    trace = np.trace(rho)
    if abs(trace) == 0:
        raise NumericalConsistencyError("steady state has zero trace")
    rho = hermitian_part(rho / trace)

    lowest = float(np.linalg.eigvalsh(rho).min())
    if lowest < -EIGENVALUE_TOLERANCE:
        raise NumericalConsistencyError(f"steady state is not positive: lowest eigenvalue {lowest:.3e}")
    if abs(np.trace(rho).real - 1) > TRACE_TOLERANCE:
        raise NumericalConsistencyError(f"steady state trace {np.trace(rho).real!r} differs from 1")
    return rho


def _currents(rho: qutip.Qobj, params: ModelParams, operators: FockOperators) -> Tuple[float, float, float]:
    """(printed trace formula, injection form, extraction form)"""
    printed = current_in = current_out = 0.0
    for band in BANDS:
        gamma = params.gamma(band)
        creation = operators.c(band, 1).dag()
        holes = creation.dag() * creation
        number = operators.number(band, 1)

        dissipated = 2 * creation * rho * creation.dag() - holes * rho - rho * holes
        printed += 0.5 * gamma * (number * dissipated).tr().real
        current_in += gamma * (1 - qutip.expect(number, rho))
        current_out += gamma * qutip.expect(operators.number(band, params.n_sites), rho)
    return printed, current_in, current_out


def steady_state(liouvillian: Liouvillian) -> QmeSteadyState:
    """Solve L vec(rho) = 0 for the unique steady state.

    rho comes from qutip.steadystate. Uniqueness is checked first by
    shift-invert eigenvalues of L near zero.

    Parameters:
        liouvillian (Liouvillian): The generator.

    Returns:
        (QmeSteadyState): rho and its observables; cutoff_converged is False
                          until converge_cutoff has run.

    Raises:
        DegenerateSteadyStateError: If more than one eigenvalue is zero.
        NumericalConsistencyError: If rho is unphysical or the current
                                   identities disagree.
    """
    matrix = liouvillian.matrix
    operators = liouvillian.operators
    params = liouvillian.problem.params
    scale = float(np.mean(np.abs(matrix.data))) if matrix.nnz else 1.0

    null_dimension = _null_dimension(matrix, scale)
    if null_dimension is not None and null_dimension > 1:
        raise DegenerateSteadyStateError(
            f"steady state is not unique: null space of dimension {null_dimension}", null_dimension)

    solution = _solve(liouvillian)
    rho = _physical_rho(solution)
    residual = float(np.linalg.norm(matrix @ rho.reshape(-1, order="F")))
    log.debug("qme steady state: residual %.3e", residual)

    density = qutip.Qobj(rho, dims=solution.dims)
    printed, current_in, current_out = _currents(density, params, operators)
    n_site = {band: np.array([qutip.expect(operators.number(band, site), density)
                              for site in range(1, params.n_sites + 1)]) for band in BANDS}
    a = operators.photon
    n_cav = float(qutip.expect(a.dag() * a, density))

    state = QmeSteadyState(rho=rho, problem=liouvillian.problem, operators=operators,
                           current=printed, current_in=current_in, current_out=current_out,
                           n_site=n_site, n_cav=n_cav, residual=residual)
    qme_current(state, params)
    return state


def qme_current(state: QmeSteadyState, params: ModelParams) -> float:
    """Current of a master-equation steady state, with its consistency check.

    The trace formula reduces to sum_alpha Gamma_alpha <1 - n_{alpha,1}>
    (injection) and, by continuity, equals sum_alpha Gamma_alpha <n_{alpha,N}>
    (extraction).

    Returns:
        (float): The trace-formula current.

    Raises:
        NumericalConsistencyError: If the three expressions disagree by more
                                   than 1e-8 sum(Gamma).
    """
    tolerance = CURRENT_TOLERANCE * (params.gamma1 + params.gamma2)
    values = (state.current, state.current_in, state.current_out)
    spread = max(values) - min(values)
    if spread > tolerance:
        raise NumericalConsistencyError(
            f"master-equation currents disagree: trace formula {state.current:.10e}, "
            f"injection {state.current_in:.10e}, extraction {state.current_out:.10e}")
    return state.current


def solve(problem: QmeProblem) -> QmeSteadyState:
    """(QmeSteadyState) Builds the Liouvillian of a problem and returns its steady state"""
    return steady_state(build_liouvillian(problem))


def converge_cutoff(problem: QmeProblem) -> QmeSteadyState:
    """Solve at photon_cutoff and photon_cutoff - 1 and compare the currents.

    cutoff_converged is set when J changes by less than 1e-3 relative.
    """
    state = solve(problem)
    if problem.photon_cutoff < 2:
        log.warning("photon cutoff %d cannot be checked against a smaller one", problem.photon_cutoff)
        return state

    lower = solve(problem.with_cutoff(problem.photon_cutoff - 1))
    change = relative_change(state.current, lower.current)
    converged = change < CUTOFF_TOLERANCE
    if not converged:
        log.warning("photon cutoff %d not converged: J changes by %.3e relative", problem.photon_cutoff, change)
    return replace(state, cutoff_converged=converged)


def compare(report, qme_state: QmeSteadyState, j_tolerance: float = J_TOLERANCE,
            n_site_tolerance: float = N_SITE_TOLERANCE, n_cav_tolerance: float = N_CAV_TOLERANCE) -> DiffReport:
    """Differences between a Green's function report and a master-equation state.

    Parameters:
        report (TransportReport): Observables of the converged NEGF state.
        qme_state (QmeSteadyState): Master-equation steady state of the same model.
        j_tolerance (float): Allowed |delta J| in units of min(Gamma1, Gamma2).
        n_site_tolerance (float): Allowed |delta n| on every site and band.
        n_cav_tolerance (float): Allowed |delta N_cav| relative to max(1, N_cav^QME).

    Returns:
        (DiffReport): Signed differences NEGF - QME and the bounds they were held to.
    """
    params = qme_state.problem.params
    delta_j = report.j - qme_state.current
    delta_n_site = {band: report.populations.n_site[band] - qme_state.n_site[band] for band in BANDS}
    delta_n_cav = report.n_cav - qme_state.n_cav

    j_bound = j_tolerance * min(params.gamma1, params.gamma2)
    n_cav_bound = n_cav_tolerance * max(1.0, qme_state.n_cav)
    return DiffReport(
        j_negf=report.j,
        j_qme=qme_state.current,
        delta_j=delta_j,
        delta_n_site=delta_n_site,
        delta_n_cav=delta_n_cav,
        j_tolerance=j_bound,
        n_site_tolerance=n_site_tolerance,
        n_cav_tolerance=n_cav_bound,
        j_within=abs(delta_j) <= j_bound,
        n_site_within=all(bool(np.all(np.abs(delta) <= n_site_tolerance)) for delta in delta_n_site.values()),
        n_cav_within=abs(delta_n_cav) <= n_cav_bound,
    )
