"""
Physical model of the two-band chain: parameters, Bloch basis, dispersions
and lead-contact matrices.

The chain has N sites with two orbitals each. Orbital alpha has on-site
energy omega_alpha and nearest-neighbour hopping t_alpha; the open-chain
hopping problem is diagonalised by the sine basis

    phi_k^j = sqrt(2 / (N + 1)) * sin(pi * j * k / (N + 1)),

giving omega_{alpha,k} = omega_alpha - 2 t_alpha cos(pi k / (N + 1)). The
source couples to site 1 and the drain to site N of both bands.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from cavity_transport.errors import ConfigurationError

BANDS = (1, 2)

# Tolerance on the normalisation omega2 - omega1 = 1
SPLITTING_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the chain, the cavity and the reservoirs.

    Energies are in units of omega21 = omega2 - omega1 = 1.
    """

    n_sites: int = 10
    omega1: float = -0.5
    omega2: float = 0.5
    omega_cav: float = 1.0
    t1: float = 0.0
    t2: float = 0.07
    g: float = 0.0
    kappa: float = 5e-3
    gamma1: float = 2.5e-4
    gamma2: float = 2.5e-4
    n_ph: float = 0.0

    def __post_init__(self):
        if isinstance(self.n_sites, bool) or int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ConfigurationError(f"model.n_sites must be an integer >= 1, got {self.n_sites!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))

        if abs((self.omega2 - self.omega1) - 1.0) > SPLITTING_TOLERANCE:
            raise ConfigurationError(
                "model.omega2 - model.omega1 must equal 1 (energies are in units of omega21), "
                f"got {self.omega2 - self.omega1!r}")

        for name in ("t1", "t2", "g", "n_ph"):
            if not getattr(self, name) >= 0:
                raise ConfigurationError(f"model.{name} must be >= 0, got {getattr(self, name)!r}")
        for name in ("kappa", "gamma1", "gamma2", "omega_cav"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"model.{name} must be > 0, got {getattr(self, name)!r}")

    @classmethod
    def keys(cls):
        """(tuple<str>) Returns the names of all model parameters"""
        return tuple(f.name for f in fields(cls))

    def onsite(self, band: int) -> float:
        """(float) Returns the band-centre energy omega_alpha"""
        return self.omega1 if _check_band(band) == 1 else self.omega2

    def hopping(self, band: int) -> float:
        """(float) Returns the hopping rate t_alpha"""
        return self.t1 if _check_band(band) == 1 else self.t2

    def gamma(self, band: int) -> float:
        """(float) Returns the lead injection/extraction rate Gamma_alpha"""
        return self.gamma1 if _check_band(band) == 1 else self.gamma2

    def other_band(self, band: int) -> int:
        """(int) Returns the band the light-matter coupling connects 'band' to"""
        return 2 if _check_band(band) == 1 else 1

    def as_dict(self) -> dict:
        """(dict<str, float>) Returns the parameters keyed by name"""
        return {name: getattr(self, name) for name in self.keys()}


@dataclass(frozen=True)
class BlochBasis:
    """Sine basis of the open chain and the band dispersions.

    phi[j - 1, k - 1] holds phi_k^j; the matrix is real, symmetric and
    orthogonal. dispersion[alpha - 1, k - 1] holds omega_{alpha,k}.
    """

    phi: np.ndarray
    dispersion: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.phi.shape[0]

    def energies(self, band: int) -> np.ndarray:
        """(np.ndarray) Returns omega_{alpha,k} for k = 1..N"""
        return self.dispersion[_check_band(band) - 1]


@dataclass(frozen=True)
class ContactMatrix:
    """Contact projector sigma^j_{kk'} = phi_k^j phi_{k'}^j for j in {1, N}"""

    site: int
    sigma: np.ndarray


def _check_band(band: int) -> int:
    if band not in BANDS:
        raise ValueError(f"band must be 1 or 2, got {band!r}")
    return band


def bloch_basis(params: ModelParams) -> BlochBasis:
    """Construct the Bloch basis and both dispersions for the given chain.

    Parameters:
        params (ModelParams): The model.

    Returns:
        (BlochBasis): phi_k^j and omega_{alpha,k}.
    """
    n = params.n_sites
    j = np.arange(1, n + 1)
    phi = np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(j, j) / (n + 1))

    cosines = np.cos(np.pi * j / (n + 1))
    dispersion = np.array([params.onsite(band) - 2 * params.hopping(band) * cosines
                           for band in BANDS])

    return BlochBasis(phi=phi, dispersion=dispersion)


def dispersion(params: ModelParams, band: int, mode: int) -> float:
    """(float) Returns omega_{alpha,k} = omega_alpha - 2 t_alpha cos(pi k / (N + 1))

    Parameters:
        params (ModelParams): The model.
        band (int): Band index alpha in {1, 2}.
        mode (int): Bloch index k in 1..N.

    Raises:
        ValueError: If 'band' or 'mode' is out of range.
    """
    _check_band(band)
    if isinstance(mode, bool) or int(mode) != mode or not 1 <= mode <= params.n_sites:
        raise ValueError(f"mode must be an integer in 1..{params.n_sites}, got {mode!r}")

    return params.onsite(band) - 2 * params.hopping(band) * np.cos(np.pi * mode / (params.n_sites + 1))


def contact_matrix(basis: BlochBasis, site: int) -> ContactMatrix:
    """Construct the rank-one contact matrix of a chain end.

    Parameters:
        basis (BlochBasis): The Bloch basis.
        site (int): Contact site, 1 (source) or N (drain).

    Raises:
        ValueError: If 'site' is an interior site.
    """
    n = basis.n_sites
    if site not in (1, n):
        raise ValueError(f"contact site must be 1 or {n}, got {site!r}")

    row = basis.phi[site - 1]
    return ContactMatrix(site=site, sigma=np.outer(row, row))


def contact_pair(basis: BlochBasis):
    """(tuple<np.ndarray, np.ndarray>) Returns (sigma^1, sigma^N) as plain arrays"""
    return (contact_matrix(basis, 1).sigma,
            contact_matrix(basis, basis.n_sites).sigma)
