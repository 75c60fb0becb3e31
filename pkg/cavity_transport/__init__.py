"""Cavity transport engine

Steady-state charge transport through a two-band tight-binding chain whose
interband transitions couple to a single lossy cavity mode. Currents,
spectra and populations are computed with a self-consistent
non-equilibrium Green's function loop; closed-form baselines and an exact
Lindblad master-equation solver serve as oracles.

The engine depends on numpy and scipy. All energies are expressed in units
of the interband splitting (omega2 - omega1 = 1), with hbar = e = 1.
"""

__version__ = "1.1.0"

__all__ = ["baselines", "errors", "model", "observables", "qme",
           "selfenergy", "solver", "spectral", "util"]
