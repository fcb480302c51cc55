"""Spin-1 condensate excitation spectra via matrix-free Fourier-spectral
operators and a deflated bi-orthogonal eigensolver."""

from .grid import SpectralGrid
from .model import (ANTIFERROMAGNETIC, FERROMAGNETIC, ModelParams,
                    apply_gpe_hamiltonian, chemical_potentials, density,
                    energy, harmonic_potential, magnetization, mass,
                    spin_vector)
from .ground import GroundState, solve_ground_state, solve_sma
from .bdg import BdGOperator, ModePair, fg_from_uv, normalize_mode, uv_from_fg
from .nullspace import (DeflationSpace, analytic_nullspace,
                        generalized_nullvectors)
from .eigensolver import (Spectrum, dense_oracle_spectrum, deflated_pcg,
                          jacobi_eigh, solve_spectrum)
from .study import (analytic_modes, convergence_study, eigen_error_report,
                    perturbed_density, timing_benchmark)

__all__ = [
    "SpectralGrid", "ModelParams", "harmonic_potential",
    "FERROMAGNETIC", "ANTIFERROMAGNETIC",
    "density", "spin_vector", "mass", "magnetization", "energy",
    "apply_gpe_hamiltonian", "chemical_potentials",
    "GroundState", "solve_ground_state", "solve_sma",
    "BdGOperator", "ModePair", "fg_from_uv", "uv_from_fg", "normalize_mode",
    "DeflationSpace", "analytic_nullspace", "generalized_nullvectors",
    "Spectrum", "solve_spectrum", "dense_oracle_spectrum", "deflated_pcg",
    "jacobi_eigh",
    "analytic_modes", "eigen_error_report", "convergence_study",
    "perturbed_density", "timing_benchmark",
]

__version__ = "1.0.0"
