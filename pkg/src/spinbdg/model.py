"""Spin-1 condensate model: spin algebra, densities, conserved quantities,
energy functional and the coupled Gross-Pitaevskii Hamiltonian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpectralGrid

_SQ2 = np.sqrt(2.0)

# Spin-1 matrices; S_y = (i/sqrt(2)) * K_Y with K_Y real.
S_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQ2
K_Y = np.array([[0, -1, 0], [1, 0, -1], [0, 1, 0]], dtype=float)
S_Y = (1j / _SQ2) * K_Y
S_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)
SPIN_MATRICES = (S_X, S_Y, S_Z)

FERROMAGNETIC = "ferromagnetic"
ANTIFERROMAGNETIC = "antiferromagnetic"


@dataclass(frozen=True)
class ModelParams:
    """Interaction strengths, trap frequencies and target magnetization.

    ``beta_s < 0`` is the ferromagnetic phase, ``beta_s > 0`` the
    antiferromagnetic one.
    """

    beta_n: float
    beta_s: float
    gamma: tuple
    M: float = 0.0

    def __post_init__(self) -> None:
        gamma = tuple(float(g) for g in np.atleast_1d(self.gamma))
        object.__setattr__(self, "gamma", gamma)
        if any(g <= 0 for g in gamma):
            raise ValueError(f"trap frequencies must be positive, got {gamma}")
        if not -1.0 < self.M < 1.0:
            raise ValueError(f"magnetization must lie in (-1, 1), got {self.M}")

    @property
    def phase(self) -> str:
        return ANTIFERROMAGNETIC if self.beta_s > 0 else FERROMAGNETIC


def harmonic_potential(grid: SpectralGrid, gamma) -> np.ndarray:
    """Trap potential (1/2) * sum_a gamma_a^2 * x_a^2 sampled at the nodes."""
    gamma = np.atleast_1d(gamma)
    if gamma.size != grid.d:
        raise ValueError(
            f"need {grid.d} trap frequencies, got {gamma.size}"
        )
    v = np.zeros(grid.shape)
    for ax in range(grid.d):
        v = v + 0.5 * gamma[ax] ** 2 * grid.coordinate(ax) ** 2
    return v


def density(psi: np.ndarray) -> np.ndarray:
    """Total density rho = sum_j |psi_j|^2."""
    return np.sum(np.abs(psi) ** 2, axis=0)


def spin_vector(psi: np.ndarray) -> tuple:
    """Pointwise spin vector (s_x, s_y, s_z) = Psi^H S_a Psi, real fields."""
    out = []
    for s in SPIN_MATRICES:
        w = np.einsum("ij,j...->i...", s, psi)
        out.append(np.einsum("i...,i...->...", np.conj(psi), w).real)
    return tuple(out)


def mass(grid: SpectralGrid, psi: np.ndarray) -> float:
    return float(grid.inner(density(psi), np.ones(grid.shape)).real)


def magnetization(grid: SpectralGrid, psi: np.ndarray) -> float:
    sz = np.abs(psi[0]) ** 2 - np.abs(psi[2]) ** 2
    return float(grid.inner(sz, np.ones(grid.shape)).real)


def energy(grid: SpectralGrid, psi: np.ndarray, params: ModelParams,
           potential: np.ndarray) -> float:
    """Gross-Pitaevskii energy with kinetic, trap, density and spin terms."""
    kinetic = -0.5 * grid.inner(grid.laplacian(psi), psi).real
    rho = density(psi)
    sx, sy, sz = spin_vector(psi)
    pointwise = (
        potential * rho
        + 0.5 * params.beta_n * rho**2
        + 0.5 * params.beta_s * (sx**2 + sy**2 + sz**2)
    )
    return float(kinetic + grid.h**grid.d * np.sum(pointwise))


def _spin_exchange(psi: np.ndarray) -> np.ndarray:
    """(S . s(Psi)) Psi evaluated pointwise."""
    out = np.zeros_like(psi, dtype=complex)
    for s in SPIN_MATRICES:
        w = np.einsum("ij,j...->i...", s, psi)
        sa = np.einsum("i...,i...->...", np.conj(psi), w).real
        out += sa * w
    return out


def apply_gpe_hamiltonian(grid: SpectralGrid, psi: np.ndarray,
                          params: ModelParams,
                          potential: np.ndarray) -> np.ndarray:
    """Right-hand side of the Euler-Lagrange equations,
    H Psi = (-Laplacian/2 + V + beta_n rho) Psi + beta_s (S . s) Psi."""
    rho = density(psi)
    out = -0.5 * grid.laplacian(psi) + (potential + params.beta_n * rho) * psi
    out = out + params.beta_s * _spin_exchange(psi)
    if np.isrealobj(psi):
        return out.real
    return out


EPS_ZERO = 1e-12  # squared-norm threshold for a vanishing component


def chemical_potentials(grid: SpectralGrid, psi: np.ndarray,
                        params: ModelParams, potential: np.ndarray,
                        hpsi: np.ndarray | None = None) -> tuple:
    """Per-component Rayleigh quotients mu_j = <H_j psi_j, psi_j>/||psi_j||^2.

    A component with squared norm below ``EPS_ZERO`` gets its value from
    the relation mu_1 + mu_-1 = 2 mu_0 when the other two are defined,
    and NaN otherwise (flagged undefined).
    """
    if hpsi is None:
        hpsi = apply_gpe_hamiltonian(grid, psi, params, potential)
    mu = np.full(3, np.nan)
    for j in range(3):
        nrm2 = grid.inner(psi[j], psi[j]).real
        if nrm2 >= EPS_ZERO:
            mu[j] = grid.inner(hpsi[j], psi[j]).real / nrm2
    if np.isnan(mu[1]) and not np.isnan(mu[0]) and not np.isnan(mu[2]):
        mu[1] = 0.5 * (mu[0] + mu[2])
    if np.isnan(mu[0]) and not np.isnan(mu[1]) and not np.isnan(mu[2]):
        mu[0] = 2.0 * mu[1] - mu[2]
    if np.isnan(mu[2]) and not np.isnan(mu[1]) and not np.isnan(mu[0]):
        mu[2] = 2.0 * mu[1] - mu[0]
    return tuple(mu)
