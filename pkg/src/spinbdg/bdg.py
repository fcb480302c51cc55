"""Matrix-free Bogoliubov-de Gennes operators around a real ground state.

For a real ground state the linearization reduces to the pair of
Hermitian operators H+ = A + B and H- = A - B, each a spectral kinetic
term plus a pointwise real symmetric 3x3 coefficient field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpectralGrid
from .ground import GroundState
from .model import K_Y, S_X, S_Z

EPS_NORM = 1e-10


class IndefiniteNormError(ValueError):
    """Mode has non-positive Bogoliubov norm; not an excitation vector."""


@dataclass
class ModePair:
    """One excitation (omega; u, v) with its block residuals."""

    omega: float
    u: np.ndarray
    v: np.ndarray
    residual: tuple | None = None

    @property
    def f(self) -> np.ndarray:
        return 0.5 * (self.u + self.v)

    @property
    def g(self) -> np.ndarray:
        return 0.5 * (self.u - self.v)


def fg_from_uv(u: np.ndarray, v: np.ndarray) -> tuple:
    """Change of variables f = (u+v)/2, g = (u-v)/2."""
    return 0.5 * (u + v), 0.5 * (u - v)


def uv_from_fg(f: np.ndarray, g: np.ndarray) -> tuple:
    """Inverse change of variables u = f+g, v = f-g."""
    return f + g, f - g


class BdGOperator:
    """Precomputed coefficient fields for H+ and H-, applied matrix-free.

    The kinetic part costs one FFT/iFFT pair per component; the rest is
    a pointwise 3x3 multiply. Immutable after construction apart from
    the apply counter.
    """

    def __init__(self, ground: GroundState):
        phi = ground.phi
        if np.iscomplexobj(phi):
            if np.max(np.abs(phi.imag)) > 1e-12:
                raise ValueError(
                    "BdG real reduction requires a real ground state"
                )
            phi = phi.real
        self.grid = ground.grid
        self.ground = ground
        params = ground.params
        grid = self.grid

        rho = np.sum(phi**2, axis=0)
        sxr = np.real(S_X)
        szr = np.real(S_Z)
        sx_phi = np.einsum("ij,j...->i...", sxr, phi)
        ky_phi = np.einsum("ij,j...->i...", K_Y, phi)
        sz_phi = np.einsum("ij,j...->i...", szr, phi)
        s_x = np.einsum("i...,i...->...", phi, sx_phi)
        s_z = np.einsum("i...,i...->...", phi, sz_phi)

        outer = np.einsum("i...,j...->ij...", phi, phi)
        outer_sx = np.einsum("i...,j...->ij...", sx_phi, sx_phi)
        outer_ky = np.einsum("i...,j...->ij...", ky_phi, ky_phi)
        outer_sz = np.einsum("i...,j...->ij...", sz_phi, sz_phi)

        eye = np.eye(3).reshape((3, 3) + (1,) * grid.d)
        # S_y contributions enter as +/- (K_Y phi)(K_Y phi)^T / 2 in A and B.
        spin_dot = (s_x[None, None] * sxr.reshape(eye.shape[:2] + (1,) * grid.d)
                    + s_z[None, None] * szr.reshape(eye.shape[:2] + (1,) * grid.d))
        coeff_a = (
            (ground.potential - 0.0)[None, None] * eye
            + params.beta_n * (rho[None, None] * eye + outer)
            + params.beta_s * (spin_dot + outer_sx + 0.5 * outer_ky + outer_sz)
        )
        for j in range(3):
            coeff_a[j, j] -= ground.mu[j]
        coeff_b = params.beta_n * outer + params.beta_s * (
            outer_sx - 0.5 * outer_ky + outer_sz
        )

        self.coeff_a = coeff_a
        self.coeff_b = coeff_b
        self._coeff_plus = coeff_a + coeff_b
        self._coeff_minus = coeff_a - coeff_b
        self.napply = 0

    @property
    def mean_diag_plus(self) -> float:
        """Mean diagonal of the pointwise H+ coefficient field."""
        return float(np.mean(np.einsum("ii...->i...", self._coeff_plus)))

    @property
    def mean_diag_minus(self) -> float:
        return float(np.mean(np.einsum("ii...->i...", self._coeff_minus)))

    def _apply(self, f: np.ndarray, coeff: np.ndarray) -> np.ndarray:
        self.grid._check(f)
        if f.shape[0] != 3:
            raise ValueError("expected a three-component spinor field")
        self.napply += 1
        out = -0.5 * self.grid.laplacian(f)
        out += np.einsum("ij...,j...->i...", coeff, f)
        return out

    def apply_h_plus(self, f: np.ndarray) -> np.ndarray:
        """(A + B) f."""
        return self._apply(f, self._coeff_plus)

    def apply_h_minus(self, g: np.ndarray) -> np.ndarray:
        """(A - B) g."""
        return self._apply(g, self._coeff_minus)


def bogoliubov_norm(grid: SpectralGrid, u: np.ndarray, v: np.ndarray) -> float:
    """Indefinite norm integral int(|u|^2 - |v|^2)."""
    return float((grid.inner(u, u) - grid.inner(v, v)).real)


def normalize_mode(grid: SpectralGrid, pair: ModePair) -> ModePair:
    """Scale (u, v) so that int(|u|^2 - |v|^2) = 1."""
    s = bogoliubov_norm(grid, pair.u, pair.v)
    if s <= EPS_NORM:
        raise IndefiniteNormError(
            f"mode norm {s:.3e} is not positive; not an excitation"
        )
    scale = 1.0 / np.sqrt(s)
    return ModePair(omega=pair.omega, u=scale * pair.u, v=scale * pair.v,
                    residual=pair.residual)


def mode_residual(op: BdGOperator, pair: ModePair) -> tuple:
    """Block residuals (||H+ f - omega g||, ||H- g - omega f||)."""
    f, g = fg_from_uv(pair.u, pair.v)
    grid = op.grid
    r_plus = grid.norm(op.apply_h_plus(f) - pair.omega * g)
    r_minus = grid.norm(op.apply_h_minus(g) - pair.omega * f)
    return (r_plus, r_minus)
