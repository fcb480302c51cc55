"""Periodic tensor-product Fourier grid and FFT-based operators.

All fields live on a uniform grid over [-L, L]^d with an even number of
points N per axis.  Scalar fields are plain numpy arrays of shape
``grid.shape``; spinor fields carry a leading component axis, e.g.
``(3,) + grid.shape``.  Every operator here acts on the trailing ``d``
axes, so the same functions work for scalars, spinors, and stacked
blocks of either.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid on [-L, L]^d with plane-wave wavenumbers.

    Parameters
    ----------
    d : int
        Spatial dimension, 1, 2 or 3.
    L : float
        Half-width of the domain per axis.
    N : int
        Grid points per axis; must be even and >= 4.
    """

    d: int
    L: float
    N: int
    h: float = field(init=False)

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.L <= 0:
            raise ValueError(f"half-width L must be positive, got {self.L}")
        if self.N < 4 or self.N % 2 != 0:
            raise ValueError(f"N must be even and >= 4, got {self.N}")
        object.__setattr__(self, "h", 2.0 * self.L / self.N)

        # 1D nodes and wavenumbers mu_k = pi*k/L in FFT ordering.
        x1 = -self.L + self.h * np.arange(self.N)
        mu1 = (np.pi / self.L) * (np.fft.fftfreq(self.N) * self.N)
        object.__setattr__(self, "_x1", x1)
        object.__setattr__(self, "_mu1", mu1)

        # |mu|^2 summed over axes, broadcast to the full grid shape.
        mu2 = np.zeros(self.shape)
        for ax in range(self.d):
            mu2 = mu2 + self._axis_view(mu1, ax) ** 2
        object.__setattr__(self, "mu_squared", mu2)

        # First-derivative multipliers, Nyquist mode zeroed per axis so
        # derivatives of real fields stay real.
        dmu = mu1.copy()
        dmu[self.N // 2] = 0.0
        derivs = tuple(1j * self._axis_view(dmu, ax) for ax in range(self.d))
        object.__setattr__(self, "_deriv_mults", derivs)

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def dof_scalar(self) -> int:
        return self.N**self.d

    @property
    def nodes1d(self) -> np.ndarray:
        """1D node array, shared by every axis."""
        return self._x1

    @property
    def wavenumbers1d(self) -> np.ndarray:
        """1D wavenumbers pi*k/L in FFT ordering, shared by every axis."""
        return self._mu1

    def _axis_view(self, arr1d: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * self.d
        shape[axis] = self.N
        return arr1d.reshape(shape)

    def coordinate(self, axis: int) -> np.ndarray:
        """Full-shape array of the node coordinate along ``axis``."""
        if not 0 <= axis < self.d:
            raise ValueError(f"axis {axis} out of range for d={self.d}")
        return np.broadcast_to(self._axis_view(self._x1, axis), self.shape)

    def _spatial_axes(self) -> tuple:
        return tuple(range(-self.d, 0))

    def _check(self, f: np.ndarray) -> None:
        if f.shape[-self.d:] != self.shape:
            raise ValueError(
                f"field shape {f.shape} does not match grid shape {self.shape}"
            )

    def forward(self, f: np.ndarray) -> np.ndarray:
        """Discrete Fourier coefficients with 1/N normalization per axis."""
        self._check(f)
        return scipy.fft.fftn(f, axes=self._spatial_axes()) / self.dof_scalar

    def inverse(self, c: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`forward`; returns node values."""
        self._check(c)
        return scipy.fft.ifftn(c, axes=self._spatial_axes()) * self.dof_scalar

    def _multiply_symbol(self, f: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        self._check(f)
        axes = self._spatial_axes()
        if np.isrealobj(f) and np.isrealobj(symbol):
            # Real fields take the half-spectrum transform; the symbol is
            # even in k, so its positive-frequency slice suffices.
            c = scipy.fft.rfftn(f, axes=axes)
            half = symbol[..., : self.N // 2 + 1]
            return scipy.fft.irfftn(half * c, axes=axes, s=self.shape)
        c = scipy.fft.fftn(f, axes=axes)
        return scipy.fft.ifftn(symbol * c, axes=axes)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Spectral Laplacian; the Nyquist mode keeps its full symbol."""
        return self._multiply_symbol(f, -self.mu_squared)

    def partial(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Spectral first derivative along ``axis`` (Nyquist mode zeroed)."""
        if not 0 <= axis < self.d:
            raise ValueError(f"axis {axis} out of range for d={self.d}")
        self._check(f)
        axes = self._spatial_axes()
        c = scipy.fft.fftn(f, axes=axes)
        out = scipy.fft.ifftn(self._deriv_mults[axis] * c, axes=axes)
        if np.isrealobj(f):
            return out.real
        return out

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Rectangle-rule inner product h^d * sum f * conj(g).

        Leading (component) axes are summed over as well, so spinor
        fields get the natural three-component pairing.
        """
        self._check(f)
        self._check(g)
        if f.shape != g.shape:
            raise ValueError(f"shape mismatch {f.shape} vs {g.shape}")
        return self.h**self.d * np.vdot(g, f)

    def norm(self, f: np.ndarray) -> float:
        """L2 norm under :meth:`inner`."""
        return float(np.sqrt(self.inner(f, f).real))
