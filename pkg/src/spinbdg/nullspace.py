"""Analytic nullspaces of H- and H+ for both magnetic phases, the
generalized nullvectors, and the deflation projector the eigensolver
uses to keep iterates away from the zero modes.

The product K = H- H+ has a nontrivial generalized nullspace.  In the
ferromagnetic phase it is spanned by Phi_2 (a nullvector of H+) and the
generalized vector Phihat_1 with H+ Phihat_1 = Phi_1; in the
antiferromagnetic phase by Phihat_j = H+^{-1} Phi_j, j = 1, 2.  These
directions are not L2-orthogonal to their complement, so the projector
removing them is oblique: it zeroes the dual pairings with Phi_1, Phi_2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bdg import BdGOperator
from .grid import SpectralGrid
from .ground import GroundState
from . import model

MAX_ABS_MAGNETIZATION = 0.999


@dataclass
class DeflationSpace:
    """Nullspace bases and the oblique deflation data built from them.

    ``defl_directions``, ``defl_duals`` and ``defl_gram`` describe the
    projector P x = x - sum_i alpha_i D_i with G^T alpha = <x, M_k>,
    which removes the generalized-nullspace components of K = H- H+.
    They are filled by :func:`generalized_nullvectors`.
    """

    phase: str
    degenerate: bool
    null_minus: list
    null_plus: list
    gen_vectors: list = field(default_factory=list)
    defl_directions: list = field(default_factory=list)
    defl_duals: list = field(default_factory=list)
    defl_gram: np.ndarray | None = None


def project_out(grid: SpectralGrid, x: np.ndarray, basis) -> np.ndarray:
    """L2-orthogonal complement projection against an orthonormal basis."""
    for _ in range(2):
        for b in basis:
            x = x - grid.inner(x, b) * b
    return x


def oblique_project(grid: SpectralGrid, x: np.ndarray,
                    space: DeflationSpace) -> np.ndarray:
    """Remove the generalized-nullspace directions of K = H- H+ from x.

    After projection <x, m> = 0 for every dual vector m; for exact
    eigenvectors these pairings vanish already.
    """
    if not space.defl_directions:
        return x
    for _ in range(2):
        r = np.array([grid.inner(x, m).real for m in space.defl_duals])
        alpha = np.linalg.solve(space.defl_gram.T, r)
        for a, dvec in zip(alpha, space.defl_directions):
            x = x - a * dvec
    return x


def _sma_profile(ground: GroundState, amps: np.ndarray) -> np.ndarray:
    """Least-squares collapse of the spinor onto the ray amps * phi."""
    phi = np.einsum("j,j...->...", amps, ground.phi) / float(amps @ amps)
    nrm = ground.grid.norm(phi)
    if nrm <= 0:
        raise ValueError("ground state has no component along the SMA ray")
    phi = phi / nrm
    if float(np.sum(phi)) < 0:
        phi = -phi
    return phi


def analytic_nullspace(ground: GroundState) -> DeflationSpace:
    """Closed-form bases of null(H-) and null(H+) for the ground state.

    The generalized vectors are left unfilled; see
    :func:`generalized_nullvectors`.
    """
    params = ground.params
    M = params.M
    if abs(M) > MAX_ABS_MAGNETIZATION:
        raise ValueError(
            f"nullspace coefficients blow up for |M| > "
            f"{MAX_ABS_MAGNETIZATION}, got M={M}"
        )
    grid = ground.grid

    if params.beta_n == 0.0 and params.beta_s == 0.0:
        # Noninteracting case: H+ = H- decouple per component and each
        # component direction above the scalar profile is a zero mode.
        amps = np.array([np.sqrt((1.0 + M) / 2.0), 1.0,
                         np.sqrt((1.0 - M) / 2.0)])
        amps = amps / np.linalg.norm(amps)
        phi = _sma_profile(ground, amps)
        basis = []
        for j in range(3):
            vec = np.zeros((3,) + grid.shape)
            vec[j] = phi
            basis.append(vec)
        return DeflationSpace(phase=params.phase, degenerate=True,
                              null_minus=basis, null_plus=list(basis))

    if params.phase == model.FERROMAGNETIC:
        a = np.array([(1.0 + M) / 2.0, np.sqrt((1.0 - M**2) / 2.0),
                      (1.0 - M) / 2.0])
        b = np.array([np.sqrt((1.0 - M**2) / 2.0), -M,
                      -np.sqrt((1.0 - M**2) / 2.0)])
        phi = _sma_profile(ground, a)
        phi1 = a.reshape((3,) + (1,) * grid.d) * phi
        phi2 = b.reshape((3,) + (1,) * grid.d) * phi
        return DeflationSpace(phase=params.phase, degenerate=False,
                              null_minus=[phi1, phi2], null_plus=[phi2])

    # Antiferromagnetic: null(H+) is empty (H+ invertible), null(H-) is
    # the ground state itself plus one sign-twisted companion.
    b1 = -np.sqrt((1.0 - M) / (1.0 + M))
    bm = np.sqrt((1.0 + M) / (1.0 - M))
    phi1 = np.array(ground.phi, dtype=float, copy=True)
    phi1 = phi1 / grid.norm(phi1)
    phi2 = np.zeros_like(phi1)
    phi2[0] = b1 * ground.phi[0]
    phi2[2] = bm * ground.phi[2]
    phi2 = phi2 - grid.inner(phi2, phi1).real * phi1
    phi2 = phi2 / grid.norm(phi2)
    return DeflationSpace(phase=params.phase, degenerate=False,
                          null_minus=[phi1, phi2], null_plus=[])


def generalized_nullvectors(op: BdGOperator, space: DeflationSpace,
                            tol: float = 1e-10) -> DeflationSpace:
    """Solve H+ Phihat_j = Phi_j and assemble the oblique projector data.

    The degenerate noninteracting case has no generalized vectors; the
    projector reduces to the L2-orthogonal one.
    """
    from .eigensolver import deflated_pcg

    grid = op.grid
    if space.degenerate:
        space.gen_vectors = []
        space.defl_directions = list(space.null_minus)
        space.defl_duals = list(space.null_minus)
        space.defl_gram = np.eye(len(space.null_minus))
        return space

    if space.phase == model.FERROMAGNETIC:
        phi1, phi2 = space.null_minus
        # Phihat_1's component along null(H+) = span{Phi_2} is fixed to
        # zero by the deflated solve.
        phihat1 = deflated_pcg(grid, op.apply_h_plus, phi1,
                               defl=[phi2], precond_shift=op.mean_diag_plus,
                               tol=tol)
        space.gen_vectors = [phihat1]
        space.defl_directions = [phi2, phihat1]
        space.defl_duals = [phi2, phi1]
    else:
        phi1, phi2 = space.null_minus
        hats = [deflated_pcg(grid, op.apply_h_plus, p, defl=[],
                             precond_shift=op.mean_diag_plus, tol=tol)
                for p in (phi1, phi2)]
        space.gen_vectors = list(hats)
        space.defl_directions = list(hats)
        space.defl_duals = [phi1, phi2]

    gram = np.empty((len(space.defl_directions), len(space.defl_duals)))
    for i, dvec in enumerate(space.defl_directions):
        for k, m in enumerate(space.defl_duals):
            gram[i, k] = grid.inner(dvec, m).real
    space.defl_gram = gram
    return space
