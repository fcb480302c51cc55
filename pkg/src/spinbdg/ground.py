"""Constrained ground-state solver: projected semi-implicit gradient flow,
plus the single-mode-approximation scalar solver for the ferromagnetic
phase."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpectralGrid
from . import model
from .model import ModelParams


class ConstraintInfeasibleError(ValueError):
    """Requested (mass, magnetization) cannot be met by rescaling."""


class DivergenceError(RuntimeError):
    """Gradient-flow iterate became non-finite; retry with a smaller step."""


@dataclass(frozen=True)
class GroundState:
    """Converged real ground state with its chemical potentials."""

    grid: SpectralGrid
    params: ModelParams
    potential: np.ndarray
    phi: np.ndarray
    mu: tuple
    energy: float
    residual: float
    converged: bool
    iterations: int


def project_constraints(grid: SpectralGrid, psi: np.ndarray,
                        M: float) -> np.ndarray:
    """Rescale components to unit mass and magnetization M.

    The scalings (a_1, a_0, a_-1) satisfy a_0 = sqrt(a_1 * a_-1); the
    constraint system reduces to one quadratic in u = a_1 * a_-1.
    """
    n1 = grid.inner(psi[0], psi[0]).real
    n0 = grid.inner(psi[1], psi[1]).real
    nm = grid.inner(psi[2], psi[2]).real
    if n1 + nm <= 0.0:
        raise ConstraintInfeasibleError(
            "psi_1 and psi_-1 both vanish; magnetization cannot be set"
        )
    if (M > 0 and n1 == 0.0) or (M < 0 and nm == 0.0):
        raise ConstraintInfeasibleError(
            f"component carrying magnetization M={M} vanishes"
        )

    tiny = 1e-30
    if n0 < tiny * (n1 + nm):
        u = 0.0
    else:
        # (4 n1 nm - n0^2) u^2 + 2 n0 u - (1 - M^2) = 0.  The leading
        # coefficient cancels to rounding noise whenever the component
        # norms sit on the single-mode ray, so the roots are computed
        # with the cancellation-free formula q/a, c/q.
        a = 4.0 * n1 * nm - n0**2
        b = 2.0 * n0
        c = -(1.0 - M**2)
        disc = b**2 - 4.0 * a * c
        if disc < 0.0:
            if disc < -1e-12 * b**2:
                raise ConstraintInfeasibleError("no real scaling solution")
            disc = 0.0
        qq = -0.5 * (b + np.copysign(np.sqrt(disc), b))
        roots = []
        if qq != 0.0:
            roots.append(c / qq)
        if a != 0.0:
            roots.append(qq / a)
        cands = [u for u in roots if u >= 0.0 and 1.0 - u * n0 > abs(M)]
        if not cands:
            raise ConstraintInfeasibleError(
                "constraint equations have no feasible root"
            )
        u = min(cands)

    p = (1.0 + M - u * n0) / (2.0 * n1) if n1 > 0 else 0.0
    q = (1.0 - M - u * n0) / (2.0 * nm) if nm > 0 else 0.0
    if (n1 > 0 and p <= 0.0) or (nm > 0 and q <= 0.0):
        raise ConstraintInfeasibleError("negative component scaling")
    a1 = np.sqrt(p)
    am = np.sqrt(q)
    a0 = np.sqrt(a1 * am)
    return np.stack([a1 * psi[0], a0 * psi[1], am * psi[2]])


def _default_shift(params: ModelParams, potential: np.ndarray,
                   psi: np.ndarray) -> float:
    return float(np.max(potential) + params.beta_n * np.max(model.density(psi)))


def _lagrange_multipliers(grid: SpectralGrid, psi: np.ndarray,
                          mu: tuple) -> np.ndarray:
    """Fit the two-multiplier structure mu_j = lambda + j eta.

    The constrained problem has exactly two multipliers (mass and
    magnetization), so the per-component Rayleigh quotients are fitted
    in a norm-weighted least-squares sense; using three independent
    quotients instead admits spurious flow fixed points.
    """
    idx = np.array([1.0, 0.0, -1.0])
    weights = np.array([grid.inner(psi[j], psi[j]).real for j in range(3)])
    valid = ~np.isnan(np.asarray(mu))
    w = np.where(valid, weights, 0.0)
    muv = np.where(valid, np.asarray(mu, dtype=float), 0.0)
    a11 = np.sum(w)
    a12 = np.sum(w * idx)
    a22 = np.sum(w * idx**2)
    b1 = np.sum(w * muv)
    b2 = np.sum(w * idx * muv)
    det = a11 * a22 - a12 * a12
    if det <= 1e-14 * max(a11 * a22, 1e-300):
        lam, eta = (b1 / a11 if a11 > 0 else 0.0), 0.0
    else:
        lam = (a22 * b1 - a12 * b2) / det
        eta = (a11 * b2 - a12 * b1) / det
    return lam + idx * eta


def gradient_flow_step(grid: SpectralGrid, psi: np.ndarray, tau: float,
                       params: ModelParams, potential: np.ndarray,
                       shift: float | None = None) -> np.ndarray:
    """One semi-implicit backward-Euler step followed by the constraint
    projection.

    The explicit part carries the current Rayleigh-quotient multipliers,
    so any exact constrained stationary state is a fixed point for every
    step size.
    """
    if shift is None:
        shift = _default_shift(params, potential, psi)
    rho = model.density(psi)
    pointwise = (potential + params.beta_n * rho) * psi \
        + params.beta_s * model._spin_exchange(psi)
    if np.isrealobj(psi):
        pointwise = pointwise.real
    hpsi = -0.5 * grid.laplacian(psi) + pointwise
    mu = model.chemical_potentials(grid, psi, params, potential, hpsi=hpsi)
    lam = _lagrange_multipliers(grid, psi, mu).reshape((3,) + (1,) * grid.d)
    rhs = psi + tau * (shift * psi - pointwise + lam * psi)
    symbol = 1.0 / (1.0 + tau * (0.5 * grid.mu_squared + shift))
    star = grid._multiply_symbol(rhs, symbol)
    if not np.all(np.isfinite(star)):
        raise DivergenceError(
            f"gradient flow diverged at tau={tau}; reduce the step size"
        )
    return project_constraints(grid, star, params.M)


def gaussian_initializer(grid: SpectralGrid, params: ModelParams) -> np.ndarray:
    """Deterministic constrained Gaussian starting guess.

    The middle-component amplitude is phase dependent: for beta_s > 0 a
    nonzero psi_0 puts the symmetric start on the stable manifold of a
    saddle (the flow preserves psi_0 = 0 exactly once it holds), so the
    antiferromagnetic guess starts with psi_0 = 0.
    """
    M = params.M
    env = np.ones(grid.shape)
    for ax in range(grid.d):
        env = env * np.exp(-0.5 * params.gamma[ax] * grid.coordinate(ax) ** 2)
    mid = 0.0 if params.beta_s > 0 else 1.0
    amps = np.array([np.sqrt((1.0 + M) / 2.0), mid,
                     np.sqrt((1.0 - M) / 2.0)])
    psi = amps.reshape((3,) + (1,) * grid.d) * env
    return project_constraints(grid, psi, M)


def _euler_lagrange_residual(grid, psi, params, potential) -> float:
    hpsi = model.apply_gpe_hamiltonian(grid, psi, params, potential)
    mu = model.chemical_potentials(grid, psi, params, potential, hpsi=hpsi)
    lam = np.array(mu).reshape((3,) + (1,) * grid.d)
    return grid.norm(hpsi - lam * psi)


def solve_ground_state(params: ModelParams, potential: np.ndarray,
                       grid: SpectralGrid, tol: float = 1e-12,
                       max_iter: int = 200_000, tau: float = 0.01,
                       psi0: np.ndarray | None = None) -> GroundState:
    """Minimize the constrained energy by projected gradient flow.

    Convergence is declared when the max node-wise update per unit step
    drops below ``tol``; the Euler-Lagrange residual is evaluated at exit.
    """
    psi = gaussian_initializer(grid, params) if psi0 is None else \
        project_constraints(grid, np.asarray(psi0, dtype=float), params.M)
    shift = _default_shift(params, potential, psi)
    last_energy = model.energy(grid, psi, params, potential)
    bad_steps = 0
    converged = False
    it = 0
    prev2 = None
    for it in range(1, max_iter + 1):
        if it % 50 == 0:
            shift = _default_shift(params, potential, psi)
        new = gradient_flow_step(grid, psi, tau, params, potential, shift)
        update = float(np.max(np.abs(new - psi))) / tau
        if prev2 is not None and np.array_equal(new, prev2) \
                and np.max(np.abs(new - psi)) <= 1e-10 * np.max(np.abs(new)):
            # Bit-exact period-2 rounding cycle: the flow is at its
            # machine-precision floor and cannot contract further.
            psi = new
            converged = True
            break
        prev2 = psi
        e = model.energy(grid, new, params, potential)
        if e > last_energy + 1e-12 * max(1.0, abs(last_energy)):
            bad_steps += 1
            if bad_steps >= 5:
                tau *= 0.5
                bad_steps = 0
        else:
            bad_steps = 0
        psi, last_energy = new, e
        if update <= tol:
            converged = True
            break

    hpsi = model.apply_gpe_hamiltonian(grid, psi, params, potential)
    mu = model.chemical_potentials(grid, psi, params, potential, hpsi=hpsi)
    lam = np.array(mu).reshape((3,) + (1,) * grid.d)
    residual = grid.norm(hpsi - lam * psi)
    return GroundState(grid=grid, params=params, potential=potential,
                       phi=psi, mu=tuple(mu), energy=last_energy,
                       residual=residual, converged=converged, iterations=it)


def solve_sma(params: ModelParams, potential: np.ndarray, grid: SpectralGrid,
              tol: float = 1e-12, max_iter: int = 200_000,
              tau: float = 0.01) -> np.ndarray:
    """Positive normalized scalar profile of the single-mode approximation.

    Minimizes the scalar energy with effective interaction
    beta_n + beta_s; only valid in the ferromagnetic regime.
    """
    if params.beta_s >= 0 and not (params.beta_s == 0 and params.beta_n == 0):
        raise ValueError("single-mode approximation requires beta_s < 0")
    if params.beta_n + params.beta_s < 0:
        raise ValueError("need beta_n + beta_s >= 0 for a bounded minimizer")
    beta = params.beta_n + params.beta_s

    env = np.ones(grid.shape)
    for ax in range(grid.d):
        env = env * np.exp(-0.5 * params.gamma[ax] * grid.coordinate(ax) ** 2)
    if beta > 0:
        # Blend in the flat-top strong-interaction envelope; a narrow
        # Gaussian start overshoots for large beta and the flow can lock
        # into a sign-changing stationary state.
        lo, hi = 0.0, float(np.max(potential)) + beta
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            mass_tf = grid.h**grid.d * np.sum(
                np.clip(mid - potential, 0.0, None)) / beta
            if mass_tf < 1.0:
                lo = mid
            else:
                hi = mid
        env = env + np.sqrt(np.clip(0.5 * (lo + hi) - potential, 0.0, None)
                            / beta)
    phi = env / grid.norm(env)
    shift = float(np.max(potential) + beta * np.max(phi**2))
    for it in range(1, max_iter + 1):
        if it % 50 == 0:
            shift = float(np.max(potential) + beta * np.max(phi**2))
        hphi = -0.5 * grid.laplacian(phi) + (potential + beta * phi**2) * phi
        mu = grid.inner(hphi, phi).real
        rhs = phi + tau * (shift * phi - (potential + beta * phi**2) * phi
                           + mu * phi)
        symbol = 1.0 / (1.0 + tau * (0.5 * grid.mu_squared + shift))
        star = grid._multiply_symbol(rhs, symbol)
        if not np.all(np.isfinite(star)):
            raise DivergenceError(f"SMA flow diverged at tau={tau}")
        star = star / grid.norm(star)
        update = float(np.max(np.abs(star - phi))) / tau
        phi = star
        if update <= tol:
            break
    if float(np.sum(phi)) < 0:
        phi = -phi
    return phi
