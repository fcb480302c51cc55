"""Verification studies: closed-form trap modes, error reports against
them, mesh-refinement tables, perturbed densities, and apply-cost
timings."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import ground as ground_mod
from . import model
from .bdg import BdGOperator, ModePair
from .eigensolver import Spectrum, solve_spectrum
from .grid import SpectralGrid
from .ground import GroundState
from .nullspace import analytic_nullspace, generalized_nullvectors


class MissingModeError(RuntimeError):
    """No computed frequency within 20% of a closed-form one."""


@dataclass
class ErrorEntry:
    omega: float
    multiplicity: int
    e_omega: float
    e_uv: float


@dataclass
class ErrorReport:
    h: float
    d: int
    phase: str
    entries: list = field(default_factory=list)


@dataclass
class TimingRecord:
    dof: int
    nev: int
    seconds: float
    operator_applies: int


def analytic_modes(ground: GroundState) -> list:
    """Closed-form excitations at the trap frequencies.

    For each axis a: omega = gamma_a and
    u = (gamma^-1/2 d_a Phi - gamma^1/2 x_a Phi)/sqrt(2),
    v = (gamma^-1/2 d_a Phi + gamma^1/2 x_a Phi)/sqrt(2).
    Only valid for a harmonic trap; the sampled potential is checked.
    """
    grid = ground.grid
    params = ground.params
    ref = model.harmonic_potential(grid, params.gamma)
    if np.max(np.abs(ref - ground.potential)) > 1e-10 * max(
            1.0, float(np.max(np.abs(ref)))):
        raise ValueError("closed-form modes require the harmonic trap")
    phi = ground.phi
    pairs = []
    for ax in range(grid.d):
        gam = params.gamma[ax]
        dphi = grid.partial(phi, ax)
        xphi = grid.coordinate(ax) * phi
        u = (dphi / np.sqrt(gam) - np.sqrt(gam) * xphi) / np.sqrt(2.0)
        v = (dphi / np.sqrt(gam) + np.sqrt(gam) * xphi) / np.sqrt(2.0)
        pairs.append(ModePair(omega=float(gam), u=u, v=v))
    return pairs


def _orthonormal_span(grid: SpectralGrid, vecs: list) -> list:
    out = []
    for vec in vecs:
        v = np.array(vec, copy=True)
        for _ in range(2):
            for b in out:
                v = v - grid.inner(v, b) * b
        nrm = grid.norm(v)
        if nrm > 1e-14:
            out.append(v / nrm)
    return out


def _span_error(grid: SpectralGrid, x: np.ndarray, basis: list) -> float:
    """Relative distance of x from span(basis) in the grid L2 norm."""
    proj = np.zeros_like(x)
    for b in basis:
        proj = proj + grid.inner(x, b) * b
    return grid.norm(x - proj) / grid.norm(x)


def eigen_error_report(spectrum: Spectrum, ground: GroundState,
                       cluster_rel: float = 1e-6) -> ErrorReport:
    """Frequency and amplitude errors against the closed-form trap modes.

    Closed-form frequencies are grouped into multiplicity clusters; each
    cluster is matched to the nearest computed frequencies within a 20%
    relative window.  The amplitude error projects onto the full
    analytic eigenspace, so it is invariant under rotations inside a
    degenerate cluster.
    """
    grid = ground.grid
    analytic = analytic_modes(ground)
    analytic.sort(key=lambda p: p.omega)

    clusters = []
    for pair in analytic:
        if clusters and abs(pair.omega - clusters[-1][0].omega) <= \
                cluster_rel * abs(pair.omega):
            clusters[-1].append(pair)
        else:
            clusters.append([pair])

    report = ErrorReport(h=grid.h, d=grid.d, phase=ground.params.phase)
    for group in clusters:
        omega_a = group[0].omega
        cands = [p for p in spectrum.pairs
                 if abs(p.omega - omega_a) <= 0.2 * abs(omega_a)]
        if not cands:
            raise MissingModeError(
                f"no computed frequency within 20% of {omega_a}")
        cands.sort(key=lambda p: abs(p.omega - omega_a))
        matched = cands[:len(group)]
        e_omega = max(abs(p.omega - omega_a) / abs(omega_a) for p in matched)
        u_span = _orthonormal_span(grid, [p.u for p in group])
        v_span = _orthonormal_span(grid, [p.v for p in group])
        e_uv = max(_span_error(grid, p.u, u_span)
                   + _span_error(grid, p.v, v_span) for p in matched)
        report.entries.append(ErrorEntry(
            omega=omega_a, multiplicity=len(group),
            e_omega=e_omega, e_uv=e_uv))
    return report


def run_pipeline(params: model.ModelParams, grid: SpectralGrid,
                 nev: int = 40, tol_ground: float = 1e-12,
                 tol_eig: float = 1e-10,
                 ground: GroundState | None = None) -> tuple:
    """Ground state, operator, deflation and spectrum in one call."""
    potential = model.harmonic_potential(grid, params.gamma)
    if ground is None:
        ground = ground_mod.solve_ground_state(params, potential, grid,
                                               tol=tol_ground)
    op = BdGOperator(ground)
    defl = analytic_nullspace(ground)
    defl = generalized_nullvectors(op, defl, tol=tol_eig)
    spectrum = solve_spectrum(op, defl, nev=nev, tol=tol_eig)
    return ground, op, defl, spectrum


def convergence_study(params: model.ModelParams, d: int, L: float,
                      sizes, nev: int = 10, tol_ground: float = 1e-12,
                      tol_eig: float = 1e-10,
                      csv_path: str | None = None) -> list:
    """Error reports over a sequence of mesh sizes, optionally as CSV."""
    reports = []
    for n in sizes:
        grid = SpectralGrid(d=d, L=L, N=int(n))
        ground, _, _, spectrum = run_pipeline(
            params, grid, nev=nev, tol_ground=tol_ground, tol_eig=tol_eig)
        reports.append(eigen_error_report(spectrum, ground))
    if csv_path is not None:
        write_error_csv(csv_path, reports)
    return reports


def write_error_csv(path: str, reports: list) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["h", "d", "phase", "omega", "multiplicity",
                         "e_omega", "e_uv"])
        for rep in reports:
            for entry in rep.entries:
                writer.writerow([
                    f"{rep.h:.17g}", rep.d, rep.phase,
                    f"{entry.omega:.17g}", entry.multiplicity,
                    f"{entry.e_omega:.17g}", f"{entry.e_uv:.17g}",
                ])


def perturbed_density(ground: GroundState, mode: ModePair, eps: float,
                      t: float) -> np.ndarray:
    """Density of the ground state perturbed by one oscillating mode,
    n_j = |phi_j + eps (u_j e^{-i omega t} + conj(v_j) e^{i omega t})|^2.
    """
    phase = np.exp(-1j * mode.omega * t)
    psi = ground.phi + eps * (mode.u * phase + np.conj(mode.v * phase))
    return np.abs(psi) ** 2


def timing_benchmark(params: model.ModelParams, d: int, L: float, sizes,
                     nev: int = 40, applies: int = 50) -> list:
    """Wall time of repeated operator applications per grid size.

    The operator is built around the projected Gaussian initializer;
    apply cost does not depend on the field values, so no ground-state
    solve is needed for the scaling measurement.
    """
    records = []
    for n in sizes:
        grid = SpectralGrid(d=d, L=L, N=int(n))
        potential = model.harmonic_potential(grid, params.gamma)
        phi = ground_mod.gaussian_initializer(grid, params)
        mu = model.chemical_potentials(grid, phi, params, potential)
        stub = GroundState(grid=grid, params=params, potential=potential,
                           phi=phi, mu=mu, energy=0.0, residual=np.inf,
                           converged=False, iterations=0)
        op = BdGOperator(stub)
        f = np.random.default_rng(0).standard_normal((3,) + grid.shape)
        op.apply_h_plus(f)  # warm the transform plans
        start = time.perf_counter()
        for _ in range(applies):
            op.apply_h_plus(f)
        elapsed = time.perf_counter() - start
        records.append(TimingRecord(dof=grid.dof_scalar, nev=nev,
                                    seconds=elapsed,
                                    operator_applies=applies))
    return records


def complexity_slope(records: list) -> float:
    """Least-squares slope of log(time) against log(DOF * log DOF)."""
    x = np.array([math.log(r.dof * math.log(r.dof)) for r in records])
    y = np.array([math.log(r.seconds / r.operator_applies)
                  for r in records])
    return float(np.polyfit(x, y, 1)[0])
