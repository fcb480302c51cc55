"""Command-line front end: ground-state runs, spectrum runs, the
verification suite, convergence tables, perturbed densities and the
apply-cost benchmark."""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np
import scipy.fft

from . import bdg as bdg_mod
from . import io as io_mod
from . import model, study
from .eigensolver import dense_oracle_spectrum, solve_spectrum
from .grid import SpectralGrid
from .ground import solve_ground_state
from .nullspace import analytic_nullspace, generalized_nullvectors

COMMANDS = ("ground", "bdg", "verify", "convergence", "perturb", "bench")


def _model_params(cfg: io_mod.RunConfig) -> model.ModelParams:
    if cfg.beta_n is None or cfg.beta_s is None:
        raise io_mod.ConfigError(
            "beta_n and beta_s must be set (phase undetermined)")
    return model.ModelParams(beta_n=cfg.beta_n, beta_s=cfg.beta_s,
                             gamma=cfg.gamma, M=cfg.M)


def _load_or_solve_ground(cfg: io_mod.RunConfig, params, grid, potential):
    if cfg.ground and os.path.exists(cfg.ground):
        stored_grid, phi = io_mod.read_field(cfg.ground)
        if stored_grid != grid:
            raise io_mod.FieldFormatError(
                f"{cfg.ground}: stored grid {stored_grid} does not match "
                f"configured grid {grid}")
        phi = np.real_if_close(phi)
        mu = model.chemical_potentials(grid, phi, params, potential)
        from .ground import GroundState
        hpsi = model.apply_gpe_hamiltonian(grid, phi, params, potential)
        lam = np.array(mu).reshape((3,) + (1,) * grid.d)
        residual = grid.norm(hpsi - lam * phi)
        return GroundState(grid=grid, params=params, potential=potential,
                           phi=phi, mu=mu,
                           energy=model.energy(grid, phi, params, potential),
                           residual=residual, converged=True, iterations=0)
    return solve_ground_state(params, potential, grid, tol=cfg.tol_ground)


def _cmd_ground(cfg: io_mod.RunConfig) -> int:
    params = _model_params(cfg)
    grid = SpectralGrid(d=cfg.d, L=cfg.L, N=cfg.N)
    potential = model.harmonic_potential(grid, params.gamma)
    gs = solve_ground_state(params, potential, grid, tol=cfg.tol_ground)
    path = os.path.join(cfg.out, "ground.spn1")
    io_mod.write_field(path, grid, gs.phi)
    print(f"ground state written to {path}")
    print(f"energy = {gs.energy:.17g}")
    print(f"mu = ({gs.mu[0]:.17g}, {gs.mu[1]:.17g}, {gs.mu[2]:.17g})")
    print(f"residual = {gs.residual:.3e} after {gs.iterations} iterations")
    return 0 if gs.converged else 1


def _spectrum_run(cfg: io_mod.RunConfig):
    params = _model_params(cfg)
    grid = SpectralGrid(d=cfg.d, L=cfg.L, N=cfg.N)
    potential = model.harmonic_potential(grid, params.gamma)
    gs = _load_or_solve_ground(cfg, params, grid, potential)
    op = bdg_mod.BdGOperator(gs)
    defl = analytic_nullspace(gs)
    defl = generalized_nullvectors(op, defl, tol=cfg.tol_eig)
    spectrum = solve_spectrum(op, defl, nev=cfg.nev, tol=cfg.tol_eig)
    return grid, gs, op, defl, spectrum


def _cmd_bdg(cfg: io_mod.RunConfig) -> int:
    grid, _, _, _, spectrum = _spectrum_run(cfg)
    path = os.path.join(cfg.out, "spectrum.csv")
    io_mod.write_spectrum_csv(path, grid, spectrum)
    print(f"{len(spectrum.pairs)} modes written to {path} "
          f"({spectrum.iterations} outer iterations, "
          f"{spectrum.operator_applies} operator applies, "
          f"{spectrum.wall_time:.2f} s)")
    return 0


def _cmd_verify(cfg: io_mod.RunConfig) -> int:
    checks = []

    def check(name, value, bound):
        ok = value <= bound
        checks.append(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} "
              f"(bound {bound:.1e})")

    grid, gs, op, defl, spectrum = _spectrum_run(cfg)
    check("mass error", abs(model.mass(grid, gs.phi) - 1.0), 1e-12)
    check("magnetization error",
          abs(model.magnetization(grid, gs.phi) - cfg.M), 1e-12)
    check("chemical potential relation",
          abs(gs.mu[0] + gs.mu[2] - 2.0 * gs.mu[1]), 1e-8)
    bound_null = max(1e-8, 100.0 * gs.residual)
    for i, b in enumerate(defl.null_minus):
        check(f"null(H-) vector {i} residual",
              grid.norm(op.apply_h_minus(b)), bound_null)
    for i, b in enumerate(defl.null_plus):
        check(f"null(H+) vector {i} residual",
              grid.norm(op.apply_h_plus(b)), bound_null)
    if defl.gen_vectors and not defl.degenerate:
        if defl.phase == model.FERROMAGNETIC:
            targets = [defl.null_minus[0]]
        else:
            targets = defl.null_minus
        for i, hat in enumerate(defl.gen_vectors):
            check(f"generalized vector {i} residual",
                  grid.norm(op.apply_h_plus(hat) - targets[i]),
                  max(cfg.tol_eig, 1e-8))
    norm_err = max(
        (abs(float((grid.inner(p.u, p.u) - grid.inner(p.v, p.v)).real)
             - 1.0) for p in spectrum.pairs), default=0.0)
    check(f"mode normalization ({len(spectrum.pairs)} modes)",
          norm_err, 1e-10)
    omegas = spectrum.omegas
    print("spectrum head: " +
          ", ".join(f"{w:.10g}" for w in omegas[:min(8, len(omegas))]))
    if 3 * grid.dof_scalar <= 512:
        oracle = dense_oracle_spectrum(op, defl, min(cfg.nev, 8))
        k = min(len(oracle), len(omegas), 8)
        err = float(np.max(np.abs(omegas[:k] - oracle[:k])
                           / np.abs(oracle[:k])))
        check("dense oracle agreement", err, 1e-8)
    return 0 if all(checks) else 1


def _cmd_convergence(cfg: io_mod.RunConfig) -> int:
    params = _model_params(cfg)
    sizes = [cfg.N, 2 * cfg.N, 4 * cfg.N]
    path = os.path.join(cfg.out, "convergence.csv")
    reports = study.convergence_study(
        params, d=cfg.d, L=cfg.L, sizes=sizes,
        nev=min(cfg.nev, 10), tol_ground=cfg.tol_ground,
        tol_eig=cfg.tol_eig, csv_path=path)
    for rep in reports:
        worst = max(e.e_omega for e in rep.entries)
        print(f"h = {rep.h:g}: max e_omega = {worst:.3e}")
    print(f"table written to {path}")
    return 0


def _cmd_perturb(cfg: io_mod.RunConfig) -> int:
    grid, gs, _, _, spectrum = _spectrum_run(cfg)
    status = 0
    for idx in cfg.modes:
        if idx > len(spectrum.pairs):
            print(f"mode {idx} not available "
                  f"({len(spectrum.pairs)} computed)", file=sys.stderr)
            status = 1
            continue
        pair = spectrum.pairs[idx - 1]
        dens = study.perturbed_density(gs, pair, cfg.epsilon, cfg.t)
        path = os.path.join(cfg.out, f"density_mode{idx}.spn1")
        io_mod.write_field(path, grid, dens)
        print(f"mode {idx} (omega = {pair.omega:.10g}) density "
              f"written to {path}")
    return status


def _cmd_bench(cfg: io_mod.RunConfig) -> int:
    params = _model_params(cfg)
    sizes = [cfg.N * 2**k for k in range(5)]
    records = study.timing_benchmark(params, d=cfg.d, L=cfg.L,
                                     sizes=sizes, nev=cfg.nev)
    path = os.path.join(cfg.out, "bench.csv")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["dof", "nev", "seconds", "operator_applies"])
        for rec in records:
            writer.writerow([rec.dof, rec.nev, f"{rec.seconds:.17g}",
                             rec.operator_applies])
    slope = study.complexity_slope(records)
    print(f"fitted log-log slope vs DOF*log(DOF): {slope:.3f}")
    print(f"timings written to {path}")
    return 0


_DISPATCH = {
    "ground": _cmd_ground,
    "bdg": _cmd_bdg,
    "verify": _cmd_verify,
    "convergence": _cmd_convergence,
    "perturb": _cmd_perturb,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spinbdg",
        description="Spin-1 condensate excitation spectra, matrix-free.")
    parser.add_argument("--config", help="path to a key = value file")
    parser.add_argument("--command", choices=COMMANDS,
                        help="overrides the command key in the config")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int,
                        help="FFT worker hint (or env BDG_THREADS)")
    args = parser.parse_args(argv)

    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as handle:
                text = handle.read()
        cfg = io_mod.parse_config(text)
        if args.command:
            cfg.command = args.command
        if args.out:
            cfg.out = args.out
        if cfg.command not in _DISPATCH:
            raise io_mod.ConfigError(
                f"no valid command; choose one of {', '.join(COMMANDS)}")
        os.makedirs(cfg.out, exist_ok=True)
        threads = args.threads
        if threads is None and os.environ.get("BDG_THREADS"):
            threads = int(os.environ["BDG_THREADS"])
        if threads:
            with scipy.fft.set_workers(threads):
                return _DISPATCH[cfg.command](cfg)
        return _DISPATCH[cfg.command](cfg)
    except (io_mod.ConfigError, io_mod.FieldFormatError, OSError,
            ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
