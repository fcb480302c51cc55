"""Verification-study helpers: closed-form trap modes, error reports,
perturbed densities and apply-cost scaling."""

import numpy as np
import pytest
from dataclasses import replace
from numpy.testing import assert_allclose

from spinbdg import (BdGOperator, ModelParams, SpectralGrid,
                     analytic_modes, eigen_error_report, harmonic_potential,
                     perturbed_density, solve_ground_state, timing_benchmark)
from spinbdg.bdg import ModePair, bogoliubov_norm, mode_residual
from spinbdg.eigensolver import Spectrum
from spinbdg.study import (MissingModeError, complexity_slope, run_pipeline,
                           write_error_csv)


def spectrum_from(pairs):
    return Spectrum(pairs=pairs, iterations=1, operator_applies=1,
                    wall_time=0.0)


@pytest.fixture(scope="module")
def mild():
    """Well-resolved weakly interacting pipeline; the closed-form trap
    modes hold to near machine precision at this resolution."""
    grid = SpectralGrid(d=1, L=16.0, N=128)
    params = ModelParams(beta_n=50.0, beta_s=-1.0, gamma=(1.0,), M=0.0)
    ground, op, defl, spectrum = run_pipeline(params, grid, nev=12,
                                              tol_ground=1e-12,
                                              tol_eig=1e-10)
    return ground, op, spectrum


@pytest.fixture(scope="module")
def mild_afm():
    grid = SpectralGrid(d=1, L=16.0, N=128)
    params = ModelParams(beta_n=50.0, beta_s=1.0, gamma=(1.0,), M=0.0)
    potential = harmonic_potential(grid, params.gamma)
    ground = solve_ground_state(params, potential, grid, tol=1e-12)
    return ground, BdGOperator(ground)


class TestAnalyticModes:
    def test_count_and_frequency(self, fm_ground):
        modes = analytic_modes(fm_ground)
        assert len(modes) == 1
        assert modes[0].omega == 1.0

    def test_normalized(self, mild):
        ground, _, _ = mild
        (mode,) = analytic_modes(ground)
        assert_allclose(
            bogoliubov_norm(ground.grid, mode.u, mode.v), 1.0, rtol=1e-6)

    def test_solves_blocks(self, mild):
        ground, op, _ = mild
        (mode,) = analytic_modes(ground)
        r_plus, r_minus = mode_residual(op, mode)
        assert r_plus < 1e-4
        assert r_minus < 1e-4

    def test_antiferromagnetic_blocks(self, mild_afm):
        ground, op = mild_afm
        (mode,) = analytic_modes(ground)
        r_plus, r_minus = mode_residual(op, mode)
        assert r_plus < 1e-4
        assert r_minus < 1e-4

    def test_rejects_non_harmonic_trap(self, fm_ground):
        bad = replace(fm_ground,
                      potential=fm_ground.potential + 0.05)
        with pytest.raises(ValueError):
            analytic_modes(bad)


class TestErrorReport:
    def test_exact_modes_give_zero_error(self, fm_ground):
        spec = spectrum_from(analytic_modes(fm_ground))
        report = eigen_error_report(spec, fm_ground)
        assert report.h == fm_ground.grid.h
        assert report.phase == "ferromagnetic"
        assert len(report.entries) == 1
        entry = report.entries[0]
        assert entry.omega == 1.0
        assert entry.multiplicity == 1
        assert entry.e_omega == 0.0
        assert entry.e_uv < 1e-12

    def test_frequency_error_measured(self, fm_ground):
        (mode,) = analytic_modes(fm_ground)
        shifted = ModePair(omega=1.01, u=mode.u, v=mode.v)
        report = eigen_error_report(spectrum_from([shifted]), fm_ground)
        assert_allclose(report.entries[0].e_omega, 0.01, rtol=1e-10)

    def test_amplitude_error_measured(self, fm_ground):
        grid = fm_ground.grid
        (mode,) = analytic_modes(fm_ground)
        rng = np.random.default_rng(0)
        noise = rng.standard_normal(mode.u.shape)
        noise = noise / grid.norm(noise)
        bad = ModePair(omega=1.0, u=mode.u + 0.1 * noise, v=mode.v)
        report = eigen_error_report(spectrum_from([bad]), fm_ground)
        assert 0.01 < report.entries[0].e_uv < 0.2

    def test_no_candidate_raises(self, fm_ground):
        (mode,) = analytic_modes(fm_ground)
        far = ModePair(omega=5.0, u=mode.u, v=mode.v)
        with pytest.raises(MissingModeError):
            eigen_error_report(spectrum_from([far]), fm_ground)

    def test_real_spectrum(self, mild):
        ground, _, spectrum = mild
        report = eigen_error_report(spectrum, ground)
        entry = report.entries[0]
        assert entry.e_omega < 1e-10
        assert entry.e_uv < 1e-6

    def test_csv_output(self, mild, tmp_path):
        ground, _, spectrum = mild
        report = eigen_error_report(spectrum, ground)
        path = tmp_path / "errors.csv"
        write_error_csv(str(path), [report])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "h,d,phase,omega,multiplicity,e_omega,e_uv"
        assert len(lines) == 1 + len(report.entries)


class TestPerturbedDensity:
    def test_zero_amplitude_gives_ground_density(self, fm_ground,
                                                 fm_spectrum):
        dens = perturbed_density(fm_ground, fm_spectrum.pairs[0], 0.0, 3.0)
        assert_allclose(dens, np.abs(fm_ground.phi) ** 2, atol=1e-15)

    def test_matches_direct_formula(self, fm_ground, fm_spectrum):
        pair = fm_spectrum.pairs[0]
        eps, t = 0.1, 10.6
        dens = perturbed_density(fm_ground, pair, eps, t)
        phase = np.exp(-1j * pair.omega * t)
        psi = fm_ground.phi + eps * (pair.u * phase
                                     + np.conj(pair.v * phase))
        assert_allclose(dens, np.abs(psi) ** 2, rtol=1e-13)

    def test_oscillation_period(self, fm_ground, fm_spectrum):
        pair = fm_spectrum.pairs[0]
        period = 2.0 * np.pi / pair.omega
        d0 = perturbed_density(fm_ground, pair, 0.1, 0.0)
        d1 = perturbed_density(fm_ground, pair, 0.1, period)
        assert_allclose(d1, d0, atol=1e-10)

    def test_shape(self, fm_ground, fm_spectrum):
        dens = perturbed_density(fm_ground, fm_spectrum.pairs[0], 0.1, 1.0)
        assert dens.shape == (3,) + fm_ground.grid.shape
        assert np.all(dens >= 0.0)


class TestTiming:
    def test_records_and_slope(self, fm_params):
        records = timing_benchmark(fm_params, d=1, L=16.0,
                                   sizes=(256, 512, 1024, 2048),
                                   applies=20)
        assert [r.dof for r in records] == [256, 512, 1024, 2048]
        assert all(r.seconds > 0 for r in records)
        slope = complexity_slope(records)
        # Quasi-linear scaling in the transform cost model.
        assert 0.3 < slope < 1.7
