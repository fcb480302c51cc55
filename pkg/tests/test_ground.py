"""Ground-state solver: constraint projection, flow fixed points and the
structure of the converged minimizers in both interaction regimes."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from spinbdg import (ModelParams, SpectralGrid, harmonic_potential,
                     magnetization, mass, solve_ground_state, solve_sma)
from spinbdg.ground import (ConstraintInfeasibleError, gaussian_initializer,
                            gradient_flow_step, project_constraints)
from spinbdg import model


def random_positive_spinor(grid, seed):
    rng = np.random.default_rng(seed)
    env = np.exp(-0.5 * grid.coordinate(0) ** 2)
    return env * (0.2 + rng.random((3,) + grid.shape))


class TestConstraintProjection:
    @pytest.mark.parametrize("M", [0.0, 0.3, -0.7, 0.95])
    def test_constraints_satisfied(self, M):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        psi = project_constraints(grid, random_positive_spinor(grid, 1), M)
        assert_allclose(mass(grid, psi), 1.0, rtol=1e-12)
        assert_allclose(magnetization(grid, psi), M, atol=1e-12)

    def test_pure_componentwise_scaling(self):
        # The projection only rescales components; profiles are untouched.
        grid = SpectralGrid(d=1, L=8.0, N=32)
        psi = random_positive_spinor(grid, 2)
        out = project_constraints(grid, psi, 0.4)
        for j in range(3):
            ratio = out[j] / psi[j]
            assert np.ptp(ratio) < 1e-13 * np.max(np.abs(ratio))

    def test_geometric_mean_coupling(self):
        # a_0 = sqrt(a_1 * a_-1) ties the middle scaling to the outer two.
        grid = SpectralGrid(d=1, L=8.0, N=32)
        psi = random_positive_spinor(grid, 3)
        out = project_constraints(grid, psi, 0.2)
        a = [np.max(out[j]) / np.max(psi[j]) for j in range(3)]
        assert_allclose(a[1], np.sqrt(a[0] * a[2]), rtol=1e-12)

    def test_idempotent(self):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        once = project_constraints(grid, random_positive_spinor(grid, 4), 0.1)
        twice = project_constraints(grid, once, 0.1)
        assert_allclose(twice, once, rtol=1e-12, atol=1e-14)

    def test_zero_middle_component(self):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        psi = random_positive_spinor(grid, 5)
        psi[1] = 0.0
        out = project_constraints(grid, psi, 0.25)
        assert np.all(out[1] == 0.0)
        assert_allclose(mass(grid, out), 1.0, rtol=1e-12)
        assert_allclose(magnetization(grid, out), 0.25, atol=1e-12)

    def test_infeasible_raises(self):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        psi = np.zeros((3,) + grid.shape)
        psi[1] = np.exp(-0.5 * grid.coordinate(0) ** 2)
        with pytest.raises(ConstraintInfeasibleError):
            project_constraints(grid, psi, 0.5)

    def test_missing_polarized_component_raises(self):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        psi = random_positive_spinor(grid, 6)
        psi[0] = 0.0
        with pytest.raises(ConstraintInfeasibleError):
            project_constraints(grid, psi, 0.5)


class TestInitializer:
    def test_feasible(self):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        params = ModelParams(beta_n=100.0, beta_s=-1.0, gamma=(1.0,), M=0.3)
        psi = gaussian_initializer(grid, params)
        assert_allclose(mass(grid, psi), 1.0, rtol=1e-12)
        assert_allclose(magnetization(grid, psi), 0.3, atol=1e-12)

    def test_antiferromagnetic_middle_empty(self):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        params = ModelParams(beta_n=100.0, beta_s=1.0, gamma=(1.0,), M=0.0)
        psi = gaussian_initializer(grid, params)
        assert np.all(psi[1] == 0.0)


class TestFlowStep:
    def test_preserves_constraints(self):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        params = ModelParams(beta_n=50.0, beta_s=-1.0, gamma=(1.0,), M=0.2)
        potential = harmonic_potential(grid, params.gamma)
        psi = gaussian_initializer(grid, params)
        out = gradient_flow_step(grid, psi, 0.05, params, potential)
        assert_allclose(mass(grid, out), 1.0, rtol=1e-12)
        assert_allclose(magnetization(grid, out), 0.2, atol=1e-12)

    def test_energy_decreases_from_rough_start(self):
        grid = SpectralGrid(d=1, L=8.0, N=32)
        params = ModelParams(beta_n=50.0, beta_s=-1.0, gamma=(1.0,), M=0.0)
        potential = harmonic_potential(grid, params.gamma)
        psi = project_constraints(grid, random_positive_spinor(grid, 7), 0.0)
        e0 = model.energy(grid, psi, params, potential)
        out = gradient_flow_step(grid, psi, 0.01, params, potential)
        assert model.energy(grid, out, params, potential) < e0

    def test_converged_state_is_fixed_point(self, fm_ground):
        gs = fm_ground
        out = gradient_flow_step(gs.grid, gs.phi, 0.5, gs.params,
                                 gs.potential)
        assert np.max(np.abs(out - gs.phi)) < 1e-9


class TestGroundState:
    def test_free_gas_energy(self, free_ground):
        # beta = 0: each component is the unit-trap oscillator ground mode.
        assert free_ground.converged
        # Truncation error at h = 1 dominates the comparison.
        assert_allclose(free_ground.energy, 0.5, rtol=1e-3)
        assert_allclose(free_ground.mu, (0.5, 0.5, 0.5), rtol=1e-3)

    def test_constraints(self, fm_ground, afm_ground):
        for gs in (fm_ground, afm_ground):
            assert gs.converged
            assert_allclose(mass(gs.grid, gs.phi), 1.0, rtol=1e-12)
            assert_allclose(magnetization(gs.grid, gs.phi), 0.0, atol=1e-12)

    def test_chemical_potential_relation(self, fm_ground, afm_ground):
        for gs in (fm_ground, afm_ground):
            mu1, mu0, mum = gs.mu
            assert abs(mu1 + mum - 2.0 * mu0) < 1e-10

    def test_euler_lagrange_residual(self, fm_ground, afm_ground):
        for gs in (fm_ground, afm_ground):
            assert gs.residual < 1e-9

    def test_positive_profiles(self, fm_ground):
        # Nonnegative up to spectral truncation tails at this resolution.
        assert np.min(fm_ground.phi) > -1e-4

    def test_antiferromagnetic_middle_vanishes(self, afm_ground):
        assert np.max(np.abs(afm_ground.phi[1])) == 0.0

    def test_ferromagnetic_single_mode_structure(self, fm_ground):
        # All three components share one spatial profile with amplitudes
        # ((1+M)/2, sqrt((1-M^2)/2), (1-M)/2).
        phi = fm_ground.phi
        norms = np.sqrt([fm_ground.grid.inner(phi[j], phi[j]).real
                         for j in range(3)])
        assert_allclose(norms, [0.5, np.sqrt(0.5), 0.5], atol=1e-8)
        profile = phi[1] / norms[1]
        for j in (0, 2):
            assert np.max(np.abs(phi[j] - norms[j] * profile)) < 1e-8

    def test_energy_below_projected_perturbations(self, fm_ground):
        gs = fm_ground
        rng = np.random.default_rng(8)
        for _ in range(5):
            bump = 0.05 * rng.standard_normal(gs.phi.shape)
            trial = project_constraints(gs.grid, np.abs(gs.phi + bump),
                                        gs.params.M)
            e = model.energy(gs.grid, trial, gs.params, gs.potential)
            assert e >= gs.energy - 1e-12

    def test_nonzero_magnetization(self):
        grid = SpectralGrid(d=1, L=16.0, N=32)
        params = ModelParams(beta_n=885.4, beta_s=-4.1, gamma=(1.0,), M=0.4)
        potential = harmonic_potential(grid, params.gamma)
        gs = solve_ground_state(params, potential, grid, tol=1e-10)
        assert gs.converged
        assert_allclose(magnetization(grid, gs.phi), 0.4, atol=1e-11)
        mu1, mu0, mum = gs.mu
        assert abs(mu1 + mum - 2.0 * mu0) < 1e-8


class TestSingleModeApproximation:
    def test_profile_matches_full_solver(self, fm_ground):
        phi = solve_sma(fm_ground.params, fm_ground.potential,
                        fm_ground.grid, tol=1e-12)
        assert_allclose(fm_ground.grid.norm(phi), 1.0, rtol=1e-12)
        full_profile = fm_ground.phi[1] / fm_ground.grid.norm(
            fm_ground.phi[1])
        assert np.max(np.abs(phi - full_profile)) < 1e-8

    def test_rejects_antiferromagnetic(self, afm_params, grid32):
        potential = harmonic_potential(grid32, afm_params.gamma)
        with pytest.raises(ValueError):
            solve_sma(afm_params, potential, grid32)
