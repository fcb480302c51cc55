"""Shared fixtures: converged ground states and spectra are expensive,
so the physically interesting cases are solved once per session."""

from __future__ import annotations

import pytest

from spinbdg import (BdGOperator, ModelParams, SpectralGrid,
                     analytic_nullspace, generalized_nullvectors,
                     harmonic_potential, solve_ground_state, solve_spectrum)

FM_BETAS = dict(beta_n=885.4, beta_s=-4.1)
AFM_BETAS = dict(beta_n=240.8, beta_s=7.5)


@pytest.fixture(scope="session")
def grid32():
    return SpectralGrid(d=1, L=16.0, N=32)


@pytest.fixture(scope="session")
def fm_params():
    return ModelParams(gamma=(1.0,), M=0.0, **FM_BETAS)


@pytest.fixture(scope="session")
def afm_params():
    return ModelParams(gamma=(1.0,), M=0.0, **AFM_BETAS)


def _solve(params, grid):
    potential = harmonic_potential(grid, params.gamma)
    return solve_ground_state(params, potential, grid, tol=1e-12)


@pytest.fixture(scope="session")
def fm_ground(fm_params, grid32):
    return _solve(fm_params, grid32)


@pytest.fixture(scope="session")
def afm_ground(afm_params, grid32):
    return _solve(afm_params, grid32)


@pytest.fixture(scope="session")
def free_ground(grid32):
    params = ModelParams(beta_n=0.0, beta_s=0.0, gamma=(1.0,), M=0.0)
    return _solve(params, grid32)


@pytest.fixture(scope="session")
def fm_bdg(fm_ground):
    op = BdGOperator(fm_ground)
    defl = generalized_nullvectors(op, analytic_nullspace(fm_ground),
                                   tol=1e-10)
    return op, defl


@pytest.fixture(scope="session")
def afm_bdg(afm_ground):
    op = BdGOperator(afm_ground)
    defl = generalized_nullvectors(op, analytic_nullspace(afm_ground),
                                   tol=1e-10)
    return op, defl


@pytest.fixture(scope="session")
def fm_spectrum(fm_bdg):
    op, defl = fm_bdg
    return solve_spectrum(op, defl, nev=8, tol=1e-10)


@pytest.fixture(scope="session")
def afm_spectrum(afm_bdg):
    op, defl = afm_bdg
    return solve_spectrum(op, defl, nev=8, tol=1e-10)
