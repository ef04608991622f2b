"""Heat solver, stationary profile/flux, boundary-driven slab."""

import math
from functools import partial

import numpy as np
import pytest

from lorentzlab.macroscale import (
    HeatProblem,
    SlabSpec,
    _empty_field_factory,
    angular_average,
    fick_flux,
    simulate_slab_stationary,
    slab_field_spec,
    solve_heat,
    stationary_profile,
)


def gaussian_grid(sigma, span, n):
    edges = np.linspace(-span, span, n + 1)
    dx = edges[1] - edges[0]
    c = 0.5 * (edges[:-1] + edges[1:])
    gx, gy = np.meshgrid(c, c, indexing="ij")
    u = np.exp(-(gx**2 + gy**2) / (2 * sigma**2))
    return u / (u.sum() * dx * dx), dx, c


class TestSolveHeat:
    def test_uniform_is_equilibrium(self):
        u0 = np.full((20, 20), 0.7)
        prob = HeatProblem(D=1.0, initial=u0, dx=0.1, dt=0.002)
        out = solve_heat(prob, 0.5)
        assert np.allclose(out, 0.7, atol=1e-12)

    def test_zero_D_returns_initial(self):
        u0 = np.random.default_rng(0).random((10, 10))
        out = solve_heat(HeatProblem(0.0, u0, 0.1, 0.001), 3.0)
        assert np.array_equal(out, u0)

    def test_cfl_rejected(self):
        with pytest.raises(ValueError):
            HeatProblem(D=1.0, initial=np.ones((4, 4)), dx=0.1, dt=0.01)

    def test_negative_initial_rejected(self):
        with pytest.raises(ValueError):
            HeatProblem(D=1.0, initial=-np.ones((4, 4)), dx=1.0, dt=0.1)

    def test_mass_conserved(self):
        u0 = np.random.default_rng(1).random((30, 30))
        prob = HeatProblem(D=0.5, initial=u0, dx=0.05, dt=0.001)
        out = solve_heat(prob, 1.0)  # 1000 steps
        assert abs(out.sum() - u0.sum()) / u0.sum() < 1e-12

    def test_gaussian_kernel_oracle(self):
        # Gaussian stays Gaussian with variance sigma^2 + 2 D t per axis
        D, t, sigma = 0.3, 0.4, 0.35
        span = 4.0
        u0, dx, c = gaussian_grid(sigma, span, 160)
        prob = HeatProblem(D=D, initial=u0, dx=dx, dt=0.8 * 0.25 * dx * dx / D)
        out = solve_heat(prob, t)
        s2 = sigma**2 + 2 * D * t
        gx, gy = np.meshgrid(c, c, indexing="ij")
        exact = np.exp(-(gx**2 + gy**2) / (2 * s2)) / (2 * math.pi * s2)
        l2 = math.sqrt(((out - exact) ** 2).sum() * dx * dx)
        assert l2 < 1e-3


class TestAngularAverage:
    def test_isotropic_unchanged(self):
        f = np.tile(np.linspace(1, 2, 8)[:, None], (1, 16)) / (2 * math.pi)
        g = angular_average(f)
        assert np.allclose(g, np.linspace(1, 2, 8), atol=1e-12)

    def test_concentrated_same_marginal(self):
        # all mass in one angle bin: same spatial profile as the full law
        nx, nphi = 6, 12
        f = np.zeros((nx, nphi))
        profile = np.array([0.0, 1.0, 2.0, 3.0, 2.0, 1.0])
        f[:, 3] = profile / (2 * math.pi / nphi)
        g = angular_average(f)
        assert np.allclose(g, profile, atol=1e-12)

    def test_mass_preserved(self):
        rng = np.random.default_rng(5)
        f = rng.random((9, 32))
        dx = 0.25
        mass_in = f.sum() * dx * (2 * math.pi / 32)
        mass_out = angular_average(f).sum() * dx
        assert mass_out == pytest.approx(mass_in, rel=1e-12)


class TestProfileAndFlux:
    SLAB = SlabSpec(L=2.0, rho1=2.0, rho2=1.0, eta=1.0, epsilon=0.01)

    def test_profile_endpoints_and_midpoint(self):
        prof = stationary_profile(self.SLAB)
        assert prof(0.0) == pytest.approx(2.0)
        assert prof(2.0) == pytest.approx(1.0)
        assert prof(1.0) == pytest.approx(1.5)

    def test_equal_reservoirs_constant(self):
        slab = SlabSpec(L=1.0, rho1=1.3, rho2=1.3, eta=1.0, epsilon=0.01)
        prof = stationary_profile(slab)
        assert np.allclose(prof(np.linspace(0, 1, 7)), 1.3)

    def test_fick_flux_values(self):
        slab = SlabSpec(L=1.0, rho1=2.0, rho2=1.0, eta=1.0, epsilon=0.01)
        assert fick_flux(slab, 1.0) == pytest.approx(1.0)
        assert fick_flux(SlabSpec(L=1.0, rho1=1.0, rho2=1.0, eta=1.0,
                                  epsilon=0.01), 1.0) == 0.0
        half = fick_flux(SlabSpec(L=2.0, rho1=2.0, rho2=1.0, eta=1.0,
                                  epsilon=0.01), 1.0)
        assert half == pytest.approx(0.5)
        with pytest.raises(ValueError):
            fick_flux(slab, 0.0)

    def test_regime_guard_warns(self):
        with pytest.warns(RuntimeWarning):
            SlabSpec(L=1.0, rho1=2.0, rho2=1.0, eta=2.0, epsilon=2.0**-6)

    def test_slab_field_spec_intensity(self):
        with pytest.warns(RuntimeWarning):
            slab = SlabSpec(L=1.0, rho1=1.0, rho2=1.0, eta=1.5, epsilon=0.02)
        fs = slab_field_spec(slab, seed=1)
        assert fs.mu_eff == pytest.approx(slab.mu * slab.eta / slab.epsilon)
        assert fs.epsilon == pytest.approx(slab.collision_radius)
        assert fs.y_period == pytest.approx(16 * fs.cell_size)


class TestSlabSimulation:
    def test_free_streaming_equilibrium(self):
        # no scatterers, equal reservoirs: flat profile at rho, zero flux
        slab = SlabSpec(L=1.0, rho1=1.5, rho2=1.5, eta=1.0, epsilon=0.02)
        res = simulate_slab_stationary(
            slab, field_factory=partial(_empty_field_factory, 0.02),
            n_injections=8000, seed=3, n_bins=10, t_max=50.0)
        # near-tangential injections legitimately outlive t_max
        assert res.n_timeouts < 10
        assert np.all(np.abs(res.rho_hat - 1.5) <= 3.0 * res.rho_se)
        assert np.all(np.abs(res.J_hat) <= 3.0 * res.J_se)

    def test_one_sided_injection_monotone(self):
        # rho2 = 0: all mass enters from the left; profile decreases
        with pytest.warns(RuntimeWarning):
            slab = SlabSpec(L=1.0, rho1=2.0, rho2=0.0, eta=2.0,
                            epsilon=2.0**-5)
        res = simulate_slab_stationary(slab, n_injections=12_000, seed=4,
                                       n_bins=8, t_max=200.0)
        rho = res.rho_hat
        # allow one CI-sized wiggle but require a clear downward trend
        assert rho[0] > rho[-1] + 3 * (res.rho_se[0] + res.rho_se[-1])
        diffs = np.diff(rho)
        assert (diffs <= 2 * (res.rho_se[:-1] + res.rho_se[1:])).all()

    def test_stationarity_halves_agree(self):
        slab = SlabSpec(L=1.0, rho1=2.0, rho2=1.0, eta=1.0, epsilon=2.0**-5)
        res = simulate_slab_stationary(slab, n_injections=10_000, seed=5,
                                       n_bins=8, t_max=200.0)
        gap = np.abs(res.rho_halves[0] - res.rho_halves[1])
        assert np.all(gap <= 1.96 * (res.rho_halves_se[0] + res.rho_halves_se[1]))

    def test_flux_sign_follows_gradient(self):
        slab = SlabSpec(L=1.0, rho1=1.0, rho2=2.0, eta=1.0, epsilon=2.0**-5)
        res = simulate_slab_stationary(slab, n_injections=10_000, seed=6,
                                       n_bins=8, t_max=200.0)
        # denser right reservoir drives leftward flux
        assert res.J_hat.mean() < 0.0

    def test_worker_count_does_not_change_results(self):
        slab = SlabSpec(L=1.0, rho1=2.0, rho2=1.0, eta=1.0, epsilon=2.0**-5)
        a = simulate_slab_stationary(slab, n_injections=2000, seed=7,
                                     n_bins=8, t_max=100.0, workers=1)
        b = simulate_slab_stationary(slab, n_injections=2000, seed=7,
                                     n_bins=8, t_max=100.0, workers=3)
        assert np.array_equal(a.rho_hat, b.rho_hat)
        assert np.array_equal(a.J_hat, b.J_hat)
