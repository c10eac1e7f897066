"""Trajectory ensembles: sampling, flow maps, picture equivalence."""

import numpy as np
import pytest

from vnlab import (
    CouplingParams,
    Grid1D,
    ProbeSpec,
    action_observable,
    build_gaussian_phase_density,
    position_observable,
    to_angle_action,
)
from vnlab.cm import probe_marginal_Q, reduced_state_post_cm
from vnlab.heisenberg import (
    bump_profile,
    flow_action,
    flow_position,
    histogram_l1_distance,
    periodic_histogram_l1_distance,
    sample_initial,
    to_action_ensemble,
    uncertainty_disturbance_product,
)

QGRID = Grid1D(-8.0, 8.0, 256)
PGRID = Grid1D(-12.0, 12.0, 256)


def standard_state():
    return build_gaussian_phase_density(QGRID, PGRID, 1.0, 1.0)


class TestCouplingProfile:
    def test_pulse_normalization_and_monotone_integral(self):
        prof = bump_profile(t1=1.0, width=0.5)
        prof.validate(tol=1e-10)
        assert prof.G(0.0) == 0.0
        assert prof.G(5.0) == 1.0
        t = np.linspace(0.4, 1.6, 301)
        assert np.all(np.diff(prof.G(t)) >= 0)

    def test_compact_support(self):
        prof = bump_profile(t1=2.0, width=0.25)
        assert prof.g(1.7) == 0.0
        assert prof.g(2.3) == 0.0
        assert prof.g(2.0) > 0.0


class TestSampling:
    def test_sample_variance_close_to_unity(self):
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=0.5)
        ens = sample_initial(standard_state(), probe, 100000, seed=7)
        assert 0.97 < np.var(ens.q) < 1.03
        assert 0.97 < np.var(ens.p) < 1.03

    def test_determinism_for_fixed_seed(self):
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=0.5)
        a = sample_initial(standard_state(), probe, 2000, seed=123)
        b = sample_initial(standard_state(), probe, 2000, seed=123)
        for name in ("q", "p", "Q", "P"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_zero_momentum_width_gives_exact_zeros(self):
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=0.0)
        ens = sample_initial(standard_state(), probe, 1000, seed=3)
        assert np.all(ens.P == 0.0)

    def test_correlated_state_sampling(self):
        # A two-bump mixture: conditional momentum depends on position.
        qg = Grid1D(-8.0, 8.0, 256)
        pg = Grid1D(-8.0, 8.0, 256)
        qq, pp = np.meshgrid(qg.nodes, pg.nodes, indexing="ij")
        vals = np.exp(-0.5 * ((qq + 2) ** 2 + (pp + 1.5) ** 2)) + np.exp(
            -0.5 * ((qq - 2) ** 2 + (pp - 1.5) ** 2)
        )
        from vnlab.states import phase_density_from_values

        rho = phase_density_from_values(qg, pg, vals)
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=0.5)
        ens = sample_initial(rho, probe, 60000, seed=11)
        right = ens.q > 0
        # Overlap across q = 0 pulls the conditional mean below 1.5:
        # E[p | q > 0] = 1.5 * (Phi(2) - Phi(-2)) / 1 with Phi the unit CDF.
        from math import erf

        phi2 = 0.5 * (1.0 + erf(2.0 / np.sqrt(2.0)))
        expected = 1.5 * (2.0 * phi2 - 1.0)
        sem = np.std(ens.p[right]) / np.sqrt(right.sum())
        assert abs(np.mean(ens.p[right]) - expected) < 4 * sem
        assert abs(np.mean(ens.p[~right]) + expected) < 4 * sem


class TestFlowPosition:
    def test_zero_coupling_is_identity(self):
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=0.5)
        ens = sample_initial(standard_state(), probe, 500, seed=1)
        out = flow_position(ens, CouplingParams(epsilon=0.0, tau=0.0))
        assert np.array_equal(out.p, ens.p)
        assert np.array_equal(out.Q, ens.Q)

    def test_conserved_components_untouched(self):
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=1.0)
        ens = sample_initial(standard_state(), probe, 500, seed=2)
        out = flow_position(ens, CouplingParams.from_probe(1.0, probe))
        assert out.q is ens.q
        assert out.P is ens.P

    def test_momentum_variance_addition(self):
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=1.0)
        n = 100000
        ens = sample_initial(standard_state(), probe, n, seed=5)
        out = flow_position(ens, CouplingParams.from_probe(1.0, probe))
        var = np.var(out.p)
        bound = 3.0 * np.sqrt(2.0 / n) * 2.0  # 3 sigma for a variance estimate
        assert abs(var - 2.0) < bound

    def test_pointer_histogram_matches_density(self):
        probe = ProbeSpec(sigma_Q=0.4, sigma_P=0.6)
        coupling = CouplingParams.from_probe(1.0, probe)
        n = 100000
        ens = flow_position(sample_initial(standard_state(), probe, n, seed=9), coupling)
        Qg = Grid1D(-10.0, 10.0, 1024)
        density = probe_marginal_Q(standard_state(), probe, position_observable(), coupling, Qg)
        assert histogram_l1_distance(ens.Q, Qg, density, bins=24) < 5.0 / np.sqrt(n)


class TestFlowAction:
    OBS = action_observable(lambda xi: xi, lambda xi: np.ones_like(xi))

    def test_zero_coupling_is_identity(self):
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=0.5)
        ens = to_action_ensemble(sample_initial(standard_state(), probe, 500, seed=4))
        out = flow_action(ens, self.OBS, CouplingParams(epsilon=0.0, tau=0.0))
        assert np.array_equal(out.theta, ens.theta)
        assert np.array_equal(out.Q, ens.Q)

    def test_conserved_components_untouched(self):
        probe = ProbeSpec(sigma_Q=0.5, sigma_P=0.7)
        ens = to_action_ensemble(sample_initial(standard_state(), probe, 500, seed=6))
        out = flow_action(ens, self.OBS, CouplingParams.from_probe(1.0, probe))
        assert out.xi is ens.xi
        assert out.P is ens.P

    def test_angle_histogram_matches_spectral_solver(self):
        g = Grid1D(-8.0, 8.0, 256)
        rho = build_gaussian_phase_density(g, g, 1.0, 1.3)
        probe = ProbeSpec(sigma_Q=0.4, sigma_P=0.6)
        coupling = CouplingParams.from_probe(1.0, probe)
        n = 100000
        ens = flow_action(sample_initial(rho, probe, n, seed=12), self.OBS, coupling)
        aa = to_angle_action(rho, n_xi=256, n_theta=256)
        solved = reduced_state_post_cm(aa, self.OBS, coupling.tau)
        l1 = periodic_histogram_l1_distance(
            ens.theta, solved.thetagrid.nodes, solved.theta_marginal(), bins=24
        )
        assert l1 < 5.0 / np.sqrt(n)

    def test_unit_rescaling_enters_the_transform(self):
        from vnlab import UnitsConfig
        from vnlab.heisenberg import TrajectoryEnsemble

        ens = TrajectoryEnsemble(
            q=np.array([1.0]), p=np.array([2.0]),
            Q=np.array([0.5]), P=np.array([3.0]), seed=0,
        )
        act = to_action_ensemble(ens, UnitsConfig(scale_C=2.0))
        assert act.xi[0] == pytest.approx(0.5 * (4.0 + 1.0))
        assert act.theta[0] == pytest.approx(np.arctan2(1.0, 2.0))
        assert act.Q[0] == 1.0 and act.P[0] == 1.5

    def test_mean_pointer_shift_tracks_mean_action(self):
        g = Grid1D(-8.0, 8.0, 256)
        rho = build_gaussian_phase_density(g, g, 1.0, 1.0)
        probe = ProbeSpec(sigma_Q=0.4, sigma_P=0.6)
        coupling = CouplingParams.from_probe(1.0, probe)
        n = 100000
        ens0 = sample_initial(rho, probe, n, seed=13)
        out = flow_action(ens0, self.OBS, coupling)
        xi0 = 0.5 * (ens0.q**2 + ens0.p**2)
        mc_mean = np.mean(out.Q) / coupling.epsilon
        sem = np.std(out.Q) / coupling.epsilon / np.sqrt(n)
        assert abs(mc_mean - np.mean(xi0)) < 3.0 * sem


class TestUncertaintyDisturbance:
    def test_product_is_width_product(self):
        probe = ProbeSpec(sigma_Q=0.1, sigma_P=0.2)
        for eps in (0.5, 1.0, 4.0):
            coupling = CouplingParams.from_probe(eps, probe)
            ud = uncertainty_disturbance_product(probe, coupling)
            assert ud.product == pytest.approx(0.02, abs=1e-15)
            assert ud.uncertainty == pytest.approx(0.1 / eps)
            assert ud.disturbance == pytest.approx(eps * 0.2)

    def test_zero_momentum_width_means_no_disturbance(self):
        probe = ProbeSpec(sigma_Q=0.3, sigma_P=0.0)
        ud = uncertainty_disturbance_product(probe, CouplingParams.from_probe(1.0, probe))
        assert ud.product == 0.0

    def test_momentum_kick_scale_from_trajectories(self):
        probe = ProbeSpec(sigma_Q=0.3, sigma_P=0.7)
        coupling = CouplingParams.from_probe(1.4, probe)
        n = 100000
        ens = sample_initial(standard_state(), probe, n, seed=21)
        out = flow_position(ens, coupling)
        kick = np.std(out.p - ens.p) / coupling.epsilon
        bound = 3.0 * 0.7 / np.sqrt(2.0 * n)
        assert abs(kick - 0.7) < bound
