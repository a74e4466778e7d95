"""Master-equation generators, eigendecompositions, regression theorem."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from qdsource.dynamics import (AdiabaticRates, BareWaveguide,
                               FilteredWaveguide, LiouvillianDecomposition,
                               QDParams, ResonantCavity, adiabatic_rates,
                               build_cavity_generator,
                               build_waveguide_generator, cavity_ops,
                               dipole_correlation, dissipator, spre, _vec)
from qdsource.errors import ConfigurationError, ConstructionError
from qdsource.phonon import PhononEnvironment, PolaronRates, polaron_rates
from qdsource.units import angular_to_uev, uev_to_angular


@pytest.fixture(scope="module")
def cavity_point(env_T4):
    qd = QDParams(Gamma_bulk_uev=1.0, gamma_pd_uev=0.0)
    arch = ResonantCavity(g_uev=30.0, kappa_c_uev=120.0, Gamma_O_uev=1.0)
    rates = polaron_rates(arch.g, arch.kappa_c, env_T4)
    return qd, arch, build_cavity_generator(qd, arch, rates)


def two_stage_propagation(decomp, t, tau_grid, *, rtol=1e-11, atol=1e-13):
    """Independent regression check: integrate the master equation to t,
    apply sigma, integrate again over tau.  Uses an explicit Runge-Kutta
    stepper, sharing nothing with the eigendecomposition route."""
    L = decomp.generator
    rho0 = _initial_vec(decomp.dim)

    def rhs(_, y):
        return L @ y

    if t == 0.0:
        y_t = rho0
    else:
        sol1 = solve_ivp(rhs, (0.0, t), rho0, rtol=rtol, atol=atol,
                         t_eval=[t])
        y_t = sol1.y[:, -1]
    y_sig = spre(decomp.sigma) @ y_t
    sol2 = solve_ivp(rhs, (0.0, tau_grid[-1]), y_sig, rtol=rtol, atol=atol,
                     t_eval=tau_grid)
    w = _vec(decomp.sigma).conj()
    return w @ sol2.y


def _initial_vec(d):
    rho0 = np.zeros((d, d), dtype=complex)
    excited = 1 if d == 2 else 2
    rho0[excited, excited] = 1.0
    return _vec(rho0)


class TestWaveguideGenerator:
    def test_closed_form_correlation(self):
        # |g1(t+tau, t)| = exp(-Gt t - (Gt/2 + gamma) tau), exact here
        qd = QDParams(Gamma_bulk_uev=1.0, gamma_pd_uev=0.6)
        arch = BareWaveguide(Gamma_D_uev=10.0, Gamma_O_uev=0.3)
        corr = dipole_correlation(build_waveguide_generator(qd, arch))
        Gt = arch.Gamma_D + arch.Gamma_O
        for t, tau in ((0.0, 0.0), (3.0, 1.0), (80.0, 200.0), (400.0, 50.0)):
            want = np.exp(-Gt * t - (Gt / 2 + qd.gamma_pd) * tau)
            assert corr.eval(t, tau) == pytest.approx(want, abs=1e-12)

    def test_coherence_eigenvalue_no_dephasing(self):
        qd = QDParams(Gamma_bulk_uev=1.0)
        arch = BareWaveguide(Gamma_D_uev=10.0)
        dec = build_waveguide_generator(qd, arch)
        target = -arch.Gamma_D / 2
        assert np.abs(dec.eigenvalues - target).min() < 1e-14

    def test_coherence_eigenvalue_with_dephasing(self):
        qd = QDParams(Gamma_bulk_uev=1.0, gamma_pd_uev=2.5)
        arch = BareWaveguide(Gamma_D_uev=10.0)
        dec = build_waveguide_generator(qd, arch)
        target = -(arch.Gamma_D / 2 + qd.gamma_pd)
        assert np.abs(dec.eigenvalues - target).min() < 1e-14

    def test_purcell_total_rate(self):
        # F_wg = 10 at Gamma_bulk = 1 ueV gives a 10 ueV total decay
        qd = QDParams(Gamma_bulk_uev=1.0)
        arch = BareWaveguide(Gamma_D_uev=10 * qd.Gamma_bulk_uev)
        dec = build_waveguide_generator(qd, arch)
        assert angular_to_uev(-dec.eigenvalues.real.min()) == pytest.approx(
            10.0, rel=1e-12)

    def test_rejects_cavity_architecture(self):
        with pytest.raises(ConfigurationError):
            build_waveguide_generator(
                QDParams(), ResonantCavity(g_uev=30, kappa_c_uev=120))

    def test_single_stationary_mode(self):
        dec = build_waveguide_generator(QDParams(),
                                        BareWaveguide(Gamma_D_uev=10.0))
        assert np.sum(np.abs(dec.eigenvalues) < 1e-11) == 1


class TestCavityGenerator:
    def test_jaynes_cummings_poles(self, env_off):
        # alpha = 0, gamma = 0, Gamma_O = 0: vacuum Rabi doublet
        g, kc = uev_to_angular(50.0), uev_to_angular(40.0)
        rates = polaron_rates(g, kc, PhononEnvironment.build(0.0, 1.45, 0.0))
        arch = ResonantCavity(g_uev=50.0, kappa_c_uev=40.0, Gamma_O_uev=0.0)
        dec = build_cavity_generator(QDParams(), arch, rates)
        rabi = np.sqrt(g**2 - (kc / 4) ** 2)
        for pole in (-kc / 4 + 1j * rabi, -kc / 4 - 1j * rabi):
            assert np.abs(dec.eigenvalues - pole).min() < 1e-12

    def test_trace_preservation(self, cavity_point):
        _, _, dec = cavity_point
        # left action on vec(identity) must vanish for any Liouvillian
        resid = _vec(np.eye(dec.dim)).conj() @ dec.generator
        assert np.abs(resid).max() < 1e-10

    def test_propagated_trace_constant(self, cavity_point):
        _, _, dec = cavity_point
        for t in (1.0, 50.0, 500.0):
            rho = (expm(dec.generator * t) @ _initial_vec(4)).reshape(
                4, 4, order="F")
            assert np.trace(rho) == pytest.approx(1.0, abs=1e-10)

    def test_positivity_at_sampled_times(self, cavity_point):
        _, _, dec = cavity_point
        for t in (0.5, 5.0, 50.0, 800.0):
            rho = (expm(dec.generator * t) @ _initial_vec(4)).reshape(
                4, 4, order="F")
            herm = (rho + rho.conj().T) / 2
            assert np.linalg.eigvalsh(herm).min() > -1e-9

    def test_double_excitation_stays_empty(self, cavity_point):
        # |X,1> is outside the reachable sector; truncation is exact
        _, _, dec = cavity_point
        for t in (1.0, 20.0, 300.0):
            rho = (expm(dec.generator * t) @ _initial_vec(4)).reshape(
                4, 4, order="F")
            assert abs(rho[3, 3]) < 1e-12

    def test_population_only_flows_to_ground(self, cavity_point):
        # leakage out of the single-excitation pair lands in |0,0> alone
        _, _, dec = cavity_point
        rho = (expm(dec.generator * 30.0) @ _initial_vec(4)).reshape(
            4, 4, order="F")
        pops = np.real(np.diag(rho))
        assert pops[0] == pytest.approx(1.0 - pops[1] - pops[2], abs=1e-10)
        assert pops[0] > 0.1

    def test_amplifying_generator_rejected(self, env_T4):
        bogus = PolaronRates(
            g=uev_to_angular(30.0), kappa_c=uev_to_angular(120.0),
            g_r=uev_to_angular(30.0) * env_T4.franck_condon,
            chi_x=-0.5 + 0j, chi_y=0j, chi_z=0j, gamma_ph=0.0,
            gamma_ph_weak_coupling=0.0, include_z=True, polaron_valid=True)
        arch = ResonantCavity(g_uev=30.0, kappa_c_uev=120.0, Gamma_O_uev=1.0)
        with pytest.raises(ConstructionError):
            build_cavity_generator(QDParams(), arch, bogus)

    def test_mismatched_rates_rejected(self, env_T4):
        rates = polaron_rates(uev_to_angular(30.0), uev_to_angular(120.0),
                              env_T4)
        arch = ResonantCavity(g_uev=40.0, kappa_c_uev=120.0, Gamma_O_uev=1.0)
        with pytest.raises(ConfigurationError):
            build_cavity_generator(QDParams(), arch, rates)

    def test_exceptional_point_flagged_and_accurate(self):
        # alpha = 0, gamma = 0: coherence block defective at kc = 4g + G_O
        env = PhononEnvironment.build(0.0, 1.45, 0.0)
        qd = QDParams(Gamma_bulk_uev=1.0)
        arch = ResonantCavity(g_uev=50.0, kappa_c_uev=201.0, Gamma_O_uev=1.0)
        rates = polaron_rates(arch.g, arch.kappa_c, env)
        dec = build_cavity_generator(qd, arch, rates)
        assert dec.degenerate_modes
        assert dec.kappa_split == pytest.approx(1e-6)
        corr = dipole_correlation(dec)
        rho_t = expm(dec.generator * 20.0) @ _initial_vec(4)
        y = expm(dec.generator * 40.0) @ (spre(dec.sigma) @ rho_t)
        want = _vec(dec.sigma).conj() @ y
        assert corr.eval(20.0, 40.0) == pytest.approx(want, abs=1e-8)


class TestDipoleCorrelation:
    def test_initially_excited(self, cavity_point):
        _, _, dec = cavity_point
        corr = dipole_correlation(dec)
        assert corr.initial_value == pytest.approx(1.0, abs=1e-12)

    def test_population_matches_diagonal_limit(self, cavity_point):
        _, _, dec = cavity_point
        corr = dipole_correlation(dec)
        for t in (0.0, 2.0, 37.0):
            assert corr.eval(t, 0.0) == pytest.approx(
                corr.population(t), abs=1e-12)

    def test_population_real_nonneg_bounded(self, cavity_point):
        _, _, dec = cavity_point
        corr = dipole_correlation(dec)
        t = np.linspace(0.0, 1500.0, 400)
        p = corr.population(t)
        assert np.abs(p.imag).max() < 1e-12
        assert p.real.min() > -1e-12
        assert p.real.max() <= 1.0 + 1e-12

    def test_vacuum_mode_carries_no_weight(self, cavity_point):
        _, _, dec = cavity_point
        corr = dipole_correlation(dec)
        assert np.all(corr.lambdas.real < -1e-14)
        assert np.all(corr.mus.real < -1e-14)

    def test_regression_vs_runge_kutta_cavity(self, env_bench_T0):
        # two-stage stepper propagation against the eigen-route, 1e-8
        qd = QDParams(Gamma_bulk_uev=1.0)
        arch = ResonantCavity(g_uev=50.0, kappa_c_uev=250.0, Gamma_O_uev=1.0)
        rates = polaron_rates(arch.g, arch.kappa_c, env_bench_T0)
        dec = build_cavity_generator(qd, arch, rates)
        corr = dipole_correlation(dec)
        tau_grid = np.array([0.5, 5.0, 20.0, 60.0])
        for t in (0.0, 4.0, 30.0):
            want = two_stage_propagation(dec, t, tau_grid)
            got = corr.eval(t, tau_grid)
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-8)

    def test_regression_vs_runge_kutta_waveguide(self):
        qd = QDParams(Gamma_bulk_uev=1.0, gamma_pd_uev=0.4)
        arch = BareWaveguide(Gamma_D_uev=10.0, Gamma_O_uev=1.0)
        dec = build_waveguide_generator(qd, arch)
        corr = dipole_correlation(dec)
        tau_grid = np.array([1.0, 40.0, 150.0])
        for t in (0.0, 10.0, 120.0):
            want = two_stage_propagation(dec, t, tau_grid)
            got = corr.eval(t, tau_grid)
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-8)


class TestAdiabaticRates:
    def test_waveguide_totals(self):
        qd = QDParams(Gamma_bulk_uev=1.0, gamma_pd_uev=0.2)
        arch = BareWaveguide(Gamma_D_uev=10.0, Gamma_O_uev=0.5)
        ar = adiabatic_rates(qd, arch)
        assert angular_to_uev(ar.Gamma_tot) == pytest.approx(10.5, rel=1e-12)
        assert ar.gamma_tot == qd.gamma_pd
        assert ar.Gamma_cav is None
        assert not ar.strong_coupling

    def test_cavity_purcell_rate_bare_convention(self, env_T4):
        qd = QDParams(Gamma_bulk_uev=1.0)
        arch = ResonantCavity(g_uev=30.0, kappa_c_uev=120.0, Gamma_O_uev=1.0)
        rates = polaron_rates(arch.g, arch.kappa_c, env_T4)
        ar = adiabatic_rates(qd, arch, rates)
        assert angular_to_uev(ar.Gamma_cav_bare) == pytest.approx(
            30.0, rel=1e-12)
        # polaron convention is suppressed by B^2
        assert ar.Gamma_cav == pytest.approx(
            ar.Gamma_cav_bare * env_T4.B2, rel=1e-12)
        assert ar.gamma_tot == pytest.approx(rates.gamma_ph, rel=1e-12)
        assert ar.adiabatic_valid and not ar.strong_coupling

    def test_cavity_without_phonons_keeps_bare_dephasing(self, env_off):
        qd = QDParams(Gamma_bulk_uev=1.0, gamma_pd_uev=0.9)
        arch = ResonantCavity(g_uev=30.0, kappa_c_uev=120.0, Gamma_O_uev=1.0)
        rates = polaron_rates(arch.g, arch.kappa_c, env_off)
        ar = adiabatic_rates(qd, arch, rates)
        assert ar.gamma_tot == pytest.approx(qd.gamma_pd, rel=1e-12)

    def test_strong_coupling_flag_boundary(self, env_off):
        qd = QDParams()
        for kc, flag in ((119.9, True), (120.1, False)):
            arch = ResonantCavity(g_uev=30.0, kappa_c_uev=kc, Gamma_O_uev=1.0)
            rates = polaron_rates(arch.g, arch.kappa_c, env_off)
            assert adiabatic_rates(qd, arch, rates).strong_coupling is flag

    def test_filtered_adiabatic_validity(self):
        qd = QDParams()
        narrow = FilteredWaveguide(Gamma_D_uev=10.0, kappa_f_uev=5.0)
        wide = FilteredWaveguide(Gamma_D_uev=10.0, kappa_f_uev=100.0)
        assert not adiabatic_rates(qd, narrow).adiabatic_valid
        assert adiabatic_rates(qd, wide).adiabatic_valid

    def test_cavity_needs_rates(self):
        with pytest.raises(ConfigurationError):
            adiabatic_rates(QDParams(),
                            ResonantCavity(g_uev=30.0, kappa_c_uev=120.0))


class TestParameterValidation:
    def test_negative_rates_rejected(self):
        with pytest.raises(ConfigurationError):
            QDParams(Gamma_bulk_uev=-1.0)
        with pytest.raises(ConfigurationError):
            QDParams(gamma_pd_uev=-0.1)
        with pytest.raises(ConfigurationError):
            BareWaveguide(Gamma_D_uev=0.0)
        with pytest.raises(ConfigurationError):
            FilteredWaveguide(Gamma_D_uev=10.0, kappa_f_uev=0.0)
        with pytest.raises(ConfigurationError):
            ResonantCavity(g_uev=0.0, kappa_c_uev=120.0)
        with pytest.raises(ConfigurationError):
            ResonantCavity(g_uev=30.0, kappa_c_uev=-5.0)

    def test_detuned_cavity_rejected(self):
        with pytest.raises(ConfigurationError):
            ResonantCavity(g_uev=30.0, kappa_c_uev=120.0, omega_c_uev=5.0)

    def test_dissipator_annihilates_identity_adjoint(self):
        sig = np.array([[0.0, 1.0], [0.0, 0.0]])
        resid = _vec(np.eye(2)).conj() @ dissipator(sig)
        assert np.abs(resid).max() < 1e-15
