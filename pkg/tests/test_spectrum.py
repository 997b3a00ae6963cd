import math
import warnings

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from fluorospec import config, model, qops, spectrum, trajectories
from fluorospec.exceptions import (
    InsufficientWindow,
    NotUnimodal,
    QuadratureFailure,
    SingularDynamics,
)
from fluorospec.model import PhysParams

seeds = st.integers(0, 2**32 - 1)
GRID = np.linspace(-4, 4, 161)


def draw(seed, **fixed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return model.random_params(np.random.default_rng(seed), **fixed)


def lorentz_set(gamma=1.0, c=0.0):
    a = math.sqrt(0.45)
    return PhysParams(gamma=gamma, omega_rabi=2 * gamma, alpha1_abs=a, alpha2_abs=a,
                      theta1=math.pi, phi=math.pi / 2, c=c * a)


@given(seeds, st.floats(-50, 50))
def test_no_detection_is_shot_noise(seed, mu):
    assert spectrum.s_inel(draw(seed, alpha2_abs=0.0), mu) == 1.0


@given(seeds)
def test_white_noise_floor(seed):
    p = draw(seed)
    assert abs(spectrum.s_inel(p, 1e3 * p.gamma) - 1) <= 1e-4


@given(seeds, st.floats(0, 5))
def test_spectrum_is_even(seed, mu):
    p = draw(seed)
    assert spectrum.s_inel(p, mu) == pytest.approx(spectrum.s_inel(p, -mu), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(seeds, st.sampled_from([0.0, 0.5, 2.0, 3.7]))
def test_closed_form_matches_fourier_route(seed, mu):
    p = draw(seed)
    assert spectrum.s_inel(p, mu) == pytest.approx(spectrum.s_inel_via_autocorr(p, mu), abs=1e-5)


@settings(deadline=None)
@given(seeds, st.floats(-6, 6))
def test_heisenberg_bound(seed, mu):
    assert spectrum.heisenberg_product(draw(seed), mu) >= 1 - 1e-9


@given(st.floats(0.3, 3))
def test_lorentzian_scales_with_gamma(gamma):
    p = lorentz_set(gamma)
    mu = np.linspace(-3, 3, 13) * gamma
    s = np.array([spectrum.s_inel(p, m) for m in mu])
    assert np.allclose(s, 1 + 0.4 * gamma**2 / (mu**2 + gamma**2 / 4), atol=1e-10)
    assert spectrum.fwhm(p) == pytest.approx(gamma, abs=1e-6 * gamma)


def test_line_narrowing_closed_form():
    # height 1 + 0.45 * 8.225 / 8.775 * 0.55 / 0.275^2, width 0.55
    p = lorentz_set(c=0.5)
    assert spectrum.s_inel(p, 0.0) == pytest.approx(1 + 0.45 * 8.225 / 8.775 * 0.55 / 0.075625, abs=1e-12)
    assert spectrum.fwhm(p) == pytest.approx(0.55, abs=1e-7)


def test_fwhm_rejects_squeezed_spectrum():
    with pytest.raises(NotUnimodal):
        spectrum.fwhm(config.preset("fig1_case1").params)


def test_fwhm_rejects_flat_spectrum():
    with pytest.raises(NotUnimodal):
        spectrum.fwhm(lorentz_set().replace(alpha2_abs=0.0))


@given(seeds)
def test_elastic_line(seed):
    p = draw(seed)
    m, weight = spectrum.elastic_line(p)
    eta = model.equilibrium(p)
    expected = math.sqrt(p.gamma) * p.alpha2_abs * eta.expect(
        math.cos(p.theta2) * np.array([[0, 1], [1, 0]]) + math.sin(p.theta2) * np.array([[0, -1j], [1j, 0]])
    ).real
    assert m == pytest.approx(expected, abs=1e-12)
    assert weight == pytest.approx(2 * math.pi * m**2)


@settings(max_examples=20)
@given(seeds, st.floats(0, 4), st.floats(0, 4))
def test_autocorrelation_from_equilibrium_is_stationary(seed, t, s):
    p = draw(seed)
    m, _ = spectrum.elastic_line(p)
    eta = model.equilibrium(p).matrix
    got = spectrum.autocorrelation(p, eta, t, s) - m**2
    assert got == pytest.approx(spectrum.stationary_autocovariance(p, abs(t - s)), abs=1e-10)


def test_autocovariance_decays():
    p = config.preset("fig1_case2").params
    assert abs(spectrum.stationary_autocovariance(p, 60.0)) < 1e-12
    with pytest.raises(ValueError):
        spectrum.stationary_autocovariance(p, -1.0)


@given(st.floats(0, 20))
def test_lorentzian_autocovariance_is_exponential(tau):
    # 0.4 / (mu^2 + 1/4) is the cosine transform of 0.4 exp(-tau / 2)
    p = lorentz_set()
    assert spectrum.stationary_autocovariance(p, tau) == pytest.approx(0.4 * math.exp(-tau / 2), abs=1e-12)


def test_singular_relaxation_matrix(monkeypatch):
    monkeypatch.setattr(spectrum, "a_matrix", lambda p: np.zeros((3, 3)))
    with pytest.raises(SingularDynamics):
        spectrum.s_inel(lorentz_set(), 0.0)


def test_quadrature_failure():
    with pytest.raises(QuadratureFailure):
        spectrum.s_inel_via_autocorr(lorentz_set(), 0.3, spectrum.QuadConfig(max_horizon=1.0))


def test_squeezing_report():
    value, argmin, squeezed = spectrum.squeezing_report(config.preset("fig1_case1").params, GRID)
    assert squeezed and value < 1 and argmin == pytest.approx(0.0)
    assert not spectrum.squeezing_report(lorentz_set(), GRID).squeezed


def test_grid_result_fields():
    res = spectrum.s_inel_grid(lorentz_set(), GRID)
    assert res.provenance == "analytic" and res.stderr is None
    assert res.s_inel.shape == GRID.shape


@pytest.fixture(scope="module")
def short_ensemble():
    cfg = trajectories.SimConfig(t_final=130.0, t_burn=10.0, n_traj=24, seed=3)
    return trajectories.simulate_physical(config.preset("fig1_case1").params, cfg)


def test_mc_spectrum_on_short_run(short_ensemble):
    grid = np.linspace(0.25, 3, 12)
    mc = spectrum.mc_spectrum(short_ensemble, grid)
    analytic = spectrum.s_inel_grid(short_ensemble.params, grid).s_inel
    assert mc.provenance == "monte_carlo"
    assert np.all(np.abs(mc.s_inel - analytic) <= 5 * mc.stderr)
    assert mc.elastic_mean == pytest.approx(spectrum.elastic_line(short_ensemble.params)[0], abs=0.02)


def test_mc_spectrum_window_checks(short_ensemble):
    with pytest.raises(ValueError):
        spectrum.mc_spectrum(short_ensemble, GRID, segment_length=20.0)
    with pytest.raises(InsufficientWindow):
        spectrum.mc_spectrum(short_ensemble, GRID, segment_length=150.0)


def test_mc_spectrum_needs_physical_measure():
    cfg = trajectories.SimConfig(t_final=1.0, t_burn=0.0, n_traj=2)
    ens = trajectories.simulate_reference(PhysParams(), cfg)
    with pytest.raises(ValueError):
        spectrum.mc_spectrum(ens, GRID)


def test_empirical_autocorrelation(short_ensemble):
    p = short_ensemble.params
    lags = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
    emp = spectrum.empirical_autocorr(short_ensemble, lags)
    m, _ = spectrum.elastic_line(p)
    exact = np.array([spectrum.stationary_autocovariance(p, t) for t in lags]) + m**2
    # lags > 0: averaging over output intervals of 0.05 is negligible here
    assert np.all(np.abs(emp.values[1:] - exact[1:]) <= 5 * emp.stderr[1:])
    with pytest.raises(ValueError):
        spectrum.empirical_autocorr(short_ensemble, [0.01])


DARK = PhysParams(alpha1_abs=math.sqrt(0.45), alpha2_abs=math.sqrt(0.45))


@given(seeds, st.floats(-20, 20))
def test_spectrum_is_positive(seed, mu):
    assert spectrum.s_inel(draw(seed), mu) > 0


def test_lorentzian_grid_shape():
    res = spectrum.s_inel_grid(lorentz_set(), np.linspace(-4, 4, 801))
    assert res.mu_grid[np.argmax(res.s_inel)] == 0.0
    assert np.allclose(res.s_inel, res.s_inel[::-1], atol=1e-10)
    flat = spectrum.s_inel_grid(lorentz_set().replace(alpha2_abs=0.0), GRID)
    assert np.all(flat.s_inel == 1.0)


def test_elastic_line_vanishes_without_coherence():
    assert spectrum.elastic_line(DARK) == (0.0, 0.0)
    assert spectrum.elastic_line(lorentz_set().replace(alpha2_abs=0.0)) == (0.0, 0.0)


def test_elastic_weight_from_mean_current():
    # 2 pi m^2 is the large-T limit of |int_0^T e^{i mu s} E[I_2] ds|^2 / T at mu = 0
    p = config.preset("fig1_case1").params
    m, weight = spectrum.elastic_line(p)
    gen = model.feedback_liouvillian(p)
    r2 = qops.rmap(p.alpha2 * qops.SIGMA_MINUS)
    ts = np.linspace(0, 400, 1601)
    mean_current = np.array([(r2 @ qops.expm(gen, t) @ [1, 0, 0, -1])[0] for t in ts])
    integral = scipy.integrate.trapezoid(mean_current, ts) * math.sqrt(p.gamma)
    assert integral / ts[-1] == pytest.approx(m, rel=2e-2)
    assert weight == pytest.approx(2 * math.pi * m**2)


@given(seeds, st.floats(0, 5), st.floats(0, 5))
def test_autocorrelation_is_symmetric(seed, t, s):
    p = draw(seed)
    rho = qops.from_bloch([0.1, 0.2, -0.3]).matrix
    assert spectrum.autocorrelation(p, rho, t, s) == pytest.approx(spectrum.autocorrelation(p, rho, s, t), abs=1e-12)
    assert spectrum.autocorrelation(p.replace(alpha2_abs=0.0), rho, t, s) == 0.0


def test_autocovariance_examples():
    p = lorentz_set()
    assert abs(spectrum.stationary_autocovariance(p, 50.0)) <= 1e-8
    assert spectrum.stationary_autocovariance(p.replace(alpha2_abs=0.0), 1.0) == 0.0
    r2 = qops.rmap(p.alpha2 * qops.SIGMA_MINUS)
    eta = model.equilibrium(p).coords
    m, _ = spectrum.elastic_line(p)
    assert spectrum.stationary_autocovariance(p, 0.0) == pytest.approx(p.gamma * (r2 @ r2 @ eta)[0] - m**2)
    assert spectrum.s_inel_via_autocorr(p, 0.0) == pytest.approx(2.6, abs=1e-5)
    assert spectrum.s_inel_via_autocorr(p.replace(alpha2_abs=0.0), 0.0) == 1.0


def test_heisenberg_examples():
    p = config.preset("fig1_case1").params
    assert spectrum.s_inel(p, 0.0) < 1
    assert spectrum.heisenberg_product(p, 0.0) >= 1
    assert spectrum.heisenberg_product(p.replace(alpha2_abs=0.0), 0.4) == 1.0


def test_squeezing_examples():
    rep = spectrum.squeezing_report(config.preset("fig1_case2").params, np.linspace(-4, 4, 801))
    assert abs(abs(rep.argmin) - 2.5) <= 0.2
    assert not spectrum.squeezing_report(DARK, GRID).squeezed
    with pytest.raises(NotUnimodal):
        spectrum.fwhm(config.preset("fig1_case2").params)


def test_mc_spectrum_of_dark_atom_is_shot_noise():
    # single-segment periodograms are exponential variates; with few of them
    # the sample standard error is too skewed for a 4-sigma test
    cfg = trajectories.SimConfig(t_final=240.0, t_burn=40.0, n_traj=100, seed=2)
    ens = trajectories.simulate_physical(DARK, cfg)
    mc = spectrum.mc_spectrum(ens, GRID)
    assert np.all(np.abs(mc.s_inel - 1) <= 4 * mc.stderr)


def test_empirical_autocorrelation_of_dark_atom():
    cfg = trajectories.SimConfig(t_final=60.0, t_burn=10.0, n_traj=40, seed=5)
    emp = spectrum.empirical_autocorr(trajectories.simulate_physical(DARK, cfg), [0.5, 1.0, 2.5])
    assert np.all(np.abs(emp.values) <= 4 * emp.stderr)


def test_empirical_autocorrelation_of_lorentzian():
    p = lorentz_set()
    cfg = trajectories.SimConfig(t_final=140.0, t_burn=20.0, n_traj=16, seed=9)
    lags = np.array([0.25, 1.0, 3.0])
    emp = spectrum.empirical_autocorr(trajectories.simulate_physical(p, cfg), lags)
    exact = 0.4 * np.exp(-lags / 2)  # m = 0 for this set
    assert np.all(np.abs(emp.values - exact) <= 4 * emp.stderr)
