"""Homodyne spectrum of the free fluorescence channel.

Two independent analytic routes are provided:

* :func:`s_inel` evaluates the closed form
  ``1 + 2 g |a2|^2 s . A (A^2 + mu^2)^{-1} t`` from the relaxation matrix
  ``A`` and the source vector ``t``;
* :func:`s_inel_via_autocorr` integrates the cosine transform of the
  stationary autocovariance, built only from matrix exponentials of the
  4x4 closed-loop generator.

:func:`mc_spectrum` estimates the same quantity from simulated photocurrents.

The elastic line is reported as ``S_el(mu) = 2 pi m^2 delta(mu)`` with
``m = sqrt(g) |a2| <sigma_theta2>_eq``, which is the large-time limit of
``|int_0^T e^{i mu s} m ds|^2 / T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.optimize

from . import qops
from .exceptions import (
    InsufficientWindow,
    NotUnimodal,
    QuadratureFailure,
    SingularDynamics,
)
from .model import a_matrix, equilibrium, feedback_liouvillian, t_vector
from .qops import SIGMA_MINUS

COND_LIMIT = 1e12
ELASTIC_WEIGHT_FACTOR = 2 * math.pi


@dataclass
class SpectrumResult:
    """Inelastic spectrum on a frequency grid plus the elastic line.

    ``stderr`` is only set for Monte Carlo estimates.
    """

    mu_grid: np.ndarray
    s_inel: np.ndarray
    elastic_mean: float
    elastic_weight: float
    stderr: Optional[np.ndarray] = None
    provenance: str = "analytic"


@dataclass
class AutocorrResult:
    lag_grid: np.ndarray
    values: np.ndarray
    mean: float
    stderr: Optional[np.ndarray] = None


def quadrature_direction(theta):
    return np.array([math.cos(theta), math.sin(theta), 0.0])


class _ClosedForm:
    """Cached pieces of the closed form for one parameter set."""

    def __init__(self, p):
        self.p = p
        self.weight = 2 * p.gamma * p.alpha2_abs**2
        if self.weight == 0.0:
            return
        self.a = a_matrix(p)
        self.a2 = self.a @ self.a
        self.s = quadrature_direction(p.theta2)
        self.t = t_vector(p)

    def __call__(self, mu):
        if self.weight == 0.0:
            return 1.0
        m = self.a2 + mu**2 * np.eye(3)
        if np.linalg.cond(m) > COND_LIMIT:
            raise SingularDynamics(f"A^2 + mu^2 is singular at mu={mu!r}")
        x = np.linalg.solve(m, self.t)
        return 1.0 + self.weight * float(self.s @ (self.a @ x))


def s_inel(p, mu):
    """Inelastic homodyne spectrum at frequency ``mu`` (closed form)."""
    return _ClosedForm(p)(mu)


def elastic_line(p):
    """Return ``(m, 2 pi m^2)``: mean current and elastic line weight."""
    if p.alpha2_abs == 0.0:
        return 0.0, 0.0
    eta = equilibrium(p)
    m = math.sqrt(p.gamma) * p.alpha2_abs * eta.expect(qops.sigma_phi(p.theta2)).real
    return m, ELASTIC_WEIGHT_FACTOR * m**2


def s_inel_grid(p, mu_grid):
    mu_grid = np.asarray(mu_grid, dtype=float)
    form = _ClosedForm(p)
    values = np.array([form(mu) for mu in mu_grid])
    m, weight = elastic_line(p)
    return SpectrumResult(mu_grid, values, m, weight, None, "analytic")


# -- correlation route ------------------------------------------------------

def autocorrelation(p, rho0, t, s):
    """Smooth part of ``E[I2(t) I2(s)]`` (the delta term is excluded)."""
    if t < 0 or s < 0:
        raise ValueError("times must be non-negative")
    gen = feedback_liouvillian(p)
    r2 = qops.rmap(p.alpha2 * SIGMA_MINUS)
    r0 = qops.to_coords(np.asarray(rho0, dtype=complex))
    v = r2 @ qops.expm(gen, abs(t - s)) @ r2 @ qops.expm(gen, min(s, t)) @ r0
    return p.gamma * v[0]


class _Autocovariance:
    """Stationary ``C(tau)``, evaluated with 4x4 matrix exponentials."""

    def __init__(self, p):
        self.p = p
        self.gen = feedback_liouvillian(p)
        r2 = qops.rmap(p.alpha2 * SIGMA_MINUS)
        eta = qops.to_coords(equilibrium(p).matrix)
        self.left = p.gamma * r2[0]
        self.right = r2 @ eta
        self.mean_sq = p.gamma * (r2 @ eta)[0] ** 2

    def __call__(self, tau):
        return float(self.left @ qops.expm(self.gen, tau) @ self.right - self.mean_sq)

    def decay_rate(self):
        b = self.gen[1:, 1:]
        return float(-np.linalg.eigvals(b).real.max())


def stationary_autocovariance(p, tau):
    """``C(tau) = g Tr{R e^{tau L_f} R eta_eq} - m^2`` with ``R = R[a2 s-]``."""
    if tau < 0:
        raise ValueError("lag must be non-negative")
    if p.alpha2_abs == 0.0:
        return 0.0
    return _Autocovariance(p)(tau)


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature settings for :func:`s_inel_via_autocorr`."""

    cutoff: float = 1e-12
    max_horizon: float = 1e4
    epsabs: float = 1e-11
    epsrel: float = 1e-10
    limit: int = 500


def s_inel_via_autocorr(p, mu, quad=QuadConfig()):
    """``1 + 2 int_0^inf cos(mu tau) C(tau) dtau`` by adaptive quadrature.

    The integral is truncated at the horizon where ``|C|`` falls below
    ``quad.cutoff``.
    """
    if p.alpha2_abs == 0.0:
        return 1.0
    cov = _Autocovariance(p)
    rate = cov.decay_rate()
    if rate <= 0:
        raise QuadratureFailure("autocovariance does not decay")
    c0 = max(abs(cov(0.0)), 1e-300)
    limit = quad.max_horizon / p.gamma
    horizon = max(math.log(max(c0, 1.0) / quad.cutoff) / rate, 1.0 / rate)
    # non-normal transients may delay the decay: extend until the tail is small
    while horizon <= limit and max(abs(cov(horizon)), abs(cov(1.1 * horizon))) >= quad.cutoff:
        horizon *= 1.5
    if horizon > limit:
        raise QuadratureFailure("truncation horizon exceeds the limit")
    if mu == 0:
        val, err = scipy.integrate.quad(
            cov, 0.0, horizon, epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit
        )
    else:
        val, err = scipy.integrate.quad(
            cov, 0.0, horizon, weight="cos", wvar=mu,
            epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit,
        )
    if not math.isfinite(val) or err > 1e-7:
        raise QuadratureFailure(f"quadrature error estimate {err:.3g} too large")
    return 1.0 + 2.0 * val


# -- diagnostics ------------------------------------------------------------

def heisenberg_product(p, mu):
    """Product of the spectra of conjugate quadratures (``>= 1``)."""
    return s_inel(p, mu) * s_inel(p.replace(theta2=p.theta2 + math.pi / 2), mu)


@dataclass
class SqueezingReport:
    min_value: float
    argmin: float
    squeezed: bool

    def __iter__(self):
        return iter((self.min_value, self.argmin, self.squeezed))


def squeezing_report(p, mu_grid, tol=1e-9):
    res = s_inel_grid(p, mu_grid)
    i = int(np.argmin(res.s_inel))
    value = float(res.s_inel[i])
    return SqueezingReport(value, float(res.mu_grid[i]), value < 1 - tol)


def fwhm(p, span=20.0, n_scan=4001, xtol=1e-9):
    """Full width at half maximum of ``s_inel - 1``.

    The peak is located on a scan of ``[-span g, span g]`` and refined;
    half-maximum crossings on either side are found by bisection.

    Raises
    ------
    NotUnimodal
        When ``s_inel - 1`` is not a single positive peak on the scan.
    """
    form = _ClosedForm(p)
    f = lambda mu: form(mu) - 1.0
    half = span * p.gamma
    grid = np.linspace(-half, half, n_scan)
    vals = np.array([f(mu) for mu in grid])
    if vals.min() <= 0 or f(0.0) <= 0:
        raise NotUnimodal("s_inel - 1 is not positive across the scan")
    interior = (vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:])
    n_peaks = int(interior.sum())
    if n_peaks != 1:
        raise NotUnimodal(f"found {n_peaks} local maxima of s_inel - 1")
    k = int(np.argmax(vals))
    step = grid[1] - grid[0]
    opt = scipy.optimize.minimize_scalar(
        lambda mu: -f(mu), bounds=(grid[k] - step, grid[k] + step),
        method="bounded", options={"xatol": xtol},
    )
    mu_peak, peak = opt.x, -opt.fun
    h = 0.5 * peak
    if vals[0] >= h or vals[-1] >= h:
        raise NotUnimodal("half maximum not reached inside the scan")
    below_left = np.nonzero(vals[: k + 1] < h)[0][-1]
    below_right = k + np.nonzero(vals[k:] < h)[0][0]
    left = scipy.optimize.brentq(lambda mu: f(mu) - h, grid[below_left], mu_peak, xtol=xtol)
    right = scipy.optimize.brentq(lambda mu: f(mu) - h, mu_peak, grid[below_right], xtol=xtol)
    return right - left


# -- Monte Carlo estimators -------------------------------------------------

def _stationary_window(ens, t_min=0.0):
    t_burn = ens.config.t_burn
    start = int(np.searchsorted(ens.times, t_burn - 1e-12))
    n = ens.currents.shape[1] - start
    if n * ens.output_dt < t_min - 1e-9:
        raise InsufficientWindow(
            f"stationary window {n * ens.output_dt:.4g} shorter than {t_min:.4g}"
        )
    return start


def mc_spectrum(ens, mu_grid, segment_length=None, overlap=0.5):
    """Averaged periodogram of the channel-2 current of a physical ensemble.

    The post-burn window of every trajectory is cut into segments of
    ``segment_length`` (default ``100 / gamma``, at least ``50 / gamma``)
    with fractional ``overlap`` and no taper.  For each segment ``|sum_k e^{i mu t_k} (I_k - m) h|^2 / L``
    is evaluated at the requested frequencies, where ``m`` is the ensemble
    mean current.  A unit-variance white noise gives exactly 1.  Standard
    errors come from the spread of the per-trajectory averages.
    """
    if ens.measure != "physical":
        raise ValueError("mc_spectrum needs a physical-measure ensemble")
    gamma = ens.params.gamma
    if segment_length is None:
        segment_length = 100.0 / gamma
    if segment_length < 50.0 / gamma:
        raise ValueError("segment length must be at least 50/gamma")
    start = _stationary_window(ens, max(100.0 / gamma, segment_length))
    h = ens.output_dt
    x = ens.currents[:, start:, 1]
    n_traj, n = x.shape
    seg = int(round(segment_length / h))
    hop = max(1, int(round(seg * (1 - overlap))))
    starts = np.arange(0, n - seg + 1, hop)
    mean = float(x.mean())
    mu_grid = np.asarray(mu_grid, dtype=float)
    tk = (np.arange(seg) + 0.5) * h
    cos_m = np.cos(np.outer(tk, mu_grid))
    sin_m = np.sin(np.outer(tk, mu_grid))
    per_traj = np.zeros((n_traj, mu_grid.size))
    for s0 in starts:
        block = (x[:, s0:s0 + seg] - mean) * h
        re = block @ cos_m
        im = block @ sin_m
        per_traj += (re**2 + im**2) / (seg * h)
    per_traj /= starts.size
    est = per_traj.mean(axis=0)
    if n_traj > 1:
        stderr = per_traj.std(axis=0, ddof=1) / math.sqrt(n_traj)
    else:
        stderr = np.full(mu_grid.size, np.nan)
    return SpectrumResult(
        mu_grid, est, mean, ELASTIC_WEIGHT_FACTOR * mean**2, stderr, "monte_carlo"
    )


def empirical_autocorr(ens, lag_grid):
    """Estimate the smooth part of ``E[I2(t) I2(t + tau)]`` over the stationary window.

    Lags must be multiples of the output step.  At lag 0 the discretised
    delta ``1/h`` is subtracted from the mean square current.
    """
    if ens.measure != "physical":
        raise ValueError("empirical_autocorr needs a physical-measure ensemble")
    h = ens.output_dt
    lag_grid = np.asarray(lag_grid, dtype=float)
    steps = np.rint(lag_grid / h).astype(int)
    if np.any(np.abs(steps * h - lag_grid) > 1e-9 * max(1.0, lag_grid.max())) or np.any(steps < 0):
        raise ValueError("lags must be non-negative multiples of the output step")
    start = _stationary_window(ens, 10 * float(lag_grid.max()) if lag_grid.size else 0.0)
    x = ens.currents[:, start:, 1]
    n_traj, n = x.shape
    per_traj = np.empty((n_traj, steps.size))
    for j, k in enumerate(steps):
        per_traj[:, j] = (x[:, : n - k] * x[:, k:]).mean(axis=1)
        if k == 0:
            per_traj[:, j] -= 1.0 / h
    values = per_traj.mean(axis=0)
    stderr = per_traj.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else None
    return AutocorrResult(lag_grid, values, float(x.mean()), stderr)
