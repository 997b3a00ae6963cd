"""Fast self-check of the analytic machinery (``fluorospec validate``)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import model, spectrum


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _draws(seed, n):
    rng = np.random.default_rng(seed)
    return [model.random_params(rng) for _ in range(n)]


def check_generator_equivalence(draws):
    worst = max(np.abs(model.feedback_liouvillian(p) - model.feedback_liouvillian_composed(p)).max()
                for p in draws)
    return Check("generator-equivalence", worst <= 1e-10, f"max |L_f - composed| = {worst:.2e}")


def check_trace_preservation(draws):
    worst = max(max(np.abs(model.liouvillian(p)[0]).max(), np.abs(model.feedback_liouvillian(p)[0]).max())
                for p in draws)
    return Check("trace-preservation", worst <= 1e-12, f"max |first row| = {worst:.2e}")


def check_spectrum_equivalence(draws, mus=(0.0, 0.5, 2.0)):
    worst = 0.0
    for p in draws:
        for mu in mus:
            worst = max(worst, abs(spectrum.s_inel(p, mu) - spectrum.s_inel_via_autocorr(p, mu)))
    return Check("spectrum-equivalence", worst <= 1e-5, f"max |closed form - Fourier| = {worst:.2e}")


def check_heisenberg(draws, grid=np.linspace(-4, 4, 41)):
    low = min(spectrum.heisenberg_product(p, mu) for p in draws for mu in grid)
    return Check("heisenberg-product", low >= 1 - 1e-9, f"min product = {low:.6f}")


def check_white_noise_floor(draws):
    worst = max(abs(spectrum.s_inel(p, 1e3 * p.gamma) - 1) for p in draws)
    return Check("white-noise-floor", worst <= 1e-4, f"max |S(1e3 g) - 1| = {worst:.2e}")


def check_drift_relation(draws):
    worst = 0.0
    for p in draws:
        b, _ = model.bloch_drift(model.feedback_liouvillian(p))
        ea = np.sort_complex(np.linalg.eigvals(model.a_matrix(p)))
        eb = np.sort_complex(np.linalg.eigvals(-b))
        worst = max(worst, np.abs(ea - eb).max())
    return Check("a-matrix-spectrum", worst <= 1e-8, f"max eigenvalue mismatch = {worst:.2e}")


def check_closed_forms():
    a = math.sqrt(0.45)
    p = model.PhysParams(gamma=1, omega_rabi=2, alpha1_abs=a, alpha2_abs=a,
                         theta1=math.pi, theta2=0, phi=math.pi / 2)
    off = abs(spectrum.s_inel(p, 0.0) - 2.6)
    on = abs(spectrum.s_inel(p.replace(c=a / 2), 0.0) - 1 - 0.45 * 8.225 / 8.775 * 0.55 / 0.075625)
    worst = max(off, on)
    return Check("lorentzian-closed-forms", worst <= 1e-9, f"max deviation = {worst:.2e}")


def run_validation(seed=0, n_draws=20):
    """Run every check and return the list of :class:`Check` results."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        draws = _draws(seed, n_draws)
    checks = [
        check_generator_equivalence,
        check_trace_preservation,
        check_spectrum_equivalence,
        check_heisenberg,
        check_white_noise_floor,
        check_drift_relation,
    ]
    results = [c(draws) for c in checks]
    results.append(check_closed_forms())
    return results
