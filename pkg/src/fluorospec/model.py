"""Physical parameters and the generators of the atom's open dynamics.

The no-feedback generator is

    L rho = -i[dw/2 sz + W/2 sx, rho] + g kd (sz rho sz - rho)
            + g n D[s+] rho + g (n + 1) D[s-] rho,

and the closed-loop generator ``L_f`` follows from composing the feedback
kick ``exp(M dW_1)`` after the measurement propagator.  Both the displayed
closed form and the Ito composition are coded here independently so they
can be checked against each other.

Bloch-drift convention: for any trace-preserving generator ``g`` the
coordinates obey ``d(x, y, z)/dt = B (x, y, z) + k``.  For ``L_f`` the
spectrum matrix ``A`` returned by :func:`a_matrix` satisfies ``B = -A``
entry by entry (observed to machine precision on random draws).
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import qops
from .exceptions import SingularDynamics, ValidationError
from .qops import P_MINUS, P_PLUS, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z

COND_LIMIT = 1e12


@dataclass(frozen=True)
class PhysParams:
    """Rates, drive, detection amplitudes and feedback controls.

    All rates and frequencies share the units of ``gamma``; angles are in
    radians.  ``alpha1_abs`` and ``alpha2_abs`` are the moduli of the
    channel amplitudes; ``theta1`` and ``theta2`` their phases (the local
    oscillator phases of the two homodyne detectors).
    """

    gamma: float = 1.0
    omega_rabi: float = 0.0
    delta_omega: float = 0.0
    n_bar: float = 0.0
    k_d: float = 0.0
    alpha1_abs: float = 0.0
    alpha2_abs: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    c: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValidationError(f"{f.name} must be finite, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        if self.gamma <= 0:
            raise ValidationError("gamma must be positive")
        for name in ("omega_rabi", "n_bar", "k_d", "alpha1_abs", "alpha2_abs"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.alpha1_abs**2 + self.alpha2_abs**2 > 1 + 1e-12:
            raise ValidationError("|alpha1|^2 + |alpha2|^2 must not exceed 1")
        if not 0 <= self.phi < math.pi:
            # sigma_{phi + pi} = -sigma_phi: same physics with c -> -c
            warnings.warn(
                f"feedback phase phi={self.phi!r} outside [0, pi); used verbatim",
                stacklevel=3,
            )

    @classmethod
    def from_efficiencies(cls, alpha1_sq=0.0, alpha2_sq=0.0, **kwargs):
        """Build from detected fractions ``|alpha1|^2`` and ``|alpha2|^2``."""
        if alpha1_sq < 0 or alpha2_sq < 0:
            raise ValidationError("channel fractions must be non-negative")
        return cls(alpha1_abs=math.sqrt(alpha1_sq), alpha2_abs=math.sqrt(alpha2_sq), **kwargs)

    @property
    def alpha1(self):
        return self.alpha1_abs * np.exp(1j * self.theta1)

    @property
    def alpha2(self):
        return self.alpha2_abs * np.exp(1j * self.theta2)

    @property
    def alpha0_abs(self):
        """Amplitude of the undetected (forward) channel."""
        return math.sqrt(max(0.0, 1.0 - self.alpha1_abs**2 - self.alpha2_abs**2))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


PARAM_NAMES = tuple(f.name for f in dataclasses.fields(PhysParams))
ANGLE_NAMES = ("theta1", "theta2", "phi")


def hamiltonian(p, detuning=None):
    dw = p.delta_omega if detuning is None else detuning
    return 0.5 * dw * SIGMA_Z + 0.5 * p.omega_rabi * SIGMA_X


def liouvillian(p):
    """No-feedback generator as a 4x4 Pauli-basis matrix."""
    g = p.gamma
    return (
        qops.commutator_map(hamiltonian(p))
        + g * p.k_d * (qops.sandwich(SIGMA_Z) - np.eye(4))
        + g * p.n_bar * qops.dissipator(SIGMA_PLUS)
        + g * (p.n_bar + 1) * qops.dissipator(SIGMA_MINUS)
    )


def feedback_op(p):
    """Feedback Hamiltonian per unit current, ``c sqrt(gamma) sigma_phi``."""
    return p.c * math.sqrt(p.gamma) * qops.sigma_phi(p.phi)


def delta_omega_c(p):
    """Detuning shifted by the feedback, ``dw + c g |a1| cos(theta1 - phi)``."""
    return p.delta_omega + p.c * p.gamma * p.alpha1_abs * math.cos(p.theta1 - p.phi)


def feedback_liouvillian(p):
    """Closed-loop generator ``L_f``, term by term from its closed form."""
    g, c, a1 = p.gamma, p.c, p.alpha1_abs
    s_phi = qops.sigma_phi(p.phi)
    jump = p.alpha1 * SIGMA_MINUS - 1j * c * s_phi
    anti = (a1**2 - 2 * c * a1 * math.sin(p.theta1 - p.phi)) * P_PLUS + c**2 * qops.IDENTITY
    return (
        qops.commutator_map(hamiltonian(p, delta_omega_c(p)))
        + g * p.k_d * (qops.sandwich(SIGMA_Z) - np.eye(4))
        + g * p.n_bar * qops.dissipator(SIGMA_PLUS)
        + g * (p.n_bar + 1 - a1**2) * qops.dissipator(SIGMA_MINUS)
        + g * qops.sandwich(jump)
        - 0.5 * g * qops.anticommutator(anti)
    )


def feedback_liouvillian_composed(p):
    """Closed-loop generator from the Ito rule, ``L + M^2/2 + sqrt(g) M R[a1 s-]``."""
    big_m = qops.commutator_map(feedback_op(p))
    r1 = qops.rmap(p.alpha1 * SIGMA_MINUS)
    return liouvillian(p) + 0.5 * big_m @ big_m + math.sqrt(p.gamma) * big_m @ r1


def bloch_drift(g):
    """Affine Bloch dynamics ``(B, k)`` of a trace-preserving generator."""
    g = np.asarray(g, dtype=float)
    if not qops.is_trace_preserving(g):
        raise ValueError("generator is not trace preserving")
    return g[1:, 1:].copy(), g[1:, 0].copy()


def equilibrium(p, generator=None):
    """Stationary state of ``L_f`` (or of ``generator`` when given).

    Solves the 3x3 affine Bloch system; the trace coordinate is fixed at 1.

    Raises
    ------
    SingularDynamics
        If the Bloch part has condition number above 1e12.
    """
    g = feedback_liouvillian(p) if generator is None else generator
    b, k = bloch_drift(g)
    if np.linalg.cond(b) > COND_LIMIT:
        raise SingularDynamics("Bloch drift is singular: equilibrium not unique")
    r = np.linalg.solve(b, -k)
    return qops.State2(qops.from_coords((1.0, *r)))


def a_matrix(p):
    """The 3x3 relaxation matrix ``A`` of the spectrum formula."""
    g, n, kd, c, a1 = p.gamma, p.n_bar, p.k_d, p.c, p.alpha1_abs
    th1, phi = p.theta1, p.phi
    dwc = delta_omega_c(p)
    cross = g * (c * a1 * math.cos(th1 + phi) + c**2 * math.sin(2 * phi))
    a = np.zeros((3, 3))
    a[0, 0] = g * (0.5 + n + 2 * kd + 2 * c * a1 * math.cos(th1) * math.sin(phi)
                   + 2 * c**2 * math.sin(phi) ** 2)
    a[0, 1] = dwc - cross
    a[1, 0] = -dwc - cross
    a[1, 1] = g * (0.5 + n + 2 * kd - 2 * c * a1 * math.sin(th1) * math.cos(phi)
                   + 2 * c**2 * math.cos(phi) ** 2)
    a[1, 2] = p.omega_rabi
    a[2, 1] = -p.omega_rabi
    a[2, 2] = g * (1 + 2 * n - 2 * c * a1 * math.sin(th1 - phi) + 2 * c**2)
    return a


def t_vector(p, eta=None):
    """Source vector of the spectrum formula.

    Bloch coordinates of ``e^{i th2} s- eta + e^{-i th2} eta s+ - <sigma_th2> eta``
    with ``eta`` the closed-loop equilibrium.
    """
    eta = equilibrium(p) if eta is None else eta
    rho = np.asarray(eta.matrix if isinstance(eta, qops.State2) else eta)
    ph = np.exp(1j * p.theta2)
    mean = np.trace(qops.sigma_phi(p.theta2) @ rho)
    x = ph * SIGMA_MINUS @ rho + np.conj(ph) * rho @ SIGMA_PLUS - mean * rho
    t = np.array([np.trace(x @ s) for s in (qops.SIGMA_X, qops.SIGMA_Y, qops.SIGMA_Z)])
    if np.abs(t.imag).max() > 1e-12:
        raise ArithmeticError("t-vector has an imaginary residue")
    return t.real


def max_rate(p):
    """Largest |eigenvalue| of ``L_f``; sets the stiffness of time stepping."""
    return float(np.abs(np.linalg.eigvals(feedback_liouvillian(p))).max())


def random_params(rng, **fixed):
    """Draw parameters from the sampling box used by the invariant sweeps."""
    a1_sq = rng.uniform(0, 1)
    a2_sq = rng.uniform(0, 1 - a1_sq)
    draw = dict(
        gamma=rng.uniform(0.5, 2),
        omega_rabi=rng.uniform(0, 3),
        delta_omega=rng.uniform(-3, 3),
        n_bar=rng.uniform(0, 1),
        k_d=rng.uniform(0, 0.5),
        alpha1_abs=math.sqrt(a1_sq),
        alpha2_abs=math.sqrt(a2_sq),
        theta1=rng.uniform(-math.pi, math.pi),
        theta2=rng.uniform(-math.pi, math.pi),
        c=rng.uniform(-1, 1),
        phi=rng.uniform(0, math.pi),
    )
    draw.update(fixed)
    return PhysParams(**draw)
