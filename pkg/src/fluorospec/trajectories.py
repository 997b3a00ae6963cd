"""Quantum trajectories of the monitored atom under feedback.

Two unravellings of the same closed-loop dynamics are simulated:

* ``simulate_reference`` integrates the linear stochastic master equation
  driven by independent Wiener increments with Euler-Maruyama on Pauli
  coordinates; the trace of the unnormalised state is the likelihood weight
  of the record and is an exact discrete martingale under this scheme;
* ``simulate_physical`` integrates the normalised equation, whose currents
  ``dI_j = v_j dt + dB_j`` carry the drifts ``v_j = Tr{R[m_j] rho}``.  Each
  step applies the completely positive map

      rho -> K rho K^dag + dt sum_u u rho u^dag,
      K = 1 - (i h + 1/2 sum L^dag L) dt + sum_j m_j dI_j
            + 1/2 sum_jk m_j m_k (dI_j dI_k - delta_jk dt),

  and renormalises.  It agrees with Euler-Maruyama to first order in ``dt``
  but cannot leave the Bloch ball, which plain Euler-Maruyama does at
  ``dt = 1e-3`` for the nearly pure conditional states of this model.

Random streams
--------------
Trajectory ``i`` of a run with seed ``s`` draws its increments from
``numpy.random.Generator(PCG64(stream_seed(s, i)))`` with
``standard_normal`` (ziggurat), two values per time step in the order
``(dW_1, dW_2)``.  ``stream_seed`` is the SplitMix64 finaliser applied to
``s + (i + 1) * 0x9E3779B97F4A7C15`` (mod 2**64).  Results therefore do not
depend on how trajectories are scheduled across threads.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from . import qops
from .exceptions import PositivityBreach, StepSizeWarning
from .model import feedback_liouvillian, max_rate
from .qops import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15
POSITIVITY_TOL = 1e-4
STEP_RATE_LIMIT = 0.05
CHUNK_STEPS = 1 << 16


def splitmix64(x):
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(seed, index):
    """64-bit seed of trajectory ``index`` in a run seeded with ``seed``."""
    return splitmix64((seed & MASK64) + (index + 1) * GOLDEN64)


def trajectory_rng(seed, index):
    return np.random.Generator(np.random.PCG64(stream_seed(seed, index)))


@dataclass(frozen=True)
class SimConfig:
    """Time grid, ensemble size and seed of a simulation.

    Parameters
    ----------
    dt : float
        Integration step.
    t_final, t_burn : float
        Horizon and the transient discarded by stationary estimators.
    n_traj : int
        Number of trajectories.
    seed : int
        Master seed; per-trajectory streams derive from it.
    record_states : bool
        Store the state coordinates on the output grid.
    record_every : int
        Output grid spacing in integration steps.  Currents are averaged
        over each output interval.
    rho0 : tuple of float
        Bloch vector of the initial state (ground state by default).
    """

    dt: float = 1e-3
    t_final: float = 400.0
    t_burn: float = 40.0
    n_traj: int = 400
    seed: int = 0
    record_states: bool = False
    record_every: int = 50
    rho0: tuple = (0.0, 0.0, -1.0)

    def __post_init__(self):
        if not (self.dt > 0 and self.t_final > 0):
            raise ValueError("dt and t_final must be positive")
        if self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if not 0 <= self.t_burn < self.t_final:
            raise ValueError("t_burn must lie in [0, t_final)")
        if int(self.n_traj) < 1:
            raise ValueError("n_traj must be a positive integer")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be a positive integer")
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        qops.from_bloch(self.rho0)

    @property
    def n_steps(self):
        n = int(round(self.t_final / self.dt))
        r = self.record_every
        return ((n + r - 1) // r) * r

    @property
    def n_out(self):
        return self.n_steps // self.record_every

    @property
    def output_dt(self):
        return self.dt * self.record_every


@dataclass
class TrajectoryEnsemble:
    """Sampled currents, weights and optional states of many trajectories.

    ``currents[i, k, j]`` is the increment of ``W_j`` (reference measure) or
    of the observed current (physical measure) over
    ``[times[k], times[k + 1]]`` divided by its length.  ``weights[i, k]``
    and ``states[i, k]`` (Pauli coordinates ``w, x, y, z``) refer to
    ``times[k]``.
    """

    times: np.ndarray
    currents: np.ndarray
    weights: Optional[np.ndarray]
    states: Optional[np.ndarray]
    measure: str
    params: object
    config: SimConfig

    @property
    def output_dt(self):
        return self.config.output_dt

    @property
    def n_traj(self):
        return self.currents.shape[0]

    def bloch(self):
        """Normalised Bloch vectors of the recorded states."""
        if self.states is None:
            raise ValueError("states were not recorded")
        return self.states[..., 1:] / self.states[..., :1]


def noise_ops(p):
    """Measurement operators ``m1 = sqrt(g)(a1 s- - i c sigma_phi)`` and ``m2 = sqrt(g) a2 s-``."""
    sg = math.sqrt(p.gamma)
    m1 = sg * (p.alpha1 * SIGMA_MINUS - 1j * p.c * qops.sigma_phi(p.phi))
    m2 = sg * p.alpha2 * SIGMA_MINUS
    return m1, m2


def step_linear(sigma, dw1, dw2, p, dt):
    """One Euler-Maruyama step of the linear closed-loop equation."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    m1, m2 = noise_ops(p)
    sigma = np.asarray(sigma, dtype=complex)
    v = qops.to_coords(sigma)
    v = v + feedback_liouvillian(p) @ v * dt + qops.rmap(m1) @ v * dw1 + qops.rmap(m2) @ v * dw2
    out = qops.from_coords(v)
    return 0.5 * (out + qops.dagger(out))


def velocities(rho, p):
    """Drifts ``(v1, v2)`` of the observed currents in state ``rho``."""
    m1, m2 = noise_ops(p)
    r = np.asarray(rho.matrix if isinstance(rho, qops.State2) else rho, dtype=complex)
    return 2 * np.trace(m1 @ r).real, 2 * np.trace(m2 @ r).real


def lindblad_form(p):
    """Split ``L_f`` into a Hamiltonian and unmonitored jump operators.

    ``L_f = -i[h, .] + sum_u D[u] + D[m1] + D[m2]`` with the unmonitored
    channels dephasing, thermal absorption and the undetected part of the
    emission.  ``h`` is read off the residual, which is a pure commutator.
    """
    g = p.gamma
    m1, m2 = noise_ops(p)
    unmonitored = [
        math.sqrt(g * p.k_d) * SIGMA_Z,
        math.sqrt(g * p.n_bar) * SIGMA_PLUS,
        math.sqrt(g * (p.n_bar + p.alpha0_abs**2)) * SIGMA_MINUS,
    ]
    residual = feedback_liouvillian(p) - sum(qops.dissipator(a) for a in (*unmonitored, m1, m2))
    b = residual[1:, 1:]
    h = 0.5 * (b[2, 1] * SIGMA_X + b[0, 2] * SIGMA_Y + b[1, 0] * SIGMA_Z)
    return h, unmonitored


def check_step(p, cfg):
    rate = max_rate(p)
    if cfg.dt * rate > STEP_RATE_LIMIT:
        warnings.warn(
            f"dt * max rate = {cfg.dt * rate:.3g} exceeds {STEP_RATE_LIMIT}",
            StepSizeWarning,
            stacklevel=3,
        )


# -- kernels ----------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _matvec(m, v, out):
    for i in range(4):
        out[i] = m[i, 0] * v[0] + m[i, 1] * v[1] + m[i, 2] * v[2] + m[i, 3] * v[3]


@numba.njit(cache=True, nogil=True)
def _mul2(a, b, out):
    out[0, 0] = a[0, 0] * b[0, 0] + a[0, 1] * b[1, 0]
    out[0, 1] = a[0, 0] * b[0, 1] + a[0, 1] * b[1, 1]
    out[1, 0] = a[1, 0] * b[0, 0] + a[1, 1] * b[1, 0]
    out[1, 1] = a[1, 0] * b[0, 1] + a[1, 1] * b[1, 1]


@numba.njit(cache=True, nogil=True)
def _physical_chunk(k0, m1, m2, m11, m22, m12, unmon, state, acc, noise, dt, stride,
                    out_i, out_s, k_out, record):
    """Advance a normalised state through ``noise.shape[0]`` Kraus steps.

    ``state`` holds Pauli coordinates.  Returns the next output index, or
    ``-1 - step`` on a positivity breach.
    """
    sq = math.sqrt(dt)
    rho = np.empty((2, 2), dtype=np.complex128)
    kk = np.empty((2, 2), dtype=np.complex128)
    tmp = np.empty((2, 2), dtype=np.complex128)
    new = np.empty((2, 2), dtype=np.complex128)
    extra = np.empty(4)
    k = k_out
    for n in range(noise.shape[0]):
        x, y, z = state[1], state[2], state[3]
        rad = math.sqrt(x * x + y * y + z * z)
        # velocities use the Bloch vector clamped into the unit ball
        scale = 1.0 / rad if rad > 1.0 else 1.0
        rho[0, 0] = 0.5 * (1.0 + z * scale)
        rho[1, 1] = 0.5 * (1.0 - z * scale)
        rho[0, 1] = 0.5 * (x - 1j * y) * scale
        rho[1, 0] = 0.5 * (x + 1j * y) * scale
        v1 = 2.0 * (m1[0, 0] * rho[0, 0] + m1[0, 1] * rho[1, 0]
                    + m1[1, 0] * rho[0, 1] + m1[1, 1] * rho[1, 1]).real
        v2 = 2.0 * (m2[0, 0] * rho[0, 0] + m2[0, 1] * rho[1, 0]
                    + m2[1, 0] * rho[0, 1] + m2[1, 1] * rho[1, 1]).real
        di1 = v1 * dt + sq * noise[n, 0]
        di2 = v2 * dt + sq * noise[n, 1]
        c11 = 0.5 * (di1 * di1 - dt)
        c22 = 0.5 * (di2 * di2 - dt)
        c12 = 0.5 * di1 * di2
        for i in range(2):
            for j in range(2):
                kk[i, j] = (k0[i, j] + m1[i, j] * di1 + m2[i, j] * di2
                            + m11[i, j] * c11 + m22[i, j] * c22 + m12[i, j] * c12)
        # unclamped state for the propagation itself
        rho[0, 0] = 0.5 * (1.0 + z)
        rho[1, 1] = 0.5 * (1.0 - z)
        rho[0, 1] = 0.5 * (x - 1j * y)
        rho[1, 0] = 0.5 * (x + 1j * y)
        _mul2(kk, rho, tmp)
        for i in range(2):
            for j in range(2):
                rho[i, j] = np.conj(kk[j, i])
        _mul2(tmp, rho, new)
        for i in range(4):
            extra[i] = dt * (unmon[i, 0] + unmon[i, 1] * x + unmon[i, 2] * y + unmon[i, 3] * z)
        w = (new[0, 0] + new[1, 1]).real + extra[0]
        state[1] = (2.0 * new[1, 0].real + extra[1]) / w
        state[2] = (2.0 * new[1, 0].imag + extra[2]) / w
        state[3] = ((new[0, 0] - new[1, 1]).real + extra[3]) / w
        if math.sqrt(state[1] ** 2 + state[2] ** 2 + state[3] ** 2) > 1.0 + 2.0 * 1e-4:
            return -1 - n
        acc[0] += di1
        acc[1] += di2
        acc[2] += 1.0
        if acc[2] >= stride:
            out_i[k, 0] = acc[0] / (stride * dt)
            out_i[k, 1] = acc[1] / (stride * dt)
            acc[0] = 0.0
            acc[1] = 0.0
            acc[2] = 0.0
            k += 1
            if record:
                for i in range(4):
                    out_s[k, i] = state[i]
    return k


@numba.njit(cache=True, nogil=True)
def _reference_chunk(gen, r1, r2, state, acc, noise, dt, stride,
                     out_i, out_w, out_s, k0, record):
    """Advance an unnormalised state; ``-1 - step`` flags a non-positive weight."""
    sq = math.sqrt(dt)
    drift = np.empty(4)
    a1 = np.empty(4)
    a2 = np.empty(4)
    k = k0
    for n in range(noise.shape[0]):
        dw1 = sq * noise[n, 0]
        dw2 = sq * noise[n, 1]
        _matvec(gen, state, drift)
        _matvec(r1, state, a1)
        _matvec(r2, state, a2)
        for i in range(4):
            state[i] += drift[i] * dt + a1[i] * dw1 + a2[i] * dw2
        if state[0] <= 0.0:
            return -1 - n
        acc[0] += dw1
        acc[1] += dw2
        acc[2] += 1.0
        if acc[2] >= stride:
            out_i[k, 0] = acc[0] / (stride * dt)
            out_i[k, 1] = acc[1] / (stride * dt)
            acc[0] = 0.0
            acc[1] = 0.0
            acc[2] = 0.0
            k += 1
            out_w[k] = state[0]
            if record:
                for i in range(4):
                    out_s[k, i] = state[i]
    return k


class _Run:
    def __init__(self, p, cfg, measure):
        self.p, self.cfg, self.measure = p, cfg, measure
        m1, m2 = noise_ops(p)
        if measure == "physical":
            h, unmonitored = lindblad_form(p)
            dt = cfg.dt
            k0 = qops.IDENTITY - (1j * h + 0.5 * sum(qops.dagger(a) @ a for a in (*unmonitored, m1, m2))) * dt
            self.kraus = (
                k0, m1, m2, m1 @ m1, m2 @ m2, m1 @ m2 + m2 @ m1,
                sum(qops.sandwich(a) for a in unmonitored),
            )
        else:
            self.gen = np.ascontiguousarray(feedback_liouvillian(p))
            self.r1 = np.ascontiguousarray(qops.rmap(m1))
            self.r2 = np.ascontiguousarray(qops.rmap(m2))
        n_out, n = cfg.n_out, cfg.n_traj
        self.times = np.arange(n_out + 1) * cfg.output_dt
        self.currents = np.zeros((n, n_out, 2))
        self.weights = np.ones((n, n_out + 1)) if measure == "reference" else None
        self.states = np.zeros((n, n_out + 1, 4)) if cfg.record_states else None
        self.r0 = np.array([1.0, *cfg.rho0])

    def __call__(self, index):
        cfg = self.cfg
        rng = trajectory_rng(cfg.seed, index)
        state = self.r0.copy()
        acc = np.zeros(3)
        out_i = self.currents[index]
        out_s = self.states[index] if self.states is not None else np.zeros((1, 4))
        if self.states is not None:
            out_s[0] = state
        stride = cfg.record_every
        chunk = stride * max(1, CHUNK_STEPS // stride)
        k = 0
        done = 0
        while done < cfg.n_steps:
            m = min(chunk, cfg.n_steps - done)
            noise = rng.standard_normal((m, 2))
            if self.measure == "physical":
                k_new = _physical_chunk(*self.kraus, state, acc, noise,
                                        cfg.dt, stride, out_i, out_s, k, self.states is not None)
            else:
                k_new = _reference_chunk(self.gen, self.r1, self.r2, state, acc, noise,
                                         cfg.dt, stride, out_i, self.weights[index], out_s,
                                         k, self.states is not None)
            if k_new < 0:
                t = (done + (-1 - k_new)) * cfg.dt
                if self.measure == "physical":
                    raise PositivityBreach(
                        f"trajectory {index}: state eigenvalue below -{POSITIVITY_TOL} "
                        f"at t={t:.6g}; reduce dt"
                    )
                raise PositivityBreach(f"trajectory {index}: non-positive weight at t={t:.6g}")
            k = k_new
            done += m

    def run(self, n_workers):
        n = self.cfg.n_traj
        n_workers = n_workers or os.cpu_count() or 1
        if n_workers == 1 or n == 1:
            for i in range(n):
                self(i)
        else:
            with ThreadPoolExecutor(max_workers=min(n_workers, n)) as pool:
                list(pool.map(self, range(n)))
        return TrajectoryEnsemble(
            self.times, self.currents, self.weights, self.states,
            self.measure, self.p, self.cfg,
        )


def weight_second_moment(p, t, rho0=(0.0, 0.0, -1.0)):
    """Exact ``E[(Tr sigma_t)^2]`` under the reference measure.

    ``sigma (x) sigma`` obeys the deterministic linear equation with generator
    ``G (x) 1 + 1 (x) G + sum_j R_j (x) R_j``, so the variance of the weights
    follows from one 16x16 matrix exponential.  Sample variances of the
    log-normal-like weights badly underestimate it at large times.
    """
    gen = feedback_liouvillian(p)
    eye = np.eye(4)
    g2 = np.kron(gen, eye) + np.kron(eye, gen)
    for m in noise_ops(p):
        r = qops.rmap(m)
        g2 += np.kron(r, r)
    r0 = np.array([1.0, *rho0])
    return float((qops.expm(g2, t) @ np.kron(r0, r0))[0])


def simulate_reference(p, cfg, n_workers=None):
    """Linear equation under the reference measure; currents are pure white noise.

    ``weights`` holds ``Tr sigma_t``, the density of the physical law of the
    record with respect to the reference law.
    """
    check_step(p, cfg)
    return _Run(p, cfg, "reference").run(n_workers)


def simulate_physical(p, cfg, n_workers=None):
    """Normalised equation under the physical measure.

    Raises
    ------
    PositivityBreach
        If a state eigenvalue drops below ``-1e-4``.
    """
    check_step(p, cfg)
    return _Run(p, cfg, "physical").run(n_workers)
