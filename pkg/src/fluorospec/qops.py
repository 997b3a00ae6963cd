"""Two-level operator algebra and superoperators in the Pauli basis.

Operators are plain ``(2, 2)`` complex arrays in the basis ``(|e>, |g>)``,
so that ``sigma_z = diag(1, -1)``, ``P_plus = |e><e|`` and
``sigma_minus = |g><e|``.

Superoperators that preserve Hermiticity are stored as real ``(4, 4)``
matrices acting on the coordinates ``(w, x, y, z)`` of

    rho = (w I + x sigma_x + y sigma_y + z sigma_z) / 2,

i.e. ``w = Tr rho`` and ``x = Tr(sigma_x rho)`` etc.  A generator is trace
preserving exactly when its first row vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
P_PLUS = np.array([[1, 0], [0, 0]], dtype=complex)
P_MINUS = np.array([[0, 0], [0, 1]], dtype=complex)

PAULI_BASIS = (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_TOL = 1e-9
BLOCH_TOL = 1e-9


def dagger(a):
    return np.conj(np.transpose(a))


def is_hermitian(a, tol=HERMITIAN_TOL):
    a = np.asarray(a, dtype=complex)
    scale = max(np.linalg.norm(a, 2), 1.0)
    return np.linalg.norm(a - dagger(a), 2) <= tol * scale


def sigma_phi(phi):
    """Return ``cos(phi) sigma_x + sin(phi) sigma_y``.

    Built as ``exp(i phi) sigma_- + exp(-i phi) sigma_+``; Hermitian and
    unitary for every real angle.
    """
    return np.exp(1j * phi) * SIGMA_MINUS + np.exp(-1j * phi) * SIGMA_PLUS


# -- coordinates ------------------------------------------------------------

def to_coords(op):
    """Pauli coordinates ``(Tr op, Tr sx op, Tr sy op, Tr sz op)`` of a Hermitian operator."""
    op = np.asarray(op, dtype=complex)
    return np.array([np.trace(b @ op).real for b in PAULI_BASIS])


def from_coords(v):
    w, x, y, z = v
    return 0.5 * (w * IDENTITY + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)


def superop(fn):
    """Real 4x4 representation of a Hermiticity-preserving linear map ``fn``."""
    mat = np.empty((4, 4))
    for j, b in enumerate(PAULI_BASIS):
        mat[:, j] = to_coords(fn(0.5 * b))
    return mat


def apply(g, op):
    """Apply a superoperator matrix to a Hermitian operator."""
    return from_coords(g @ to_coords(op))


def is_trace_preserving(g, tol=TRACE_TOL):
    g = np.asarray(g, dtype=float)
    return bool(np.all(np.abs(g[0]) <= tol * max(1.0, np.abs(g).max())))


# -- elementary maps --------------------------------------------------------

def rmap(a):
    """The map ``rho -> a rho + rho a^dagger``."""
    a = np.asarray(a, dtype=complex)
    ad = dagger(a)
    return superop(lambda r: a @ r + r @ ad)


def commutator_map(h):
    """The Hamiltonian map ``rho -> -i [h, rho]`` for Hermitian ``h``."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("commutator_map needs a Hermitian operator")
    return superop(lambda r: -1j * (h @ r - r @ h))


def dissipator(a):
    """Lindblad dissipator ``rho -> a rho a^dag - {a^dag a, rho}/2``."""
    a = np.asarray(a, dtype=complex)
    ad = dagger(a)
    ada = ad @ a
    return superop(lambda r: a @ r @ ad - 0.5 * (ada @ r + r @ ada))


def sandwich(a):
    """The map ``rho -> a rho a^dagger``."""
    a = np.asarray(a, dtype=complex)
    ad = dagger(a)
    return superop(lambda r: a @ r @ ad)


def anticommutator(b):
    """The map ``rho -> {b, rho}`` for Hermitian ``b``."""
    b = np.asarray(b, dtype=complex)
    return superop(lambda r: b @ r + r @ b)


def expm(g, t=1.0):
    """Propagator ``exp(t g)`` of a generator ``g``.

    Padé scaling and squaring via :func:`scipy.linalg.expm`.
    """
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    return scipy.linalg.expm(t * np.asarray(g, dtype=float))


# -- states -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class State2:
    """A validated 2x2 density matrix.

    Parameters
    ----------
    matrix : array_like, shape (2, 2)
        Hermitian, unit trace, eigenvalues not below ``-eig_tol``.
    eig_tol : float
        Tolerance on negative eigenvalues.
    """

    matrix: np.ndarray
    eig_tol: float = EIGEN_TOL

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2) or not np.all(np.isfinite(m)):
            raise ValueError("a state must be a finite 2x2 matrix")
        if not is_hermitian(m):
            raise ValueError("state is not Hermitian")
        if abs(np.trace(m) - 1) > TRACE_TOL:
            raise ValueError(f"state trace {np.trace(m).real!r} differs from 1")
        if np.linalg.eigvalsh(m).min() < -self.eig_tol:
            raise ValueError("state has a negative eigenvalue")
        m = 0.5 * (m + dagger(m))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def bloch(self):
        return to_bloch(self)

    @property
    def coords(self):
        return to_coords(self.matrix)

    @classmethod
    def from_bloch(cls, b):
        return from_bloch(b)

    @classmethod
    def ground(cls):
        return cls(P_MINUS)

    @classmethod
    def excited(cls):
        return cls(P_PLUS)

    def expect(self, op):
        return np.trace(np.asarray(op) @ self.matrix)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __repr__(self):
        x, y, z = self.bloch
        return f"State2(bloch=({x:.6g}, {y:.6g}, {z:.6g}))"


def to_bloch(s):
    """Bloch vector ``(<sx>, <sy>, <sz>)`` of a state or density matrix."""
    m = s.matrix if isinstance(s, State2) else np.asarray(s, dtype=complex)
    return to_coords(m)[1:]


def from_bloch(b):
    """State with the given Bloch vector; rejects ``|b| > 1 + 1e-9``."""
    b = np.asarray(b, dtype=float)
    if b.shape != (3,):
        raise ValueError("Bloch vector must have three components")
    if np.linalg.norm(b) > 1 + BLOCH_TOL:
        raise ValueError(f"Bloch vector norm {np.linalg.norm(b)!r} exceeds 1")
    return State2(from_coords((1.0, *b)))
