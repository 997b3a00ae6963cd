"""Tuning the control parameters for squeezing or line narrowing.

Objectives are evaluated on the closed-form spectrum.  :func:`optimize`
runs a box-constrained Nelder-Mead simplex (``scipy.optimize.minimize``)
from a scrambled Halton sequence of starting points; :func:`grid_scan`
is the exhaustive counterpart used to check it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
from scipy.stats import qmc

from . import spectrum
from .exceptions import BudgetExhausted, NotUnimodal, SingularDynamics, ValidationError
from .model import ANGLE_NAMES, PARAM_NAMES

OBJECTIVE_KINDS = ("value-at-mu", "min-over-window", "fwhm")
APPARATUS = ("alpha1_abs", "alpha2_abs")
XATOL = 1e-6
SIMPLEX_STEP = 0.05


@dataclass(frozen=True)
class ObjectiveSpec:
    """What to minimise.

    ``value-at-mu`` is ``s_inel(mu_target)``; ``min-over-window`` is the
    minimum of ``s_inel`` over ``n_points`` equally spaced frequencies in
    ``window``; ``fwhm`` is the width of the inelastic peak.
    """

    kind: str = "value-at-mu"
    mu_target: float = 0.0
    window: tuple = (-4.0, 4.0)
    n_points: int = 801

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValidationError(f"unknown objective kind {self.kind!r}")
        lo, hi = self.window
        if not lo < hi:
            raise ValidationError("objective window is empty")
        if self.n_points < 2:
            raise ValidationError("window needs at least two points")

    @property
    def grid(self):
        return np.linspace(*self.window, self.n_points)


def objective(p, spec):
    if spec.kind == "value-at-mu":
        return spectrum.s_inel(p, spec.mu_target)
    if spec.kind == "min-over-window":
        return float(spectrum.s_inel_grid(p, spec.grid).s_inel.min())
    return spectrum.fwhm(p)


@dataclass
class OptimResult:
    best_params: object
    best_value: float
    trace: list = field(repr=False)
    converged: bool
    restarts_used: int

    @property
    def n_evals(self):
        return len(self.trace)


class _Problem:
    """Maps scaled coordinates to parameter sets and records every evaluation."""

    def __init__(self, base, free, spec, free_apparatus):
        if not free:
            raise ValueError("at least one free parameter is required")
        for name, (lo, hi) in free.items():
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown parameter {name!r}")
            if name in APPARATUS and not free_apparatus:
                raise ValueError(f"{name} describes the apparatus; pass free_apparatus=True")
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad bounds for {name}: {(lo, hi)!r}")
        self.base, self.spec = base, spec
        self.names = list(free)
        self.lo = np.array([free[n][0] for n in self.names], dtype=float)
        self.width = np.array([free[n][1] - free[n][0] for n in self.names], dtype=float)
        self.periodic = np.array([n in ANGLE_NAMES for n in self.names])
        self.trace = []

    def values(self, u):
        x = self.lo + np.asarray(u) * self.width
        # angles wrap onto one period starting at the lower bound
        x = np.where(self.periodic, self.lo + np.mod(x - self.lo, 2 * math.pi), x)
        return dict(zip(self.names, (float(v) for v in x)))

    def params(self, values):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return self.base.replace(**values)

    def __call__(self, u):
        values = self.values(u)
        try:
            value = objective(self.params(values), self.spec)
        except (ValidationError, SingularDynamics, NotUnimodal):
            value = math.inf
        self.trace.append((values, value))
        return value

    @property
    def bounds(self):
        lb = np.where(self.periodic, -np.inf, 0.0)
        ub = np.where(self.periodic, np.inf, 1.0)
        return scipy.optimize.Bounds(lb, ub)

    def simplex(self, u0):
        d = u0.size
        sim = np.tile(u0, (d + 1, 1))
        for i in range(d):
            step = SIMPLEX_STEP if u0[i] + SIMPLEX_STEP <= 1 or self.periodic[i] else -SIMPLEX_STEP
            sim[i + 1, i] += step
        return sim


def optimize(base, free, spec, budget=400, restarts=8, seed=0, free_apparatus=False,
             screen_per_dim=64):
    """Multistart Nelder-Mead over the free parameters.

    Parameters
    ----------
    base : PhysParams
        Values of every parameter that is not optimised.
    free : dict
        ``name -> (lower, upper)``.  Angles are wrapped periodically instead
        of being clipped; the bounds then only set where starts are drawn.
    spec : ObjectiveSpec
    budget : int
        Maximum objective evaluations per restart (at least 50).
    restarts : int
        Number of simplex runs.  They start from the best points of a
        scrambled Halton sample of ``screen_per_dim`` points per free
        parameter (never fewer than ``restarts``).
    seed : int
        Seed of the scrambling; fixes the result completely.

    Returns
    -------
    OptimResult
        ``converged`` is false (and a :class:`BudgetExhausted` warning is
        issued) when the best restart ran out of budget before its simplex
        shrank below ``1e-6`` in scaled coordinates.
    """
    if budget < 50:
        raise ValueError("budget must allow at least 50 evaluations per restart")
    if restarts < 1:
        raise ValueError("need at least one restart")
    prob = _Problem(base, dict(free), spec, free_apparatus)
    d = len(prob.names)
    sample = qmc.Halton(d, scramble=True, seed=seed).random(max(restarts, screen_per_dim * d))
    screened = np.array([prob(u) for u in sample])
    starts = sample[np.argsort(screened, kind="stable")[:restarts]]
    best = None
    for u0 in starts:
        res = scipy.optimize.minimize(
            prob, u0, method="Nelder-Mead", bounds=prob.bounds,
            options=dict(maxfev=budget, xatol=XATOL, fatol=math.inf,
                         initial_simplex=prob.simplex(u0)),
        )
        if best is None or res.fun < best.fun:
            best = res
    values = prob.values(best.x)
    params = prob.params(values)
    converged = bool(best.status == 0)
    if not converged:
        warnings.warn("optimisation stopped on its evaluation budget", BudgetExhausted, stacklevel=2)
    return OptimResult(params, objective(params, spec), prob.trace, converged, restarts)


@dataclass
class GridScan:
    """Objective values on a one- or two-parameter grid (``values[i, j]`` row-major)."""

    names: list
    axes: list
    values: np.ndarray

    def argmin(self):
        idx = np.unravel_index(np.nanargmin(self.values), self.values.shape)
        return {n: float(ax[i]) for n, ax, i in zip(self.names, self.axes, idx)}

    def min(self):
        return float(np.nanmin(self.values))

    def rows(self):
        """Flattened table rows ``(*parameter values, objective)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values.ravel()]
        return np.column_stack(cols)


def grid_scan(base, grids, spec):
    """Evaluate the objective on every point of the given grids.

    Points where the objective is undefined (singular dynamics, no single
    peak, invalid parameters) are stored as NaN.
    """
    if not 1 <= len(grids) <= 2:
        raise ValueError("grid_scan takes one or two parameters")
    names = list(grids)
    for n in names:
        if n not in PARAM_NAMES:
            raise ValueError(f"unknown parameter {n!r}")
    axes = [np.atleast_1d(np.asarray(grids[n], dtype=float)) for n in names]
    shape = tuple(a.size for a in axes)
    if math.prod(shape) > 10**6:
        raise ValueError("grid has more than 10^6 points")
    values = np.empty(shape)
    for idx in np.ndindex(*shape):
        point = {n: float(ax[i]) for n, ax, i in zip(names, axes, idx)}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                p = base.replace(**point)
            values[idx] = objective(p, spec)
        except (ValidationError, SingularDynamics, NotUnimodal):
            values[idx] = np.nan
    return GridScan(names, axes, values)
