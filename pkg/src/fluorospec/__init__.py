"""Homodyne-feedback control of resonance fluorescence from a two-level atom.

Closed-form and Monte Carlo spectra of the unmonitored fluorescence channel,
quantum-trajectory simulation of the monitored atom, and tuning of the
control parameters for squeezing.
"""

from .control_opt import ObjectiveSpec, OptimResult, grid_scan, optimize
from .exceptions import (
    BudgetExhausted,
    InsufficientWindow,
    NotUnimodal,
    ParseError,
    PositivityBreach,
    QuadratureFailure,
    SingularDynamics,
    StepSizeWarning,
    ValidationError,
)
from .model import (
    PhysParams,
    a_matrix,
    equilibrium,
    feedback_liouvillian,
    liouvillian,
    t_vector,
)
from .qops import State2
from .spectrum import (
    SpectrumResult,
    elastic_line,
    fwhm,
    heisenberg_product,
    mc_spectrum,
    s_inel,
    s_inel_grid,
    s_inel_via_autocorr,
    squeezing_report,
)
from .trajectories import SimConfig, TrajectoryEnsemble, simulate_physical, simulate_reference

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted", "InsufficientWindow", "NotUnimodal", "ObjectiveSpec", "OptimResult",
    "ParseError", "PhysParams", "PositivityBreach", "QuadratureFailure", "SimConfig",
    "SingularDynamics", "SpectrumResult", "State2", "StepSizeWarning", "TrajectoryEnsemble",
    "ValidationError", "a_matrix", "elastic_line", "equilibrium", "feedback_liouvillian",
    "fwhm", "grid_scan", "heisenberg_product", "liouvillian", "mc_spectrum", "optimize",
    "s_inel", "s_inel_grid", "s_inel_via_autocorr", "simulate_physical",
    "simulate_reference", "squeezing_report", "t_vector",
]
