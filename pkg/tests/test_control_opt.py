import math
import warnings

import numpy as np
import pytest

from fluorospec import config, control_opt, spectrum
from fluorospec.control_opt import ObjectiveSpec
from fluorospec.exceptions import BudgetExhausted, ValidationError


def base(name="fig1_case1"):
    return config.preset(name).params


def test_objective_spec_validation():
    with pytest.raises(ValidationError):
        ObjectiveSpec("maximise")
    with pytest.raises(ValidationError):
        ObjectiveSpec("min-over-window", window=(1, -1))
    assert ObjectiveSpec("min-over-window", window=(0, 1), n_points=3).grid.tolist() == [0, 0.5, 1]


def test_objective_kinds():
    p = base()
    assert control_opt.objective(p, ObjectiveSpec(mu_target=0.3)) == spectrum.s_inel(p, 0.3)
    low = control_opt.objective(p, ObjectiveSpec("min-over-window"))
    assert low == pytest.approx(spectrum.squeezing_report(p, ObjectiveSpec().grid).min_value)
    assert control_opt.objective(base("fig3_nofeedback"), ObjectiveSpec("fwhm")) == pytest.approx(1.0)


def test_free_parameter_checks():
    spec = ObjectiveSpec()
    with pytest.raises(ValueError, match="apparatus"):
        control_opt.optimize(base(), {"alpha1_abs": (0, 0.6)}, spec)
    with pytest.raises(ValueError):
        control_opt.optimize(base(), {"omega": (0, 1)}, spec)
    with pytest.raises(ValueError):
        control_opt.optimize(base(), {"c": (1, 0)}, spec)
    with pytest.raises(ValueError):
        control_opt.optimize(base(), {}, spec)


def test_one_dimensional_drive_optimum():
    res = control_opt.optimize(base(), {"omega_rabi": (0.01, 3.0)}, ObjectiveSpec())
    assert res.converged
    assert res.best_params.omega_rabi == pytest.approx(0.2976, abs=2e-3)
    assert res.best_value == min(v for _, v in res.trace)


def test_same_seed_same_result():
    args = (base(), {"omega_rabi": (0.01, 3.0), "c": (-0.3, 0.3)}, ObjectiveSpec())
    a = control_opt.optimize(*args, restarts=3, seed=4)
    b = control_opt.optimize(*args, restarts=3, seed=4)
    assert a.best_params == b.best_params and a.trace == b.trace


def test_feedback_improves_on_drive_alone():
    p = base().replace(theta1=math.pi / 2, phi=0.0)
    one = control_opt.optimize(p, {"omega_rabi": (0.01, 3.0)}, ObjectiveSpec())
    two = control_opt.optimize(p, {"omega_rabi": (0.01, 3.0), "c": (-0.5, 0.5)}, ObjectiveSpec())
    assert two.best_value < one.best_value - 0.03
    assert two.best_params.c == pytest.approx(0.0896, abs=2e-3)


def test_narrowest_line_at_half_the_channel_amplitude():
    p = base("fig3_nofeedback")
    res = control_opt.optimize(p, {"c": (0.0, 0.6)}, ObjectiveSpec("fwhm"), restarts=3)
    assert res.best_params.c == pytest.approx(p.alpha1_abs / 2, abs=1e-4)
    assert res.best_value == pytest.approx(0.55, abs=1e-6)


def test_angles_wrap_periodically():
    res = control_opt.optimize(base("fig1_case3"), {"theta2": (0.0, 2 * math.pi)},
                               ObjectiveSpec(), restarts=2)
    assert 0 <= res.best_params.theta2 < 2 * math.pi
    # sigma_{theta + pi} = -sigma_theta leaves the spectrum unchanged
    assert res.best_params.theta2 % math.pi == pytest.approx(math.pi / 2, abs=1e-3)


def test_budget_exhausted_warning():
    with pytest.warns(BudgetExhausted):
        res = control_opt.optimize(base(), {"omega_rabi": (0.01, 3), "c": (-0.5, 0.5),
                                            "delta_omega": (-2, 2)},
                                   ObjectiveSpec(), budget=50, restarts=1)
    assert not res.converged


def test_grid_scan_agrees_with_optimizer():
    axis = np.linspace(0.01, 1.0, 100)
    scan = control_opt.grid_scan(base(), {"omega_rabi": axis}, ObjectiveSpec())
    assert abs(scan.argmin()["omega_rabi"] - 0.2976) <= axis[1] - axis[0]
    assert scan.rows().shape == (100, 2)


def test_grid_scan_two_dimensional_and_failures():
    scan = control_opt.grid_scan(base("fig3_nofeedback"),
                                 {"c": [0.0, 0.3354], "omega_rabi": [0.0, 2.0]},
                                 ObjectiveSpec("fwhm"))
    assert scan.values.shape == (2, 2)
    # without drive or feedback the atom stays dark and there is no peak;
    # fed-back current noise alone already excites it
    assert np.isnan(scan.values[0, 0])
    assert scan.values[1, 0] == spectrum.fwhm(base("fig3_nofeedback").replace(c=0.3354, omega_rabi=0.0))
    i, j = np.unravel_index(np.nanargmin(scan.values), (2, 2))
    assert scan.argmin() == {"c": [0.0, 0.3354][i], "omega_rabi": [0.0, 2.0][j]}
    assert scan.min() == np.nanmin(scan.values)
    with pytest.raises(ValueError):
        control_opt.grid_scan(base(), {"c": np.zeros(2000), "phi": np.zeros(1000)}, ObjectiveSpec())
    with pytest.raises(ValueError):
        control_opt.grid_scan(base(), {"c": [0], "phi": [0], "theta1": [0]}, ObjectiveSpec())


def test_objective_examples():
    flat = base().replace(alpha2_abs=0.0)
    for spec in (ObjectiveSpec(), ObjectiveSpec("min-over-window"), ObjectiveSpec(mu_target=2.0)):
        assert control_opt.objective(flat, spec) == 1.0
    assert control_opt.objective(base(), ObjectiveSpec()) < 1
    p2 = base("fig1_case2")
    grid = ObjectiveSpec("min-over-window").grid
    values = spectrum.s_inel_grid(p2, grid).s_inel
    assert abs(abs(grid[np.argmin(values)]) - 2.5) <= 0.2


def test_feedback_cannot_do_worse_than_set_one():
    p3 = base("fig1_case3")
    res = control_opt.optimize(p3, {"omega_rabi": (0.01, 3.0), "c": (-1.0, 1.0)}, ObjectiveSpec())
    assert res.best_value <= spectrum.s_inel(base(), 0.0)


def test_minimising_over_feedback_strength_terminates():
    res = control_opt.optimize(base("fig3_nofeedback"), {"c": (-1.0, 1.0)}, ObjectiveSpec())
    assert res.converged and -1 <= res.best_params.c <= 1


def test_single_point_grid():
    p = base()
    scan = control_opt.grid_scan(p, {"c": [0.05]}, ObjectiveSpec())
    assert scan.values.tolist() == [control_opt.objective(p.replace(c=0.05), ObjectiveSpec())]


def test_grid_scan_examples():
    axis = np.linspace(0.05, 1.0, 96)
    scan = control_opt.grid_scan(base(), {"omega_rabi": axis}, ObjectiveSpec())
    res = control_opt.optimize(base(), {"omega_rabi": (0.01, 3.0)}, ObjectiveSpec())
    assert abs(scan.argmin()["omega_rabi"] - res.best_params.omega_rabi) <= axis[1] - axis[0]
    p = base("fig3_nofeedback")
    c_axis = np.linspace(0.0, 0.6, 61)
    widths = control_opt.grid_scan(p, {"c": c_axis}, ObjectiveSpec("fwhm"))
    assert abs(widths.argmin()["c"] - p.alpha1_abs / 2) <= c_axis[1] - c_axis[0]
