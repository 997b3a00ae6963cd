"""Command-line interface.

    fluorospec <spectrum|simulate|mc-spectrum|autocorr|optimize|validate>
               [--config FILE] [--preset NAME] [--out PATH]
               [--format csv|json-lines] [--compare-analytic] [--seed N]

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 optimisation budget exhausted (the best point found is still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
import warnings

import numpy as np

from . import config as cfgmod
from . import control_opt, export, spectrum, trajectories
from .exceptions import (
    BudgetExhausted,
    InsufficientWindow,
    NotUnimodal,
    ParseError,
    PositivityBreach,
    QuadratureFailure,
    SingularDynamics,
    ValidationError,
)
from .validation import run_validation

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_BUDGET = 0, 1, 2, 3
NUMERIC_ERRORS = (SingularDynamics, PositivityBreach, InsufficientWindow,
                  QuadratureFailure, NotUnimodal)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config(args):
    base = cfgmod.preset_values(args.preset) if args.preset else {}
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    cfg = cfgmod.parse_config(text, base=base)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=args.seed))
    return dataclasses.replace(cfg, output=args.out, fmt=args.format, preset=args.preset)


def _print_squeezing(p, grid):
    rep = spectrum.squeezing_report(p, grid)
    print(f"squeezing: squeezed={str(rep.squeezed).lower()}, "
          f"min={rep.min_value:.6f}, argmin={rep.argmin:.4f}")


def cmd_spectrum(cfg, args):
    p = cfg.params
    res = spectrum.s_inel_grid(p, cfg.grid.grid)
    print(f"elastic line: m={res.elastic_mean:.10g}, weight(2*pi*m^2)={res.elastic_weight:.10g}")
    _print_squeezing(p, cfg.grid.grid)
    if cfg.output:
        export.write_spectrum(cfg.output, res, p, cfg.fmt)
    return EXIT_OK


def _simulate(cfg):
    t0 = time.perf_counter()
    ens = trajectories.simulate_physical(cfg.params, cfg.sim)
    print(f"simulated {cfg.sim.n_traj} trajectories to t={cfg.sim.t_final:g} "
          f"(dt={cfg.sim.dt:g}) in {time.perf_counter() - t0:.1f} s")
    return ens


def cmd_simulate(cfg, args):
    ens = _simulate(cfg)
    if cfg.output:
        export.write_ensemble(cfg.output, ens, cfg.fmt)
    return EXIT_OK


def cmd_mc_spectrum(cfg, args):
    ens = _simulate(cfg)
    grid = cfg.grid.grid
    res = spectrum.mc_spectrum(ens, grid)
    print(f"elastic line (sample mean): m={res.elastic_mean:.6g}")
    if args.compare_analytic:
        analytic = spectrum.s_inel_grid(cfg.params, grid).s_inel
        z = (res.s_inel - analytic) / res.stderr
        print(f"{'mu':>10} {'mc':>12} {'analytic':>12} {'z-score':>9}")
        for row in zip(grid, res.s_inel, analytic, z):
            print("{:10.4f} {:12.6f} {:12.6f} {:9.3f}".format(*row))
        band = np.abs(grid) >= 0.2
        print(f"max |z| for |mu| >= 0.2: {np.abs(z[band]).max():.3f}")
    if cfg.output:
        export.write_spectrum(cfg.output, res, cfg.params, cfg.fmt,
                              {"n_traj": str(cfg.sim.n_traj), "seed": str(cfg.sim.seed),
                               "dt": repr(cfg.sim.dt), "t_final": repr(cfg.sim.t_final),
                               "t_burn": repr(cfg.sim.t_burn)})
    return EXIT_OK


def _range(text, what):
    try:
        lo, hi, n = (cfgmod.parse_value(v) for v in text.split(":"))
    except ValueError:
        raise ValidationError(f"{what} must look like START:STOP:COUNT") from None
    return np.linspace(lo, hi, int(n))


def cmd_autocorr(cfg, args):
    p = cfg.params
    lags = _range(args.lags, "--lags")
    m, _ = spectrum.elastic_line(p)
    cov = np.array([spectrum.stationary_autocovariance(p, t) for t in lags])
    header = ["tau", "autocov", "second_moment"]
    cols = [lags, cov, cov + m**2]
    if args.empirical:
        ens = _simulate(cfg)
        emp = spectrum.empirical_autocorr(ens, lags)
        header += ["second_moment_mc", "stderr"]
        cols += [emp.values, emp.stderr]
    print(f"mean current m={m:.10g}; C(0)={cov[0]:.10g}")
    if cfg.output:
        export.write_rows(cfg.output, header, zip(*cols), cfg.fmt)
    return EXIT_OK


def _free(specs):
    free = {}
    for item in specs:
        try:
            name, lo, hi = item.split(":")
            free[name] = (cfgmod.parse_value(lo), cfgmod.parse_value(hi))
        except ValueError:
            raise ValidationError(f"--free expects NAME:LO:HI, got {item!r}") from None
    if not free:
        raise ValidationError("optimize needs at least one --free NAME:LO:HI")
    return free


def _objective(text):
    kind, *rest = text.split(":")
    try:
        vals = [cfgmod.parse_value(v) for v in rest]
        if kind == "value-at-mu":
            return control_opt.ObjectiveSpec(kind, mu_target=vals[0] if vals else 0.0)
        if kind == "min-over-window":
            lo, hi, n = vals if vals else (-4.0, 4.0, 801)
            return control_opt.ObjectiveSpec(kind, window=(lo, hi), n_points=int(n))
        if kind == "fwhm" and not vals:
            return control_opt.ObjectiveSpec(kind)
    except (ValueError, IndexError):
        pass
    raise ValidationError(f"cannot read objective {text!r}")


def cmd_optimize(cfg, args):
    free = _free(args.free)
    spec = _objective(args.objective)
    p = cfg.params
    if args.grid is not None:
        grids = {n: np.linspace(lo, hi, args.grid) if args.grid > 1 else [getattr(p, n)]
                 for n, (lo, hi) in free.items()}
        scan = control_opt.grid_scan(p, grids, spec)
        best = scan.argmin()
        print("grid minimum: " + ", ".join(f"{k}={v:.6g}" for k, v in best.items())
              + f", value={scan.min():.10g}")
        if cfg.output:
            export.write_rows(cfg.output, [*scan.names, "value"], scan.rows(), cfg.fmt)
        return EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BudgetExhausted)
        res = control_opt.optimize(p, free, spec, budget=args.budget,
                                   restarts=args.restarts, seed=args.seed or 0)
    print("best: " + ", ".join(f"{n}={getattr(res.best_params, n):.6g}" for n in free)
          + f", value={res.best_value:.10g}, converged={str(res.converged).lower()}")
    if cfg.output:
        export.write_optimization(cfg.output, res, free, {"objective": args.objective})
    if any(issubclass(w.category, BudgetExhausted) for w in caught) or not res.converged:
        print("evaluation budget exhausted before convergence", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_validate(args):
    t0 = time.perf_counter()
    results = run_validation(seed=args.seed or 0, n_draws=args.draws)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    print(f"{len(results)} checks in {time.perf_counter() - t0:.1f} s")
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"first failing check: {failed[0].name}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "mc-spectrum": cmd_mc_spectrum,
    "autocorr": cmd_autocorr,
    "optimize": cmd_optimize,
}


def build_parser():
    parser = _Parser(prog="fluorospec", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=[*COMMANDS, "validate"])
    parser.add_argument("--config", help="key-value configuration file")
    parser.add_argument("--preset", help="figure preset: " + ", ".join(sorted(cfgmod.PRESETS)))
    parser.add_argument("--out", help="output path")
    parser.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    parser.add_argument("--compare-analytic", action="store_true",
                        help="mc-spectrum: print Monte Carlo vs closed form with z-scores")
    parser.add_argument("--seed", type=int, help="random seed (simulation, optimiser, validation)")
    parser.add_argument("--empirical", action="store_true",
                        help="autocorr: add Monte Carlo estimates")
    parser.add_argument("--lags", default="0:10:201", help="autocorr lag grid START:STOP:COUNT")
    parser.add_argument("--free", action="append", default=[], metavar="NAME:LO:HI",
                        help="optimize: free parameter and its box (repeatable)")
    parser.add_argument("--objective", default="value-at-mu:0",
                        help="value-at-mu[:MU] | min-over-window[:LO:HI:N] | fwhm")
    parser.add_argument("--grid", type=int, help="optimize: exhaustive scan with N points per parameter")
    parser.add_argument("--budget", type=int, default=400, help="evaluations per restart")
    parser.add_argument("--restarts", type=int, default=8)
    parser.add_argument("--draws", type=int, default=20, help="validate: random parameter draws")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if not (args.config or args.preset):
            raise ValidationError("give --config FILE and/or --preset NAME")
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except NUMERIC_ERRORS as exc:
        print(f"fluorospec: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, ValueError, OSError) as exc:
        # bad option values (unknown parameter names, empty boxes) land here too
        print(f"fluorospec: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
