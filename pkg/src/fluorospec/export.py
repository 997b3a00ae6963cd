"""File formats written by the command-line tools.

Every writer goes through :func:`atomic_write`, so a failed command never
leaves a partial file behind.

Spectrum table
    CSV with header ``mu,s_inel,stderr`` (``stderr`` empty for analytic
    results) or JSON lines with the same keys (``null`` for no stderr).
    A sidecar ``<path>.meta`` holds ``key = value`` lines with every
    physical parameter, the grid, the elastic line and the conventions.

Ensemble table
    One row per trajectory and output interval: ``time,traj,I1,I2,weight,x,y,z``.
    ``time`` is the end of the interval over which the currents are
    averaged; ``weight`` and the Bloch components refer to that time and
    are empty when not available.

Optimisation report
    ``key = value`` lines, plus a CSV trace ``eval_index,<free params...>,value``
    in ``<path>.trace.csv``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from contextlib import contextmanager
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .spectrum import ELASTIC_WEIGHT_FACTOR


def package_version():
    try:
        return version("fluorospec")
    except PackageNotFoundError:
        return "unknown"


@contextmanager
def atomic_write(path):
    """Open a temporary file next to ``path`` and move it into place on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def _json_num(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return float(x)


def write_rows(path, header, rows, fmt="csv"):
    with atomic_write(path) as fh:
        if fmt == "csv":
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_num(v) for v in row) + "\n")
        elif fmt == "json-lines":
            for row in rows:
                fh.write(json.dumps({k: _json_num(v) for k, v in zip(header, row)}) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")


def write_keyvalue(path, items):
    with atomic_write(path) as fh:
        for key, value in items.items():
            fh.write(f"{key} = {value}\n")


def read_keyvalue(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                key, _, value = line.partition("=")
                out[key.strip()] = value.strip()
    return out


def spectrum_metadata(result, params, extra=None):
    meta = {"provenance": result.provenance}
    for key, value in params.as_dict().items():
        meta[key] = repr(value)
    meta["alpha1_sq"] = repr(params.alpha1_abs**2)
    meta["alpha2_sq"] = repr(params.alpha2_abs**2)
    grid = np.asarray(result.mu_grid)
    meta["mu_min"] = repr(float(grid.min()))
    meta["mu_max"] = repr(float(grid.max()))
    meta["mu_count"] = str(grid.size)
    meta["elastic_mean"] = repr(float(result.elastic_mean))
    meta["elastic_weight"] = repr(float(result.elastic_weight))
    meta["elastic_convention"] = f"S_el(mu) = {ELASTIC_WEIGHT_FACTOR!r} * m^2 * delta(mu)"
    meta["shot_noise_floor"] = "1"
    meta["frequency_frame"] = "rotating; mu = 0 at the laser frequency"
    meta["code_version"] = package_version()
    meta.update(extra or {})
    return meta


def write_spectrum(path, result, params, fmt="csv", extra_meta=None):
    stderr = result.stderr if result.stderr is not None else [None] * len(result.mu_grid)
    rows = zip(result.mu_grid, result.s_inel, stderr)
    write_rows(path, ("mu", "s_inel", "stderr"), rows, fmt)
    write_keyvalue(f"{path}.meta", spectrum_metadata(result, params, extra_meta))


def ensemble_rows(ens):
    bloch = ens.bloch() if ens.states is not None else None
    for i in range(ens.n_traj):
        for k in range(ens.currents.shape[1]):
            w = ens.weights[i, k + 1] if ens.weights is not None else None
            xyz = bloch[i, k + 1] if bloch is not None else (None, None, None)
            yield (ens.times[k + 1], i, ens.currents[i, k, 0], ens.currents[i, k, 1], w, *xyz)


def write_ensemble(path, ens, fmt="csv"):
    header = ("time", "traj", "I1", "I2", "weight", "x", "y", "z")
    if fmt == "csv":
        # keep the trajectory index integral in the text output
        with atomic_write(path) as fh:
            fh.write(",".join(header) + "\n")
            for row in ensemble_rows(ens):
                fh.write(",".join([_num(row[0]), str(row[1])] + [_num(v) for v in row[2:]]) + "\n")
    else:
        write_rows(path, header, ensemble_rows(ens), fmt)


def write_optimization(path, result, free, extra=None):
    report = {"best_value": repr(result.best_value), "converged": str(result.converged).lower(),
              "restarts_used": str(result.restarts_used), "n_evals": str(result.n_evals)}
    for key, value in result.best_params.as_dict().items():
        report[f"best.{key}"] = repr(value)
    for name, (lo, hi) in free.items():
        report[f"free.{name}"] = f"{lo!r}:{hi!r}"
    report["code_version"] = package_version()
    report.update(extra or {})
    names = list(free)
    rows = ((i, *(vals[n] for n in names), value) for i, (vals, value) in enumerate(result.trace))
    with atomic_write(f"{path}.trace.csv") as fh:
        fh.write(",".join(["eval_index", *names, "value"]) + "\n")
        for row in rows:
            fh.write(",".join([str(row[0])] + [_num(v) for v in row[1:]]) + "\n")
    write_keyvalue(path, report)
