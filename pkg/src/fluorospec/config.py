"""Run configuration: key-value text format and figure presets.

Format
------
One ``key = value`` assignment per line; ``#`` starts a comment.  Values
are numbers or arithmetic expressions in ``pi`` and ``sqrt`` (``pi/2``,
``-pi/2``, ``sqrt(0.45)/2``).  Angles are in radians.  Recognised keys and
their defaults::

    gamma = 1           omega_rabi = 0      delta_omega = 0
    n_bar = 0           k_d = 0             alpha1_sq = 0
    alpha2_sq = 0       theta1 = 0          theta2 = 0
    c = 0               phi = 0
    dt = 0.001          t_final = 400       t_burn = 40
    n_traj = 400        seed = 0            record_every = 50
    mu_min = -4         mu_max = 4          mu_count = 801

Unknown keys, repeated keys and malformed lines raise :class:`ParseError`;
values breaking a parameter invariant raise :class:`ValidationError`.
"""

from __future__ import annotations

import ast
import dataclasses
import math
import operator
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ParseError, ValidationError
from .model import PhysParams
from .trajectories import SimConfig

PARAM_KEYS = ("gamma", "omega_rabi", "delta_omega", "n_bar", "k_d", "alpha1_sq",
              "alpha2_sq", "theta1", "theta2", "c", "phi")
SIM_KEYS = ("dt", "t_final", "t_burn", "n_traj", "seed", "record_every")
GRID_KEYS = ("mu_min", "mu_max", "mu_count")
INT_KEYS = ("n_traj", "seed", "record_every", "mu_count")
KEYS = PARAM_KEYS + SIM_KEYS + GRID_KEYS


@dataclass(frozen=True)
class GridSpec:
    mu_min: float = -4.0
    mu_max: float = 4.0
    mu_count: int = 801

    def __post_init__(self):
        if self.mu_count < 2:
            raise ValidationError("mu_count must be at least 2")
        if not self.mu_min < self.mu_max:
            raise ValidationError("mu_min must be below mu_max")

    @property
    def grid(self):
        return np.linspace(self.mu_min, self.mu_max, self.mu_count)


@dataclass(frozen=True)
class RunConfig:
    params: PhysParams
    sim: SimConfig = SimConfig()
    grid: GridSpec = GridSpec()
    output: Optional[str] = field(default=None, compare=False)
    fmt: str = field(default="csv", compare=False)
    preset: Optional[str] = field(default=None, compare=False)


_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval(node.operand))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id == "sqrt" and len(node.args) == 1 and not node.keywords):
        return math.sqrt(_eval(node.args[0]))
    raise ValueError("unsupported expression")


def parse_value(text):
    """Evaluate a numeric literal or a ``pi``/``sqrt`` expression."""
    try:
        value = _eval(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError, OverflowError) as exc:
        raise ValueError(f"cannot read value {text.strip()!r}") from exc
    return value


def parse_assignments(text):
    """Read ``key = value`` lines into a dict, with line-numbered errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, rhs = line.partition("=")
        key = key.strip()
        if key not in KEYS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        try:
            value = parse_value(rhs)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if key in INT_KEYS:
            if float(value) != int(value):
                raise ParseError(f"{key} must be an integer", lineno)
            value = int(value)
        else:
            value = float(value)
        values[key] = value
    return values


def build_config(values, preset=None):
    """Assemble a validated :class:`RunConfig` from a key-value mapping."""
    v = dict(values)
    a1, a2 = v.pop("alpha1_sq", 0.0), v.pop("alpha2_sq", 0.0)
    if a1 < 0 or a2 < 0:
        raise ValidationError("alpha1_sq and alpha2_sq must be non-negative")
    if a1 + a2 > 1 + 1e-12:
        raise ValidationError(f"alpha1_sq + alpha2_sq = {a1 + a2!r} exceeds 1")
    try:
        params = PhysParams.from_efficiencies(
            a1, a2, **{k: v[k] for k in PARAM_KEYS if k in v}
        )
        sim = SimConfig(**{k: v[k] for k in SIM_KEYS if k in v})
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    grid = GridSpec(**{k: v[k] for k in GRID_KEYS if k in v})
    return RunConfig(params, sim, grid, preset=preset)


def parse_config(text, base=None):
    """Parse configuration text; keys override ``base`` (a mapping) when given."""
    values = dict(base or {})
    values.update(parse_assignments(text))
    return build_config(values)


def config_values(cfg):
    """The key-value mapping that reproduces ``cfg``."""
    p = cfg.params
    out = {
        "gamma": p.gamma, "omega_rabi": p.omega_rabi, "delta_omega": p.delta_omega,
        "n_bar": p.n_bar, "k_d": p.k_d,
        "alpha1_sq": p.alpha1_abs**2, "alpha2_sq": p.alpha2_abs**2,
        "theta1": p.theta1, "theta2": p.theta2, "c": p.c, "phi": p.phi,
    }
    out.update({k: getattr(cfg.sim, k) for k in SIM_KEYS})
    out.update(dataclasses.asdict(cfg.grid))
    return out


def render(cfg):
    lines = [f"{k} = {v!r}" for k, v in config_values(cfg).items()]
    return "\n".join(lines) + "\n"


# -- presets ----------------------------------------------------------------

_FIGURES = dict(gamma=1.0, alpha1_sq=0.45, alpha2_sq=0.45, n_bar=0.0, k_d=0.0)

_FIG1 = {
    1: dict(delta_omega=0.0, c=0.0, omega_rabi=0.2976, theta2=-math.pi / 2),
    2: dict(delta_omega=1.8195, c=0.0, omega_rabi=1.7988, theta2=-0.1438),
    3: dict(delta_omega=0.0, c=0.0896, omega_rabi=0.2698, theta1=math.pi / 2,
            theta2=-math.pi / 2, phi=0.0),
    4: dict(delta_omega=1.6920, c=0.1326, omega_rabi=1.9276, theta1=2.8168,
            theta2=-0.0851, phi=1.2460),
}

_FIG3 = dict(omega_rabi=2.0, delta_omega=0.0, phi=math.pi / 2, theta1=math.pi, theta2=0.0)

PRESETS = {}
for _k, _v in _FIG1.items():
    PRESETS[f"fig1_case{_k}"] = {**_FIGURES, **_v}
    PRESETS[f"fig2_case{_k}"] = {**_FIGURES, **_v, "theta2": _v["theta2"] + math.pi / 2}
PRESETS["fig3_nofeedback"] = {**_FIGURES, **_FIG3, "c": 0.0}
PRESETS["fig3_feedback"] = {**_FIGURES, **_FIG3, "c": math.sqrt(0.45) / 2}
PRESETS["dark_state"] = {**_FIGURES, "omega_rabi": 0.0, "delta_omega": 0.0, "c": 0.0}


def preset_values(name):
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ValidationError(
            f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}"
        ) from None


def preset(name):
    return build_config(preset_values(name), preset=name)
