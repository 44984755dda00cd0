"""Experiment configuration: an INI file with one section per stage.

Schema (every key optional unless noted)::

    [profile]       coeffs = <2M+1 numbers, required>   period = 2*pi
    [illumination]  kappa (required)  theta = pi/12  n0 = 0 (auto)  H = h + 0.5
                    components = superposition | plane | evanescent
    [measurement]   h (required)  N = 256  kind = phase | phaseless
    [solver]        nx = 64  ny = 64  n_dtn = 0 (auto)  quad_order = 6  min_layer = 1e-3
    [inverse]       M = order of the truth profile  epsilon = 1e-3  it_max = 50  phi = 0
                    fd_step = 1e-4  initial_gamma = zeros  workers = 1
                    initial_step  shrink  c1  max_trials  expand  max_expansions
                    refine_iters  refine_xtol
    [noise]         delta = 0  seed = 1
    [output]        dir = out

Numbers may be written as ``pi/12``-style expressions built from ``pi``,
digits and ``+-*/()``.
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
from dataclasses import dataclass, field, fields, replace
from io import StringIO
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .forward import SolverConfig
from .geometry import GratingProfile
from .inverse import InverseConfig, LineSearchParams
from .synth import DataKind
from .wavefields import DEFAULT_THETA, Components, IlluminationSpec

PROFILE_M5 = (0, 0.2, 0.1, -0.2, -0.1, 0.1, -0.2, -0.1, -0.2, 0.2, -0.4)
PROFILE_M3 = (0, 0, 0.2, 0.1, 0, 0, 0.3)

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.USub: operator.neg, ast.UAdd: operator.pos, ast.Pow: operator.pow}


def parse_number(text: str) -> float:
    """Evaluate a small arithmetic expression such as ``pi/12`` or ``1e-3``."""
    def walk(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.operand))
        raise ValueError
    try:
        return float(walk(ast.parse(text.strip(), mode="eval").body))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot read {text!r} as a number") from None


def parse_vector(text: str) -> np.ndarray:
    items = text.replace(",", " ").replace("[", " ").replace("]", " ").split()
    return np.array([parse_number(t) for t in items], dtype=float)


@dataclass(frozen=True)
class ExperimentConfig:
    truth: GratingProfile
    spec: IlluminationSpec
    h: float
    n_points: int = 256
    kind: DataKind = DataKind.PHASE
    solver: SolverConfig = field(default_factory=SolverConfig)
    inverse: InverseConfig | None = None
    delta: float = 0.0
    seed: int | None = 1
    out_dir: Path = Path("out")
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", DataKind.parse(self.kind))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.inverse is None:
            object.__setattr__(self, "inverse", InverseConfig(M=self.truth.order))

    def validate(self) -> "ExperimentConfig":
        """Cross-section consistency; raises ConfigError before any solve."""
        if self.n_points < 1:
            raise ConfigError(f"N must be positive, got {self.n_points}")
        if not self.h < self.spec.H:
            raise ConfigError(f"measurement height h={self.h} must lie below the source height H={self.spec.H}")
        if not math.isclose(self.truth.period, self.spec.period):
            raise ConfigError("profile and illumination periods differ")
        top = self.truth.max_height()
        if self.h - top <= self.solver.min_layer:
            raise ConfigError(f"h={self.h} does not clear the profile maximum {top:.4f}; "
                              "the measurement line would cut the grating")
        n_dtn = self.solver.dtn_order(self.spec)
        if self.spec.components.evanescent and n_dtn < self.spec.n0:
            raise ConfigError(f"n_dtn={n_dtn} is below the evanescent order n0={self.spec.n0}")
        if 2 * n_dtn >= self.solver.nx:
            raise ConfigError(f"n_dtn={n_dtn} needs nx > {2 * n_dtn}")
        if self.delta < 0:
            raise ConfigError("noise level delta must be non-negative")
        return self

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else replace(self, seed=seed)

    def with_out(self, out_dir) -> "ExperimentConfig":
        return self if out_dir is None else replace(self, out_dir=Path(out_dir))

    def header(self) -> dict:
        """Every parameter, including the defaults chosen for unstated ones."""
        head = {"label": self.label or "custom", **self.spec.describe(), "h": self.h, "N": self.n_points,
                "kind": self.kind.value, "delta": self.delta, "seed": self.seed,
                "nx": self.solver.nx, "ny": self.solver.ny, "n_dtn": self.solver.dtn_order(self.spec),
                "M": self.inverse.M, "epsilon": self.inverse.epsilon, "it_max": self.inverse.it_max,
                "phi": self.inverse.phi, "fd_step": self.inverse.fd_step}
        return head

    # ------------------------------------------------------------------ INI I/O

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        return cls.from_parser(parser)

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser) -> "ExperimentConfig":
        known = {"profile", "illumination", "measurement", "solver", "inverse", "noise", "output"}
        unknown = set(parser.sections()) - known
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")

        def get(section, key, conv=parse_number, default=None, required=False):
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    return conv(raw)
                except ConfigError:
                    raise
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
            if required:
                raise ConfigError(f"missing required key [{section}] {key}")
            return default

        as_int = lambda s: int(parse_number(s))
        coeffs = get("profile", "coeffs", parse_vector, required=True)
        truth = GratingProfile(coeffs, get("profile", "period", default=2 * math.pi))
        h = get("measurement", "h", required=True)
        spec = IlluminationSpec.create(
            get("illumination", "kappa", required=True),
            get("illumination", "theta", default=DEFAULT_THETA),
            h=h, H=get("illumination", "H"), n0=get("illumination", "n0", as_int, 0) or None,
            period=truth.period, components=get("illumination", "components", Components.parse,
                                                Components.SUPERPOSITION))
        n_dtn = get("solver", "n_dtn", as_int, 0)
        solver = SolverConfig(n_dtn=n_dtn or None, nx=get("solver", "nx", as_int, 64),
                              ny=get("solver", "ny", as_int, 64), quad_order=get("solver", "quad_order", as_int, 6),
                              min_layer=get("solver", "min_layer", default=1e-3))
        ls_defaults = LineSearchParams()
        ls = LineSearchParams(**{
            f.name: get("inverse", f.name, as_int if isinstance(getattr(ls_defaults, f.name), int) else parse_number,
                        getattr(ls_defaults, f.name))
            for f in fields(LineSearchParams)})
        M = get("inverse", "M", as_int, truth.order)
        init = get("inverse", "initial_gamma", parse_vector)
        inverse = InverseConfig(M=M, epsilon=get("inverse", "epsilon", default=1e-3),
                                it_max=get("inverse", "it_max", as_int, 50), phi=get("inverse", "phi", default=0.0),
                                fd_step=get("inverse", "fd_step", default=1e-4), line_search=ls,
                                initial_gamma=init, workers=get("inverse", "workers", as_int, 1))
        seed_raw = get("noise", "seed", str, "1")
        seed = None if seed_raw.strip().lower() == "none" else as_int(seed_raw)
        return cls(truth, spec, h, n_points=get("measurement", "N", as_int, 256),
                   kind=get("measurement", "kind", DataKind.parse, DataKind.PHASE), solver=solver,
                   inverse=inverse, delta=get("noise", "delta", default=0.0), seed=seed,
                   out_dir=Path(get("output", "dir", str, "out")))

    def to_ini(self) -> str:
        """Serialize with all defaults resolved, so a run directory is self-describing."""
        vec = lambda a: " ".join(repr(float(v)) for v in a)
        ls = self.inverse.line_search
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser["profile"] = {"coeffs": vec(self.truth.coeffs), "period": repr(self.truth.period)}
        parser["illumination"] = {"kappa": repr(self.spec.kappa), "theta": repr(self.spec.theta),
                                  "n0": str(self.spec.n0), "H": repr(self.spec.H),
                                  "components": self.spec.components.value}
        parser["measurement"] = {"h": repr(self.h), "N": str(self.n_points), "kind": self.kind.value}
        parser["solver"] = {"nx": str(self.solver.nx), "ny": str(self.solver.ny),
                            "n_dtn": str(self.solver.dtn_order(self.spec)),
                            "quad_order": str(self.solver.quad_order), "min_layer": repr(self.solver.min_layer)}
        parser["inverse"] = {"M": str(self.inverse.M), "epsilon": repr(self.inverse.epsilon),
                             "it_max": str(self.inverse.it_max), "phi": repr(self.inverse.phi),
                             "fd_step": repr(self.inverse.fd_step), "initial_gamma": vec(self.inverse.start()),
                             "workers": str(self.inverse.workers),
                             **{f.name: repr(getattr(ls, f.name)) for f in fields(LineSearchParams)}}
        parser["noise"] = {"delta": repr(self.delta), "seed": "none" if self.seed is None else str(self.seed)}
        parser["output"] = {"dir": str(self.out_dir)}

        buf = StringIO()
        parser.write(buf)
        return buf.getvalue()


# ---------------------------------------------------------------------- presets

def _preset(label, coeffs, kappa, h, delta, kind, components="superposition") -> ExperimentConfig:
    truth = GratingProfile(coeffs)
    spec = IlluminationSpec.create(kappa, h=h, components=components)
    return ExperimentConfig(truth, spec, h, 256, kind, delta=delta, label=label)


FIGURES = {
    "4.1-PD1a": dict(coeffs=PROFILE_M5, kappa=1.0, h=1.0, delta=0.05, kind="phase"),
    "4.1-PD1b": dict(coeffs=PROFILE_M5, kappa=2.0, h=1.0, delta=0.05, kind="phase"),
    "4.1-PD2a": dict(coeffs=PROFILE_M5, kappa=3.0, h=0.8, delta=0.10, kind="phase"),
    "4.1-PD2b": dict(coeffs=PROFILE_M5, kappa=3.0, h=1.0, delta=0.10, kind="phase"),
    "4.1-PD2c": dict(coeffs=PROFILE_M5, kappa=3.0, h=1.2, delta=0.10, kind="phase"),
    "4.1-PD2d": dict(coeffs=PROFILE_M5, kappa=3.0, h=1.4, delta=0.10, kind="phase"),
    "4.2-abc-a": dict(coeffs=PROFILE_M3, kappa=1.0, h=0.8, delta=0.05, kind="phaseless"),
    "4.2-abc-b": dict(coeffs=PROFILE_M3, kappa=1.0, h=0.8, delta=0.10, kind="phaseless"),
    "4.2-abck2-a": dict(coeffs=PROFILE_M3, kappa=2.0, h=0.8, delta=0.05, kind="phaseless"),
    "4.2-abck2-b": dict(coeffs=PROFILE_M3, kappa=2.0, h=0.8, delta=0.10, kind="phaseless"),
    "4.2-abci-a": dict(coeffs=PROFILE_M3, kappa=2.0, h=0.8, delta=0.0, kind="phaseless", components="plane"),
    "4.2-abci-b": dict(coeffs=PROFILE_M3, kappa=2.0, h=0.8, delta=0.05, kind="phaseless", components="plane"),
    "4.2-abci1-a": dict(coeffs=PROFILE_M3, kappa=2.0, h=0.8, delta=0.0, kind="phaseless", components="evanescent"),
    "4.2-abci1-b": dict(coeffs=PROFILE_M3, kappa=2.0, h=0.8, delta=0.05, kind="phaseless", components="evanescent"),
}


def figure_config(figure_id: str) -> ExperimentConfig:
    """Preset experiment for a figure id, with declared defaults for theta, n0 and H."""
    try:
        params = FIGURES[figure_id]
    except KeyError:
        raise ConfigError(f"unknown figure id {figure_id!r}; valid ids: {', '.join(FIGURES)}") from None
    return _preset(figure_id, **params)
