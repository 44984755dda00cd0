"""Incident illumination, Rayleigh orders and the Dirichlet-to-Neumann map.

All fields are alpha-quasi-periodic in x with period ``period``. Traces on a
horizontal line ``y = height`` are stored as Fourier coefficients on the basis
``exp(i alpha_n x)``, ``alpha_n = alpha + 2 pi n / period``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, WoodAnomaly

TWO_PI = 2.0 * np.pi
DEFAULT_THETA = np.pi / 12
DEFAULT_SOURCE_OFFSET = 0.5


class Components(enum.Enum):
    PLANE_ONLY = "plane"
    EVANESCENT_ONLY = "evanescent"
    SUPERPOSITION = "superposition"

    @property
    def plane(self) -> bool:
        return self is not Components.EVANESCENT_ONLY

    @property
    def evanescent(self) -> bool:
        return self is not Components.PLANE_ONLY

    @classmethod
    def parse(cls, value) -> "Components":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "plane": cls.PLANE_ONLY, "plane_only": cls.PLANE_ONLY, "planeonly": cls.PLANE_ONLY,
            "evanescent": cls.EVANESCENT_ONLY, "evanescent_only": cls.EVANESCENT_ONLY,
            "evanescentonly": cls.EVANESCENT_ONLY,
            "superposition": cls.SUPERPOSITION, "both": cls.SUPERPOSITION,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown illumination components {value!r}") from None


class ModeKind(enum.Enum):
    PROPAGATING = "propagating"
    EVANESCENT = "evanescent"


def pick_n0(kappa: float, theta: float, period: float = TWO_PI) -> int:
    """Smallest positive order whose shifted momentum exceeds the wavenumber."""
    if not kappa > 0:
        raise ConfigError("kappa must be positive")
    alpha = kappa * np.sin(theta)
    step = TWO_PI / period
    n0 = 1
    while not (alpha + step * n0) ** 2 > kappa ** 2:
        n0 += 1
    return n0


@dataclass(frozen=True)
class IlluminationSpec:
    kappa: float
    theta: float = DEFAULT_THETA
    period: float = TWO_PI
    n0: int = 0
    H: float = 1.5
    components: Components = Components.SUPERPOSITION

    def __post_init__(self):
        object.__setattr__(self, "components", Components.parse(self.components))
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if not abs(self.theta) < np.pi / 2:
            raise ConfigError(f"theta must lie in (-pi/2, pi/2), got {self.theta}")
        if not self.period > 0:
            raise ConfigError(f"period must be positive, got {self.period}")
        if self.n0 <= 0:
            object.__setattr__(self, "n0", pick_n0(self.kappa, self.theta, self.period))
        if not self.alpha_tilde ** 2 > self.kappa ** 2:
            raise ConfigError(
                f"n0={self.n0} gives alpha~={self.alpha_tilde:.6g} with alpha~^2 <= kappa^2; "
                "the shifted wave would not be evanescent"
            )

    @classmethod
    def create(cls, kappa, theta=DEFAULT_THETA, *, h=None, H=None, n0=None,
               period=TWO_PI, components=Components.SUPERPOSITION) -> "IlluminationSpec":
        """Fill the unstated parameters: ``n0 = pick_n0``, ``H = h + 0.5``."""
        if H is None:
            if h is None:
                raise ConfigError("either the source height H or the measurement height h is required")
            H = h + DEFAULT_SOURCE_OFFSET
        return cls(kappa, theta, period, n0 or 0, H, components)

    def with_components(self, components) -> "IlluminationSpec":
        return IlluminationSpec(self.kappa, self.theta, self.period, self.n0, self.H, components)

    @property
    def alpha(self) -> float:
        return self.kappa * np.sin(self.theta)

    @property
    def beta(self) -> float:
        return self.kappa * np.cos(self.theta)

    @property
    def alpha_tilde(self) -> float:
        return self.alpha + TWO_PI * self.n0 / self.period

    @property
    def beta_tilde(self) -> complex:
        return 1j * np.sqrt(self.alpha_tilde ** 2 - self.kappa ** 2)

    @property
    def decay(self) -> float:
        """Decay rate |beta~| of the evanescent illumination."""
        return float(np.sqrt(self.alpha_tilde ** 2 - self.kappa ** 2))

    def alpha_n(self, n):
        return self.alpha + TWO_PI * np.asarray(n) / self.period

    def beta_n(self, n):
        """Outgoing/decaying branch: real >= 0 or positive imaginary."""
        a = self.alpha_n(n)
        d = self.kappa ** 2 - a ** 2
        return np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))

    def describe(self) -> dict:
        return {
            "kappa": self.kappa, "theta": self.theta, "period": self.period,
            "n0": self.n0, "H": self.H, "components": self.components.value,
        }


@dataclass(frozen=True)
class RayleighMode:
    n: int
    alpha_n: float
    beta_n: complex
    kind: ModeKind


def make_modes(spec: IlluminationSpec, n_min: int, n_max: int,
               wood_tolerance: float | None = None) -> list[RayleighMode]:
    if n_min > n_max:
        raise ConfigError("n_min must not exceed n_max")
    tol = 1e-8 * spec.kappa if wood_tolerance is None else wood_tolerance
    modes = []
    for n in range(n_min, n_max + 1):
        a = float(spec.alpha_n(n))
        b = complex(spec.beta_n(n))
        if abs(b) <= tol:
            raise WoodAnomaly(
                f"order n={n} is at a Wood anomaly: |beta_n|={abs(b):.3e} <= {tol:.3e} "
                f"(kappa={spec.kappa}, theta={spec.theta})"
            )
        kind = ModeKind.PROPAGATING if spec.kappa >= abs(a) else ModeKind.EVANESCENT
        modes.append(RayleighMode(n, a, b, kind))
    return modes


@dataclass(frozen=True)
class TraceExpansion:
    """Trace ``sum_n coeffs[n + n_dtn] exp(i alpha_n x)`` on ``y = height``."""

    alpha: float
    height: float
    coeffs: np.ndarray
    period: float = TWO_PI

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise ConfigError("trace expansion needs 2*n_dtn + 1 coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_dtn(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_dtn, self.n_dtn + 1)

    def coeff(self, n: int) -> complex:
        if abs(n) > self.n_dtn:
            return 0j
        return complex(self.coeffs[n + self.n_dtn])

    def replace(self, coeffs=None, height=None) -> "TraceExpansion":
        return TraceExpansion(
            self.alpha,
            self.height if height is None else height,
            self.coeffs if coeffs is None else coeffs,
            self.period,
        )

    def __add__(self, other: "TraceExpansion") -> "TraceExpansion":
        if self.n_dtn != other.n_dtn or not np.isclose(self.alpha, other.alpha):
            raise ConfigError("trace expansions differ in truncation or momentum")
        return self.replace(self.coeffs + other.coeffs)

    def __call__(self, x):
        """Synthesize point values by direct summation."""
        x = np.asarray(x, dtype=float)
        an = self.alpha + TWO_PI * self.orders / self.period
        vals = np.exp(1j * np.multiply.outer(x, an)) @ self.coeffs
        return complex(vals) if vals.ndim == 0 else vals


def _mode_factors(trace: TraceExpansion, modes, fn):
    by_order = {m.n: m for m in modes}
    out = np.zeros_like(trace.coeffs)
    for n, c in zip(trace.orders, trace.coeffs):
        mode = by_order.get(int(n))
        if mode is None:
            if c != 0:
                raise ConfigError(f"no Rayleigh mode supplied for nonzero order n={n}")
            continue
        out[n + trace.n_dtn] = fn(mode) * c
    return out


def eval_incident(spec: IlluminationSpec, x, y):
    """Incident field at ``(x, y)``; evaluates the selected components."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    if spec.components.plane:
        out = out + np.exp(1j * spec.alpha * x - 1j * spec.beta * y)
    if spec.components.evanescent:
        out = out + np.exp(1j * spec.alpha_tilde * x + 1j * spec.beta_tilde * np.abs(y - spec.H))
    return complex(out) if out.ndim == 0 else out


def incident_trace(spec: IlluminationSpec, h: float, n_dtn: int) -> tuple[TraceExpansion, TraceExpansion]:
    """Dirichlet and Neumann (d/dy) traces of the incident field on ``y = h``."""
    if spec.components.evanescent:
        if not h < spec.H:
            raise ConfigError(f"measurement height h={h} must lie below the source height H={spec.H}")
        if n_dtn < spec.n0:
            raise ConfigError(f"n_dtn={n_dtn} cannot represent the evanescent order n0={spec.n0}")
    dirichlet = np.zeros(2 * n_dtn + 1, dtype=complex)
    neumann = np.zeros_like(dirichlet)
    if spec.components.plane:
        v = np.exp(-1j * spec.beta * h)
        dirichlet[n_dtn] += v
        neumann[n_dtn] += -1j * spec.beta * v
    if spec.components.evanescent:
        bt = spec.beta_tilde
        v = np.exp(1j * bt * (spec.H - h))
        dirichlet[n_dtn + spec.n0] += v
        neumann[n_dtn + spec.n0] += -1j * bt * v
    return (TraceExpansion(spec.alpha, h, dirichlet, spec.period),
            TraceExpansion(spec.alpha, h, neumann, spec.period))


def dtn_apply(trace: TraceExpansion, modes) -> TraceExpansion:
    """Apply T: multiply the n-th coefficient by i beta_n."""
    return trace.replace(_mode_factors(trace, modes, lambda m: 1j * m.beta_n))


def tbc_source(spec: IlluminationSpec, h: float, modes, n_dtn: int | None = None) -> TraceExpansion:
    """Transparent-boundary source ``d/dy u_I - T u_I`` on ``y = h``."""
    if n_dtn is None:
        n_dtn = max(abs(m.n) for m in modes)
    dirichlet, neumann = incident_trace(spec, h, n_dtn)
    return neumann.replace(neumann.coeffs - dtn_apply(dirichlet, modes).coeffs)


def propagate_up(trace: TraceExpansion, modes, dy: float) -> TraceExpansion:
    """Continue an outgoing trace from ``height`` to ``height + dy`` through the Rayleigh expansion."""
    if dy < 0:
        raise ConfigError("propagate_up only continues upward (dy >= 0)")
    coeffs = _mode_factors(trace, modes, lambda m: np.exp(1j * m.beta_n * dy))
    return trace.replace(coeffs, trace.height + dy)


def flat_scatter_oracle(spec: IlluminationSpec, c: float, x, y):
    """Exact scattered field for the flat sound-soft profile ``f = c``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    if spec.components.plane:
        b = spec.beta
        out = out - np.exp(1j * spec.alpha * x) * np.exp(-2j * b * c) * np.exp(1j * b * y)
    if spec.components.evanescent:
        bt = spec.beta_tilde
        out = out - (np.exp(1j * spec.alpha_tilde * x) * np.exp(1j * bt * spec.H)
                     * np.exp(-1j * bt * c) * np.exp(1j * bt * (y - c)))
    return complex(out) if out.ndim == 0 else out
