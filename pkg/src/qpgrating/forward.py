"""Finite element solver for the quasi-periodic Dirichlet grating problem.

Unknown: the total field u on Omega_h = {f(x) < y < h}, written as
``u = exp(i alpha x) w`` with w periodic. Discretization:

* structured mesh, ``nx`` columns per period and ``ny`` layers graded
  vertically between the profile and ``y = h`` (bottom nodes lie on y = f(x));
* continuous P1 triangles, two per quadrilateral, for w;
* the right column of nodes is identified with the left one, so the nodal
  field u is exactly alpha-quasi-periodic;
* the truncated DtN condition on ``y = h`` couples all top-row nodes through a
  dense rank-(2 n_dtn + 1) block.

Test functions are conjugated (sesquilinear Galerkin), so the only boundary
integral left is the transparent condition on the top line.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, MeshTooCoarse, SingularSystem
from .geometry import GratingProfile, eval_profile
from .wavefields import (IlluminationSpec, TraceExpansion, eval_incident, make_modes,
                         tbc_source)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    n_dtn: int | None = None
    nx: int = 64
    ny: int = 64
    quad_order: int = 6
    min_layer: float = 1e-3

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ConfigError(f"need nx, ny >= 4, got nx={self.nx}, ny={self.ny}")
        if self.quad_order < 1:
            raise ConfigError("quad_order must be positive")
        if self.n_dtn is not None and self.n_dtn < 0:
            raise ConfigError("n_dtn must be non-negative")

    def dtn_order(self, spec: IlluminationSpec) -> int:
        n = max(10, spec.n0 + 5) if self.n_dtn is None else self.n_dtn
        if spec.components.evanescent and n < spec.n0:
            raise ConfigError(f"n_dtn={n} is below the evanescent order n0={spec.n0}")
        return n

    def refined(self, factor: int = 2) -> "SolverConfig":
        return SolverConfig(self.n_dtn, self.nx * factor, self.ny * factor, self.quad_order, self.min_layer)


def _hat_fourier(alpha_n: np.ndarray, d: float, quad_order: int) -> np.ndarray:
    """Gauss-Legendre value of  int_{-d}^{d} hat(t) exp(-i alpha_n t) dt  for a unit hat."""
    t, w = np.polynomial.legendre.leggauss(quad_order)
    left = 0.5 * d * (t - 1.0)   # nodes on [-d, 0]
    right = 0.5 * d * (t + 1.0)  # nodes on [0, d]
    wl = 0.5 * d * w * (1.0 + left / d)
    wr = 0.5 * d * w * (1.0 - right / d)
    ph = lambda s: np.exp(-1j * np.multiply.outer(alpha_n, s))
    return ph(left) @ wl + ph(right) @ wr


class Discretization:
    """Profile-independent part of the discrete problem for fixed (spec, h, cfg)."""

    def __init__(self, spec: IlluminationSpec, h: float, cfg: SolverConfig):
        self.spec, self.h, self.cfg = spec, float(h), cfg
        nx, ny = cfg.nx, cfg.ny
        self.n_dtn = cfg.dtn_order(spec)
        self.modes = make_modes(spec, -self.n_dtn, self.n_dtn)
        period = spec.period
        self.dx = period / nx
        self.x = np.arange(nx + 1) * self.dx
        self.shift = np.exp(1j * spec.alpha * period)
        self.carrier = np.exp(1j * spec.alpha * self.x)

        # node (i, j) -> global index j*(nx+1) + i
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        a = jj * (nx + 1) + ii
        b, c, d = a + 1, a + nx + 2, a + nx + 1
        self.triangles = np.concatenate([
            np.stack([a, b, c], -1).reshape(-1, 3),
            np.stack([a, c, d], -1).reshape(-1, 3),
        ])
        gi = np.tile(np.arange(nx + 1), ny + 1)
        gj = np.repeat(np.arange(ny + 1), nx + 1)
        dof = np.where(gj == 0, -1, (gj - 1) * nx + gi % nx)
        self.node_dof = dof
        self.node_carrier = np.tile(self.carrier, ny + 1)
        self.n_dof = nx * ny

        td = dof[self.triangles]
        rows = np.broadcast_to(td[:, :, None], (len(td), 3, 3))
        cols = np.broadcast_to(td[:, None, :], (len(td), 3, 3))
        keep = (rows >= 0) & (cols >= 0)
        self._rows, self._cols, self._keep = rows[keep], cols[keep], keep

        # transparent boundary: C[n, i] = (1/period) int phi_i exp(-2 pi i n x / period) dx,
        # the n-th coefficient of w, i.e. the alpha_n coefficient of u
        kn = 2 * np.pi * np.arange(-self.n_dtn, self.n_dtn + 1) / period
        hat = _hat_fourier(kn, self.dx, cfg.quad_order)
        self.fourier = (hat[:, None] * np.exp(-1j * np.outer(kn, self.x[:nx]))) / period
        beta = np.array([m.beta_n for m in self.modes])
        self.dtn_block = -period * (self.fourier.conj().T * (1j * beta)) @ self.fourier
        self.rho = tbc_source(spec, self.h, self.modes, self.n_dtn)
        self.top = (ny - 1) * nx + np.arange(nx)
        self.load = np.zeros(self.n_dof, dtype=complex)
        self.load[self.top] = period * (self.fourier.conj().T @ self.rho.coeffs)
        tr, tc = np.meshgrid(self.top, self.top, indexing="ij")
        self._top_rows, self._top_cols = tr.ravel(), tc.ravel()

        self.incident_top = eval_incident(spec, self.x, self.h)
        self._synthesis: dict[int, np.ndarray] = {}

    def node_coordinates(self, profile: GratingProfile) -> tuple[np.ndarray, np.ndarray]:
        f = eval_profile(profile, self.x)
        s = np.arange(self.cfg.ny + 1)[:, None] / self.cfg.ny
        y = f[None, :] + (self.h - f[None, :]) * s
        X = np.broadcast_to(self.x[None, :], y.shape)
        return X.ravel(), y.ravel()

    def check_profile(self, profile: GratingProfile) -> None:
        if not np.isclose(profile.period, self.spec.period):
            raise ConfigError(f"profile period {profile.period} differs from illumination period {self.spec.period}")
        top = max(profile.max_height(16 * self.cfg.nx), float(np.max(eval_profile(profile, self.x))))
        if self.h - top <= self.cfg.min_layer:
            raise MeshTooCoarse(
                f"measurement height h={self.h} does not clear the profile maximum {top:.6g} "
                f"by the minimal layer {self.cfg.min_layer}"
            )

    def assemble(self, X: np.ndarray, Y: np.ndarray) -> sp.csc_matrix:
        alpha, kappa2 = self.spec.alpha, self.spec.kappa ** 2
        t = self.triangles
        x0, x1, x2 = X[t[:, 0]], X[t[:, 1]], X[t[:, 2]]
        y0, y1, y2 = Y[t[:, 0]], Y[t[:, 1]], Y[t[:, 2]]
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        area = 0.5 * np.abs(det)
        # barycentric gradients: grad lambda_k = (y_{k+1}-y_{k+2}, x_{k+2}-x_{k+1}) / det
        gx = np.stack([y1 - y2, y2 - y0, y0 - y1], -1) / det[:, None]
        gy = np.stack([x2 - x1, x0 - x2, x1 - x0], -1) / det[:, None]
        stiff = area[:, None, None] * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :])
        mass = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
        # conv[a, b] = int (d phi_b / dx) phi_a
        conv = area[:, None, None] / 3.0 * gx[:, None, :]
        local = stiff + (alpha ** 2 - kappa2) * mass - 1j * alpha * (conv - conv.transpose(0, 2, 1))
        data = np.concatenate([local[self._keep], self.dtn_block.ravel()])
        rows = np.concatenate([self._rows, self._top_rows])
        cols = np.concatenate([self._cols, self._top_cols])
        return sp.csc_matrix((data, (rows, cols)), shape=(self.n_dof, self.n_dof))

    def synthesis(self, n_points: int) -> np.ndarray:
        """Matrix mapping top-row nodal values to trig-interpolated values at x_m = period*m/N."""
        S = self._synthesis.get(n_points)
        if S is None:
            nx, period, alpha = self.cfg.nx, self.spec.period, self.spec.alpha
            xm = period * np.arange(1, n_points + 1) / n_points
            S = trig_interpolation_matrix(self.x[:nx], xm, alpha, period)
            self._synthesis[n_points] = S
        return S


def trig_interpolation_matrix(nodes: np.ndarray, points: np.ndarray, alpha: float, period: float) -> np.ndarray:
    """Alpha-quasi-periodic trigonometric interpolation from uniform nodes to arbitrary points."""
    nx = nodes.size
    k = np.arange(-(nx // 2), nx - nx // 2)
    weight = np.ones(k.size)
    if nx % 2 == 0:
        # split the Nyquist mode symmetrically between +-nx/2
        k = np.append(k, nx // 2)
        weight = np.append(weight, 0.5)
        weight[0] = 0.5
    w = 2 * np.pi / period
    analysis = weight[:, None] * np.exp(-1j * np.outer(k * w + alpha, nodes)) / nx
    synth = np.exp(1j * np.outer(points, k * w + alpha))
    return synth @ analysis


@functools.lru_cache(maxsize=16)
def discretization(spec: IlluminationSpec, h: float, cfg: SolverConfig) -> Discretization:
    return Discretization(spec, h, cfg)


@dataclass(frozen=True, eq=False)
class FieldSolution:
    profile: GratingProfile
    spec: IlluminationSpec
    h: float
    cfg: SolverConfig
    x: np.ndarray          # (nx + 1,) column abscissas, last one at x = period
    y: np.ndarray          # (ny + 1, nx + 1) node heights
    u: np.ndarray          # (ny + 1, nx + 1) total field at the nodes

    @property
    def disc(self) -> Discretization:
        return discretization(self.spec, self.h, self.cfg)

    @property
    def n_dtn(self) -> int:
        return self.disc.n_dtn

    def total_top(self) -> np.ndarray:
        """Total field at the top-row nodes x_i, i = 0..nx-1."""
        return self.u[-1, :-1]

    def scattered_top(self) -> np.ndarray:
        return self.total_top() - self.disc.incident_top[:-1]

    def total_trace(self, n_points: int) -> np.ndarray:
        return self.disc.synthesis(n_points) @ self.total_top()


def solve_forward(profile: GratingProfile, spec: IlluminationSpec, h: float,
                  cfg: SolverConfig | None = None) -> FieldSolution:
    """Solve the truncated-DtN boundary value problem for the total field."""
    cfg = cfg or SolverConfig()
    if spec.components.evanescent and not h < spec.H:
        raise ConfigError(f"measurement height h={h} must lie below the source height H={spec.H}")
    disc = discretization(spec, float(h), cfg)
    disc.check_profile(profile)
    X, Y = disc.node_coordinates(profile)
    A = disc.assemble(X, Y)
    try:
        lu = spla.splu(A)
        sol = lu.solve(disc.load)
    except RuntimeError as exc:
        raise SingularSystem(f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("non-finite values in the discrete solution (near-resonant system)")

    nx, ny = cfg.nx, cfg.ny
    u = np.zeros((ny + 1) * (nx + 1), dtype=complex)
    inner = disc.node_dof >= 0
    u[inner] = sol[disc.node_dof[inner]] * disc.node_carrier[inner]
    return FieldSolution(profile, spec, float(h), cfg, disc.x, Y.reshape(ny + 1, nx + 1),
                         u.reshape(ny + 1, nx + 1))


def scattered_trace(sol: FieldSolution, n_points: int) -> np.ndarray:
    """Scattered field u - u_I at x_m = period*m/N, m = 1..N, on y = h."""
    if n_points < 2 * sol.n_dtn:
        raise ConfigError(f"n_points={n_points} cannot resolve the {2 * sol.n_dtn + 1} retained orders")
    return sol.disc.synthesis(n_points) @ sol.scattered_top()


def trace_coefficients(sol: FieldSolution, n_dtn: int | None = None) -> TraceExpansion:
    """Fourier coefficients of the scattered trace by the periodic trapezoidal rule on the top nodes."""
    n_dtn = sol.n_dtn if n_dtn is None else n_dtn
    nx = sol.cfg.nx
    if 2 * n_dtn >= nx:
        raise ConfigError(f"{nx} top nodes cannot resolve orders up to |n|={n_dtn}")
    xs = sol.x[:-1]
    an = sol.spec.alpha_n(np.arange(-n_dtn, n_dtn + 1))
    coeffs = np.exp(-1j * np.outer(an, xs)) @ sol.scattered_top() / nx
    return TraceExpansion(sol.spec.alpha, sol.h, coeffs, sol.spec.period)


def write_trace(path, x, values, header: dict | None = None) -> None:
    """Plain-text dump of a complex trace: columns x, Re, Im."""
    lines = [f"# {k} = {v}" for k, v in (header or {}).items()]
    lines.append("# x re im")
    table = np.column_stack([x, np.real(values), np.imag(values)])
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        np.savetxt(fh, table, fmt="%.17g")


class ForwardModel:
    """Map from Fourier coefficients to the scattered trace at the observation points.

    The last few traces are memoized by coefficient bytes, so the line search and
    the base point of the gradient share their forward solves.
    """

    def __init__(self, spec: IlluminationSpec, h: float, cfg: SolverConfig | None = None,
                 n_points: int = 256, period: float | None = None, cache_size: int = 8):
        self.spec, self.h = spec, float(h)
        self.cfg = cfg or SolverConfig()
        self.n_points = n_points
        self.period = spec.period if period is None else period
        self.points = self.period * np.arange(1, n_points + 1) / n_points
        self.n_solves = 0
        self._cache: dict[bytes, np.ndarray] = {}
        self._cache_size = cache_size

    def profile(self, gamma) -> GratingProfile:
        return GratingProfile(np.asarray(gamma, dtype=float), self.period)

    def solve(self, gamma) -> FieldSolution:
        return solve_forward(self.profile(gamma), self.spec, self.h, self.cfg)

    def __call__(self, gamma) -> np.ndarray:
        key = np.asarray(gamma, dtype=float).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        trace = scattered_trace(self.solve(gamma), self.n_points)
        trace.setflags(write=False)
        self.n_solves += 1
        if len(self._cache) >= self._cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = trace
        return trace
