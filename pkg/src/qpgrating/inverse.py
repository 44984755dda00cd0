"""Least-squares profile reconstruction with a Broyden-family quasi-Newton method.

The unknowns are the 2M+1 Fourier coefficients of the profile. Derivatives of
the scattered trace with respect to each coefficient come from central
differences of forward solves; the objective gradients are assembled from
those columns by the chain rule.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, CurvatureBreakdown, LineSearchFailed, MeshTooCoarse, SolverFailed
from .forward import ForwardModel, SolverConfig, scattered_trace
from .geometry import GratingProfile
from .synth import DataKind, NearFieldData
from .wavefields import IlluminationSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineSearchParams:
    """Armijo backtracking; the default is plain backtracking from a unit step.

    ``max_expansions > 0`` lets an accepted unit step grow, and ``refine_iters > 0``
    then polishes the bracketed step with Brent's method (see ``REFINED``).
    """
    initial_step: float = 1.0
    shrink: float = 0.5
    c1: float = 1e-4
    max_trials: int = 30
    expand: float = 2.0
    max_expansions: int = 0
    refine_iters: int = 0
    refine_xtol: float = 1e-2


# closer to an exact line minimization, at a few extra solves per iteration
REFINED = LineSearchParams(max_expansions=30, refine_iters=8)


@dataclass(frozen=True)
class InverseConfig:
    M: int
    epsilon: float = 1e-3
    it_max: int = 50
    phi: float = 0.0
    fd_step: float = 1e-4
    line_search: LineSearchParams = LineSearchParams()
    initial_gamma: tuple | None = None
    curvature_tol: float = 1e-12
    workers: int = 1

    def __post_init__(self):
        if self.M < 0:
            raise ConfigError("M must be non-negative")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.it_max < 1:
            raise ConfigError("it_max must be at least 1")
        if not 0.0 <= self.phi <= 1.0:
            raise ConfigError("phi must lie in [0, 1]")
        if not self.fd_step > 0:
            raise ConfigError("fd_step must be positive")
        if self.initial_gamma is not None:
            g = tuple(float(v) for v in np.ravel(self.initial_gamma))
            if len(g) != 2 * self.M + 1:
                raise ConfigError(f"initial_gamma has length {len(g)}, expected {2 * self.M + 1}")
            object.__setattr__(self, "initial_gamma", g)

    @property
    def size(self) -> int:
        return 2 * self.M + 1

    def start(self) -> np.ndarray:
        if self.initial_gamma is None:
            return np.zeros(self.size)
        return np.array(self.initial_gamma, dtype=float)


class Termination(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    LINE_SEARCH_FAILED = "line_search_failed"
    SOLVER_FAILED = "solver_failed"


@dataclass
class ReconstructionState:
    gamma: np.ndarray
    hessian: np.ndarray
    cost_history: list = field(default_factory=list)
    gradient_norm_history: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    termination: Termination | None = None
    message: str = ""
    n_solves: int = 0

    @property
    def iterations(self) -> int:
        return len(self.step_sizes)

    @property
    def converged(self) -> bool:
        return self.termination is Termination.CONVERGED


# --------------------------------------------------------------------------- objectives

def _phase_values(data: NearFieldData) -> np.ndarray:
    if data.kind is not DataKind.PHASE:
        raise ConfigError("phase objective needs phase data")
    return data.values


def _intensity_values(data: NearFieldData) -> np.ndarray:
    if data.kind is not DataKind.PHASELESS:
        raise ConfigError("phaseless objective needs phaseless data")
    return data.values


def phase_misfit(us: np.ndarray, measured: np.ndarray) -> float:
    return float(np.mean(np.abs(us - measured) ** 2))


def phaseless_misfit(us: np.ndarray, intensity: np.ndarray) -> float:
    return float(np.mean((np.abs(us) ** 2 - intensity) ** 2))


def cost_phase(gamma, data: NearFieldData, model: ForwardModel) -> float:
    """(1/N) sum_m |u^s_m - u^mes_m|^2."""
    return phase_misfit(model(gamma), _phase_values(data))


def cost_phaseless(gamma, data: NearFieldData, model: ForwardModel) -> float:
    """(1/N) sum_m (|u^s_m|^2 - |u^mes_m|^2)^2."""
    return phaseless_misfit(model(gamma), _intensity_values(data))


def trace_jacobian(gamma, model: ForwardModel, fd_step: float, workers: int = 1):
    """Base trace and the N x (2M+1) central-difference derivative of the trace.

    Columns are computed independently and stored in coefficient order, so the
    result does not depend on ``workers``.
    """
    gamma = np.asarray(gamma, dtype=float)
    base = model(gamma)

    def column(j):
        e = np.zeros_like(gamma)
        e[j] = fd_step
        plus = scattered_trace(model.solve(gamma + e), model.n_points)
        minus = scattered_trace(model.solve(gamma - e), model.n_points)
        return (plus - minus) / (2 * fd_step)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            cols = list(pool.map(column, range(gamma.size)))
    else:
        cols = [column(j) for j in range(gamma.size)]
    model.n_solves += 2 * gamma.size
    return base, np.column_stack(cols)


def phase_gradient_from(us, jac, measured) -> np.ndarray:
    n = us.size
    return np.real((2.0 / n) * (np.conj(us - measured) @ jac))


def phaseless_gradient_from(us, jac, intensity) -> np.ndarray:
    n = us.size
    dq = 2.0 * np.real(np.conj(us)[:, None] * jac)
    return (2.0 / n) * ((np.abs(us) ** 2 - intensity) @ dq)


def grad_phase(gamma, data: NearFieldData, model: ForwardModel, fd_step: float = 1e-4,
               workers: int = 1) -> np.ndarray:
    measured = _phase_values(data)
    us, jac = trace_jacobian(gamma, model, fd_step, workers)
    return phase_gradient_from(us, jac, measured)


def grad_phaseless(gamma, data: NearFieldData, model: ForwardModel, fd_step: float = 1e-4,
                   workers: int = 1) -> np.ndarray:
    intensity = _intensity_values(data)
    us, jac = trace_jacobian(gamma, model, fd_step, workers)
    return phaseless_gradient_from(us, jac, intensity)


def objective(kind: DataKind):
    """(cost, gradient) pair for a data kind."""
    if DataKind.parse(kind) is DataKind.PHASE:
        return cost_phase, grad_phase
    return cost_phaseless, grad_phaseless


# --------------------------------------------------------------------------- quasi-Newton

def broyden_update(B: np.ndarray, s: np.ndarray, y: np.ndarray, phi: float,
                   tol: float = 1e-300) -> np.ndarray:
    """One member of the Broyden family; phi = 0 is the BFGS-type, phi = 1 the DFP-type update.

    Raises CurvatureBreakdown when y's or s'Bs is (numerically) zero.
    """
    B = np.asarray(B, dtype=float)
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    ys = float(y @ s)
    Bs = B @ s
    sBs = float(s @ Bs)
    scale = np.linalg.norm(y) * np.linalg.norm(s)
    if abs(ys) <= max(tol, 1e-14 * scale) or abs(sBs) <= max(tol, 1e-14 * np.linalg.norm(Bs) * np.linalg.norm(s)):
        raise CurvatureBreakdown(f"y's = {ys:.3e}, s'Bs = {sBs:.3e}")
    yy = np.outer(y, y) / ys
    first = B + yy - np.outer(Bs, Bs) / sBs
    if phi == 0.0:
        return first
    left = np.eye(B.shape[0]) - np.outer(y, s) / ys
    second = left @ B @ left.T + yy
    if phi == 1.0:
        return second
    return (1.0 - phi) * first + phi * second


class LineSearchResult(NamedTuple):
    alpha: float
    cost: float
    direction: np.ndarray
    reset: bool


def line_search(cost: Callable[[np.ndarray], float], gamma, p, grad, params: LineSearchParams = LineSearchParams(),
                cost0: float | None = None) -> LineSearchResult:
    """Approximate ``argmin_{alpha >= 0} C(gamma + alpha p)`` with guaranteed sufficient decrease.

    1. backtrack from ``initial_step`` until the Armijo test passes, or, if the
       first trial already passes and ``max_expansions > 0``, keep growing the
       step while the cost drops;
    2. when that leaves a bracket around a minimizer, polish it with at most
       ``refine_iters`` Brent iterations.

    With the default parameters only the backtracking of step 1 runs.

    The returned step always satisfies the Armijo test. A non-descent ``p`` is
    replaced by steepest descent; forward-solver failures count as rejected trials.
    """
    gamma = np.asarray(gamma, dtype=float)
    p = np.asarray(p, dtype=float)
    grad = np.asarray(grad, dtype=float)
    reset = False
    slope = float(p @ grad)
    if not slope < 0:
        p, reset = -grad, True
        slope = float(p @ grad)
    c0 = cost(gamma) if cost0 is None else cost0
    seen: dict[float, float] = {0.0: c0}

    def trial(alpha):
        if alpha not in seen:
            try:
                seen[alpha] = cost(gamma + alpha * p)
            except SolverFailed as exc:
                log.debug("trial step %.3g rejected: %s", alpha, exc)
                seen[alpha] = np.inf
        return seen[alpha]

    armijo = lambda a, c: c <= c0 + params.c1 * a * slope

    alpha = params.initial_step
    for n in range(params.max_trials):
        c = trial(alpha)
        if armijo(alpha, c):
            break
        alpha *= params.shrink
    else:
        raise LineSearchFailed(f"no sufficient decrease after {params.max_trials} trials (slope {slope:.3e})")

    lower, upper = alpha * params.shrink if n == 0 else 0.0, alpha / params.shrink
    if n == 0:
        for _ in range(params.max_expansions):
            bigger = alpha * params.expand
            cb = trial(bigger)
            if not (cb < c and armijo(bigger, cb)):
                lower, upper = alpha / params.expand, bigger
                break
            alpha, c = bigger, cb
        else:
            return LineSearchResult(alpha, c, p, reset)
    if params.refine_iters > 0 and trial(upper) > c and trial(lower) > c:
        try:
            opt = minimize_scalar(trial, bracket=(lower, alpha, upper), method="brent",
                                  options={"xtol": params.refine_xtol, "maxiter": params.refine_iters})
            best = float(opt.x)
        except (ValueError, RuntimeError) as exc:
            log.debug("line search refinement skipped: %s", exc)
            best = alpha
        if best > 0 and trial(best) < c and armijo(best, trial(best)):
            alpha, c = best, trial(best)
    return LineSearchResult(alpha, c, p, reset)


# --------------------------------------------------------------------------- driver

def reconstruct(data: NearFieldData, spec: IlluminationSpec, h: float, cfg: InverseConfig,
                solver_cfg: SolverConfig | None = None, model: ForwardModel | None = None,
                callback: Callable | None = None) -> tuple[ReconstructionState, GratingProfile]:
    """Quasi-Newton reconstruction of the profile coefficients from near-field data."""
    if abs(h - data.h) > 1e-12:
        raise ConfigError(f"data were taken at h={data.h}, reconstruction requested at h={h}")
    if model is None:
        model = ForwardModel(spec, h, solver_cfg, data.n_points, spec.period)
    elif model.n_points != data.n_points:
        raise ConfigError("forward model and data disagree on the number of observation points")
    if not np.allclose(model.points, data.points, rtol=0, atol=1e-12 * spec.period):
        raise ConfigError("observation points do not match x_m = period*m/N")

    cost_fn, grad_fn = objective(data.kind)
    # each central-difference column moves f by at most fd_step, so trial iterates
    # must keep that much room below h or the next gradient would be unsolvable
    ceiling = h - model.cfg.min_layer - cfg.fd_step

    def cost(g):
        top = model.profile(g).max_height(16 * model.cfg.nx)
        if top >= ceiling:
            raise MeshTooCoarse(f"iterate reaches {top:.6g}, above the admissible ceiling {ceiling:.6g}")
        return cost_fn(g, data, model)

    grad = lambda g: grad_fn(g, data, model, cfg.fd_step, cfg.workers)

    gamma = cfg.start()
    B = np.eye(cfg.size)
    state = ReconstructionState(gamma.copy(), B.copy())

    def finish(term: Termination, msg: str):
        state.gamma, state.hessian = gamma.copy(), B.copy()
        state.termination, state.message = term, msg
        state.n_solves = model.n_solves
        log.info("reconstruction stopped: %s (%s)", term.value, msg)
        return state, model.profile(gamma)

    try:
        c = cost(gamma)
        g = grad(gamma)
    except SolverFailed as exc:
        return finish(Termination.SOLVER_FAILED, str(exc))
    state.cost_history.append(c)
    state.gradient_norm_history.append(float(np.linalg.norm(g)))

    for k in range(cfg.it_max):
        if not np.any(g):
            return finish(Termination.CONVERGED, "gradient vanished")
        p = -np.linalg.solve(B, g)
        try:
            ls = line_search(cost, gamma, p, g, cfg.line_search, c)
        except LineSearchFailed as exc:
            if np.linalg.norm(p) * cfg.line_search.initial_step <= cfg.epsilon:
                return finish(Termination.CONVERGED, f"no resolvable decrease within tolerance: {exc}")
            if np.allclose(B, np.eye(cfg.size)):
                return finish(Termination.LINE_SEARCH_FAILED, str(exc))
            log.info("line search failed at k=%d, restarting from B = I", k)
            B = np.eye(cfg.size)
            try:
                ls = line_search(cost, gamma, -g, g, cfg.line_search, c)
            except LineSearchFailed as exc2:
                return finish(Termination.LINE_SEARCH_FAILED, str(exc2))
        if ls.reset:
            B = np.eye(cfg.size)
        s = ls.alpha * ls.direction
        gamma_new = gamma + s
        try:
            g_new = grad(gamma_new)
        except SolverFailed as exc:
            return finish(Termination.SOLVER_FAILED, str(exc))
        y = g_new - g
        if y @ s > cfg.curvature_tol * np.linalg.norm(y) * np.linalg.norm(s):
            try:
                B = broyden_update(B, s, y, cfg.phi)
                B = 0.5 * (B + B.T)
            except CurvatureBreakdown as exc:
                log.debug("Broyden update skipped: %s", exc)
        gamma, g, c = gamma_new, g_new, ls.cost
        step = float(np.linalg.norm(s))
        state.cost_history.append(c)
        state.gradient_norm_history.append(float(np.linalg.norm(g)))
        state.step_sizes.append(ls.alpha)
        state.step_norms.append(step)
        log.info("k=%d cost=%.6e |grad|=%.3e alpha=%.3g |step|=%.3e", k + 1, c, np.linalg.norm(g), ls.alpha, step)
        if callback is not None:
            callback(k + 1, gamma, c)
        if step <= cfg.epsilon:
            return finish(Termination.CONVERGED, f"step {step:.3e} <= epsilon")
    return finish(Termination.MAX_ITERATIONS, f"reached it_max={cfg.it_max}")


def write_iteration_log(path, state: ReconstructionState) -> None:
    """Columns: k, C(gamma_k), |grad C(gamma_k)|, alpha_k, |gamma_k - gamma_{k-1}|."""
    with open(path, "w") as fh:
        fh.write(f"# termination = {state.termination.value if state.termination else 'none'}\n")
        fh.write("# k cost grad_norm alpha step_norm\n")
        for k, (c, gn) in enumerate(zip(state.cost_history, state.gradient_norm_history)):
            alpha = state.step_sizes[k - 1] if k else float("nan")
            step = state.step_norms[k - 1] if k else float("nan")
            fh.write(f"{k} {c:.17g} {gn:.17g} {alpha:.17g} {step:.17g}\n")
