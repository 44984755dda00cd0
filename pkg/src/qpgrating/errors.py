"""Exception hierarchy shared by the solver, optimizer and CLI."""


class GratingError(Exception):
    """Base class for all package errors."""


class ConfigError(GratingError, ValueError):
    """Inconsistent or malformed experiment/solver configuration."""


class WoodAnomaly(GratingError):
    """Some Rayleigh order has |beta_n| at (or numerically near) zero."""


class SolverFailed(GratingError):
    """The forward problem could not be solved for the requested input."""


class MeshTooCoarse(SolverFailed):
    """The measurement line does not clear the profile by the minimal layer."""


class SingularSystem(SolverFailed):
    """The discrete Helmholtz system is (numerically) singular."""


class CurvatureBreakdown(GratingError):
    """Quasi-Newton update denominators vanish; the update must be skipped."""


class LineSearchFailed(GratingError):
    """Backtracking exhausted its trial budget without sufficient decrease."""
