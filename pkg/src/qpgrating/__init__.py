"""Forward and inverse scattering for periodic Dirichlet gratings under superposed illumination."""

from .errors import (ConfigError, CurvatureBreakdown, GratingError, LineSearchFailed, MeshTooCoarse,
                     SingularSystem, SolverFailed, WoodAnomaly)
from .forward import (FieldSolution, ForwardModel, SolverConfig, scattered_trace, solve_forward,
                      trace_coefficients)
from .geometry import GratingProfile, eval_profile, profile_error
from .inverse import (REFINED, InverseConfig, LineSearchParams, ReconstructionState, Termination, broyden_update,
                      cost_phase, cost_phaseless, grad_phase, grad_phaseless, line_search, reconstruct)
from .synth import (DataKind, NearFieldData, add_noise, add_noise_phase, add_noise_phaseless, generate,
                    read_measurements, write_measurements)
from .wavefields import (Components, IlluminationSpec, RayleighMode, TraceExpansion, dtn_apply,
                         eval_incident, flat_scatter_oracle, incident_trace, make_modes, pick_n0,
                         propagate_up, tbc_source)

__version__ = "0.1.0"
