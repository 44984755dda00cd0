"""Command-line front end: ``qpgrating {forward,synth,invert,reproduce}``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 optimizer stopped without converging (result files are still written).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import FIGURES, ExperimentConfig, figure_config
from .errors import ConfigError, SolverFailed, WoodAnomaly
from .forward import ForwardModel, scattered_trace, solve_forward, write_trace
from .geometry import GratingProfile, eval_profile, profile_error
from .inverse import Termination, reconstruct, write_iteration_log
from .synth import add_noise, generate, read_measurements, write_measurements

log = logging.getLogger("qpgrating")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NOT_CONVERGED = 0, 2, 3, 4
PROFILE_GRID = 512


def _header_lines(head: dict) -> list[str]:
    return [f"# {k} = {v}" for k, v in head.items()]


def _announce(cfg: ExperimentConfig) -> None:
    s = cfg.spec
    print(f"[{cfg.label or 'custom'}] kappa={s.kappa:g} theta={s.theta:.6g} n0={s.n0} H={s.H:g} "
          f"h={cfg.h:g} N={cfg.n_points} components={s.components.value} kind={cfg.kind.value} "
          f"delta={cfg.delta:g} seed={cfg.seed}")


# --------------------------------------------------------------------------- verbs

def cmd_forward(cfg: ExperimentConfig) -> int:
    """Total and scattered traces of the truth profile on y = h."""
    cfg.validate()
    _announce(cfg)
    sol = solve_forward(cfg.truth, cfg.spec, cfg.h, cfg.solver)
    model = ForwardModel(cfg.spec, cfg.h, cfg.solver, cfg.n_points, cfg.truth.period)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    head = cfg.header()
    write_trace(cfg.out_dir / "scattered_trace.txt", model.points, scattered_trace(sol, cfg.n_points), head)
    write_trace(cfg.out_dir / "total_trace.txt", model.points, sol.total_trace(cfg.n_points), head)
    print(f"wrote {cfg.out_dir / 'scattered_trace.txt'} and {cfg.out_dir / 'total_trace.txt'}")
    return EXIT_OK


def synthesize(cfg: ExperimentConfig):
    clean = generate(cfg.truth, cfg.spec, cfg.h, cfg.solver, cfg.n_points, cfg.kind)
    return add_noise(clean, cfg.delta, cfg.seed) if cfg.delta > 0 else clean


def cmd_synth(cfg: ExperimentConfig) -> int:
    cfg.validate()
    _announce(cfg)
    data = synthesize(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "measurements.txt"
    write_measurements(path, data, cfg.spec)
    print(f"wrote {path}")
    return EXIT_OK


def _check_measurements(cfg: ExperimentConfig, data, header: dict) -> None:
    if data.kind is not cfg.kind:
        raise ConfigError(f"measurement file holds {data.kind.value} data but the config asks for {cfg.kind.value}")
    for key, want in (("kappa", cfg.spec.kappa), ("theta", cfg.spec.theta), ("h", cfg.h), ("H", cfg.spec.H)):
        got = float(header[key])
        if not math.isclose(got, want, rel_tol=1e-12, abs_tol=1e-12):
            raise ConfigError(f"measurement file has {key}={got}, config has {want}")
    if int(header["N"]) != cfg.n_points:
        raise ConfigError(f"measurement file has N={header['N']}, config has {cfg.n_points}")


def write_profile_table(path, truth: GratingProfile, recon: GratingProfile, head: dict) -> None:
    """Columns x, f_truth(x), f_K(x) on a uniform grid over one period."""
    x = truth.period * np.arange(PROFILE_GRID) / PROFILE_GRID
    table = np.column_stack([x, eval_profile(truth, x), eval_profile(recon, x)])
    with open(path, "w") as fh:
        fh.write("\n".join(_header_lines(head)) + "\n# x f_truth f_K\n")
        np.savetxt(fh, table, fmt="%.17g")


def run_inversion(cfg: ExperimentConfig, data) -> int:
    state, recon = reconstruct(data, cfg.spec, cfg.h, cfg.inverse, cfg.solver)
    rel, linf = profile_error(cfg.truth, recon)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    head = {**cfg.header(), "termination": state.termination.value, "iterations": state.iterations,
            "rel_l2_error": rel, "linf_error": linf}
    with open(out / "gamma.txt", "w") as fh:
        fh.write("\n".join(_header_lines(head)) + "\n# gamma_hat (order: const, cos1, sin1, cos2, ...)\n")
        np.savetxt(fh, state.gamma, fmt="%.17g")
    write_iteration_log(out / "iterations.txt", state)
    write_profile_table(out / "profile.txt", cfg.truth, recon, head)
    (out / "config.ini").write_text(cfg.to_ini())
    print(f"termination={state.termination.value} iterations={state.iterations} "
          f"final_cost={state.cost_history[-1]:.6e} rel_L2={rel:.4%} Linf={linf:.4g}")
    print(f"wrote {out / 'gamma.txt'}, {out / 'iterations.txt'}, {out / 'profile.txt'}")
    if state.termination is Termination.SOLVER_FAILED:
        print(f"error: forward solver failed: {state.message}", file=sys.stderr)
        return EXIT_SOLVER
    if not state.converged:
        print(f"warning: not converged: {state.message}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_invert(cfg: ExperimentConfig, data_path: Path | None = None) -> int:
    """Reconstruct from a measurement file, or from freshly synthesized data if none is given."""
    cfg.validate()
    _announce(cfg)
    if data_path is None:
        data = synthesize(cfg)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        write_measurements(cfg.out_dir / "measurements.txt", data, cfg.spec)
    else:
        data, header = read_measurements(data_path)
        _check_measurements(cfg, data, header)
    return run_inversion(cfg, data)


def cmd_reproduce(figure_id: str, out_dir=None, seed: int | None = None) -> int:
    cfg = figure_config(figure_id).with_seed(seed)
    cfg = cfg.with_out(Path(out_dir or "out") / figure_id)
    return cmd_invert(cfg)


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpgrating", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, need_config=True):
        p.add_argument("--config", type=Path, required=need_config, help="experiment INI file")
        p.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
        p.add_argument("--seed", type=int, help="noise seed (overrides [noise] seed)")

    common(sub.add_parser("forward", help="solve the forward problem for the configured profile"))
    common(sub.add_parser("synth", help="write synthetic (noisy) measurements"))
    inv = sub.add_parser("invert", help="reconstruct the profile from measurements")
    common(inv)
    inv.add_argument("--data", type=Path, help="measurement file; synthesized from the config if omitted")
    rep = sub.add_parser("reproduce", help="rerun one of the preset figure experiments")
    common(rep, need_config=False)
    rep.add_argument("--figure", required=True, metavar="ID", help="one of: " + ", ".join(FIGURES))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "reproduce":
            return cmd_reproduce(args.figure, args.out, args.seed)
        cfg = ExperimentConfig.from_file(args.config).with_seed(args.seed).with_out(args.out)
        if args.verb == "forward":
            return cmd_forward(cfg)
        if args.verb == "synth":
            return cmd_synth(cfg)
        return cmd_invert(cfg, args.data)
    except (ConfigError, WoodAnomaly) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailed as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
