import math

import numpy as np
import pytest

from qpgrating.cli import main
from qpgrating.config import FIGURES, ExperimentConfig, figure_config, parse_number
from qpgrating.errors import ConfigError
from qpgrating.synth import read_measurements
from qpgrating.wavefields import flat_scatter_oracle

COARSE = """
[solver]
nx = 32
ny = 32
"""


def write_config(tmp_path, body, name="exp.ini"):
    path = tmp_path / name
    path.write_text(body + COARSE + f"\n[output]\ndir = {tmp_path / 'out'}\n")
    return path


FLAT = """
[profile]
coeffs = 0
[illumination]
kappa = 1
theta = pi/12
[measurement]
h = 1.0
N = 64
kind = phase
"""

PROFILE_M3 = """
[profile]
coeffs = 0 0 0.2 0.1 0 0 0.3
[illumination]
kappa = 2
[measurement]
h = 0.8
N = 64
kind = {kind}
[noise]
delta = {delta}
seed = 1
"""


def test_parse_number_expressions():
    assert parse_number("pi/12") == math.pi / 12
    assert parse_number("-1e-3") == -1e-3
    with pytest.raises(ConfigError):
        parse_number("__import__('os')")


def test_config_defaults_and_roundtrip(tmp_path):
    cfg = ExperimentConfig.from_file(write_config(tmp_path, PROFILE_M3.format(kind="phase", delta=0)))
    assert cfg.spec.n0 == 2 and cfg.spec.H == pytest.approx(1.3) and cfg.inverse.M == 3
    again = tmp_path / "again.ini"
    again.write_text(cfg.to_ini())
    back = ExperimentConfig.from_file(again)
    assert back.to_ini() == cfg.to_ini()


def test_config_missing_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[profile]\ncoeffs = 0\n[measurement]\nh = 1\n")
    with pytest.raises(ConfigError, match="kappa"):
        ExperimentConfig.from_file(path)


def test_config_unknown_section(tmp_path):
    path = write_config(tmp_path, FLAT + "\n[extras]\nfoo = 1\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(path)


def test_forward_flat_matches_oracle(tmp_path, capsys):
    assert main(["forward", "--config", str(write_config(tmp_path, FLAT))]) == 0
    out = tmp_path / "out" / "scattered_trace.txt"
    text = out.read_text()
    assert "# theta = " in text and "# n0 = " in text and "# H = " in text
    table = np.loadtxt(out, comments="#")
    assert table.shape == (64, 3)
    cfg = ExperimentConfig.from_file(write_config(tmp_path, FLAT))
    exact = flat_scatter_oracle(cfg.spec, 0.0, table[:, 0], 1.0)
    u = table[:, 1] + 1j * table[:, 2]
    assert np.linalg.norm(u - exact) / np.linalg.norm(exact) < 5e-3
    assert "n0=" in capsys.readouterr().out


def test_forward_rejects_cutting_measurement_line(tmp_path):
    body = FLAT.replace("coeffs = 0", "coeffs = 0 0 1.2")
    assert main(["forward", "--config", str(write_config(tmp_path, body))]) == 2
    assert not (tmp_path / "out" / "scattered_trace.txt").exists()


def test_synth_deterministic_and_consistent(tmp_path):
    cfg = write_config(tmp_path, PROFILE_M3.format(kind="phase", delta=0.05))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "measurements.txt").read_bytes() == (tmp_path / "b" / "measurements.txt").read_bytes()
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "2"]) == 0
    assert (tmp_path / "a" / "measurements.txt").read_bytes() != (tmp_path / "c" / "measurements.txt").read_bytes()


def test_synth_phaseless_is_squared_phase(tmp_path):
    main(["synth", "--config", str(write_config(tmp_path, PROFILE_M3.format(kind="phase", delta=0), "p.ini")),
          "--out", str(tmp_path / "p")])
    main(["synth", "--config", str(write_config(tmp_path, PROFILE_M3.format(kind="phaseless", delta=0), "q.ini")),
          "--out", str(tmp_path / "q")])
    p, _ = read_measurements(tmp_path / "p" / "measurements.txt")
    q, _ = read_measurements(tmp_path / "q" / "measurements.txt")
    assert np.array_equal(q.values, np.abs(p.values) ** 2)


def test_invert_from_file(tmp_path):
    cfg = write_config(tmp_path, PROFILE_M3.format(kind="phase", delta=0))
    main(["synth", "--config", str(cfg)])
    code = main(["invert", "--config", str(cfg), "--data", str(tmp_path / "out" / "measurements.txt")])
    assert code == 0
    table = np.loadtxt(tmp_path / "out" / "profile.txt", comments="#")
    assert table.shape[1] == 3 and np.max(np.abs(table[:, 1] - table[:, 2])) < 0.02
    assert (tmp_path / "out" / "gamma.txt").exists() and (tmp_path / "out" / "iterations.txt").exists()


def test_invert_kind_mismatch(tmp_path):
    main(["synth", "--config", str(write_config(tmp_path, PROFILE_M3.format(kind="phase", delta=0), "p.ini"))])
    cfg = write_config(tmp_path, PROFILE_M3.format(kind="phaseless", delta=0), "q.ini")
    assert main(["invert", "--config", str(cfg), "--data", str(tmp_path / "out" / "measurements.txt")]) == 2


def test_non_convergence_exit_code_keeps_files(tmp_path):
    body = PROFILE_M3.format(kind="phase", delta=0.05) + "\n[inverse]\nit_max = 1\n"
    assert main(["invert", "--config", str(write_config(tmp_path, body))]) == 4
    assert "max_iterations" in (tmp_path / "out" / "iterations.txt").read_text()


def test_unknown_figure(capsys):
    assert main(["reproduce", "--figure", "9.9-zz"]) == 2
    assert "4.1-PD1a" in capsys.readouterr().err


def test_figure_presets():
    assert set(FIGURES) == {"4.1-PD1a", "4.1-PD1b", "4.1-PD2a", "4.1-PD2b", "4.1-PD2c", "4.1-PD2d",
                            "4.2-abc-a", "4.2-abc-b", "4.2-abck2-a", "4.2-abck2-b", "4.2-abci-a",
                            "4.2-abci-b", "4.2-abci1-a", "4.2-abci1-b"}
    pd2a = figure_config("4.1-PD2a")
    assert (pd2a.h, pd2a.spec.kappa, pd2a.delta) == (0.8, 3.0, 0.10)
    abcb = figure_config("4.2-abc-b")
    assert (abcb.spec.kappa, abcb.delta, abcb.h) == (1.0, 0.10, 0.8)
    assert figure_config("4.2-abci-a").spec.components.value == "plane"


def test_reproduce_infeasible_figure_fails_validation(tmp_path):
    # the five-harmonic profile peaks above 0.8
    assert main(["reproduce", "--figure", "4.1-PD2a", "--out", str(tmp_path)]) == 2
