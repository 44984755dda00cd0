"""Synthetic near-field measurements and the two multiplicative/additive noise models."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .forward import ForwardModel, SolverConfig
from .geometry import GratingProfile
from .wavefields import IlluminationSpec


class DataKind(enum.Enum):
    PHASE = "phase"
    PHASELESS = "phaseless"

    @classmethod
    def parse(cls, value) -> "DataKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigError(f"unknown data kind {value!r} (expected 'phase' or 'phaseless')") from None


@dataclass(frozen=True, eq=False)
class NearFieldData:
    kind: DataKind
    points: np.ndarray
    values: np.ndarray
    h: float
    noise_level: float = 0.0
    seed: int | None = None
    noise: np.ndarray | None = None   # the random vector theta used, if any
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", DataKind.parse(self.kind))
        dtype = complex if self.kind is DataKind.PHASE else float
        values = np.asarray(self.values, dtype=dtype).ravel()
        points = np.asarray(self.points, dtype=float).ravel()
        if values.size != points.size:
            raise ConfigError(f"{values.size} values for {points.size} observation points")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "points", points)

    @property
    def n_points(self) -> int:
        return self.points.size

    def same_as(self, other: "NearFieldData") -> bool:
        """Bitwise equality of kind, abscissas, values and noise metadata."""
        return (self.kind is other.kind
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.values, other.values)
                and self.h == other.h
                and self.noise_level == other.noise_level
                and self.seed == other.seed)


def observation_points(n_points: int, period: float = 2 * np.pi) -> np.ndarray:
    """x_m = period * m / N for m = 1..N."""
    return period * np.arange(1, n_points + 1) / n_points


def generate(profile: GratingProfile, spec: IlluminationSpec, h: float, cfg: SolverConfig | None,
             n_points: int, kind=DataKind.PHASE) -> NearFieldData:
    """Noise-free scattered field (or its intensity) at the observation points."""
    kind = DataKind.parse(kind)
    model = ForwardModel(spec, h, cfg, n_points, profile.period)
    trace = model(profile.coeffs)
    values = trace.copy() if kind is DataKind.PHASE else np.abs(trace) ** 2
    return NearFieldData(kind, model.points, values, h, meta=dict(spec.describe()))


def noise_vector(n: int, seed: int | None) -> np.ndarray:
    """i.i.d. standard normal entries from a seeded generator."""
    return np.random.default_rng(seed).standard_normal(n)


def _check_delta(delta: float) -> None:
    if delta < 0:
        raise ConfigError(f"noise level must be non-negative, got {delta}")


def add_noise_phase(data: NearFieldData, delta: float, seed: int | None = None,
                    noise: np.ndarray | None = None) -> NearFieldData:
    """u_m (1 + delta * theta_m / ||theta||_2)."""
    if data.kind is not DataKind.PHASE:
        raise ConfigError("add_noise_phase needs phase data")
    _check_delta(delta)
    theta = noise_vector(data.n_points, seed) if noise is None else np.asarray(noise, dtype=float)
    values = data.values * (1 + delta * theta / np.linalg.norm(theta))
    return replace(data, values=values, noise_level=delta, seed=seed, noise=theta)


def add_noise_phaseless(data: NearFieldData, delta: float, seed: int | None = None,
                        noise: np.ndarray | None = None) -> NearFieldData:
    """|u_m|^2 + delta * (||u||_2^2 / ||theta||_2^2) * theta_m.

    Perturbed intensities may become negative; they are kept as they are.
    """
    if data.kind is not DataKind.PHASELESS:
        raise ConfigError("add_noise_phaseless needs phaseless data")
    _check_delta(delta)
    theta = noise_vector(data.n_points, seed) if noise is None else np.asarray(noise, dtype=float)
    energy = np.sum(data.values)          # ||u||_2^2, since values are |u_m|^2
    values = data.values + delta * (energy / np.sum(theta ** 2)) * theta
    return replace(data, values=values, noise_level=delta, seed=seed, noise=theta)


def add_noise(data: NearFieldData, delta: float, seed: int | None = None) -> NearFieldData:
    if data.kind is DataKind.PHASE:
        return add_noise_phase(data, delta, seed)
    return add_noise_phaseless(data, delta, seed)


HEADER_KEYS = ("kind", "kappa", "theta", "h", "H", "n0", "N", "delta", "seed")


def write_measurements(path, data: NearFieldData, spec: IlluminationSpec) -> None:
    """Tabular text: a ``# key = value`` header, then one row per observation point."""
    header = {
        "kind": data.kind.value, "kappa": repr(spec.kappa), "theta": repr(spec.theta),
        "h": repr(data.h), "H": repr(spec.H), "n0": spec.n0, "N": data.n_points,
        "delta": repr(data.noise_level), "seed": "none" if data.seed is None else data.seed,
        "period": repr(spec.period), "components": spec.components.value,
    }
    if data.kind is DataKind.PHASE:
        table = np.column_stack([data.points, data.values.real, data.values.imag])
        columns = "x re im"
    else:
        table = np.column_stack([data.points, data.values])
        columns = "x intensity"
    with open(path, "w") as fh:
        for k, v in header.items():
            fh.write(f"# {k} = {v}\n")
        fh.write(f"# {columns}\n")
        np.savetxt(fh, table, fmt="%.17g")


def read_header(path) -> dict:
    header = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                header[k.strip()] = v.strip()
    return header


def read_measurements(path) -> tuple[NearFieldData, dict]:
    """Parse a measurement file; the noise vector is regenerated from the stored seed."""
    header = read_header(path)
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise ConfigError(f"{path}: measurement header lacks {', '.join(missing)}")
    kind = DataKind.parse(header["kind"])
    table = np.loadtxt(path, comments="#", ndmin=2)
    if kind is DataKind.PHASE:
        if table.shape[1] != 3:
            raise ConfigError(f"{path}: phase data needs 3 columns, found {table.shape[1]}")
        values = table[:, 1] + 1j * table[:, 2]
    else:
        if table.shape[1] != 2:
            raise ConfigError(f"{path}: phaseless data needs 2 columns, found {table.shape[1]}")
        values = table[:, 1]
    if table.shape[0] != int(header["N"]):
        raise ConfigError(f"{path}: header says N={header['N']} but {table.shape[0]} rows found")
    seed = None if header["seed"] == "none" else int(header["seed"])
    delta = float(header["delta"])
    noise = noise_vector(table.shape[0], seed) if delta > 0 else None
    data = NearFieldData(kind, table[:, 0], values, float(header["h"]), delta, seed, noise, header)
    return data, header
