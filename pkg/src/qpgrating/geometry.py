"""Periodic grating profiles parametrized by truncated Fourier series.

The coefficient vector is ordered ``[g0, c1, s1, c2, s2, ..., cM, sM]`` so that

    f(x) = g0 + sum_k (c_k cos(2 pi k x / period) + s_k sin(2 pi k x / period)).

With the default period ``2 pi`` the harmonics reduce to ``cos(kx)``, ``sin(kx)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GratingProfile:
    coeffs: np.ndarray
    period: float = TWO_PI
    order: int = field(init=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).ravel()
        if coeffs.size % 2 != 1:
            raise ConfigError(f"coefficient vector must have odd length 2M+1, got {coeffs.size}")
        if not self.period > 0:
            raise ConfigError(f"period must be positive, got {self.period}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "order", (coeffs.size - 1) // 2)

    @classmethod
    def flat(cls, level: float = 0.0, order: int = 0, period: float = TWO_PI) -> "GratingProfile":
        coeffs = np.zeros(2 * order + 1)
        coeffs[0] = level
        return cls(coeffs, period)

    def __call__(self, x):
        return eval_profile(self, x)

    def derivative(self, x):
        """Slope f'(x)."""
        x = np.asarray(x, dtype=float)
        w = TWO_PI / self.period
        out = np.zeros_like(x)
        for k in range(1, self.order + 1):
            c, s = self.coeffs[2 * k - 1], self.coeffs[2 * k]
            out = out + k * w * (-c * np.sin(k * w * x) + s * np.cos(k * w * x))
        return out

    def max_height(self, samples: int = 2048) -> float:
        x = np.arange(samples) * (self.period / samples)
        return float(np.max(eval_profile(self, x)))

    def min_height(self, samples: int = 2048) -> float:
        x = np.arange(samples) * (self.period / samples)
        return float(np.min(eval_profile(self, x)))

    def to_record(self) -> dict:
        return {"period": self.period, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_record(cls, record: dict) -> "GratingProfile":
        return cls(np.asarray(record["coeffs"], dtype=float), float(record.get("period", TWO_PI)))


def harmonic_basis(order: int, x, period: float = TWO_PI) -> np.ndarray:
    """Matrix whose columns are the 2M+1 basis functions sampled at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = TWO_PI / period
    cols = [np.ones_like(x)]
    for k in range(1, order + 1):
        cols.append(np.cos(k * w * x))
        cols.append(np.sin(k * w * x))
    return np.stack(cols, axis=-1)


def eval_profile(profile: GratingProfile, x):
    """Evaluate the truncated Fourier sum at scalar or array ``x``."""
    scalar = np.ndim(x) == 0
    values = harmonic_basis(profile.order, x, profile.period) @ profile.coeffs
    return float(values[0]) if scalar else values.reshape(np.shape(x))


def profile_error(a: GratingProfile, b: GratingProfile, grid_size: int = 512) -> tuple[float, float]:
    """Relative discrete L2 error of ``b`` against reference ``a`` and absolute max error.

    Both are measured on ``grid_size`` uniform points of ``[0, period)``. When the
    reference vanishes identically the L2 value falls back to the absolute norm.
    """
    if not np.isclose(a.period, b.period, rtol=1e-14, atol=0.0):
        raise ConfigError(f"period mismatch: {a.period} vs {b.period}")
    if grid_size < 2:
        raise ConfigError("grid_size must be at least 2")
    x = np.arange(grid_size) * (a.period / grid_size)
    fa, fb = eval_profile(a, x), eval_profile(b, x)
    diff = fb - fa
    ref = np.linalg.norm(fa)
    l2 = np.linalg.norm(diff) / ref if ref > 0 else np.linalg.norm(diff) / np.sqrt(grid_size)
    return float(l2), float(np.max(np.abs(diff)))


def pad_coeffs(coeffs, order: int) -> np.ndarray:
    """Zero-pad or truncate a coefficient vector to a given order."""
    coeffs = np.asarray(coeffs, dtype=float)
    out = np.zeros(2 * order + 1)
    n = min(out.size, coeffs.size)
    out[:n] = coeffs[:n]
    return out
