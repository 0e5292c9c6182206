"""Discrete Fourier transform on Z_N and residual bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _as_vector(f) -> np.ndarray:
    v = np.asarray(f, dtype=complex).ravel()
    if v.size == 0:
        raise ValueError("empty input vector")
    return v


def _phase_matrix(n: int, sign: int) -> np.ndarray:
    k = np.arange(n)
    # reduce the exponent mod n before exponentiating to keep phases exact-ish
    return np.exp(sign * 2j * np.pi * (np.outer(k, k) % n) / n)


def dft(f) -> np.ndarray:
    """Forward transform ``out[k] = sum_r omega**(k r) f[r]`` with ``omega = exp(2 pi i / N)``."""
    v = _as_vector(f)
    return _phase_matrix(v.size, +1) @ v


def idft(g) -> np.ndarray:
    """Inverse of :func:`dft`: ``out[r] = (1/N) sum_k omega**(-k r) g[k]``."""
    v = _as_vector(g)
    return _phase_matrix(v.size, -1) @ v / v.size


def residual(lhs: complex, rhs: complex) -> float:
    """Hybrid residual ``|lhs - rhs| / max(1, |lhs|, |rhs|)``."""
    a, b = complex(lhs), complex(rhs)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError(f"non-finite input: {lhs!r}, {rhs!r}")
    return abs(a - b) / max(1.0, abs(a), abs(b))


def max_residual(lhs, rhs) -> float:
    """Elementwise :func:`residual`, maximised over two equal-shape arrays."""
    a = np.asarray(lhs, dtype=complex).ravel()
    b = np.asarray(rhs, dtype=complex).ravel()
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    if a.size == 0:
        return 0.0
    return max(residual(x, y) for x, y in zip(a, b))


def ensure_finite(x, what: str = "value"):
    arr = np.asarray(x)
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite {what}")
    return x


@dataclass
class ResidualReport:
    """One certified identity: the worst residual seen and its tolerance."""

    identity_name: str
    residual: float
    tolerance: float
    parameter_point: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.residual < 0 or math.isnan(self.residual):
            raise ValueError("residual must be a non-negative number")

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "identity_name": self.identity_name,
            "parameter_point": {k: _jsonable(v) for k, v in sorted(self.parameter_point.items())},
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
        }


def _jsonable(v):
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def worst(name: str, points, tolerance: float) -> ResidualReport:
    """Collapse ``(residual, params)`` pairs into the report of the worst point."""
    points = list(points)
    if not points:
        return ResidualReport(name, 0.0, tolerance, {})
    res, params = max(points, key=lambda p: p[0])
    return ResidualReport(name, float(res), tolerance, dict(params))
