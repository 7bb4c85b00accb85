"""Quartic galactic Hamiltonian.

    H = (p_x^2 + x^2)/2 + (p_y^2 + y^2)/(2q) + eps*(a x^4 + b x^2 y^2 + c y^4)

With ``eps = 1`` the coordinates are the original ones; for ``eps > 0`` small
they are the blown-up coordinates obtained by dividing the original ones by
``sqrt(eps)``.  The two readings share a single vector field.

State vectors are ordered ``(x, y, p_x, p_y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError

TO_SCALED = "to-scaled"
TO_ORIGINAL = "to-original"


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the quartic potential and the frequency ratio ``q``."""

    a: float
    b: float
    c: float
    q: float

    def __post_init__(self):
        for name in ("a", "b", "c", "q"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if self.q <= 0:
            raise DomainError(f"q must be positive, got {self.q!r}")


class PhaseState(NamedTuple):
    x: float
    y: float
    px: float
    py: float

    def as_array(self):
        return np.array(self, dtype=float)


def energy_level(h):
    """Validate an energy level ``h > 0`` and return it as a float."""
    h = float(h)
    if not (math.isfinite(h) and h > 0):
        raise DomainError(f"energy level must be positive, got {h!r}")
    return h


def _state(s):
    s = np.asarray(s, dtype=float)
    if s.shape != (4,):
        raise DomainError(f"phase state must have 4 components, got shape {s.shape}")
    return s


def energy(params: ModelParams, eps: float, s) -> float:
    x, y, px, py = _state(s)
    quad = 0.5 * (px * px + x * x) + (py * py + y * y) / (2.0 * params.q)
    x2, y2 = x * x, y * y
    quartic = params.a * x2 * x2 + params.b * x2 * y2 + params.c * y2 * y2
    return float(quad + eps * quartic)


def vector_field(params: ModelParams, eps: float, s) -> np.ndarray:
    """Hamilton's equations ``(dx, dy, dp_x, dp_y)/dt``."""
    x, y, px, py = _state(s)
    a, b, c, q = params.a, params.b, params.c, params.q
    return np.array([
        px,
        py / q,
        -x - eps * (4.0 * a * x**3 + 2.0 * b * x * y * y),
        -y / q - eps * (2.0 * b * x * x * y + 4.0 * c * y**3),
    ])


def jacobian(params: ModelParams, eps: float, s) -> np.ndarray:
    """Analytic derivative of :func:`vector_field` with respect to the state."""
    x, y, _, _ = _state(s)
    a, b, c, q = params.a, params.b, params.c, params.q
    J = np.zeros((4, 4))
    J[0, 2] = 1.0
    J[1, 3] = 1.0 / q
    J[2, 0] = -1.0 - eps * (12.0 * a * x * x + 2.0 * b * y * y)
    J[2, 1] = -eps * 4.0 * b * x * y
    J[3, 0] = -eps * 4.0 * b * x * y
    J[3, 1] = -1.0 / q - eps * (2.0 * b * x * x + 12.0 * c * y * y)
    return J


def field_function(params: ModelParams, eps: float):
    """Return ``f(t, s)`` suitable for the integrator."""
    return lambda t, s: vector_field(params, eps, s)


def jacobian_function(params: ModelParams, eps: float):
    return lambda t, s: jacobian(params, eps, s)


def rescale(s, eps: float, direction: str = TO_ORIGINAL) -> np.ndarray:
    """Map between blown-up ``(x, y, p_x, p_y)`` and original coordinates.

    ``to-original`` multiplies every component by ``sqrt(eps)``;
    ``to-scaled`` divides by it.
    """
    if not eps > 0:
        raise DomainError(f"rescaling needs eps > 0, got {eps!r}")
    s = _state(s)
    root = math.sqrt(eps)
    if direction == TO_ORIGINAL:
        return s * root
    if direction == TO_SCALED:
        return s / root
    raise DomainError(f"unknown rescaling direction {direction!r}")


# Canonical symplectic form for the ordering (x, y, p_x, p_y).
J4 = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
