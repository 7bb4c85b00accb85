"""Closed-form objects of the unperturbed problem.

Families of ``eps = 0`` periodic orbits on an energy level, their analytic
fundamental matrices in the reduced charts, the gap matrices
``M^{-1}(0) - M^{-1}(T)``, and the closed-form averaged functions together
with their zeros.

Two charts parametrize a family at fixed ``h``:

* amplitude chart ``alpha = u0`` with ``p0 = +sqrt(R^2 - alpha^2)``;
* angle chart ``(u0, p0) = R (sin theta, cos theta)``,

where ``R^2 = 2h`` on the x-branch and ``R^2 = 2qh`` on the y-branch.  The
averaged function vanishes on the boundary of the amplitude chart, where
``dp0/dalpha`` blows up, so simplicity is judged in the angle chart.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import ChartSingularError, DomainError, InconsistentAnchorError, ResonanceRequiredError
from .model import ModelParams, energy_level
from .reduction import ANCHOR_TOL, _branch

MAX_DENOMINATOR = 10**6
RATIONAL_TOL = 1e-12


def rational_approximation(q, max_denominator=MAX_DENOMINATOR, tol=RATIONAL_TOL):
    """Return ``(r, s)`` with ``q == r/s`` to floating-point accuracy, else ``None``.

    Walks the continued-fraction convergents of ``q``.  A convergent with
    denominator ``s`` is accepted when ``|q - r/s| <= min(tol, 1/(10 s^2))``;
    the second bound keeps badly approximable irrationals (golden ratio,
    sqrt 2) from being mistaken for fractions with six-digit denominators.
    Any fraction this close to ``q`` is necessarily a convergent.
    """
    q = float(q)
    x = Fraction(q)
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    while True:
        a = math.floor(x)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > max_denominator:
            return None
        if abs(q - h1 / k1) <= min(tol, 0.1 / (k1 * k1)):
            g = math.gcd(h1, k1)
            return h1 // g, k1 // g
        frac = x - a
        if frac == 0:
            return None
        x = 1 / frac


def radius_squared(branch, h, params: ModelParams) -> float:
    """``u0^2 + p0^2`` on the level ``h``: ``2h`` (x) or ``2qh`` (y)."""
    h = energy_level(h)
    return 2.0 * h if _branch(branch) == "x" else 2.0 * params.q * h


@dataclass(frozen=True)
class FamilyAnchor:
    """Initial data ``(u0, p0)`` of an unperturbed orbit in one invariant plane.

    ``u0, p0`` are ``(x0, p_x0)`` for the x-branch and ``(y0, p_y0)`` for the
    y-branch.  The frequency in that plane is 1 (x) or ``1/q`` (y).
    """

    branch: str
    u0: float
    p0: float
    params: ModelParams

    def __post_init__(self):
        _branch(self.branch)
        if not (math.isfinite(self.u0) and math.isfinite(self.p0)):
            raise DomainError("anchor components must be finite")

    @property
    def omega(self) -> float:
        return 1.0 if self.branch == "x" else 1.0 / self.params.q

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def h(self) -> float:
        r2 = self.u0**2 + self.p0**2
        return 0.5 * r2 if self.branch == "x" else 0.5 * r2 / self.params.q

    def check_level(self, h):
        if abs(self.h - h) > ANCHOR_TOL * max(1.0, h):
            raise InconsistentAnchorError(
                f"anchor energy {self.h:.16g} differs from level {h:.16g}"
            )
        return self


def amplitude_anchor(branch, alpha, h, params: ModelParams) -> FamilyAnchor:
    r2 = radius_squared(branch, h, params)
    rad = r2 - alpha * alpha
    if rad < 0:
        raise DomainError(f"amplitude {alpha!r} outside [-{math.sqrt(r2)}, {math.sqrt(r2)}]")
    return FamilyAnchor(branch, float(alpha), math.sqrt(rad), params)


def angle_anchor(branch, theta, h, params: ModelParams) -> FamilyAnchor:
    R = math.sqrt(radius_squared(branch, h, params))
    return FamilyAnchor(branch, R * math.sin(theta), R * math.cos(theta), params)


def plane_motion(anchor: FamilyAnchor, t):
    """Position and (signed) momentum in the invariant plane at time ``t``."""
    w = anchor.omega * t
    cw, sw = math.cos(w), math.sin(w)
    return anchor.u0 * cw + anchor.p0 * sw, anchor.p0 * cw - anchor.u0 * sw


def unperturbed_orbit(anchor: FamilyAnchor, t) -> np.ndarray:
    """Phase state ``(x, y, p_x, p_y)`` of the ``eps = 0`` orbit at time ``t``."""
    u, p = plane_motion(anchor, t)
    if anchor.branch == "x":
        return np.array([u, 0.0, p, 0.0])
    return np.array([0.0, u, 0.0, p])


def reduced_orbit(anchor: FamilyAnchor, t) -> np.ndarray:
    """The same orbit in the reduced chart of its branch."""
    u, _ = plane_motion(anchor, t)
    return np.array([u, 0.0, 0.0])


def orbit_momentum(anchor: FamilyAnchor, t) -> float:
    """Signed eliminated momentum along the orbit (``p_x`` or ``p_y``)."""
    return plane_motion(anchor, t)[1]


def resonant_orbit(params: ModelParams, z0, t) -> np.ndarray:
    """Orbit of the linear system when ``q = r/s`` is rational.

    Every solution is then ``2 pi r``-periodic.  ``z0`` is the initial state.
    """
    frac = rational_approximation(params.q)
    if frac is None:
        raise ResonanceRequiredError(f"q = {params.q!r} is not rational")
    x0, y0, px0, py0 = z0
    w = t / params.q
    return np.array([
        x0 * math.cos(t) + px0 * math.sin(t),
        y0 * math.cos(w) + py0 * math.sin(w),
        px0 * math.cos(t) - x0 * math.sin(t),
        py0 * math.cos(w) - y0 * math.sin(w),
    ])


def resonant_period(params: ModelParams) -> float:
    frac = rational_approximation(params.q)
    if frac is None:
        raise ResonanceRequiredError(f"q = {params.q!r} is not rational")
    return 2.0 * math.pi * frac[0]


def _rotation(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s], [-s, c]])


def analytic_fundamental(anchor: FamilyAnchor, t, inverse=False) -> np.ndarray:
    """Principal fundamental matrix of the reduced variational equation.

    Block diagonal: the chart direction evolves as ``P(t)/p0`` (``P`` the
    signed eliminated momentum), the transverse pair rotates at the other
    frequency.  Requires ``p0 != 0``.
    """
    if anchor.p0 == 0.0:
        raise ChartSingularError(f"{anchor.branch}-branch anchor has zero momentum")
    P = orbit_momentum(anchor, t)
    other = t / anchor.params.q if anchor.branch == "x" else t
    M = np.zeros((3, 3))
    if inverse:
        M[0, 0] = anchor.p0 / P
        M[1:, 1:] = _rotation(-other)
    else:
        M[0, 0] = P / anchor.p0
        M[1:, 1:] = _rotation(other)
    return M


class GapMatrix(NamedTuple):
    matrix: np.ndarray
    delta: np.ndarray
    det: float


def gap_from_matrix(G, k=1) -> GapMatrix:
    G = np.asarray(G, dtype=float)
    delta = G[k:, k:]
    return GapMatrix(G, delta, float(np.linalg.det(delta)) if delta.size else 1.0)


def gap_matrix(branch, params: ModelParams) -> GapMatrix:
    """``M^{-1}(0) - M^{-1}(T)`` in closed form."""
    angle = math.pi / params.q if _branch(branch) == "x" else math.pi * params.q
    s2 = 2.0 * math.sin(angle) ** 2
    s = math.sin(2.0 * angle)
    G = np.array([[0.0, 0.0, 0.0], [0.0, s2, s], [0.0, -s, s2]])
    return GapMatrix(G, G[1:, 1:], 4.0 * math.sin(angle) ** 2)


def _coefficient(branch, params, h):
    # prefactor of sqrt(R^2 - alpha^2)
    if branch == "x":
        return 3.0 * params.a * h
    return 3.0 * params.c * h * params.q**2


def averaged_f_closed(branch, alpha, h, params: ModelParams) -> float:
    """Closed form ``3ah sqrt(2h - alpha^2)`` (x) or ``3chq^2 sqrt(2qh - alpha^2)`` (y)."""
    branch = _branch(branch)
    r2 = radius_squared(branch, h, params)
    rad = r2 - alpha * alpha
    if abs(rad) <= 8 * np.finfo(float).eps * r2:
        rad = 0.0  # endpoint reached through rounding
    elif rad < 0:
        raise DomainError(f"amplitude {alpha!r} outside the closed interval |alpha| <= {math.sqrt(r2)!r}")
    return _coefficient(branch, params, h) * math.sqrt(rad)


def averaged_f_angle(branch, theta, h, params: ModelParams) -> float:
    """Closed form in the angle chart: ``C R cos(theta)``."""
    branch = _branch(branch)
    R = math.sqrt(radius_squared(branch, h, params))
    return _coefficient(branch, params, h) * R * math.cos(theta)


def averaged_f_angle_derivative(branch, theta, h, params: ModelParams) -> float:
    R = math.sqrt(radius_squared(branch, h, params))
    return -_coefficient(_branch(branch), params, h) * R * math.sin(theta)


class PredictedZeros(NamedTuple):
    minus: float
    plus: float
    # both zeros start the same geometric orbit
    orbit_id: str


def predicted_zeros(branch, h, params: ModelParams) -> PredictedZeros:
    R = math.sqrt(radius_squared(branch, h, params))
    return PredictedZeros(-R, R, f"{branch}-axial")
