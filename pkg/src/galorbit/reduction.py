"""Restriction of the blown-up system to an energy level ``H = h``.

One momentum is eliminated through the energy relation and the remaining
three coordinates form the reduced state:

* x-branch: ``p_x`` eliminated, reduced state ``(x, y, p_y)``;
* y-branch: ``p_y`` eliminated, reduced state ``(y, x, p_x)``.

The reduced field splits as ``F0 + eps * F1`` where ``F1`` comes from the
first-order expansion of the eliminated momentum in ``eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChartBoundaryError,
    DomainError,
    ExpansionSingularError,
    InconsistentAnchorError,
    OutsideEnergyShellError,
)
from .model import ModelParams, energy_level

BRANCHES = ("x", "y")
# F0 has an unbounded derivative at the chart boundary; refuse to go closer.
CHART_GUARD = 1e-10
ANCHOR_TOL = 1e-12


def _branch(branch):
    if branch not in BRANCHES:
        raise DomainError(f"branch must be 'x' or 'y', got {branch!r}")
    return branch


def _reduced(r):
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise DomainError(f"reduced state must have 3 components, got shape {r.shape}")
    return r


def _quartic(params, x, y):
    x2, y2 = x * x, y * y
    return params.a * x2 * x2 + params.b * x2 * y2 + params.c * y2 * y2


def _coords(branch, r):
    """Return ``(x, y, other)`` where ``other`` is the surviving momentum."""
    if branch == "x":
        x, y, py = r
        return x, y, py
    y, x, px = r
    return x, y, px


def zeroth_radicand(branch, h, params: ModelParams, r) -> float:
    x, y, mom = _coords(branch, _reduced(r))
    q = params.q
    if branch == "x":
        return 2.0 * h - x * x - (y * y + mom * mom) / q
    return 2.0 * q * h - q * (mom * mom + x * x) - y * y


def exact_radicand(branch, h, params: ModelParams, eps, r) -> float:
    x, y, _ = _coords(branch, _reduced(r))
    scale = 1.0 if branch == "x" else params.q
    return zeroth_radicand(branch, h, params, r) - 2.0 * scale * eps * _quartic(params, x, y)


def eliminate_momentum(branch, h, params: ModelParams, eps, r, sign=1) -> float:
    """Solve ``H = h`` for the eliminated momentum (``p_x`` or ``p_y``).

    The eps-dependent quartic terms are kept exactly.  ``sign`` selects the
    square-root branch.

    Raises
    ------
    OutsideEnergyShellError
        If the radicand is negative.
    """
    branch = _branch(branch)
    rad = exact_radicand(branch, energy_level(h), params, eps, r)
    if rad < 0:
        raise OutsideEnergyShellError(branch, rad)
    return math.copysign(math.sqrt(rad), sign)


def first_order_expansion(branch, h, params: ModelParams, r):
    """Coefficients ``(m0, m1)`` with ``momentum = m0 + eps*m1 + O(eps^2)``."""
    branch = _branch(branch)
    rad = zeroth_radicand(branch, energy_level(h), params, r)
    if rad <= 0:
        raise ExpansionSingularError(
            f"{branch}-branch: zeroth-order radicand {rad:.6g} is not positive"
        )
    m0 = math.sqrt(rad)
    x, y, _ = _coords(branch, _reduced(r))
    scale = 1.0 if branch == "x" else params.q
    return m0, -scale * _quartic(params, x, y) / m0


def lift(branch, h, params: ModelParams, eps, r, sign=1) -> np.ndarray:
    """Reconstruct the 4D state ``(x, y, p_x, p_y)`` from a reduced state."""
    mom = eliminate_momentum(branch, h, params, eps, r, sign)
    x, y, other = _coords(branch, _reduced(r))
    if branch == "x":
        return np.array([x, y, mom, other])
    return np.array([x, y, other, mom])


def project(branch, s) -> np.ndarray:
    """Drop the eliminated momentum from a 4D state."""
    x, y, px, py = np.asarray(s, dtype=float)
    if _branch(branch) == "x":
        return np.array([x, y, py])
    return np.array([y, x, px])


@dataclass(frozen=True)
class BranchFields:
    """Unperturbed and perturbation fields of one reduced branch.

    ``momentum`` arguments override the ``+sqrt`` chart value of the
    eliminated momentum at zeroth order.  Along an unperturbed orbit the
    eliminated momentum changes sign; passing the signed value continues the
    fields analytically past the turning points, which the ``+sqrt`` chart
    alone cannot do.
    """

    branch: str
    h: float
    params: ModelParams

    def _momentum(self, r, momentum):
        if momentum is not None:
            return float(momentum)
        rad = zeroth_radicand(self.branch, self.h, self.params, r)
        if rad < 0:
            raise OutsideEnergyShellError(self.branch, rad)
        if rad < CHART_GUARD:
            raise ChartBoundaryError(
                f"{self.branch}-branch: radicand {rad:.3g} below chart guard {CHART_GUARD:g}"
            )
        return math.sqrt(rad)

    def F0(self, r, momentum=None) -> np.ndarray:
        r = _reduced(r)
        m = self._momentum(r, momentum)
        q = self.params.q
        if self.branch == "x":
            _, y, py = r
            return np.array([m, py / q, -y / q])
        _, x, px = r
        return np.array([m / q, px, -x])

    def F1(self, r, momentum=None) -> np.ndarray:
        r = _reduced(r)
        m = self._momentum(r, momentum)
        p = self.params
        x, y, _ = _coords(self.branch, r)
        first = -_quartic(p, x, y) / m
        if self.branch == "x":
            return np.array([first, 0.0, -(2.0 * p.b * x * x * y + 4.0 * p.c * y**3)])
        return np.array([first, 0.0, -(4.0 * p.a * x**3 + 2.0 * p.b * x * y * y)])

    def field(self, r, eps, momentum=None) -> np.ndarray:
        """First-order reduced field ``F0 + eps*F1``."""
        return self.F0(r, momentum) + eps * self.F1(r, momentum)

    def exact_field(self, r, eps, sign=1) -> np.ndarray:
        """Reduced field with the eliminated momentum solved exactly."""
        r = _reduced(r)
        p = self.params
        m = eliminate_momentum(self.branch, self.h, p, eps, r, sign)
        x, y, _ = _coords(self.branch, r)
        if self.branch == "x":
            _, _, py = r
            return np.array([m, py / p.q, -y / p.q - eps * (2 * p.b * x * x * y + 4 * p.c * y**3)])
        _, _, px = r
        return np.array([m / p.q, px, -x - eps * (4 * p.a * x**3 + 2 * p.b * x * y * y)])

    def jacobian_F0(self, r, momentum=None) -> np.ndarray:
        r = _reduced(r)
        m = self._momentum(r, momentum)
        q = self.params.q
        J = np.zeros((3, 3))
        if self.branch == "x":
            x, y, py = r
            J[0] = [-x / m, -y / (q * m), -py / (q * m)]
            J[1, 2] = 1.0 / q
            J[2, 1] = -1.0 / q
        else:
            y, x, px = r
            J[0] = [-y / (q * m), -x / m, -px / m]
            J[1, 2] = 1.0
            J[2, 1] = -1.0
        return J


def branch_fields(branch, h, params: ModelParams, anchor) -> BranchFields:
    """Build the reduced fields for the family through ``anchor``.

    ``anchor`` is ``(x0, p_x0)`` on the x-branch and ``(y0, p_y0)`` on the
    y-branch; it must lie on the level ``h``.
    """
    branch = _branch(branch)
    h = energy_level(h)
    u0, p0 = anchor
    level = 0.5 * (u0 * u0 + p0 * p0)
    if branch == "y":
        level /= params.q
    if abs(level - h) > ANCHOR_TOL * max(1.0, h):
        raise InconsistentAnchorError(
            f"{branch}-branch anchor has energy {level:.16g}, expected {h:.16g}"
        )
    return BranchFields(branch, h, params)
