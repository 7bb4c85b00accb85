"""Numerical confirmation of the orbits predicted by averaging.

Predicted orbits are refined into periodic orbits of the full 4D blown-up
system by Newton shooting on a Poincare section, their periods are checked
against a one-degree-of-freedom quadrature, and the ``eps -> 0`` behaviour of
the initial conditions is measured.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from . import averaging as av
from . import closedform as cf
from .errors import (
    DomainError,
    GalorbitError,
    HypothesisViolatedError,
    NonConvergenceError,
    OracleDomainError,
)
from .integrator import (
    FloquetSpectrum,
    IntegratorConfig,
    flow,
    floquet,
    integrate_variational,
)
from .model import ModelParams, energy, energy_level, field_function, jacobian_function
from .reduction import _branch

log = logging.getLogger(__name__)

REFERENCE_EPS = 1e-2
MAX_NEWTON = 25
# extra Newton steps past the tolerance; the unit Floquet pair is a Jordan
# block whose computed eigenvalues split like sqrt(residual)
POLISH = 2
RESIDUAL_TOL = 1e-10
SHOOTING_CONFIG = IntegratorConfig(rtol=1e-13, atol=1e-14)

# (coordinate solved from energy, momentum fixed to 0 on the section, transverse pair)
_LAYOUT = {"x": (0, 2, (1, 3)), "y": (1, 3, (0, 2))}


@dataclass(frozen=True)
class PeriodicOrbitResult:
    ic: np.ndarray
    period: float
    energy: float
    eps: float
    floquet: FloquetSpectrum
    iterations: int
    residual: float
    branch: str
    history: tuple = ()

    @property
    def multipliers(self):
        return self.floquet.multipliers


# ---------------------------------------------------------------------------
# axial period oracle

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _turning_square(h, coeff, eps, scale):
    # positive root u of 2*scale*eps*coeff*u^2 + u - 2*scale*h = 0
    k = 16.0 * scale * scale * eps * coeff * h
    if 1.0 + k < 0:
        raise OracleDomainError("no turning point: the quartic well is too shallow")
    return 4.0 * scale * h / (1.0 + math.sqrt(1.0 + k))


def axial_period(branch, h, params: ModelParams, eps) -> float:
    """Period of the axial orbit from the one-degree-of-freedom quadrature.

    With ``u_max`` the turning point, ``u = u_max sin(phi)`` turns the
    integrand of ``4 s int_0^{u_max} du / sqrt(2 s h - u^2 - 2 s eps C u^4)``
    (``s`` = 1 or ``q``, ``C`` = ``a`` or ``c``) into the smooth
    ``1 / sqrt(1 + 2 s eps C u_max^2 (1 + sin^2 phi))`` on ``[0, pi/2]``.
    """
    branch = _branch(branch)
    h = energy_level(h)
    scale = 1.0 if branch == "x" else params.q
    coeff = params.a if branch == "x" else params.c
    u2 = _turning_square(h, coeff, eps, scale)
    lam = 2.0 * scale * eps * coeff * u2
    phi = 0.25 * math.pi * (_GL_X + 1.0)
    vals = 1.0 + lam * (1.0 + np.sin(phi) ** 2)
    if np.any(vals <= 0):
        raise OracleDomainError("turning point is not the first zero of the radicand")
    return float(4.0 * scale * 0.25 * math.pi * np.sum(_GL_W / np.sqrt(vals)))


def axial_period_elliptic(branch, h, params: ModelParams, eps) -> float:
    """Same period through complete elliptic integrals (independent check)."""
    branch = _branch(branch)
    h = energy_level(h)
    scale = 1.0 if branch == "x" else params.q
    coeff = params.a if branch == "x" else params.c
    u2 = _turning_square(h, coeff, eps, scale)
    lam = 2.0 * scale * eps * coeff * u2
    # int_0^{pi/2} dphi / sqrt(A + B sin^2) = K(-B/A) / sqrt(A)
    A, B = 1.0 + lam, lam
    return float(4.0 * scale * special.ellipk(-B / A) / math.sqrt(A))


def axial_state(branch, h, params: ModelParams, eps) -> np.ndarray:
    """Turning point of the axial orbit on the level ``h``."""
    scale = 1.0 if _branch(branch) == "x" else params.q
    coeff = params.a if branch == "x" else params.c
    u = math.sqrt(_turning_square(energy_level(h), coeff, eps, scale))
    return np.array([u, 0.0, 0.0, 0.0]) if branch == "x" else np.array([0.0, u, 0.0, 0.0])


# ---------------------------------------------------------------------------
# shooting


def _solve_on_section(branch, h, params, eps, s):
    """Fill in the energy-determined coordinate of a section point (positive root)."""
    c_idx, _, _ = _LAYOUT[branch]
    x, y, px, py = s
    a, b, c, q = params.a, params.b, params.c, params.q
    if branch == "x":
        A = eps * a
        B = 0.5 + eps * b * y * y
        C = (y * y + py * py) / (2 * q) + eps * c * y**4 - h
    else:
        A = eps * c
        B = 1.0 / (2 * q) + eps * b * x * x
        C = 0.5 * (x * x + px * px) + eps * a * x**4 - h
    disc = B * B - 4 * A * C
    if C >= 0 or disc < 0:
        raise DomainError("section point cannot be placed on the energy level")
    u2 = -2.0 * C / (B + math.sqrt(disc))
    out = np.array(s, dtype=float)
    out[c_idx] = math.sqrt(u2)
    return out


def _section_point(branch, h, params, eps, transverse):
    c_idx, m_idx, tr = _LAYOUT[branch]
    s = np.zeros(4)
    s[list(tr)] = transverse
    return _solve_on_section(branch, h, params, eps, s)


def _section_tangent(branch, params, eps, s):
    """d(state)/d(transverse) for points kept on the section and energy level."""
    c_idx, _, tr = _LAYOUT[branch]
    grad = _energy_gradient(params, eps, s)
    D = np.zeros((4, 2))
    for j, i in enumerate(tr):
        D[i, j] = 1.0
        D[c_idx, j] = -grad[i] / grad[c_idx]
    return D


def _energy_gradient(params, eps, s):
    x, y, px, py = s
    a, b, c, q = params.a, params.b, params.c, params.q
    return np.array([
        x + eps * (4 * a * x**3 + 2 * b * x * y * y),
        y / q + eps * (2 * b * x * x * y + 4 * c * y**3),
        px,
        py / q,
    ])


def _infer_branch(guess):
    x, y, px, py = guess
    return "x" if x * x + px * px >= y * y + py * py else "y"


def shoot_periodic(params: ModelParams, eps, guess, guess_T, h, branch=None,
                   config: IntegratorConfig = SHOOTING_CONFIG, max_iter=MAX_NEWTON,
                   tol=RESIDUAL_TOL) -> PeriodicOrbitResult:
    """Converge a periodic orbit of the full system by Newton shooting.

    The initial point is held on the section ``{p_x = 0, x > 0}`` (x-branch)
    or ``{p_y = 0, y > 0}`` (y-branch), with the remaining coordinate solved
    from ``H = h``; the unknowns are the two transverse coordinates and the
    period.  Sensitivities come from the variational equations.

    Once the residual is below ``tol`` up to ``POLISH`` further steps are
    taken while they keep reducing it.

    Raises
    ------
    NonConvergenceError
        If the return residual is not below ``tol`` after ``max_iter`` steps.
    """
    h = energy_level(h)
    guess = np.asarray(guess, dtype=float)
    branch = _branch(branch or _infer_branch(guess))
    c_idx, m_idx, tr = _LAYOUT[branch]
    if abs(guess[m_idx]) > 0 or abs(energy(params, eps, guess) - h) > 1e-12:
        warnings.warn(
            f"guess is off the section or the energy level (H = {energy(params, eps, guess):.15g}); "
            "projecting",
            stacklevel=2,
        )
    f = field_function(params, eps)
    jac = jacobian_function(params, eps)
    u = np.array([guess[tr[0]], guess[tr[1]], float(guess_T)])
    history = []
    best = None
    converged_at = None
    for it in range(max_iter + POLISH + 1):
        s0 = _section_point(branch, h, params, eps, u[:2])
        T = u[2]
        res = integrate_variational(f, jac, s0, T, config, check=(it == 0))
        sT = res.final_state
        residual = float(np.linalg.norm(sT - s0))
        history.append(residual)
        log.debug("shoot %s eps=%g it=%d residual=%.3e T=%.15g", branch, eps, it, residual, T)
        if converged_at is not None and residual >= 0.5 * best[1]:
            break  # polishing stalled; keep the previous iterate
        best = (it, residual, s0, T, res)
        if converged_at is None and residual <= tol:
            converged_at = it
        if converged_at is not None and (residual == 0.0 or it - converged_at >= POLISH):
            break
        if converged_at is None and it >= max_iter:
            raise NonConvergenceError(
                f"{branch}-branch shooting at eps={eps:g} did not converge "
                f"(residual {residual:.3e} after {max_iter} iterations)",
                history,
            )
        R = np.array([sT[tr[0]] - s0[tr[0]], sT[tr[1]] - s0[tr[1]], sT[m_idx]])
        D = _section_tangent(branch, params, eps, s0)
        dsT = res.monodromy @ D
        fT = f(T, sT)
        DR = np.empty((3, 3))
        DR[0, :2] = dsT[tr[0]] - D[tr[0]]
        DR[1, :2] = dsT[tr[1]] - D[tr[1]]
        DR[2, :2] = dsT[m_idx]
        DR[:, 2] = [fT[tr[0]], fT[tr[1]], fT[m_idx]]
        u = u - np.linalg.solve(DR, R)
    it, residual, s0, T, res = best
    spectrum = floquet(res.monodromy)
    return PeriodicOrbitResult(
        ic=s0,
        period=float(T),
        energy=energy(params, eps, s0),
        eps=float(eps),
        floquet=spectrum,
        iterations=it,
        residual=residual,
        branch=branch,
        history=tuple(history),
    )


# ---------------------------------------------------------------------------
# continuation in eps


@dataclass
class ContinuationStudy:
    branch: str
    h: float
    eps: np.ndarray
    displacement: np.ndarray  # |ic(eps) - ic(0)|
    unscaled_norm: np.ndarray  # sqrt(eps) |ic(eps)|
    orbits: list
    slope: float
    unscaled_slope: float


def _loglog_slope(x, y):
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def continuation_study(params: ModelParams, branch, h, eps_list,
                       config: IntegratorConfig = SHOOTING_CONFIG) -> ContinuationStudy:
    """Follow the axial orbit of ``branch`` through decreasing ``eps``.

    Each run is seeded by the previous one; the first by the unperturbed
    orbit at the predicted zero.  Fits the log-log slopes of the displacement
    ``|ic(eps) - ic(0)|`` and of the original-coordinate size ``sqrt(eps)|ic|``.
    """
    branch = _branch(branch)
    h = energy_level(h)
    eps = np.asarray(eps_list, dtype=float)
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise DomainError("eps list must be positive and strictly decreasing")
    zero = cf.predicted_zeros(branch, h, params).plus
    anchor = cf.FamilyAnchor(branch, zero, 0.0, params)
    ic0 = cf.unperturbed_orbit(anchor, 0.0)
    guess, T = ic0, anchor.period
    orbits = []
    tr = list(_LAYOUT[branch][2])
    for e in eps:
        try:
            guess = _section_point(branch, h, params, e, guess[tr])
            orb = shoot_periodic(params, e, guess, T, h, branch, config)
        except GalorbitError as exc:
            raise NonConvergenceError(f"continuation failed at eps={e:g}: {exc}") from exc
        orbits.append(orb)
        guess, T = orb.ic, orb.period
    disp = np.array([np.linalg.norm(o.ic - ic0) for o in orbits])
    unscaled = np.array([math.sqrt(o.eps) * np.linalg.norm(o.ic) for o in orbits])
    return ContinuationStudy(
        branch, h, eps, disp, unscaled, orbits,
        _loglog_slope(eps, disp), _loglog_slope(eps, unscaled),
    )


# ---------------------------------------------------------------------------
# whole pipeline on one energy level


@dataclass
class BranchOutcome:
    branch: str
    status: str  # "confirmed" | "inconclusive" | "failed"
    report: Optional[av.AveragingReport] = None
    orbit: Optional[PeriodicOrbitResult] = None
    zeros: list = field(default_factory=list)
    message: str = ""


@dataclass
class LevelCount:
    h: float
    eps: float
    branches: dict
    orbits: list

    @property
    def count(self):
        return len(self.orbits)


def _distinct(orbits, tol=1e-6):
    out = []
    for o in orbits:
        if all(np.linalg.norm(o.ic - p.ic) > tol for p in out):
            out.append(o)
    return out


def count_orbits_per_level(params: ModelParams, h, eps=REFERENCE_EPS, branches=("x", "y"),
                           quad: av.QuadratureSpec = None, grid_points=11,
                           config: IntegratorConfig = SHOOTING_CONFIG) -> LevelCount:
    """Hypotheses, averaged zeros and shooting on both branches of one level.

    Raises
    ------
    ResonanceError
        When ``q`` is rational or a branch's gap determinant vanishes.
    """
    h = energy_level(h)
    av.resonance_gate(params)
    outcomes = {}
    for br in branches:
        report = av.average_branch(br, h, params, quad, grid_points=grid_points)
        simple = [z for z in report.zeros if z.simple]
        if not simple:
            outcomes[br] = BranchOutcome(br, "inconclusive", report, zeros=report.zeros,
                                         message="averaged function has no simple zero (f1 == 0)")
            continue
        # +/- zeros start the same geometric orbit; shoot from the positive one
        z = max(simple, key=lambda z: z.alpha)
        anchor = cf.FamilyAnchor(br, z.alpha, 0.0, params)
        guess = cf.unperturbed_orbit(anchor, 0.0)
        guess = _section_point(br, h, params, eps, guess[list(_LAYOUT[br][2])])
        try:
            orb = shoot_periodic(params, eps, guess, anchor.period, h, br, config)
        except NonConvergenceError as exc:
            outcomes[br] = BranchOutcome(br, "failed", report, zeros=simple, message=str(exc))
            continue
        outcomes[br] = BranchOutcome(br, "confirmed", report, orb, simple)
    orbits = _distinct([o.orbit for o in outcomes.values() if o.orbit is not None])
    return LevelCount(h, float(eps), outcomes, orbits)
