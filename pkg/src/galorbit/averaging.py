"""First-order averaging engine (Malkin bifurcation function).

Given an unperturbed system with a family of ``T``-periodic solutions
``x(t, z_alpha)`` and fundamental matrices ``M_alpha(t)``, the bifurcation
function is

    F(alpha) = (1/2pi) * xi( int_0^T M_alpha(t)^{-1} F1(t, x(t, z_alpha)) dt )

where ``xi`` keeps the first ``k`` components.  Simple zeros of ``F`` mark
the unperturbed orbits that persist for small ``eps``, provided the gap
matrix ``M^{-1}(0) - M^{-1}(T)`` has a zero upper-right ``k x (n-k)`` block
and an invertible lower-right block.

For the galactic model the integrand has double poles where the eliminated
momentum vanishes; integrals are then taken as Hadamard finite parts
(symmetric limits with the ``1/delta`` divergence removed).
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate

from . import closedform as cf
from .errors import DomainError, HypothesisViolatedError, QuadratureIntegrityError, ResonanceError
from .model import ModelParams, energy_level
from .reduction import BranchFields, _branch

SUBTRACTION = "closed-form-subtraction"
EXCISION = "symmetric-excision"

ZERO_TOL = 1e-10
DERIV_TOL = 1e-6
SCAN_POINTS = 512
GRID_CLIP = 0.99


@dataclass(frozen=True)
class PeriodicFamily:
    """Chart ``alpha -> z_alpha`` of ``T``-periodic unperturbed solutions.

    ``solution(alpha, t)`` and ``fundamental(alpha, t, inverse)`` provide the
    orbit and a fundamental matrix of the variational equation.  Optional
    hooks:

    ``singular_times(alpha)``
        times in ``[0, T)`` where the integrand has a double pole;
    ``singular_part(alpha)``
        ``(s, fp)`` with ``s(t)`` a ``k``-vector carrying the poles and
        ``fp`` its finite-part integral over one period;
    ``branch_momentum(alpha, t)``
        signed eliminated momentum, forwarded to ``F1`` as ``momentum=``.
    """

    k: int
    n: int
    domain: tuple
    period: float
    solution: Callable
    fundamental: Callable
    anchor: Optional[Callable] = None
    singular_times: Optional[Callable] = None
    singular_part: Optional[Callable] = None
    branch_momentum: Optional[Callable] = None
    label: str = ""

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise DomainError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not self.period > 0:
            raise DomainError("period must be positive")


@dataclass(frozen=True)
class QuadratureSpec:
    node_count: int = 128
    singular_times: Optional[Sequence[float]] = None
    scheme: str = SUBTRACTION
    excision_half_width: float = 1e-4

    def __post_init__(self):
        if self.node_count < 64:
            raise DomainError("node_count must be at least 64")
        if self.scheme not in (SUBTRACTION, EXCISION):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if self.scheme == EXCISION and not self.excision_half_width > 0:
            raise DomainError("excision half-width must be positive")


class HypothesisReport(NamedTuple):
    gap: cf.GapMatrix
    upper_right_zero: bool
    det_nonzero: bool
    samples: tuple  # (alpha, det) pairs

    @property
    def ok(self):
        return self.upper_right_zero and self.det_nonzero


class Zero(NamedTuple):
    location: float  # in the scan chart
    alpha: float  # in the family chart
    value: float
    derivative: float
    simple: bool
    chart: str
    orbit_id: str = ""


@dataclass
class AveragingReport:
    branch: str
    h: float
    alpha: np.ndarray
    f_quad: np.ndarray
    f_closed: Optional[np.ndarray]
    hypotheses: HypothesisReport
    zeros: list = field(default_factory=list)

    @property
    def closed_form_deviation(self):
        if self.f_closed is None:
            return None
        return float(np.max(np.abs(self.f_quad - self.f_closed)))

    @property
    def inconclusive(self):
        return not any(z.simple for z in self.zeros)


# ---------------------------------------------------------------------------
# hypotheses


def _interior_samples(family, count):
    lo, hi = family.domain
    return lo + (hi - lo) * (np.arange(count) + 0.5) / count


def check_hypotheses(family: PeriodicFamily, tol=1e-10, samples=5, raise_on_failure=True):
    """Check the gap-matrix conditions at a few interior chart points.

    Raises
    ------
    HypothesisViolatedError
        With ``flag`` set to ``"upper-right"`` or ``"det"`` and ``det`` the
        smallest determinant seen (when ``raise_on_failure``).
    """
    k, T = family.k, family.period
    dets, first, ur_ok = [], None, True
    for alpha in _interior_samples(family, samples):
        G = (family.fundamental(alpha, 0.0, inverse=True)
             - family.fundamental(alpha, T, inverse=True))
        gap = cf.gap_from_matrix(G, k)
        first = first or gap
        if G[:k, k:].size and np.max(np.abs(G[:k, k:])) > tol:
            ur_ok = False
        dets.append((float(alpha), gap.det))
    det_ok = all(abs(d) > tol for _, d in dets)
    report = HypothesisReport(first, ur_ok, det_ok, tuple(dets))
    if raise_on_failure and not report.ok:
        worst = min((d for _, d in dets), key=abs)
        flag = "upper-right" if not ur_ok else "det"
        raise HypothesisViolatedError(
            f"{family.label or 'family'}: gap-matrix hypothesis '{flag}' fails "
            f"(det Delta = {worst:.3e})",
            flag=flag,
            det=worst,
        )
    return report


# ---------------------------------------------------------------------------
# quadrature


def _integrand(family, F1, alpha):
    k = family.k

    def g(t):
        state = family.solution(alpha, t)
        Minv = family.fundamental(alpha, t, inverse=True)
        if family.branch_momentum is not None:
            f1 = F1(t, state, momentum=family.branch_momentum(alpha, t))
        else:
            f1 = F1(t, state)
        return (Minv @ np.asarray(f1, dtype=float))[:k]

    return g


def _best_offset(T, N, singular):
    """Trapezoid offset keeping nodes as far as possible from the poles."""
    dt = T / N
    if not singular:
        return 0.0
    s = np.mod(np.asarray(singular, dtype=float), dt)
    offsets = np.linspace(0.0, dt, 257, endpoint=False)
    dist = np.abs(np.mod(s[None, :] - offsets[:, None] + dt / 2, dt) - dt / 2)
    return float(offsets[np.argmax(dist.min(axis=1))])


def _periodic_trapezoid(func, T, N, offset):
    nodes = offset + T * np.arange(N) / N
    vals = np.array([func(t) for t in nodes])
    if not np.all(np.isfinite(vals)):
        raise QuadratureIntegrityError("non-finite integrand value at a quadrature node")
    full = T / N * vals.sum(axis=0)
    half = 2.0 * T / N * vals[::2].sum(axis=0)
    scale = T / N * np.abs(vals).sum(axis=0)
    if np.any(np.abs(full - half) > 1e-8 * np.maximum(1.0, scale)):
        raise QuadratureIntegrityError(
            "trapezoid estimates at N and N/2 nodes disagree: integrand has an "
            "undeclared singularity or is under-resolved"
        )
    return full


def _singular_times(family, alpha, quad):
    if quad.singular_times is not None:
        times = quad.singular_times
    elif family.singular_times is not None:
        times = family.singular_times(alpha)
    else:
        times = ()
    return sorted(float(np.mod(t, family.period)) for t in times)


def _subtraction(family, g, alpha, quad, times):
    T, N = family.period, quad.node_count
    fp = np.zeros(family.k)
    func = g
    if times:
        if family.singular_part is None:
            raise QuadratureIntegrityError(
                "closed-form subtraction needs a singular part for a singular integrand"
            )
        s, fp = family.singular_part(alpha)
        fp = np.atleast_1d(np.asarray(fp, dtype=float))
        func = lambda t: g(t) - np.atleast_1d(s(t))
    return _periodic_trapezoid(func, T, N, _best_offset(T, N, times)) + fp


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _graded_breakpoints(lo, hi, delta):
    """Panels doubling in width away from poles sitting at ``lo - delta`` and ``hi + delta``."""
    mid = 0.5 * (lo + hi)
    left = [lo]
    d = delta
    while lo + (2 * d - delta) < mid:
        d *= 2
        left.append(lo + (d - delta))
    right = [hi - (x - lo) for x in left]
    return np.array(left + [mid] + right[::-1])


def _gap_integral(g, k, lo, hi, delta=None):
    """Integral of ``g`` over ``[lo, hi]``.

    With ``delta`` given, double poles sit at distance ``delta`` outside both
    ends and composite Gauss-Legendre on geometrically graded panels is used;
    otherwise adaptive quadrature.
    """
    if delta is None:
        out = np.empty(k)
        for i in range(k):
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    out[i] = integrate.quad(lambda t: g(t)[i], lo, hi,
                                            epsabs=1e-15, epsrel=1e-13, limit=500)[0]
                except integrate.IntegrationWarning as exc:
                    raise QuadratureIntegrityError(
                        f"adaptive quadrature failed on [{lo:.6g}, {hi:.6g}]: {exc}"
                    ) from exc
        return out
    bps = _graded_breakpoints(lo, hi, delta)
    a, b = bps[:-1], bps[1:]
    nodes = (0.5 * (b - a))[:, None] * _GL_X[None, :] + (0.5 * (a + b))[:, None]
    weights = (0.5 * (b - a))[:, None] * _GL_W[None, :]
    vals = np.array([g(t) for t in nodes.ravel()])
    if not np.all(np.isfinite(vals)):
        raise QuadratureIntegrityError(f"non-finite integrand on [{lo:.6g}, {hi:.6g}]")
    return weights.ravel() @ vals


def excised_integral(g, k, T, times, delta):
    """Integral over one period with ``(t_s - delta, t_s + delta)`` removed."""
    if not times:
        return _gap_integral(g, k, 0.0, T)
    total = np.zeros(k)
    ends = list(times[1:]) + [times[0] + T]
    for start, end in zip(times, ends):
        if end - start <= 2 * delta:
            raise QuadratureIntegrityError("excision half-width exceeds pole separation")
        total += _gap_integral(g, k, start + delta, end - delta, delta)
    return total


def finite_part(g, k, T, times, delta0, levels=4):
    """Hadamard finite part by Richardson elimination in the half-width.

    With double poles ``I(delta) = FP + A/delta + B delta + C delta^3 + ...``;
    ``levels`` half-widths ``delta0 * 2^j`` fix the first ``levels`` terms.
    The half-widths grow from ``delta0`` because the pole distance of a node
    is only known to ``eps_mach * |t|``.
    """
    if not times:
        return _gap_integral(g, k, 0.0, T)
    deltas = delta0 * 2.0 ** np.arange(levels)
    basis = [np.ones_like(deltas), 1.0 / deltas, deltas, deltas**3, deltas**5][:levels]
    A = np.column_stack(basis)
    I = np.array([excised_integral(g, k, T, times, d) for d in deltas])
    coef = np.linalg.solve(A, I)
    return coef[0]


def bifurcation_vector(family: PeriodicFamily, F1, alpha, quad: QuadratureSpec = None):
    """``(1/2pi) * xi(int_0^T M^{-1} F1 dt)`` as a length-``k`` array."""
    quad = quad or QuadratureSpec()
    g = _integrand(family, F1, alpha)
    times = _singular_times(family, alpha, quad)
    if quad.scheme == SUBTRACTION:
        total = _subtraction(family, g, alpha, quad, times)
    else:
        total = finite_part(g, family.k, family.period, times, quad.excision_half_width)
    return np.asarray(total) / (2.0 * math.pi)


def averaged_function(family: PeriodicFamily, F1, alpha, quad: QuadratureSpec = None) -> float:
    """Scalar bifurcation function for ``k = 1`` families."""
    if family.k != 1:
        raise DomainError("averaged_function is defined for k = 1; use bifurcation_vector")
    return float(bifurcation_vector(family, F1, alpha, quad)[0])


# ---------------------------------------------------------------------------
# zeros


def _bisect_secant(F, a, fa, b, fb, zero_tol, bisections=40):
    # shrink the bracket, then polish with safeguarded secant steps
    for _ in range(bisections):
        if b - a < 1e-6 * max(1.0, abs(a)):
            break
        m = 0.5 * (a + b)
        fm = F(m)
        if fm == 0.0:
            return m, fm
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    x, fx = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    for _ in range(60):
        if abs(fx) <= 0.01 * zero_tol or fb == fa:
            break
        x = b - fb * (b - a) / (fb - fa)
        if not a < x < b:
            x = 0.5 * (a + b)
        fx = F(x)
        if fx == 0.0:
            break
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
        else:
            b, fb = x, fx
        if b - a <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            break
    return x, fx


def find_zeros(F, domain, *, to_alpha=None, chart="amplitude", zero_tol=ZERO_TOL,
               deriv_tol=DERIV_TOL, points=SCAN_POINTS, orbit_id=""):
    """Locate zeros of a scalar function by scanning, bisection and secant.

    ``F`` is a function of the scan variable (the family chart, or the angle
    chart when ``chart="angle"``); ``to_alpha`` maps scan locations to the
    family chart for reporting.  Simplicity is ``|dF| > deriv_tol`` with the
    derivative taken by central differences in the scan variable.  A run of
    grid points where ``|F| <= zero_tol`` (e.g. an identically zero ``F``) is
    reported once, as a non-simple zero.
    """
    lo, hi = map(float, domain)
    to_alpha = to_alpha or (lambda u: u)
    grid = np.linspace(lo, hi, points)
    vals = np.array([F(u) for u in grid])
    step = 1e-5 * (hi - lo)

    def report(u, fu):
        d = (F(u + step) - F(u - step)) / (2 * step)
        return Zero(float(u), float(to_alpha(u)), float(fu), float(d),
                    bool(abs(d) > deriv_tol and abs(fu) <= zero_tol), chart, orbit_id)

    zeros = []
    flat = np.abs(vals) <= zero_tol
    i = 0
    while i < points:
        if flat[i]:
            j = i
            while j + 1 < points and flat[j + 1]:
                j += 1
            if j > i:
                mid = 0.5 * (grid[i] + grid[j])
                zeros.append(report(mid, F(mid))._replace(simple=False))
            else:
                zeros.append(report(grid[i], vals[i]))
            i = j + 1
            continue
        if i + 1 < points and not flat[i + 1] and (vals[i] > 0) != (vals[i + 1] > 0):
            u, fu = _bisect_secant(F, grid[i], vals[i], grid[i + 1], vals[i + 1], zero_tol)
            zeros.append(report(u, fu))
        i += 1
    return zeros


# ---------------------------------------------------------------------------
# the galactic model as a family


def model_perturbation(branch, h, params: ModelParams):
    """``F1(t, r, momentum=None)`` of the reduced branch (autonomous)."""
    fields = BranchFields(_branch(branch), energy_level(h), params)
    return lambda t, r, momentum=None: fields.F1(r, momentum)


def model_family(branch, h, params: ModelParams, chart="amplitude") -> PeriodicFamily:
    """The axial family of ``branch`` on the level ``h`` as a :class:`PeriodicFamily`.

    The amplitude chart covers ``[-R, R]``; the angle chart covers
    ``[-pi, pi]``.  The integrand carries double poles where the eliminated
    momentum ``P(t)`` vanishes; its pole part is ``-C p0 R^4 / P(t)^2`` with
    ``C`` the relevant quartic coefficient, whose finite part over a period is
    zero because ``tan`` is periodic.
    """
    branch = _branch(branch)
    h = energy_level(h)
    r2 = cf.radius_squared(branch, h, params)
    R = math.sqrt(r2)
    if chart == "amplitude":
        make = lambda alpha: cf.amplitude_anchor(branch, alpha, h, params)
        domain = (-R, R)
    elif chart == "angle":
        make = lambda theta: cf.angle_anchor(branch, theta, h, params)
        domain = (-math.pi, math.pi)
    else:
        raise DomainError(f"unknown chart {chart!r}")
    # integrands rebuild the anchor at every node
    make = functools.lru_cache(maxsize=16)(make)
    coeff = params.a if branch == "x" else params.c
    period = 2.0 * math.pi if branch == "x" else 2.0 * math.pi * params.q
    omega = 2.0 * math.pi / period

    def singular_times(alpha):
        an = make(alpha)
        phi = math.atan2(an.u0, an.p0)
        # P(t) = R cos(omega t + phi)
        return [((0.5 * math.pi - phi + j * math.pi) / omega) % period for j in (0, 1)]

    def singular_part(alpha):
        an = make(alpha)
        c0 = -coeff * an.p0 * r2 * r2
        return (lambda t: np.array([c0 / cf.orbit_momentum(an, t) ** 2]), np.zeros(1))

    return PeriodicFamily(
        k=1,
        n=3,
        domain=domain,
        period=period,
        solution=lambda alpha, t: cf.reduced_orbit(make(alpha), t),
        fundamental=lambda alpha, t, inverse=False: cf.analytic_fundamental(make(alpha), t, inverse),
        anchor=make,
        singular_times=singular_times,
        singular_part=singular_part,
        branch_momentum=lambda alpha, t: cf.orbit_momentum(make(alpha), t),
        label=f"{branch}-branch/{chart}",
    )


def average_branch(branch, h, params: ModelParams, quad: QuadratureSpec = None,
                   grid_points=101, scan_points=SCAN_POINTS, zero_tol=ZERO_TOL,
                   deriv_tol=DERIV_TOL, hypothesis_tol=1e-10) -> AveragingReport:
    """Full averaging pass on one branch and energy level.

    Checks the gap hypotheses, tabulates the quadrature and closed-form
    averaged functions on the clipped amplitude grid, and searches for zeros
    in the angle chart.
    """
    quad = quad or QuadratureSpec()
    amp = model_family(branch, h, params, "amplitude")
    hyp = check_hypotheses(amp, tol=hypothesis_tol)
    F1 = model_perturbation(branch, h, params)
    R = amp.domain[1]
    alpha = np.linspace(-GRID_CLIP * R, GRID_CLIP * R, grid_points)
    f_quad = np.array([averaged_function(amp, F1, a, quad) for a in alpha])
    f_closed = np.array([cf.averaged_f_closed(branch, a, h, params) for a in alpha])

    ang = model_family(branch, h, params, "angle")
    zeros = find_zeros(
        lambda th: averaged_function(ang, F1, th, quad),
        ang.domain,
        to_alpha=lambda th: R * math.sin(th),
        chart="angle",
        zero_tol=zero_tol,
        deriv_tol=deriv_tol,
        points=scan_points,
        orbit_id=cf.predicted_zeros(branch, h, params).orbit_id,
    )
    return AveragingReport(branch, h, alpha, f_quad, f_closed, hyp, zeros)


def resonance_gate(params: ModelParams, tol=1e-10):
    """Refuse rational ``q`` and vanishing gap determinants.

    Returns the pair of gap determinants ``(x-branch, y-branch)``.

    Raises
    ------
    ResonanceError
        ``flag="rational"`` when ``q = r/s`` with ``s <= 10^6``;
        ``flag="det"`` when a determinant is below ``tol``.
    """
    dets = (cf.gap_matrix("x", params).det, cf.gap_matrix("y", params).det)
    frac = cf.rational_approximation(params.q)
    if frac is not None:
        raise ResonanceError(
            f"q = {frac[0]}/{frac[1]} is rational: all linear orbits are "
            f"{2 * frac[0]}pi-periodic and first-order averaging on the axial "
            f"families gives no periodic orbit (det Delta_x = {dets[0]:.3e}, "
            f"det Delta_y = {dets[1]:.3e})",
            flag="rational",
            det=min(dets, key=abs),
        )
    for br, d in zip("xy", dets):
        if abs(d) <= tol:
            raise ResonanceError(f"{br}-branch gap determinant {d:.3e} vanishes", flag="det", det=d)
    return dets
