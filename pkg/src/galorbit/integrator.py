"""Adaptive Runge-Kutta integration, monodromy matrices and section returns.

Everything runs on scipy's DOP853 (explicit 8(5,3) Dormand-Prince pair with
7th-order dense output).  Fields are callables ``f(t, s) -> ndarray``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, GalorbitError, IntegrationError, NoReturnError


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-12
    atol: float = 1e-12
    max_step: float = np.inf
    max_steps: int = 200_000

    def __post_init__(self):
        for name in ("rtol", "atol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise DomainError(f"{name} must lie in (0, 1e-2], got {v!r}")
        if self.max_steps <= 0:
            raise DomainError("max_steps must be positive")


# DOP853 spends 12 evaluations per step
_EVALS_PER_STEP = 12


class _CountedField:
    def __init__(self, f, max_evals):
        self.f = f
        self.max_evals = max_evals
        self.nfev = 0

    def __call__(self, t, s):
        self.nfev += 1
        if self.nfev > self.max_evals:
            raise IntegrationError("maximum number of steps exceeded", t)
        try:
            out = np.asarray(self.f(t, s), dtype=float)
        except GalorbitError as exc:
            raise IntegrationError(f"field evaluation failed: {exc}", t) from exc
        if not np.all(np.isfinite(out)):
            raise IntegrationError("non-finite field value", t)
        return out


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim)
    dense: Callable
    nfev: int

    @property
    def nsteps(self):
        return len(self.times) - 1

    def __call__(self, t):
        return self.dense(t)

    @property
    def final(self):
        return self.states[-1]


def integrate_ode(field, ic, span, config: IntegratorConfig = None, dense=True) -> Trajectory:
    """Integrate ``s' = field(t, s)`` over ``span = (t0, t1)``.

    Raises
    ------
    IntegrationError
        On step-count overflow, step-size underflow or a failing field.
    """
    config = config or IntegratorConfig()
    ic = np.asarray(ic, dtype=float)
    f = _CountedField(field, config.max_steps * _EVALS_PER_STEP)
    f(span[0], ic)
    sol = integrate.solve_ivp(
        f, span, ic, method="DOP853", rtol=config.rtol, atol=config.atol,
        max_step=config.max_step, dense_output=dense,
    )
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}", float(sol.t[-1]))
    return Trajectory(sol.t, sol.y.T, sol.sol, f.nfev)


def flow(field, ic, T, config: IntegratorConfig = None) -> np.ndarray:
    """State at time ``T`` starting from ``ic`` at time 0."""
    if T == 0:
        return np.asarray(ic, dtype=float).copy()
    return integrate_ode(field, ic, (0.0, T), config, dense=False).final


class MonodromyResult(NamedTuple):
    final_state: np.ndarray
    monodromy: np.ndarray
    period: float


def check_jacobian(field, jac, t, s, step=1e-6, tol=1e-5):
    """Compare ``jac`` with central differences of ``field`` at one point."""
    s = np.asarray(s, dtype=float)
    J = np.asarray(jac(t, s))
    fd = np.empty_like(J)
    for j in range(s.size):
        e = np.zeros_like(s)
        e[j] = step
        fd[:, j] = (field(t, s + e) - field(t, s - e)) / (2 * step)
    err = np.max(np.abs(fd - J))
    if err > tol * max(1.0, np.max(np.abs(J))):
        raise DomainError(f"jacobian disagrees with finite differences (max error {err:.3e})")
    return err


def integrate_variational(field, jac, ic, T, config: IntegratorConfig = None,
                          check=True) -> MonodromyResult:
    """Integrate the state together with its principal fundamental matrix.

    The matrix solves ``Phi' = jac(t, s(t)) Phi`` with ``Phi(0) = I``; at ``T``
    it is the monodromy when the orbit is ``T``-periodic.
    """
    ic = np.asarray(ic, dtype=float)
    n = ic.size
    if check:
        check_jacobian(field, jac, 0.0, ic)

    def augmented(t, z):
        s = z[:n]
        Phi = z[n:].reshape(n, n)
        return np.concatenate([field(t, s), (jac(t, s) @ Phi).ravel()])

    z0 = np.concatenate([ic, np.eye(n).ravel()])
    zT = flow(augmented, z0, T, config)
    return MonodromyResult(zT[:n], zT[n:].reshape(n, n), float(T))


class FloquetSpectrum(NamedTuple):
    multipliers: np.ndarray  # sorted by modulus
    trivial: np.ndarray  # the two closest to 1
    nontrivial: np.ndarray
    trivial_defect: float  # max |lambda - 1| over the trivial pair
    reciprocal_defect: float  # max |lambda_i lambda_j - 1| over paired multipliers

    @property
    def product(self):
        return complex(np.prod(self.multipliers))


def floquet(monodromy, trivial_count=2) -> FloquetSpectrum:
    """Floquet multipliers with the trivial unit pair split off.

    The remaining multipliers are matched into reciprocal pairs
    ``lambda <-> 1/lambda`` greedily; an unmatched odd one out is ignored.
    """
    M = np.asarray(monodromy, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("monodromy must be a square matrix")
    lam = np.linalg.eigvals(M)
    lam = lam[np.lexsort((lam.imag, lam.real, np.abs(lam)))]
    trivial_count = min(trivial_count, lam.size)
    idx = np.argsort(np.abs(lam - 1.0), kind="stable")[:trivial_count]
    trivial = lam[np.sort(idx)]
    skip = set(idx.tolist())
    nontrivial = np.array([v for i, v in enumerate(lam) if i not in skip])
    rest = list(nontrivial)
    defects = []
    while len(rest) > 1:
        v = rest.pop(0)
        j = int(np.argmin([abs(v * w - 1.0) for w in rest]))
        defects.append(abs(v * rest.pop(j) - 1.0))
    return FloquetSpectrum(
        lam,
        trivial,
        nontrivial,
        float(np.max(np.abs(trivial - 1.0))) if trivial.size else 0.0,
        float(max(defects)) if defects else 0.0,
    )


class Section(NamedTuple):
    """Hyperplane ``s[index] = level`` crossed with sign ``direction`` (+1/-1)."""

    index: int
    level: float = 0.0
    direction: int = 1


class SectionReturn(NamedTuple):
    state: np.ndarray
    time: float


def poincare_return(field, section: Section, ic, config: IntegratorConfig = None,
                    t_max=100.0, time_tol=1e-12) -> SectionReturn:
    """First crossing of ``section`` in its direction at a time ``t > 0``.

    The crossing is bracketed on the accepted steps, located on the dense
    output by Brent's method, and the state there is recomputed by a short
    integration from the last step node.
    """
    config = config or IntegratorConfig()
    if section.direction not in (1, -1):
        raise DomainError("section direction must be +1 or -1")
    traj = integrate_ode(field, ic, (0.0, t_max), config)
    g = section.direction * (traj.states[:, section.index] - section.level)
    hits = np.nonzero((g[:-1] < 0) & (g[1:] >= 0))[0]
    if hits.size == 0:
        raise NoReturnError(f"no crossing of {section} within t <= {t_max}")
    i = hits[0]
    t0, t1 = traj.times[i], traj.times[i + 1]
    if g[i + 1] == 0:
        tc = t1
    else:
        G = lambda t: section.direction * (traj(t)[section.index] - section.level)
        tc = optimize.brentq(G, t0, t1, xtol=time_tol, rtol=4 * np.finfo(float).eps)
    state = flow(lambda t, s: field(t0 + t, s), traj.states[i], tc - t0, config)
    # one Newton polish with the exact field at the recomputed point
    v = field(tc, state)[section.index]
    if v != 0:
        dt = -(state[section.index] - section.level) / v
        if abs(dt) < 1e-6:
            state = flow(lambda t, s: field(tc + t, s), state, dt, config)
            tc += dt
    return SectionReturn(state, float(tc))
