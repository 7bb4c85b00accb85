"""End-to-end acceptance criteria.

Each test prints one ``[criterion N] PASS|FAIL`` line with its measured
figures before asserting.
"""
import math

import numpy as np
import pytest

from galorbit import averaging as av
from galorbit import closedform as cf
from galorbit.errors import ResonanceError
from galorbit.integrator import IntegratorConfig, Section, integrate_ode, integrate_variational, poincare_return
from galorbit.model import J4, ModelParams, energy, field_function, jacobian_function
from galorbit.reduction import lift
from galorbit.verify import (
    axial_period,
    axial_state,
    continuation_study,
    count_orbits_per_level,
)

from conftest import GOLDEN, SQRT2

GENERIC = ModelParams(1.0, 1.0, 1.0, SQRT2)
LEVELS = (0.25, 0.5, 1.0)
EPS_LIST = (1e-2, 5e-3, 2.5e-3, 1.25e-3)


@pytest.fixture
def verdict(capsys):
    def report(n, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {title} ({detail})")
        assert ok, detail

    return report


@pytest.fixture(scope="module")
def level_counts():
    return {h: count_orbits_per_level(GENERIC, h, eps=1e-2) for h in LEVELS}


def test_zero_reproduction(verdict):
    worst = 0.0
    for h in LEVELS:
        for br in ("x", "y"):
            report = av.average_branch(br, h, GENERIC, grid_points=3)
            expected = cf.predicted_zeros(br, h, GENERIC)
            located = sorted(z.alpha for z in report.zeros if z.simple)
            if len(located) != 2:
                worst = math.inf
                continue
            worst = max(worst, abs(located[0] - expected.minus), abs(located[1] - expected.plus))
    verdict(1, "located zeros equal +/-sqrt(2h), +/-sqrt(2qh)", worst <= 1e-10, f"max error {worst:.2e}")


def test_closed_form_quadrature_match(verdict):
    h = 0.5
    dev, agree = 0.0, 0.0
    for br in ("x", "y"):
        fam = av.model_family(br, h, GENERIC)
        F1 = av.model_perturbation(br, h, GENERIC)
        R = fam.domain[1]
        for alpha in np.linspace(-0.99 * R, 0.99 * R, 101):
            sub = av.averaged_function(fam, F1, alpha)
            exc = av.averaged_function(fam, F1, alpha, av.QuadratureSpec(scheme=av.EXCISION))
            dev = max(dev, abs(sub - cf.averaged_f_closed(br, alpha, h, GENERIC)))
            agree = max(agree, abs(sub - exc))
    verdict(2, "finite-part quadrature vs closed form; scheme agreement",
            dev <= 1e-8 and agree <= 1e-6, f"max deviation {dev:.2e}, scheme gap {agree:.2e}")


def _integrated_gap(branch, params):
    # transverse block of the eps = 0 monodromy along the axial orbit
    ic, T, block = (((1, 0, 0, 0), 2 * math.pi, [1, 3]) if branch == "x"
                    else ((0, 1, 0, 0), 2 * math.pi * params.q, [0, 2]))
    M = integrate_variational(field_function(params, 0.0), jacobian_function(params, 0.0), ic, T,
                              IntegratorConfig(rtol=1e-13, atol=1e-14)).monodromy
    return np.eye(2) - np.linalg.inv(M[np.ix_(block, block)])


def test_gap_determinants(verdict):
    worst, failures = 0.0, []
    for q in (SQRT2, GOLDEN, math.pi):
        p = ModelParams(1.0, 1.0, 1.0, q)
        for br, det in (("x", 4 * math.sin(math.pi / q) ** 2), ("y", 4 * math.sin(math.pi * q) ** 2)):
            gap = cf.gap_matrix(br, p)
            fam = av.model_family(br, 0.5, p)
            G = fam.fundamental(0.3, 0.0, inverse=True) - fam.fundamental(0.3, fam.period, inverse=True)
            worst = max(worst, np.max(np.abs(G - gap.matrix)),
                        np.max(np.abs(_integrated_gap(br, p) - gap.delta)),
                        abs(gap.det - det), abs(np.linalg.det(_integrated_gap(br, p)) - det))
    for q, branches in ((1.0, "xy"), (0.5, "x"), (3.0, "y")):
        p = ModelParams(1.0, 1.0, 1.0, q)
        for br in branches:
            if abs(np.linalg.det(_integrated_gap(br, p))) > 1e-12 or abs(cf.gap_matrix(br, p).det) > 1e-12:
                failures.append(f"q={q} {br}: det not zero")
        try:
            av.resonance_gate(p)
            failures.append(f"q={q}: gate passed")
        except ResonanceError:
            pass
    verdict(3, "gap matrices and determinants; resonance gate", worst <= 1e-12 and not failures,
            f"max mismatch {worst:.2e}; {'; '.join(failures) or 'rational q gated'}")


def test_orbit_count(verdict, level_counts):
    lines, ok = [], True
    for h, result in level_counts.items():
        res = max((o.residual for o in result.orbits), default=math.inf)
        en = max((abs(o.energy - h) for o in result.orbits), default=math.inf)
        triv = max((o.floquet.trivial_defect for o in result.orbits), default=math.inf)
        prod = max((o.floquet.reciprocal_defect for o in result.orbits), default=math.inf)
        ok &= result.count >= 2 and res <= 1e-10 and en <= 1e-12 and triv <= 1e-6 and prod <= 1e-8
        lines.append(f"h={h}: {result.count} orbits, residual {res:.1e}, energy {en:.1e}, "
                     f"unit pair {triv:.1e}, reciprocal {prod:.1e}")
    verdict(4, ">= 2 converged periodic orbits per level at eps=1e-2", ok, "; ".join(lines))


def test_limit_behavior(verdict):
    lines, ok = [], True
    for br in ("x", "y"):
        study = continuation_study(GENERIC, br, 0.5, EPS_LIST)
        ok &= 0.9 <= study.slope <= 1.1 and 0.45 <= study.unscaled_slope <= 0.55
        lines.append(f"{br}: slope {study.slope:.4f}, unscaled slope {study.unscaled_slope:.4f}")
    verdict(5, "eps -> 0 continuation slopes", ok, "; ".join(lines))


def test_oracle_agreement(verdict):
    worst = 0.0
    cfg = IntegratorConfig(rtol=1e-13, atol=1e-14)
    for br, idx in (("x", 2), ("y", 3)):
        for eps in (1e-3, 1e-2, 5e-2):
            ic = axial_state(br, 0.5, GENERIC, eps)
            ret = poincare_return(field_function(GENERIC, eps), Section(idx, 0.0, -1), ic, cfg, t_max=12.0)
            worst = max(worst, abs(ret.time - axial_period(br, 0.5, GENERIC, eps)))
    verdict(6, "Poincare return period vs axial quadrature", worst <= 1e-8, f"max difference {worst:.2e}")


def test_conservation_and_symplecticity(verdict, level_counts):
    eps, h = 0.01, 0.5
    cfg = IntegratorConfig(rtol=1e-12, atol=1e-12)
    drift = 0.0
    for r in ((0.3, 0.2, 0.1), (0.0, 0.5, -0.4)):
        ic = lift("x", h, GENERIC, eps, r)
        traj = integrate_ode(field_function(GENERIC, eps), ic, (0.0, 200 * math.pi), cfg)
        drift = max(drift, max(abs(energy(GENERIC, eps, s) - h) for s in traj.states))
    sympl, plane = 0.0, 0.0
    tight = IntegratorConfig(rtol=1e-13, atol=1e-14)
    for orb in level_counts[h].orbits:
        M = integrate_variational(field_function(GENERIC, orb.eps), jacobian_function(GENERIC, orb.eps),
                                  orb.ic, orb.period, tight).monodromy
        sympl = max(sympl, np.max(np.abs(M.T @ J4 @ M - J4)))
        off = [1, 3] if orb.branch == "x" else [0, 2]
        traj = integrate_ode(field_function(GENERIC, orb.eps), orb.ic, (0.0, orb.period), tight)
        plane = max(plane, np.max(np.abs(traj.states[:, off])))
    ok = drift <= 1e-9 and sympl <= 1e-9 and plane <= 1e-12
    verdict(7, "energy drift, symplectic defect, invariant planes", ok,
            f"drift {drift:.2e}, symplectic {sympl:.2e}, plane {plane:.2e}")


def test_degenerate_inputs(verdict):
    result = count_orbits_per_level(ModelParams(0.0, 1.0, 1.0, SQRT2), 0.5)
    x, y = result.branches["x"], result.branches["y"]
    ok = x.status == "inconclusive" and y.status == "confirmed" and result.count == 1
    verdict(8, "a = 0 leaves x inconclusive, y confirmed", ok,
            f"x {x.status}, y {y.status}, {result.count} orbit")
