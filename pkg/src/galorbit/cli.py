"""Command-line front end.

    galorbit predict|average|verify|scan|schema [flags]

Flags may also come from a ``key=value`` config file (``--config FILE``,
``#`` starts a comment); command-line flags win.  Exit codes: 0 success,
2 configuration error, 3 hypothesis/resonance failure, 4 numerical
non-convergence.

Coordinates in every table are the blown-up ones (``eps`` multiplies the
quartic terms); the ``verify`` table also lists ``sqrt(eps)`` times the
initial condition, i.e. the original coordinates.
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import averaging as av
from . import closedform as cf
from . import verify as vf
from .errors import GalorbitError, HypothesisViolatedError, NonConvergenceError
from .integrator import IntegratorConfig
from .model import ModelParams

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 2, 3, 4

COMMANDS = ("predict", "average", "verify", "scan", "schema")

SCHEMAS = {
    "predict": ["branch", "h", "kind", "alpha", "f1_closed", "orbit_id", "status"],
    "average": ["branch", "h", "alpha", "f_quad", "f_closed", "abs_dev"],
    "verify": [
        "kind", "branch", "h", "eps", "status", "x", "y", "px", "py", "period",
        "energy", "residual", "iterations", "lambda_re", "lambda_im",
        "trivial_defect", "reciprocal_defect", "unscaled_norm", "slope", "unscaled_slope",
    ],
    "scan": ["q", "det_x", "det_y", "status"],
}

SCHEMA_NOTES = {
    "predict": "kind=zero rows hold the predicted zeros (+/- share orbit_id); kind=curve rows "
               "sample the closed-form averaged function; status ok | degenerate: f1 == 0",
    "average": "alpha on the amplitude grid clipped to |alpha| <= 0.99 R; f_quad from "
               "finite-part quadrature, f_closed from the closed form",
    "verify": "kind=orbit: one converged orbit per (branch, h, eps), blown-up initial condition, "
              "lambda = nontrivial Floquet multiplier of largest imaginary part; "
              "kind=summary: log-log slopes of |ic(eps)-ic(0)| and sqrt(eps)|ic| per (branch, h)",
    "scan": "det_x = 4 sin^2(pi/q), det_y = 4 sin^2(pi q); status ok | resonant | degenerate",
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# value parsing

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1):
        return _FUNCS[node.func.id](_eval(node.args[0]))
    raise ValueError("unsupported expression")


def number(text):
    """Parse a number or a small expression such as ``sqrt(2)`` or ``2/3``."""
    try:
        value = _eval(ast.parse(str(text).strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError, OverflowError) as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc
    if not math.isfinite(value):
        raise ConfigError(f"non-finite value {text!r}")
    return value


def number_list(text):
    items = [t for t in str(text).split(",") if t.strip()]
    if not items:
        raise ConfigError("empty list")
    return [number(t) for t in items]


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    q: list = field(default_factory=lambda: [math.sqrt(2.0)])
    h: list = field(default_factory=lambda: [0.5])
    eps: list = field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3, 1.25e-3])
    branch: str = "both"
    grid_points: int = 101
    tol_quad: float = 1e-8
    tol_zero: float = av.ZERO_TOL
    tol_int: float = 1e-13
    format: str = "csv"
    out: str = "-"

    def validate(self):
        if not self.h or any(v <= 0 for v in self.h):
            raise ConfigError("h must be a nonempty list of positive levels")
        if not self.q or any(v <= 0 for v in self.q):
            raise ConfigError("q must be positive")
        if any(v < 0 for v in self.eps):
            raise ConfigError("eps values must be non-negative")
        if self.branch not in ("x", "y", "both"):
            raise ConfigError("branch must be x, y or both")
        if self.grid_points < 2:
            raise ConfigError("grid-points must be at least 2")
        if not 0 < self.tol_quad <= 1e-2:
            raise ConfigError("tol-quad must lie in (0, 1e-2]")
        if not 0 < self.tol_zero <= 1e-4:
            raise ConfigError("tol-zero must lie in (0, 1e-4]")
        if not 1e-14 <= self.tol_int <= 1e-6:
            raise ConfigError("tol-int must lie in [1e-14, 1e-6]")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        return self

    @property
    def branches(self):
        return ("x", "y") if self.branch == "both" else (self.branch,)

    def params(self, q=None):
        try:
            return ModelParams(self.a, self.b, self.c, self.q[0] if q is None else q)
        except GalorbitError as exc:
            raise ConfigError(str(exc)) from exc

    def integrator(self):
        return IntegratorConfig(rtol=self.tol_int, atol=self.tol_int / 10)


_CONVERTERS = {
    "a": number, "b": number, "c": number,
    "q": number_list, "h": number_list, "eps": number_list,
    "branch": str, "grid-points": lambda s: int(number(s)),
    "tol-quad": number, "tol-zero": number, "tol-int": number,
    "format": str, "out": str,
}


def read_config_file(path):
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in _CONVERTERS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        values[key] = value
    return values


def resolve_config(ns) -> RunConfig:
    raw = read_config_file(ns.config) if ns.config else {}
    for key in _CONVERTERS:
        v = getattr(ns, key.replace("-", "_"), None)
        if v is not None:
            raw[key] = v
    cfg = RunConfig()
    for key, text in raw.items():
        try:
            setattr(cfg, key.replace("-", "_"), _CONVERTERS[key](text))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r}") from exc
    return cfg.validate()


# ---------------------------------------------------------------------------
# commands


def _gate(params):
    """Resonance gate shared by predict/average/verify."""
    return av.resonance_gate(params)


def _degenerate(branch, params):
    return (params.a if branch == "x" else params.c) == 0.0


def cmd_predict(cfg: RunConfig):
    params = cfg.params()
    _gate(params)
    rows = []
    for h in cfg.h:
        for br in cfg.branches:
            z = cf.predicted_zeros(br, h, params)
            status = "degenerate: f1 == 0" if _degenerate(br, params) else "ok"
            for alpha in (z.minus, z.plus):
                rows.append(dict(branch=br, h=h, kind="zero", alpha=alpha, f1_closed=0.0,
                                 orbit_id=z.orbit_id, status=status))
            for alpha in np.linspace(z.minus, z.plus, cfg.grid_points):
                rows.append(dict(branch=br, h=h, kind="curve", alpha=alpha,
                                 f1_closed=cf.averaged_f_closed(br, alpha, h, params),
                                 orbit_id=z.orbit_id, status=status))
    return rows, EXIT_OK


def cmd_average(cfg: RunConfig):
    params = cfg.params()
    _gate(params)
    rows, worst = [], 0.0
    for h in cfg.h:
        for br in cfg.branches:
            fam = av.model_family(br, h, params)
            av.check_hypotheses(fam)
            F1 = av.model_perturbation(br, h, params)
            R = fam.domain[1]
            for alpha in np.linspace(-av.GRID_CLIP * R, av.GRID_CLIP * R, cfg.grid_points):
                fq = av.averaged_function(fam, F1, alpha)
                fc = cf.averaged_f_closed(br, alpha, h, params)
                worst = max(worst, abs(fq - fc))
                rows.append(dict(branch=br, h=h, alpha=alpha, f_quad=fq, f_closed=fc,
                                 abs_dev=abs(fq - fc)))
    return rows, EXIT_OK if worst <= cfg.tol_quad else EXIT_NUMERIC


def _orbit_row(branch, h, orb: vf.PeriodicOrbitResult):
    nt = orb.floquet.nontrivial
    lam = nt[np.argmax(nt.imag)] if nt.size else complex("nan")
    return dict(
        kind="orbit", branch=branch, h=h, eps=orb.eps, status="converged",
        x=orb.ic[0], y=orb.ic[1], px=orb.ic[2], py=orb.ic[3], period=orb.period,
        energy=orb.energy, residual=orb.residual, iterations=orb.iterations,
        lambda_re=lam.real, lambda_im=lam.imag, trivial_defect=orb.floquet.trivial_defect,
        reciprocal_defect=orb.floquet.reciprocal_defect,
        unscaled_norm=math.sqrt(orb.eps) * float(np.linalg.norm(orb.ic)),
    )


def cmd_verify(cfg: RunConfig):
    params = cfg.params()
    _gate(params)
    integ = cfg.integrator()
    rows, code = [], EXIT_OK
    positive = sorted((e for e in cfg.eps if e > 0), reverse=True)
    for h in cfg.h:
        for br in cfg.branches:
            report = av.average_branch(br, h, params, grid_points=3, zero_tol=cfg.tol_zero)
            if report.inconclusive:
                rows.append(dict(kind="orbit", branch=br, h=h, status="inconclusive"))
                continue
            try:
                if 0.0 in cfg.eps:
                    guess = vf.axial_state(br, h, params, 0.0)
                    anchor_T = 2 * math.pi * (1.0 if br == "x" else params.q)
                    orb = vf.shoot_periodic(params, 0.0, guess, anchor_T, h, br, integ)
                    rows.append(_orbit_row(br, h, orb))
                if positive:
                    study = vf.continuation_study(params, br, h, positive, integ)
                    rows.extend(_orbit_row(br, h, o) for o in study.orbits)
                    if len(positive) >= 2:
                        rows.append(dict(kind="summary", branch=br, h=h, status="ok",
                                         slope=study.slope, unscaled_slope=study.unscaled_slope))
            except NonConvergenceError as exc:
                rows.append(dict(kind="orbit", branch=br, h=h, status=f"failed: {exc}"))
                code = EXIT_NUMERIC
    return rows, code


def cmd_scan(cfg: RunConfig):
    rows = []
    for q in cfg.q:
        params = cfg.params(q)
        dx, dy = cf.gap_matrix("x", params).det, cf.gap_matrix("y", params).det
        try:
            av.resonance_gate(params)
            status = "degenerate" if params.a == 0 or params.c == 0 else "ok"
        except HypothesisViolatedError:
            status = "resonant"
        rows.append(dict(q=q, det_x=dx, det_y=dy, status=status))
    return rows, EXIT_OK


# ---------------------------------------------------------------------------
# output


def render(command, rows, cfg: RunConfig):
    columns = SCHEMAS[command]
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])
        return buf.getvalue()
    meta = {"command": command, "version": __version__, "config": asdict(cfg)}
    clean = [{c: _json_value(r[c]) for c in columns if c in r} for r in rows]
    doc = {"meta": meta, "rows": clean}
    if command == "average":
        doc["grid"] = clean
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def schema_text():
    lines = []
    for cmd, cols in SCHEMAS.items():
        lines.append(f"{cmd}: {','.join(cols)}")
        lines.append(f"  {SCHEMA_NOTES[cmd]}")
    lines.append("JSON: {\"meta\": {command, version, config}, \"rows\": [...]} "
                 "(average also repeats rows under \"grid\")")
    lines.append("exit codes: 0 ok, 2 config error, 3 hypothesis/resonance failure, "
                 "4 numerical non-convergence")
    return "\n".join(lines) + "\n"


def build_parser():
    parser = argparse.ArgumentParser(prog="galorbit", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "schema":
            continue
        p.add_argument("--config", help="key=value file; flags override it")
        for flag in ("a", "b", "c", "q", "h", "eps"):
            p.add_argument(f"--{flag}")
        p.add_argument("--branch", choices=("x", "y", "both"))
        p.add_argument("--grid-points")
        p.add_argument("--tol-quad")
        p.add_argument("--tol-zero")
        p.add_argument("--tol-int")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--out", help="output path ('-' for stdout)")
        p.add_argument("--schema", action="store_true", help="print the column layout and exit")
    return parser


_HANDLERS = {"predict": cmd_predict, "average": cmd_average, "verify": cmd_verify, "scan": cmd_scan}


def main(argv=None):
    ns = build_parser().parse_args(argv)
    if ns.command == "schema" or ns.schema:
        sys.stdout.write(schema_text())
        return EXIT_OK
    try:
        cfg = resolve_config(ns)
    except ConfigError as exc:
        print(f"galorbit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows, code = _HANDLERS[ns.command](cfg)
    except HypothesisViolatedError as exc:
        print(f"galorbit: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ConfigError as exc:
        print(f"galorbit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GalorbitError as exc:
        print(f"galorbit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render(ns.command, rows, cfg)
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
