"""Command-line front end.

Every subcommand prints one report (JSON by default, CSV on request) and
exits with 0 on success, 2 when a checked inequality is violated beyond its
allowance and 1 on usage errors.  Options may also come from a ``key=value``
file given by ``--config``; flags on the command line take precedence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import optimize

from . import __version__
from . import conformal, fem2d, planar, radial_spectra, theory_checks
from .gauge import canonicalize_flux
from .revolution import first_critical_radius, get_profile, radius_for_area

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2

REVOLUTION = ("euclidean", "spherical", "hyperbolic")
NORMALIZATIONS = ("radius", "area", "perimeter")
SOURCES = ("mesh", "domain")
DEFAULT_MAPS = "identity,rotation:0.7,quad:0.05,quad:0.1"
ISO_ALIASES = {
    "neumann": "neumann_area",
    "brock": "brock_area",
    "weinstock": "weinstock_perimeter",
    "schrodinger": "schrodinger",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# value parsers


def _number(text: str) -> float:
    """Float or exact fraction such as ``1/4``."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _point(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    return _number(parts[0]), _number(parts[1])


def _number_list(text: str) -> list[float]:
    return [_number(x) for x in text.split(",") if x.strip()]


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _level(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def parse_domain(text: str, pole=None) -> planar.PlanarDomain:
    """``disk[:R]``, ``square[:side]``, ``rectangle:w,h``, ``annulus:a,b``,
    ``perturbed:seed`` or ``polygon:x,y;x,y;...``.

    The pole defaults to the centre of the disk, rectangle or annulus and to
    the origin for polygons; disks and annuli are centred at the origin,
    rectangles have a corner there.
    """
    name, _, arg = text.partition(":")
    try:
        if name == "disk":
            return planar.PlanarDomain.disk(_number(arg) if arg else 1.0, pole=pole)
        if name == "square":
            side = _number(arg) if arg else 1.0
            return planar.PlanarDomain.rectangle(side, side, pole=pole)
        if name == "rectangle":
            w, h = _number_list(arg)
            return planar.PlanarDomain.rectangle(w, h, pole=pole)
        if name == "annulus":
            a, b = _number_list(arg)
            if pole is not None:
                raise UsageError("the annulus is centred at its pole; --pole does not apply")
            return planar.PlanarDomain.annulus(a, b)
        if name == "perturbed":
            return planar.perturbed_disk(int(arg), pole=(0.0, 0.0) if pole is None else pole)
        if name == "polygon":
            pts = np.array([_point(p) for p in arg.split(";") if p.strip()])
            return planar.PlanarDomain([pts], (0.0, 0.0) if pole is None else pole)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"bad domain {text!r}: {exc}") from None
    raise UsageError(f"unknown domain {text!r}; expected disk, square, rectangle, annulus, perturbed or polygon")


def parse_potential(text: str):
    """Sum of ``inverse-square:c`` (c/r^2), ``harmonic:c`` (c r^2), ``constant:c`` terms."""
    terms = []
    for part in text.split("+"):
        name, _, arg = part.strip().partition(":")
        try:
            c = _number(arg) if arg else 1.0
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from None
        if name not in ("inverse-square", "harmonic", "constant"):
            raise UsageError(f"unknown potential term {name!r}")
        if c < 0:
            raise UsageError("potential coefficients must be non-negative")
        terms.append((name, c))

    def V(r):
        out = 0.0
        for name, c in terms:
            if name == "inverse-square":
                out += c / (r * r)
            elif name == "harmonic":
                out += c * r * r
            else:
                out += c
        return out

    return V


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--config", help="key=value file; command-line flags win")
    p.add_argument("--format", choices=("json", "csv"), help="report format (default json, or from --out suffix)")
    p.add_argument("--out", help="output path (default standard output)")


def _normalization(p, perimeter=True):
    p.add_argument("--radius", type=_number, help="geodesic radius R")
    p.add_argument("--area", type=_number, help="area of the disk (or domain)")
    if perimeter:
        p.add_argument("--perimeter", type=_number, help="boundary length of the disk (or domain)")


def _geometry_source(p):
    p.add_argument("--mesh", help="ABMESH file")
    p.add_argument("--domain", help="disk[:R], square[:a], rectangle:w,h, annulus:a,b, perturbed:seed, polygon:x,y;...")
    p.add_argument("--pole", type=_point, help="pole position x,y for --domain (default 0,0)")
    p.add_argument("--refine", type=_level, help="refinement level of the built-in mesher")
    p.add_argument("--area", type=_number, help="rescale the domain to this area")
    p.add_argument("--perimeter", type=_number, help="rescale the domain to this perimeter")


DEFAULTS = {
    "spectrum": {"geometry": "euclidean", "count": 5},
    "steklov": {"geometry": "euclidean", "count": 5},
    "closed-form": {"problem": "neumann", "count": 5},
    "fem": {"problem": "neumann", "count": 4, "refine": 4},
    "verify-iso": {"refine": fem2d.ISO_LEVEL, "allowance": fem2d.ISO_ALLOWANCE},
    "check-theory": {"geometry": "euclidean", "grid_size": theory_checks.GRID_SIZE},
    "sweep": {"geometry": "euclidean", "count": 1, "num": 11},
    "mesh": {"refine": 3},
    "conformal-check": {"maps": DEFAULT_MAPS, "T": 0.8},
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abspec", description=__doc__.splitlines()[0],
                     argument_default=argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"abspec {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("spectrum", help="radial magnetic Neumann spectrum of a geodesic disk",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--geometry", choices=REVOLUTION)
    p.add_argument("--flux", type=_number)
    _normalization(p)
    p.add_argument("--count", type=_positive_int)

    p = sub.add_parser("steklov", help="Steklov spectrum of a geodesic disk, annulus or cylinder",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--geometry", choices=REVOLUTION + ("cylinder", "annulus"))
    p.add_argument("--flux", type=_number)
    _normalization(p)
    p.add_argument("--length", type=_number, help="cylinder half-length L of S^1 x (-L, L)")
    p.add_argument("--inner", type=_number, help="annulus inner radius (outer radius is --radius)")
    p.add_argument("--count", type=_positive_int)

    p = sub.add_parser("closed-form", help="Bessel closed forms on the euclidean disk",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--problem", choices=("neumann", "steklov"))
    p.add_argument("--flux", type=_number)
    _normalization(p)
    p.add_argument("--count", type=_positive_int)

    p = sub.add_parser("fem", help="finite element eigenvalues on a meshed domain",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    _geometry_source(p)
    p.add_argument("--flux", type=_number)
    p.add_argument("--problem", choices=("neumann", "steklov", "schrodinger"))
    p.add_argument("--potential", help="inverse-square:c, harmonic:c, constant:c, joined by '+'")
    p.add_argument("--count", type=_positive_int)

    p = sub.add_parser("verify-iso", help="isoperimetric inequality margin on a domain",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--mode", choices=tuple(ISO_ALIASES) + fem2d.ISO_MODES)
    _geometry_source(p)
    p.add_argument("--flux", type=_number)
    p.add_argument("--potential")
    p.add_argument("--allowance", type=_number, help="relative discretization allowance")

    p = sub.add_parser("check-theory", help="monotonicity and Hardy checks on a geodesic disk",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--geometry", choices=REVOLUTION)
    p.add_argument("--flux", type=_number)
    _normalization(p, perimeter=False)
    p.add_argument("--grid-size", type=_positive_int)

    p = sub.add_parser("sweep", help="lambda_1 or sigma_1 against R, nu or L as a table",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--quantity", choices=("lambda1", "sigma1"))
    p.add_argument("--parameter", choices=("R", "nu", "L"))
    p.add_argument("--values", type=_number_list, help="comma-separated parameter values")
    p.add_argument("--start", type=_number)
    p.add_argument("--stop", type=_number)
    p.add_argument("--num", type=_positive_int)
    p.add_argument("--geometry", choices=REVOLUTION + ("cylinder",))
    p.add_argument("--flux", type=_number)
    p.add_argument("--radius", type=_number)
    p.add_argument("--length", type=_number)
    p.add_argument("--count", type=_positive_int, help="modes per parameter value")

    p = sub.add_parser("mesh", help="generate, or read and check, an ABMESH file",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    _geometry_source(p)

    p = sub.add_parser("conformal-check", help="conformal energy invariance and Szego functionals",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--maps", help=f"comma-separated map list (default {DEFAULT_MAPS})")
    p.add_argument("--flux", type=_number)
    p.add_argument("--T", type=_number, help="stereographic radius of the transplanted disk")
    return parser


def _config_tokens(path: str, command: str) -> list[str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("_", "-")
        if key in ("config", "command"):
            raise UsageError(f"{path}:{lineno}: '{key}' cannot be set from a config file")
        tokens += [f"--{key}", value.strip()]
    return tokens


def parse_config(argv) -> dict:
    """Merge defaults, config file and flags into one flat dict."""
    parser = build_parser()
    cli = vars(parser.parse_args(argv))
    command = cli.get("command")
    if command is None:
        raise UsageError("a subcommand is required; see abspec --help")
    cfg = {}
    if "config" in cli:
        cfg = vars(parser.parse_args([command] + _config_tokens(cli["config"], command)))
        cfg.pop("command")
        # a normalization or geometry source given on the command line replaces
        # the whole group from the file
        for group in (NORMALIZATIONS, SOURCES):
            if any(k in cli for k in group):
                for k in group:
                    cfg.pop(k, None)
    merged = dict(DEFAULTS[command])
    merged.update(cfg)
    merged.update(cli)
    merged.pop("config", None)
    return merged


# ---------------------------------------------------------------------------
# helpers


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise UsageError(f"{cfg['command']}: missing --{', --'.join(k.replace('_', '-') for k in missing)}")


def _exactly_one(cfg, group, required=True):
    given = [k for k in group if k in cfg]
    if len(given) > 1:
        raise UsageError(f"inconsistent options: --{' and --'.join(given)} given together")
    if required and not given:
        raise UsageError(f"{cfg['command']}: one of --{', --'.join(group)} is required")
    return given[0] if given else None


def _revolution_radius(cfg, profile) -> float:
    key = _exactly_one(cfg, NORMALIZATIONS)
    value = cfg[key]
    if not value > 0:
        raise UsageError(f"--{key} must be positive")
    if key == "radius":
        return value
    if key == "area":
        return radius_for_area(profile, value)
    # theta(R) = perimeter / (2 pi), with theta increasing on (0, R_bar)
    target = value / (2 * math.pi)
    hi = min(first_critical_radius(profile), profile.diameter)
    if not math.isfinite(hi):
        hi = 1.0
        while profile.theta(hi) < target:
            hi *= 2
    elif profile.theta(hi) < target:
        raise UsageError(f"perimeter {value} exceeds the largest geodesic circle of the {profile.kind} surface")
    return optimize.brentq(lambda r: profile.theta(r) - target, 0.0, hi, xtol=1e-14, rtol=4e-16)


def _domain_or_mesh(cfg):
    source = _exactly_one(cfg, SOURCES)
    if source == "mesh":
        for k in ("pole", "area", "perimeter"):
            if k in cfg:
                raise UsageError(f"--{k} applies to --domain only")
        try:
            mesh = planar.read_mesh(cfg["mesh"])
        except OSError as exc:
            raise UsageError(f"cannot read mesh {cfg['mesh']}: {exc}") from None
        return mesh, None
    domain = parse_domain(cfg["domain"], cfg.get("pole"))
    norm = _exactly_one(cfg, ("area", "perimeter"), required=False)
    if norm is not None:
        meas = planar.domain_measures(domain)
        target = cfg[norm]
        if not target > 0:
            raise UsageError(f"--{norm} must be positive")
        factor = math.sqrt(target / meas.area) if norm == "area" else target / meas.perimeter
        domain = domain.scaled(factor)
    return planar.mesh_generate(domain, cfg["refine"]), domain


def _flux(cfg) -> float:
    _require(cfg, "flux")
    return cfg["flux"]


def tolerances() -> dict:
    return {
        "radial": dict(radial_spectra.TOLERANCES),
        "fem_residual": fem2d.RESIDUAL_TOL,
        "iso_allowance": fem2d.ISO_ALLOWANCE,
        "monotone_rtol": theory_checks.MONOTONE_RTOL,
        "derivative_rtol": theory_checks.DERIVATIVE_RTOL,
        "energy_rtol": conformal.ENERGY_RTOL,
        "margin_rtol": conformal.MARGIN_RTOL,
    }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------------
# subcommands; each returns (ok, result, csv rows, csv header)


def _table_rows(table):
    return [[e.value, e.k, e.j, e.order] for e in table.entries], ["value", "k", "j", "order"]


def cmd_spectrum(cfg):
    profile = get_profile(cfg["geometry"])
    R = _revolution_radius(cfg, profile)
    table = radial_spectra.neumann_spectrum(profile, _flux(cfg), R, cfg["count"])
    return True, table.to_dict(), *_table_rows(table)


def cmd_steklov(cfg):
    nu = _flux(cfg)
    geometry = cfg["geometry"]
    if geometry == "cylinder":
        _require(cfg, "length")
        for k in NORMALIZATIONS + ("inner",):
            if k in cfg:
                raise UsageError(f"--{k} does not apply to the cylinder")
        table = radial_spectra.steklov_separable_extras(nu, radial_spectra.Cylinder(cfg["length"]), cfg["count"])
        table.meta["perimeter"] = 4 * math.pi
    elif geometry == "annulus":
        _require(cfg, "inner", "radius")
        table = radial_spectra.steklov_separable_extras(
            nu, radial_spectra.Annulus(cfg["inner"], cfg["radius"]), cfg["count"])
        table.meta["perimeter"] = 2 * math.pi * (cfg["inner"] + cfg["radius"])
    else:
        if "length" in cfg or "inner" in cfg:
            raise UsageError("--length/--inner apply to the cylinder and annulus only")
        profile = get_profile(geometry)
        R = _revolution_radius(cfg, profile)
        table = radial_spectra.steklov_disk_revolution(profile, nu, R, cfg["count"])
        table.meta["perimeter"] = 2 * math.pi * profile.theta(R)
    c = canonicalize_flux(nu).canonical
    # Weinstock-type bound 2 pi nu* / |boundary|, reported for comparison
    table.meta["perimeter_bound"] = 2 * math.pi * c / table.meta["perimeter"]
    return True, table.to_dict(), *_table_rows(table)


def cmd_closed_form(cfg):
    R = _revolution_radius(cfg, get_profile("euclidean"))
    nu = _flux(cfg)
    if cfg["problem"] == "neumann":
        table = radial_spectra.neumann_disk_closed_form(nu, R, cfg["count"])
    else:
        table = radial_spectra.steklov_disk_revolution("euclidean", nu, R, cfg["count"])
        table.meta["method"] = "closed form |k - nu| / R"
    return True, table.to_dict(), *_table_rows(table)


def cmd_fem(cfg):
    mesh, _ = _domain_or_mesh(cfg)
    nu = _flux(cfg)
    problem = cfg["problem"]
    if (problem == "schrodinger") != ("potential" in cfg):
        raise UsageError("--potential is required for, and only for, --problem schrodinger")
    if problem == "neumann":
        res = fem2d.neumann_eigs(mesh, nu, cfg["count"])
    elif problem == "steklov":
        res = fem2d.steklov_eigs(mesh, nu, cfg["count"])
    else:
        if canonicalize_flux(nu).canonical != 0.0:
            raise UsageError("the schrodinger problem takes no magnetic flux; use --flux 0")
        res = fem2d.schrodinger_eigs(mesh, parse_potential(cfg["potential"]), cfg["count"])
    meas = planar.mesh_measures(mesh)
    result = {"problem": problem, **res.to_dict(), "vertices": len(mesh.vertices),
              "triangles": len(mesh.triangles), "area": meas.area, "perimeter": meas.perimeter}
    rows = [[i + 1, lam, r] for i, (lam, r) in enumerate(zip(res.eigenvalues, res.residuals))]
    ok = bool(np.all(res.residuals <= fem2d.RESIDUAL_TOL))
    return ok, result, rows, ["index", "eigenvalue", "residual"]


def cmd_verify_iso(cfg):
    _require(cfg, "mode")
    mode = ISO_ALIASES.get(cfg["mode"], cfg["mode"])
    if (mode == "schrodinger") != ("potential" in cfg):
        raise UsageError("--potential is required for, and only for, --mode schrodinger")
    mesh, domain = _domain_or_mesh(cfg)
    nu = _flux(cfg)
    V = parse_potential(cfg["potential"]) if mode == "schrodinger" else None
    rep = fem2d.verify_isoperimetric(domain if domain is not None else mesh, nu, mode,
                                     level=cfg["refine"], V=V, allowance=cfg["allowance"])
    d = rep.to_dict()
    return rep.holds, d, [[d[k] for k in d]], list(d)


def _default_hardy(nu, R):
    c = canonicalize_flux(nu)
    k0 = c.base
    return [
        theory_checks.HardyTestFunction(lambda r: (r / R) ** c.canonical,
                                        lambda r: c.canonical * r ** (c.canonical - 1) / R ** c.canonical,
                                        k0, "r^nu*"),
        theory_checks.HardyTestFunction(lambda r: r, lambda r: 1.0, k0 + 1, "r e^{i(k0+1)t}"),
        theory_checks.HardyTestFunction(lambda r: r * (R - r), lambda r: R - 2 * r, k0, "r(R-r)"),
    ]


def cmd_check_theory(cfg):
    profile = get_profile(cfg["geometry"])
    R = _revolution_radius(cfg, profile)
    nu = _flux(cfg)
    n = cfg["grid_size"]
    F = theory_checks.check_F_monotone(profile, nu, R, n)
    q = theory_checks.check_q_monotone(profile, nu, R, n)
    shape = theory_checks.check_eigenfunction_shape(profile, nu, R, n)
    sweep = theory_checks.lambda_R_monotone(profile, nu, [R * f for f in (0.25, 0.5, 0.75, 1.0)])
    cond = theory_checks.sufficient_conditions(profile, nu, R, n)
    hardy = theory_checks.hardy_check(nu, R, _default_hardy(nu, R))
    # the monotonicity theorem needs condition a) or b)
    hypotheses = bool(cond.cond_a or cond.cond_b)
    checks = {
        "F_monotone": F.holds,
        "q_monotone": q.holds,
        "eigenfunction_shape": shape.u_positive and shape.u_increasing and shape.lambda_exceeds,
        "lambda_R_decreasing": sweep.decreasing,
        "lambda_R_derivative": sweep.derivative_ok,
        "sufficient_condition": hypotheses,
        "hardy": all(h.holds for h in hardy),
    }
    result = {
        "geometry": profile.kind, "nu": nu, "R": R, "checks": checks,
        "F": F.to_dict(), "q": q.to_dict(), "shape": shape.to_dict(), "lambda_R": sweep.to_dict(),
        "conditions": cond.to_dict(), "hardy": [h.to_dict() for h in hardy],
    }
    rows = [[name, ok] for name, ok in checks.items()]
    return all(checks.values()), result, rows, ["check", "holds"]


def _sweep_values(cfg) -> list[float]:
    if "values" in cfg:
        if any(k in cfg for k in ("start", "stop")):
            raise UsageError("give either --values or --start/--stop/--num")
        return cfg["values"]
    _require(cfg, "start", "stop")
    return [float(x) for x in np.linspace(cfg["start"], cfg["stop"], cfg["num"])]


def cmd_sweep(cfg):
    _require(cfg, "quantity", "parameter")
    quantity, param, geometry = cfg["quantity"], cfg["parameter"], cfg["geometry"]
    values = _sweep_values(cfg)
    count = cfg["count"]
    if param != "nu":
        _require(cfg, "flux")
    if geometry == "cylinder" and quantity != "sigma1":
        raise UsageError("the cylinder sweep is for sigma1 only")
    if param == "L" and geometry != "cylinder":
        raise UsageError("--parameter L needs --geometry cylinder")
    if param == "R" and geometry == "cylinder":
        raise UsageError("the cylinder has no radius parameter; sweep L")

    def table_at(v):
        nu = v if param == "nu" else cfg["flux"]
        if geometry == "cylinder":
            L = v if param == "L" else cfg.get("length")
            if L is None:
                raise UsageError("missing --length")
            return radial_spectra.steklov_separable_extras(nu, radial_spectra.Cylinder(L), count)
        R = v if param == "R" else cfg.get("radius")
        if R is None:
            raise UsageError("missing --radius")
        if quantity == "lambda1":
            return radial_spectra.neumann_spectrum(geometry, nu, R, count)
        return radial_spectra.steklov_disk_revolution(geometry, nu, R, count)

    rows = []
    for v in values:
        table = table_at(v)
        rows += [[param, v, e.value, e.k, e.j] for e in table.entries[:count]]
    header = ["parameter", "value", "eigenvalue", "k", "j"]
    result = {"quantity": quantity, "geometry": geometry, "rows": [dict(zip(header, r)) for r in rows]}
    return True, result, rows, header


def cmd_mesh(cfg):
    mesh, domain = _domain_or_mesh(cfg)
    rep = planar.check_mesh(mesh)
    meas = planar.mesh_measures(mesh)
    result = {
        "vertices": len(mesh.vertices), "triangles": len(mesh.triangles),
        "boundary_edges": len(mesh.boundary_edges),
        "pole_vertex": mesh.pole_vertex, "pole": mesh.pole,
        "area": meas.area, "perimeter": meas.perimeter,
        "valid": rep.valid, "min_angle": rep.min_angle, "holes": rep.holes,
    }
    if domain is not None:
        result["mesh_text"] = planar.mesh_text(mesh)
    return rep.valid, result, [[k, v] for k, v in result.items() if k != "mesh_text"], ["key", "value"]


def cmd_conformal_check(cfg):
    nu = _flux(cfg)
    names = [m.strip() for m in cfg["maps"].split(",") if m.strip()]
    try:
        maps = [conformal.get_map(m) for m in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    energy = [conformal.energy_invariance_check(m, nu) for m in maps]
    szego = [conformal.szego_functional_check(m, nu, cfg["T"]) for m in maps]
    cap = [(r, abs(conformal.cap_area_quadrature(r) - conformal.cap_area_function(r)))
           for r in (0.25, 0.5, 1.0, 2.0, 4.0)]
    cap_ok = all(err <= 1e-10 for _, err in cap)
    ok = cap_ok and all(e.holds for e in energy) and all(s.holds for s in szego)
    result = {
        "nu": nu,
        "energy": [e.to_dict() for e in energy],
        "szego": [s.to_dict() for s in szego],
        "cap_area": [{"r": r, "abs_error": err} for r, err in cap],
    }
    rows = [["energy", e.map, e.rel_diff, e.holds] for e in energy]
    rows += [["szego", s.map, min(s.dineq_margin, s.cap_margin), s.holds] for s in szego]
    rows += [["cap_area", f"r={r!r}", err, err <= 1e-10] for r, err in cap]
    return ok, result, rows, ["check", "map", "value", "holds"]


COMMANDS = {
    "spectrum": cmd_spectrum,
    "steklov": cmd_steklov,
    "closed-form": cmd_closed_form,
    "fem": cmd_fem,
    "verify-iso": cmd_verify_iso,
    "check-theory": cmd_check_theory,
    "sweep": cmd_sweep,
    "mesh": cmd_mesh,
    "conformal-check": cmd_conformal_check,
}


# ---------------------------------------------------------------------------
# output


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in _plain(row)])
    return buf.getvalue()


def render(cfg, ok, result, rows, header) -> str:
    fmt = cfg.get("format")
    if fmt is None:
        fmt = "csv" if str(cfg.get("out", "")).endswith(".csv") else "json"
    if fmt == "csv":
        return _csv_text(header, rows)
    echo = {k: v for k, v in sorted(cfg.items()) if k not in ("format", "out")}
    report = {
        "tool": "abspec",
        "version": __version__,
        "command": cfg["command"],
        "config": echo,
        "tolerances": tolerances(),
        "status": "ok" if ok else "violated",
        "result": result,
    }
    return json.dumps(_plain(report), indent=2) + "\n"


def run(cfg: dict) -> tuple[int, str | None]:
    """Execute a merged config; returns the exit status and the text for ``--out``
    (or standard output).  Generated meshes go to ``--out`` and the summary
    report to standard output."""
    try:
        ok, result, rows, header = COMMANDS[cfg["command"]](cfg)
    except planar.MeshFormatError as exc:
        raise UsageError(f"malformed mesh: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    status = EXIT_OK if ok else EXIT_VIOLATION
    if "mesh_text" in result:
        text = result.pop("mesh_text")
        if "out" not in cfg:
            return status, text
        Path(cfg["out"]).write_text(text)
        cfg = {k: v for k, v in cfg.items() if k != "out"}
        sys.stdout.write(render(cfg, ok, result, rows, header))
        return status, None
    return status, render(cfg, ok, result, rows, header)


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        status, text = run(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if text is not None:
        if "out" in cfg:
            Path(cfg["out"]).write_text(text)
        else:
            sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
