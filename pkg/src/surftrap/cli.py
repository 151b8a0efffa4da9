"""Command-line front end.

Commands (``surftrap <command> --help`` lists the flags)::

    field                  potential and gradient over a grid for a built-in
                           model (gap, pol, strip, ring, ring-disc) or a
                           geometry file
    ring-optimize          optimal gapped ring radii and curvature versus g/z
    ring-finite-optimize   optimal gapless ring on a finite grounded disc
                           versus z/S, optionally combined with a gap width
    gap-solve              solve the polarization amplitudes of a geometry file
    oracle                 closed forms against quadrature references
    greens-finite          Green's function of a pixel on the finite disc

Output is CSV with 12 significant digits. Every file starts with ``# key=value``
lines echoing the library version and the resolved configuration. Exit codes:
0 success, 1 domain or parse error, 2 convergence failure, 3 oracle failure.

Geometry files are documented in :mod:`surftrap.geomfile`; in short::

    [potentials]
    rf = 1.0
    [curve inner electrode=rf other=gnd]
    # t x y g [alpha]
    0.0 1.0 0.0 0.05
"""

import argparse
import math
import sys
import warnings

import numpy as np

from . import __version__
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    GeometryError,
    ParseError,
    QuadratureError,
    SeriesError,
    SingularityError,
)
from .finiteplane import (
    DISC_SWEEP_GRID,
    free_greens_cyl,
    large_s_greens,
    modified_greens,
    optimize_ring_on_disc,
    ring_on_disc_axis_derivatives,
)
from .gap1d import (
    field_gap,
    field_gap_gradient as _gap_grad,
    field_pol,
    field_pol_gradient as _pol_grad,
    strip_alpha,
    StripSpec,
)
from .gapsolver import (
    GapSusceptibilityModel,
    apply_susceptibility,
    center_sigma,
    plane_potential,
    solve_alphas,
)
from .geomfile import format_geometry, read_geometry
from .kernel import Point3, propagate
from .quadrature import QuadSettings
from .ringtrap import (
    GAP_SWEEP_GRID,
    IonParameters,
    RingTrapGeometry,
    optimize_ring,
    ring_axis_derivatives,
    ring_potential,
    ring_surface_potential,
    solve_ring_alphas,
)
from .specfun import SeriesControl

EXIT_OK, EXIT_DOMAIN, EXIT_CONVERGENCE, EXIT_ORACLE = 0, 1, 2, 3


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v + 0.0:.12g}"


class CsvWriter:
    def __init__(self, stream, config, columns):
        self.stream = stream
        stream.write(f"# surftrap_version={__version__}\n")
        for key in sorted(config):
            stream.write(f"# {key}={_cfg_value(config[key])}\n")
        self.columns = columns
        stream.write(",".join(columns) + "\n")

    def comment(self, key, value):
        self.stream.write(f"# {key}={value}\n")

    def row(self, values):
        if len(values) != len(self.columns):
            raise ValueError("row length does not match the header")
        self.stream.write(",".join(_fmt(v) for v in values) + "\n")


def _cfg_value(v):
    if isinstance(v, (list, tuple)):
        return ";".join(_cfg_value(x) for x in v)
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def _grid(spec, name):
    """'v' -> [v]; 'a:b:n' -> n points from a to b inclusive (n = 0 gives none)."""
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 3:
            n = int(parts[2])
            if n < 0:
                raise ValueError
            return np.linspace(float(parts[0]), float(parts[1]), n)
    except ValueError:
        pass
    raise DomainError(f"--{name} expects 'value' or 'start:stop:count', got {spec!r}")


def _float_list(spec, name):
    try:
        return [float(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise DomainError(f"--{name} expects comma-separated numbers, got {spec!r}") from None


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise ConfigurationError(f"--{n.replace('_', '-')} is required here")


def _series(args):
    return SeriesControl(rel_tol=args.series_tol, max_terms=args.series_max_terms)


def _quad(args):
    return QuadSettings(epsrel=args.quad_tol)


def _ion(args):
    vals = [args.mass_amu, args.charge_e, args.urf_volt, args.omega_rf_hz]
    if all(v is None for v in vals):
        return None
    if any(v is None for v in vals):
        raise ConfigurationError("--mass-amu, --charge-e, --urf-volt and --omega-rf-hz go together")
    return IonParameters.from_lab_units(*vals)


def _secular_hz(ion, kappa, z, z_metres):
    """Axial secular frequency from the pseudopotential curvature at the trap centre."""
    length = z_metres / z
    d2 = kappa * 4.0 ** (1.0 / 3.0) / (z * z)
    k = 2.0 * ion.prefactor * (d2 / length ** 2) ** 2
    return math.sqrt(k / ion.mass) / (2.0 * math.pi)


# --- field ---

def _safe_gradient(fn, x, z, g):
    # on the plane the gradient diverges at the gap edges
    try:
        return fn(x, z, g)
    except SingularityError:
        return math.nan, math.nan


def field_gap_gradient(x, z, g):
    return _safe_gradient(_gap_grad, x, z, g)


def field_pol_gradient(x, z, g):
    return _safe_gradient(_pol_grad, x, z, g)


def _line_model(kind, x, z, g, w=None, alpha=0.0):
    """Potential and gradient of gap, pol or strip models (translation along y)."""
    if kind == "gap":
        gx, gz = field_gap_gradient(x, z, g)
        return field_gap(x, z, g), gx, 0.0, gz
    if kind == "pol":
        gx, gz = field_pol_gradient(x, z, g)
        return field_pol(x, z, g), gx, 0.0, gz
    a, b = x + 0.5 * w, x - 0.5 * w
    ga, gb = field_gap_gradient(a, z, g), field_gap_gradient(b, z, g)
    pa, pb = field_pol_gradient(a, z, g), field_pol_gradient(b, z, g)
    val = field_gap(a, z, g) - field_gap(b, z, g) + alpha * (field_pol(a, z, g) + field_pol(b, z, g))
    gx = ga[0] - gb[0] + alpha * (pa[0] + pb[0])
    gz = ga[1] - gb[1] + alpha * (pa[1] + pb[1])
    return val, gx, 0.0, gz


def _fd_gradient(f, x, y, z, h):
    gx = (f(x + h, y, z) - f(x - h, y, z)) / (2.0 * h)
    gy = (f(x, y + h, z) - f(x, y - h, z)) / (2.0 * h)
    gz = (f(x, y, z + h) - f(x, y, z - h)) / (2.0 * h)
    return gx, gy, gz


def _field_evaluator(args, config):
    if args.geometry is not None:
        electrodes, curves = read_geometry(args.geometry)
        if any(c.alpha is None for c in curves):
            curves = solve_alphas(electrodes, curves)
        curves = apply_susceptibility(curves, GapSusceptibilityModel(args.multiplier))
        gmin = min(float(np.min(c.g)) for c in curves)
        config["source"] = "geometry"

        def pot(x, y, z):
            return float(plane_potential(electrodes, curves, [(x, y, z)])[0])

        def ev(x, y, z):
            v = pot(x, y, z)
            if z == 0:
                return v, math.nan, math.nan, math.nan
            h = 1e-3 * min(abs(z), gmin)
            return (v,) + _fd_gradient(pot, x, y, z, h)

        return ev

    model = args.model
    if model is None:
        raise ConfigurationError("give --model or --geometry")
    if model in ("gap", "pol"):
        _need(args, "g")
        return lambda x, y, z: _line_model(model, x, z, args.g)
    if model == "strip":
        _need(args, "g", "w")
        StripSpec(args.w, args.g)
        alpha = args.multiplier * (strip_alpha(args.w, args.g) if args.alpha is None else args.alpha)
        config["alpha_used"] = alpha
        return lambda x, y, z: _line_model("strip", x, z, args.g, args.w, alpha)
    if model == "ring":
        _need(args, "R1", "R2")
        geom = RingTrapGeometry(args.R1, args.R2, args.g or 0.0)
        amps = solve_ring_alphas(geom).scaled(args.multiplier)
        config["alpha1"], config["alpha2"] = amps.alpha1, amps.alpha2
        phi = ring_potential(geom, amps)
        quad = _quad(args)

        def pot(x, y, z):
            return propagate(phi, Point3(x, y, z), quad)

        def ev(x, y, z):
            if z == 0:
                return ring_surface_potential(math.hypot(x, y), geom, amps), math.nan, math.nan, math.nan
            if x == 0 and y == 0:
                d = ring_axis_derivatives(z, geom, amps)
                return d[0], 0.0, 0.0, d[1]
            return (pot(x, y, z),) + _fd_gradient(pot, x, y, z, 1e-3 * abs(z))

        return ev
    if model == "ring-disc":
        _need(args, "R1", "R2", "S")
        series = _series(args)

        def ev(x, y, z):
            if x != 0 or y != 0:
                raise DomainError(f"ring-disc fields are available on the axis only, got point ({x}, {y}, {z})")
            d = ring_on_disc_axis_derivatives(z, args.R1, args.R2, args.S, series)
            return d[0], 0.0, 0.0, d[1]

        return ev
    raise ConfigurationError(f"unknown model {model!r}")


def cmd_field(args, out):
    config = _base_config(args)
    xs, ys, zs = _grid(args.x, "x"), _grid(args.y, "y"), _grid(args.z, "z")
    config.update(x=args.x, y=args.y, z=args.z)
    ev = _field_evaluator(args, config)
    w = CsvWriter(out, config, ["x", "y", "z", "phi", "dphi_dx", "dphi_dy", "dphi_dz"])
    for z in zs:
        for y in ys:
            for x in xs:
                x, y, z = float(x), float(y), float(z)
                try:
                    vals = ev(x, y, z)
                except DomainError as exc:
                    raise DomainError(f"at point ({x}, {y}, {z}): {exc}") from exc
                w.row([x, y, z, *vals])
    return EXIT_OK


# --- optimisation sweeps ---

def cmd_ring_optimize(args, out):
    config = _base_config(args)
    gaps = GAP_SWEEP_GRID if args.gaps is None else _float_list(args.gaps, "gaps")
    if 0.0 not in gaps:
        gaps = [0.0] + list(gaps)
    ion = _ion(args)
    config.update(gaps=list(gaps), z=args.z)
    cols = ["g_over_z", "R1_ratio", "R2_ratio", "kappa_ratio", "R1", "R2", "kappa", "alpha1", "alpha2"]
    if ion is not None:
        _need(args, "z_metres")
        cols.append("secular_hz")
    w = CsvWriter(out, config, cols)
    failed = 0
    for gz in gaps:
        try:
            rep = optimize_ring(gz * args.z, args.z, args.multiplier, ion)
        except (ConvergenceError, DomainError) as exc:
            failed += 1
            w.comment("error", f"g_over_z={_fmt(gz)}: {exc}")
            w.row([gz] + [math.nan] * (len(cols) - 1))
            continue
        row = [gz, rep.R1_ratio, rep.R2_ratio, rep.kappa_ratio, rep.R1, rep.R2, rep.kappa,
               rep.amplitudes.alpha1, rep.amplitudes.alpha2]
        if ion is not None:
            row.append(_secular_hz(ion, rep.kappa, args.z, args.z_metres))
        w.row(row)
    return EXIT_CONVERGENCE if failed else EXIT_OK


def cmd_ring_finite_optimize(args, out):
    """Finite disc sweep; with --g the gap and finite-size corrections to kappa are added."""
    config = _base_config(args)
    grid = DISC_SWEEP_GRID if args.z_over_s is None else _float_list(args.z_over_s, "z-over-s")
    series = _series(args)
    config.update(z_over_s=list(grid), z=args.z)
    cols = ["z_over_S", "R1_ratio", "R2_ratio", "kappa_ratio", "R1", "R2", "kappa"]
    gap_rep = None
    if args.g is not None:
        gap_rep = optimize_ring(args.g, args.z, args.multiplier)
        config["g"] = args.g
        config["gap_kappa_ratio"] = gap_rep.kappa_ratio
        cols.append("kappa_ratio_combined")
    w = CsvWriter(out, config, cols)
    failed = 0
    for q in grid:
        try:
            if q == 0:
                rep = optimize_ring(0.0, args.z)
            else:
                rep = optimize_ring_on_disc(args.z / q, args.z, series)
        except (ConvergenceError, DomainError, SeriesError) as exc:
            failed += 1
            w.comment("error", f"z_over_S={_fmt(q)}: {exc}")
            w.row([q] + [math.nan] * (len(cols) - 1))
            continue
        row = [q, rep.R1_ratio, rep.R2_ratio, rep.kappa_ratio, rep.R1, rep.R2, rep.kappa]
        if gap_rep is not None:
            row.append(1.0 + (rep.kappa_ratio - 1.0) + (gap_rep.kappa_ratio - 1.0))
        w.row(row)
    return EXIT_CONVERGENCE if failed else EXIT_OK


# --- gaps of arbitrary shape ---

def cmd_gap_solve(args, out):
    config = _base_config(args)
    _need(args, "geometry")
    electrodes, curves = read_geometry(args.geometry)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = solve_alphas(electrodes, curves, d=args.d, full_output=True)
    solved = apply_susceptibility(sol.curves, GapSusceptibilityModel(args.multiplier))
    resid = center_sigma(electrodes, sol.curves, d=args.d)
    config.update(condition=sol.condition, max_residual=float(np.max(np.abs(resid))))
    w = CsvWriter(out, config, ["curve", "t", "x", "y", "g", "alpha", "sigma_residual"])
    for msg in sol.warnings:
        w.comment("warning", msg)
    k = 0
    for c in solved:
        for i in range(c.n_unknowns):
            w.row([c.name, c.t[i], c.x[i], c.y[i], c.g[i], c.alpha[i], resid[k]])
            k += 1
    if args.annotated:
        with open(args.annotated, "w", encoding="utf-8") as fh:
            fh.write(format_geometry(electrodes, solved))
    return EXIT_OK


# --- references ---

def cmd_oracle(args, out):
    from .oracle import run_suite

    config = _base_config(args)
    config.update(suite=args.suite, seed=args.seed)
    results = run_suite(args.suite, args.count, args.seed)
    w = CsvWriter(out, config, ["suite", "count", "max_err", "median_err", "tol", "passed", "note"])
    for r in results:
        w.row([r.name, str(r.count), r.max_err, r.median_err, r.tol, "yes" if r.passed else "no", r.note])
    return EXIT_OK if all(r.passed for r in results) else EXIT_ORACLE


def cmd_greens_finite(args, out):
    config = _base_config(args)
    _need(args, "rho", "S")
    xs, ys, zs = _grid(args.x, "x"), _grid(args.y, "y"), _grid(args.z, "z")
    config.update(x=args.x, y=args.y, z=args.z)
    series = _series(args)
    w = CsvWriter(out, config, ["x", "y", "z", "greens", "greens_free", "greens_large_S"])
    for z in zs:
        for y in ys:
            for x in xs:
                x, y, z = float(x), float(y), float(z)
                p = (math.hypot(x, y), math.atan2(y, x), z)
                try:
                    gv = modified_greens(args.rho, args.S, p, series)
                except DomainError as exc:
                    raise DomainError(f"at point ({x}, {y}, {z}): {exc}") from exc
                w.row([x, y, z, gv, free_greens_cyl(args.rho, p), large_s_greens((x - args.rho, y, z), args.S)])
    return EXIT_OK


# --- argument parsing ---

def _base_config(args):
    skip = {"func", "output"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    return cfg


def _common(p):
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    p.add_argument("--series-tol", type=float, default=1e-14, help="relative tolerance of series sums")
    p.add_argument("--series-max-terms", type=int, default=5000)
    p.add_argument("--quad-tol", type=float, default=1e-10, help="relative tolerance of quadratures")
    p.add_argument("--multiplier", type=float, default=1.0,
                   help="gap susceptibility multiplier applied to polarization amplitudes")


def _ion_flags(p):
    p.add_argument("--mass-amu", type=float)
    p.add_argument("--charge-e", type=float)
    p.add_argument("--urf-volt", type=float)
    p.add_argument("--omega-rf-hz", type=float, help="rf drive frequency (ordinary, Hz)")
    p.add_argument("--z-metres", type=float, help="physical trap height for dimensional output")


def build_parser():
    parser = argparse.ArgumentParser(prog="surftrap", description="Surface-electrode trap electrostatics.")
    parser.add_argument("--version", action="version", version=f"surftrap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", help="potential and gradient on a grid")
    _common(p)
    p.add_argument("--model", choices=["gap", "pol", "strip", "ring", "ring-disc"])
    p.add_argument("--geometry", help="geometry file (instead of --model)")
    for name in ("g", "w", "R1", "R2", "S", "alpha"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--x", default="0", help="'value' or 'start:stop:count'")
    p.add_argument("--y", default="0")
    p.add_argument("--z", default="1")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("ring-optimize", help="optimal gapped ring versus g/z")
    _common(p)
    _ion_flags(p)
    p.add_argument("--gaps", help="comma-separated g/z values (default 0, 0.05, ..., 0.5)")
    p.add_argument("--z", type=float, default=1.0)
    p.set_defaults(func=cmd_ring_optimize)

    p = sub.add_parser("ring-finite-optimize", help="optimal ring on a finite disc versus z/S")
    _common(p)
    p.add_argument("--z-over-s", help="comma-separated z/S values (default 0.025, ..., 0.3)")
    p.add_argument("--z", type=float, default=1.0)
    p.add_argument("--g", type=float, help="also add the gap correction for this gap width")
    p.set_defaults(func=cmd_ring_finite_optimize)

    p = sub.add_parser("gap-solve", help="solve polarization amplitudes for a geometry file")
    _common(p)
    p.add_argument("--geometry", required=True)
    p.add_argument("--d", type=float, help="half-width of the local square (default 1e-3 g)")
    p.add_argument("--annotated", help="write the geometry with solved amplitudes here")
    p.set_defaults(func=cmd_gap_solve)

    p = sub.add_parser("oracle", help="closed forms against quadrature references")
    _common(p)
    p.add_argument("--suite", default="all",
                   help="none, all, gap-field, pol-field, strip-far, ring-axis or finite-pixel")
    p.add_argument("--count", type=int, help="points per suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("greens-finite", help="pixel Green's function on the finite disc")
    _common(p)
    p.add_argument("--rho", type=float, help="pixel radius")
    p.add_argument("--S", type=float, help="disc radius")
    p.add_argument("--x", default="0")
    p.add_argument("--y", default="0")
    p.add_argument("--z", default="1")
    p.set_defaults(func=cmd_greens_finite)
    return parser


_POSITIVE = ("g", "w", "R1", "R2", "S", "rho", "d", "series_tol", "quad_tol", "series_max_terms",
             "mass_amu", "charge_e", "urf_volt", "omega_rf_hz", "z_metres")


def _validate(args):
    for name in _POSITIVE:
        v = getattr(args, name, None)
        if v is not None and not (math.isfinite(v) and v > 0):
            raise DomainError(f"--{name.replace('_', '-')} must be positive and finite, got {v}")
    if not (math.isfinite(args.multiplier) and args.multiplier >= 0):
        raise DomainError(f"--multiplier must be non-negative, got {args.multiplier}")
    if isinstance(getattr(args, "z", None), float) and not (math.isfinite(args.z) and args.z > 0):
        raise DomainError(f"--z must be positive and finite, got {args.z}")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors are reported by argparse; keep exit code 2 for convergence failures
        return EXIT_OK if exc.code in (0, None) else EXIT_DOMAIN
    try:
        _validate(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    stream = open(args.output, "w", encoding="utf-8", newline="\n") if args.output else sys.stdout
    try:
        return args.func(args, stream)
    except (DomainError, ParseError, ConfigurationError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ConvergenceError, SeriesError, QuadratureError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    finally:
        if stream is not sys.stdout:
            stream.close()


if __name__ == "__main__":
    sys.exit(main())
