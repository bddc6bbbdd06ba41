"""Command-line front end.

Exit codes: 0 pass, 1 certifier failure, 2 solver failure, 3 I/O or parse
failure, 4 usage error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .barrier import (
    ComparisonFamily,
    PlaneProfile,
    RadialBarrier,
    annulus_fb_slope_check,
    default_gamma,
    touching_search,
    validate_gamma,
)
from .certify import (
    ANCHORS,
    HarnackBand,
    HypothesisError,
    component_smallness,
    fb_gradient_residual,
    harnack_cascade,
    harnack_step,
    improvement_check,
    measure_flatness,
    recenter_at_free_boundary,
    smallest_flat_eps,
    tightest_band,
    vanish_check,
    viscosity_check,
)
from .config import ConfigError, LabConfig
from .elliptic import LinearizedProblem, SolverError, solve_linearized
from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    classify_regions,
    laplacian_array,
    neighbor_any,
    norm_field,
)
from .plotting import emit_plots
from .report import CASCADE_COLUMNS, SWEEP_COLUMNS, ExperimentReport, dumps, write_csv
from .snapshot import MalformedSnapshot, read_snapshot, snapshot_hash, write_snapshot
from .variational import FAMILIES, boundary_family, energy, minimize_detailed

log = logging.getLogger("fblab")

EXIT_PASS, EXIT_FAIL, EXIT_SOLVER, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 4

CERTIFIERS = (
    "viscosity", "fbgrad", "flatness", "vanish", "smallness",
    "harnack-step", "harnack-cascade", "iof", "subharmonic",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text):
    return [v.strip() for v in text.split(",") if v.strip()]


# -- inputs ------------------------------------------------------------------


def load_input(args, cfg, report):
    """Field named by ``--snapshot`` or ``--family`` (``--solve`` runs the minimizer)."""
    if getattr(args, "snapshot", None):
        U = read_snapshot(args.snapshot)
        report.provenance = {
            "kind": "snapshot", "path": str(args.snapshot), "hash": snapshot_hash(U),
        }
        return U
    name = getattr(args, "family", None)
    if not name:
        raise UsageError("an input is required: --snapshot PATH or --family NAME")
    params = list(getattr(args, "params", None) or [])
    solve = bool(getattr(args, "solve", False))
    report.provenance = {
        "kind": "family", "name": name, "params": params, "solved": solve,
    }
    try:
        fn, m = boundary_family(name, params, cfg.grid.dim_m if cfg.grid.dim_m > 1 else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    spec = cfg.grid.with_m(m)
    if solve:
        return minimize_detailed(fn, spec, cfg.minimize).field
    return VectorField.from_function(spec, fn)


def _x0(args, n):
    x0 = getattr(args, "x0", None)
    if x0 is None:
        return tuple([0.0] * n)
    if len(x0) != n:
        raise UsageError(f"--x0 needs {n} coordinates")
    return tuple(x0)


# -- commands ----------------------------------------------------------------


def cmd_solve(args, cfg, out, report):
    if args.snapshot:
        phi = read_snapshot(args.snapshot)
        report.provenance = {
            "kind": "snapshot", "path": str(args.snapshot), "hash": snapshot_hash(phi),
        }
        spec = phi.spec
    else:
        m = cfg.grid.dim_m if cfg.grid.dim_m > 1 else None
        try:
            phi, m = boundary_family(args.family, args.params or (), m)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        report.provenance = {"kind": "family", "name": args.family,
                             "params": list(args.params or [])}
        spec = cfg.grid.with_m(m)
    res = minimize_detailed(phi, spec, cfg.minimize)
    U = res.field
    en = energy(U, zero_tol=cfg.constants.zero_tol)
    log_e = res.energy_log
    monotone = all(
        b[2] <= a[2] * (1 + 1e-13)
        for a, b in zip(log_e, log_e[1:]) if a[0] == b[0] and b[3]
    )
    report.add("energy", dict(en.to_dict(), paper_anchor=ANCHORS["energy"]), passed=True)
    snap = out / "solution.fb"
    write_snapshot(snap, U)
    report.outputs.append(snap.name)
    report.results.update({
        "snapshot_hash": snapshot_hash(U),
        "stages": [s.__dict__ for s in res.stages],
        "harmonic_residual": res.harmonic_residual,
        "descent_monotone": monotone,
        "energy_log_length": len(log_e),
    })
    report.stop_reasons.append("continuation schedule completed")
    return U


def _certificate_error(report, name, exc, anchor):
    report.add(name, {"error": str(exc), "paper_anchor": ANCHORS[anchor]}, passed=False)


def cmd_certify(args, cfg, out, report):
    which = _names(args.which)
    unknown = [w for w in which if w not in CERTIFIERS]
    if unknown or not which:
        raise UsageError(
            f"unknown certifier(s) {', '.join(unknown) or '<none>'}; "
            f"choose from {', '.join(CERTIFIERS)}"
        )
    U = load_input(args, cfg, report)
    run_certifiers(U, which, args, cfg, out, report)
    return U


def run_certifiers(U, which, args, cfg, out, report):
    spec = U.spec
    k = cfg.constants
    zt = k.zero_tol
    x0 = _x0(args, spec.dim_n)
    h = spec.h
    for name in which:
        if name == "viscosity":
            rep = viscosity_check(
                U, probe_budget=cfg.certify.probe_budget, seed=cfg.seed,
                curvature_bound=cfg.certify.curvature_bound, zero_tol=zt,
            )
            report.add("viscosity", rep.to_dict())
        elif name == "fbgrad":
            res = fb_gradient_residual(U, zero_tol=zt)
            d = res.to_dict()
            d["threshold"] = k.fbgrad_C * math.sqrt(h)
            report.add("fbgrad", d, passed=res.sup <= d["threshold"])
        elif name == "flatness":
            cert = measure_flatness(U, x0, args.r or 0.5, n_dirs=cfg.certify.n_dirs)
            d = cert.to_dict()
            d["eps_bar"] = k.eps_bar
            report.add("flatness", d, passed=cert.epsilon <= k.eps_bar)
        elif name == "vanish":
            e = np.eye(spec.dim_n)[-1]
            v = vanish_check(U, e, args.eps or k.eps_bar, zero_tol=zt)
            report.add("vanish", v.to_dict(), passed=v.passed)
        elif name == "smallness":
            eps = args.eps or max(smallest_flat_eps(U, zt), h)
            try:
                v = component_smallness(U, eps, k.C_cfg, zero_tol=zt)
                report.add("smallness", v.to_dict(), passed=v.passed)
            except HypothesisError as exc:
                _certificate_error(report, "smallness", exc, "smallness")
        elif name == "harnack-step":
            r0 = args.r0 or 1.0
            try:
                band0 = tightest_band(U, x0, r0, zt)
                band1 = harnack_step(U, band0, k.eps_bar, k.tol, zt)
                d = band1.to_dict()
                d["initial"] = band0.to_dict()
                ok = band0.width == 0 or band1.shrink_factor <= k.shrink_max
                report.add("harnack_step", d, passed=ok)
            except (HypothesisError, ValueError) as exc:
                _certificate_error(report, "harnack_step", exc, "harnack_step")
        elif name == "harnack-cascade":
            run_cascade(U, x0, args, cfg, out, report)
        elif name == "iof":
            r = args.r or 0.125
            slack = k.iof_slack_nodes * h / r
            try:
                V, shift = recenter_at_free_boundary(U, zt)
                eps = args.eps or max(smallest_flat_eps(V, zt), h)
                res = improvement_check(V, eps, r, k.C_cfg, slack, zero_tol=zt)
                d = res.to_dict()
                d["recenter_shift"] = shift.tolist()
                report.add("iof", d, passed=res.passed)
            except HypothesisError as exc:
                _certificate_error(report, "iof", exc, "improvement")
        elif name == "subharmonic":
            report.add("subharmonic", subharmonic_check(U, zt))


def subharmonic_check(U, zero_tol=None):
    """Discrete Laplacian of |U| at positivity nodes whose full stencil is positive."""
    spec = U.spec
    masks = classify_regions(U, zero_tol)
    pos = masks.positivity
    inner = pos & ~neighbor_any(~pos)
    lap = laplacian_array(norm_field(U).values, spec.h)[inner]
    floor = -10 * spec.h**2
    worst = float(lap.min()) if lap.size else 0.0
    return {
        "nodes": int(lap.size),
        "min_laplacian": worst,
        "floor": floor,
        "passed": bool(worst >= floor),
        "paper_anchor": "Delta |U| >= 0 in {|U| > 0}",
    }


def run_cascade(U, x0, args, cfg, out, report):
    k = cfg.constants
    r0 = getattr(args, "r0", None) or 1.0
    k_max = getattr(args, "kmax", None) or cfg.certify.k_max
    band = getattr(args, "band", None)
    try:
        if band:
            if len(band) != 2:
                raise UsageError("--band needs a,b")
            band0 = HarnackBand(x0, r0, band[0], band[1])
        else:
            band0 = tightest_band(U, x0, r0, k.zero_tol)
    except ValueError as exc:
        _certificate_error(report, "harnack_cascade", exc, "harnack_cascade")
        return None
    rec = harnack_cascade(
        U, x0, band0, k_max, k.eps_bar, k.tol, k.zero_tol, cfg.certify.min_radius_nodes
    )
    d = rec.to_dict()
    worst = max(rec.shrink_factors, default=None)
    ok = bool(rec.shrink_factors) and (band0.width == 0 or worst <= k.shrink_max)
    report.add("harnack_cascade", d, passed=ok)
    report.stop_reasons.append(rec.stop_reason)
    report.results.setdefault("cascades", []).append(d)
    path = write_csv(out / "cascade.csv", CASCADE_COLUMNS, rec.rows())
    report.outputs.append(Path(path).name)
    return rec


def cmd_harnack(args, cfg, out, report):
    U = load_input(args, cfg, report)
    run_cascade(U, _x0(args, U.spec.dim_n), args, cfg, out, report)
    return U


def cmd_flatness(args, cfg, out, report):
    U = load_input(args, cfg, report)
    k = cfg.constants
    x0 = _x0(args, U.spec.dim_n)
    try:
        cert = measure_flatness(U, x0, args.r, n_dirs=cfg.certify.n_dirs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    d = cert.to_dict()
    d["eps_bar"] = k.eps_bar
    report.add("flatness", d, passed=cert.epsilon <= k.eps_bar)
    eps = args.eps if args.eps is not None else k.eps_bar
    v = vanish_check(U, cert.e, eps * args.r, x0, args.r, k.zero_tol)
    report.add("vanish", v.to_dict(), passed=v.passed)
    report.results["plane_normal"] = list(cert.e)
    return U


def tilted_plane(spec, tilt):
    """``f^1 <x, nu>^+`` with ``|nu - e_n| = tilt`` in the (x_1, x_n) plane."""
    th = 2 * math.asin(min(tilt, 2.0) / 2)
    xs = spec.mesh()
    s = np.maximum(math.sin(th) * xs[0] + math.cos(th) * xs[-1], 0.0)
    data = np.zeros((spec.dim_m,) + spec.shape)
    data[0] = np.broadcast_to(s, spec.shape)
    return VectorField(spec, data)


def cmd_iof_sweep(args, cfg, out, report):
    k = cfg.constants
    if not args.eps_list or not args.r_list:
        raise UsageError("--eps and --r lists must be nonempty")
    snap = None
    if args.snapshot:
        snap = read_snapshot(args.snapshot)
        report.provenance = {
            "kind": "snapshot", "path": str(args.snapshot), "hash": snapshot_hash(snap),
        }
    else:
        report.provenance = {"kind": "analytic", "name": "tilted plane, tilt eps/2"}
    spec = snap.spec if snap is not None else cfg.grid
    h = spec.h
    rows, full = [], []
    if snap is not None:
        snap, shift = recenter_at_free_boundary(snap, k.zero_tol)
        report.results["recenter_shift"] = shift.tolist()
    for eps in args.eps_list:
        U = snap if snap is not None else tilted_plane(spec, eps / 2)
        for r in args.r_list:
            row = {"eps": float(eps), "r": float(r), "epsilon_new": None}
            if r < cfg.certify.min_radius_nodes * h:
                row["pass"] = "under-resolved"
                full.append(dict(row))
                rows.append(row)
                continue
            slack = k.iof_slack_nodes * h / r
            try:
                res = improvement_check(U, eps, r, k.C_cfg, slack, zero_tol=k.zero_tol)
                row["epsilon_new"] = res.epsilon_new
                row["pass"] = res.passed
                full.append(dict(row, tilt=res.to_dict()))
            except (HypothesisError, ValueError) as exc:
                row["pass"] = "error"
                full.append(dict(row, error=str(exc)))
            rows.append(row)
    resolved = [r for r in rows if r["pass"] != "under-resolved"]
    report.add("iof_sweep", {
        "rows": len(rows),
        "resolved": len(resolved),
        "paper_anchor": ANCHORS["improvement"],
    }, passed=all(r["pass"] is True for r in resolved))
    report.results["sweep"] = full
    path = write_csv(out / "iof_sweep.csv", SWEEP_COLUMNS, rows)
    report.outputs.append(Path(path).name)
    return None


LINEARIZED_CASES = {
    # name: (u^1, u^i for i >= 2); all harmonic with the right trace on x_n = 0
    "constant": (lambda *x: np.ones(np.broadcast(*x).shape), None),
    "linear": (None, lambda *x: x[-1] + 0.0 * x[0]),
    "saddle": (lambda *x: x[0] ** 2 - x[-1] ** 2, lambda *x: x[-1] * (1.0 + 0.0 * x[0])),
    "smooth": (lambda *x: np.exp(x[0]) * np.cos(x[-1]), lambda *x: np.exp(x[0]) * np.sin(x[-1])),
}


def _zero(*x):
    return np.zeros(np.broadcast(*x).shape)


def linearized_errors(spec, case, radius=0.5):
    """Sup errors per component on the closed half ball for a manufactured case."""
    u1, ui = LINEARIZED_CASES[case]
    fns = (u1 or _zero, ui or _zero)
    sol = solve_linearized(LinearizedProblem(fns, radius), spec.with_m(2))
    xs = spec.mesh()
    dom = (spec.radius2() <= radius * radius + 1e-12) & (
        np.broadcast_to(xs[-1], spec.shape) >= -1e-12
    )
    errs = []
    for i, fn in enumerate(fns):
        exact = np.broadcast_to(fn(*xs), spec.shape)
        errs.append(float(np.max(np.abs(sol.data[i] - exact)[dom])))
    return errs, sol


def cmd_linearized(args, cfg, out, report):
    spec = cfg.grid
    report.provenance = {"kind": "analytic", "name": "manufactured half-ball solutions"}
    cases = _names(args.cases) if args.cases else ["constant", "linear", "saddle"]
    bad = [c for c in cases if c not in LINEARIZED_CASES]
    if bad:
        raise UsageError(f"unknown case(s) {', '.join(bad)}; choose from {', '.join(LINEARIZED_CASES)}")
    results = {}
    ok = True
    for case in cases:
        errs, _ = linearized_errors(spec, case)
        results[case] = {"sup_errors": errs}
        if case != "smooth":
            ok &= max(errs) <= args.tol
    # convergence on the smooth case: h and h/2
    fine = GridSpec.unit(spec.dim_n, 2, spec.h / 2)
    e1, _ = linearized_errors(spec, "smooth")
    e2, _ = linearized_errors(fine, "smooth")
    ratios = [a / b if b > 0 else math.inf for a, b in zip(e1, e2)]
    conv_ok = all(3.5 <= q <= 4.5 for q in ratios)
    # decoupling: changing u^2 data leaves u^1 bit-identical
    base = solve_linearized(LinearizedProblem(LINEARIZED_CASES["smooth"]), spec.with_m(2))
    alt = solve_linearized(
        LinearizedProblem((LINEARIZED_CASES["smooth"][0], lambda *x: 3.0 * x[-1] + x[0] ** 2)),
        spec.with_m(2),
    )
    decoupled = bool(np.array_equal(base.data[0], alt.data[0]))
    report.add("linearized", {
        "cases": results,
        "tolerance": args.tol,
        "convergence": {"h": spec.h, "errors_h": e1, "errors_h2": e2, "ratios": ratios,
                        "passed": conv_ok},
        "decoupled": decoupled,
        "paper_anchor": ANCHORS["linearized"],
    }, passed=ok and conv_ok and decoupled)
    return None


def cmd_barrier_validate(args, cfg, out, report):
    k = cfg.constants
    report.provenance = {"kind": "analytic", "name": "radial barrier"}
    dims = [int(d) for d in _floats(args.dims)] if args.dims else [cfg.grid.dim_n]
    for n in dims:
        if n not in (2, 3):
            raise UsageError("--dims entries must be 2 or 3")
        spec = cfg.grid if n == cfg.grid.dim_n else GridSpec.unit(n)
        gamma = k.gamma if k.gamma is not None else default_gamma(spec)
        verdict = validate_gamma(spec, gamma)
        b = RadialBarrier(n, gamma)
        d = {"gamma": verdict.to_dict(), "families": {}}
        ok = verdict.passed
        xs = spec.mesh()
        for orient in ("sub", "super"):
            fam = ComparisonFamily(PlaneProfile(0.0), b, k.c0, args.epsilon, orient)
            lap = fam.laplacian_on_annulus(spec)
            sign_ok = bool(np.all(lap > 0) if orient == "sub" else np.all(lap < 0))
            slope = annulus_fb_slope_check(fam, spec, k.slope_margin)
            # g = p (sub) or p + eps (super) touches at t = 0 inside the inner ball
            g = PlaneProfile(0.0)(*xs) + (0.0 if orient == "sub" else args.epsilon)
            g = ScalarField(spec.with_m(1), np.broadcast_to(g, spec.shape).astype(float))
            t_bar, pt = touching_search(g, fam, spec.ball_mask())
            d["families"][orient] = {
                "laplacian_sign_ok": sign_ok,
                "laplacian_extreme": float(lap.min() if orient == "sub" else lap.max()),
                "slope": slope.to_dict(),
                "touch": {"t_bar": t_bar, "point": list(pt)},
            }
            ok &= sign_ok and slope.passed
        d["paper_anchor"] = ANCHORS["barrier"]
        report.add(f"barrier_n{n}", d, passed=ok)
    return None


COMMANDS = {
    "solve": cmd_solve,
    "certify": cmd_certify,
    "iof-sweep": cmd_iof_sweep,
    "harnack": cmd_harnack,
    "linearized": cmd_linearized,
    "barrier-validate": cmd_barrier_validate,
    "flatness": cmd_flatness,
}


# -- parser ------------------------------------------------------------------


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=d, help="JSON configuration file")
    p.add_argument("--out", metavar="DIR", default=d, help="output directory (default fblab-out)")
    p.add_argument("--seed", type=int, default=d, help="probe sampling seed")
    p.add_argument("--h", type=int, metavar="N", default=d, dest="per_unit",
                   help="grid spacing 1/N")
    p.add_argument("-v", "--verbose", action="store_true",
                   default=argparse.SUPPRESS if suppress else False)


def _input_flags(p, solve_flag=True):
    p.add_argument("--snapshot", metavar="PATH", help="FBLAB1 field snapshot")
    p.add_argument("--family", choices=FAMILIES, help="analytic boundary family")
    p.add_argument("--params", type=_floats, help="family parameters, comma separated")
    if solve_flag:
        p.add_argument("--solve", action="store_true",
                       help="minimize with the family as boundary data instead of sampling it")


def build_parser():
    parser = _Parser(prog="fblab", description="Free boundary lab: solve and certify.")
    parser.add_argument("--version", action="version", version=f"fblab {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("solve", "minimize the energy for boundary data")
    p.add_argument("--snapshot", metavar="PATH", help="boundary data from a snapshot")
    p.add_argument("--family", choices=FAMILIES, default="plane")
    p.add_argument("--params", type=_floats)

    p = add("certify", "run certifiers on a field")
    _input_flags(p)
    p.add_argument("--which", required=True, help=f"comma list of {','.join(CERTIFIERS)}")
    p.add_argument("--x0", type=_floats)
    p.add_argument("--r", type=float, help="ball radius for flatness/iof")
    p.add_argument("--r0", type=float, help="initial Harnack radius (default 1)")
    p.add_argument("--eps", type=float, help="flatness level for vanish/smallness/iof")
    p.add_argument("--kmax", type=int)
    p.add_argument("--band", type=_floats, help="initial band a,b (default: tightest)")

    p = add("iof-sweep", "improvement of flatness over (eps, r) pairs")
    p.add_argument("--snapshot", metavar="PATH", help="flat instance (default: tilted planes)")
    p.add_argument("--eps", dest="eps_list", type=_floats, required=True)
    p.add_argument("--r", dest="r_list", type=_floats, required=True)

    p = add("harnack", "Harnack band cascade")
    _input_flags(p)
    p.add_argument("--x0", type=_floats)
    p.add_argument("--r0", type=float)
    p.add_argument("--kmax", type=int)
    p.add_argument("--band", type=_floats)

    p = add("linearized", "manufactured solutions of the linearized half-ball system")
    p.add_argument("--cases", help=f"comma list of {','.join(LINEARIZED_CASES)}")
    p.add_argument("--tol", type=float, default=1e-6)

    p = add("barrier-validate", "barrier subharmonicity and comparison family slopes")
    p.add_argument("--dims", help="comma list of dimensions (default: config dim_n)")
    p.add_argument("--epsilon", type=float, default=0.01)

    p = add("flatness", "flatness certificate on a ball")
    _input_flags(p)
    p.add_argument("--x0", type=_floats)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--eps", type=float, help="vanishing level (default eps_bar)")
    return parser


def _write_failure(out, report, code, message):
    report.errors.append(message)
    report.exit_code = code
    try:
        out.mkdir(parents=True, exist_ok=True)
        report.write(out / "report.json")
    except OSError:
        pass


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
    )
    out = Path(args.out or "fblab-out")
    try:
        cfg = LabConfig.load(args.config, {"seed": args.seed, "grid.per_unit": args.per_unit})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    report = ExperimentReport(args.command, cfg.to_dict())
    t0 = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        field = COMMANDS[args.command](args, cfg, out, report)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MalformedSnapshot as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_failure(out, report, EXIT_IO, str(exc))
        return EXIT_IO
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        _write_failure(out, report, EXIT_SOLVER, f"solver failure: {exc}")
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    elapsed = time.perf_counter() - t0

    d = report.to_dict()
    zt = cfg.constants.zero_tol
    files, slope = emit_plots(d, out, field=field, zero_tol=zt)
    if not files:
        print("notice: nothing to plot", file=sys.stderr)
    report.outputs.extend(Path(f).name for f in files)
    if slope is not None:
        report.results["cascade_fitted_slope"] = slope
    code = EXIT_PASS if report.passed else EXIT_FAIL
    report.exit_code = code
    try:
        report.write(out / "report.json")
        (out / "timings.json").write_text(dumps({"command": args.command, "seconds": elapsed}))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    status = "PASS" if code == 0 else "FAIL"
    names = ", ".join(
        f"{n}={'pass' if c['passed'] else 'fail'}" for n, c in sorted(report.certificates.items())
    )
    print(f"{status} {args.command}: {names} -> {out / 'report.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
