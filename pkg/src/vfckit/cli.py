"""The ``vfc`` command line.

Exit status 0 when every requested check passes, 1 when a check fails (the
report carries a witness), 2 when an input cannot be parsed.  Inputs are JSON
files or ``fixture:NAME`` for the built-in examples.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction

import numpy as np

from . import fixtures
from .config import default_resolution
from .reports import Report, jsonable, report_schema_version
from .smoothmap import ParseError

EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# input loading


def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as err:
        raise InputError("cannot read %s: %s" % (path, err.strerror))
    except json.JSONDecodeError as err:
        raise InputError("%s is not valid JSON: %s" % (path, err))


def _fixture(spec, table, what):
    name = spec.split(":", 1)[1]
    if name not in table:
        raise InputError("unknown %s fixture %r (choose from %s)" % (what, name, ", ".join(sorted(table))))
    return table[name]()


def load_structure(spec):
    from .io import structure_from_json
    if spec.startswith("fixture:"):
        return _fixture(spec, fixtures.STRUCTURES, "structure")
    return structure_from_json(_read_json(spec))


def load_structure_or_gcs(spec, res):
    """A good coordinate system, built from a structure when needed."""
    from .goodcoords import GoodCoordinateSystem, build_gcs
    if not spec.startswith("fixture:"):
        d = _read_json(spec)
        if "structure" in d and "charts" in d and "changes" in d:
            return GoodCoordinateSystem.from_json(d)
    return build_gcs(load_structure(spec), res)


def load_diagram(spec):
    from .io import structure_from_json
    from .quotient import GluingDiagram, diagram_from_structure
    if spec.startswith("fixture:"):
        name = spec.split(":", 1)[1]
        if name in fixtures.DIAGRAMS:
            return fixtures.DIAGRAMS[name]()
        if name in fixtures.STRUCTURES:
            return diagram_from_structure(fixtures.STRUCTURES[name]())
        raise InputError("unknown diagram fixture %r" % name)
    d = _read_json(spec)
    if "pieces" in d:
        return GluingDiagram.from_json(d)
    return diagram_from_structure(structure_from_json(d))


def load_circle(spec):
    from .s1 import S1Structure
    if spec.startswith("fixture:"):
        return _fixture(spec, fixtures.CIRCLE_STRUCTURES, "circle structure")
    return S1Structure.from_json(_read_json(spec))


def load_problem(spec):
    from .gluing import PROBLEMS, ModelProblem
    if spec.startswith("fixture:"):
        return _fixture(spec, PROBLEMS, "model problem")
    return ModelProblem.from_json(_read_json(spec))


def _floats(text, what):
    try:
        return [float(Fraction(t)) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError):
        raise InputError("cannot read %s from %r" % (what, text))


def _piece_point(text):
    if ":" not in text:
        raise InputError("points are written PIECE:x0,x1,...")
    piece, coords = text.split(":", 1)
    return piece, tuple(_floats(coords, "coordinates"))


def _positive(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError("%s must be a number" % name)
        if not v > 0:
            raise argparse.ArgumentTypeError("%s must be positive" % name)
        return v
    return conv


# ---------------------------------------------------------------------------
# output


def _emit(args, report, extra=None):
    text = report.dumps() if isinstance(report, Report) else json.dumps(jsonable(report), indent=2,
                                                                          sort_keys=True)
    if getattr(args, "report", None):
        with open(args.report, "w") as f:
            f.write(text + "\n")
    if not getattr(args, "quiet", False):
        sys.stdout.write(text + "\n")
    ok = report.passed if isinstance(report, Report) else True
    return EXIT_OK if ok else EXIT_FAIL


def _write_json(path, obj):
    from .io import save
    if path:
        save(path, obj)


def _fail(subject, name, err):
    rep = Report(subject)
    rep.add(name, False, witness=getattr(err, "witness", None) or getattr(err, "history", None),
            detail=str(err))
    return rep


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args):
    from .kuranishi import validate_structure
    st = load_structure(args.input)
    rep = validate_structure(st, args.grid)
    rep.meta["virtual dimension"] = st.virtual_dimension
    return _emit(args, rep)


def cmd_gcs_build(args):
    from .goodcoords import GCSBuildError, build_gcs, check_gcs
    st = load_structure(args.input)
    try:
        gcs = build_gcs(st, args.grid, check=False)
    except GCSBuildError as err:
        return _emit(args, _fail("good coordinate system", "construction", err))
    rep = check_gcs(gcs, args.grid)
    _write_json(args.output, gcs.to_json())
    return _emit(args, rep)


def cmd_gcs_check(args):
    from .goodcoords import check_gcs
    gcs = load_structure_or_gcs(args.input, args.grid)
    return _emit(args, check_gcs(gcs, args.grid))


def cmd_gcs_shrink(args):
    from .goodcoords import CoveringLostError, check_gcs, shrink
    gcs = load_structure_or_gcs(args.input, args.grid)
    try:
        sched = float(Fraction(args.schedule))
    except (ValueError, ZeroDivisionError):
        raw = _read_json(args.schedule)
        if not isinstance(raw, dict):
            raise InputError("a margin schedule is a number or a JSON object keyed by chart index")
        sched = {int(k): v for k, v in raw.items()}
    rep = Report("shrink")
    try:
        out = shrink(gcs, sched, args.grid, report=rep)
    except CoveringLostError as err:
        return _emit(args, _fail("shrink", "covering", err))
    rep.extend(check_gcs(out, args.grid), prefix="after shrink: ")
    _write_json(args.output, out.to_json())
    return _emit(args, rep)


def _plan(args):
    from .multisection import PerturbationPlan
    return PerturbationPlan(eps=args.eps, seed=args.seed, sigma_min=args.sigma_min, resolution=args.grid)


def cmd_perturb(args):
    from .multisection import TransversalityError, perturb, property_report
    gcs = load_structure_or_gcs(args.input, args.grid)
    try:
        system = perturb(gcs, _plan(args))
    except TransversalityError as err:
        return _emit(args, _fail("multisection properties", "transversality", err))
    _write_json(args.output, system.to_json())
    return _emit(args, property_report(system, args.grid))


def _user_map(args, gcs):
    from .io import map_from_json
    from .kuranishi import StronglyContinuousMap
    if not args.map:
        return None
    f = map_from_json(_read_json(args.map), gcs.structure)
    rep = f.validate(gcs.structure, args.grid)
    if not rep.passed:
        raise InputError("the map is not compatible with the coordinate changes")
    return StronglyContinuousMap({str(p): f[gcs.origin[p]] for p in gcs.indices})


def cmd_count(args):
    from .kuranishi import StronglyContinuousMap
    from .multisection import (CompactnessError, MultisectionSystem, TransversalityError, check_cycle,
                               count, property_report, virtual_chain, zero_complex)
    gcs = load_structure_or_gcs(args.input, args.grid)
    f = _user_map(args, gcs)
    try:
        if args.system:
            system = MultisectionSystem.from_json(_read_json(args.system), gcs)
            zc = zero_complex(system, args.delta, args.grid, certify=False)
            vc = virtual_chain(zc, f or StronglyContinuousMap.to_point(gcs.as_structure()), system)
        else:
            if args.eps is None or args.seed is None:
                raise InputError("count needs --eps and --seed unless a multisection system is given")
            vc, system, zc = count(gcs, _plan(args), args.delta, f, args.grid)
    except (TransversalityError, CompactnessError) as err:
        return _emit(args, _fail("count", "zero set", err))
    rep = Report("count")
    rep.extend(property_report(system, args.grid))
    rep.meta["delta"] = zc.delta
    rep.meta["total weight"] = vc.total_weight
    rep.meta["dimension"] = vc.dimension
    rep.meta["points"] = len(vc.entries)
    rep.meta["segments"] = len(vc.segments)
    if zc.closure is not None:
        rep.extend(zc.closure, prefix="closure: ")
    if vc.dimension == 1:
        rep.extend(check_cycle(vc), prefix="cycle: ")
    if args.chain:
        with open(args.chain, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["chart", "branch", "point", "sign", "weight", "image"])
            for e in vc.entries:
                w.writerow([e.chart, e.branch, " ".join("%.12g" % v for v in e.point), e.sign,
                            str(e.weight), " ".join("%.12g" % v for v in e.image)])
            w.writerow(["total", "", "", "", str(vc.total_weight), ""])
    return _emit(args, rep)


def cmd_quotient_check(args):
    from .quotient import hausdorff_report
    diagram = load_diagram(args.input)
    return _emit(args, hausdorff_report(diagram, args.grid, force=args.force))


def cmd_quotient_metric(args):
    from .quotient import QuotientComplex
    diagram = load_diagram(args.input)
    a, b = _piece_point(args.a), _piece_point(args.b)
    for piece, _ in (a, b):
        if piece not in diagram.pieces:
            raise InputError("unknown piece %r" % piece)
    qc = QuotientComplex(diagram, args.grid)
    rep = Report("chain metric")
    try:
        d = qc.metric(a, b)
    except ValueError as err:
        raise InputError(str(err))
    rep.meta["distance"] = d
    rep.meta["equivalent"] = bool(qc.equivalent(a, b))
    rep.add("finite", np.isfinite(d), d)
    return _emit(args, rep)


def cmd_quotient_basis(args):
    from .quotient import neighborhood_basis
    diagram = load_diagram(args.input)
    x = _piece_point(args.point)
    try:
        entries, rep = neighborhood_basis(x, diagram, args.scale, args.grid)
    except ValueError as err:
        return _emit(args, _fail("neighborhood basis", "construction", err))
    rep.meta["entries"] = [{"piece": e["piece"], "point": e["point"], "radius": e["radius"],
                            "omega": e["omega"].to_json()} for e in entries]
    return _emit(args, rep)


def cmd_s1_quotient(args):
    from .s1 import LocallyFreeError, SliceError, check_locally_free, quotient_structure
    from .io import structure_to_json
    s1 = load_circle(args.input)
    rep = Report("circle quotient")
    for c in s1.charts():
        rep.extend(check_locally_free(c, args.grid), prefix="%s: " % c.chart.name)
    if not rep.passed:
        return _emit(args, rep)
    try:
        q = quotient_structure(s1, args.grid)
    except (LocallyFreeError, SliceError) as err:
        return _emit(args, _fail("circle quotient", "slices", err))
    rep.extend(q.report)
    rep.meta["virtual dimension"] = q.structure.virtual_dimension
    rep.meta["slices"] = {n: {"origin": sl.origin, "normal": sl.normal, "stabilizer": len(sl.stabilizer)}
                          for n, sl in sorted(q.slices.items())}
    _write_json(args.output, structure_to_json(q.structure))
    return _emit(args, rep)


def cmd_s1_perturb(args):
    from .multisection import TransversalityError
    from .s1 import LocallyFreeError, SliceError, equivariant_perturb
    s1 = load_circle(args.input)
    try:
        ep = equivariant_perturb(s1, _plan(args), args.grid)
    except (LocallyFreeError, SliceError, TransversalityError) as err:
        return _emit(args, _fail("equivariant perturbation", "construction", err))
    rep = ep.report
    rep.meta["orbit classes"] = ep.orbit_classes
    return _emit(args, rep)


def _rho(args, problem):
    v = _floats(args.rho, "boundary data")
    d = problem.dim
    if len(v) != 2 * d:
        raise InputError("boundary data needs %d numbers (one anchor per side)" % (2 * d))
    return np.array(v[:d]), np.array(v[d:])


def cmd_glue_run(args):
    from .gluing import CollocationError, GluingDivergence, SingularSystemError, glue
    problem = load_problem(args.input)
    rho = _rho(args, problem)
    try:
        st = glue(problem, rho, args.T, tol=args.tol, max_steps=args.max_steps, n_points=args.points)
    except (GluingDivergence, CollocationError, SingularSystemError) as err:
        return _emit(args, _fail("gluing", "convergence", err))
    rep = Report("gluing")
    rep.add("tolerance reached", st.history[-1] <= args.tol, st.history[-1])
    mu = st.mu
    if mu == mu:
        rep.add("contraction", mu < 1, mu)
    rep.meta.update({"T": args.T, "iterations": st.kappa, "history": st.history,
                     "obstruction coefficients": st.kuranishi_value(),
                     "preglue residual": st.history[0]})
    return _emit(args, rep)


def cmd_glue_decay(args):
    from .gluing import t_decay_experiment
    problem = load_problem(args.input)
    rho = _rho(args, problem)
    Ts = _floats(args.T_values, "T values")
    r = t_decay_experiment(problem, rho, Ts, n_points=args.points)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(r.csv())
    rep = Report("decay in T")
    delta = problem.delta
    rep.add("preglue residual decays", r.residual_fit["slope"] <= -delta and r.residual_fit["r2"] >= 0.98,
            r.residual_fit["slope"])
    rep.add("T-derivative decays", r.dT_fit["slope"] <= -delta and r.dT_fit["r2"] >= 0.98, r.dT_fit["slope"])
    mus = [row["mu_fit"] for row in r.rows if row["mu_fit"] == row["mu_fit"]]
    rep.add("contraction", bool(mus) and max(mus) <= 0.5, max(mus) if mus else None)
    rep.meta.update({"residual fit": r.residual_fit, "dT fit": r.dT_fit, "drho fit": r.drho_fit,
                     "flagged": r.flagged, "rows": r.rows})
    return _emit(args, rep)


def cmd_glue_oracle(args):
    from .gluing import bvp_oracle, glue, grid_bijection, sup_distance
    problem = load_problem(args.input)
    rho = _rho(args, problem)
    st = glue(problem, rho, args.T, n_points=args.points)
    orc = bvp_oracle(problem, args.T, rho, args.points)
    rep = Report("gluing against direct solve")
    d = sup_distance(st.core_values(), orc.core_values())
    rep.add("core agreement", d <= 1e-6, d)
    rep.add("interior decay", orc.interior_slope <= -0.9 * problem.decay_rate, orc.interior_slope)
    if args.bijection:
        b = grid_bijection(problem, args.T, n_points=args.points)
        rep.add("injective on grid", b.injective, b.min_ratio)
        rep.add("surjective on grid", b.surjective, b.worst_match)
    return _emit(args, rep)


def cmd_fixture_export(args):
    from .gluing import PROBLEMS
    from .io import structure_to_json
    name = args.name
    if name in fixtures.STRUCTURES:
        obj = structure_to_json(fixtures.STRUCTURES[name]())
    elif name in fixtures.CIRCLE_STRUCTURES:
        obj = fixtures.CIRCLE_STRUCTURES[name]().to_json()
    elif name in fixtures.DIAGRAMS:
        obj = fixtures.DIAGRAMS[name]().to_json()
    elif name in PROBLEMS:
        obj = PROBLEMS[name]().to_json()
    else:
        raise InputError("unknown fixture %r" % name)
    if args.output:
        _write_json(args.output, obj)
    else:
        from .io import dumps
        sys.stdout.write(dumps(obj) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p, report=True):
    p.add_argument("--grid", type=int, default=None,
                   help="sampling resolution per axis (default: VFC_GRID or %d)" % default_resolution(None))
    if report:
        p.add_argument("--report", help="also write the JSON report to this file")
        p.add_argument("--quiet", action="store_true", help="do not print the report")


def _perturb_args(p, required=True):
    p.add_argument("--eps", type=_positive("eps"), required=required, help="C0 size of the perturbation")
    p.add_argument("--seed", type=int, required=required,
                   help="random seed" + (" (required)" if required else ""))
    p.add_argument("--sigma-min", dest="sigma_min", type=_positive("sigma-min"), default=1e-6,
                   help="transversality floor for the smallest singular value")


def _glue_args(p, with_T=True):
    p.add_argument("input", help="model problem JSON or fixture:NAME (logistic, linear, rest-manifold)")
    p.add_argument("--rho", default="0.3,0.3", help="anchor values, first side then second side")
    p.add_argument("--points", type=int, default=1000, help="nodes on the glued interval")
    if with_T:
        p.add_argument("--T", type=_positive("T"), default=8.0, help="neck parameter; the neck has length 10T")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="vfc",
        description="Finite-dimensional reductions of moduli problems: charts with finite group "
                    "actions, good coordinate systems, multisection perturbations and weighted zero "
                    "counts, quotient topology, circle actions and a gluing laboratory.")
    ap.add_argument("--version", action="version", version="report schema " + report_schema_version())
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("validate", help="check charts, coordinate changes and the cocycle condition",
                       description="Validate a Kuranishi structure: equivariance of each section, "
                                   "embedding and normal-bundle conditions for every coordinate change, "
                                   "and the cocycle condition on triple overlaps.")
    p.add_argument("input", help="structure JSON or fixture:NAME")
    _common(p)
    p.set_defaults(func=cmd_validate)

    g = sub.add_parser("gcs", help="good coordinate systems").add_subparsers(dest="action", metavar="ACTION")
    g.required = True
    p = g.add_parser("build", help="build a good coordinate system from a structure",
                     description="Order charts by dimension, build pure neighborhoods and their changes, "
                                 "and check the total order and the compatibility conditions.")
    p.add_argument("input", help="structure JSON or fixture:NAME")
    p.add_argument("-o", "--output", help="write the coordinate system JSON here")
    _common(p)
    p.set_defaults(func=cmd_gcs_build)
    p = g.add_parser("check", help="check a good coordinate system",
                     description="Check chart conditions, the partial order, cocycles, the Joyce "
                                 "conditions, Hausdorffness of the glued space and properness.")
    p.add_argument("input", help="coordinate system or structure JSON, or fixture:NAME")
    _common(p)
    p.set_defaults(func=cmd_gcs_check)
    p = g.add_parser("shrink", help="shrink chart domains by a margin schedule",
                     description="Tighten every chart domain by the scheduled margins and recompute the "
                                 "change domains; fails when the zero set is no longer covered.")
    p.add_argument("input", help="coordinate system or structure JSON, or fixture:NAME")
    p.add_argument("--margin", "--schedule", dest="schedule", required=True,
                   help="a margin, or a JSON file keyed by chart index")
    p.add_argument("-o", "--output")
    _common(p)
    p.set_defaults(func=cmd_gcs_shrink)

    p = sub.add_parser("perturb", help="perturb the sections by compatible transverse multisections",
                       description="Build multisection perturbations chart by chart in increasing order, "
                                   "extending along the changes, and report compatibility, transversality, "
                                   "normal derivative and C0 distance.")
    p.add_argument("input", help="structure or coordinate system JSON, or fixture:NAME")
    _perturb_args(p)
    p.add_argument("-o", "--output", help="write the multisection system JSON here")
    _common(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("count", help="weighted zero count or zero-chain of the perturbed section",
                       description="Perturb, restrict to a neighborhood of the zero set, and push the "
                                   "weighted zeros forward.  In virtual dimension 0 the total weight is "
                                   "a rational number.")
    p.add_argument("input", help="structure or coordinate system JSON, or fixture:NAME")
    p.add_argument("system", nargs="?", help="multisection system JSON written by perturb")
    _perturb_args(p, required=False)
    p.add_argument("--delta", type=_positive("delta"), default=None,
                   help="restriction radius (default: chosen from the located zeros)")
    p.add_argument("--map", help="strongly continuous map JSON (default: map to a point)")
    p.add_argument("-o", "--chain", help="write the weighted chain as CSV here")
    _common(p)
    p.set_defaults(func=cmd_count)

    g = sub.add_parser("quotient", help="glued spaces and their metric").add_subparsers(dest="action",
                                                                                       metavar="ACTION")
    g.required = True
    p = g.add_parser("check", help="certify the glued space is Hausdorff",
                     description="Sample every piece and certify that inequivalent points are at "
                                 "chain distance above the separation threshold.")
    p.add_argument("input", help="gluing diagram or structure JSON, or fixture:NAME")
    p.add_argument("--force", action="store_true", help="continue when the gluing assumptions fail")
    _common(p)
    p.set_defaults(func=cmd_quotient_check)
    p = g.add_parser("metric", help="chain distance between two points",
                     description="Infimum over chains of the summed piece distances.")
    p.add_argument("input", help="gluing diagram or structure JSON, or fixture:NAME")
    p.add_argument("--a", required=True, help="PIECE:x0,x1,...")
    p.add_argument("--b", required=True, help="PIECE:x0,x1,...")
    _common(p)
    p.set_defaults(func=cmd_quotient_metric)
    p = g.add_parser("basis", help="nested open neighborhoods of a point",
                     description="Open sets in increasing pieces around the representatives of a point.")
    p.add_argument("input", help="gluing diagram or structure JSON, or fixture:NAME")
    p.add_argument("--point", required=True, help="PIECE:x0,x1,...")
    p.add_argument("--scale", type=_positive("scale"), default=0.05)
    _common(p)
    p.set_defaults(func=cmd_quotient_basis)

    g = sub.add_parser("s1", help="circle actions").add_subparsers(dest="action", metavar="ACTION")
    g.required = True
    p = g.add_parser("quotient", help="slice charts for a locally free circle action",
                     description="Check that the action is locally free and compatible, cut each chart "
                                 "by a slice and return the quotient structure of one lower dimension.")
    p.add_argument("input", help="circle structure JSON or fixture:NAME")
    p.add_argument("-o", "--output", help="write the quotient structure JSON here")
    _common(p)
    p.set_defaults(func=cmd_s1_quotient)
    p = g.add_parser("perturb", help="circle-invariant perturbation via the quotient",
                     description="Perturb on the quotient and pull back along orbits; the zero set "
                                 "upstairs is a union of orbits.")
    p.add_argument("input", help="circle structure JSON or fixture:NAME")
    _perturb_args(p)
    _common(p)
    p.set_defaults(func=cmd_s1_perturb)

    g = sub.add_parser("glue", help="gluing laboratory").add_subparsers(dest="action", metavar="ACTION")
    g.required = True
    p = g.add_parser("run", help="alternating-method gluing at one neck length",
                     description="Preglue two half-line solutions and correct by alternating linear "
                                 "solves on each half line until the weighted error is below tolerance.")
    _glue_args(p)
    p.add_argument("--tol", type=_positive("tol"), default=1e-10)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=25)
    _common(p)
    p.set_defaults(func=cmd_glue_run)
    p = g.add_parser("decay", help="exponential decay of the preglue error and of d/dT",
                     description="Sweep the neck parameter and fit log-linear slopes of the preglue "
                                 "error and of the T-derivative of the glued family on the cores.")
    _glue_args(p, with_T=False)
    p.add_argument("--T-values", dest="T_values", default="4,5,6,7,8,9,10,11,12",
                   help="comma-separated neck parameters")
    p.add_argument("--csv", help="write the sweep as CSV here")
    _common(p)
    p.set_defaults(func=cmd_glue_decay)
    p = g.add_parser("oracle", help="compare with a direct Newton solve of the glued problem",
                     description="Solve the glued boundary value problem directly and compare on the "
                                 "cores; optionally check the glued family against a grid of data.")
    _glue_args(p)
    p.add_argument("--bijection", action="store_true", help="also run the 5x5 grid check")
    _common(p)
    p.set_defaults(func=cmd_glue_oracle)

    g = sub.add_parser("fixture", help="built-in examples").add_subparsers(dest="action", metavar="ACTION")
    g.required = True
    p = g.add_parser("export", help="write a built-in example as JSON")
    p.add_argument("name", help="built-in example name")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fixture_export)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    if getattr(args, "grid", None) is not None and args.grid < 1:
        sys.stderr.write("vfc: --grid must be positive\n")
        return EXIT_PARSE
    try:
        if getattr(args, "grid", None) is None and hasattr(args, "grid"):
            args.grid = default_resolution(None)
    except ValueError as err:
        sys.stderr.write("vfc: %s\n" % err)
        return EXIT_PARSE
    try:
        return args.func(args)
    except (InputError, ParseError, KeyError, json.JSONDecodeError) as err:
        sys.stderr.write("vfc: %s\n" % (err.args[0] if err.args else err))
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
