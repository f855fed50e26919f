"""Command line: ``pegsocket analyze|optimize|simulate|sweep|export``.

Exit status is 0 on success, 1 when the design fails the analysis (jams,
unrepairable insertion, unreachable goal) and 2 for unusable input.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys

from .design import DesignError, ErrorModel, canonicalize
from .io import DesignFileError, dumps, load_design, load_errors, serialize_design, write_atomic

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _design(args):
    d, file_errors = load_design(args.design)
    try:
        d = canonicalize(d)
    except DesignError as exc:
        raise InputError(f"{args.design}: {exc}") from None
    if getattr(args, "errors", None):
        errors = load_errors(args.errors)
    else:
        errors = file_errors or ErrorModel()
    return d, errors


def _params(args):
    from .optimize import OptimizerParams

    kw = {"seed": args.seed}
    if args.eps is not None:
        kw["eps"] = args.eps
    if args.edge_step_deg is not None:
        kw["edge_step"] = math.radians(args.edge_step_deg)
    if args.point_step is not None:
        kw["point_step"] = args.point_step
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    try:
        return OptimizerParams(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _emit(args, text: str) -> None:
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _graph_doc(g, rep) -> dict:
    return {
        "nodes": [m.label for m in g.sorted_nodes()],
        "edges": [[a.label, b.label] for a, b in g.sorted_edges()],
        "initial": sorted(m.label for m in g.initial_nodes),
        "goals": sorted(m.label for m in g.goal_nodes),
        "sinks": [sorted(m.label for m in s) for s in rep.sinks],
        "undesired_sinks": [sorted(m.label for m in s) for s in rep.undesired],
        "connected": rep.connected,
        "rim_entries": rep.rim_entries,
    }


def cmd_analyze(args) -> int:
    from .graph import build_graph, sink_report
    from .stability import StabilityError, stability_summary

    d, errors = _design(args)
    g = build_graph(d, errors, samples=args.samples)
    rep = sink_report(g)
    doc = {"insertion_success": rep.success, "graph": _graph_doc(g, rep), "stability": None}
    if rep.success:
        try:
            doc["stability"] = stability_summary(d, g, errors).as_dict()
        except StabilityError as exc:
            doc["stability_error"] = str(exc)
    _emit(args, dumps(doc))
    return EXIT_OK if rep.success else EXIT_FAIL


def cmd_optimize(args) -> int:
    from .optimize import OptimizationFailure, optimize

    d, errors = _design(args)
    params = _params(args)
    try:
        params.check(d)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        best, trace = optimize(d, errors, params)
    except OptimizationFailure as exc:
        sys.stderr.write(f"optimization failed: {exc}\n")
        if args.trace:
            write_atomic(args.trace, dumps([r.as_dict() for r in exc.trace.records]))
        return EXIT_FAIL
    _emit(args, serialize_design(best, errors))
    if args.trace:
        write_atomic(args.trace, dumps([r.as_dict() for r in trace.records]))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .kinematics import seat_config
    from .simulate import Verdict, sample_entry_poses, simulate_disturbance, simulate_insertion

    d, errors = _design(args)
    if args.force_angle_deg is not None:
        phi = math.radians(args.force_angle_deg)
        verdict = simulate_disturbance(d, seat_config(d), phi)
        _emit(args, dumps({"force_angle": phi, "disturbance": verdict.value}))
        return EXIT_OK
    poses = sample_entry_poses(d, errors, count=args.count, seed=args.seed if args.random else None)
    runs = []
    for q in poses:
        out = simulate_insertion(d, q, friction=args.friction)
        runs.append({"start": [q.x, q.y, q.theta], "verdict": out.verdict.value,
                     "final_mode": out.mode.label, "modes": [m.label for m in out.mode_sequence]})
    seated = sum(r["verdict"] == Verdict.SEATED.value for r in runs)
    _emit(args, dumps({"seated": seated, "total": len(runs), "runs": runs}))
    return EXIT_OK if seated == len(runs) else EXIT_FAIL


def _parse_cells(text):
    if not text:
        return None
    cells = []
    for tok in text.split(","):
        try:
            n, m = (int(x) for x in tok.strip().split("-"))
        except ValueError:
            raise InputError(f"bad cell {tok!r}; expected n-m such as 5-5") from None
        cells.append((n, m))
    return cells


def cmd_sweep(args) -> int:
    from .corpus import seed_family
    from .optimize import format_table, sweep_mn

    errors = load_errors(args.errors) if args.errors else ErrorModel(0.05, 0.05, 0.01)
    params = _params(args)
    try:
        results = sweep_mn(seed_family(args.seed), errors, params, cells=_parse_cells(args.cells))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.format == "json":
        rows = [row for key in sorted(results) for row in results[key].rows()]
        _emit(args, dumps(rows))
    else:
        _emit(args, format_table(results))
    return EXIT_OK if all(r.design is not None for r in results.values()) else EXIT_FAIL


def cmd_export(args) -> int:
    from .export import export_dot, export_svg, meshes_to_obj, project_3d
    from .graph import build_graph

    d, errors = _design(args)
    fmt = args.format
    if fmt == "svg":
        before = None
        if args.before:
            before = canonicalize(load_design(args.before)[0])
        text = export_svg(d, before)
    elif fmt == "dot":
        text = export_dot(build_graph(d, errors, samples=args.samples))
    else:
        text = meshes_to_obj(*project_3d(d, args.separation))
    _emit(args, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pegsocket", description="Planar peg and socket joint design tools.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, design=True):
        if design:
            sp.add_argument("--design", required=True, help="design JSON file")
        sp.add_argument("--errors", help="error model JSON file (dx, dtheta, scale)")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)

    def opt_flags(sp):
        sp.add_argument("--eps", type=float, help="endpoint margin for sliding points")
        sp.add_argument("--edge-step-deg", type=float, help="edge rotation step in degrees")
        sp.add_argument("--point-step", type=float, help="point slide step (length)")
        sp.add_argument("--max-iters", type=int)

    a = sub.add_parser("analyze", help="insertion graph, sinks and stability")
    common(a)
    a.add_argument("--samples", type=int, default=5, help="entry poses per error axis")
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("optimize", help="repair insertion, then improve stability")
    common(o)
    opt_flags(o)
    o.add_argument("--trace", help="write the optimization trace as JSON")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("simulate", help="batch insertion or a disturbance test")
    common(s)
    s.add_argument("--count", type=int, default=25)
    s.add_argument("--random", action="store_true", help="draw entry poses at random from --seed")
    s.add_argument("--friction", type=float, default=0.0)
    s.add_argument("--force-angle-deg", type=float,
                   help="instead of inserting, push the seated peg at this angle")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="optimize every point/edge count cell")
    common(w, design=False)
    opt_flags(w)
    w.add_argument("--cells", help="comma separated n-m cells, e.g. 4-5,5-5")
    w.add_argument("--format", choices=("table", "json"), default="table")
    w.set_defaults(func=cmd_sweep)

    x = sub.add_parser("export", help="SVG drawing, DOT graph or OBJ meshes")
    common(x)
    x.add_argument("--format", choices=("svg", "dot", "obj"), required=True)
    x.add_argument("--before", help="initial design drawn under --design (svg)")
    x.add_argument("--separation", type=int, choices=(0, 90, 120), default=0)
    x.add_argument("--samples", type=int, default=5)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for name in ("friction", "count", "samples"):
        v = getattr(args, name, None)
        if v is not None and (v < 0 or (name != "friction" and v < 1)):
            sys.stderr.write(f"error: --{name} out of range\n")
            return EXIT_INPUT
    try:
        return args.func(args)
    except (DesignFileError, InputError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (DesignError, ValueError) as exc:
        sys.stderr.write(f"design infeasible: {exc}\n")
        return EXIT_FAIL
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
