"""Command line front end.

    singprop analyze X Y --scenario FILE
    singprop scan        --scenario FILE --out DIR
    singprop trace       --scenario FILE --out DIR
    singprop certify     --scenario FILE --out DIR

Exit codes: 0 success, 1 pipeline failure (or a certificate that did not
pass), 2 bad input, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .core import DomainError, active_set
from .oracle import grid_singularity_scan
from .pipeline import certify_arc, discover_arcs
from .report import SCHEMA, csv_text, dumps, write_files
from .scenario import Scenario, ScenarioError, load_scenario
from .subdiff import diam, propagation_criterion, reachable_gradients, subdiff_f, superdifferential
from .tracer import CSV_HEADER, arc_rows

EXIT_OK, EXIT_PIPELINE, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("singprop")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="singprop", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--scenario", required=True, help="scenario file")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--step", type=float)
        sp.add_argument("--max-len", type=float, dest="max_len")
        sp.add_argument("--tol-active", type=float, dest="tol_active")
        sp.add_argument("--delta-min", type=float, dest="delta_min")
        sp.add_argument("--turn-tol", type=float, dest="turn_tol")
        sp.add_argument("--grid-h", type=float, dest="grid_h")
        sp.add_argument("-v", "--verbose", action="store_true")

    a = sub.add_parser("analyze", help="gradient sets and criterion at a point")
    a.add_argument("x", type=float)
    a.add_argument("y", type=float)
    common(a, out_required=False)
    for name, help_ in [
        ("scan", "oracle grid scan of the singular set"),
        ("trace", "trace singular arcs"),
        ("certify", "trace arcs and certify DC graph form and finite turn"),
    ]:
        common(sub.add_parser(name, help=help_))
    return p


def _apply_overrides(scenario: Scenario, args) -> None:
    for key in ("step", "max_len", "tol_active", "delta_min", "turn_tol", "grid_h"):
        v = getattr(args, key, None)
        if v is not None:
            if not v > 0:
                raise ScenarioError(f"--{key.replace('_', '-')} must be positive")
            scenario.options[key] = v


def _analyze(scenario, args) -> tuple[int, dict]:
    fn = scenario.function()
    tol = scenario.option("tol_active")
    x = (args.x, args.y)
    gs = reachable_gradients(fn, x, tol)
    dplus = superdifferential(gs)
    result = {
        "schema": SCHEMA,
        "scenario": scenario.name,
        "point": list(x),
        "active_set": active_set(fn, x, tol),
        "reachable_gradients": gs.points,
        "superdifferential": dplus.vertices,
        "subdifferential_f": subdiff_f(fn, x, tol).vertices,
        "diam": diam(dplus),
        "criterion": propagation_criterion(gs),
        "K": fn.K,
        "L": fn.L,
    }
    return EXIT_OK, result


def _arcs(scenario):
    fn = scenario.function()
    arcs, notes = discover_arcs(
        fn,
        scenario.seeds,
        h=scenario.option("grid_h"),
        step=scenario.option("step"),
        max_len=scenario.option("max_len"),
        tol_active=scenario.option("tol_active"),
    )
    return fn, arcs, notes


def _arc_csv(arc) -> str:
    return csv_text(CSV_HEADER, arc_rows(arc))


def _run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        _apply_overrides(scenario, args)
    except ScenarioError as exc:
        print(f"singprop: {exc}", file=sys.stderr)
        return EXIT_INPUT

    name = scenario.name
    files: dict[str, str] = {}
    code = EXIT_OK

    if args.command == "analyze":
        try:
            code, result = _analyze(scenario, args)
        except DomainError as exc:
            print(f"singprop: {exc}", file=sys.stderr)
            return EXIT_INPUT
        text = dumps(result)
        sys.stdout.write(text)
        if args.out:
            files[f"{name}_analyze.json"] = text

    elif args.command == "scan":
        fn = scenario.function()
        try:
            res = grid_singularity_scan(fn, scenario.option("grid_h"))
        except ValueError as exc:
            print(f"singprop: {exc}", file=sys.stderr)
            return EXIT_INPUT
        files[f"{name}_scan.csv"] = csv_text(("x1", "x2"), res.flagged)
        print(f"{len(res)} flagged cells (h={res.h:g})")

    elif args.command == "trace":
        fn, arcs, notes = _arcs(scenario)
        summary = {"schema": SCHEMA, "scenario": name, "command": "trace", "arcs": [], "diagnostics": notes}
        for k, arc in enumerate(arcs):
            arc_id = f"arc{k:03d}"
            files[f"{name}_{arc_id}.csv"] = _arc_csv(arc)
            summary["arcs"].append(
                {"id": arc_id, "pair": list(arc.pair), "seed": arc.seed, "q": arc.q,
                 "stop_reason": arc.stop_reason, "n_samples": len(arc.samples), "length": arc.length}
            )
        if not arcs:
            summary["diagnostics"] = notes + ["no singular seeds"]
            code = EXIT_PIPELINE
        files[f"{name}_summary.json"] = dumps(summary)
        print(f"{len(arcs)} arcs traced")

    elif args.command == "certify":
        fn, arcs, notes = _arcs(scenario)
        summary = {"schema": SCHEMA, "scenario": name, "command": "certify", "arcs": [], "diagnostics": notes}
        for k, arc in enumerate(arcs):
            arc_id = f"arc{k:03d}"
            cert = certify_arc(
                fn,
                arc,
                delta_min=scenario.option("delta_min"),
                turn_tol=scenario.option("turn_tol"),
                tol_active=scenario.option("tol_active"),
            )
            report = {"schema": SCHEMA, "scenario": name, "arc_id": arc_id, **cert.report,
                      "checks": cert.checks, "error": cert.error, "passed": cert.passed}
            files[f"{name}_{arc_id}.csv"] = _arc_csv(arc)
            files[f"{name}_{arc_id}.json"] = dumps(report)
            summary["arcs"].append({"id": arc_id, "passed": cert.passed, "error": cert.error,
                                    "turn": cert.report.get("turn"), "stop_reason": arc.stop_reason})
            if not cert.passed:
                code = EXIT_PIPELINE
        if not arcs:
            summary["diagnostics"] = notes + ["no singular seeds"]
            code = EXIT_PIPELINE
        summary["passed"] = code == EXIT_OK
        files[f"{name}_summary.json"] = dumps(summary)
        print(dumps({k: summary[k] for k in ("arcs", "passed", "diagnostics")}), end="")

    if files:
        try:
            write_files(args.out, files)
        except OSError as exc:
            print(f"singprop: cannot write output: {exc}", file=sys.stderr)
            return EXIT_IO
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except Exception as exc:  # pipeline failure: report, do not write partial output
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), end="")
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
