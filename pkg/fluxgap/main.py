"""Command-line entry point: invariants, solve, verify, sweep, partition, oracle."""

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from fluxgap.config import get_settings
from fluxgap.core.errors import FluxgapError
from fluxgap.core.executor import reset_executor
from fluxgap.models import BoundReport, PlanarDomain, Scenario
from fluxgap.services import geometry, oracle, partition, scenario as harness, svg
from fluxgap.utils.logging import get_logger, setup_logging

logger = get_logger(__name__)


def _table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Aligned plain-text table."""
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _fmt(v: object) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _out_path(args: argparse.Namespace, name: Optional[str]) -> Optional[Path]:
    if not name:
        return None
    return Path(args.out_dir) / name if args.out_dir else Path(name)


def _load_domain(path: str) -> PlanarDomain:
    """A domain file, or the domain of a scenario file."""
    data = harness.read_json(Path(path))
    if isinstance(data, dict) and "mesh" in data:
        return harness.load_scenario(path).domain
    return PlanarDomain.model_validate(data)


def _load_scenario(args: argparse.Namespace) -> Scenario:
    sc = harness.load_scenario(args.config)
    if args.seed is not None:
        sc = sc.model_copy(update={"solver": sc.solver.model_copy(update={"seed": args.seed})})
    return sc


# --- Commands ---


def cmd_invariants(args: argparse.Namespace) -> int:
    domain = _load_domain(args.config)
    report = geometry.geometry_report(domain)
    rows = [
        ("area", report.area),
        ("perimeter", report.perimeter),
        ("boundary_length", report.boundary_length),
        ("diameter", report.diameter),
        ("injectivity_radius", report.injectivity_radius),
    ]
    if report.widths is not None:
        w = report.widths
        rows += [
            ("beta", w.beta),
            ("B", w.B),
            ("B_literal", w.B_literal),
            ("beta_tilde", w.beta_tilde),
            ("beta_lo", w.beta_lo),
            ("B_hi", w.B_hi),
        ]
    print(_table(["invariant", "value"], rows))
    out = _out_path(args, "invariants.json" if args.out_dir else None)
    if out:
        harness.write_text(out, harness.to_json(report))
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    sc = _load_scenario(args)
    results, ext = harness.solve_levels(sc.domain, sc.potential, sc)
    rows = [
        (r.mesher, r.h, r.dof, r.lambda1, max(r.residuals), r.iterations, r.method, r.exact_zero)
        for r in results
    ]
    print(_table(["mesher", "h", "dof", "lambda1", "residual", "iterations", "method", "exact_zero"], rows))
    if ext is not None:
        print(f"\nlambda_inf = {ext.lambda_inf:.10g}  order = {_fmt(ext.order)}  flags = {','.join(ext.flags) or '-'}")
    out = _out_path(args, sc.outputs.json_path)
    if out:
        payload = {"results": [r.model_dump(mode="json") for r in results]}
        if ext is not None:
            payload["extrapolation"] = ext.model_dump(mode="json")
        harness.write_text(out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def format_report(report: BoundReport) -> str:
    rows = [(b.name, b.rhs, b.margin, b.status, b.stated_value) for b in report.bounds]
    head = f"lambda1 = {_fmt(report.lambda1)}  h = {_fmt(report.h)}  mesher = {_fmt(report.mesher)}"
    return head + "\n\n" + _table(["bound", "rhs", "margin", "status", "stated_value"], rows)


def cmd_verify(args: argparse.Namespace) -> int:
    sc = _load_scenario(args)
    report = harness.verify_scenario(sc)
    print(format_report(report))
    out = _out_path(args, sc.outputs.json_path)
    if out:
        harness.write_text(out, harness.to_json(report))
    return 0 if report.passed else 1


def cmd_sweep(args: argparse.Namespace) -> int:
    sc = _load_scenario(args)
    record = harness.run_sweep(sc, jobs=args.jobs)
    text = harness.format_csv(record)
    sys.stdout.write(text)
    out = _out_path(args, sc.outputs.csv)
    if out:
        harness.write_text(out, text)
    out = _out_path(args, sc.outputs.json_path)
    if out:
        harness.write_text(out, harness.to_json(record))
    return 0


def cmd_partition(args: argparse.Namespace) -> int:
    domain = _load_domain(args.config)
    holes = domain.realized_holes()
    if len(holes) == 1:
        pieces = partition.annuli_partition(domain)
        wedges = [w for p in pieces for w in partition.wedge_report(domain, p)]
        rows = [
            (p.index, p.widths.beta, p.widths.B, p.outer_perimeter, p.region.area) for p in pieces
        ]
        print(_table(["piece", "beta", "B", "outer_perimeter", "area"], rows))
        if wedges:
            print()
            print(_table(
                ["vertex", "kind", "cone_angle", "B_p", "ratio", "target"],
                [(f"({w.vertex[0]:.4g}, {w.vertex[1]:.4g})", w.kind, w.cone_angle, w.B_p, w.ratio, w.target) for w in wedges],
            ))
        figure = svg.render_partition(domain, pieces=pieces, wedges=wedges)
    else:
        found = partition.cells(domain)
        bbox = geometry.to_geometry(domain.outer).bounds
        scale = geometry.diameter(domain.outer)
        curves = [
            partition.equidistant_curve(holes[j], holes[k], bbox, scale / 256)
            for j in range(len(holes))
            for k in range(j + 1, len(holes))
            if k in found[j].gamma
        ]
        rows = [
            (c.index, c.perimeter, c.star.m, c.star.beta, c.star.B, c.exact) for c in found
        ]
        print(_table(["cell", "perimeter", "m", "beta", "B", "exact"], rows))
        figure = svg.render_partition(domain, cells=found, curves=curves)
    out = _out_path(args, args.svg)
    if out:
        harness.write_text(out, figure)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    result = oracle.annulus_oracle(args.r1, args.r2, args.phi, k_max=args.k_max)
    print(_table(["k", "eigenvalue"], [(m.k, m.eigenvalue) for m in result.modes]))
    print(f"\nlambda1 = {result.eigenvalue:.12g} (k = {result.mode})")
    return 0


COMMANDS = {
    "invariants": cmd_invariants,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "partition": cmd_partition,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluxgap", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="domain or scenario JSON file")
    common.add_argument("--jobs", type=int, default=None, help="parallel sweep points")
    common.add_argument("--out-dir", default=None, help="directory for output files")
    common.add_argument("--seed", type=int, default=None, help="eigensolver start-vector seed")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("invariants", "solve", "verify", "sweep"):
        sub.add_parser(name, parents=[common])
    part = sub.add_parser("partition", parents=[common])
    part.add_argument("--svg", default=None, help="write the partition figure here")
    orc = sub.add_parser("oracle", parents=[common])
    orc.add_argument("--r1", type=float, required=True)
    orc.add_argument("--r2", type=float, required=True)
    orc.add_argument("--phi", type=float, required=True)
    orc.add_argument("--k-max", type=int, default=3)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(get_settings().log_level)
    if args.command not in ("oracle",) and not args.config:
        print(f"error: {args.command} needs --config", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "input"
        print(f"error: {where}: {first['msg']}", file=sys.stderr)
        return 2
    except FluxgapError as e:
        print(f"error: {str(e).splitlines()[0]}", file=sys.stderr)
        return 2
    finally:
        reset_executor()


if __name__ == "__main__":
    sys.exit(main())
