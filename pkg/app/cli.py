import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from app.config import settings
from app.errors import GraphParseError, KMSGraphError, QueryParseError
from app.fixtures import check_fixture, fixture_names, write_fixtures, FIXTURES
from app.models import Algebra, AnalysisReport, MultiGraph, StateQuery, SweepRow
from app.services.entropy_service import pretty_log
from app.services.graph_service import graph_service
from app.services.spectral_service import parse_beta
from app.services.state_service import parse_algebra, state_service
from app.workflows.analysis_workflow import ALL_ALGEBRAS, analysis_workflow
from app.workflows.verification_workflow import verification_workflow

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["beta", "algebra", "finite_dim", "infinite_dim", "total_dim"]


def parse_algebras(value: str) -> Tuple[Algebra, ...]:
    if value.strip().lower() == "all":
        return ALL_ALGEBRAS
    return (parse_algebra(value),)


def parse_range(text: str) -> List[float]:
    """`lo:hi:step` -> [lo, lo + step, ...] up to hi"""
    parts = text.split(":")
    if len(parts) != 3:
        raise GraphParseError(f"'{text}' is not lo:hi:step", field="range")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise GraphParseError(f"'{text}' is not lo:hi:step", field="range")
    if not lo > 0:
        raise GraphParseError(f"lower end {lo} must be positive", field="range")
    if not step > 0:
        raise GraphParseError(f"step {step} must be positive", field="range")
    if hi < lo:
        raise GraphParseError(f"upper end {hi} is below the lower end {lo}", field="range")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(count)]


def sweep(g: MultiGraph, betas: Sequence[float], algebras: Sequence[Algebra]) -> List[SweepRow]:
    """Simplex dimensions over a beta grid; points run in parallel, rows come back in grid order"""
    def row(point: Tuple[float, Algebra]) -> SweepRow:
        beta, algebra = point
        simplex = state_service.kms_simplex(g, beta, algebra)
        finite, infinite = len(simplex.finite_extremes), len(simplex.infinite_extremes)
        return SweepRow(
            beta=beta,
            algebra=algebra,
            finite_dim=finite - 1,
            infinite_dim=infinite - 1,
            total_dim=finite + infinite - 1,
        )

    points = [(beta, algebra) for beta in betas for algebra in algebras]
    with ThreadPoolExecutor(max_workers=settings.SWEEP_WORKERS) as executor:
        return list(executor.map(row, points))


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({
            "beta": f"{r.beta:.10g}",
            "algebra": r.algebra.value,
            "finite_dim": r.finite_dim,
            "infinite_dim": r.infinite_dim,
            "total_dim": r.total_dim,
        })
    return buffer.getvalue()


def _weights(labels: Sequence[str], weights: Sequence[float]) -> str:
    return ", ".join(f"{labels[i]}: {w:.12g}" for i, w in enumerate(weights) if w > 0)


def render_report(report: AnalysisReport) -> str:
    """Deterministic plain-text rendering of an analysis report"""
    labels = report.graph["vertices"]
    lines = [f"graph: {len(labels)} vertices, {report.graph['edge_count']} edges"]
    lines.append(f"sources: {{{', '.join(report.graph['sources'])}}}")
    lines.append("components:")
    for c in report.components:
        flags = [name for name in ("is_zero", "is_sink") if c[name]]
        lines.append(f"  G{c['index']} {{{', '.join(c['vertices'])}}} radius {c['radius']:.12g} {' '.join(flags)}".rstrip())
    lines.append(f"entropy: h_X = {report.entropy.h_min_pretty}, h_X^s = {report.entropy.h_strong_pretty}")
    lines.append("transitions:")
    for t in report.phase.transitions:
        suffix = " (beta = 0 boundary)" if t.boundary else ""
        components = ", ".join(f"G{i}" for i in t.components)
        lines.append(f"  {t.pretty}: {components}{suffix}")
    lines.append("allowed vertices:")
    for interval in report.phase.intervals:
        hi = pretty_log(interval.hi) + "]" if interval.hi is not None else "inf)"
        lines.append(f"  ({pretty_log(interval.lo)}, {hi}: {{{', '.join(interval.allowed)}}}")
    for simplex in report.simplices:
        lines.append(f"simplex {simplex.algebra.value} at beta = {pretty_log(simplex.beta)} (dimension {simplex.dimension}):")
        for extreme in simplex.finite_extremes:
            lines.append(f"  finite  delta_{extreme.vertex}  c = {extreme.c:.12g}")
        for tau in simplex.infinite_extremes:
            lines.append(f"  infinite {{{_weights(labels, tau.weights)}}}")
    for ground in report.ground_states:
        lines.append(f"ground/KMS-infinity {ground.algebra.value}: {{{', '.join(ground.vertices)}}}")
    for check in report.verification:
        lines.append(
            f"verification N={check.N}: relations {'exact' if check.relations_exact else 'FAILED'}, "
            f"max KMS residual {check.kms_max_residual:.3g} over {check.states_checked} states"
        )
        if check.level_mass_tail is not None:
            lines.append(f"  level mass left beyond N: {check.level_mass_tail:.3g}")
        if check.norm_entropy and check.norm_entropy[-1].value is not None:
            last = check.norm_entropy[-1]
            lines.append(f"  norm entropy estimate at k={last.k}: {last.value:.6g}")
    return "\n".join(lines) + "\n"


def _read_input(path: Optional[str]) -> str:
    if path is None:
        raise GraphParseError("no graph given (use --input FILE or - for stdin)", field="input")
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as handle:
            return handle.read()
    except OSError as e:
        raise GraphParseError(f"cannot read {path}: {e.strerror}", field="input")


def _load_graph(args) -> MultiGraph:
    return graph_service.parse_graph(_read_input(args.input))


def cmd_analyze(args) -> str:
    g = _load_graph(args)
    betas = [parse_beta(b) for b in args.beta]
    report = analysis_workflow.invoke(
        g,
        betas=betas,
        algebras=parse_algebras(args.algebra),
        verify=args.verify,
        depth=args.depth,
        trials=args.trials,
        seed=args.seed,
    )
    if args.format == "json":
        return report.model_dump_json(indent=2) + "\n"
    return render_report(report)


def cmd_sweep(args) -> str:
    g = _load_graph(args)
    rows = sweep(g, parse_range(args.range), parse_algebras(args.algebra))
    if args.format == "json":
        return json.dumps([r.model_dump(mode="json") for r in rows], indent=2) + "\n"
    return sweep_csv(rows)


def cmd_eval_state(args) -> str:
    g = _load_graph(args)
    text = _read_input(args.query)
    try:
        query = StateQuery.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        raise QueryParseError(first["msg"], field=".".join(str(p) for p in first["loc"]) or "query")
    evaluation = state_service.evaluate_query(g, query)
    return evaluation.model_dump_json(indent=2) + "\n"


def cmd_verify(args) -> str:
    g = _load_graph(args)
    report = verification_workflow.invoke(
        g,
        beta=parse_beta(args.beta),
        depth=args.depth,
        trials=args.trials,
        seed=args.seed,
        entropy_steps=args.entropy_steps,
    )
    return report.model_dump_json(indent=2) + "\n"


def cmd_fixtures(args) -> str:
    if args.list:
        return "".join(f"{name}\t{FIXTURES[name]['description']}\n" for name in fixture_names())
    lines = []
    if args.output:
        written = write_fixtures(args.output)
        lines.append(f"wrote {len(written)} files to {args.output}")
    if args.check:
        failures = 0
        for name in fixture_names():
            problems = check_fixture(name)
            failures += bool(problems)
            lines.append(f"{name}: {'ok' if not problems else 'FAILED'}")
            lines.extend(f"  {p}" for p in problems)
        if failures:
            args.exit_code = 1
    if not lines:
        lines = fixture_names()
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", default=argparse.SUPPRESS, help="graph file (JSON or plain matrix), - for stdin")
    common.add_argument("--format", choices=["json", "text"], default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="sampling seed for verification")

    parser = argparse.ArgumentParser(
        prog="kmsgraph", description="KMS phase structure of Toeplitz and Cuntz-Pimsner algebras of finite graphs"
    )
    parser.add_argument("--input", default=None)
    parser.add_argument("--format", choices=["json", "text"], default="json")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    subparsers = parser.add_subparsers(dest="command", required=True)

    analyze = subparsers.add_parser("analyze", parents=[common], help="entropies, phase diagram and simplices")
    analyze.add_argument("--beta", action="append", default=[], help="real or log:<x>; repeatable")
    analyze.add_argument("--algebra", default="all", help="toeplitz, cuntz, oa or all")
    analyze.add_argument("--verify", action="store_true", help="check the states on a truncated Fock space")
    analyze.add_argument("--depth", type=int, default=6)
    analyze.add_argument("--trials", type=int, default=settings.DEFAULT_TRIALS)
    analyze.set_defaults(handler=cmd_analyze)

    sweep_parser = subparsers.add_parser("sweep", parents=[common], help="simplex dimensions over a beta grid (CSV)")
    sweep_parser.add_argument("--range", required=True, help="lo:hi:step")
    sweep_parser.add_argument("--algebra", default="all")
    sweep_parser.set_defaults(handler=cmd_sweep, format_default="text")

    eval_state = subparsers.add_parser("eval-state", parents=[common], help="evaluate a KMS state on monomials")
    eval_state.add_argument("--query", required=True, help="state query JSON file, - for stdin")
    eval_state.set_defaults(handler=cmd_eval_state)

    verify = subparsers.add_parser("verify", parents=[common], help="Fock-space verification at one beta")
    verify.add_argument("--beta", required=True)
    verify.add_argument("--depth", type=int, default=6)
    verify.add_argument("--trials", type=int, default=settings.DEFAULT_TRIALS)
    verify.add_argument("--entropy-steps", type=int, default=30, help="k_max for the norm entropy estimate")
    verify.set_defaults(handler=cmd_verify)

    fixtures = subparsers.add_parser("fixtures", parents=[common], help="bundled example graphs")
    fixtures.add_argument("--output", help="directory to write the fixture files to")
    fixtures.add_argument("--check", action="store_true", help="re-run every fixture against its expected output")
    fixtures.add_argument("--list", action="store_true")
    fixtures.set_defaults(handler=cmd_fixtures)
    return parser


def _report_error(error: Exception) -> None:
    prefix = "\033[31merror\033[0m" if settings.use_color and sys.stderr.isatty() else "error"
    print(f"{prefix}: {error}", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    raw = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(raw)
    if getattr(args, "format_default", None) and "--format" not in raw:
        args.format = args.format_default
    args.exit_code = 0

    try:
        output = args.handler(args)
    except GraphParseError as e:
        _report_error(e)
        return 2
    except KMSGraphError as e:
        _report_error(e)
        return 1
    sys.stdout.write(output)
    return args.exit_code


if __name__ == "__main__":
    sys.exit(main())
