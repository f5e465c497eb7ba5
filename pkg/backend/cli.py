"""
HST k-server simulator - command line entry point

Subcommands: gen, run, audit, compare. Exit codes: 0 ok, 2 invariant breach, 3 bad input.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from config import settings
from models.hst import Hst, HstError
from models.instance import Instance, InstanceError
from models.lp import LpError
from models.run import RunError
from services.auditor import audit_trace, invariant_table
from services.frt import frt_embed
from services.harness import (
    build_report,
    compare_many,
    run_instance,
    write_reports,
)
from services.hst_builder import balanced_hst, build_hst
from services.instance_io import (
    generate_random,
    parse_instance,
    parse_window_law,
    render_instance,
    with_overrides,
)
from services.trace import read_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BREACH = 2
EXIT_INPUT = 3


def parse_params_flag(value: Optional[str]) -> Dict[str, str]:
    """``name=value,name=value`` into a dict"""
    if not value:
        return {}
    params: Dict[str, str] = {}
    for item in value.split(","):
        name, sep, setting = item.partition("=")
        if not sep or not name.strip():
            raise argparse.ArgumentTypeError(f"Bad --params entry {item!r}")
        params[name.strip()] = setting.strip()
    return params


def load_instance(path: str, params: Optional[str] = None) -> Instance:
    with open(path, encoding="utf-8") as handle:
        instance = parse_instance(handle.read())
    extra = parse_params_flag(params)
    return with_overrides(instance, extra) if extra else instance


def random_tree(args: argparse.Namespace) -> Hst:
    if args.tree == "frt":
        rng = np.random.default_rng(args.seed)
        points = rng.uniform(0.0, 1.0, size=(args.leaves, 2))
        distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
        names = [f"l{i}" for i in range(args.leaves)]
        embedded = frt_embed(distances, args.lam, args.seed, names)
        # simulation needs λ ≥ 10H
        return build_hst(embedded.records(), embedded.lam)
    return balanced_hst(args.leaves, args.height, args.lam)


def print_summary(report, audit) -> None:
    print(f"algorithm:      {report.algorithm}")
    print(f"requests:       {report.requests}")
    print(f"movement cost:  {report.movement_cost:.6g}")
    if report.algorithm == "tw":
        print(f"piggyback cost: {report.piggyback_cost:.6g}")
    print(f"root dual:      {report.root_dual:.6g}")
    print(f"beta measured:  {report.beta_measured:.6g}")
    if report.opt_cost is not None:
        print(f"opt:            {report.opt_cost:.6g}")
    if report.certified_ratio is not None:
        print(f"ratio:          {report.certified_ratio:.6g}")
    if report.note:
        print(f"note:           {report.note}")
    if audit is not None and audit.invariants:
        print()
        print(invariant_table(audit).to_string(index=False))


def cmd_gen(args: argparse.Namespace) -> int:
    tree = random_tree(args)
    instance = generate_random(
        tree,
        args.k,
        args.reqs,
        parse_window_law(args.window),
        args.seed,
        parse_params_flag(args.params),
    )
    text = render_instance(instance)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"[OK] Wrote {len(instance.requests)} requests to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance, args.params)
    outcome = run_instance(
        instance,
        algorithm=args.algo,
        audit_mode=args.audit,
        out_dir=args.out,
        timing=args.timing,
    )
    print_summary(outcome.report, outcome.audit)
    return EXIT_OK if outcome.report.passed else EXIT_BREACH


def cmd_audit(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance, args.params)
    trace_path = args.trace or str(Path(args.out) / settings.TRACE_FILENAME)
    audit = audit_trace(instance, read_trace(trace_path))
    report = build_report(instance, audit)
    write_reports(args.out, report, audit)
    print_summary(report, audit)
    return EXIT_OK if report.passed else EXIT_BREACH


def cmd_compare(args: argparse.Namespace) -> int:
    reports = compare_many(args.instance, args.algo, args.oracle, args.audit, args.jobs, args.out)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = [json.loads(report.model_dump_json()) for report in reports]
    (out / "compare.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    for path, report in zip(args.instance, reports):
        print(f"== {path}")
        print_summary(report, None)
        failed = sorted(name for name, ok in report.invariants.items() if not ok)
        if failed:
            print(f"failing: {', '.join(failed)}")
    return EXIT_OK if all(report.passed for report in reports) else EXIT_BREACH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Fractional k-server simulator on λ-HSTs")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a random instance")
    gen.add_argument("--leaves", type=int, default=4)
    gen.add_argument("--height", type=int, default=2)
    gen.add_argument("--lambda", dest="lam", type=float, default=20.0)
    gen.add_argument("--k", type=int, default=1)
    gen.add_argument("--reqs", type=int, default=10)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--window", default="const:1", help="const:L, uniform:a:b or geom:p")
    gen.add_argument("--tree", choices=["balanced", "frt"], default="balanced")
    gen.add_argument("--params", default=None, help="name=value,... parameter overrides")
    gen.add_argument("--out", default=None, help="Instance file (stdout when omitted)")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="Run an algorithm and audit its trace")
    run.add_argument("--instance", required=True)
    run.add_argument("--algo", choices=["kserver", "tw"], default=None)
    run.add_argument("--params", default=None)
    run.add_argument("--out", default="out")
    run.add_argument("--audit", choices=["inline", "post", "off"], default=settings.DEFAULT_AUDIT_MODE)
    run.add_argument("--timing", action="store_true", help="Record wall time in the report")
    run.set_defaults(func=cmd_run)

    aud = sub.add_parser("audit", help="Re-audit a stored trace")
    aud.add_argument("--instance", required=True)
    aud.add_argument("--trace", default=None, help=f"Defaults to OUT/{settings.TRACE_FILENAME}")
    aud.add_argument("--params", default=None)
    aud.add_argument("--out", default="out")
    aud.set_defaults(func=cmd_audit)

    cmp = sub.add_parser("compare", help="Run and certify against an offline optimum")
    cmp.add_argument("--instance", nargs="+", required=True)
    cmp.add_argument("--algo", choices=["kserver", "tw"], default=None)
    cmp.add_argument("--oracle", choices=["flow", "brute", "none"], default="flow")
    cmp.add_argument("--audit", choices=["inline", "post", "off"], default=settings.DEFAULT_AUDIT_MODE)
    cmp.add_argument("--jobs", type=int, default=1)
    cmp.add_argument("--out", default="out")
    cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.LOG_LEVEL)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, HstError, argparse.ArgumentTypeError, ValueError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_INPUT
    except (LpError, RunError) as e:
        print(f"[BREACH] {e}", file=sys.stderr)
        return EXIT_BREACH


if __name__ == "__main__":
    sys.exit(main())
