"""Command line: ``gbp gen|solve|check|bench|gap``.

Exit codes: 0 ok, 1 infeasible packing or solver contract breach, 2 usage or
parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import ALGORITHMS, ContractBreach, budgets_from, load_config, run_bench, solve
from .core import (
    InstanceError,
    check_packing,
    instance_to_dict,
    lower_bound,
    packing_to_dict,
    read_instance,
    read_packing,
    write_json,
)
from .generators import FAMILIES, GenSpec, demonstrate_gap, generate
from .scheme import run_aptas

OK, INFEASIBLE, USAGE = 0, 1, 2


def _param(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, int(value)
    except ValueError:
        return key, value


def _emit(payload: dict, path: str | None) -> None:
    if path and path != "-":
        write_json(path, payload)
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")


def cmd_gen(args) -> int:
    if args.spec:
        with open(args.spec) as fh:
            spec = GenSpec.from_dict(json.load(fh))
    else:
        if not args.family:
            raise InstanceError("gen needs --family or --spec")
        spec = GenSpec(args.family, dict(args.param or []), args.seed)
    _emit(instance_to_dict(generate(spec)), args.output)
    return OK


def cmd_solve(args) -> int:
    inst = read_instance(args.input)
    cfg = {"algorithm": args.algorithm, "order": args.order, "seed": args.seed, "eps": args.epsilon}
    for key in ("pattern_budget", "assignment_budget", "enum_budget", "alpha_override"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = None if value < 0 else value
    if args.force:
        cfg["force"] = True
    if args.algorithm == "exact":
        cfg["max_items"] = max(inst.n_items, 1)
    full = None
    if args.algorithm == "aptas":
        packing, full = run_aptas(inst, args.epsilon, budgets_from(cfg))
        counters = {}
    else:
        packing, counters = solve(inst, cfg)
    rep = check_packing(inst, packing)
    if args.report:
        report = {"algorithm": args.algorithm, "bins": packing.n_bins, "lower_bound": lower_bound(inst)}
        if full is not None:
            report.update(full.to_dict(include_timings=args.timings))
        else:
            report["counters"] = counters
        report["feasibility"] = rep.to_dict()
        _emit(report, args.report)
    _emit(packing_to_dict(packing), args.output)
    print(f"{args.algorithm}: {packing.n_bins} bins (lower bound {lower_bound(inst)})", file=sys.stderr)
    return OK if rep.feasible else INFEASIBLE


def cmd_check(args) -> int:
    inst = read_instance(args.instance)
    packing = read_packing(args.packing)
    rep = check_packing(inst, packing)
    _emit(rep.to_dict(), None)
    return OK if rep.feasible else INFEASIBLE


def cmd_bench(args) -> int:
    config = load_config(args.config)
    report = run_bench(config, jobs=args.jobs, base_dir=Path(args.config).resolve().parent)
    if args.json:
        Path(args.json).write_text(report.to_json())
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    if not args.json and not args.csv:
        sys.stdout.write(report.to_csv())
    return OK


def cmd_gap(args) -> int:
    optimal, greedy = demonstrate_gap(args.epsilon, args.n_hat)
    print(f"optimal: {optimal.n_bins} bins, greedy: {greedy.n_bins} bins, ratio {greedy.n_bins}/{optimal.n_bins}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        inst = generate(GenSpec("appendix_b", {"eps": args.epsilon, "N_hat": args.n_hat}))
        write_json(out / "instance.json", instance_to_dict(inst))
        write_json(out / "optimal.json", packing_to_dict(optimal))
        write_json(out / "greedy.json", packing_to_dict(greedy))
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gbp", description="Group bin packing tools")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--family", choices=sorted(FAMILIES))
    g.add_argument("-p", "--param", type=_param, action="append", help="family parameter key=value")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--spec", help="JSON generator spec instead of --family/--param")
    g.add_argument("-o", "--output", help="output file (default stdout)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="pack an instance")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("-a", "--algorithm", choices=[a for a in ALGORITHMS if not a.startswith("appendix")], default="aptas")
    s.add_argument("--order", default="input", choices=["input", "decreasing", "random"])
    s.add_argument("--seed", type=int, default=None, help="seed for --order random")
    s.add_argument("-e", "--epsilon", default="0.3")
    s.add_argument("--pattern-budget", type=int, help="-1 for unlimited")
    s.add_argument("--assignment-budget", type=int, help="-1 for unlimited")
    s.add_argument("--enum-budget", type=int, help="-1 for unlimited")
    s.add_argument("--alpha-override", type=int)
    s.add_argument("--force", action="store_true", help="run the pipeline even below the applicability threshold")
    s.add_argument("--timings", action="store_true", help="include phase timings in the report")
    s.add_argument("-o", "--output", help="packing JSON (default stdout)")
    s.add_argument("--report", help="write a report JSON here")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="verify a packing")
    c.add_argument("instance")
    c.add_argument("packing")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="run a benchmark config")
    b.add_argument("config")
    b.add_argument("--json", help="JSON report path")
    b.add_argument("--csv", help="CSV report path")
    b.add_argument("-j", "--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    gp = sub.add_parser("gap", help="build the optimal and greedy packings of the adversarial family")
    gp.add_argument("-e", "--epsilon", default="1/5")
    gp.add_argument("-n", "--n-hat", type=int, default=10)
    gp.add_argument("-o", "--output", help="directory for instance and packings")
    gp.set_defaults(func=cmd_gap)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ContractBreach as exc:
        print(f"contract breach: {exc}", file=sys.stderr)
        return INFEASIBLE
    except (InstanceError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
