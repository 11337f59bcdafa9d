"""Benchmark runner: instances x algorithms -> verified rows.

A config is JSON::

    {
      "seed": 0,
      "exact_limit": 12,
      "instances": [
        {"name": "u20", "gen": {"family": "uniform", "params": {"N": 20, "n": 6}}},
        {"name": "adv", "gen": {"family": "appendix_b", "params": {"eps": "1/5"}},
         "sweep": {"N_hat": [5, 10]}},
        {"name": "file", "path": "inst.json"}
      ],
      "algorithms": [
        {"algorithm": "balanced"},
        {"algorithm": "firstfit", "order": "decreasing"},
        {"algorithm": "aptas", "eps": "0.3", "force": true}
      ]
    }

Generator seeds default to ``seed + index`` (index over expanded instances).
If ``GBP_SEED`` is set it replaces ``seed`` and every explicit seed, so one
variable reseeds the whole run.  Every packing is checked; an infeasible one
aborts the run with :class:`ContractBreach`.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .classification import parse_epsilon
from .core import Instance, InstanceError, Packing, check_packing, format_size, lower_bound, read_instance
from .exact import SolveLimits, solve_exact
from .generators import GenSpec, appendix_b_greedy, appendix_b_optimal, generate
from .heuristics import balanced_coloring, first_fit_conflicts
from .scheme import Budgets, run_aptas

ALGORITHMS = ("exact", "balanced", "firstfit", "aptas", "appendix_b_greedy", "appendix_b_optimal")

CSV_COLUMNS = (
    "instance",
    "algorithm",
    "n_items",
    "n_groups",
    "bins",
    "lower_bound",
    "opt",
    "reference",
    "ratio",
    "core_bins",
    "extra_bins",
    "runtime_s",
)


class ContractBreach(RuntimeError):
    """A solver returned an infeasible packing."""


@dataclass(frozen=True)
class InstanceEntry:
    name: str
    instance: Instance
    gen: GenSpec | None = None
    path: str | None = None


def algorithm_label(cfg: Mapping) -> str:
    if "name" in cfg:
        return str(cfg["name"])
    algo = cfg["algorithm"]
    if algo == "firstfit":
        return f"firstfit-{cfg.get('order', 'input')}"
    if algo == "aptas":
        return f"aptas-{cfg.get('eps', '0.3')}"
    return algo


def budgets_from(cfg: Mapping) -> Budgets:
    keys = {
        "pattern_budget": "pattern_budget",
        "assignment_budget": "assignment_budget",
        "enum_budget": "enum_budget",
        "alpha_override": "alpha_override",
        "force": "force_pipeline",
        "small_attempts": "small_attempts",
        "candidate_limit": "candidate_limit",
    }
    return Budgets(**{field: cfg[k] for k, field in keys.items() if k in cfg})


def solve(inst: Instance, cfg: Mapping, gen: GenSpec | None = None) -> tuple[Packing, dict]:
    """Run one algorithm config; returns the packing and a dict of counters."""
    algo = cfg.get("algorithm")
    if algo == "exact":
        limits = SolveLimits(**{k: cfg[k] for k in ("max_items", "node_budget", "time_budget") if k in cfg})
        res = solve_exact(inst, limits)
        return res.packing, {"proven_optimal": res.proven_optimal, "nodes": res.nodes_explored}
    if algo == "balanced":
        return balanced_coloring(inst), {}
    if algo == "firstfit":
        return first_fit_conflicts(inst, cfg.get("order", "input"), cfg.get("seed")), {}
    if algo == "aptas":
        packing, report = run_aptas(inst, cfg.get("eps", "0.3"), budgets_from(cfg))
        d = report.to_dict()
        counters = {
            "opt_guess": d["opt_guess"],
            "k": d["k"],
            "used_fallback": d["used_fallback"],
            **{f"extra_{c}": n for c, n in d["extras_by_cause"].items() if n},
            **d["counters"],
        }
        return packing, counters
    if algo in ("appendix_b_greedy", "appendix_b_optimal"):
        if gen is None or gen.family != "appendix_b":
            raise InstanceError(f"{algo} needs an appendix_b generated instance")
        build = appendix_b_greedy if algo == "appendix_b_greedy" else appendix_b_optimal
        return build(inst, gen.params["eps"], gen.params["N_hat"]), {}
    raise InstanceError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")


def _seed_override() -> int | None:
    raw = os.environ.get("GBP_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise InstanceError(f"GBP_SEED must be an integer, got {raw!r}") from exc


def expand_instances(config: Mapping, base_dir: Path | None = None) -> list[InstanceEntry]:
    override = _seed_override()
    base_seed = override if override is not None else int(config.get("seed", 0))
    out: list[InstanceEntry] = []
    for k, entry in enumerate(config.get("instances", [])):
        name = str(entry.get("name", f"inst{k}"))
        if "path" in entry:
            path = Path(entry["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            out.append(InstanceEntry(name, read_instance(path), path=str(entry["path"])))
            continue
        if "gen" not in entry:
            raise InstanceError(f"instance {name!r} needs 'gen' or 'path'")
        gen = GenSpec.from_dict(entry["gen"])
        sweep = entry.get("sweep", {})
        keys = sorted(sweep)
        for values in itertools.product(*(sweep[key] for key in keys)):
            params = {**gen.params, **dict(zip(keys, values))}
            explicit = "seed" in entry["gen"] and override is None
            seed = gen.seed if explicit else base_seed + len(out)
            spec = GenSpec(gen.family, params, seed)
            label = name + "".join(f"[{key}={v}]" for key, v in zip(keys, values))
            out.append(InstanceEntry(label, generate(spec), spec))
    return out


def _reference(inst: Instance, exact_limit: int) -> tuple[int, int | None]:
    lb = lower_bound(inst)
    if inst.n_items == 0 or inst.n_items > exact_limit:
        return lb, None
    res = solve_exact(inst, SolveLimits(max_items=max(exact_limit, 1)))
    return lb, res.opt if res.proven_optimal else None


def _run_row(task) -> dict:
    entry, cfg, lb, opt = task
    t0 = time.perf_counter()
    packing, counters = solve(entry.instance, cfg, entry.gen)
    runtime = time.perf_counter() - t0
    rep = check_packing(entry.instance, packing)
    label = algorithm_label(cfg)
    if not rep.feasible:
        raise ContractBreach(f"{label} on {entry.name}: {rep.to_dict()['violations'][:3]}")
    ref = max(lb, opt) if opt is not None else lb
    ratio = Fraction(packing.n_bins, ref) if ref else None
    return {
        "instance": entry.name,
        "algorithm": label,
        "n_items": entry.instance.n_items,
        "n_groups": entry.instance.n_groups,
        "bins": packing.n_bins,
        "lower_bound": lb,
        "opt": opt,
        "reference": "opt" if opt is not None else "lower_bound",
        "ratio": None if ratio is None else format_size(ratio),
        "core_bins": packing.core_bins if packing.core_bins is not None else packing.n_bins,
        "extra_bins": packing.extra_bins,
        "feasible": True,
        "counters": counters,
        "runtime_s": runtime,
    }


@dataclass
class BenchReport:
    config: dict
    rows: list[dict]

    def to_dict(self) -> dict:
        """Deterministic view: runtimes are left out."""
        return {
            "config": self.config,
            "rows": [{k: v for k, v in r.items() if k != "runtime_s"} for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(["" if r[c] is None else (f"{r[c]:.6f}" if c == "runtime_s" else r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _validate_algorithms(algos) -> list[dict]:
    out = []
    for cfg in algos:
        if cfg.get("algorithm") not in ALGORITHMS:
            raise InstanceError(f"unknown algorithm {cfg.get('algorithm')!r}; choose from {ALGORITHMS}")
        if cfg["algorithm"] == "aptas":
            parse_epsilon(cfg.get("eps", "0.3"))
        out.append(dict(cfg))
    return out


def run_bench(config: Mapping, jobs: int = 1, base_dir: Path | None = None) -> BenchReport:
    """Run every (instance, algorithm) pair; rows come back in config order."""
    algos = _validate_algorithms(config.get("algorithms", []))
    entries = expand_instances(config, base_dir)
    exact_limit = int(config.get("exact_limit", 12))
    tasks = []
    for entry in entries:
        lb, opt = _reference(entry.instance, exact_limit)
        tasks.extend((entry, cfg, lb, opt) for cfg in algos)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_row, tasks))
    else:
        rows = [_run_row(t) for t in tasks]
    override = _seed_override()
    normalized = {
        "seed": override if override is not None else int(config.get("seed", 0)),
        "exact_limit": exact_limit,
        "instances": [
            {"name": e.name, **({"gen": e.gen.to_dict()} if e.gen else {"path": e.path})}
            for e in entries
        ],
        "algorithms": algos,
    }
    return BenchReport(normalized, rows)
