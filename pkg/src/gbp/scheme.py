"""The approximation scheme end to end.

For each guess of the optimum, ascending from the lower bound: pick k,
classify, round, find a pattern assignment whose wildcard clashes can be
swapped away, then pack the small items.  Everything set aside along the way
is packed by balanced coloring into extra bins, each extra bin charged to a
single cause.  The result is compared with plain balanced coloring and the
smaller packing wins.
"""

from __future__ import annotations

import logging
import time
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .classification import (
    ClassParams,
    NoQualifyingK,
    classify,
    find_k,
    opt_guess_range,
    parse_epsilon,
    scheme_applicable,
)
from .core import Instance, Packing, check_packing, format_size, lower_bound
from .heuristics import balanced_coloring
from .patterns import (
    AssignmentSearch,
    SwappingFailed,
    enumerate_patterns,
    heuristic_placement,
    place_by_patterns,
    slot_key,
    slot_supply,
    swapping,
)
from .shifting import ShiftError, round_instance, unround
from .small_items import SmallBudgets, pack_small_items

LOG = logging.getLogger(__name__)

CAUSES = (
    "shifting",
    "medium_small",
    "representative",
    "padding",
    "eviction",
    "fractional",
    "conflict",
    "spare_type",
    "greedy_slack",
    "small_fallback",
    "fallback",
)


@dataclass(frozen=True)
class Budgets:
    pattern_budget: int | None = 100_000
    assignment_budget: int | None = 200_000
    enum_budget: int | None = 20_000
    alpha_override: int | None = None
    force_pipeline: bool = False
    small_attempts: int = 4
    candidate_limit: int = 8
    generic_objective: bool = True

    def small(self) -> SmallBudgets:
        return SmallBudgets(
            self.enum_budget,
            self.alpha_override,
            self.candidate_limit,
            self.assignment_budget,
            self.generic_objective,
        )


@dataclass
class SchemeReport:
    epsilon: Fraction
    opt_guess: int | None = None
    k: int | None = None
    core_bins: int = 0
    extras_by_cause: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CAUSES})
    lower_bound: int = 0
    used_fallback: bool = False
    fallback_reason: str = ""
    guesses: list[dict] = field(default_factory=list)
    exhaustive: dict[str, bool] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def extra_bins(self) -> int:
        return sum(self.extras_by_cause.values())

    @property
    def total_bins(self) -> int:
        return self.core_bins + self.extra_bins

    @property
    def ratio(self) -> Fraction | None:
        return Fraction(self.total_bins, self.lower_bound) if self.lower_bound else None

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "epsilon": format_size(self.epsilon),
            "opt_guess": self.opt_guess,
            "k": self.k,
            "total_bins": self.total_bins,
            "core_bins": self.core_bins,
            "extra_bins": self.extra_bins,
            "extras_by_cause": dict(self.extras_by_cause),
            "lower_bound": self.lower_bound,
            "ratio_vs_lower_bound": None if self.ratio is None else format_size(self.ratio),
            "used_fallback": self.used_fallback,
            "fallback_reason": self.fallback_reason,
            "exhaustive": dict(self.exhaustive),
            "counters": dict(self.counters),
            "guesses": list(self.guesses),
        }
        if include_timings:
            out["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return out


@contextmanager
def _timed(report: SchemeReport, phase: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        report.timings[phase] = report.timings.get(phase, 0.0) + time.perf_counter() - t0


def pack_discards(inst: Instance, pool: Mapping[int, str] | Iterable[int]) -> list[tuple[tuple[int, ...], str]]:
    """Balanced coloring of the pool; each bin is charged to its largest item's cause."""
    causes = dict(pool) if isinstance(pool, Mapping) else {i: "fallback" for i in pool}
    if not causes:
        return []
    p = balanced_coloring(inst, sorted(causes))
    out = []
    for content in p.bins:
        top = min(content, key=lambda i: (-inst.items[i].size, i))
        out.append((tuple(sorted(content)), causes[top]))
    return out


@dataclass
class _Accepted:
    core: list[tuple[int, ...]]
    extras: list[tuple[tuple[int, ...], str]]
    counters: dict
    exhaustive: dict


class _Rejected(Exception):
    pass


def _assemble(inst: Instance, rinst_pool: Mapping[int, str], small) -> _Accepted:
    pool = dict(rinst_pool)
    pool.update(small.pool)
    extras = list(small.extras) + pack_discards(inst, pool)
    counters = {
        "discarded_items": len(pool),
        "evictions": small.stats.get("evictions", 0),
        "fractional_items": small.stats.get("fractional", 0),
        "greedy_conflicts": small.stats.get("greedy_conflicts", 0),
        "small_guesses": small.stats.get("guesses", 0),
        "small_types": small.stats.get("types", 0),
    }
    core = [b for b in small.core if b]
    return _Accepted(core, extras, counters, {"small_enum": small.stats.get("exhaustive", True)})


def evaluate_guess(inst: Instance, epsilon: Fraction, guess: int, budgets: Budgets, report: SchemeReport):
    """Run every phase for one guess; returns an accepted result or raises _Rejected."""
    try:
        k = find_k(inst, epsilon, guess)
    except NoQualifyingK as exc:
        raise _Rejected(str(exc)) from exc
    params = ClassParams(epsilon, guess, k)
    if not scheme_applicable(params) and not budgets.force_pipeline:
        raise _Rejected(f"guess {guess} is not above 3/eps^(k+2)")
    with _timed(report, "classify"):
        classes, groups = classify(inst, params)
    with _timed(report, "shift"):
        try:
            rinst = round_instance(inst, classes, groups, params)
        except ShiftError as exc:
            raise _Rejected(str(exc)) from exc
    supply = slot_supply(rinst)
    with _timed(report, "patterns"):
        book = enumerate_patterns(
            sorted(supply, key=slot_key),
            params.slot_cap,
            budget=budgets.pattern_budget,
            supply=supply,
        )
    search = AssignmentSearch(book, supply, guess, budgets.assignment_budget)
    small_ids = sorted(classes.small)
    stats = Counter()
    fallback_candidate = None

    def attempt(tentative: Packing):
        nonlocal fallback_candidate
        with _timed(report, "swapping"):
            try:
                packed, sw = swapping(tentative, rinst)
            except SwappingFailed:
                stats["swap_failures"] += 1
                return None
        stats["swaps"] += sw.swaps
        stats["swap_searches"] += sw.searches
        core = unround(packed, rinst)
        with _timed(report, "small_items"):
            small = pack_small_items(inst, small_ids, core.bins, rinst, params, budgets.small())
        stats["small_attempts"] += 1
        acc = _assemble(inst, rinst.pool, small)
        if not small.stats.get("fallback"):
            return acc
        if fallback_candidate is None:
            fallback_candidate = acc
        return None

    done = None
    with _timed(report, "assignments"):
        for assignment in search:
            stats["assignments"] += 1
            done = attempt(place_by_patterns(book, assignment, rinst))
            if done is not None or stats["small_attempts"] >= budgets.small_attempts:
                break
    exhaustive = {"patterns": book.exhaustive, "assignments": search.exhaustive}
    if done is None and fallback_candidate is None and not (book.exhaustive and search.exhaustive):
        stats["heuristic_placements"] += 1
        placed = heuristic_placement(rinst, guess, params.slot_cap)
        if placed is not None:
            done = attempt(placed)
    result = done or fallback_candidate
    if result is None:
        reason = "no pattern assignment" if not stats["assignments"] else "swapping failed for every assignment"
        raise _Rejected(reason)
    result.counters.update(stats)
    result.exhaustive.update(exhaustive)
    report.k = k
    return result


def opt_guess_loop(inst: Instance, epsilon, budgets: Budgets = Budgets(), report: SchemeReport | None = None):
    """Try guesses upward from the lower bound; the first accepted one wins."""
    epsilon = parse_epsilon(epsilon)
    report = report or SchemeReport(epsilon)
    lo, hi = opt_guess_range(inst)
    for guess in range(lo, hi + 1):
        try:
            acc = evaluate_guess(inst, epsilon, guess, budgets, report)
        except _Rejected as exc:
            LOG.info("guess %d rejected: %s", guess, exc)
            report.guesses.append({"guess": guess, "accepted": False, "reason": str(exc)})
            continue
        report.guesses.append({"guess": guess, "accepted": True, "reason": ""})
        report.opt_guess = guess
        return acc, report
    return None, report


def run_aptas(inst: Instance, epsilon, budgets: Budgets = Budgets()) -> tuple[Packing, SchemeReport]:
    """Pack ``inst``; never worse than balanced coloring and always feasible."""
    epsilon = parse_epsilon(epsilon)
    report = SchemeReport(epsilon, lower_bound=lower_bound(inst))
    if inst.n_items == 0:
        return Packing((), "aptas", 0), report
    with _timed(report, "total"):
        acc, report = opt_guess_loop(inst, epsilon, budgets, report)
        fallback = balanced_coloring(inst)
        if acc is not None:
            n_pipeline = len(acc.core) + len(acc.extras)
            if n_pipeline <= fallback.n_bins:
                bins = acc.core + [b for b, _ in acc.extras]
                packing = Packing(tuple(bins), "aptas", len(acc.core))
                report.core_bins = len(acc.core)
                for _, cause in acc.extras:
                    report.extras_by_cause[cause] += 1
                report.counters.update(acc.counters)
                report.exhaustive.update(acc.exhaustive)
            else:
                acc = None
                report.fallback_reason = "balanced coloring used fewer bins"
        elif not report.fallback_reason:
            report.fallback_reason = "every guess was rejected"
        if acc is None:
            report.used_fallback = True
            packing = Packing(fallback.bins, "aptas", 0)
            report.core_bins = 0
            report.extras_by_cause["fallback"] = fallback.n_bins
    rep = check_packing(inst, packing)
    assert rep.feasible, f"scheme produced an infeasible packing: {rep.violations[:3]}"
    assert report.total_bins == packing.n_bins
    return packing, report
