"""Optimal solvers for small instances.

``solve_exact`` is a branch-and-bound over the decision problem "fits in m
bins?" for ascending m.  ``solve_bruteforce`` enumerates set partitions and is
kept deliberately naive so it can serve as an independent oracle.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

from .core import Instance, Packing, lower_bound
from .heuristics import balanced_coloring, first_fit_conflicts

LOG = logging.getLogger(__name__)


class BudgetExhausted(RuntimeError):
    """The search ran out of nodes or time before reaching a verdict."""


@dataclass(frozen=True)
class SolveLimits:
    max_items: int = 20
    node_budget: int = 2_000_000
    time_budget: float = 60.0
    target: int | None = None

    def __post_init__(self):
        if self.max_items <= 0 or self.node_budget <= 0 or self.time_budget <= 0:
            raise ValueError("solver budgets must be positive")


@dataclass(frozen=True)
class ExactResult:
    opt: int
    packing: Packing
    proven_optimal: bool
    nodes_explored: int


class _Search:
    """Depth-first placement of items (largest first) into at most m bins."""

    def __init__(self, inst: Instance, limits: SolveLimits):
        self.inst = inst
        self.limits = limits
        self.nodes = 0
        self.deadline = time.monotonic() + limits.time_budget
        denom = math.lcm(*(it.size.denominator for it in inst.items)) if inst.items else 1
        self.cap = denom
        self.order = sorted(range(inst.n_items), key=lambda i: (-inst.items[i].size, i))
        self.size = [int(inst.items[i].size * denom) for i in self.order]
        self.group = [inst.items[i].group for i in self.order]
        n = len(self.order)
        self.suffix = [0] * (n + 1)
        for k in range(n - 1, -1, -1):
            self.suffix[k] = self.suffix[k + 1] + self.size[k]
        self.left_in_group: list[int] = []
        counts: dict[int, int] = {}
        for k in range(n - 1, -1, -1):
            counts[self.group[k]] = counts.get(self.group[k], 0) + 1
            self.left_in_group.append(counts[self.group[k]])
        self.left_in_group.reverse()

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.limits.node_budget:
            raise BudgetExhausted(f"node budget {self.limits.node_budget} exhausted")
        if self.nodes % 4096 == 0 and time.monotonic() > self.deadline:
            raise BudgetExhausted(f"time budget {self.limits.time_budget}s exhausted")

    def fits(self, m: int) -> list[list[int]] | None:
        n = len(self.order)
        if n == 0:
            return []
        if self.suffix[0] > m * self.cap:
            return None
        loads: list[int] = []
        groups: list[set[int]] = []
        where = [0] * n

        def free_total() -> int:
            return (m - len(loads)) * self.cap + sum(self.cap - x for x in loads)

        def place(k: int) -> bool:
            if k == n:
                return True
            self._tick()
            if self.suffix[k] > free_total():
                return False
            s, g = self.size[k], self.group[k]
            lacking = (m - len(loads)) + sum(1 for gs in groups if g not in gs)
            if lacking < self.left_in_group[k]:
                return False
            seen: set[tuple[int, frozenset]] = set()
            for b in range(len(loads)):
                if g in groups[b] or loads[b] + s > self.cap:
                    continue
                sig = (loads[b], frozenset(groups[b]))
                if sig in seen:
                    continue
                seen.add(sig)
                loads[b] += s
                groups[b].add(g)
                where[k] = b
                if place(k + 1):
                    return True
                loads[b] -= s
                groups[b].discard(g)
            if len(loads) < m:
                loads.append(s)
                groups.append({g})
                where[k] = len(loads) - 1
                if place(k + 1):
                    return True
                loads.pop()
                groups.pop()
            return False

        if not place(0):
            return None
        bins: list[list[int]] = [[] for _ in loads]
        for k, b in enumerate(where):
            bins[b].append(self.order[k])
        return [sorted(b) for b in bins]


def _check_size(inst: Instance, limits: SolveLimits):
    if inst.n_items > limits.max_items:
        raise ValueError(f"instance has {inst.n_items} items; exact solver limit is {limits.max_items}")


def feasible_in(
    inst: Instance, m: int | None = None, limits: SolveLimits = SolveLimits()
) -> Packing | None:
    """A packing into at most ``m`` bins (default ``limits.target``), or None.

    Raises :class:`BudgetExhausted` when the verdict is indeterminate.
    """
    if m is None:
        m = limits.target
    if m is None or m < 0:
        raise ValueError("m must be non-negative")
    _check_size(inst, limits)
    if m < lower_bound(inst):
        return None
    bins = _Search(inst, limits).fits(m)
    if bins is None:
        return None
    return Packing(tuple(tuple(b) for b in bins), "exact")


def solve_exact(inst: Instance, limits: SolveLimits = SolveLimits()) -> ExactResult:
    """Minimum bin count by ascending decision searches.

    The incumbent comes from the better of balanced coloring and First-Fit
    decreasing; if a budget runs out the incumbent is returned unproven.
    """
    _check_size(inst, limits)
    if inst.n_items == 0:
        return ExactResult(0, Packing((), "exact"), True, 0)
    incumbent = min(
        (balanced_coloring(inst), first_fit_conflicts(inst, "decreasing")),
        key=lambda p: p.n_bins,
    )
    search = _Search(inst, limits)
    lo = lower_bound(inst)
    try:
        for m in range(lo, incumbent.n_bins):
            bins = search.fits(m)
            if bins is not None:
                p = Packing(tuple(tuple(b) for b in bins), "exact")
                return ExactResult(p.n_bins, p, True, search.nodes)
    except BudgetExhausted as exc:
        LOG.info("exact search stopped: %s", exc)
        p = Packing(incumbent.bins, "exact")
        return ExactResult(p.n_bins, p, False, search.nodes)
    p = Packing(incumbent.bins, "exact")
    return ExactResult(p.n_bins, p, True, search.nodes)


BRUTEFORCE_LIMIT = 10


def solve_bruteforce(inst: Instance) -> ExactResult:
    """Enumerate every set partition, keep the feasible one with fewest blocks."""
    n = inst.n_items
    if n > BRUTEFORCE_LIMIT:
        raise ValueError(f"brute force supports at most {BRUTEFORCE_LIMIT} items, got {n}")
    items = inst.items
    blocks: list[list[int]] = []
    best: list[list[list[int]]] = []
    count = 0

    def ok(block: list[int], i: int) -> bool:
        if any(items[j].group == items[i].group for j in block):
            return False
        return sum((items[j].size for j in block), items[i].size) <= 1

    def rec(i: int):
        nonlocal count
        count += 1
        if i == n:
            if not best or len(blocks) < len(best[0]):
                best[:] = [[list(b) for b in blocks]]
            return
        for block in blocks:
            if ok(block, i):
                block.append(i)
                rec(i + 1)
                block.pop()
        blocks.append([i])
        rec(i + 1)
        blocks.pop()

    rec(0)
    bins = best[0] if best else []
    p = Packing(tuple(tuple(b) for b in bins), "bruteforce")
    return ExactResult(p.n_bins, p, True, count)
