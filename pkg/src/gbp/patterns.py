"""Slots, bin patterns, pattern assignments and conflict repair by swapping.

A slot is a (rounded size, label) pair.  Labels are large-group ids, which
may occur at most once per pattern, or ``"u"``, which stands for any small
group and may repeat.  An assignment says how many of the guessed bins use
each pattern; it must consume the rounded item supply exactly.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, NamedTuple, Sequence

from .core import Packing
from .shifting import UNLABELED, RoundedInstance

LOG = logging.getLogger(__name__)


class Slot(NamedTuple):
    size: Fraction
    label: object


def slot_key(slot: Slot):
    wild = slot.label == UNLABELED
    return (-slot.size, wild, 0 if wild else slot.label)


def build_slot_alphabet(rinst: RoundedInstance) -> tuple[Slot, ...]:
    """Every (rounded size, label) that occurs among surviving rounded items."""
    return tuple(sorted(set(slot_supply(rinst)), key=slot_key))


def slot_supply(rinst: RoundedInstance) -> Counter:
    rounded = rinst.rounded
    return Counter(Slot(rounded[i], label) for i, label in rinst.labels.items())


@dataclass(frozen=True)
class PatternBook:
    """Patterns as sorted tuples of slot indices into ``alphabet``."""

    alphabet: tuple[Slot, ...]
    patterns: tuple[tuple[int, ...], ...]
    capacity: Fraction
    cap: int
    exhaustive: bool

    def load(self, p: int) -> Fraction:
        return sum((self.alphabet[s].size for s in self.patterns[p]), Fraction(0))

    def slots(self, p: int) -> list[Slot]:
        return [self.alphabet[s] for s in self.patterns[p]]


def enumerate_patterns(
    alphabet: Sequence[Slot],
    cap: int,
    capacity: Fraction = Fraction(1),
    budget: int | None = None,
    supply: Mapping[Slot, int] | None = None,
) -> PatternBook:
    """All slot multisets with at most ``cap`` slots and load within ``capacity``.

    Non-wildcard labels appear at most once.  With ``supply`` a slot never
    repeats more often than its supply.  The empty pattern comes first.
    """
    alphabet = tuple(alphabet)
    limit = [
        (supply.get(s, 0) if supply is not None else cap) if s.label == UNLABELED else 1
        for s in alphabet
    ]
    if supply is not None:
        limit = [min(lim, supply.get(s, 0)) for lim, s in zip(limit, alphabet)]
    out: list[tuple[int, ...]] = []
    truncated = False
    current: list[int] = []
    used_labels: set = set()

    def rec(start: int, load: Fraction):
        nonlocal truncated
        if budget is not None and len(out) >= budget:
            truncated = True
            return
        out.append(tuple(current))
        if len(current) >= cap:
            return
        for s in range(start, len(alphabet)):
            slot = alphabet[s]
            if load + slot.size > capacity:
                continue
            if slot.label != UNLABELED and slot.label in used_labels:
                continue
            if current.count(s) >= limit[s]:
                continue
            current.append(s)
            if slot.label != UNLABELED:
                used_labels.add(slot.label)
            rec(s, load + slot.size)
            current.pop()
            if slot.label != UNLABELED:
                used_labels.discard(slot.label)
            if truncated:
                return

    rec(0, Fraction(0))
    return PatternBook(alphabet, tuple(out), capacity, cap, not truncated)


class _OutOfBudget(Exception):
    pass


class AssignmentSearch:
    """Iterate pattern -> bin-count maps that use ``n_bins`` bins and match supply.

    Counts are tried from high to low for each pattern in book order, so the
    sequence is deterministic.  ``exhaustive`` turns false if the node budget
    stops the search early.
    """

    def __init__(
        self,
        book: PatternBook,
        supply: Mapping[Slot, int],
        n_bins: int,
        node_budget: int | None = None,
    ):
        self.book = book
        self.n_bins = n_bins
        self.node_budget = node_budget
        self.nodes = 0
        self.exhaustive = True
        self.need = [supply.get(s, 0) for s in book.alphabet]
        unknown = set(supply) - set(book.alphabet)
        if any(supply[s] for s in unknown):
            raise ValueError(f"supply has slots outside the alphabet: {sorted(unknown, key=slot_key)[:3]}")

    def __iter__(self) -> Iterator[dict[int, int]]:
        book = self.book
        nonempty = [p for p, pat in enumerate(book.patterns) if pat]
        empty = [p for p, pat in enumerate(book.patterns) if not pat]
        mult = [Counter(book.patterns[p]) for p in nonempty]
        n_slots = len(book.alphabet)
        last = [-1] * n_slots
        for k, m in enumerate(mult):
            for s in m:
                last[s] = k
        scale = math.lcm(book.capacity.denominator, *(s.size.denominator for s in book.alphabet))
        sizes = [int(s.size * scale) for s in book.alphabet]
        cap_scaled = int(book.capacity * scale)
        labeled = [s for s, slot in enumerate(book.alphabet) if slot.label != UNLABELED]
        by_label: dict = defaultdict(list)
        for s in labeled:
            by_label[book.alphabet[s].label].append(s)
        rem = list(self.need)
        if any(r and last[s] < 0 for s, r in enumerate(rem)):
            return
        if sum(rem) and not nonempty:
            return
        counts = [0] * len(nonempty)

        def tick():
            self.nodes += 1
            if self.node_budget is not None and self.nodes > self.node_budget:
                self.exhaustive = False
                raise _OutOfBudget

        def horizon(bins_left: int) -> int:
            """Last pattern index that may still be used, or -1 if the node is dead.

            Every slot with demand left must appear in some later pattern, and
            the demand must fit in the bins left by size, count and label.
            """
            total = n_items = 0
            first_last = len(nonempty)
            for s in range(n_slots):
                r = rem[s]
                if r:
                    total += r * sizes[s]
                    n_items += r
                    if last[s] < first_last:
                        first_last = last[s]
            if total > bins_left * cap_scaled or n_items > bins_left * book.cap:
                return -1
            for slots in by_label.values():
                if sum(rem[s] for s in slots) > bins_left:
                    return -1
            return first_last

        def rec(k: int, bins_left: int):
            tick()
            if not any(rem):
                if bins_left and not empty:
                    return
                out = {nonempty[j]: c for j, c in enumerate(counts) if c}
                if bins_left:
                    out[empty[0]] = bins_left
                yield out
                return
            # Recurse only on patterns that get a positive count; a zero count
            # is the step to the next j, so the depth stays below n_bins + 1.
            stop = horizon(bins_left)
            for j in range(k, stop + 1):
                m = mult[j]
                top = min([bins_left] + [rem[s] // c for s, c in m.items()])
                for c in range(top, 0, -1):
                    for s, v in m.items():
                        rem[s] -= c * v
                    counts[j] = c
                    yield from rec(j + 1, bins_left - c)
                    counts[j] = 0
                    for s, v in m.items():
                        rem[s] += c * v
                tick()

        try:
            yield from rec(0, self.n_bins)
        except _OutOfBudget:
            LOG.debug("assignment search stopped after %d nodes", self.nodes)


def enumerate_assignments(
    book: PatternBook,
    supply: Mapping[Slot, int],
    n_bins: int,
    budget: int | None = None,
) -> AssignmentSearch:
    return AssignmentSearch(book, supply, n_bins, budget)


def items_by_slot(rinst: RoundedInstance) -> dict[Slot, list[int]]:
    rounded = rinst.rounded
    out: dict[Slot, list[int]] = defaultdict(list)
    for i in sorted(rinst.labels):
        out[Slot(rounded[i], rinst.labels[i])].append(i)
    return out


def place_by_patterns(
    book: PatternBook, assignment: Mapping[int, int], rinst: RoundedInstance
) -> Packing:
    """Fill each bin's slots with matching items, lowest id first.

    Labeled slots only take items of that large group, so they never clash.
    Wildcard slots take any small-group item of the right rounded size and may
    put group-mates together; swapping repairs that.
    """
    pools = {s: list(reversed(ids)) for s, ids in items_by_slot(rinst).items()}
    bins: list[tuple[int, ...]] = []
    for p in sorted(assignment):
        for _ in range(assignment[p]):
            content = []
            for slot in book.slots(p):
                stack = pools.get(slot)
                if not stack:
                    raise ValueError(f"assignment asks for more {slot} items than exist")
                content.append(stack.pop())
            bins.append(tuple(sorted(content)))
    if any(pools.values()):
        raise ValueError("assignment leaves rounded items unplaced")
    return Packing(tuple(bins), "patterns")


def heuristic_placement(rinst: RoundedInstance, n_bins: int, cap: int) -> Packing | None:
    """First-Fit decreasing over rounded sizes, one item per large-group label per bin.

    Used when the assignment search budget runs out.  None if the items do not
    fit into ``n_bins`` bins this way.
    """
    rounded = rinst.rounded
    order = sorted(rinst.labels, key=lambda i: (-rounded[i], i))
    bins: list[list[int]] = [[] for _ in range(n_bins)]
    loads = [Fraction(0)] * n_bins
    labels: list[set] = [set() for _ in range(n_bins)]
    for i in order:
        s, lab = rounded[i], rinst.labels[i]
        for b in range(n_bins):
            if loads[b] + s > 1 or len(bins[b]) >= cap:
                continue
            if lab != UNLABELED and lab in labels[b]:
                continue
            bins[b].append(i)
            loads[b] += s
            labels[b].add(lab)
            break
        else:
            return None
    return Packing(tuple(tuple(sorted(b)) for b in bins), "patterns-ffd")


def bin_pattern(rinst: RoundedInstance, content) -> tuple[Slot, ...]:
    """Canonical slot multiset of the rounded items in a bin."""
    rounded = rinst.rounded
    return tuple(sorted((Slot(rounded[i], rinst.labels[i]) for i in content if i in rinst.labels), key=slot_key))


class SwappingFailed(RuntimeError):
    """A conflicting item has no good swap partner."""


@dataclass(frozen=True)
class SwapStats:
    swaps: int
    searches: int
    initial_conflicts: int


def conflict_pairs(group_of, bins) -> int:
    total = 0
    for content in bins:
        for c in Counter(group_of(i) for i in content).values():
            total += c * (c - 1) // 2
    return total


def swapping(tentative: Packing, rinst: RoundedInstance) -> tuple[Packing, SwapStats]:
    """Resolve same-group clashes by exchanging equal-size wildcard items.

    Scans the lowest conflicting bin, its lowest conflicting wildcard item
    ``l``, and the lowest-id partner ``y`` of equal rounded size in another
    bin such that neither item meets a group-mate after the exchange.  Each
    such swap strictly lowers the number of clashing pairs, so the loop ends.
    """
    base = rinst.base
    rounded = rinst.rounded
    group = [it.group for it in base.items]
    bins = [list(b) for b in tentative.bins]
    pos: dict[int, int] = {}
    counts: list[Counter] = []
    for b, content in enumerate(bins):
        counts.append(Counter(group[i] for i in content))
        for i in content:
            pos[i] = b
    partners: dict[Fraction, list[int]] = defaultdict(list)
    for i in sorted(i for i, lab in rinst.labels.items() if lab == UNLABELED and i in pos):
        partners[rounded[i]].append(i)
    conflicted = {b for b, c in enumerate(counts) if any(v > 1 for v in c.values())}
    initial = conflict_pairs(group.__getitem__, bins)
    swaps = searches = 0

    while conflicted:
        b = min(conflicted)
        cands = sorted(
            i for i in bins[b] if counts[b][group[i]] > 1 and rinst.labels.get(i) == UNLABELED
        )
        if not cands:
            raise SwappingFailed(f"bin {b} has a clash between labeled items")
        l = cands[0]
        gl = group[l]
        found = None
        for y in partners[rounded[l]]:
            c = pos[y]
            if c == b:
                continue
            searches += 1
            gy = group[y]
            if counts[b][gy] - (gy == gl) == 0 and counts[c][gl] - (gl == gy) == 0:
                found = y
                break
        if found is None:
            raise SwappingFailed(f"no good swap for item {l} in bin {b}")
        y, c = found, pos[found]
        gy = group[y]
        bins[b][bins[b].index(l)] = y
        bins[c][bins[c].index(y)] = l
        counts[b][gl] -= 1
        counts[b][gy] += 1
        counts[c][gy] -= 1
        counts[c][gl] += 1
        pos[l], pos[y] = c, b
        swaps += 1
        for x in (b, c):
            if any(v > 1 for v in counts[x].values()):
                conflicted.add(x)
            else:
                conflicted.discard(x)

    out = Packing(tuple(tuple(sorted(x)) for x in bins), tentative.source, tentative.core_bins)
    return out, SwapStats(swaps, searches, initial)
