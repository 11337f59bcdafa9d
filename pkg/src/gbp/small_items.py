"""Packing the small items around a fixed large/medium packing.

The phases, in order:

1. Optimal phase.  Bins whose free space f is positive but below eps are
   grouped into types (same pattern, same free space, same groups).  For
   each type the search guesses which groups contribute many non-negligible
   items, how many, which ones, and how they are laid out (t-patterns over
   shifted representatives).  Bins whose free space shrinks by a factor
   eps stay in play for the next round; there are ``alpha`` rounds.
2. Eviction.  Each bin still in play gives up its largest small item that
   is at least f/eps, unless that group has already lost eps*OPT items.
3. Partition.  The remaining items are split among types, plus one fresh
   type of ceil(eps*OPT) empty bins, by a vertex of the partition polytope.
   Items with fractional coordinates are discarded.
4. Greedy.  Each type receives ceil(2 eps |t|) extra bins and its items are
   packed bin by bin, one item per group, shrinking the choice until it fits.

Every guess that survives all phases is a candidate; the best of the first
few candidates is kept.  When none survives, every small item is discarded
and packed later by balanced coloring.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations, product
from typing import Iterator, Mapping, Sequence

from .classification import ClassParams
from .core import Instance
from .heuristics import balanced_coloring
from .lp import Infeasible, build_partition_polytope, find_vertex
from .patterns import AssignmentSearch, Slot, enumerate_patterns, slot_key
from .shifting import UNLABELED, RoundedInstance, linear_shift

LOG = logging.getLogger(__name__)

PADDING = -1


class GuessRejected(Exception):
    """A guess failed one of the phases (eviction, partition or greedy)."""


class GreedyFailure(GuessRejected):
    """Every group reached its last item and the bin still overflows."""


class _OutOfBudget(Exception):
    pass


@dataclass(frozen=True)
class SmallBudgets:
    enum_budget: int | None = 20_000
    alpha_override: int | None = None
    candidate_limit: int = 8
    assignment_budget: int | None = 20_000
    generic_objective: bool = True


@dataclass(frozen=True)
class BinState:
    """One bin during the small-item phases.

    ``free`` is 1 minus the rounded load of everything committed so far.
    ``groups`` holds groups of committed items other than small-group large
    items; ``wild_groups`` holds the groups of those large items.
    """

    content: tuple[int, ...]
    free: Fraction
    pattern: tuple
    origin: int
    groups: frozenset[int]
    wild_groups: frozenset[int]
    small: tuple[tuple[int, Fraction], ...] = ()

    @property
    def signature(self):
        return (self.pattern, self.free, tuple(sorted(self.groups)))


@dataclass(frozen=True)
class BinType:
    pattern: tuple
    free: Fraction
    groups: frozenset[int]
    members: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.members)


def compute_bin_types(bins: Sequence[BinState], which: Sequence[int] | None = None) -> list[BinType]:
    """Group bins (by index) into types of identical pattern, free space and groups."""
    which = range(len(bins)) if which is None else which
    by_sig: dict = {}
    for b in which:
        by_sig.setdefault(bins[b].signature, []).append(b)
    out = []
    for sig in sorted(by_sig, key=lambda s: by_sig[s][0]):
        st = bins[by_sig[sig][0]]
        out.append(BinType(st.pattern, st.free, st.groups, tuple(by_sig[sig])))
    return out


def initial_bins(inst: Instance, core: Sequence[Sequence[int]], rinst: RoundedInstance) -> list[BinState]:
    rounded = rinst.rounded
    out = []
    for b, content in enumerate(core):
        load = sum((rounded.get(i, inst.items[i].size) for i in content), Fraction(0))
        pattern = tuple(
            sorted(
                (Slot(rounded.get(i, inst.items[i].size), rinst.labels.get(i, inst.items[i].group)) for i in content),
                key=slot_key,
            )
        )
        wild = frozenset(inst.items[i].group for i in content if rinst.labels.get(i) == UNLABELED)
        groups = frozenset(inst.items[i].group for i in content if rinst.labels.get(i) != UNLABELED)
        out.append(BinState(tuple(content), 1 - load, pattern, b, groups, wild))
    return out


# greedy phase --------------------------------------------------------------


def greedy_pack(
    items: Sequence[int],
    size: Mapping[int, Fraction],
    group: Mapping[int, int],
    n_bins: int,
    capacity: Fraction,
) -> list[list[int]]:
    """Fill ``n_bins`` bins of ``capacity`` taking one item per group per bin.

    Groups are padded with size-0 dummies to ``n_bins`` items.  A bin starts
    from the largest remaining item of every group; while it overflows, the
    group whose current item is not its last and whose next item is smallest
    relative to it (largest drop, then lowest group id) moves one step down.
    """
    by_group: dict[int, list[int]] = defaultdict(list)
    for i in items:
        by_group[group[i]].append(i)
    order = sorted(by_group)
    if any(len(v) > n_bins for v in by_group.values()):
        raise GreedyFailure("a group has more items than bins")
    # None marks a dummy of size 0
    rem = {g: sorted(by_group[g], key=lambda i: (-size[i], i)) + [None] * (n_bins - len(by_group[g])) for g in order}

    def sz(i):
        return Fraction(0) if i is None else size[i]

    bins: list[list[int]] = []
    for _ in range(n_bins):
        ptr = {g: 0 for g in order}
        total = sum((sz(rem[g][0]) for g in order), Fraction(0))
        while total > capacity:
            best, best_drop = None, None
            for g in order:
                p = ptr[g]
                if p + 1 < len(rem[g]):
                    drop = sz(rem[g][p]) - sz(rem[g][p + 1])
                    if best_drop is None or drop > best_drop:
                        best, best_drop = g, drop
            if best is None:
                raise GreedyFailure(f"overflow {total} > {capacity} with every group at its last item")
            total -= best_drop
            ptr[best] += 1
        content = []
        for g in order:
            i = rem[g].pop(ptr[g])
            if i is not None:
                content.append(i)
        assert total <= capacity
        bins.append(sorted(content))
    return bins


# optimal phase ---------------------------------------------------------------


@dataclass
class _Counter:
    budget: int | None
    used: int = 0
    exhaustive: bool = True

    def tick(self):
        self.used += 1
        if self.budget is not None and self.used > self.budget:
            self.exhaustive = False
            raise _OutOfBudget


@dataclass(frozen=True)
class EnumOutcome:
    bins: tuple[BinState, ...]
    tight: frozenset[int]
    remaining: frozenset[int]
    pool: Mapping[int, str]
    rounds: int
    chain: tuple[frozenset[int], ...]


class _Context:
    def __init__(self, inst: Instance, params: ClassParams, budgets: SmallBudgets):
        self.inst = inst
        self.eps = params.epsilon
        self.opt = params.opt_guess
        self.budgets = budgets
        self.alpha = budgets.alpha_override if budgets.alpha_override is not None else math.floor(1 / self.eps) + 5
        self.pad_to = math.ceil(1 / self.eps**4)
        self.t_cap = math.floor(1 / self.eps**2)
        self.counter = _Counter(budgets.enum_budget)

    def size(self, i: int) -> Fraction:
        return self.inst.items[i].size

    def group(self, i: int) -> int:
        return self.inst.items[i].group


def _type_guesses(ctx: _Context, tb: list[int], bins: list[BinState], remaining: frozenset[int]):
    """Yield (per-bin placements, representative discards) for one type.

    ``tb`` lists bin indices (padding bins included).  Placements map a
    position in ``tb`` to [(item, rounded size), ...].
    """
    st = bins[tb[0]]
    f, n_t = st.free, len(tb)
    cands: dict[int, list[int]] = defaultdict(list)
    for i in sorted(remaining, key=lambda i: (-ctx.size(i), i)):
        if ctx.size(i) > ctx.eps**2 * f and ctx.group(i) not in st.groups:
            cands[ctx.group(i)].append(i)
    thr = max(1, math.ceil(ctx.eps**4 * n_t))
    eligible = sorted(g for g, v in cands.items() if len(v) >= thr)
    Q = max(1, math.floor(ctx.eps**3 * n_t))
    for k in range(len(eligible) + 1):
        for S in combinations(eligible, k):
            if not S:
                yield {}, {}
                continue
            count_ranges = [range(min(n_t, len(cands[g])), thr - 1, -1) for g in S]
            for counts in product(*count_ranges):
                window_ranges = [range(0, len(cands[g]) - c + 1) for g, c in zip(S, counts)]
                for starts in product(*window_ranges):
                    yield from _layouts(ctx, S, counts, starts, cands, f, n_t)


def _layouts(ctx, S, counts, starts, cands, f, n_t):
    rounded: dict[int, Fraction] = {}
    discards: dict[int, str] = {}
    by_slot: dict[Slot, list[int]] = defaultdict(list)
    for g, c, w in zip(S, counts, starts):
        chosen = cands[g][w:w + c]
        table = linear_shift(chosen, ctx.inst, max(1, math.floor(ctx.eps**3 * n_t)))
        discards.update({i: "representative" for i in table.discarded})
        for i in chosen:
            if i in table.rounded:
                rounded[i] = table.rounded[i]
                by_slot[Slot(table.rounded[i], g)].append(i)
    supply = {s: len(v) for s, v in by_slot.items()}
    if not supply:
        yield {}, discards
        return
    alphabet = tuple(sorted(supply, key=slot_key))
    book = enumerate_patterns(alphabet, ctx.t_cap, f, supply=supply)
    search = AssignmentSearch(book, supply, n_t, ctx.budgets.assignment_budget)
    for assignment in search:
        ctx.counter.tick()
        pools = {s: list(reversed(v)) for s, v in by_slot.items()}
        placements: dict[int, list[tuple[int, Fraction]]] = {}
        pos = 0
        for p in sorted(assignment):
            slots = book.slots(p)
            for _ in range(assignment[p]):
                if slots:
                    placements[pos] = [(pools[s].pop(), s.size) for s in slots]
                pos += 1
        yield placements, discards


def recursive_enum(
    ctx: _Context, bins: list[BinState], small_ids: Sequence[int]
) -> Iterator[EnumOutcome]:
    """Depth-first over rounds and types; yields one outcome per full guess."""
    eps = ctx.eps
    E0 = frozenset(b for b, st in enumerate(bins) if 0 < st.free < eps)

    def rounds(h, bins, E, remaining, pool, chain):
        if h == ctx.alpha or not E:
            ctx.counter.tick()
            yield EnumOutcome(tuple(bins), E if h == ctx.alpha else frozenset(), remaining, pool, h, chain)
            return
        types = compute_bin_types(bins, sorted(E))
        yield from per_type(h, 0, types, bins, E, remaining, pool, frozenset(), chain)

    def per_type(h, ti, types, bins, E, remaining, pool, nextE, chain):
        if ti == len(types):
            assert nextE <= E
            yield from rounds(h + 1, bins, nextE, remaining, pool, chain + (nextE,))
            return
        t = types[ti]
        tb = list(t.members)
        st = bins[tb[0]]
        n_pad = max(0, ctx.pad_to - len(tb))
        pad_state = replace(st, content=(), origin=PADDING, small=(), wild_groups=frozenset())
        view = bins + [pad_state] * n_pad
        tb_all = tb + list(range(len(bins), len(bins) + n_pad))
        for placements, discards in _type_guesses(ctx, tb_all, view, remaining):
            ctx.counter.tick()
            new_bins = list(bins)
            new_E = set(nextE)
            new_pool = dict(pool)
            new_pool.update(discards)
            used = set(discards)
            for pos, placed in sorted(placements.items()):
                b = tb_all[pos]
                base = view[b]
                content = list(base.content)
                small = list(base.small)
                groups = set(base.groups)
                load = Fraction(0)
                for i, r in placed:
                    used.add(i)
                    if ctx.group(i) in base.wild_groups:
                        new_pool[i] = "conflict"
                        continue
                    content.append(i)
                    small.append((i, r))
                    groups.add(ctx.group(i))
                    load += r
                new = replace(
                    base, content=tuple(sorted(content)), free=base.free - load,
                    groups=frozenset(groups), small=tuple(small),
                )
                if b >= len(bins):
                    b = len(new_bins)
                    new_bins.append(new)
                else:
                    new_bins[b] = new
                if 0 < new.free < eps * base.free:
                    new_E.add(b)
            yield from per_type(
                h, ti + 1, types, new_bins, E, remaining - used, new_pool, frozenset(new_E), chain
            )

    yield from rounds(0, list(bins), E0, frozenset(small_ids), {}, (E0,))


# eviction, partition, greedy ---------------------------------------------------


def evict_phase(
    ctx: _Context, bins: list[BinState], tight: frozenset[int], evicted_per_group: Counter
) -> tuple[list[int], list[BinState]]:
    """Remove one large-enough small item from each bin still in play."""
    bins = list(bins)
    evicted = []
    for b in sorted(tight):
        st = bins[b]
        limit = st.free / ctx.eps
        eligible = [
            (i, r) for i, r in st.small
            if ctx.size(i) >= limit and evicted_per_group[ctx.group(i)] < ctx.eps * ctx.opt
        ]
        if not eligible:
            raise GuessRejected(f"bin {b} has no evictable item")
        i, r = min(eligible, key=lambda ir: (-ctx.size(ir[0]), ir[0]))
        evicted_per_group[ctx.group(i)] += 1
        evicted.append(i)
        remaining_small = tuple(x for x in st.small if x[0] != i)
        groups = st.groups - {ctx.group(i)}
        bins[b] = replace(
            st, content=tuple(x for x in st.content if x != i), free=st.free + r,
            small=remaining_small, groups=groups,
        )
        assert bins[b].free >= st.free / ctx.eps
    return evicted, bins


@dataclass(frozen=True)
class TypePartition:
    types: tuple[BinType, ...]
    assigned: Mapping[int, tuple[int, ...]]
    fractional: tuple[int, ...]


def partition_items(
    ctx: _Context, types: Sequence[BinType], items: Sequence[int]
) -> TypePartition:
    """Split ``items`` among ``types`` through a polytope vertex."""
    items = sorted(items)
    occupied = {}
    for t, bt in enumerate(types):
        for g in bt.groups:
            occupied[(g, t)] = bt.count
    P = build_partition_polytope(
        items,
        [ctx.size(i) for i in items],
        [ctx.group(i) for i in items],
        [bt.count for bt in types],
        [bt.free for bt in types],
        ctx.eps,
        occupied,
    )
    try:
        v = find_vertex(P, ctx.budgets.generic_objective)
    except Infeasible as exc:
        raise GuessRejected(str(exc)) from exc
    frac = set(v.fractional_items())
    assigned: dict[int, list[int]] = defaultdict(list)
    for (k, t), x in zip(P.variables(), v.x):
        if x == 1 and k not in frac:
            assigned[t].append(items[k])
    out = {t: tuple(sorted(assigned.get(t, ()))) for t in range(len(types))}
    _check_partition(ctx, types, out)
    return TypePartition(tuple(types), out, tuple(sorted(items[k] for k in frac)))


def _check_partition(ctx: _Context, types: Sequence[BinType], assigned: Mapping[int, Sequence[int]]):
    for t, bt in enumerate(types):
        members = assigned[t]
        per_group = Counter(ctx.group(i) for i in members)
        for g, c in per_group.items():
            assert c <= bt.count - (bt.count if g in bt.groups else 0), "cardinality condition violated"
        assert all(ctx.size(i) <= ctx.eps * bt.free for i in members), "size condition violated"
        assert sum((ctx.size(i) for i in members), Fraction(0)) <= bt.free * bt.count, "capacity violated"


@dataclass
class SmallResult:
    core: list[tuple[int, ...]]
    extras: list[tuple[tuple[int, ...], str]]
    pool: dict[int, str]
    stats: dict = field(default_factory=dict)

    def cost(self, inst: Instance) -> tuple[int, int]:
        pool_bins = balanced_coloring(inst, sorted(self.pool)).n_bins if self.pool else 0
        extra = sum(1 for b, _ in self.extras if b)
        return (extra + pool_bins, len(self.pool))


def _finish(ctx: _Context, outcome: EnumOutcome, n_core: int) -> SmallResult:
    pool = dict(outcome.pool)
    evicted, bins = evict_phase(ctx, list(outcome.bins), outcome.tight, Counter())
    pool.update({i: "eviction" for i in evicted})

    kept = [b for b, st in enumerate(bins) if st.origin != PADDING or st.content]
    types = compute_bin_types(bins, kept)
    spare = math.ceil(ctx.eps * ctx.opt)
    spare_type = BinType((), Fraction(1), frozenset(), ())
    all_types = types + ([replace(spare_type, members=tuple(range(-spare, 0)))] if spare else [])
    remaining = sorted(outcome.remaining - set(pool))
    part = partition_items(ctx, all_types, remaining)
    pool.update({i: "fractional" for i in part.fractional})

    contents = {b: list(bins[b].content) for b in kept}
    wild = {b: bins[b].wild_groups for b in kept}
    extras: list[tuple[list[int], str]] = []
    stats = Counter()
    for t, bt in enumerate(all_types):
        members = [b for b in bt.members if b >= 0]
        n_spare = bt.count - len(members)
        n_slack = math.ceil(2 * ctx.eps * bt.count)
        n_bins = bt.count + n_slack
        packed = greedy_pack(
            part.assigned[t],
            {i: ctx.size(i) for i in part.assigned[t]},
            {i: ctx.group(i) for i in part.assigned[t]},
            n_bins,
            bt.free,
        )
        for k, items in enumerate(packed):
            if k < len(members):
                b = members[k]
                for i in items:
                    if ctx.group(i) in wild[b]:
                        pool[i] = "conflict"
                        stats["greedy_conflicts"] += 1
                    else:
                        contents[b].append(i)
            else:
                cause = "spare_type" if k < len(members) + n_spare else "greedy_slack"
                extras.append((items, cause))
    core = [tuple(sorted(contents[b])) for b in kept if bins[b].origin != PADDING]
    assert len(core) == n_core
    for b in kept:
        if bins[b].origin == PADDING:
            extras.append((contents[b], "padding"))
    stats.update(
        evictions=len(evicted),
        fractional=len(part.fractional),
        types=len(all_types),
        rounds=outcome.rounds,
    )
    return SmallResult(
        core,
        [(tuple(sorted(b)), cause) for b, cause in extras if b],
        pool,
        dict(stats),
    )


def pack_small_items(
    inst: Instance,
    small_ids: Sequence[int],
    core: Sequence[Sequence[int]],
    rinst: RoundedInstance,
    params: ClassParams,
    budgets: SmallBudgets = SmallBudgets(),
) -> SmallResult:
    """Add ``small_ids`` to the ``core`` bins, with extra bins and discards.

    The core bins keep their order.  Never fails: without a surviving guess
    every small item is discarded with cause ``small_fallback``.
    """
    ctx = _Context(inst, params, budgets)
    bins = initial_bins(inst, core, rinst)
    if not small_ids:
        return SmallResult([tuple(b) for b in core], [], {}, {"exhaustive": True, "fallback": False})
    best: SmallResult | None = None
    tried = succeeded = 0
    try:
        for outcome in recursive_enum(ctx, bins, small_ids):
            tried += 1
            try:
                res = _finish(ctx, outcome, len(core))
            except GuessRejected as exc:
                LOG.debug("small-item guess rejected: %s", exc)
                continue
            succeeded += 1
            if best is None or res.cost(inst) < best.cost(inst):
                best = res
            if succeeded >= budgets.candidate_limit:
                break
    except _OutOfBudget:
        LOG.debug("small-item enumeration budget exhausted after %d guesses", ctx.counter.used)
    info = {"guesses": ctx.counter.used, "tried": tried, "succeeded": succeeded, "exhaustive": ctx.counter.exhaustive}
    if best is None:
        info["fallback"] = True
        return SmallResult([tuple(b) for b in core], [], {i: "small_fallback" for i in small_ids}, info)
    best.stats.update(info, fallback=False)
    return best
