"""Linear shifting: round sorted size classes up to their maximum, drop the first.

Two flavours feed the scheme.  Large groups are shifted one group at a time,
so rounding never mixes groups.  Large items of small groups are shifted
together as one table that ignores groups; it also drops its last class and
the resulting conflicts are repaired later by swapping equal-size items.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Mapping

from .classification import ClassParams, GroupClasses, ItemClasses
from .core import Instance, InstanceError, Item, Packing, bin_load

UNLABELED = "u"


class ShiftError(ValueError):
    """Raised when a shift cannot be formed (e.g. class size rounds to 0)."""


@dataclass(frozen=True)
class ShiftClass:
    members: tuple[int, ...]
    rounded: Fraction


@dataclass(frozen=True)
class ShiftTable:
    scope: tuple[int, ...]
    Q: int
    classes: tuple[ShiftClass, ...]
    discarded: frozenset[int]
    rounded: Mapping[int, Fraction]
    groups: Mapping[int, int] = field(default_factory=dict)

    def class_of(self, item_id: int) -> int:
        for r, c in enumerate(self.classes):
            if item_id in c.members:
                return r
        raise KeyError(item_id)


def linear_shift(
    ids: Iterable[int],
    sizes,
    Q: int,
    discard_last: bool = False,
    groups: Mapping[int, int] | None = None,
) -> ShiftTable:
    """Sort by (-size, id), cut into classes of max(Q, 1), round each up to its max.

    ``sizes`` is an :class:`Instance` or an id -> size mapping.  Class 1 is
    discarded, and with ``discard_last`` the final class as well.
    """
    size_of = (lambda i: sizes.items[i].size) if isinstance(sizes, Instance) else sizes.__getitem__
    order = sorted(set(ids), key=lambda i: (-size_of(i), i))
    q = max(Q, 1)
    classes = []
    for start in range(0, len(order), q):
        members = tuple(order[start:start + q])
        classes.append(ShiftClass(members, size_of(members[0])))
    discarded: set[int] = set()
    if classes:
        discarded.update(classes[0].members)
        if discard_last:
            discarded.update(classes[-1].members)
    rounded = {i: c.rounded for c in classes for i in c.members if i not in discarded}
    return ShiftTable(tuple(order), q, tuple(classes), frozenset(discarded), rounded, dict(groups or {}))


@dataclass(frozen=True)
class RoundedInstance:
    """An instance whose covered items carry rounded sizes.

    ``labels`` maps each surviving covered id to its large-group id, or to
    ``"u"`` for merged small-group large items.  ``pool`` maps discarded ids to
    the reason they were set aside.
    """

    base: Instance
    tables: tuple[ShiftTable, ...] = ()
    labels: Mapping[int, object] = field(default_factory=dict)
    pool: Mapping[int, str] = field(default_factory=dict)

    @cached_property
    def rounded(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for t in self.tables:
            out.update(t.rounded)
        return out

    def effective_size(self, item_id: int) -> Fraction:
        r = self.rounded.get(item_id)
        return self.base.items[item_id].size if r is None else r

    def covered(self) -> list[int]:
        """Surviving rounded ids, in id order."""
        return sorted(self.labels)

    def compose(self, other: "RoundedInstance") -> "RoundedInstance":
        if other.base is not self.base:
            raise ValueError("cannot compose roundings of different instances")
        return RoundedInstance(
            self.base,
            self.tables + other.tables,
            {**self.labels, **other.labels},
            {**self.pool, **other.pool},
        )

    def as_instance(self, ids: Iterable[int] | None = None) -> tuple[Instance, list[int]]:
        """Dense instance of the non-discarded items at effective sizes.

        Returns the instance and the dense-id -> base-id map.
        """
        if ids is None:
            ids = [i for i in range(self.base.n_items) if i not in self.pool]
        rounded = self.rounded
        tmp = Instance(
            tuple(
                Item(it.id, rounded.get(it.id, it.size), it.group, it.dummy) for it in self.base.items
            ),
            self.base.n_groups,
            self.base.name,
        )
        return tmp.subinstance(ids)

    def distinct_sizes(self) -> int:
        return len(set(self.rounded.values()))


def distinct_size_bound(params: ClassParams) -> Fraction:
    e, k = params.epsilon, params.k
    return 2 / e ** (k + 3) + 2 / e ** (5 * k + 9)


def large_group_Q(params: ClassParams) -> int:
    return math.floor(params.epsilon ** (2 * params.k + 4) * params.opt_guess)


def swap_Q(params: ClassParams) -> int:
    return math.floor(2 * params.epsilon * params.opt_guess)


def shift_large_groups(
    inst: Instance, classes: ItemClasses, groups: GroupClasses, params: ClassParams
) -> RoundedInstance:
    """One shift table per large group over its large and medium items."""
    Q = large_group_Q(params)
    heavy = classes.large | classes.medium
    members: dict[int, list[int]] = {g: [] for g in groups.large_groups}
    for i in sorted(heavy):
        g = inst.items[i].group
        if g in members:
            members[g].append(i)
    tables, labels, pool = [], {}, {}
    for g in sorted(members):
        t = linear_shift(members[g], inst, Q)
        tables.append(t)
        labels.update({i: g for i in t.rounded})
        pool.update({i: "shifting" for i in t.discarded})
    return RoundedInstance(inst, tuple(tables), labels, pool)


def shift_swap_small_groups(
    inst: Instance, classes: ItemClasses, groups: GroupClasses, params: ClassParams
) -> RoundedInstance:
    """A single group-oblivious table over large items of small groups.

    Every surviving class has exactly Q = floor(2 eps OPT) members because the
    first and the (possibly short) last class are both discarded.
    """
    ids = sorted(i for i in classes.large if inst.items[i].group in groups.small_groups)
    if not ids:
        return RoundedInstance(inst)
    Q = swap_Q(params)
    if Q < 1:
        raise ShiftError(f"class size floor(2*eps*OPT) is 0 for opt_guess={params.opt_guess}")
    t = linear_shift(ids, inst, Q, discard_last=True, groups={i: inst.items[i].group for i in ids})
    labels = {i: UNLABELED for i in t.rounded}
    pool = {i: "shifting" for i in t.discarded}
    return RoundedInstance(inst, (t,), labels, pool)


def discard_small_group_mediums(
    inst: Instance, classes: ItemClasses, groups: GroupClasses
) -> RoundedInstance:
    pool = {i: "medium_small" for i in sorted(classes.medium) if inst.items[i].group in groups.small_groups}
    return RoundedInstance(inst, (), {}, pool)


def round_instance(
    inst: Instance, classes: ItemClasses, groups: GroupClasses, params: ClassParams
) -> RoundedInstance:
    """Both shifts plus the small-group medium discard, composed."""
    r = (
        discard_small_group_mediums(inst, classes, groups)
        .compose(shift_large_groups(inst, classes, groups, params))
        .compose(shift_swap_small_groups(inst, classes, groups, params))
    )
    assert r.distinct_sizes() <= distinct_size_bound(params), "too many distinct rounded sizes"
    return r


def shift_each_group(inst: Instance, Q: int) -> RoundedInstance:
    """Shift every group separately over all its items (a conflict-safe rounding)."""
    tables, labels, pool = [], {}, {}
    for g, ids in enumerate(inst.groups()):
        t = linear_shift(ids, inst, Q)
        tables.append(t)
        labels.update({i: g for i in t.rounded})
        pool.update({i: "shifting" for i in t.discarded})
    return RoundedInstance(inst, tuple(tables), labels, pool)


def unround(rounded_packing: Packing, rinst: RoundedInstance) -> Packing:
    """Map a packing at rounded sizes back to original sizes.

    Every rounded item stands for itself, so ids carry over unchanged: each
    class-r original sits where a class-r rounded slot was.  The packing must
    hold every surviving rounded item exactly once and no discarded item; the
    function also checks that no bin gets heavier.
    """
    base = rinst.base
    seen = [i for b in rounded_packing.bins for i in b]
    if len(seen) != len(set(seen)):
        raise InstanceError("rounded packing repeats an item")
    if any(i in rinst.pool for i in seen):
        raise InstanceError("rounded packing holds a discarded item")
    if not set(rinst.labels) <= set(seen):
        raise InstanceError("rounded packing misses some rounded items")
    for content in rounded_packing.bins:
        original = bin_load(base, content)
        rounded = sum((rinst.effective_size(i) for i in content), Fraction(0))
        assert original <= rounded, "unrounding increased a bin load"
    return Packing(rounded_packing.bins, rounded_packing.source, rounded_packing.core_bins)
