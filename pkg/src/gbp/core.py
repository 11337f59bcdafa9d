"""Instances, packings and feasibility checking for group bin packing.

All sizes are :class:`fractions.Fraction` values.  Capacity checks are exact,
so a bin filled to exactly 1 is feasible and a bin at 1 + 1/10**9 is not.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

LOG = logging.getLogger(__name__)

Rational = Fraction

CAPACITY = Fraction(1)


class InstanceError(ValueError):
    """Raised for malformed instances or packings."""


def parse_size(value) -> Fraction:
    """Convert ``"p/q"``, a decimal string, an int or a Fraction exactly.

    Floats are accepted through their shortest ``repr``, so ``0.1`` becomes
    ``1/10`` rather than the binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InstanceError(f"invalid size {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InstanceError(f"invalid size {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InstanceError(f"invalid size {value!r}") from exc
    raise InstanceError(f"invalid size {value!r}")


def format_size(size: Fraction) -> str:
    if size.denominator == 1:
        return str(size.numerator)
    return f"{size.numerator}/{size.denominator}"


@dataclass(frozen=True)
class Item:
    id: int
    size: Fraction
    group: int
    dummy: bool = False


@dataclass(frozen=True)
class Instance:
    items: tuple[Item, ...]
    n_groups: int
    name: str | None = None
    seed: int | None = None

    @property
    def n_items(self) -> int:
        return len(self.items)

    def size(self, item_id: int) -> Fraction:
        return self.items[item_id].size

    def group(self, item_id: int) -> int:
        return self.items[item_id].group

    def groups(self) -> list[list[int]]:
        """Item ids per group, in id order."""
        out: list[list[int]] = [[] for _ in range(self.n_groups)]
        for it in self.items:
            out[it.group].append(it.id)
        return out

    def subinstance(self, ids: Iterable[int]) -> tuple["Instance", list[int]]:
        """Restrict to ``ids``; returns the dense instance and new->old id map.

        Group indices are compacted as well, preserving their relative order.
        """
        ids = sorted(set(ids))
        used_groups = sorted({self.items[i].group for i in ids})
        gmap = {g: k for k, g in enumerate(used_groups)}
        items = tuple(
            Item(k, self.items[i].size, gmap[self.items[i].group], self.items[i].dummy)
            for k, i in enumerate(ids)
        )
        return Instance(items, len(used_groups), self.name), ids


@dataclass(frozen=True)
class Packing:
    """Bins of item ids.  ``bins[core_bins:]`` are the marked extra bins."""

    bins: tuple[tuple[int, ...], ...]
    source: str = ""
    core_bins: int | None = None

    def __post_init__(self):
        bins = tuple(tuple(b) for b in self.bins)
        object.__setattr__(self, "bins", bins)
        if self.core_bins is None:
            object.__setattr__(self, "core_bins", len(bins))
        elif not 0 <= self.core_bins <= len(bins):
            raise InstanceError(f"core_bins={self.core_bins} outside [0, {len(bins)}]")

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def extra_bins(self) -> int:
        return len(self.bins) - self.core_bins

    @property
    def discarded(self) -> list[int]:
        return sorted(i for b in self.bins[self.core_bins:] for i in b)

    def without_empty(self) -> "Packing":
        core = [b for b in self.bins[: self.core_bins] if b]
        extra = [b for b in self.bins[self.core_bins:] if b]
        return Packing(tuple(core + extra), self.source, len(core))


@dataclass(frozen=True)
class Violation:
    bin: int | None
    kind: str  # capacity | conflict | duplicate | missing | unknown
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "violations": [
                {"bin": v.bin, "kind": v.kind, "detail": v.detail} for v in self.violations
            ],
        }


def validate_instance(raw) -> Instance:
    """Normalize an :class:`Instance` or its JSON dict form.

    Ids are densified by sorting.  Sizes must lie in [0, 1]; every group index
    in ``range(n_groups)`` must be used.
    """
    if isinstance(raw, Instance):
        records = [(it.id, it.size, it.group, it.dummy) for it in raw.items]
        n_groups, name, seed = raw.n_groups, raw.name, raw.seed
    elif isinstance(raw, Mapping):
        try:
            n_groups = int(raw["n_groups"])
            records = [
                (int(r["id"]), parse_size(r["size"]), int(r["group"]), bool(r.get("dummy", False)))
                for r in raw["items"]
            ]
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"malformed instance: {exc}") from exc
        name, seed = raw.get("name"), raw.get("seed")
    else:
        raise InstanceError(f"cannot build an instance from {type(raw).__name__}")

    seen: set[int] = set()
    for item_id, size, group, dummy in records:
        if item_id in seen:
            raise InstanceError(f"duplicate id {item_id}")
        seen.add(item_id)
        if not 0 <= size <= 1:
            raise InstanceError(f"item {item_id}: size {size} outside [0,1]")
        if not 0 <= group < n_groups:
            raise InstanceError(f"item {item_id}: group {group} outside [0,{n_groups})")
        if size == 0 and not dummy:
            LOG.warning("item %d has size 0 but is not marked dummy", item_id)
    used = {g for _, _, g, _ in records}
    missing = sorted(set(range(n_groups)) - used)
    if missing:
        raise InstanceError(f"group index gap: groups {missing[:5]} have no items")

    records.sort(key=lambda r: r[0])
    items = tuple(Item(k, size, group, dummy) for k, (_, size, group, dummy) in enumerate(records))
    return Instance(items, n_groups, name, seed)


def make_instance(groups: Sequence[Sequence], name: str | None = None) -> Instance:
    """Build an instance from per-group size lists (ids assigned in order)."""
    items = []
    for g, sizes in enumerate(groups):
        for s in sizes:
            items.append(Item(len(items), parse_size(s), g))
    return validate_instance(Instance(tuple(items), len(groups), name))


def total_size(inst: Instance) -> Fraction:
    return sum((it.size for it in inst.items), Fraction(0))


def max_group_cardinality(inst: Instance) -> int:
    counts = [0] * inst.n_groups
    for it in inst.items:
        counts[it.group] += 1
    return max(counts, default=0)


def lower_bound(inst: Instance) -> int:
    """max(ceil(S), v_max); every feasible packing uses at least this many bins."""
    return max(math.ceil(total_size(inst)), max_group_cardinality(inst))


def upper_bound(inst: Instance) -> int:
    """ceil(max{2S, S + v_max}), the balanced coloring guarantee."""
    s = total_size(inst)
    return math.ceil(max(2 * s, s + max_group_cardinality(inst)))


def bin_load(inst: Instance, bin_ids: Iterable[int]) -> Fraction:
    return sum((inst.items[i].size for i in bin_ids), Fraction(0))


def check_packing(inst: Instance, p: Packing) -> FeasibilityReport:
    """List every capacity, conflict, duplicate and missing-item violation."""
    violations: list[Violation] = []
    where: dict[int, int] = {}
    for b, content in enumerate(p.bins):
        load = Fraction(0)
        groups: dict[int, int] = {}
        for i in content:
            if not 0 <= i < inst.n_items:
                violations.append(Violation(b, "unknown", f"item {i} not in instance"))
                continue
            if i in where:
                violations.append(Violation(b, "duplicate", f"item {i} also in bin {where[i]}"))
                continue
            where[i] = b
            it = inst.items[i]
            load += it.size
            if it.group in groups:
                violations.append(
                    Violation(b, "conflict", f"items {groups[it.group]} and {i} share group {it.group}")
                )
            else:
                groups[it.group] = i
        if load > CAPACITY:
            violations.append(Violation(b, "capacity", f"load {format_size(load)} > 1"))
    for it in inst.items:
        if it.id not in where:
            violations.append(Violation(None, "missing", f"item {it.id} not packed"))
    return FeasibilityReport(tuple(violations))


def pad_dummy_items(inst: Instance, m: int) -> Instance:
    """Add size-0 dummies so every group has exactly ``m`` items."""
    vmax = max_group_cardinality(inst)
    if m < vmax:
        raise InstanceError(f"m={m} is below v_max={vmax}")
    counts = [0] * inst.n_groups
    for it in inst.items:
        counts[it.group] += 1
    items = list(inst.items)
    for g in range(inst.n_groups):
        for _ in range(m - counts[g]):
            items.append(Item(len(items), Fraction(0), g, dummy=True))
    return replace(inst, items=tuple(items))


def strip_dummies(inst: Instance, p: Packing) -> Packing:
    """Drop dummy ids from a packing (and any bins left empty)."""
    core, extra = [], []
    for b, content in enumerate(p.bins):
        kept = tuple(i for i in content if not inst.items[i].dummy)
        if kept:
            (core if b < p.core_bins else extra).append(kept)
    return Packing(tuple(core + extra), p.source, len(core))


# JSON --------------------------------------------------------------------


def instance_to_dict(inst: Instance) -> dict:
    out: dict = {"n_groups": inst.n_groups}
    if inst.name is not None:
        out["name"] = inst.name
    if inst.seed is not None:
        out["seed"] = inst.seed
    out["items"] = []
    for it in inst.items:
        rec = {"id": it.id, "size": format_size(it.size), "group": it.group}
        if it.dummy:
            rec["dummy"] = True
        out["items"].append(rec)
    return out


def packing_to_dict(p: Packing) -> dict:
    out = {"core_bins": p.core_bins, "bins": [list(b) for b in p.bins]}
    if p.source:
        out["source"] = p.source
    return out


def packing_from_dict(d: Mapping) -> Packing:
    try:
        bins = tuple(tuple(int(i) for i in b) for b in d["bins"])
        core = d.get("core_bins")
        return Packing(bins, d.get("source", ""), None if core is None else int(core))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed packing: {exc}") from exc


def _load_json(path) -> dict:
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def read_instance(path) -> Instance:
    return validate_instance(_load_json(path))


def read_packing(path) -> Packing:
    return packing_from_dict(_load_json(path))


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")


def bins_from_groups(inst: Instance, bins: Iterable[Iterable[int]]) -> list[dict[int, int]]:
    """Per-bin group -> item map; handy for conflict lookups."""
    out = []
    for content in bins:
        d: dict[int, int] = {}
        for i in content:
            d[inst.items[i].group] = i
        out.append(d)
    return out


def group_counts(inst: Instance, ids: Iterable[int]) -> dict[int, int]:
    counts: dict[int, int] = defaultdict(int)
    for i in ids:
        counts[inst.items[i].group] += 1
    return dict(counts)
