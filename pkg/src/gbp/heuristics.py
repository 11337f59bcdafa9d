"""Polynomial baselines: balanced coloring and First-Fit with conflicts."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterable, Sequence

from .core import CAPACITY, Instance, Packing


def color_classes(inst: Instance, ids: Iterable[int] | None = None) -> list[list[int]]:
    """Split items into color classes holding at most one item per group.

    The first group (lowest index) seeds one color per item; colors are then
    padded to the largest group cardinality.  Every later group, largest items
    first, sends each item to the lightest color that lacks the group (lowest
    color index on ties).
    """
    ids = list(range(inst.n_items)) if ids is None else list(ids)
    by_group: dict[int, list[int]] = {}
    for i in ids:
        by_group.setdefault(inst.items[i].group, []).append(i)
    if not by_group:
        return []
    order = sorted(by_group)
    vmax = max(len(v) for v in by_group.values())
    first = by_group[order[0]]
    colors: list[list[int]] = [[i] for i in first] + [[] for _ in range(vmax - len(first))]
    totals = [inst.items[i].size for i in first] + [Fraction(0)] * (vmax - len(first))

    for g in order[1:]:
        members = sorted(by_group[g], key=lambda i: (-inst.items[i].size, i))
        taken: set[int] = set()
        for i in members:
            c = min((c for c in range(vmax) if c not in taken), key=lambda c: (totals[c], c))
            taken.add(c)
            colors[c].append(i)
            totals[c] += inst.items[i].size
    for color in colors:
        groups = [inst.items[i].group for i in color]
        assert len(groups) == len(set(groups)), "color class holds a group twice"
    return colors


def _first_fit_plain(inst: Instance, ids: Sequence[int]) -> list[list[int]]:
    bins: list[list[int]] = []
    loads: list[Fraction] = []
    for i in ids:
        s = inst.items[i].size
        for b, load in enumerate(loads):
            if load + s <= CAPACITY:
                bins[b].append(i)
                loads[b] += s
                break
        else:
            bins.append([i])
            loads.append(s)
    return bins


def balanced_coloring(inst: Instance, ids: Iterable[int] | None = None) -> Packing:
    """Color items into conflict-free classes, then First-Fit each class.

    Uses at most ceil(max{2S, S + v_max}) bins.  Within a color, First-Fit
    follows the color's insertion order.
    """
    bins: list[list[int]] = []
    for color in color_classes(inst, ids):
        bins.extend(_first_fit_plain(inst, color))
    return Packing(tuple(tuple(b) for b in bins), "balanced")


def item_order(inst: Instance, order="input", seed: int | None = None) -> list[int]:
    """Resolve an order policy to a list of item ids.

    ``order`` is ``"input"``, ``"decreasing"``, ``"random"`` or an explicit
    sequence of ids.
    """
    ids = list(range(inst.n_items))
    if not isinstance(order, str):
        explicit = list(order)
        if sorted(explicit) != ids:
            raise ValueError("explicit order must be a permutation of item ids")
        return explicit
    if order == "input":
        return ids
    if order == "decreasing":
        return sorted(ids, key=lambda i: (-inst.items[i].size, i))
    if order == "random":
        random.Random(seed).shuffle(ids)
        return ids
    raise ValueError(f"unknown order policy {order!r}")


def first_fit_conflicts(
    inst: Instance,
    order="input",
    seed: int | None = None,
    initial: Sequence[Sequence[int]] = (),
) -> Packing:
    """First-Fit where a bin accepts an item only if it has room and no group-mate.

    ``initial`` optionally pre-loads bins; its items are skipped in ``order``.
    """
    bins = [list(b) for b in initial]
    loads = [sum((inst.items[i].size for i in b), Fraction(0)) for b in bins]
    groups = [{inst.items[i].group for i in b} for b in bins]
    placed = {i for b in bins for i in b}
    for i in item_order(inst, order, seed):
        if i in placed:
            continue
        it = inst.items[i]
        for b in range(len(bins)):
            if loads[b] + it.size <= CAPACITY and it.group not in groups[b]:
                break
        else:
            b = len(bins)
            bins.append([])
            loads.append(Fraction(0))
            groups.append(set())
        bins[b].append(i)
        loads[b] += it.size
        groups[b].add(it.group)
    name = order if isinstance(order, str) else "custom"
    return Packing(tuple(tuple(b) for b in bins), f"firstfit-{name}")
