"""Guess range, threshold selection and item/group classes for the scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import Instance, lower_bound, parse_size, total_size, upper_bound


class NoQualifyingK(ValueError):
    """No threshold index has a light enough band; the guess is below ceil(S)."""


def parse_epsilon(value, strict: bool = True) -> Fraction:
    """Parse epsilon; ``strict`` demands (0, 1/2), otherwise (0, 1)."""
    eps = parse_size(value)
    if strict and not 0 < eps < Fraction(1, 2):
        raise ValueError(f"epsilon must lie in (0, 1/2), got {eps}")
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    return eps


def k_max(epsilon: Fraction) -> int:
    return math.ceil(1 / epsilon**2)


@dataclass(frozen=True)
class ClassParams:
    epsilon: Fraction
    opt_guess: int
    k: int

    @property
    def small_below(self) -> Fraction:
        """Items strictly below this size are small."""
        return self.epsilon ** (self.k + 1)

    @property
    def large_from(self) -> Fraction:
        """Items at or above this size are large."""
        return self.epsilon**self.k

    @property
    def group_threshold(self) -> Fraction:
        return self.epsilon ** (self.k + 2) * self.opt_guess

    @property
    def max_large_groups(self) -> Fraction:
        return 1 / self.epsilon ** (2 * self.k + 3)

    @property
    def slot_cap(self) -> int:
        return math.floor(1 / self.epsilon ** (self.k + 1))


@dataclass(frozen=True)
class ItemClasses:
    small: frozenset[int]
    medium: frozenset[int]
    large: frozenset[int]

    def of(self, item_id: int) -> str:
        if item_id in self.large:
            return "large"
        if item_id in self.medium:
            return "medium"
        return "small"


@dataclass(frozen=True)
class GroupClasses:
    large_groups: frozenset[int]
    small_groups: frozenset[int]


def opt_guess_range(inst: Instance) -> tuple[int, int]:
    return lower_bound(inst), upper_bound(inst)


def band_mass(inst: Instance, epsilon: Fraction, k: int) -> Fraction:
    """Total size of items in [eps^(k+1), eps^k)."""
    lo, hi = epsilon ** (k + 1), epsilon**k
    return sum((it.size for it in inst.items if lo <= it.size < hi), Fraction(0))


def find_k(inst: Instance, epsilon, opt_guess: int) -> int:
    """Smallest k in [1, ceil(1/eps^2)] whose band mass is at most eps^2 * opt_guess."""
    epsilon = parse_epsilon(epsilon, strict=False)
    budget = epsilon**2 * opt_guess
    top = k_max(epsilon)
    mass = [Fraction(0)] * (top + 2)
    for it in inst.items:
        if it.size == 0 or it.size >= epsilon:
            continue
        k = _band_index(it.size, epsilon)
        if k <= top:
            mass[k] += it.size
    for k in range(1, top + 1):
        if mass[k] <= budget:
            return k
    raise NoQualifyingK(
        f"no k in [1,{top}] with band mass <= {budget} (opt_guess={opt_guess}, S={total_size(inst)})"
    )


def _band_index(size: Fraction, epsilon: Fraction) -> int:
    """The k >= 1 with eps^(k+1) <= size < eps^k, for 0 < size < eps."""
    k = max(1, int(math.log(float(size)) / math.log(float(epsilon))) - 1)
    while size < epsilon ** (k + 1):
        k += 1
    while k > 1 and size >= epsilon**k:
        k -= 1
    return k


def classify(inst: Instance, params: ClassParams) -> tuple[ItemClasses, GroupClasses]:
    small, medium, large = set(), set(), set()
    for it in inst.items:
        if it.size < params.small_below:
            small.add(it.id)
        elif it.size < params.large_from:
            medium.add(it.id)
        else:
            large.add(it.id)
    heavy = [0] * inst.n_groups
    for i in medium | large:
        heavy[inst.items[i].group] += 1
    large_groups = {g for g in range(inst.n_groups) if heavy[g] and heavy[g] >= params.group_threshold}
    assert len(large_groups) <= params.max_large_groups, "large-group count exceeds its bound"
    return (
        ItemClasses(frozenset(small), frozenset(medium), frozenset(large)),
        GroupClasses(frozenset(large_groups), frozenset(set(range(inst.n_groups)) - large_groups)),
    )


def scheme_applicable(params: ClassParams, n_groups: int | None = None) -> bool:
    """Whether the guess clears the scheme's size threshold 3 / eps^(k+2)."""
    return params.opt_guess > 3 / params.epsilon ** (params.k + 2)
