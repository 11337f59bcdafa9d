import random
from collections import Counter
from fractions import Fraction

import pytest

from gbp import Packing, make_instance, solve_exact
from gbp.patterns import (
    AssignmentSearch,
    Slot,
    SwappingFailed,
    bin_pattern,
    build_slot_alphabet,
    conflict_pairs,
    enumerate_assignments,
    enumerate_patterns,
    heuristic_placement,
    place_by_patterns,
    slot_supply,
    swapping,
)
from gbp.shifting import UNLABELED, RoundedInstance, ShiftTable, shift_each_group

from _util import random_instance

F = Fraction
U = UNLABELED


def labeled(inst, labels):
    """Rounded instance where item i keeps its size and carries labels[i]."""
    rounded = {i: inst.items[i].size for i in labels}
    table = ShiftTable(tuple(sorted(labels)), 1, (), frozenset(), rounded)
    return RoundedInstance(inst, (table,), dict(labels), {})


def wild(inst):
    return labeled(inst, {i: U for i in range(inst.n_items)})


def group_of(inst):
    return lambda i: inst.items[i].group


class TestAlphabet:
    def test_empty(self):
        assert build_slot_alphabet(RoundedInstance(make_instance([["1/2"]]))) == ()

    def test_two_sizes_one_group_plus_wildcard(self):
        inst = make_instance([["1/2", "1/3"], ["1/4"]])
        r = labeled(inst, {0: 0, 1: 0, 2: U})
        assert build_slot_alphabet(r) == (Slot(F(1, 2), 0), Slot(F(1, 3), 0), Slot(F(1, 4), U))

    def test_supply_counts(self):
        inst = make_instance([["1/4"], ["1/4"], ["1/3", "1/3"]])
        r = labeled(inst, {0: U, 1: U, 2: 2, 3: 2})
        sup = slot_supply(r)
        assert sup[Slot(F(1, 4), U)] == 2 and sup[Slot(F(1, 3), 2)] == 2


class TestPatterns:
    def test_half_wildcard_cap_two(self):
        book = enumerate_patterns([Slot(F(1, 2), U)], 2)
        assert book.patterns == ((), (0,), (0, 0)) and book.exhaustive

    def test_empty_alphabet(self):
        assert enumerate_patterns([], 3).patterns == ((),)

    def test_unit_slot_only_singleton(self):
        book = enumerate_patterns([Slot(F(1), U), Slot(F(1, 4), U)], 4)
        for p in book.patterns:
            if 0 in p:
                assert p == (0,)

    def test_label_at_most_once(self):
        book = enumerate_patterns([Slot(F(1, 4), 0), Slot(F(1, 5), 0), Slot(F(1, 5), 1)], 3)
        assert all(not {0, 1} <= set(p) for p in book.patterns)
        assert (0, 2) in book.patterns

    def test_capacity_and_cap(self):
        alphabet = [Slot(F(1, 3), U), Slot(F(1, 4), U), Slot(F(1, 5), U)]
        book = enumerate_patterns(alphabet, 3)
        assert all(len(p) <= 3 and book.load(j) <= 1 for j, p in enumerate(book.patterns))
        assert len(set(book.patterns)) == len(book.patterns)
        # Independent count of multisets of size <= 3 within capacity.
        sizes = [s.size for s in alphabet]
        count = 1
        for a in range(3):
            count += 1
            for b in range(a, 3):
                count += sizes[a] + sizes[b] <= 1
                for c in range(b, 3):
                    count += sizes[a] + sizes[b] + sizes[c] <= 1
        assert len(book.patterns) == count

    def test_budget_truncates(self):
        book = enumerate_patterns([Slot(F(1, 10), U)], 5, budget=2)
        assert len(book.patterns) == 2 and not book.exhaustive

    def test_supply_limits_repeats(self):
        s = Slot(F(1, 10), U)
        book = enumerate_patterns([s], 5, supply={s: 2})
        assert max(len(p) for p in book.patterns) == 2


class TestAssignments:
    def test_zero_supply(self):
        book = enumerate_patterns([], 2)
        assert list(enumerate_assignments(book, {}, 3)) == [{0: 3}]

    def test_two_items_one_slot(self):
        s = Slot(F(1, 2), U)
        book = enumerate_patterns([s], 1)
        assert list(enumerate_assignments(book, {s: 2}, 2)) == [{1: 2}]

    def test_supply_matched_and_bins_total(self):
        s = Slot(F(1, 2), U)
        book = enumerate_patterns([s], 2)
        got = list(enumerate_assignments(book, {s: 2}, 2))
        assert got == [{1: 2}, {2: 1, 0: 1}]
        for a in got:
            assert sum(a.values()) == 2
            assert sum(len(book.patterns[p]) * c for p, c in a.items()) == 2

    def test_infeasible_supply_yields_nothing(self):
        s = Slot(F(1, 2), U)
        book = enumerate_patterns([s], 2)
        assert list(enumerate_assignments(book, {s: 5}, 2)) == []

    def test_unknown_slot(self):
        book = enumerate_patterns([Slot(F(1, 2), U)], 2)
        with pytest.raises(ValueError):
            AssignmentSearch(book, {Slot(F(1, 3), U): 1}, 2)

    def test_budget_flag(self):
        alphabet = [Slot(F(1, d), U) for d in (3, 4, 5, 6)]
        book = enumerate_patterns(alphabet, 4)
        search = AssignmentSearch(book, {s: 3 for s in alphabet}, 6, node_budget=3)
        list(search)
        assert not search.exhaustive

    def test_oracle_inclusion(self):
        rng = random.Random(12)
        checked = 0
        for _ in range(40):
            inst = random_instance(rng, rng.randint(2, 8), lo=20, hi=70)
            r = shift_each_group(inst, 1)
            if not r.labels:
                continue
            sub, ids = r.as_instance(r.covered())
            res = solve_exact(sub)
            book = enumerate_patterns(build_slot_alphabet(r), 8)
            index = {tuple(book.slots(p)): p for p in range(len(book.patterns))}
            induced = Counter(index[bin_pattern(r, [ids[i] for i in b])] for b in res.packing.bins)
            search = enumerate_assignments(book, slot_supply(r), res.opt)
            found = [dict(a) for a in search]
            assert search.exhaustive
            assert dict(induced) in found
            checked += 1
        assert checked >= 20


class TestPlacement:
    def test_labeled_only_is_feasible(self):
        inst = make_instance([["1/2", "1/3"], ["1/2"]])
        r = labeled(inst, {0: 0, 1: 0, 2: 1})
        book = enumerate_patterns(build_slot_alphabet(r), 3)
        a = next(iter(enumerate_assignments(book, slot_supply(r), 2)))
        p = place_by_patterns(book, a, r)
        assert conflict_pairs(group_of(inst), p.bins) == 0
        assert sorted(i for b in p.bins for i in b) == [0, 1, 2]

    def test_wildcards_may_clash(self):
        inst = make_instance([["1/2", "1/2"]])
        r = wild(inst)
        book = enumerate_patterns(build_slot_alphabet(r), 2)
        p = place_by_patterns(book, {2: 1}, r)
        assert p.bins == ((0, 1),) and conflict_pairs(group_of(inst), p.bins) == 1

    def test_empty(self):
        book = enumerate_patterns([], 1)
        assert place_by_patterns(book, {}, RoundedInstance(make_instance([]))).bins == ()

    def test_supply_mismatch(self):
        inst = make_instance([["1/2"], ["1/2"]])
        r = wild(inst)
        book = enumerate_patterns(build_slot_alphabet(r), 2)
        with pytest.raises(ValueError):
            place_by_patterns(book, {1: 1}, r)
        with pytest.raises(ValueError):
            place_by_patterns(book, {2: 2}, r)

    def test_never_overfills(self):
        rng = random.Random(4)
        for _ in range(30):
            inst = random_instance(rng, rng.randint(1, 7), lo=20, hi=60)
            r = wild(inst)
            book = enumerate_patterns(build_slot_alphabet(r), 5)
            for a in enumerate_assignments(book, slot_supply(r), inst.n_items, budget=200):
                p = place_by_patterns(book, a, r)
                assert all(sum(inst.items[i].size for i in b) <= 1 for b in p.bins)

    def test_heuristic_placement(self):
        inst = make_instance([["1/2", "1/2"], ["1/2"]])
        r = labeled(inst, {0: 0, 1: 0, 2: 1})
        p = heuristic_placement(r, 2, 4)
        assert p is not None and conflict_pairs(group_of(inst), p.bins) == 0
        assert heuristic_placement(r, 1, 4) is None


class TestSwapping:
    def test_identity(self):
        inst = make_instance([["1/4"], ["1/4"]])
        r = wild(inst)
        p, stats = swapping(Packing(((0, 1),)), r)
        assert p.bins == ((0, 1),) and stats.swaps == 0

    def test_one_swap(self):
        inst = make_instance([["1/4", "1/4"], ["1/4"], ["1/4"]])
        p, stats = swapping(Packing(((0, 1), (2, 3))), wild(inst))
        assert stats.swaps == 1 and stats.initial_conflicts == 1
        assert conflict_pairs(group_of(inst), p.bins) == 0
        assert p.bins == ((1, 2), (0, 3))

    def test_no_good_partner(self):
        inst = make_instance([["1/4", "1/4", "1/4"]])
        with pytest.raises(SwappingFailed):
            swapping(Packing(((0, 1), (2,))), wild(inst))

    def test_labeled_clash(self):
        inst = make_instance([["1/4", "1/4"]])
        with pytest.raises(SwappingFailed):
            swapping(Packing(((0, 1),)), labeled(inst, {0: 0, 1: 0}))

    def test_preserves_rounded_multisets(self):
        rng = random.Random(9)
        done = 0
        for _ in range(300):
            n_bins = rng.randint(2, 6)
            sizes = [F(1, 4), F(1, 5)]
            groups = [[rng.choice(sizes) for _ in range(rng.randint(1, 2))] for _ in range(rng.randint(2, 12))]
            inst = make_instance(groups)
            order = list(range(inst.n_items))
            rng.shuffle(order)
            bins = [[] for _ in range(n_bins)]
            for i in order:
                bins[rng.randrange(n_bins)].append(i)
            if any(sum(inst.items[i].size for i in b) > 1 for b in bins):
                continue
            r = wild(inst)
            tentative = Packing(tuple(tuple(sorted(b)) for b in bins))
            try:
                out, stats = swapping(tentative, r)
            except SwappingFailed:
                continue
            done += 1
            assert conflict_pairs(group_of(inst), out.bins) == 0
            for before, after in zip(tentative.bins, out.bins):
                assert sorted(r.effective_size(i) for i in before) == sorted(r.effective_size(i) for i in after)
            assert stats.swaps <= stats.initial_conflicts
            assert stats.searches <= inst.n_items**2
        assert done >= 50
