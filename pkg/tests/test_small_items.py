import random
from collections import Counter
from fractions import Fraction

import pytest

from gbp import Packing, check_packing, make_instance, solve_exact
from gbp import small_items as si
from gbp.classification import ClassParams
from gbp.heuristics import balanced_coloring
from gbp.shifting import UNLABELED, RoundedInstance, ShiftTable
from gbp.small_items import (
    BinType,
    GreedyFailure,
    GuessRejected,
    SmallBudgets,
    compute_bin_types,
    evict_phase,
    greedy_pack,
    initial_bins,
    pack_small_items,
    partition_items,
)

F = Fraction
HALF = F(1, 2)


def ctx_for(inst, eps=HALF, opt=4, k=1, **budgets):
    return si._Context(inst, ClassParams(F(eps), opt, k), SmallBudgets(**budgets))


def greedy_fixture(rng, delta=F(1, 4)):
    """Items meeting GreedyPack's three preconditions for a type of n bins."""
    n = rng.randint(1, 8)
    f = F(rng.randint(1, 20), 20)
    groups = rng.randint(1, 6)
    size, group = {}, {}
    budget = (1 - delta) * f * n
    total = F(0)
    nid = 0
    for g in range(groups):
        for _ in range(rng.randint(0, n)):
            s = delta * f * F(rng.randint(0, 12), 12)
            if total + s > budget:
                break
            total += s
            size[nid], group[nid] = s, g
            nid += 1
    return list(size), size, group, n, f


class TestGreedyPack:
    def test_single_item(self):
        assert greedy_pack([0], {0: F(1, 100)}, {0: 0}, 1, F(1)) == [[0]]

    def test_one_item_per_group_per_bin(self):
        size = {0: F(1, 4), 1: F(1, 8), 2: F(1, 4)}
        group = {0: 0, 1: 0, 2: 1}
        bins = greedy_pack([0, 1, 2], size, group, 2, F(1))
        assert bins == [[0, 2], [1]]

    def test_overflow_advances_largest_drop(self):
        # Capacity 1/2: 0.3 + 0.3 overflows.  Group 1 drops further (0.3 -> 0.1)
        # than group 0 (0.3 -> 0.15), so group 1 moves to its next item.
        size = {0: F(3, 10), 1: F(3, 20), 2: F(3, 10), 3: F(1, 10)}
        group = {0: 0, 1: 0, 2: 1, 3: 1}
        bins = greedy_pack([0, 1, 2, 3], size, group, 2, HALF)
        assert bins == [[0, 3], [1, 2]]

    def test_too_many_in_group(self):
        with pytest.raises(GreedyFailure):
            greedy_pack([0, 1], {0: F(0), 1: F(0)}, {0: 0, 1: 0}, 1, F(1))

    def test_persistent_overflow(self):
        with pytest.raises(GreedyFailure):
            greedy_pack([0, 1], {0: F(3, 5), 1: F(3, 5)}, {0: 0, 1: 1}, 1, F(1))

    def test_precondition_fixtures(self):
        rng = random.Random(11)
        for _ in range(300):
            items, size, group, n, f = greedy_fixture(rng)
            bins = greedy_pack(items, size, group, n, f)
            assert len(bins) == n
            assert sorted(i for b in bins for i in b) == sorted(items)
            for b in bins:
                assert sum(size[i] for i in b) <= f
                assert len({group[i] for i in b}) == len(b)


class TestBinTypes:
    def test_one_pattern(self):
        inst = make_instance([["1/2"], ["1/2"]])
        bins = initial_bins(inst, [[0], [1]], RoundedInstance(inst))
        # Different groups, so different signatures; same pattern size though.
        assert len(compute_bin_types(bins)) == 2
        inst = make_instance([["1/2", "1/2"]])
        bins = initial_bins(inst, [[0], [1]], RoundedInstance(inst))
        (t,) = compute_bin_types(bins)
        assert t.count == 2 and t.free == HALF

    def test_two_patterns(self):
        inst = make_instance([["1/2", "1/2", "1/3"]])
        bins = initial_bins(inst, [[0], [1], [2]], RoundedInstance(inst))
        types = compute_bin_types(bins)
        assert [t.count for t in types] == [2, 1]
        assert [t.free for t in types] == [HALF, F(2, 3)]


class TestRecursiveEnum:
    def test_no_tight_bins_is_identity(self):
        inst = make_instance([["1/10"], ["1/2"]])
        ctx = ctx_for(inst)
        bins = initial_bins(inst, [[1]], RoundedInstance(inst))
        (out,) = list(si.recursive_enum(ctx, bins, [0]))
        assert out.bins == tuple(bins) and out.remaining == {0} and out.rounds == 0

    def test_padding_to_sixteen(self, monkeypatch):
        inst = make_instance([["4/5", "4/5"], ["1/100"]])
        ctx = ctx_for(inst)
        assert ctx.pad_to == 16
        bins = initial_bins(inst, [[0], [1]], RoundedInstance(inst))
        seen = []
        real = si._type_guesses

        def spy(ctx_, tb, view, remaining):
            seen.append(len(tb) - len([b for b in tb if b < len(bins)]))
            yield from real(ctx_, tb, view, remaining)

        monkeypatch.setattr(si, "_type_guesses", spy)
        list(si.recursive_enum(ctx, bins, [2]))
        assert seen and seen[0] == 14

    def test_chain_is_nested(self):
        inst = make_instance([["4/5"], ["3/4"], ["1/20"], ["1/25"], ["1/50"]])
        ctx = ctx_for(inst, opt=2, alpha_override=3)
        bins = initial_bins(inst, [[0], [1]], RoundedInstance(inst))
        outs = list(si.recursive_enum(ctx, bins, [2, 3, 4]))
        assert outs
        for o in outs:
            for a, b in zip(o.chain, o.chain[1:]):
                assert b <= a


class TestEvict:
    def _bin(self, small, free):
        return si.BinState(tuple(i for i, _ in small), free, (), 0, frozenset(), frozenset(), tuple(small))

    def test_empty(self):
        inst = make_instance([["1/50"]])
        assert evict_phase(ctx_for(inst), [], frozenset(), Counter()) == ([], [])

    def test_largest_eligible_evicted(self):
        inst = make_instance([["1/50"], ["3/100"], ["1/200"]])
        st = self._bin([(0, F(1, 50)), (1, F(3, 100)), (2, F(1, 200))], F(1, 100))
        evicted, bins = evict_phase(ctx_for(inst), [st], frozenset({0}), Counter())
        assert evicted == [1]
        assert bins[0].free == F(1, 100) + F(3, 100) >= F(1, 50)

    def test_group_counter_blocks(self):
        inst = make_instance([["1/50"]])
        st = self._bin([(0, F(1, 50))], F(1, 100))
        with pytest.raises(GuessRejected):
            evict_phase(ctx_for(inst, opt=4), [st], frozenset({0}), Counter({0: 2}))


class TestPartition:
    def test_integral(self):
        inst = make_instance([["1/10"], ["1/10"]])
        t = BinType((), F(1), frozenset(), (0, 1))
        part = partition_items(ctx_for(inst, eps="2/5"), [t], [0, 1])
        assert part.fractional == () and part.assigned == {0: (0, 1)}

    def test_one_fractional_item(self):
        inst = make_instance([["2/5"]] * 5)
        types = [BinType((), F(1), frozenset(), (0,)), BinType(("x",), F(1), frozenset(), (1,))]
        part = partition_items(ctx_for(inst, eps="2/5"), types, range(5))
        assert len(part.fractional) == 1
        assert sorted(len(v) for v in part.assigned.values()) == [2, 2]

    def test_blocked_item_goes_to_roomy_type(self):
        inst = make_instance([["1/5"], ["1/50"]])
        tight = BinType((), F(1, 10), frozenset(), (0,))
        roomy = BinType(("x",), F(1), frozenset(), (1,))
        part = partition_items(ctx_for(inst, eps="2/5"), [tight, roomy], [0, 1])
        assert 0 in part.assigned[1]

    def test_infeasible_rejects(self):
        inst = make_instance([["2/5"]] * 3)
        t = BinType((), F(1), frozenset(), (0,))
        with pytest.raises(GuessRejected):
            partition_items(ctx_for(inst, eps="2/5"), [t], range(3))

    def test_group_in_type_blocks(self):
        inst = make_instance([["1/10", "1/10"]])
        t = BinType((), F(1), frozenset({0}), (0,))
        with pytest.raises(GuessRejected):
            partition_items(ctx_for(inst, eps="2/5"), [t], [0])


def assemble(inst, res):
    bins = list(res.core) + [b for b, _ in res.extras]
    if res.pool:
        bins += list(balanced_coloring(inst, sorted(res.pool)).bins)
    return Packing(tuple(b for b in bins if b))


class TestPackSmallItems:
    def test_no_small_items(self):
        inst = make_instance([["1/2"]])
        res = pack_small_items(inst, [], [[0]], RoundedInstance(inst), ClassParams(HALF, 1, 1))
        assert res.core == [(0,)] and not res.pool and not res.extras

    def test_budget_zero_falls_back(self):
        inst = make_instance([["1/100"]] * 3)
        res = pack_small_items(
            inst, [0, 1, 2], [[], [], []], RoundedInstance(inst), ClassParams(F(2, 5), 3, 1), SmallBudgets(enum_budget=0)
        )
        assert res.stats["fallback"] and set(res.pool.values()) == {"small_fallback"}
        assert check_packing(inst, assemble(inst, res)).feasible

    def test_all_small_at_exact_opt(self):
        rng = random.Random(6)
        for _ in range(25):
            groups = [[F(rng.randint(1, 3), 100) for _ in range(rng.randint(1, 3))] for _ in range(rng.randint(1, 4))]
            inst = make_instance(groups)
            opt = solve_exact(inst).opt
            params = ClassParams(F(2, 5), opt, 1)
            res = pack_small_items(inst, range(inst.n_items), [[] for _ in range(opt)], RoundedInstance(inst), params)
            p = assemble(inst, res)
            assert check_packing(inst, p).feasible
            assert len(res.core) == opt
            assert p.n_bins <= opt + sum(1 for b, _ in res.extras if b) + (
                balanced_coloring(inst, sorted(res.pool)).n_bins if res.pool else 0
            )

    def test_around_large_items(self):
        inst = make_instance([["3/4", "1/50", "1/50"], ["3/4"], ["1/40", "1/100"]])
        core = [[0], [3]]
        params = ClassParams(F(2, 5), 2, 1)
        res = pack_small_items(inst, [1, 2, 4, 5], core, RoundedInstance(inst), params, SmallBudgets(alpha_override=2))
        p = assemble(inst, res)
        assert check_packing(inst, p).feasible
        assert 0 in res.core[0] and 3 in res.core[1]

    def test_small_item_never_joins_its_groups_large_item(self):
        inst = make_instance([["7/10", "1/100"], ["1/2"]])
        rinst = RoundedInstance(inst, (ShiftTable((0,), 1, (), frozenset(), {0: F(7, 10)}),), {0: UNLABELED}, {})
        for budgets in (SmallBudgets(), SmallBudgets(generic_objective=False)):
            res = pack_small_items(inst, [1], [[0], [2]], rinst, ClassParams(F(2, 5), 2, 1), budgets)
            assert 1 not in res.core[0]
            assert check_packing(inst, assemble(inst, res)).feasible
