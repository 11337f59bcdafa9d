import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from gbp import balanced_coloring, check_packing, first_fit_conflicts, make_instance
from gbp.core import upper_bound
from gbp.generators import GenSpec, appendix_b_greedy, generate
from gbp.heuristics import color_classes, item_order

sizes = st.fractions(min_value=Fraction(1, 50), max_value=1, max_denominator=50)
instances = st.lists(st.lists(sizes, min_size=1, max_size=5), min_size=0, max_size=8).map(make_instance)


class TestBalancedColoring:
    def test_hand_trace(self):
        inst = make_instance([["3/5", "3/5"], ["3/5"]])
        p = balanced_coloring(inst)
        assert p.n_bins == 3
        assert check_packing(inst, p).feasible

    def test_colors_are_group_free(self):
        inst = make_instance([["3/5", "3/5"], ["3/5"]])
        classes = color_classes(inst)
        assert len(classes) == 2
        assert sorted(len(c) for c in classes) == [1, 2]

    def test_empty(self):
        assert balanced_coloring(make_instance([])).n_bins == 0

    def test_adversarial_bound(self):
        inst = generate(GenSpec("appendix_b", {"eps": "1/5", "N_hat": 10}))
        p = balanced_coloring(inst)
        assert check_packing(inst, p).feasible
        assert p.n_bins <= 20

    def test_lightest_color_lowest_index_tie(self):
        # Group 0 seeds two colors of equal load; the next item goes to color 0.
        inst = make_instance([["1/4", "1/4"], ["1/8"]])
        classes = color_classes(inst)
        assert 2 in classes[0]

    def test_subset(self):
        inst = make_instance([["1/2", "1/2"], ["1/2"]])
        p = balanced_coloring(inst, [1, 2])
        assert sorted(i for b in p.bins for i in b) == [1, 2]

    @settings(max_examples=200, deadline=None)
    @given(instances)
    def test_color_bound_and_feasibility(self, inst):
        p = balanced_coloring(inst)
        assert check_packing(inst, p).feasible
        assert p.n_bins <= upper_bound(inst)


class TestFirstFit:
    def test_unit_items(self):
        inst = make_instance([["1"]] * 5)
        assert first_fit_conflicts(inst).n_bins == 5

    def test_decreasing_halves(self):
        inst = make_instance([["1/2"]] * 4)
        assert first_fit_conflicts(inst, "decreasing").n_bins == 2

    def test_adversarial_order_18_bins(self):
        inst = generate(GenSpec("appendix_b", {"eps": "1/5", "N_hat": 10}))
        p = appendix_b_greedy(inst, "1/5", 10)
        assert p.n_bins == 18
        assert check_packing(inst, p).feasible

    def test_plain_input_order_differs(self):
        # Without pre-packing the larges 4 per bin, First-Fit puts 5 larges in a bin.
        inst = generate(GenSpec("appendix_b", {"eps": "1/5", "N_hat": 10}))
        p = first_fit_conflicts(inst, "input")
        assert check_packing(inst, p).feasible
        assert p.n_bins == 19

    def test_initial_bins_are_kept(self):
        inst = make_instance([["1/2"], ["1/2"], ["1/2"]])
        p = first_fit_conflicts(inst, initial=[[2]])
        assert p.bins[0][0] == 2 and check_packing(inst, p).feasible

    def test_random_order_is_seeded(self):
        inst = make_instance([["1/3"]] * 9)
        assert item_order(inst, "random", 4) == item_order(inst, "random", 4)

    def test_bad_policy(self):
        with pytest.raises(ValueError):
            item_order(make_instance([["1/2"]]), "sideways")
        with pytest.raises(ValueError):
            item_order(make_instance([["1/2"]]), [0, 0])

    @settings(max_examples=150, deadline=None)
    @given(instances, st.sampled_from(["input", "decreasing", "random"]), st.integers(0, 100))
    def test_always_feasible(self, inst, order, seed):
        assert check_packing(inst, first_fit_conflicts(inst, order, seed)).feasible


def test_balanced_never_above_two_approximation_on_random_instances():
    rng = random.Random(3)
    for _ in range(200):
        groups = [[Fraction(rng.randint(1, 20), 20) for _ in range(rng.randint(1, 4))] for _ in range(rng.randint(1, 10))]
        inst = make_instance(groups)
        assert balanced_coloring(inst).n_bins <= upper_bound(inst)
