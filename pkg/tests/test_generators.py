import json
from fractions import Fraction

import pytest

from gbp import InstanceError, SolveLimits, check_packing, lower_bound, solve_exact, total_size
from gbp.core import bin_load, instance_to_dict
from gbp.generators import (
    FAMILIES,
    GenSpec,
    appendix_b_layout,
    appendix_b_params,
    demonstrate_gap,
    generate,
)

F = Fraction


class TestGenSpec:
    def test_unknown_family(self):
        with pytest.raises(InstanceError):
            generate(GenSpec("nope", {}))

    def test_unknown_param(self):
        with pytest.raises(InstanceError):
            generate(GenSpec("uniform", {"N": 3, "n": 1, "bogus": 1}))

    def test_missing_param(self):
        with pytest.raises(InstanceError):
            generate(GenSpec("uniform", {"N": 3}))

    def test_bad_count(self):
        for bad in (-1, "3", True):
            with pytest.raises(InstanceError):
                generate(GenSpec("uniform", {"N": bad, "n": 1}))

    def test_empty_size_range(self):
        with pytest.raises(InstanceError):
            generate(GenSpec("uniform", {"N": 1, "n": 1, "lo": "0.501", "hi": "0.509"}))

    def test_from_dict_roundtrip(self):
        spec = GenSpec("uniform", {"N": 4, "n": 2}, 9)
        assert GenSpec.from_dict(spec.to_dict()) == spec
        with pytest.raises(InstanceError):
            GenSpec.from_dict({"params": {}})

    def test_every_family_has_defaults(self):
        assert set(FAMILIES) == {"uniform", "clique_heavy", "appendix_b", "equal_groups"}


class TestFamilies:
    def test_uniform_empty(self):
        assert generate(GenSpec("uniform", {"N": 0, "n": 3})).n_items == 0

    def test_uniform_sizes_in_range(self):
        inst = generate(GenSpec("uniform", {"N": 200, "n": 7, "lo": "1/10", "hi": "3/10"}, 3))
        assert inst.n_items == 200 and inst.n_groups <= 7
        assert all(F(1, 10) <= it.size <= F(3, 10) and it.size.denominator in (1, 2, 4, 5, 10, 20, 25, 50, 100) for it in inst.items)

    def test_equal_groups(self):
        inst = generate(GenSpec("equal_groups", {"n": 3, "m": 4, "size": "1/4"}))
        assert inst.n_items == 12 and inst.n_groups == 3
        assert all(it.size == F(1, 4) for it in inst.items)

    def test_equal_groups_random_sizes(self):
        inst = generate(GenSpec("equal_groups", {"n": 2, "m": 5}, 1))
        assert inst.n_items == 10

    def test_clique_heavy(self):
        inst = generate(GenSpec("clique_heavy", {"N": 20, "n": 4, "clique": 9}, 2))
        assert inst.n_items == 20
        sizes = sorted(sum(1 for it in inst.items if it.group == g) for g in range(inst.n_groups))
        assert sizes[-1] >= 9
        with pytest.raises(InstanceError):
            generate(GenSpec("clique_heavy", {"N": 2, "n": 1, "clique": 3}))

    @pytest.mark.parametrize("family,params", [
        ("uniform", {"N": 30, "n": 5}),
        ("clique_heavy", {"N": 30, "n": 5}),
        ("equal_groups", {"n": 4, "m": 3}),
        ("appendix_b", {"eps": "1/4", "N_hat": 4}),
    ])
    def test_deterministic_under_seed(self, family, params):
        a = json.dumps(instance_to_dict(generate(GenSpec(family, params, 5))))
        b = json.dumps(instance_to_dict(generate(GenSpec(family, params, 5))))
        assert a == b

    def test_seed_changes_output(self):
        a = generate(GenSpec("uniform", {"N": 30, "n": 5}, 1))
        b = generate(GenSpec("uniform", {"N": 30, "n": 5}, 2))
        assert a.items != b.items


class TestAdversarialFamily:
    def test_totals(self):
        inst = generate(GenSpec("appendix_b", {"eps": "1/5", "N_hat": 10}))
        assert inst.n_items == 90
        assert total_size(inst) == 10 and lower_bound(inst) == 10
        assert max(sum(1 for it in inst.items if it.group == g) for g in range(inst.n_groups)) == 10

    def test_layout(self):
        eps, N_hat = F(1, 5), 10
        inst = generate(GenSpec("appendix_b", {"eps": "1/5", "N_hat": N_hat}))
        parts = appendix_b_layout(eps, N_hat)
        assert len(parts["large"]) == 4 * N_hat
        assert len(parts["singletons"]) == N_hat * 4
        assert len(parts["clique"]) == N_hat
        assert all(inst.items[i].size == F(1, 5) for i in parts["large"])
        assert all(inst.items[i].size == eps / 5 for i in parts["singletons"] + parts["clique"])
        assert len({inst.items[i].group for i in parts["clique"]}) == 1
        singles = parts["large"] + parts["singletons"]
        assert len({inst.items[i].group for i in singles}) == len(singles)

    @pytest.mark.parametrize("eps,N_hat", [("2/5", 5), ("1/5", 3), ("0", 5), ("1", 5), ("1/5", 0), ("1/5", 2.5)])
    def test_integrality_validation(self, eps, N_hat):
        with pytest.raises(InstanceError):
            appendix_b_params(eps, N_hat)

    @pytest.mark.parametrize("eps,N_hat,opt,greedy", [("1/5", 10, 10, 18), ("1/2", 4, 4, 6), ("1/4", 8, 8, 14)])
    def test_gap(self, eps, N_hat, opt, greedy):
        optimal, bad = demonstrate_gap(eps, N_hat)
        assert (optimal.n_bins, bad.n_bins) == (opt, greedy)
        inst = generate(GenSpec("appendix_b", {"eps": eps, "N_hat": N_hat}))
        assert check_packing(inst, optimal).feasible and check_packing(inst, bad).feasible
        assert all(bin_load(inst, b) == 1 for b in optimal.bins)

    def test_optimal_side_matches_exact(self):
        for eps, N_hat in (("1/5", 5), ("1/2", 2), ("1/2", 4)):
            inst = generate(GenSpec("appendix_b", {"eps": eps, "N_hat": N_hat}))
            res = solve_exact(inst, SolveLimits(max_items=inst.n_items))
            assert res.proven_optimal
            assert res.opt == demonstrate_gap(eps, N_hat)[0].n_bins == N_hat
