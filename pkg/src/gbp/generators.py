"""Instance generators, including the adversarial family for greedy packing.

Every family is deterministic under its seed.  Sizes are drawn as integer
multiples of ``1/resolution`` (a power of ten by default) so generated files
stay readable.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .core import Instance, InstanceError, Packing, check_packing, make_instance, parse_size
from .heuristics import first_fit_conflicts

FAMILIES = {
    "uniform": {"N": None, "n": None, "lo": "1/100", "hi": "1/2", "resolution": 100},
    "clique_heavy": {"N": None, "n": None, "clique": None, "lo": "1/100", "hi": "1/2", "resolution": 100},
    "appendix_b": {"eps": None, "N_hat": None},
    "equal_groups": {"n": None, "m": None, "size": None, "lo": "1/100", "hi": "1/2", "resolution": 100},
}


@dataclass(frozen=True)
class GenSpec:
    family: str
    params: Mapping = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: Mapping) -> "GenSpec":
        try:
            return cls(d["family"], dict(d.get("params", {})), int(d.get("seed", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"malformed generator spec: {exc!r}") from exc

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "seed": self.seed}

    def resolved(self) -> dict:
        """Params merged with family defaults; unknown or missing keys raise."""
        if self.family not in FAMILIES:
            raise InstanceError(f"unknown family {self.family!r}; choose from {sorted(FAMILIES)}")
        defaults = FAMILIES[self.family]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise InstanceError(f"{self.family}: unknown params {sorted(unknown)}")
        out = {**defaults, **self.params}
        if self.family == "equal_groups" and out["size"] is None:
            out["size"] = "random"
        missing = [k for k, v in out.items() if v is None and k != "clique"]
        if missing:
            raise InstanceError(f"{self.family}: missing params {missing}")
        return out


def _count(p: dict, key: str, minimum: int = 0) -> int:
    v = p[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise InstanceError(f"{key} must be an integer >= {minimum}, got {v!r}")
    return v


def _size_sampler(p: dict, rng: random.Random):
    lo, hi, res = parse_size(p["lo"]), parse_size(p["hi"]), _count(p, "resolution", 1)
    a, b = math.ceil(lo * res), math.floor(hi * res)
    a = max(a, 1)
    if a > b or b > res:
        raise InstanceError(f"no multiple of 1/{res} in [{lo}, {hi}] within (0, 1]")
    return lambda: Fraction(rng.randint(a, b), res)


def _nonempty(groups: list[list[Fraction]]) -> list[list[Fraction]]:
    return [g for g in groups if g]


def _uniform(p: dict, rng: random.Random) -> list[list[Fraction]]:
    N, n = _count(p, "N"), _count(p, "n", 1)
    draw = _size_sampler(p, rng)
    groups: list[list[Fraction]] = [[] for _ in range(n)]
    for _ in range(N):
        groups[rng.randrange(n)].append(draw())
    return _nonempty(groups)


def _clique_heavy(p: dict, rng: random.Random) -> list[list[Fraction]]:
    # One big clique of ``clique`` items (half of N by default), the rest spread.
    N, n = _count(p, "N"), _count(p, "n", 1)
    clique = N // 2 if p["clique"] is None else _count(p, "clique")
    if clique > N:
        raise InstanceError("clique cannot exceed N")
    draw = _size_sampler(p, rng)
    groups: list[list[Fraction]] = [[draw() for _ in range(clique)]]
    rest: list[list[Fraction]] = [[] for _ in range(max(n - 1, 1))]
    for _ in range(N - clique):
        rest[rng.randrange(len(rest))].append(draw())
    return _nonempty(groups + rest)


def _equal_groups(p: dict, rng: random.Random) -> list[list[Fraction]]:
    n, m = _count(p, "n"), _count(p, "m")
    if p["size"] == "random":
        draw = _size_sampler(p, rng)
    else:
        s = parse_size(p["size"])
        if not 0 < s <= 1:
            raise InstanceError(f"size must lie in (0, 1], got {s}")
        draw = lambda: s  # noqa: E731
    return _nonempty([[draw() for _ in range(m)] for _ in range(n)])


def appendix_b_params(eps, N_hat) -> tuple[Fraction, int]:
    eps = parse_size(eps)
    if not 0 < eps < 1:
        raise InstanceError(f"eps must lie in (0, 1), got {eps}")
    if isinstance(N_hat, bool) or int(N_hat) != N_hat or N_hat < 1:
        raise InstanceError(f"N_hat must be a positive integer, got {N_hat!r}")
    N_hat = int(N_hat)
    if (1 / eps).denominator != 1:
        raise InstanceError(f"1/eps must be an integer, got 1/eps = {1 / eps}")
    if (eps * N_hat).denominator != 1:
        raise InstanceError(f"eps * N_hat must be an integer, got {eps * N_hat}")
    return eps, N_hat


def _appendix_b(p: dict, rng: random.Random) -> list[list[Fraction]]:
    eps, N_hat = appendix_b_params(p["eps"], p["N_hat"])
    n1 = 4 * N_hat
    n2 = N_hat * (int(1 / eps) - 1)
    large, small = Fraction(1, 5), eps / 5
    return [[large]] * n1 + [[small]] * n2 + [[small] * N_hat]


_BUILDERS = {
    "uniform": _uniform,
    "clique_heavy": _clique_heavy,
    "equal_groups": _equal_groups,
    "appendix_b": _appendix_b,
}


def generate(spec: GenSpec | Mapping) -> Instance:
    """Build the instance described by ``spec``."""
    if not isinstance(spec, GenSpec):
        spec = GenSpec.from_dict(spec)
    p = spec.resolved()
    rng = random.Random(spec.seed)
    groups = _BUILDERS[spec.family](p, rng)
    inst = make_instance(groups, name=spec.family)
    return Instance(inst.items, inst.n_groups, inst.name, spec.seed)


def appendix_b_layout(eps, N_hat) -> dict[str, list[int]]:
    """Item ids of the three parts of the adversarial instance, in id order."""
    eps, N_hat = appendix_b_params(eps, N_hat)
    n1, n2 = 4 * N_hat, N_hat * (int(1 / eps) - 1)
    return {
        "large": list(range(n1)),
        "singletons": list(range(n1, n1 + n2)),
        "clique": list(range(n1 + n2, n1 + n2 + N_hat)),
    }


def appendix_b_greedy(inst: Instance, eps, N_hat) -> Packing:
    """The bad greedy packing: larges 4 per bin, then First-Fit on the rest.

    The singletons fill (1 - eps) N_hat of the large bins; the clique gets one
    item into each of the other eps N_hat bins and then needs a new bin per item.
    """
    parts = appendix_b_layout(eps, N_hat)
    large = parts["large"]
    initial = [large[b:b + 4] for b in range(0, len(large), 4)]
    p = first_fit_conflicts(inst, "input", initial=initial)
    return Packing(p.bins, "appendix-b-greedy")


def appendix_b_optimal(inst: Instance, eps, N_hat) -> Packing:
    """Every bin: 4 larges, 1/eps - 1 singletons and one clique item, load exactly 1."""
    parts = appendix_b_layout(eps, N_hat)
    eps, N_hat = appendix_b_params(eps, N_hat)
    per = int(1 / eps) - 1
    large, single, clique = parts["large"], parts["singletons"], parts["clique"]
    bins = [
        tuple(large[4 * b:4 * b + 4] + single[per * b:per * (b + 1)] + [clique[b]])
        for b in range(N_hat)
    ]
    return Packing(tuple(bins), "appendix-b-optimal")


def demonstrate_gap(eps, N_hat) -> tuple[Packing, Packing]:
    """(optimal packing with N_hat bins, greedy packing with (2 - eps) N_hat bins)."""
    eps, N_hat = appendix_b_params(eps, N_hat)
    inst = generate(GenSpec("appendix_b", {"eps": str(eps), "N_hat": N_hat}))
    optimal = appendix_b_optimal(inst, eps, N_hat)
    greedy = appendix_b_greedy(inst, eps, N_hat)
    for p in (optimal, greedy):
        rep = check_packing(inst, p)
        assert rep.feasible, f"{p.source} is infeasible: {rep.violations[:3]}"
    assert optimal.n_bins == N_hat
    assert greedy.n_bins == (2 - eps) * N_hat
    return optimal, greedy
