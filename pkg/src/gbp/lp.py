"""Exact-rational vertex finding for the small-item partition polytope.

The polytope has one variable x[l, t] in [0, 1] per item l and bin type t:

* x[l, t] = 0 when s_l > eps * f(t)                 (blocked pairs)
* sum_l s_l x[l, t] <= f(t) * |t|   for each type   (capacity)
* sum_t x[l, t] = 1                 for each item   (assignment)
* sum_{l in G_j} x[l, t] <= L[t, j] for each group  (cardinality)

Blocked pairs get no column at all.  A two-phase simplex over
:class:`fractions.Fraction` returns a basic feasible solution, which is a
vertex; a rank certificate over the tight rows is computed independently.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

LOG = logging.getLogger(__name__)


class Infeasible(Exception):
    """The polytope is empty (phase-1 optimum is positive)."""


class VertexCertificateError(AssertionError):
    """A claimed vertex fails its rank certificate or a structural bound."""


@dataclass(frozen=True)
class PartitionPolytope:
    """Constraint data for the partition LP.

    ``items`` are caller ids; ``sizes`` and ``groups`` align with them.
    ``type_count[t]`` is |t| and ``type_free[t]`` is f(t).  ``card_bound``
    maps (group, type) to L; groups absent from the map get L = |t|.
    """

    items: tuple[int, ...]
    sizes: tuple[Fraction, ...]
    groups: tuple[int, ...]
    type_count: tuple[int, ...]
    type_free: tuple[Fraction, ...]
    epsilon: Fraction
    card_bound: Mapping[tuple[int, int], int] = field(default_factory=dict)

    @property
    def n_types(self) -> int:
        return len(self.type_count)

    def blocked(self, i: int, t: int) -> bool:
        return self.sizes[i] > self.epsilon * self.type_free[t]

    def bound(self, g: int, t: int) -> int:
        return self.card_bound.get((g, t), self.type_count[t])

    def variables(self) -> list[tuple[int, int]]:
        """(local item index, type) pairs that are not blocked, row-major."""
        return [
            (i, t) for i in range(len(self.items)) for t in range(self.n_types) if not self.blocked(i, t)
        ]

    def group_members(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = defaultdict(list)
        for i, g in enumerate(self.groups):
            out[g].append(i)
        return dict(out)

    def rows(self) -> list["Row"]:
        """All constraint rows over the unblocked variables.

        Cardinality rows whose bound is at least the number of group items
        that may enter the type are implied by the assignment rows and left out.
        """
        var = {v: k for k, v in enumerate(self.variables())}
        rows: list[Row] = []
        for i in range(len(self.items)):
            coeffs = {var[(i, t)]: Fraction(1) for t in range(self.n_types) if (i, t) in var}
            rows.append(Row("assign", (i,), coeffs, "=", Fraction(1)))
        for t in range(self.n_types):
            coeffs = {var[(i, t)]: self.sizes[i] for i in range(len(self.items)) if (i, t) in var and self.sizes[i]}
            rows.append(Row("capacity", (t,), coeffs, "<=", self.type_free[t] * self.type_count[t]))
        for g, members in sorted(self.group_members().items()):
            for t in range(self.n_types):
                cols = [var[(i, t)] for i in members if (i, t) in var]
                L = self.bound(g, t)
                if cols and L < len(cols):
                    rows.append(Row("card", (g, t), {c: Fraction(1) for c in cols}, "<=", Fraction(L)))
        return rows

    def dump(self) -> str:
        """Text form: one row per line, ``tag indices | col:coef ... op rhs``."""
        vars_ = self.variables()
        lines = [f"# vars {len(vars_)} items {len(self.items)} types {self.n_types}"]
        for k, (i, t) in enumerate(vars_):
            lines.append(f"var {k} item={self.items[i]} type={t}")
        for r in self.rows():
            terms = " ".join(f"{c}:{v}" for c, v in sorted(r.coeffs.items()))
            idx = ",".join(str(x) for x in r.index)
            lines.append(f"{r.kind} {idx} | {terms} {r.op} {r.rhs}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Row:
    kind: str
    index: tuple[int, ...]
    coeffs: Mapping[int, Fraction]
    op: str
    rhs: Fraction

    def value(self, x: Sequence[Fraction]) -> Fraction:
        return sum((c * x[k] for k, c in self.coeffs.items()), Fraction(0))

    def satisfied(self, x: Sequence[Fraction]) -> bool:
        v = self.value(x)
        return v == self.rhs if self.op == "=" else v <= self.rhs

    def tight(self, x: Sequence[Fraction]) -> bool:
        return self.value(x) == self.rhs


def build_partition_polytope(
    items: Sequence[int],
    sizes: Sequence[Fraction],
    groups: Sequence[int],
    type_count: Sequence[int],
    type_free: Sequence[Fraction],
    epsilon: Fraction,
    occupied: Mapping[tuple[int, int], int] | None = None,
) -> PartitionPolytope:
    """Assemble the polytope; ``occupied[(g, t)]`` counts group-g items already in type t."""
    occupied = occupied or {}
    card = {(g, t): type_count[t] - c for (g, t), c in occupied.items() if c}
    if any(v < 0 for v in card.values()):
        raise ValueError("a type holds more items of a group than it has bins")
    return PartitionPolytope(
        tuple(items),
        tuple(Fraction(s) for s in sizes),
        tuple(groups),
        tuple(type_count),
        tuple(Fraction(f) for f in type_free),
        Fraction(epsilon),
        card,
    )


@dataclass(frozen=True)
class VertexSolution:
    polytope: PartitionPolytope
    x: tuple[Fraction, ...]
    tight_rows: tuple[int, ...]
    rank: int
    pivots: int

    def value(self, item_index: int, t: int) -> Fraction:
        for k, (i, tt) in enumerate(self.polytope.variables()):
            if i == item_index and tt == t:
                return self.x[k]
        return Fraction(0)

    def matrix(self) -> list[list[Fraction]]:
        """Dense item x type values (blocked pairs are zero)."""
        P = self.polytope
        out = [[Fraction(0)] * P.n_types for _ in P.items]
        for (i, t), v in zip(P.variables(), self.x):
            out[i][t] = v
        return out

    def fractional_items(self) -> list[int]:
        return sorted({i for (i, _), v in zip(self.polytope.variables(), self.x) if 0 < v < 1})


# simplex -----------------------------------------------------------------


class _Tableau:
    """Sparse fraction-free tableau.

    Row r is ``{column: int}`` with an int rhs, scaled by an arbitrary positive
    factor; its basic column ``basis[r]`` has a positive coefficient and no
    other row mentions it.  Integer rows avoid the cost of Fraction arithmetic.
    """

    def __init__(self):
        self.rows: list[dict[int, int]] = []
        self.rhs: list[int] = []
        self.basis: list[int] = []
        self.pivots = 0

    def add_row(self, coeffs: Mapping[int, Fraction], rhs: Fraction, basic: int) -> None:
        scale = math.lcm(Fraction(rhs).denominator, *(Fraction(v).denominator for v in coeffs.values()))
        self.rows.append({c: int(v * scale) for c, v in coeffs.items() if v})
        self.rhs.append(int(rhs * scale))
        self.basis.append(basic)

    def value(self, r: int) -> Fraction:
        return Fraction(self.rhs[r], self.rows[r][self.basis[r]])

    def reduced_costs(self, cost: Mapping[int, Fraction]) -> dict[int, Fraction]:
        """cost - c_B B^-1 A over all columns."""
        obj: dict[int, Fraction] = {c: Fraction(v) for c, v in cost.items() if v}
        for r, b in enumerate(self.basis):
            cb = cost.get(b)
            if not cb:
                continue
            f = Fraction(cb) / self.rows[r][b]
            for c, v in self.rows[r].items():
                obj[c] = obj.get(c, 0) - f * v
        return {c: v for c, v in obj.items() if v}

    def pivot(self, r: int, e: int, obj: dict[int, Fraction]) -> None:
        row = self.rows[r]
        if row[e] < 0:
            for c in row:
                row[c] = -row[c]
            self.rhs[r] = -self.rhs[r]
        p = row[e]
        rr = self.rhs[r]
        for k, other in enumerate(self.rows):
            if k == r or e not in other:
                continue
            a = other[e]
            if p != 1:
                for c in other:
                    other[c] *= p
            for c, v in row.items():
                nv = other.get(c, 0) - a * v
                if nv:
                    other[c] = nv
                else:
                    other.pop(c, None)
            self.rhs[k] = self.rhs[k] * p - a * rr
            g = math.gcd(self.rhs[k], *other.values())
            if g > 1:
                for c in other:
                    other[c] //= g
                self.rhs[k] //= g
        if e in obj:
            f = obj[e] / p
            for c, v in row.items():
                nv = obj.get(c, 0) - f * v
                if nv:
                    obj[c] = nv
                else:
                    obj.pop(c, None)
        self.basis[r] = e
        self.pivots += 1

    def run(self, obj: dict[int, Fraction], allowed: set[int] | None = None) -> None:
        """Minimize; ``obj`` holds reduced costs and is updated in place.

        Dantzig's rule until a run of degenerate pivots, then Bland's rule for
        the rest of the solve (which guarantees termination).
        """
        bland = False
        degenerate_run = 0
        while True:
            cands = [(v, c) for c, v in obj.items() if v.numerator < 0 and (allowed is None or c in allowed)]
            if not cands:
                return
            e = min(cands, key=lambda vc: vc[1])[1] if bland else min(cands)[1]
            best_r, best = None, None
            for r, row in enumerate(self.rows):
                a = row.get(e)
                if a is not None and a > 0:
                    key = (Fraction(self.rhs[r], a), self.basis[r])
                    if best is None or key < best:
                        best, best_r = key, r
            if best_r is None:
                raise RuntimeError("unbounded direction in a bounded polytope")
            if best[0] == 0:
                degenerate_run += 1
                if degenerate_run > 50:
                    bland = True
            else:
                degenerate_run = 0
            self.pivot(best_r, e, obj)


def _primes(n: int) -> list[int]:
    out: list[int] = []
    k = 2
    while len(out) < n:
        if all(k % p for p in out if p * p <= k):
            out.append(k)
        k += 1
    return out


def find_vertex(P: PartitionPolytope, generic_objective: bool = True) -> VertexSolution:
    """A vertex of ``P`` in exact rationals, or :class:`Infeasible`.

    With ``generic_objective`` the phase-2 objective sum x_v / p_v (p_v the
    v-th prime) moves the basic solution to a unique optimal vertex.
    """
    vars_ = P.variables()
    n = len(vars_)
    rows = P.rows()
    tab = _Tableau()
    artificial: set[int] = set()
    col = n
    for row in rows:
        coeffs = dict(row.coeffs)
        coeffs[col] = Fraction(1)
        if row.op != "<=":
            artificial.add(col)
        tab.add_row(coeffs, row.rhs, col)
        col += 1
    n_cols = col

    # phase 1: minimize the sum of artificials
    obj = tab.reduced_costs({c: 1 for c in artificial})
    allowed = set(range(n_cols)) - artificial
    tab.run(obj, allowed)
    infeas = sum((tab.value(r) for r, b in enumerate(tab.basis) if b in artificial), Fraction(0))
    if infeas > 0:
        raise Infeasible(f"phase-1 optimum {infeas} > 0")

    # drive zero-level artificials out of the basis; drop redundant rows
    for r in range(len(tab.rows) - 1, -1, -1):
        if tab.basis[r] not in artificial:
            continue
        enter = next((c for c in sorted(tab.rows[r]) if c not in artificial), None)
        if enter is None:
            del tab.rows[r], tab.rhs[r], tab.basis[r]
        else:
            tab.pivot(r, enter, {})
    for row in tab.rows:
        for c in artificial:
            row.pop(c, None)

    if generic_objective and n:
        primes = _primes(n)
        tab.run(tab.reduced_costs({c: Fraction(1, primes[c]) for c in range(n)}), allowed)

    x = [Fraction(0)] * n
    for r, b in enumerate(tab.basis):
        if b < n:
            x[b] = tab.value(r)
    tight, rank = vertex_certificate(P, x, rows)
    if rank + sum(1 for v in x if v == 0) != n:
        raise VertexCertificateError(f"rank {rank} + zeros does not reach {n} variables")
    return VertexSolution(P, tuple(x), tight, rank, tab.pivots)


def _rank(matrix: list[list[Fraction]]) -> int:
    m = [list(r) for r in matrix]
    rank = 0
    cols = len(m[0]) if m else 0
    for c in range(cols):
        piv = next((r for r in range(rank, len(m)) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pv = m[rank][c]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / pv
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def vertex_certificate(
    P: PartitionPolytope, x: Sequence[Fraction], rows: list[Row] | None = None
) -> tuple[tuple[int, ...], int]:
    """Tight row indices and the rank of those rows on the support of ``x``.

    ``x`` is a vertex exactly when this rank plus the number of zero
    coordinates equals the number of variables.
    """
    rows = P.rows() if rows is None else rows
    tight = tuple(k for k, r in enumerate(rows) if r.tight(x))
    support = [k for k, v in enumerate(x) if v != 0]
    if not support:
        return tight, 0
    pos = {c: j for j, c in enumerate(support)}
    mat = []
    for k in tight:
        line = [Fraction(0)] * len(support)
        for c, v in rows[k].coeffs.items():
            if c in pos:
                line[pos[c]] = v
        if any(line):
            mat.append(line)
    return tight, _rank(mat)


def check_solution(P: PartitionPolytope, x: Sequence[Fraction]) -> list[str]:
    """Re-substitute ``x`` into every row and bound; returns violated descriptions."""
    bad = [f"x[{k}]={v} outside [0,1]" for k, v in enumerate(x) if not 0 <= v <= 1]
    for r in P.rows():
        if not r.satisfied(x):
            bad.append(f"{r.kind} {r.index}: {r.value(x)} {r.op} {r.rhs} fails")
    return bad


@dataclass(frozen=True)
class FractionalReport:
    fractional_groups: int
    per_group: Mapping[int, int]
    n_types: int

    @property
    def total(self) -> int:
        return sum(self.per_group.values())

    def within_bounds(self) -> bool:
        return self.fractional_groups <= self.n_types and all(
            v <= 2 * self.n_types for v in self.per_group.values()
        )


def analyze_fractional(v: VertexSolution, strict: bool = True) -> FractionalReport:
    """Count fractional groups and fractional items per group.

    With ``strict`` a violated bound (more than |T| fractional groups, or
    more than 2|T| fractional items in a group) raises.
    """
    P = v.polytope
    per_group: dict[int, int] = defaultdict(int)
    for i in v.fractional_items():
        per_group[P.groups[i]] += 1
    rep = FractionalReport(len(per_group), dict(sorted(per_group.items())), P.n_types)
    if strict and not rep.within_bounds():
        raise VertexCertificateError(
            f"{rep.fractional_groups} fractional groups, per group {rep.per_group}, |T|={P.n_types}"
        )
    return rep


def group_matrix(P: PartitionPolytope, group: int) -> tuple[list[list[int]], list[tuple[int, int]]]:
    """Coefficient matrix of the single-group system used in the integrality argument.

    Columns are (item, type) pairs of the group's items, blocked ones included.
    Rows: one per blocked pair (+1 on it), one per item (-1 on its unblocked
    pairs), one per type (+1 on its unblocked pairs).
    """
    members = [i for i, g in enumerate(P.groups) if g == group]
    cols = [(i, t) for i in members for t in range(P.n_types)]
    idx = {c: k for k, c in enumerate(cols)}
    rows: list[list[int]] = []
    for c in cols:
        if P.blocked(*c):
            line = [0] * len(cols)
            line[idx[c]] = 1
            rows.append(line)
    for i in members:
        line = [0] * len(cols)
        for t in range(P.n_types):
            if not P.blocked(i, t):
                line[idx[(i, t)]] = -1
        rows.append(line)
    for t in range(P.n_types):
        line = [0] * len(cols)
        for i in members:
            if not P.blocked(i, t):
                line[idx[(i, t)]] = 1
        rows.append(line)
    return rows, cols


def satisfies_tu_criterion(matrix: Iterable[Sequence[int]]) -> bool:
    """Entries in {-1,0,1}, at most two nonzeros per column, opposite signs if two."""
    matrix = [list(r) for r in matrix]
    if not matrix:
        return True
    for c in range(len(matrix[0])):
        nz = [r[c] for r in matrix if r[c] != 0]
        if any(v not in (-1, 1) for v in nz) or len(nz) > 2:
            return False
        if len(nz) == 2 and nz[0] == nz[1]:
            return False
    return True


def verify_tu_substructure(P: PartitionPolytope, group: int) -> bool:
    rows, _ = group_matrix(P, group)
    return satisfies_tu_criterion(rows)
