"""Group bin packing: pack rational-size items into unit bins, at most one item per group per bin."""

from .core import (
    FeasibilityReport,
    Instance,
    InstanceError,
    Item,
    Packing,
    Violation,
    check_packing,
    lower_bound,
    make_instance,
    max_group_cardinality,
    pad_dummy_items,
    total_size,
    validate_instance,
)
from .exact import ExactResult, SolveLimits, feasible_in, solve_bruteforce, solve_exact
from .heuristics import balanced_coloring, first_fit_conflicts

__version__ = "0.1.0"
