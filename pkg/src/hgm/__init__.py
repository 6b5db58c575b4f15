"""Monotonicity testing for Boolean functions on hypergrids [n]^d.

Directed lazy-walk path tester with shift sub-tests, exact small-domain
oracles (walk pmfs, distance to monotonicity, influence, Talagrand
objective), and a seeded experiment CLI.
"""

from .errors import BudgetError, ConfigError, DomainError, FormatError
from .grid import (
    Comparability,
    ExplicitFunction,
    FamilySpec,
    FunctionOracle,
    GridShape,
    Point,
    comparable,
    doubly_flip,
    is_monotone,
    load_truth_table,
    make_family,
    restrict_to_subgrid,
    sample_subgrid,
    save_truth_table,
    tabulate,
)
from .rng import substream
from .tester import (
    FullTesterResult,
    TesterConfig,
    TesterReport,
    TrialOutcome,
    exact_reject_prob,
    line_tester_fallback,
    run_full_tester,
    run_single_trial,
    run_tester,
)
from .walks import (
    Hypercube,
    WalkPmf,
    WalkSpec,
    cube_walk_closed_form,
    exact_pmf,
    middle_layer_member,
    restricted_walk_pdf,
    sample_downshift,
    sample_downwalk,
    sample_hypercube,
    sample_hypercube_at,
    sample_hypercube_walk,
    sample_upshift,
    sample_upwalk,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
