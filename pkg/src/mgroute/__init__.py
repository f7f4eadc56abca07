"""Multi-objective routing on multigraphs.

Instance generators, scalarization and pruning, classical heuristics, an
NSGA-II loop with a multigraph chromosome, exact hypervolume, and two
GNN construction policies trained with REINFORCE.
"""

__version__ = "0.1.0"

from .core import (
    ContractViolation,
    EdgeRef,
    MultiGraphInstance,
    ParetoArchive,
    RouteSet,
    Tour,
    archive_insert,
    dominates,
    pareto_filter,
    validate_tour,
)
from .metrics import hv_gap, hypervolume, normalized_hv
from .scalarize import chebyshev_scalarize, linear_scalarize, preference_grid

__all__ = [
    "__version__",
    "ContractViolation",
    "EdgeRef",
    "MultiGraphInstance",
    "ParetoArchive",
    "RouteSet",
    "Tour",
    "archive_insert",
    "dominates",
    "pareto_filter",
    "validate_tour",
    "hv_gap",
    "hypervolume",
    "normalized_hv",
    "chebyshev_scalarize",
    "linear_scalarize",
    "preference_grid",
]
