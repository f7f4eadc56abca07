"""Experiment orchestration: solver dispatch, ordered parallel evaluation, reports and the CLI."""

from .parallel import ParallelJobError, parallel_eval, resolve_workers
from .solvers import CLASSICAL_SOLVERS, NEURAL_SOLVERS, SOLVERS, archive_record, solve_file, solve_instance

__all__ = [
    "ParallelJobError",
    "parallel_eval",
    "resolve_workers",
    "CLASSICAL_SOLVERS",
    "NEURAL_SOLVERS",
    "SOLVERS",
    "archive_record",
    "solve_file",
    "solve_instance",
]
