"""Preference-conditioned reduction of a multigraph to a simple graph."""

from __future__ import annotations

import numpy as np

from .core import ContractViolation, MultiGraphInstance, Tour, RouteSet
from .problems import brute_force_scalarized
from .scalarize import check_preference

__all__ = [
    "edge_scalar_costs",
    "prune_linear",
    "prune_simple_heuristic",
    "lift_tour",
    "lift_routes",
    "check_prop1",
]


def edge_scalar_costs(inst: MultiGraphInstance, pref) -> np.ndarray:
    """Linear scalarization of every edge's feature vector.

    With a single feature (MOCVRP distances) the feature itself is returned.
    """
    if inst.m == 1:
        return inst.costs[:, 0].copy()
    w = check_preference(pref, inst.m)
    return inst.costs @ w


def _segment_argmin(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """First index of the minimum inside each non-empty segment ``ptr[k]:ptr[k+1]``."""
    starts = ptr[:-1]
    counts = np.diff(ptr)
    nonempty = counts > 0
    seg = np.repeat(np.arange(len(counts)), counts)
    mins = np.full(len(counts), np.inf)
    np.minimum.at(mins, seg, values)
    is_min = values == mins[seg]
    first = np.full(len(counts), np.iinfo(np.int64).max, dtype=np.int64)
    idx = np.flatnonzero(is_min)
    np.minimum.at(first, seg[idx], idx)
    out = np.full(len(counts), -1, dtype=np.int64)
    out[nonempty] = first[nonempty] - starts[nonempty]
    return out


def prune_linear(inst: MultiGraphInstance, pref) -> tuple[MultiGraphInstance, np.ndarray]:
    """Keep, per ordered pair, the slot with the lowest linear scalarized cost.

    Ties go to the lowest slot index.  Returns the simple graph and an
    ``(n, n)`` slot map (``-1`` on the diagonal) for lifting solutions back.
    """
    n = inst.n
    values = edge_scalar_costs(inst, pref)
    slot_map = _segment_argmin(values, inst.pair_ptr).reshape(n, n)
    off = ~np.eye(n, dtype=bool)
    ii, jj = np.nonzero(off)
    kept = inst.pair_ptr[ii * n + jj] + slot_map[ii, jj]
    ptr = np.concatenate([[0], np.cumsum(off.ravel().astype(np.int64))])
    pruned = inst.replace(costs=inst.costs[kept], pair_ptr=ptr)
    slot_map.setflags(write=False)
    return pruned, slot_map


def prune_simple_heuristic(inst: MultiGraphInstance, pref) -> tuple[MultiGraphInstance, np.ndarray]:
    """Same rule as :func:`prune_linear`.

    Exact for additive objectives; for time-window problems it is only a
    heuristic because lateness does not scalarize linearly.
    """
    return prune_linear(inst, pref)


def lift_tour(tour: Tour, slot_map: np.ndarray) -> Tour:
    """Map a tour on the pruned graph back to multigraph slots."""
    return Tour(tuple((s.src, s.dst, int(slot_map[s.src, s.dst])) for s in tour.steps))


def lift_routes(routes: RouteSet, slot_map: np.ndarray) -> RouteSet:
    return RouteSet(tuple(tuple((s.src, s.dst, int(slot_map[s.src, s.dst])) for s in r) for r in routes.routes))


def check_prop1(inst: MultiGraphInstance, pref, tol: float = 1e-9) -> bool:
    """Brute-force optimum of the linear subproblem equals the optimum on the pruned graph."""
    if inst.m < 2:
        raise ContractViolation("needs at least two objectives")
    pref = check_preference(pref, inst.m)
    full = brute_force_scalarized(inst, pref[None, :], "linear")[0]
    pruned, _ = prune_linear(inst, pref)
    reduced = brute_force_scalarized(pruned, pref[None, :], "linear")[0]
    return bool(abs(full - reduced) <= tol)
