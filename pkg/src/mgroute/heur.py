"""Constructive heuristics, multigraph 2-opt and the scalarized preference sweep."""

from __future__ import annotations

import numpy as np

from .core import ContractViolation, MultiGraphInstance, ParetoArchive, RouteSet, Tour
from .problems import CVRP_KINDS, check_kind, evaluate, objective_dim
from .prune import edge_scalar_costs, lift_routes, lift_tour, prune_linear

__all__ = [
    "scalar_matrix",
    "best_slot_matrices",
    "nearest_neighbor",
    "nearest_insertion",
    "farthest_insertion",
    "nearest_neighbor_cvrp",
    "tour_scalar_cost",
    "two_opt_multigraph",
    "two_opt_routes",
    "scalarized_sweep",
    "INNER_SOLVERS",
]


def scalar_matrix(inst: MultiGraphInstance, pref) -> np.ndarray:
    """``(n, n)`` scalarized costs of a graph with one edge per pair (diagonal = inf)."""
    if not inst.is_simple:
        raise ContractViolation("expected one edge per ordered pair; prune the multigraph first")
    n = inst.n
    M = np.full((n, n), np.inf)
    M[inst.src, inst.dst] = edge_scalar_costs(inst, pref)
    return M


def best_slot_matrices(inst: MultiGraphInstance, pref) -> tuple[np.ndarray, np.ndarray]:
    """Cheapest scalarized cost and its slot for every ordered pair."""
    pruned, slot_map = prune_linear(inst, pref)
    return scalar_matrix(pruned, pref), slot_map


def nearest_neighbor(inst: MultiGraphInstance, pref, start: int = 0, all_starts: bool = False) -> Tour:
    """Greedy tour from ``start``; ties go to the lowest node index.

    With ``all_starts`` every start node is tried and the cheapest tour kept.
    """
    M = scalar_matrix(inst, pref)
    starts = range(inst.n) if all_starts else [start]
    best, best_cost = None, np.inf
    for s in starts:
        order = [s]
        free = np.ones(inst.n, dtype=bool)
        free[s] = False
        while free.any():
            row = np.where(free, M[order[-1]], np.inf)
            nxt = int(np.argmin(row))
            order.append(nxt)
            free[nxt] = False
        cost = M[order, np.roll(order, -1)].sum()
        if cost < best_cost:
            best, best_cost = order, cost
    return Tour.from_order(best)


def _insertion(inst: MultiGraphInstance, pref, farthest: bool) -> Tour:
    M = scalar_matrix(inst, pref)
    n = inst.n
    sym = np.minimum(M, M.T)
    order = [0]
    free = np.ones(n, dtype=bool)
    free[0] = False
    # distance from every node to the partial tour
    near = sym[0].copy()
    while free.any():
        cand = np.where(free, near, np.inf if not farthest else -np.inf)
        k = int(np.argmax(cand)) if farthest else int(np.argmin(cand))
        a = np.asarray(order)
        b = np.roll(a, -1)
        if len(order) == 1:
            pos = 0
        else:
            delta = M[a, k] + M[k, b] - M[a, b]
            pos = int(np.argmin(delta))
        order.insert(pos + 1, k)
        free[k] = False
        near = np.minimum(near, sym[k])
    return Tour.from_order(order)


def nearest_insertion(inst: MultiGraphInstance, pref) -> Tour:
    """Insert the node closest to the partial tour at its cheapest position."""
    return _insertion(inst, pref, farthest=False)


def farthest_insertion(inst: MultiGraphInstance, pref) -> Tour:
    """Insert the node farthest from the partial tour at its cheapest position."""
    return _insertion(inst, pref, farthest=True)


def nearest_neighbor_cvrp(inst: MultiGraphInstance, pref) -> RouteSet:
    """Nearest feasible customer; return to the depot when nothing fits."""
    M = scalar_matrix(inst, pref)
    depot, cap = inst.depot, inst.capacity
    free = np.ones(inst.n, dtype=bool)
    free[depot] = False
    routes, route, load, cur = [], [], 0, depot
    while free.any():
        fits = free & (inst.demands <= cap - load)
        if not fits.any():
            routes.append(route)
            route, load, cur = [], 0, depot
            continue
        nxt = int(np.argmin(np.where(fits, M[cur], np.inf)))
        route.append(nxt)
        load += int(inst.demands[nxt])
        free[nxt] = False
        cur = nxt
    routes.append(route)
    return RouteSet.from_orders(depot, routes)


def tour_scalar_cost(inst: MultiGraphInstance, tour: Tour, pref) -> float:
    vals = edge_scalar_costs(inst, pref)
    n = inst.n
    ids = [inst.pair_ptr[s.src * n + s.dst] + s.slot for s in tour.steps]
    return float(vals[ids].sum())


def _two_opt_cycle(order, leg, slots, best, best_slot, max_moves, history, stats=None):
    """Best-improvement 2-opt on one cycle given as node ``order``.

    ``leg[t]`` is the scalarized cost of the current edge ``order[t] -> order[t+1]``.
    Changed pairs take their cheapest slot; unchanged edges keep theirs.
    """
    order = np.array(order, dtype=np.int64)
    leg = np.array(leg, dtype=np.float64)
    slots = np.array(slots, dtype=np.int64)
    k = len(order)
    if history is not None:
        history.append(float(leg.sum()))
    if k < 4:
        # a 3-cycle has only the full reversal
        if k < 3:
            return order, slots
    I, J = np.triu_indices(k, 2)
    moves = 0
    while max_moves is None or moves < max_moves:
        nxt = np.roll(order, -1)
        pre = np.concatenate([[0.0], np.cumsum(leg)])
        rev = best[nxt, order]  # cost of traversing leg t backwards
        pre_rev = np.concatenate([[0.0], np.cumsum(rev)])
        a, b, c, d = order[I], order[I + 1], order[J], order[(J + 1) % k]
        removed = pre[J + 1] - pre[I]
        added = best[a, c] + best[b, d] + pre_rev[J] - pre_rev[I + 1]
        delta = added - removed
        if stats is not None:
            stats["scanned"] = stats.get("scanned", 0) + len(delta)
        m = int(np.argmin(delta))
        total = pre[-1]
        if not delta[m] < -1e-12 * max(1.0, abs(total)):
            break
        i, j = int(I[m]), int(J[m])
        new_order = np.concatenate([order[: i + 1], order[i + 1 : j + 1][::-1], order[j + 1 :]])
        new_leg = leg.copy()
        new_slots = slots.copy()
        for t in range(i, j + 1):
            u, v = new_order[t], new_order[(t + 1) % k]
            new_leg[t] = best[u, v]
            new_slots[t] = best_slot[u, v]
        order, leg, slots = new_order, new_leg, new_slots
        moves += 1
        if history is not None:
            history.append(float(leg.sum()))
    return order, slots


def two_opt_multigraph(
    inst: MultiGraphInstance,
    tour: Tour,
    pref,
    max_moves: int | None = None,
    history: list | None = None,
    stats: dict | None = None,
) -> Tour:
    """2-opt with best-move acceptance on a multigraph tour.

    Each iteration scans every 2-opt move, re-slots the pairs whose adjacency
    or direction changed by cheapest linear scalarized cost, and applies the
    single best improving move.  ``history`` (if given) receives the
    scalarized tour cost after every applied move; ``stats["scanned"]``
    accumulates the number of moves evaluated.
    """
    best, best_slot = best_slot_matrices(inst, pref)
    vals = edge_scalar_costs(inst, pref)
    n = inst.n
    ids = [inst.pair_ptr[s.src * n + s.dst] + s.slot for s in tour.steps]
    order, slots = _two_opt_cycle(tour.nodes, vals[ids], tour.slots, best, best_slot, max_moves, history, stats)
    return Tour.from_order(order, slots)


def two_opt_routes(
    inst: MultiGraphInstance, routes: RouteSet, pref, max_moves: int | None = None, stats: dict | None = None
) -> RouteSet:
    """Per-route 2-opt (each route is a cycle through the depot)."""
    best, best_slot = best_slot_matrices(inst, pref)
    vals = edge_scalar_costs(inst, pref)
    n = inst.n
    out_orders, out_slots = [], []
    for route in routes.routes:
        nodes = [s.src for s in route]
        ids = [inst.pair_ptr[s.src * n + s.dst] + s.slot for s in route]
        order, slots = _two_opt_cycle(
            nodes, vals[ids], [s.slot for s in route], best, best_slot, max_moves, None, stats
        )
        # rotate so the depot leads
        r = int(np.flatnonzero(order == inst.depot)[0])
        order, slots = np.roll(order, -r), np.roll(slots, -r)
        out_orders.append(list(order[1:]))
        out_slots.append(list(slots))
    return RouteSet.from_orders(inst.depot, out_orders, out_slots)


INNER_SOLVERS = {"nn": nearest_neighbor, "ni": nearest_insertion, "fi": farthest_insertion}


def _solve_one(inst, kind, pref, inner, two_opt, max_moves, all_starts):
    pruned, slot_map = prune_linear(inst, pref)
    if kind in CVRP_KINDS:
        if inner != "nn":
            raise ContractViolation("only nearest neighbour construction is available for CVRP")
        sol = lift_routes(nearest_neighbor_cvrp(pruned, pref), slot_map)
        if two_opt:
            sol = two_opt_routes(inst, sol, pref, max_moves)
        return sol
    if kind == "mgmotsptw":
        if inner != "nn":
            raise ContractViolation("only nearest neighbour construction is available with time windows")
        sol = lift_tour(nearest_neighbor(pruned, pref, start=inst.depot), slot_map)
    elif inner == "nn":
        sol = lift_tour(nearest_neighbor(pruned, pref, all_starts=all_starts), slot_map)
    else:
        sol = lift_tour(INNER_SOLVERS[inner](pruned, pref), slot_map)
    if two_opt:
        sol = two_opt_multigraph(inst, sol, pref, max_moves)
    return sol


def scalarized_sweep(
    inst: MultiGraphInstance,
    kind: str | None,
    prefs,
    inner: str = "nn",
    two_opt: bool = False,
    max_moves: int | None = None,
    all_starts: bool = False,
) -> ParetoArchive:
    """Solve one linear subproblem per preference and archive the true costs."""
    kind = check_kind(inst, kind)
    if inner not in INNER_SOLVERS:
        raise ContractViolation(f"unknown inner solver {inner!r}")
    prefs = np.atleast_2d(np.asarray(prefs, dtype=np.float64))
    if len(prefs) == 0:
        raise ContractViolation("need at least one preference")
    archive = ParetoArchive(m=objective_dim(inst, kind))
    for w in prefs:
        sol = _solve_one(inst, kind, w, inner, two_opt, max_moves, all_starts)
        archive.insert(evaluate(inst, sol, kind), sol)
    return archive
