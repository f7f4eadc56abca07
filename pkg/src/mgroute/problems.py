"""Objective evaluation for the five problem families and brute-force oracles."""

from __future__ import annotations

from itertools import permutations
from functools import lru_cache
from math import factorial
from typing import Iterator

import numpy as np

from .core import (
    ContractViolation,
    MultiGraphInstance,
    ParetoArchive,
    RouteSet,
    Tour,
    leg_sum,
    nondominated_mask,
    validate_routes,
    validate_tour,
)

__all__ = [
    "PROBLEM_KINDS",
    "TSP_KINDS",
    "CVRP_KINDS",
    "EARLY_ARRIVAL_VIOLATES",
    "infer_kind",
    "check_kind",
    "objective_dim",
    "eval_tsp",
    "eval_cvrp",
    "eval_tsptw",
    "evaluate",
    "tour_count",
    "iter_tour_blocks",
    "exhaustive_pareto",
    "brute_force_scalarized",
    "TSP_CAP",
    "CVRP_CAP",
    "enumeration_size",
]

PROBLEM_KINDS = ("motsp", "mgmotsp", "mocvrp", "mgmocvrp", "mgmotsptw")
TSP_KINDS = ("motsp", "mgmotsp")
CVRP_KINDS = ("mocvrp", "mgmocvrp")
TSP_CAP = 9
CVRP_CAP = 7

# No waiting is allowed, so arriving before a window opens misses it.
EARLY_ARRIVAL_VIOLATES = True


def infer_kind(inst: MultiGraphInstance) -> str:
    tag = inst.meta.get("problem")
    if tag in PROBLEM_KINDS:
        return tag
    if inst.windows is not None:
        return "mgmotsptw"
    if inst.capacity is not None:
        return "mgmocvrp" if inst.m >= 2 else "mocvrp"
    return "motsp" if inst.is_simple else "mgmotsp"


def check_kind(inst: MultiGraphInstance, kind: str | None) -> str:
    kind = infer_kind(inst) if kind is None else kind.lower()
    if kind not in PROBLEM_KINDS:
        raise ContractViolation(f"unknown problem kind {kind!r}")
    if kind in CVRP_KINDS and inst.capacity is None:
        raise ContractViolation(f"{kind} needs an instance with depot, demands and capacity")
    if kind == "mgmotsptw" and inst.windows is None:
        raise ContractViolation("mgmotsptw needs time windows")
    if kind == "mocvrp" and inst.m != 1:
        raise ContractViolation("mocvrp expects a single distance feature")
    return kind


def objective_dim(inst: MultiGraphInstance, kind: str) -> int:
    return 2 if kind in ("mocvrp", "mgmotsptw") else inst.m


def _edge_ids(inst: MultiGraphInstance, steps) -> np.ndarray:
    n = inst.n
    return np.array([inst.pair_ptr[s.src * n + s.dst] + s.slot for s in steps], dtype=np.int64)


def eval_tsp(inst: MultiGraphInstance, tour: Tour) -> np.ndarray:
    """Sum of the cost vectors of the traversed edges."""
    report = validate_tour(inst, tour)
    if report:
        raise ContractViolation("invalid tour: " + "; ".join(report), report)
    return leg_sum(inst.costs[_edge_ids(inst, tour.steps)])


def eval_cvrp(inst: MultiGraphInstance, routes: RouteSet) -> np.ndarray:
    """(total distance, makespan) for one distance feature, else per-feature totals."""
    report = validate_routes(inst, routes)
    if report:
        raise ContractViolation("invalid route set: " + "; ".join(report), report)
    per_route = np.stack([leg_sum(inst.costs[_edge_ids(inst, r)]) for r in routes.routes])
    if inst.m == 1:
        d = per_route[:, 0]
        return np.array([leg_sum(d), d.max()])
    return leg_sum(per_route)


def _window_violated(arrival: np.ndarray, start, end) -> np.ndarray:
    late = arrival > end
    if EARLY_ARRIVAL_VIOLATES:
        return late | (arrival < start)
    return late


def eval_tsptw(inst: MultiGraphInstance, tour: Tour) -> np.ndarray:
    """(number of violated windows, total distance); edge features are (time, distance).

    The vehicle leaves the depot at t=0, never waits and has no service time.
    """
    if inst.windows is None or inst.depot is None:
        raise ContractViolation("instance has no time windows")
    report = validate_tour(inst, tour)
    if report:
        raise ContractViolation("invalid tour: " + "; ".join(report), report)
    steps = tour.steps
    if steps[0].src != inst.depot:
        raise ContractViolation("a time-window tour must start at the depot")
    c = inst.costs[_edge_ids(inst, steps)]
    arrival = np.cumsum(c[:, 0])[:-1]  # arrival times at the customers
    custs = [s.dst for s in steps[:-1]]
    w = inst.windows[custs]
    violations = int(_window_violated(arrival, w[:, 0], w[:, 1]).sum())
    return np.array([float(violations), leg_sum(c[:, 1])])


def evaluate(inst: MultiGraphInstance, solution, kind: str | None = None) -> np.ndarray:
    kind = check_kind(inst, kind)
    if kind in CVRP_KINDS:
        return eval_cvrp(inst, solution)
    if kind == "mgmotsptw":
        return eval_tsptw(inst, solution)
    return eval_tsp(inst, solution)


# enumeration ----------------------------------------------------------------


def tour_count(inst: MultiGraphInstance) -> int:
    """Number of distinct tours with node 0 first: ``sum over orders of prod of slot counts``."""
    o = _orders(inst.n)
    per_order = inst.counts[o, np.roll(o, -1, axis=1)].prod(axis=1)
    return int(per_order.sum())


@lru_cache(maxsize=16)
def _orders(n: int) -> np.ndarray:
    """Every node order that starts at node 0, as an ``((n-1)!, n)`` array."""
    rest = np.array(list(permutations(range(1, n))), dtype=np.int64).reshape(-1, n - 1)
    out = np.concatenate([np.zeros((len(rest), 1), dtype=np.int64), rest], axis=1)
    out.setflags(write=False)
    return out


def iter_tour_blocks(
    inst: MultiGraphInstance, chunk_elems: int = 2_000_000
) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Enumerate every tour with node 0 first, in chunks.

    Yields ``(orders, slots, leg_costs)``: ``orders`` is ``(C, n)``, ``slots``
    is ``(S, n)`` (all slot assignments, shared by the chunk) and ``leg_costs``
    is ``(C, S, n, m)``.  When slot counts differ between pairs each chunk
    holds a single order.
    """
    n = inst.n
    orders = _orders(n)
    off = ~np.eye(n, dtype=bool)
    uniform = bool(np.all(inst.counts[off] == inst.counts[off][0]))
    if uniform:
        x = int(inst.counts[off][0])
        slots = np.indices((x,) * n).reshape(n, -1).T
        step = max(1, chunk_elems // (len(slots) * n))
        for lo in range(0, len(orders), step):
            o = orders[lo:lo + step]
            base = inst.pair_ptr[o * n + np.roll(o, -1, axis=1)]
            yield o, slots, inst.costs[base[:, None, :] + slots[None, :, :]]
        return
    for o in orders:
        dst = np.roll(o, -1)
        counts = inst.counts[o, dst]
        base = inst.pair_ptr[o * n + dst]
        slots = np.indices(tuple(counts)).reshape(n, -1).T
        yield o[None, :], slots, inst.costs[base + slots][None]


def _tsptw_objectives(inst: MultiGraphInstance, orders: np.ndarray, leg_costs: np.ndarray) -> np.ndarray:
    """Objectives for leg costs ``(C, S, n, 2)`` of orders ``(C, n)`` -> ``(C, S, 2)``."""
    arrival = np.cumsum(leg_costs[:, :, :-1, 0], axis=2)
    w = inst.windows[orders[:, 1:]][:, None]  # (C, 1, n-1, 2)
    viol = _window_violated(arrival, w[..., 0], w[..., 1]).sum(axis=2)
    return np.stack([viol.astype(np.float64), leg_sum(leg_costs[..., 1], axis=2)], axis=-1)


def _check_tsp_cap(inst):
    if inst.n > TSP_CAP:
        raise ContractViolation(f"exhaustive enumeration is capped at n <= {TSP_CAP} for tours (got n={inst.n})")


def exhaustive_pareto(inst: MultiGraphInstance, kind: str | None = None) -> ParetoArchive:
    """Exact Pareto archive by enumerating every feasible solution.

    Tour problems enumerate all node orders (node 0 / the depot first) times
    all slot assignments.  CVRP problems enumerate every set of routes and, per
    route set, keep the Pareto-optimal slot assignments (exact, since totals
    are additive over legs).
    """
    kind = check_kind(inst, kind)
    if kind in CVRP_KINDS:
        return _exhaustive_cvrp(inst, kind)
    _check_tsp_cap(inst)
    if kind == "mgmotsptw" and inst.depot != 0:
        raise ContractViolation("enumeration assumes the depot is node 0")
    archive = ParetoArchive(m=objective_dim(inst, kind))
    for orders, slots, legs in iter_tour_blocks(inst):
        F = _tsptw_objectives(inst, orders, legs) if kind == "mgmotsptw" else leg_sum(legs, axis=2)
        S = len(slots)
        F = F.reshape(-1, F.shape[-1])
        for k in np.flatnonzero(nondominated_mask(F)):
            archive.insert(F[k], Tour.from_order(orders[k // S], slots[k % S]))
    return archive


def brute_force_scalarized(inst: MultiGraphInstance, prefs, kind: str = "linear") -> np.ndarray:
    """Minimal scalarized tour cost over every tour of the multigraph, per preference."""
    _check_tsp_cap(inst)
    W = np.atleast_2d(np.asarray(prefs, dtype=np.float64))
    best = np.full(len(W), np.inf)
    for _, _, legs in iter_tour_blocks(inst):
        F = leg_sum(legs, axis=2).reshape(-1, inst.m)
        if kind == "linear":
            vals = F @ W.T
        else:
            vals = np.max(np.abs(F)[:, None, :] * W[None, :, :], axis=2)
        best = np.minimum(best, vals.min(axis=0))
    return best


def _ordered_partitions(items, demands, capacity):
    """Yield lists of routes (tuples) covering ``items``; route order canonical by first customer."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    # the route containing ``first``: choose its other members and their order
    k = len(rest)
    for mask in range(1 << k):
        members = [rest[b] for b in range(k) if mask >> b & 1]
        others = [rest[b] for b in range(k) if not mask >> b & 1]
        load = demands[first] + sum(demands[v] for v in members)
        if load > capacity:
            continue
        group = [first, *members]
        for perm in permutations(group):
            for tail in _ordered_partitions(others, demands, capacity):
                yield [perm, *tail]


def _exhaustive_cvrp(inst: MultiGraphInstance, kind: str) -> ParetoArchive:
    if inst.n > CVRP_CAP:
        raise ContractViolation(f"exhaustive enumeration is capped at n <= {CVRP_CAP} for CVRP (got n={inst.n})")
    depot = inst.depot
    custs = [v for v in range(inst.n) if v != depot]
    archive = ParetoArchive(m=2)
    n = inst.n
    for routes in _ordered_partitions(custs, inst.demands, inst.capacity):
        legs = []
        for r in routes:
            path = [depot, *r, depot]
            legs.extend((path[t], path[t + 1]) for t in range(len(path) - 1))
        if kind == "mocvrp":
            # single feature, single slot per pair
            per_route = []
            for r in routes:
                path = [depot, *r, depot]
                per_route.append(leg_sum([inst.slot_costs(path[t], path[t + 1])[0, 0] for t in range(len(path) - 1)]))
            F = np.array([leg_sum(per_route), max(per_route)])
            archive.insert(F, RouteSet.from_orders(depot, routes))
            continue
        # Pareto-optimal slot assignments via incremental Minkowski sums
        pts = np.zeros((1, inst.m))
        choice = np.zeros((1, 0), dtype=np.int64)
        for a, b in legs:
            sc = inst.slot_costs(a, b)
            pts = (pts[:, None, :] + sc[None, :, :]).reshape(-1, inst.m)
            choice = np.concatenate(
                [np.repeat(choice, len(sc), axis=0), np.tile(np.arange(len(sc)), len(choice))[:, None]], axis=1
            )
            keep = nondominated_mask(pts)
            pts, choice = pts[keep], choice[keep]
        for ch in choice:
            slots, pos = [], 0
            for r in routes:
                slots.append(list(ch[pos:pos + len(r) + 1]))
                pos += len(r) + 1
            sol = RouteSet.from_orders(depot, routes, slots)
            archive.insert(eval_cvrp(inst, sol), sol)
    return archive


def enumeration_size(inst: MultiGraphInstance) -> int:
    """``(n-1)!`` times the slot product, valid when every pair has the same slot count."""
    x = inst.max_slots
    return factorial(inst.n - 1) * x ** inst.n
