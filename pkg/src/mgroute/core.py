"""Multigraph instances, solutions, Pareto dominance and archives.

Every other module builds on the types defined here.  A simple graph is just a
multigraph with exactly one parallel edge per ordered node pair, so there is a
single code path for both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "ContractViolation",
    "InstanceError",
    "EdgeRef",
    "MultiGraphInstance",
    "Tour",
    "RouteSet",
    "ParetoArchive",
    "dominates",
    "nondominated_mask",
    "leg_sum",
    "pareto_filter",
    "archive_insert",
    "validate_tour",
    "validate_routes",
]

MAX_DEMAND = 9


class ContractViolation(ValueError):
    """An operation was called with inputs outside its contract."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class InstanceError(ContractViolation):
    """A MultiGraphInstance violates one of its invariants."""


class EdgeRef(NamedTuple):
    src: int
    dst: int
    slot: int


@dataclass(frozen=True, eq=False)
class MultiGraphInstance:
    """Directed multigraph with ``m``-dimensional edge costs.

    Edges are stored flat, sorted by ``(src, dst, slot)``.  ``pair_ptr`` has
    ``n * n + 1`` entries; the parallel edges of ordered pair ``(i, j)`` are
    ``costs[pair_ptr[i * n + j]:pair_ptr[i * n + j + 1]]``.  Diagonal pairs are
    empty.  Arrays are read-only.
    """

    n: int
    m: int
    costs: np.ndarray
    pair_ptr: np.ndarray
    demands: np.ndarray | None = None
    windows: np.ndarray | None = None
    depot: int | None = None
    capacity: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        costs = np.ascontiguousarray(self.costs, dtype=np.float64)
        ptr = np.ascontiguousarray(self.pair_ptr, dtype=np.int64)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "pair_ptr", ptr)
        if self.demands is not None:
            object.__setattr__(self, "demands", np.asarray(self.demands, dtype=np.int64))
        if self.windows is not None:
            object.__setattr__(self, "windows", np.asarray(self.windows, dtype=np.float64))
        for arr in (self.costs, self.pair_ptr, self.demands, self.windows):
            if arr is not None:
                arr.setflags(write=False)
        self._check()

    def _check(self):
        n, m = self.n, self.m
        if n < 2:
            raise InstanceError(f"need at least 2 nodes, got n={n}")
        if m < 1:
            raise InstanceError(f"need m >= 1, got m={m}")
        if self.costs.ndim != 2 or self.costs.shape[1] != m:
            raise InstanceError(f"costs must have shape (E, {m}), got {self.costs.shape}")
        if self.pair_ptr.shape != (n * n + 1,):
            raise InstanceError("pair_ptr must have n*n+1 entries")
        if self.pair_ptr[0] != 0 or self.pair_ptr[-1] != len(self.costs):
            raise InstanceError("pair_ptr does not span the edge array")
        counts = np.diff(self.pair_ptr).reshape(n, n)
        if np.any(counts < 0):
            raise InstanceError("pair_ptr must be non-decreasing")
        if np.any(np.diag(counts) != 0):
            raise InstanceError("self-loops are not allowed")
        off = ~np.eye(n, dtype=bool)
        if np.any(counts[off] < 1):
            i, j = np.argwhere((counts < 1) & off)[0]
            raise InstanceError(f"pair ({i}, {j}) has no edge")
        if not np.all(np.isfinite(self.costs)):
            raise InstanceError("edge costs must be finite")
        if np.any(self.costs < 0):
            raise InstanceError("edge costs must be non-negative")
        if self.depot is not None and not 0 <= self.depot < n:
            raise InstanceError(f"depot {self.depot} out of range")
        if self.capacity is not None:
            if self.depot is None:
                raise InstanceError("capacity given without a depot")
            if self.demands is None or self.demands.shape != (n,):
                raise InstanceError("capacity given without per-node demands")
            cust = np.delete(self.demands, self.depot)
            if np.any(cust < 1) or np.any(cust > MAX_DEMAND):
                raise InstanceError(f"customer demands must lie in 1..{MAX_DEMAND}")
            if np.any(cust > self.capacity):
                raise InstanceError("a customer demand exceeds the capacity")
        if self.windows is not None:
            if self.windows.shape != (n, 2):
                raise InstanceError("windows must have shape (n, 2)")
            if self.depot is None:
                raise InstanceError("time windows require a depot")
            cust = np.delete(self.windows, self.depot, axis=0)
            if not np.all(cust[:, 0] < cust[:, 1]):
                raise InstanceError("every time window needs start < end")

    # construction -------------------------------------------------------

    @classmethod
    def from_pair_costs(cls, n: int, pair_costs, **payload) -> "MultiGraphInstance":
        """Build from a mapping ``(i, j) -> array (k, m)`` of parallel-edge costs."""
        blocks, ptr = [], [0]
        m = None
        for i in range(n):
            for j in range(n):
                if i == j:
                    ptr.append(ptr[-1])
                    continue
                if (i, j) not in pair_costs:
                    raise InstanceError(f"pair ({i}, {j}) has no edge")
                block = np.atleast_2d(np.asarray(pair_costs[(i, j)], dtype=np.float64))
                m = block.shape[1] if m is None else m
                if block.shape[1] != m:
                    raise InstanceError(f"pair ({i}, {j}) has cost dimension {block.shape[1]} != {m}")
                blocks.append(block)
                ptr.append(ptr[-1] + len(block))
        costs = np.concatenate(blocks, axis=0)
        return cls(n=n, m=int(m), costs=costs, pair_ptr=np.asarray(ptr), **payload)

    @classmethod
    def from_dense(cls, dense, **payload) -> "MultiGraphInstance":
        """Build from a dense ``(n, n, x, m)`` or ``(n, n, m)`` array (diagonal ignored)."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim == 3:
            dense = dense[:, :, None, :]
        n, _, x, m = dense.shape
        off = ~np.eye(n, dtype=bool)
        costs = dense[off].reshape(-1, m)
        counts = np.where(off, x, 0).ravel()
        ptr = np.concatenate([[0], np.cumsum(counts)])
        return cls(n=n, m=m, costs=costs, pair_ptr=ptr, **payload)

    def replace(self, **changes) -> "MultiGraphInstance":
        fields = dict(
            n=self.n, m=self.m, costs=self.costs, pair_ptr=self.pair_ptr, demands=self.demands,
            windows=self.windows, depot=self.depot, capacity=self.capacity, meta=dict(self.meta),
        )
        fields.update(changes)
        return MultiGraphInstance(**fields)

    # queries ------------------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self.costs)

    @cached_property
    def counts(self) -> np.ndarray:
        """``(n, n)`` parallel-edge counts (zero on the diagonal)."""
        c = np.diff(self.pair_ptr).reshape(self.n, self.n)
        c.setflags(write=False)
        return c

    @cached_property
    def src(self) -> np.ndarray:
        return np.repeat(np.arange(self.n * self.n) // self.n, self.counts.ravel())

    @cached_property
    def dst(self) -> np.ndarray:
        return np.repeat(np.arange(self.n * self.n) % self.n, self.counts.ravel())

    @cached_property
    def slot(self) -> np.ndarray:
        return np.arange(self.num_edges) - np.repeat(self.pair_ptr[:-1], self.counts.ravel())

    @property
    def max_slots(self) -> int:
        return int(self.counts.max())

    @property
    def is_simple(self) -> bool:
        off = ~np.eye(self.n, dtype=bool)
        return bool(np.all(self.counts[off] == 1))

    def parallel_count(self, i: int, j: int) -> int:
        return int(self.counts[i, j])

    def edge_id(self, i: int, j: int, slot: int) -> int:
        if not 0 <= slot < self.counts[i, j]:
            raise ContractViolation(f"slot {slot} out of range for pair ({i}, {j})")
        return int(self.pair_ptr[i * self.n + j] + slot)

    def slot_costs(self, i: int, j: int) -> np.ndarray:
        p = i * self.n + j
        return self.costs[self.pair_ptr[p]:self.pair_ptr[p + 1]]

    def __eq__(self, other):
        if not isinstance(other, MultiGraphInstance):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b, equal_nan=a.dtype.kind == "f")

        return (
            self.n == other.n and self.m == other.m and self.depot == other.depot
            and self.capacity == other.capacity and same(self.costs, other.costs)
            and same(self.pair_ptr, other.pair_ptr) and same(self.demands, other.demands)
            and same(self.windows, other.windows)
        )

    __hash__ = None


@dataclass(frozen=True)
class Tour:
    """Closed tour as a chain of edge references."""

    steps: tuple[EdgeRef, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(EdgeRef(*map(int, s)) for s in self.steps))

    @classmethod
    def from_order(cls, order: Sequence[int], slots: Sequence[int] | None = None) -> "Tour":
        order = [int(v) for v in order]
        slots = [0] * len(order) if slots is None else [int(s) for s in slots]
        k = len(order)
        return cls(tuple(EdgeRef(order[t], order[(t + 1) % k], slots[t]) for t in range(k)))

    @property
    def nodes(self) -> list[int]:
        return [s.src for s in self.steps]

    @property
    def slots(self) -> list[int]:
        return [s.slot for s in self.steps]

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class RouteSet:
    """Depot-anchored routes; each route is a chain of edge references."""

    routes: tuple[tuple[EdgeRef, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "routes", tuple(tuple(EdgeRef(*map(int, s)) for s in r) for r in self.routes)
        )

    @classmethod
    def from_orders(cls, depot: int, orders, slots=None) -> "RouteSet":
        """Build from customer sequences; each is closed through ``depot``."""
        routes = []
        for r, order in enumerate(orders):
            path = [depot, *order, depot]
            sl = [0] * (len(path) - 1) if slots is None else slots[r]
            routes.append(tuple(EdgeRef(path[t], path[t + 1], sl[t]) for t in range(len(path) - 1)))
        return cls(tuple(routes))

    @property
    def steps(self) -> list[EdgeRef]:
        return [s for r in self.routes for s in r]


def _as_vec(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64).ravel()


def dominates(a, b) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    a, b = _as_vec(a), _as_vec(b)
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return bool(np.all(a <= b) and np.any(a < b))


def leg_sum(costs, axis: int = 0) -> np.ndarray:
    """Sum leg costs in sorted order so that any ordering of the same legs gives identical bits.

    A tour and its reverse then cost exactly the same on symmetric graphs.
    """
    return np.sort(np.asarray(costs, dtype=np.float64), axis=axis).sum(axis=axis)


def nondominated_mask(points) -> np.ndarray:
    """Boolean mask of the points that no other point dominates.

    Equal points do not dominate each other, so duplicates of a
    non-dominated value all survive.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.size == 0:
        return np.zeros(len(P), dtype=bool)
    if P.ndim != 2:
        raise ContractViolation("points must form a 2-d array")
    N, m = P.shape
    if m == 2:
        order = np.lexsort((P[:, 1], P[:, 0]))
        f1, f2 = P[order, 0], P[order, 1]
        # index of the first element of each equal-f1 group
        new_group = np.empty(N, dtype=bool)
        new_group[0] = True
        new_group[1:] = f1[1:] != f1[:-1]
        group_start = np.maximum.accumulate(np.where(new_group, np.arange(N), 0))
        run_min = np.minimum.accumulate(f2)
        prev_min = np.full(N, np.inf)
        has_prev = group_start > 0
        prev_min[has_prev] = run_min[group_start[has_prev] - 1]
        group_min = f2[group_start]  # sorted by f2 within the group
        dominated = (prev_min <= f2) | (group_min < f2)
        mask = np.empty(N, dtype=bool)
        mask[order] = ~dominated
        return mask
    # generic: scan in order of increasing coordinate sum
    order = np.argsort(P.sum(axis=1), kind="stable")
    keep: list[int] = []
    mask = np.zeros(N, dtype=bool)
    for idx in order:
        p = P[idx]
        if keep:
            K = P[keep]
            if np.any(np.all(K <= p, axis=1) & np.any(K < p, axis=1)):
                continue
        keep.append(idx)
    mask[keep] = True
    return mask


def pareto_filter(points: Iterable) -> list:
    """Return the non-dominated points, preserving their input order."""
    pts = list(points)
    if not pts:
        return []
    mask = nondominated_mask(np.asarray(pts, dtype=np.float64))
    return [p for p, keep in zip(pts, mask) if keep]


class ParetoArchive:
    """Mutable set of mutually non-dominated ``(cost, solution)`` entries."""

    def __init__(self, m: int | None = None, entries=()):
        self.m = m
        self.entries: list[tuple[np.ndarray, Any]] = []
        for cost, sol in entries:
            self.insert(cost, sol)

    def insert(self, cost, sol=None) -> bool:
        cost = _as_vec(cost)
        if self.m is None:
            self.m = len(cost)
        elif len(cost) != self.m:
            raise ContractViolation(f"cost dimension {len(cost)} != archive dimension {self.m}")
        if self.entries:
            C = self.costs()
            if np.any(np.all(C <= cost, axis=1) & np.any(C < cost, axis=1)):
                return False
            beaten = np.all(cost <= C, axis=1) & np.any(cost < C, axis=1)
            if beaten.any():
                self.entries = [e for e, b in zip(self.entries, beaten) if not b]
        self.entries.append((cost, sol))
        return True

    def merge(self, other: "ParetoArchive") -> "ParetoArchive":
        for cost, sol in other.entries:
            self.insert(cost, sol)
        return self

    def costs(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.m or 0))
        return np.stack([c for c, _ in self.entries])

    def solutions(self) -> list:
        return [s for _, s in self.entries]

    def value_set(self, decimals: int | None = None) -> set[tuple[float, ...]]:
        C = self.costs()
        if decimals is not None:
            C = np.round(C, decimals)
        return {tuple(map(float, c)) for c in C}

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __repr__(self):
        return f"ParetoArchive(m={self.m}, size={len(self)})"


def archive_insert(archive: ParetoArchive, cost, sol=None) -> bool:
    """Insert ``cost`` unless an entry dominates it; evict entries it dominates."""
    return archive.insert(cost, sol)


def _check_steps(inst: MultiGraphInstance, steps, out: list[str]):
    for t, s in enumerate(steps):
        if not (0 <= s.src < inst.n and 0 <= s.dst < inst.n):
            out.append(f"slot: step {t} references node outside 0..{inst.n - 1}")
            return False
        if s.src == s.dst:
            out.append(f"slot: step {t} is a self-loop at node {s.src}")
            return False
        if not 0 <= s.slot < inst.counts[s.src, s.dst]:
            out.append(
                f"slot: step {t} uses slot {s.slot} but pair ({s.src}, {s.dst}) "
                f"has {inst.counts[s.src, s.dst]} edge(s)"
            )
            return False
    return True


def validate_tour(inst: MultiGraphInstance, tour: Tour) -> list[str]:
    """Check a closed tour against ``inst``; an empty list means valid.

    At most one message is reported per category (slot, chaining, coverage).
    """
    steps = tour.steps
    out: list[str] = []
    if not steps:
        return ["coverage: empty tour"]
    _check_steps(inst, steps, out)
    for t in range(len(steps)):
        nxt = steps[(t + 1) % len(steps)]
        if steps[t].dst != nxt.src:
            which = "closing step" if t == len(steps) - 1 else f"step {t}"
            out.append(f"chaining: {which} ends at {steps[t].dst} but next starts at {nxt.src}")
            break
    visited = [s.src for s in steps]
    if len(visited) != inst.n or set(visited) != set(range(inst.n)):
        missing = sorted(set(range(inst.n)) - set(visited))
        dup = sorted({v for v in visited if visited.count(v) > 1})
        out.append(f"coverage: missing nodes {missing}, repeated nodes {dup}")
    return out


def validate_routes(inst: MultiGraphInstance, routes: RouteSet) -> list[str]:
    """Check a depot-anchored route set; an empty list means valid."""
    out: list[str] = []
    if inst.depot is None:
        return ["coverage: instance has no depot"]
    depot = inst.depot
    seen: list[int] = []
    for r, route in enumerate(routes.routes):
        if not route:
            out.append(f"coverage: route {r} is empty")
            continue
        _check_steps(inst, route, out)
        if route[0].src != depot or route[-1].dst != depot:
            out.append(f"chaining: route {r} does not start and end at the depot")
        for t in range(len(route) - 1):
            if route[t].dst != route[t + 1].src:
                out.append(f"chaining: route {r} breaks after step {t}")
                break
        custs = [s.dst for s in route[:-1]]
        if depot in custs:
            out.append(f"chaining: route {r} passes through the depot mid-route")
        seen.extend(custs)
        if inst.capacity is not None and inst.demands is not None:
            load = int(inst.demands[[c for c in custs if 0 <= c < inst.n]].sum())
            if load > inst.capacity:
                out.append(f"capacity: route {r} carries {load} > {inst.capacity}")
    expected = set(range(inst.n)) - {depot}
    if sorted(seen) != sorted(expected):
        missing = sorted(expected - set(seen))
        dup = sorted({v for v in seen if seen.count(v) > 1})
        out.append(f"coverage: missing customers {missing}, repeated customers {dup}")
    return out
