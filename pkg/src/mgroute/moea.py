"""NSGA-II loop with a multigraph chromosome, slot-aware operators and 2-opt local search.

A chromosome is an integer vector with one gene per visited node:
``gene = node * 100 + slot + 1`` where ``slot`` selects the parallel edge
toward the node of the next gene (cyclically).  CVRP-family instances use a
giant tour over the customers that is split greedily at capacity overflow.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import ContractViolation, MultiGraphInstance, ParetoArchive, RouteSet, Tour, leg_sum, nondominated_mask
from .heur import (
    best_slot_matrices,
    nearest_neighbor,
    nearest_neighbor_cvrp,
    two_opt_multigraph,
    two_opt_routes,
)
from .problems import CVRP_KINDS, check_kind, evaluate, objective_dim
from .prune import lift_routes, lift_tour, prune_linear
from .scalarize import preference_grid

__all__ = [
    "GENE_BASE",
    "DecodeError",
    "encode",
    "decode",
    "encode_routes",
    "decode_routes",
    "random_chromosome",
    "mutate",
    "edge_recombination",
    "lacomme_weights",
    "MoeaConfig",
    "nsga2_run",
    "random_search",
    "nondominated_rank",
    "crowding_distance",
]

GENE_BASE = 100


class DecodeError(ContractViolation):
    pass


def _split(genes) -> tuple[np.ndarray, np.ndarray]:
    g = np.asarray(genes, dtype=np.int64)
    return g // GENE_BASE, g % GENE_BASE - 1


def _join(nodes, slots) -> np.ndarray:
    return np.asarray(nodes, dtype=np.int64) * GENE_BASE + np.asarray(slots, dtype=np.int64) + 1


def encode(tour: Tour) -> np.ndarray:
    """Genes of a tour in visiting order."""
    if np.any(np.asarray(tour.slots) >= GENE_BASE - 1):
        raise ContractViolation(f"slot index too large for gene base {GENE_BASE}")
    return _join(tour.nodes, tour.slots)


def _pair_counts(inst: MultiGraphInstance, a, b) -> np.ndarray:
    return inst.counts.reshape(inst.n, inst.n)[a, b]


def decode(inst: MultiGraphInstance, genes) -> Tour:
    nodes, slots = _split(genes)
    if len(nodes) != inst.n or not np.array_equal(np.sort(nodes), np.arange(inst.n)):
        raise DecodeError("node parts are not a permutation of the instance nodes")
    cnt = _pair_counts(inst, nodes, np.roll(nodes, -1))
    bad = np.flatnonzero((slots < 0) | (slots >= cnt))
    if len(bad):
        raise DecodeError(f"gene {int(bad[0])}: slot part out of range")
    return Tour.from_order(nodes, slots)


def _depot_slots(inst: MultiGraphInstance) -> np.ndarray:
    # departure legs from the depot carry no gene; use the equal-weight best slot
    _, slot_map = prune_linear(inst, np.full(inst.m, 1.0 / inst.m))
    return slot_map[inst.depot]


def decode_routes(inst: MultiGraphInstance, genes) -> RouteSet:
    """Greedy capacity split of a giant tour over the customers.

    A gene's slot applies to the leg leaving its node, whether it goes to the
    next customer or back to the depot (clamped to the available slots).
    """
    nodes, slots = _split(genes)
    customers = np.setdiff1d(np.arange(inst.n), [inst.depot])
    if len(nodes) != len(customers) or not np.array_equal(np.sort(nodes), customers):
        raise DecodeError("node parts are not a permutation of the customers")
    if np.any(slots < 0):
        raise DecodeError("slot part out of range")
    counts = inst.counts.reshape(inst.n, inst.n)
    dep_slots = _depot_slots(inst)
    routes, load, cur = [], 0, []
    for k, v in enumerate(nodes):
        d = int(inst.demands[v])
        if cur and load + d > inst.capacity:
            routes.append(cur)
            cur, load = [], 0
        cur.append(k)
        load += d
    routes.append(cur)
    out = []
    for r in routes:
        steps = []
        prev = inst.depot
        first = int(nodes[r[0]])
        steps.append((prev, first, int(dep_slots[first])))
        for t, k in enumerate(r):
            u = int(nodes[k])
            w = int(nodes[r[t + 1]]) if t + 1 < len(r) else inst.depot
            steps.append((u, w, int(min(slots[k], counts[u, w] - 1))))
        out.append(tuple(steps))
    return RouteSet(tuple(out))


def encode_routes(routes: RouteSet) -> np.ndarray:
    nodes, slots = [], []
    for r in routes.routes:
        for s in r[1:]:
            nodes.append(s.src)
            slots.append(s.slot)
    return _join(nodes, slots)


def _customers_only(inst: MultiGraphInstance, kind: str) -> bool:
    return kind in CVRP_KINDS


def _to_solution(inst, kind, genes):
    if _customers_only(inst, kind):
        return decode_routes(inst, genes)
    tour = decode(inst, genes)
    if kind == "mgmotsptw":
        r = tour.nodes.index(inst.depot)
        tour = Tour.from_order(np.roll(tour.nodes, -r), np.roll(tour.slots, -r))
    return tour


def _from_solution(kind, sol) -> np.ndarray:
    return encode_routes(sol) if kind in CVRP_KINDS else encode(sol)


def _slot_limit(inst, kind, nodes) -> np.ndarray:
    """Valid slot count for every gene position."""
    nxt = np.roll(nodes, -1)
    cnt = _pair_counts(inst, nodes, nxt)
    if kind in CVRP_KINDS:
        # the leg may also end at the depot
        cnt = np.minimum(cnt, _pair_counts(inst, nodes, np.full_like(nodes, inst.depot)))
    return cnt


def random_chromosome(inst: MultiGraphInstance, rng: np.random.Generator, kind: str | None = None) -> np.ndarray:
    kind = check_kind(inst, kind)
    if kind in CVRP_KINDS:
        nodes = rng.permutation(np.setdiff1d(np.arange(inst.n), [inst.depot]))
    else:
        nodes = rng.permutation(inst.n)
    cnt = _slot_limit(inst, kind, nodes)
    slots = (rng.random(len(nodes)) * cnt).astype(np.int64)
    return _join(nodes, slots)


def mutate(inst: MultiGraphInstance, genes, rng: np.random.Generator, kind: str | None = None) -> np.ndarray:
    """Either move one gene to a random valid slot or reverse a node segment.

    In the reversal branch slot parts stay with their nodes and are then
    clamped to the slot range of the new successor.
    """
    kind = check_kind(inst, kind)
    nodes, slots = _split(genes)
    nodes, slots = nodes.copy(), slots.copy()
    k = len(nodes)
    if rng.random() < 0.5:
        i = int(rng.integers(k))
        cnt = int(_slot_limit(inst, kind, nodes)[i])
        slots[i] = int(rng.integers(cnt))
    else:
        i, j = sorted(int(v) for v in rng.choice(k, size=2, replace=False))
        nodes[i : j + 1] = nodes[i : j + 1][::-1].copy()
        slots[i : j + 1] = slots[i : j + 1][::-1].copy()
        slots = np.minimum(slots, _slot_limit(inst, kind, nodes) - 1)
    return _join(nodes, slots)


def edge_recombination(
    inst: MultiGraphInstance, parent_a, parent_b, rng: np.random.Generator, pref=None, kind: str | None = None
) -> np.ndarray:
    """Edge recombination over the undirected adjacency union of both parents.

    The next node is the neighbour with the fewest remaining neighbours; ties
    prefer a directed successor in one of the parents, then a random pick.
    A leg copies its slot from a parent that has the same directed leg
    (``parent_a`` first); otherwise it takes the linear-best slot for ``pref``.
    """
    kind = check_kind(inst, kind)
    na, sa = _split(parent_a)
    nb, sb = _split(parent_b)
    k = len(na)
    if pref is None:
        pref = np.full(inst.m, 1.0 / inst.m)
    _, slot_map = best_slot_matrices(inst, pref)

    succ = [dict(zip(na.tolist(), np.roll(na, -1).tolist())), dict(zip(nb.tolist(), np.roll(nb, -1).tolist()))]
    slot_of = [dict(zip(na.tolist(), sa.tolist())), dict(zip(nb.tolist(), sb.tolist()))]
    adj: dict[int, set] = {int(v): set() for v in na}
    for seq in (na, nb):
        for u, v in zip(seq.tolist(), np.roll(seq, -1).tolist()):
            adj[u].add(v)
            adj[v].add(u)

    cur = int(na[0])
    order = [cur]
    left = set(adj) - {cur}
    while left:
        for s in adj.values():
            s.discard(cur)
        cand = sorted(adj[cur])
        if cand:
            fewest = min(len(adj[c]) for c in cand)
            cand = [c for c in cand if len(adj[c]) == fewest]
            directed = [c for c in cand if succ[0][cur] == c or succ[1][cur] == c]
            if directed:
                cand = directed
            nxt = cand[int(rng.integers(len(cand)))] if len(cand) > 1 else cand[0]
        else:
            pool = sorted(left)
            nxt = pool[int(rng.integers(len(pool)))]
        order.append(nxt)
        left.discard(nxt)
        cur = nxt

    nodes = np.asarray(order, dtype=np.int64)
    slots = np.empty(k, dtype=np.int64)
    for t in range(k):
        u, v = int(nodes[t]), int(nodes[(t + 1) % k])
        if succ[0][u] == v:
            slots[t] = slot_of[0][u]
        elif succ[1][u] == v:
            slots[t] = slot_of[1][u]
        else:
            slots[t] = slot_map[u, v]
    slots = np.minimum(slots, _slot_limit(inst, kind, nodes) - 1)
    return _join(nodes, slots)


def lacomme_weights(pop_costs) -> np.ndarray:
    """Per-individual bi-objective weights from the position in the population's cost range.

    A collapsed range gives a zero raw weight for that objective; if both raw
    weights vanish the individual gets ``(0.5, 0.5)``.
    """
    F = np.asarray(pop_costs, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != 2:
        raise ContractViolation("weights are defined for two objectives")
    if len(F) < 2:
        raise ContractViolation("need a population of at least two")
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = hi - lo
    raw = np.zeros_like(F)
    ok = span > 0
    raw[:, ok] = (F[:, ok] - lo[ok]) / span[ok]
    tot = raw.sum(axis=1)
    W = np.full_like(F, 0.5)
    nz = tot > 0
    W[nz] = raw[nz] / tot[nz, None]
    return W


def nondominated_rank(F: np.ndarray) -> np.ndarray:
    """Front index (0 = non-dominated) of every row by repeated peeling."""
    F = np.asarray(F, dtype=np.float64)
    N = len(F)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    rank = np.full(N, -1, dtype=np.int64)
    front = np.flatnonzero(count == 0)
    r = 0
    while len(front):
        rank[front] = r
        count = count - dom[front].sum(axis=0)
        count[rank >= 0] = -1
        front = np.flatnonzero(count == 0)
        r += 1
    return rank


def crowding_distance(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    N, m = F.shape
    dist = np.zeros(N)
    if N <= 2:
        return np.full(N, np.inf)
    for j in range(m):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


@dataclass
class MoeaConfig:
    pop_size: int = 20
    generations: int = 100
    mutation_rate: float = 0.2
    crossover_rate: float = 0.9
    ls_moves: int = 5
    seed_prefs: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 4 or self.pop_size % 2:
            raise ContractViolation("pop_size must be even and at least 4")
        if not 0 <= self.generations <= 1000:
            raise ContractViolation("generations must lie in [0, 1000]")
        for name in ("mutation_rate", "crossover_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractViolation(f"{name} must lie in [0, 1]")
        if self.ls_moves < 0 or self.seed_prefs < 0:
            raise ContractViolation("ls_moves and seed_prefs must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def _seed_solutions(inst, kind, count):
    if count == 0:
        return []
    m = inst.m
    prefs = preference_grid(m, count) if m == 2 else np.eye(m)[:count]
    out = []
    for w in prefs:
        pruned, slot_map = prune_linear(inst, w)
        if kind in CVRP_KINDS:
            sol = lift_routes(nearest_neighbor_cvrp(pruned, w), slot_map)
        else:
            sol = lift_tour(nearest_neighbor(pruned, w, start=inst.depot if kind == "mgmotsptw" else 0), slot_map)
        out.append(_from_solution(kind, sol))
    return out


class _Evaluator:
    def __init__(self, inst, kind):
        self.inst, self.kind = inst, kind
        self.count = 0

    def __call__(self, genes):
        self.count += 1
        sol = _to_solution(self.inst, self.kind, genes)
        return evaluate(self.inst, sol, self.kind), sol


def _local_search(inst, kind, genes, w, moves, stats):
    sol = _to_solution(inst, kind, genes)
    if kind in CVRP_KINDS:
        sol = two_opt_routes(inst, sol, w, max_moves=moves, stats=stats)
    else:
        sol = two_opt_multigraph(inst, sol, w, max_moves=moves, stats=stats)
    return _from_solution(kind, sol)


def _tournament(rng, rank, crowd):
    i, j = rng.integers(len(rank), size=2)
    if rank[i] != rank[j]:
        return i if rank[i] < rank[j] else j
    return i if crowd[i] >= crowd[j] else j


def _select(F, size):
    rank = nondominated_rank(F)
    keep: list[int] = []
    for r in range(rank.max() + 1):
        idx = np.flatnonzero(rank == r)
        if len(keep) + len(idx) <= size:
            keep.extend(idx.tolist())
            continue
        cd = crowding_distance(F[idx])
        order = np.argsort(-cd, kind="stable")
        keep.extend(idx[order[: size - len(keep)]].tolist())
        break
    return np.asarray(keep, dtype=np.int64)


def nsga2_run(
    inst: MultiGraphInstance,
    kind: str | None,
    cfg: MoeaConfig,
    history: list | None = None,
    stats: dict | None = None,
) -> ParetoArchive:
    """Evolve a population and return the cumulative archive of every evaluated solution.

    ``history`` receives the archive cost matrix after initialization and after
    every generation.  ``stats["evaluations"]`` counts full solution
    evaluations plus every 2-opt move scanned by the local search.
    """
    kind = check_kind(inst, kind)
    m = objective_dim(inst, kind)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    ev = _Evaluator(inst, kind)
    ls_stats: dict = {}
    archive = ParetoArchive(m=m)

    seeds = _seed_solutions(inst, kind, min(cfg.seed_prefs, cfg.pop_size))
    pop = seeds + [random_chromosome(inst, rng, kind) for _ in range(cfg.pop_size - len(seeds))]
    F = np.empty((len(pop), m))
    for i, g in enumerate(pop):
        F[i], sol = ev(g)
        archive.insert(F[i], sol)
    if history is not None:
        history.append(archive.costs())

    for _ in range(cfg.generations):
        rank = nondominated_rank(F)
        crowd = np.zeros(len(pop))
        for r in np.unique(rank):
            idx = np.flatnonzero(rank == r)
            crowd[idx] = crowding_distance(F[idx])
        W = lacomme_weights(F) if m == 2 else np.full((len(pop), m), 1.0 / m)

        children = []
        for _ in range(cfg.pop_size):
            a = _tournament(rng, rank, crowd)
            b = _tournament(rng, rank, crowd)
            if rng.random() < cfg.crossover_rate:
                child = edge_recombination(inst, pop[a], pop[b], rng, pref=W[a], kind=kind)
            else:
                child = pop[a].copy()
            if rng.random() < cfg.mutation_rate:
                child = mutate(inst, child, rng, kind)
            children.append(child)

        Fc = np.empty((len(children), m))
        for i, g in enumerate(children):
            Fc[i], _ = ev(g)
        if cfg.ls_moves > 0:
            Wc = lacomme_weights(np.vstack([F, Fc]))[len(pop) :] if m == 2 else np.full((len(children), m), 1.0 / m)
            for i in range(len(children)):
                children[i] = _local_search(inst, kind, children[i], Wc[i], cfg.ls_moves, ls_stats)
                Fc[i], _ = ev(children[i])
        for i, g in enumerate(children):
            archive.insert(Fc[i], _to_solution(inst, kind, g))

        union = pop + children
        FU = np.vstack([F, Fc])
        keep = _select(FU, cfg.pop_size)
        pop = [union[i] for i in keep]
        F = FU[keep]
        if history is not None:
            history.append(archive.costs())

    if stats is not None:
        stats["evaluations"] = ev.count + int(ls_stats.get("scanned", 0))
        stats["full_evaluations"] = ev.count
    return archive


def random_search(inst: MultiGraphInstance, kind: str | None, evaluations: int, seed: int = 0) -> ParetoArchive:
    """Archive of ``evaluations`` uniformly random chromosomes."""
    kind = check_kind(inst, kind)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    archive = ParetoArchive(m=objective_dim(inst, kind))
    if kind in ("motsp", "mgmotsp"):
        return _random_tours(inst, int(evaluations), rng, archive)
    for _ in range(int(evaluations)):
        g = random_chromosome(inst, rng, kind)
        sol = _to_solution(inst, kind, g)
        archive.insert(evaluate(inst, sol, kind), sol)
    return archive


def _random_tours(inst, count, rng, archive, chunk=4096):
    # batched version of the loop above for plain tours
    n = inst.n
    counts = inst.counts.reshape(n, n)
    done = 0
    while done < count:
        c = min(chunk, count - done)
        nodes = rng.permuted(np.tile(np.arange(n), (c, 1)), axis=1)
        nxt = np.roll(nodes, -1, axis=1)
        cnt = counts[nodes, nxt]
        slots = (rng.random((c, n)) * cnt).astype(np.int64)
        ids = inst.pair_ptr[nodes * n + nxt] + slots
        F = leg_sum(inst.costs[ids], axis=1)
        for i in np.flatnonzero(nondominated_mask(F)):
            archive.insert(F[i], Tour.from_order(nodes[i], slots[i]))
        done += c
    return archive
