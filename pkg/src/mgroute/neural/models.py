"""Edge-based and dual-head multigraph policies with preference-conditioned decoders."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from ..core import ContractViolation, RouteSet, Tour
from ..problems import CVRP_KINDS, EARLY_ARRIVAL_VIOLATES, PROBLEM_KINDS
from ..prune import prune_linear
from .graph import GraphBatch, context_dim, feature_dim
from .hypernet import HyperNet
from .layers import NORMS, Dense, GreatLayer, GreatPool, TransformerLayer

__all__ = [
    "ModelConfig",
    "Rollout",
    "RouteState",
    "GMSEB",
    "GMSDH",
    "scalar_edge_cost",
    "chebyshev_reward",
    "check_finite_grads",
]

SCORE_COSTS = ("linear", "chebyshev")


@dataclass
class ModelConfig:
    """Architecture knobs.  ``layers`` is L for the edge model and L1 for the dual-head model."""

    problem: str = "motsp"
    m: int = 2
    d: int = 32
    heads: int = 4
    layers: int = 2
    l2: int = 1
    l3: int = 1
    clip: float = 10.0
    hyper_hidden: tuple = (128, 128)
    score_cost: str = "linear"
    norm: str = "instance"
    ff_mult: int = 2
    hyper_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.hyper_hidden = tuple(int(h) for h in self.hyper_hidden)
        if self.problem not in PROBLEM_KINDS:
            raise ContractViolation(f"unknown problem {self.problem!r}")
        if self.d % (2 * self.heads):
            raise ContractViolation("d must be divisible by 2 * heads")
        if min(self.layers, self.l2, self.l3) < 1:
            raise ContractViolation("all layer counts must be at least 1")
        if self.score_cost not in SCORE_COSTS:
            raise ContractViolation(f"score_cost must be one of {SCORE_COSTS}")
        if self.norm not in NORMS:
            raise ContractViolation(f"norm must be one of {NORMS}")
        if self.clip <= 0:
            raise ContractViolation("clip must be positive")

    @property
    def n_obj(self) -> int:
        if self.problem in CVRP_KINDS and self.m == 1:
            return 2
        return self.m

    @property
    def n_features(self) -> int:
        return feature_dim(self.problem, self.m)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hyper_hidden"] = list(self.hyper_hidden)
        return out


def scalar_edge_cost(costs: torch.Tensor, pref: torch.Tensor, how: str = "linear") -> torch.Tensor:
    if costs.shape[1] == 1:
        return costs[:, 0]
    if how == "linear":
        return costs @ pref
    return (costs * pref).amax(-1)


def chebyshev_reward(obj: torch.Tensor, pref: torch.Tensor) -> torch.Tensor:
    """Negative weighted max-deviation from the zero ideal point."""
    return -(pref * obj.abs()).amax(-1)


def check_finite_grads(module: nn.Module) -> None:
    for name, p in module.named_parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise ContractViolation(f"non-finite gradient in parameter {name}")


def _decoder_spec(d: int, heads: int, ctx: int) -> dict:
    spec = {f"W{i}": (d, d) for i in (1, 2, 3, 4)}
    spec["Wq"] = (heads, d // heads, d)
    spec["Wk"] = (heads, d // heads, d)
    if ctx:
        spec["Wctx"] = (d, ctx)
    return spec


def _heads_flat(W: torch.Tensor) -> torch.Tensor:
    return W.reshape(-1, W.shape[-1])


@dataclass
class Rollout:
    """Outcome of ``R = B * K`` rollouts (row ``r`` belongs to instance ``r // K``)."""

    edges: np.ndarray  # (R, T) ids into the batch edge table, padded with E
    logp: torch.Tensor  # (R,)
    objectives: torch.Tensor  # (R, n_obj)
    K: int
    trace: list = field(default_factory=list)


class RouteState:
    """Partial solutions of a batch of rollouts over an edge table.

    ``edge_dst`` and ``edge_cost`` have one trailing pad row.  The node set is
    ``0..n-1`` per instance; the depot (CVRP, time windows) is node 0.
    """

    def __init__(self, kind, inst_of_row, n, edge_dst, edge_cost, demands=None, capacity=None, windows=None, depot=0):
        self.kind, self.n = kind, n
        self.inst = inst_of_row
        R = len(inst_of_row)
        self.R = R
        self.pad = len(edge_dst) - 1
        self.edge_dst, self.edge_cost = edge_dst, edge_cost
        self.depot = depot
        self.visited = torch.zeros(R, n, dtype=torch.bool)
        self.cur = torch.zeros(R, dtype=torch.long)
        self.start = torch.zeros(R, dtype=torch.long)
        self.active = torch.ones(R, dtype=torch.bool)
        dt = edge_cost.dtype
        self.feat = torch.zeros(R, edge_cost.shape[1], dtype=dt)
        self.cvrp = kind in CVRP_KINDS
        self.tw = kind == "mgmotsptw"
        if self.cvrp:
            self.demand = demands[inst_of_row]
            self.cap = capacity[inst_of_row]
            self.load_left = self.cap.clone()
            self.route_len = torch.zeros(R, dtype=dt)
            self.makespan = torch.zeros(R, dtype=dt)
        if self.tw:
            self.win = windows[inst_of_row]
            self.time = torch.zeros(R, dtype=dt)
            self.viol = torch.zeros(R, dtype=dt)
        self.steps: list[torch.Tensor] = []

    def begin(self, start: torch.Tensor):
        self.start = start.clone()
        self.cur = start.clone()
        if not self.cvrp:
            self.visited[torch.arange(self.R), start] = True

    def context(self) -> torch.Tensor | None:
        if self.cvrp:
            return (self.load_left / self.cap)[:, None]
        if self.tw:
            return self.time[:, None]
        return None

    def _customers_done(self):
        if self.cvrp:
            return self.visited.sum(1) == self.n - 1
        return self.visited.all(1)

    def feasible(self, cand: torch.Tensor) -> torch.Tensor:
        valid = cand != self.pad
        dst = self.edge_dst[cand]
        seen = self.visited.gather(1, dst)
        if self.cvrp:
            at_depot = dst == self.depot
            dem = self.demand.gather(1, dst)
            ok = valid & ~at_depot & ~seen & (dem <= self.load_left[:, None] + 1e-9)
            ok = ok | (valid & at_depot & (self.cur != self.depot)[:, None])
        else:
            done = self._customers_done()[:, None]
            ok = valid & torch.where(done, dst == self.start[:, None], ~seen)
        return ok & self.active[:, None]

    def advance(self, edge: torch.Tensor):
        act = self.active
        e = torch.where(act, edge, torch.full_like(edge, self.pad))
        c = self.edge_cost[e]
        dst = torch.where(act, self.edge_dst[e], self.cur)
        self.feat = self.feat + c
        rows = torch.arange(self.R)
        if self.cvrp:
            back = act & (dst == self.depot)
            self.route_len = self.route_len + c[:, 0]
            self.makespan = torch.where(back, torch.maximum(self.makespan, self.route_len), self.makespan)
            self.route_len = torch.where(back, torch.zeros_like(self.route_len), self.route_len)
            dem = self.demand[rows, dst]
            self.load_left = torch.where(back, self.cap, torch.where(act, self.load_left - dem, self.load_left))
            mark = act & ~back
        else:
            mark = act
        if self.tw:
            self.time = self.time + c[:, 0]
            cust = act & (dst != self.depot)
            w = self.win[rows, dst]
            late = self.time > w[:, 1]
            bad = late | (self.time < w[:, 0]) if EARLY_ARRIVAL_VIOLATES else late
            self.viol = self.viol + (cust & bad).to(self.viol.dtype)
        self.visited[rows[mark], dst[mark]] = True
        self.cur = dst
        self.steps.append(e)
        if self.cvrp:
            finished = self._customers_done() & (self.cur == self.depot)
        else:
            finished = self._customers_done() & (self.cur == self.start) & (len(self.steps) > 1)
        self.active = act & ~finished

    def objectives(self) -> torch.Tensor:
        if self.cvrp:
            if self.feat.shape[1] == 1:
                return torch.stack([self.feat[:, 0], self.makespan], dim=1)
            return self.feat
        if self.tw:
            return torch.stack([self.viol, self.feat[:, 1]], dim=1)
        return self.feat

    def edges(self) -> np.ndarray:
        return torch.stack(self.steps, dim=1).numpy()


def _choose(logprob, mode, gen):
    if mode == "greedy":
        return logprob.argmax(-1, keepdim=True)
    if mode == "sample":
        return torch.multinomial(logprob.exp(), 1, generator=gen)
    raise ContractViolation(f"mode must be 'greedy' or 'sample', got {mode!r}")


def _decode_loop(state, cand_fn, score_fn, clip, mode, gen, forced=None, t0=0, trace=None):
    """Autoregressive construction; returns the summed log-probability per row."""
    logp = torch.zeros(state.R, dtype=state.edge_cost.dtype)
    t = t0
    while bool(state.active.any()):
        cand = cand_fn(state)
        ok = state.feasible(cand)
        act = state.active
        if bool((act & ~ok.any(1)).any()):
            raise ContractViolation("no feasible move for an unfinished rollout")
        u = clip * torch.tanh(score_fn(state, cand))
        u = u.masked_fill(~ok, -math.inf)
        u = torch.where(act[:, None], u, torch.zeros_like(u))
        lp = torch.log_softmax(u, dim=-1)
        if forced is not None:
            want = torch.as_tensor(forced[:, t], dtype=torch.long)
            lane = (cand == want[:, None]).to(torch.int8).argmax(-1, keepdim=True)
        else:
            lane = _choose(lp.detach(), mode, gen)
        chosen = cand.gather(1, lane).squeeze(1)
        logp = logp + torch.where(act, lp.gather(1, lane).squeeze(1), torch.zeros_like(logp))
        if trace is not None:
            trace.append((cand, lp.detach().exp() * ok, ok))
        state.advance(chosen)
        t += 1
    return logp


def _batch_tensors(batch: GraphBatch):
    dt = batch.dtype
    demands = capacity = windows = None
    if batch.kind in CVRP_KINDS:
        demands = torch.as_tensor(np.stack([i.demands for i in batch.instances]), dtype=dt)
        capacity = torch.as_tensor([float(i.capacity) for i in batch.instances], dtype=dt)
    if batch.kind == "mgmotsptw":
        w = np.stack([i.windows for i in batch.instances])
        w = np.where(np.isnan(w), np.array([-np.inf, np.inf]), w)
        windows = torch.as_tensor(w, dtype=dt)
    return demands, capacity, windows


def _pad_rows(x: torch.Tensor) -> torch.Tensor:
    return torch.cat([x, torch.zeros(1, *x.shape[1:], dtype=x.dtype)], dim=0)


def _pref(pref, dtype) -> torch.Tensor:
    p = torch.as_tensor(np.asarray(pref, dtype=np.float64), dtype=dtype)
    if p.dim() != 1 or bool((p < 0).any()) or abs(float(p.sum()) - 1.0) > 1e-9:
        raise ContractViolation("preference must be a non-negative vector summing to 1")
    return p


def _depot_of(batch) -> int:
    dep = batch.instances[0].depot
    return 0 if dep is None else int(dep)


def _start_rows(batch, K, starts_needed):
    """POMO starting nodes: node k for plain tours, customer k+1 for depot problems."""
    if K < 1 or K > starts_needed:
        raise ContractViolation(f"K must lie in [1, {starts_needed}]")
    return torch.arange(K).repeat(batch.B)


class _Policy(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        torch.manual_seed(cfg.seed)
        self.dtype = torch.float64
        self.lift = Dense(cfg.n_features, cfg.d, bias=True)
        self.encode_calls = 0

    def batch(self, instances) -> GraphBatch:
        b = GraphBatch(instances, kind=self.cfg.problem, dtype=self.dtype)
        if b.m != self.cfg.m:
            raise ContractViolation(f"model expects {self.cfg.m} edge features, instances have {b.m}")
        return b

    def _max_starts(self, batch):
        return batch.n if batch.kind in ("motsp", "mgmotsp") else batch.n - 1

    def _score(self, Q, keys, cand_cost):
        H = self.cfg.heads
        return (Q[:, None, :] * keys).sum(-1) / (H * math.sqrt(self.cfg.d)) - cand_cost


class GMSEB(_Policy):
    """Edge-based model: GREAT encoder over all parallel edges and an edge multi-pointer decoder."""

    def __init__(self, cfg: ModelConfig):
        super().__init__(cfg)
        d, H = cfg.d, cfg.heads
        self.encoder = nn.ModuleList(GreatLayer(d, H, cfg.ff_mult, cfg.norm) for _ in range(cfg.layers))
        self.hyper = HyperNet(
            cfg.n_obj, _decoder_spec(d, H, context_dim(cfg.problem)), cfg.hyper_hidden, scale=cfg.hyper_scale
        )

    def encode(self, batch: GraphBatch) -> torch.Tensor:
        self.encode_calls += 1
        e = self.lift(batch.features)
        for layer in self.encoder:
            e = layer(e, batch)
        return e

    def decoder_weights(self, pref) -> dict:
        return self.hyper(_pref(pref, self.dtype))

    def rollout(self, batch, pref, K=None, mode="greedy", emb=None, forced=None, gen=None, trace=None) -> Rollout:
        cfg = self.cfg
        p = _pref(pref, self.dtype)
        K = self._max_starts(batch) if K is None else K
        ks = _start_rows(batch, K, self._max_starts(batch))
        e = self.encode(batch) if emb is None else emb
        W = self.hyper(p)
        n, E = batch.n, batch.E
        inst = torch.arange(batch.B).repeat_interleave(K)

        e_pad = _pad_rows(e)
        keys = e_pad @ _heads_flat(W["Wk"]).T
        sc = _pad_rows(scalar_edge_cost(batch.costs, p, cfg.score_cost))
        e_graph = torch.zeros(batch.B, cfg.d, dtype=e.dtype).index_add(0, batch.t_inst, e)
        graph_term = (e_graph @ W["W3"].T) / n
        out_tab = torch.as_tensor(batch.out_table(), dtype=torch.long)

        # forced first edge: cheapest linear outgoing edge of the start node
        lin = np.append(batch.costs_np @ p.numpy() if batch.m > 1 else batch.costs_np[:, 0], np.inf)
        tab = batch.out_table()
        best_out = tab[np.arange(batch.N), np.argmin(lin[tab], axis=1)]
        depot = _depot_of(batch)
        demands, capacity, windows = _batch_tensors(batch)
        state = RouteState(
            batch.kind,
            inst,
            n,
            _pad_rows(torch.as_tensor(batch.local_dst, dtype=torch.long)),
            _pad_rows(batch.costs),
            demands,
            capacity,
            windows,
            depot,
        )
        if batch.kind in ("motsp", "mgmotsp"):
            state.begin(ks)
            first = torch.as_tensor(best_out[(inst * n + ks).numpy()], dtype=torch.long)
        else:
            state.begin(torch.full((len(inst),), depot, dtype=torch.long))
            cust = ks + 1
            # depot -> customer edges with the cheapest linear slot
            pair_first = batch.pair_ptr[(inst * n * n + depot * n + cust).numpy()]
            cnt = batch.pair_counts[(inst * n * n + depot * n + cust).numpy()]
            best = [int(pf + np.argmin(lin[pf : pf + c])) for pf, c in zip(pair_first, cnt)]
            first = torch.as_tensor(best, dtype=torch.long)
        if forced is not None and not np.array_equal(forced[:, 0], first.numpy()):
            raise ContractViolation("forced rollouts must start with the POMO start edges")
        state.advance(first)

        ctx = {"first": e_pad[first], "last": e_pad[first], "vis": e_pad[first].clone()}

        def cand_fn(s):
            return out_tab[s.inst * n + s.cur]

        def score_fn(s, cand):
            q = (
                ctx["first"] @ W["W1"].T
                + ctx["last"] @ W["W2"].T
                + graph_term[s.inst]
                + (ctx["vis"] @ W["W4"].T) / n
            )
            extra = s.context()
            if extra is not None:
                q = q + extra @ W["Wctx"].T
            Q = q @ _heads_flat(W["Wq"]).T
            return self._score(Q, keys[cand], sc[cand])

        orig_advance = state.advance

        def advance(edge):
            act = state.active.clone()
            orig_advance(edge)
            emb_now = e_pad[torch.where(act, edge, torch.full_like(edge, E))]
            ctx["last"] = torch.where(act[:, None], emb_now, ctx["last"])
            ctx["vis"] = ctx["vis"] + emb_now

        state.advance = advance
        logp = _decode_loop(state, cand_fn, score_fn, cfg.clip, mode, gen, forced=forced, t0=1, trace=trace)
        return Rollout(state.edges(), logp, state.objectives().detach(), K, trace if trace is not None else [])

    def solutions(self, batch: GraphBatch, ro: Rollout) -> list:
        return _edges_to_solutions(batch, ro.edges, batch.kind)


def _edges_to_solutions(batch: GraphBatch, edges: np.ndarray, kind: str) -> list:
    src, dst, slot = batch.local_src, batch.local_dst, batch.slot
    out = []
    for row in edges:
        row = row[row < batch.E]
        steps = [(int(src[e]), int(dst[e]), int(slot[e])) for e in row]
        if kind in CVRP_KINDS:
            routes, cur = [], []
            for s in steps:
                cur.append(s)
                if s[1] == _depot_of(batch):
                    routes.append(tuple(cur))
                    cur = []
            out.append(RouteSet(tuple(routes)))
        else:
            out.append(Tour(tuple(steps)))
    return out


@dataclass
class DHRollout:
    """Selections ``(B, K1, P)`` (edge ids per ordered pair), their log-probabilities and the routing rollout."""

    selections: np.ndarray
    sel_logp: torch.Tensor  # (B, K1)
    route: Rollout  # rows ordered (instance, selection, start)
    edges: np.ndarray  # (B*K1*K2, T) ids into the batch edge table
    K1: int
    K2: int
    sel_trace: list = field(default_factory=list)


class GMSDH(_Policy):
    """Dual-head model: learned slot selection, then node-based routing on the selected edges."""

    def __init__(self, cfg: ModelConfig):
        super().__init__(cfg)
        d, H = cfg.d, cfg.heads
        self.shared = nn.ModuleList(GreatLayer(d, H, cfg.ff_mult, cfg.norm) for _ in range(cfg.layers - 1))
        self.final = GreatPool(d, H)
        self.node_layers = nn.ModuleList(TransformerLayer(d, H, cfg.ff_mult, cfg.norm) for _ in range(cfg.l2))
        self.route_hyper = HyperNet(
            cfg.n_obj, _decoder_spec(d, H, context_dim(cfg.problem)), cfg.hyper_hidden, scale=cfg.hyper_scale
        )
        self.sel_layers = nn.ModuleList(GreatLayer(d, H, cfg.ff_mult, cfg.norm) for _ in range(cfg.l3))
        self.sel_hyper = HyperNet(
            cfg.n_obj, {"Wq": (H, d // H, d), "Wk": (H, d // H, d)}, cfg.hyper_hidden, scale=cfg.hyper_scale
        )

    def selection_parameters(self):
        """Parameters trained by the selection loss only."""
        return [*self.sel_layers.parameters(), *self.sel_hyper.parameters()]

    def routing_parameters(self):
        sel = {id(p) for p in self.selection_parameters()}
        return [p for p in self.parameters() if id(p) not in sel]

    # encoder ------------------------------------------------------------------

    def encode_shared(self, batch: GraphBatch) -> torch.Tensor:
        """The preference-agnostic prefix (lift + L1-1 GREAT layers)."""
        self.encode_calls += 1
        e = self.lift(batch.features)
        for layer in self.shared:
            e = layer(e, batch)
        return e

    def selection_embeddings(self, batch, shared):
        # the selection loss does not reach the shared encoder
        e = shared.detach()
        for layer in self.sel_layers:
            e = layer(e, batch)
        return e

    # selection head -----------------------------------------------------------

    def selection_logprobs(self, batch, sel_emb, pref):
        """``(pair_table, log-probabilities)`` with one row per ordered pair, padded lanes at -inf."""
        cfg = self.cfg
        p = _pref(pref, self.dtype)
        W = self.sel_hyper(p)
        tab_np, _ = batch.pair_table()
        tab = torch.as_tensor(tab_np, dtype=torch.long)
        ok = tab != batch.E
        e_pad = _pad_rows(sel_emb)
        emb = e_pad[tab]
        q = (emb * ok[..., None]).sum(1) / ok.sum(1, keepdim=True)
        Q = q @ _heads_flat(W["Wq"]).T
        keys = emb @ _heads_flat(W["Wk"]).T
        sc = _pad_rows(scalar_edge_cost(batch.costs, p, cfg.score_cost))[tab]
        u = cfg.clip * torch.tanh(self._score(Q, keys, sc))
        u = u.masked_fill(~ok, -math.inf)
        return tab, torch.log_softmax(u, dim=-1)

    def select(self, batch, sel_emb, pref, K1=1, mode="greedy", forced=None, gen=None):
        """Sample or argmax ``K1`` joint selections; returns edge ids ``(B, K1, P)`` and log q ``(B, K1)``."""
        tab, lp = self.selection_logprobs(batch, sel_emb, pref)
        P = lp.shape[0]
        per = P // batch.B
        if forced is not None:
            f = torch.as_tensor(np.asarray(forced), dtype=torch.long).permute(1, 0, 2).reshape(-1, P)
            lanes = (tab[None, :, :] == f[:, :, None]).to(torch.int8).argmax(-1)
        elif mode == "greedy":
            lanes = lp.detach().argmax(-1)[None, :].expand(K1, P)
        elif mode == "sample":
            probs = lp.detach().exp()
            lanes = torch.stack([torch.multinomial(probs, 1, generator=gen).squeeze(1) for _ in range(K1)])
        else:
            raise ContractViolation(f"mode must be 'greedy' or 'sample', got {mode!r}")
        K1 = lanes.shape[0]
        chosen_lp = lp.gather(1, lanes.T).T  # (K1, P)
        logq = chosen_lp.reshape(K1, batch.B, per).sum(-1).T  # (B, K1)
        edges = tab.gather(1, lanes.T).T.reshape(K1, batch.B, per).permute(1, 0, 2)
        return edges.numpy().copy(), logq

    def simple_selection(self, batch, pref) -> np.ndarray:
        """Cheapest linear slot per pair, shaped like :meth:`select` output with ``K1 = 1``."""
        n = batch.n
        out = []
        for b, inst in enumerate(batch.instances):
            _, slot_map = prune_linear(inst, pref)
            i, j = np.nonzero(~np.eye(n, dtype=bool))
            out.append(batch.edge_off[b] + inst.pair_ptr[i * n + j] + slot_map[i, j])
        return np.stack(out)[:, None, :]

    # routing head -------------------------------------------------------------

    def node_embeddings(self, batch, shared, selections):
        """Pool the selected edges into node features, then the node transformer layers."""
        B, K1, P = selections.shape
        n = batch.n
        struct = GraphBatch.complete(B * K1, n)
        e_sel = shared[torch.as_tensor(selections.reshape(-1), dtype=torch.long)]
        h = self.final(e_sel, struct).view(B * K1, n, self.cfg.d)
        for layer in self.node_layers:
            h = layer(h)
        return h

    def route(self, batch, shared, selections, pref, K2=None, mode="greedy", forced=None, gen=None, trace=None):
        cfg = self.cfg
        p = _pref(pref, self.dtype)
        B, K1, P = selections.shape
        n = batch.n
        K2 = self._max_starts(batch) if K2 is None else K2
        ks = _start_rows(batch, K2, self._max_starts(batch))
        h = self.node_embeddings(batch, shared, selections)  # (B', n, d)
        Bp = B * K1
        W = self.route_hyper(p)
        sel = torch.as_tensor(selections.reshape(Bp, P), dtype=torch.long)
        Ep = Bp * P
        # pseudo-edge table: (b', i, j) -> row of the flattened selection
        i, j = np.nonzero(~np.eye(n, dtype=bool))
        tab = np.full((Bp, n, n), Ep, dtype=np.int64)
        tab[:, i, j] = np.arange(Ep).reshape(Bp, P)
        tab = torch.as_tensor(tab)
        orig = torch.cat([sel.reshape(-1), torch.tensor([batch.E])])
        costs_pad = _pad_rows(batch.costs)
        edge_cost = costs_pad[orig]
        dst_local = torch.cat([torch.as_tensor(np.tile(j, Bp), dtype=torch.long), torch.tensor([0])])
        sc = scalar_edge_cost(edge_cost, p, cfg.score_cost)

        keys = h @ _heads_flat(W["Wk"]).T  # (B', n, d)
        graph_term = (h.sum(1) @ W["W3"].T) / n
        row_pseudo = torch.arange(Bp).repeat_interleave(K2)
        inst = row_pseudo // K1
        demands, capacity, windows = _batch_tensors(batch)
        depot = _depot_of(batch)
        state = RouteState(batch.kind, inst, n, dst_local, edge_cost, demands, capacity, windows, depot)
        ks_rows = ks.repeat(K1)
        if batch.kind in ("motsp", "mgmotsp"):
            state.begin(ks_rows)
            first_node = ks_rows
        else:
            state.begin(torch.full((len(inst),), depot, dtype=torch.long))
            first_node = ks_rows + 1
            state.advance(tab[row_pseudo, depot, first_node])
        rows = torch.arange(len(inst))
        ctx = {"first": h[row_pseudo, first_node], "vis": torch.zeros(len(inst), cfg.d, dtype=h.dtype)}
        ctx["vis"] = ctx["vis"] + h[row_pseudo, state.cur]
        if batch.kind not in ("motsp", "mgmotsp"):
            ctx["vis"] = ctx["vis"] + h[row_pseudo, torch.full_like(state.cur, depot)]

        def cand_fn(s):
            return tab[row_pseudo, s.cur]

        def score_fn(s, cand):
            q = (
                ctx["first"] @ W["W1"].T
                + h[row_pseudo, s.cur] @ W["W2"].T
                + graph_term[row_pseudo]
                + (ctx["vis"] @ W["W4"].T) / n
            )
            extra = s.context()
            if extra is not None:
                q = q + extra @ W["Wctx"].T
            Q = q @ _heads_flat(W["Wq"]).T
            return self._score(Q, keys[row_pseudo], sc[cand])

        orig_advance = state.advance

        def advance(edge):
            act = state.active.clone()
            orig_advance(edge)
            new = act & (state.cur != depot) if batch.kind in CVRP_KINDS else act
            ctx["vis"] = ctx["vis"] + torch.where(new[:, None], h[row_pseudo, state.cur], torch.zeros_like(ctx["vis"]))

        state.advance = advance
        t0 = 0 if batch.kind in ("motsp", "mgmotsp") else 1
        logp = _decode_loop(state, cand_fn, score_fn, cfg.clip, mode, gen, forced=forced, t0=t0, trace=trace)
        pseudo_edges = state.edges()
        ro = Rollout(pseudo_edges, logp, state.objectives().detach(), K2, trace if trace is not None else [])
        return ro, orig.numpy()[pseudo_edges]

    def rollout(
        self,
        batch,
        pref,
        K1=1,
        K2=None,
        mode="greedy",
        pruning="learned",
        shared=None,
        sel_emb=None,
        forced_sel=None,
        forced_route=None,
        gen=None,
        trace=None,
    ) -> DHRollout:
        shared = self.encode_shared(batch) if shared is None else shared
        simple = bool((batch.pair_counts[self._offdiag(batch)] == 1).all())
        if pruning == "simple":
            sels = self.simple_selection(batch, pref)
            logq = torch.zeros(batch.B, 1, dtype=self.dtype)
        elif simple:
            # one edge per pair: nothing to select
            sels = self.simple_selection(batch, pref)
            sels = np.repeat(sels, K1, axis=1)
            logq = torch.zeros(batch.B, K1, dtype=self.dtype)
        elif pruning == "learned":
            sel_emb = self.selection_embeddings(batch, shared) if sel_emb is None else sel_emb
            sels, logq = self.select(batch, sel_emb, pref, K1, mode, forced=forced_sel, gen=gen)
        else:
            raise ContractViolation(f"pruning must be 'learned' or 'simple', got {pruning!r}")
        ro, edges = self.route(batch, shared, sels, pref, K2, mode, forced=forced_route, gen=gen, trace=trace)
        return DHRollout(sels, logq, ro, edges, sels.shape[1], ro.K)

    @staticmethod
    def _offdiag(batch):
        n = batch.n
        pid = np.arange(batch.B * n * n)
        return (pid // n) % n != pid % n

    def solutions(self, batch: GraphBatch, ro: DHRollout) -> list:
        edges = np.where(ro.edges < 0, batch.E, ro.edges)
        return _edges_to_solutions(batch, edges, batch.kind)
