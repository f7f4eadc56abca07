"""Flat ragged batches of multigraphs for the encoder and decoders."""

from __future__ import annotations

import numpy as np
import torch

from ..core import ContractViolation, MultiGraphInstance
from ..problems import CVRP_KINDS, check_kind

__all__ = ["GraphBatch", "edge_features", "feature_dim", "context_dim"]


def feature_dim(kind: str, m: int) -> int:
    """Number of raw input features per edge."""
    if kind in CVRP_KINDS:
        return m + 1
    if kind == "mgmotsptw":
        return m + 2
    return m


def context_dim(kind: str) -> int:
    """Extra scalar entries in the decoder query (remaining load or current time)."""
    return 1 if kind in CVRP_KINDS or kind == "mgmotsptw" else 0


def edge_features(inst: MultiGraphInstance, kind: str) -> np.ndarray:
    """Edge costs, plus the demand or time window of the end node where relevant."""
    parts = [inst.costs]
    if kind in CVRP_KINDS:
        parts.append((inst.demands[inst.dst] / inst.capacity)[:, None])
    elif kind == "mgmotsptw":
        w = np.nan_to_num(inst.windows, nan=0.0)
        parts.append(w[inst.dst])
    return np.concatenate(parts, axis=1)


class GraphBatch:
    """``B`` instances with the same node count stored as one flat edge list.

    Node ``i`` of instance ``b`` has global id ``b * n + i``.  Edges keep the
    per-instance ``(src, dst, slot)`` order, so every ordered pair owns a
    contiguous run of edges and ``out_ptr`` is a CSR over source nodes.
    """

    def __init__(self, instances, kind: str | None = None, dtype=torch.float64):
        instances = list(instances)
        if not instances:
            raise ContractViolation("empty batch")
        n = instances[0].n
        if any(inst.n != n for inst in instances):
            raise ContractViolation("all instances in a batch need the same node count")
        self.kind = check_kind(instances[0], kind)
        self.instances = instances
        self.B, self.n = len(instances), n
        self.N = self.B * n
        self.dtype = dtype
        E_b = np.array([len(inst.costs) for inst in instances])
        off = np.concatenate([[0], np.cumsum(E_b)])
        self.E = int(off[-1])
        self.edge_off = off
        self.src = np.concatenate([inst.src + b * n for b, inst in enumerate(instances)])
        self.dst = np.concatenate([inst.dst + b * n for b, inst in enumerate(instances)])
        self.slot = np.concatenate([inst.slot for inst in instances])
        self.inst_of_edge = np.repeat(np.arange(self.B), E_b)
        self.pair_ptr = np.concatenate([inst.pair_ptr[:-1] + off[b] for b, inst in enumerate(instances)] + [[self.E]])
        self.out_ptr = self.pair_ptr[:: n]
        self.pair_counts = np.diff(self.pair_ptr)
        self.costs_np = np.concatenate([inst.costs for inst in instances])
        feats = np.concatenate([edge_features(inst, self.kind) for inst in instances])

        t = lambda a: torch.as_tensor(a, dtype=torch.long)
        self.t_src, self.t_dst = t(self.src), t(self.dst)
        self.t_inst = t(self.inst_of_edge)
        self.features = torch.as_tensor(feats, dtype=dtype)
        self.costs = torch.as_tensor(self.costs_np, dtype=dtype)
        self.m = self.costs.shape[1]

    @property
    def local_src(self) -> np.ndarray:
        return self.src % self.n

    @property
    def local_dst(self) -> np.ndarray:
        return self.dst % self.n

    def out_table(self) -> np.ndarray:
        """``(N, max_out)`` outgoing edge ids per node, padded with ``E``."""
        deg = np.diff(self.out_ptr)
        width = int(deg.max())
        lane = np.arange(width)
        tab = self.out_ptr[:-1, None] + lane[None, :]
        return np.where(lane[None, :] < deg[:, None], tab, self.E)

    def pair_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Off-diagonal pairs as ``(P, max_slots)`` edge ids padded with ``E``, plus the pair ids."""
        n = self.n
        pid = np.arange(self.B * n * n)
        i = (pid // n) % n
        j = pid % n
        pid = pid[i != j]
        cnt = self.pair_counts[pid]
        width = int(cnt.max())
        lane = np.arange(width)
        tab = self.pair_ptr[pid][:, None] + lane[None, :]
        return np.where(lane[None, :] < cnt[:, None], tab, self.E), pid

    @staticmethod
    def complete(B: int, n: int) -> "_Structure":
        """Index structure of ``B`` complete simple digraphs (pairs in row-major order)."""
        i, j = np.nonzero(~np.eye(n, dtype=bool))
        src = (np.arange(B)[:, None] * n + i[None, :]).ravel()
        dst = (np.arange(B)[:, None] * n + j[None, :]).ravel()
        return _Structure(B, n, src, dst)


class _Structure:
    """Minimal edge structure used when the edges are a selection, not a full instance."""

    def __init__(self, B, n, src, dst):
        self.B, self.n, self.N = B, n, B * n
        self.E = len(src)
        self.src, self.dst = src, dst
        self.t_src = torch.as_tensor(src, dtype=torch.long)
        self.t_dst = torch.as_tensor(dst, dtype=torch.long)
        self.t_inst = self.t_src // n
