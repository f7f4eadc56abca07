"""Encoder building blocks: segment attention, normalization, GREAT node-based layers."""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F

__all__ = [
    "NORMS",
    "uniform_init",
    "Dense",
    "segment_softmax",
    "segment_mean",
    "Norm",
    "GreatPool",
    "GreatLayer",
    "TransformerLayer",
]

NORMS = ("instance", "layer", "none")


def uniform_init(t: torch.Tensor, fan_in: int) -> torch.Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    with torch.no_grad():
        return t.uniform_(-bound, bound)


class Dense(nn.Module):
    """``y = x W^T (+ b)`` with weights drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""

    def __init__(self, d_in: int, d_out: int, bias: bool = False, dtype=torch.float64):
        super().__init__()
        self.weight = nn.Parameter(uniform_init(torch.empty(d_out, d_in, dtype=dtype), d_in))
        self.bias = nn.Parameter(uniform_init(torch.empty(d_out, dtype=dtype), d_in)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


def segment_softmax(scores: torch.Tensor, group: torch.Tensor, n_groups: int) -> torch.Tensor:
    """Softmax of ``scores`` (rows, ...) within the rows sharing a ``group`` id."""
    idx = group.view(-1, *([1] * (scores.dim() - 1))).expand_as(scores)
    mx = torch.full((n_groups, *scores.shape[1:]), -math.inf, dtype=scores.dtype)
    mx = mx.scatter_reduce(0, idx, scores.detach(), reduce="amax", include_self=True)
    ex = torch.exp(scores - mx[group])
    den = torch.zeros_like(mx).index_add(0, group, ex)
    return ex / den[group]


def segment_mean(x: torch.Tensor, group: torch.Tensor, n_groups: int) -> torch.Tensor:
    tot = torch.zeros(n_groups, *x.shape[1:], dtype=x.dtype).index_add(0, group, x)
    cnt = torch.zeros(n_groups, dtype=x.dtype).index_add(0, group, torch.ones(len(group), dtype=x.dtype))
    return tot / cnt.clamp_min(1.0).view(-1, *([1] * (x.dim() - 1)))


class Norm(nn.Module):
    """Normalization without learned affine.

    ``instance`` standardizes each channel over the rows of one instance
    (edges or nodes), ``layer`` over the channels of each row.
    """

    def __init__(self, kind: str = "instance", eps: float = 1e-5):
        super().__init__()
        if kind not in NORMS:
            raise ValueError(f"unknown norm {kind!r}")
        self.kind, self.eps = kind, eps

    def forward(self, x, group=None, n_groups=None):
        if self.kind == "none":
            return x
        if self.kind == "layer":
            return F.layer_norm(x, x.shape[-1:], eps=self.eps)
        if group is None:
            # dense (batch, rows, d)
            mu = x.mean(dim=1, keepdim=True)
            var = x.var(dim=1, unbiased=False, keepdim=True)
            return (x - mu) / torch.sqrt(var + self.eps)
        mu = segment_mean(x, group, n_groups)
        var = segment_mean((x - mu[group]) ** 2, group, n_groups)
        return (x - mu[group]) / torch.sqrt(var[group] + self.eps)


class GreatPool(nn.Module):
    """Edge-to-node half of a GREAT node-based layer.

    For every node, attention pools the outgoing edges (query from their mean)
    into ``d/2`` channels and the incoming edges into another ``d/2``; the
    concatenation is the node feature ``x``.
    """

    def __init__(self, d: int, heads: int, dtype=torch.float64):
        super().__init__()
        if d % (2 * heads):
            raise ValueError("embedding size must be divisible by 2 * heads")
        self.d, self.heads = d, heads
        half = d // 2
        self.q_out, self.k_out = Dense(d, d, dtype=dtype), Dense(d, d, dtype=dtype)
        self.W1_out = Dense(d, half, dtype=dtype)
        self.q_in, self.k_in = Dense(d, d, dtype=dtype), Dense(d, d, dtype=dtype)
        self.W1_in = Dense(d, half, dtype=dtype)

    def _pool(self, e, node_of_edge, n_nodes, q_lin, k_lin, v_lin):
        H = self.heads
        dh = self.d // H
        q = q_lin(segment_mean(e, node_of_edge, n_nodes)).view(n_nodes, H, dh)
        k = k_lin(e).view(-1, H, dh)
        s = (q[node_of_edge] * k).sum(-1) / math.sqrt(dh)
        a = segment_softmax(s, node_of_edge, n_nodes)
        v = v_lin(e).view(len(e), H, -1)
        out = torch.zeros(n_nodes, H, v.shape[-1], dtype=e.dtype).index_add(0, node_of_edge, a.unsqueeze(-1) * v)
        return out.reshape(n_nodes, -1)

    def aggregate(self, e: torch.Tensor, g) -> torch.Tensor:
        """Node features ``(N, d)`` from edge embeddings ``(E, d)``."""
        if e.shape != (g.E, self.d):
            raise ValueError(f"expected edge embeddings of shape {(g.E, self.d)}, got {tuple(e.shape)}")
        x_out = self._pool(e, g.t_src, g.N, self.q_out, self.k_out, self.W1_out)
        x_in = self._pool(e, g.t_dst, g.N, self.q_in, self.k_in, self.W1_in)
        return torch.cat([x_out, x_in], dim=-1)

    forward = aggregate


class GreatLayer(GreatPool):
    """Full GREAT node-based layer.

    Each edge is rebuilt from ``x[start] || x[end]`` of the pooled node
    features, followed by residual + norm, feed-forward, residual + norm.
    """

    def __init__(self, d: int, heads: int, ff_mult: int = 2, norm: str = "instance", dtype=torch.float64):
        super().__init__(d, heads, dtype=dtype)
        self.W2 = Dense(2 * d, d, dtype=dtype)
        self.ff1 = Dense(d, ff_mult * d, bias=True, dtype=dtype)
        self.ff2 = Dense(ff_mult * d, d, bias=True, dtype=dtype)
        self.norm1, self.norm2 = Norm(norm), Norm(norm)

    def forward(self, e: torch.Tensor, g) -> torch.Tensor:
        x = self.aggregate(e, g)
        e2 = self.W2(torch.cat([x[g.t_src], x[g.t_dst]], dim=-1))
        h = self.norm1(e + e2, g.t_inst, g.B)
        return self.norm2(h + self.ff2(F.gelu(self.ff1(h))), g.t_inst, g.B)


class TransformerLayer(nn.Module):
    """Standard self-attention block on dense node embeddings ``(B, n, d)``."""

    def __init__(self, d: int, heads: int, ff_mult: int = 2, norm: str = "instance", dtype=torch.float64):
        super().__init__()
        if d % heads:
            raise ValueError("embedding size must be divisible by heads")
        self.d, self.heads = d, heads
        self.Wq, self.Wk, self.Wv = (Dense(d, d, dtype=dtype) for _ in range(3))
        self.Wo = Dense(d, d, dtype=dtype)
        self.ff1 = Dense(d, ff_mult * d, bias=True, dtype=dtype)
        self.ff2 = Dense(ff_mult * d, d, bias=True, dtype=dtype)
        self.norm1, self.norm2 = Norm(norm), Norm(norm)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        B, n, d = h.shape
        H, dh = self.heads, d // self.heads
        q = self.Wq(h).view(B, n, H, dh).transpose(1, 2)
        k = self.Wk(h).view(B, n, H, dh).transpose(1, 2)
        v = self.Wv(h).view(B, n, H, dh).transpose(1, 2)
        a = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(dh), dim=-1)
        mha = self.Wo((a @ v).transpose(1, 2).reshape(B, n, d))
        x = self.norm1(h + mha)
        return self.norm2(x + self.ff2(F.gelu(self.ff1(x))))
