"""Preference hyper-network: an MLP from the preference to a named set of decoder weights."""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F

from .layers import Dense

__all__ = ["HyperNet"]


class HyperNet(nn.Module):
    """Maps a preference ``(m,)`` to tensors with the shapes in ``spec``.

    ``spec`` is an ordered mapping ``name -> shape``; the MLP emits their flat
    concatenation.  ``scale`` multiplies the final layer's initial weights so
    that the generated matrices start near the usual fan-in scale.
    """

    def __init__(self, m: int, spec: dict, hidden=(128, 128), scale: float = 1.0, dtype=torch.float64):
        super().__init__()
        self.spec = {k: tuple(v) for k, v in spec.items()}
        self.sizes = [math.prod(s) for s in self.spec.values()]
        self.total = sum(self.sizes)
        dims = [m, *hidden]
        self.hidden = nn.ModuleList(Dense(a, b, bias=True, dtype=dtype) for a, b in zip(dims[:-1], dims[1:]))
        self.out = Dense(dims[-1], self.total, bias=True, dtype=dtype)
        with torch.no_grad():
            self.out.weight.mul_(scale)
            self.out.bias.mul_(scale)

    def flat(self, pref: torch.Tensor) -> torch.Tensor:
        h = pref
        for layer in self.hidden:
            h = F.gelu(layer(h))
        return self.out(h)

    def forward(self, pref) -> dict:
        pref = torch.as_tensor(pref, dtype=self.out.weight.dtype)
        chunks = torch.split(self.flat(pref), self.sizes)
        return {k: c.view(s) for (k, s), c in zip(self.spec.items(), chunks)}
