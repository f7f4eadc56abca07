"""Finite differences against autograd, per parameter tensor."""

from __future__ import annotations

import numpy as np
import torch

__all__ = ["fd_gradient_errors", "fd_relative_error"]

# antisymmetric central-difference weights for offsets 1, 2, 3 and their denominators
_STENCILS = {2: ((1,), 2), 4: ((8, -1), 12), 6: ((45, -9, 1), 60)}


def fd_gradient_errors(
    loss_fn,
    named_params,
    eps: float = 1e-4,
    max_entries: int = 12,
    seed: int = 0,
    floor: float = 1e-6,
    order: int = 2,
) -> dict:
    """Relative error ``|g_auto - g_fd| / max(|g_auto|, |g_fd|, floor)`` per tensor.

    Both gradients are restricted to up to ``max_entries`` randomly chosen
    coordinates of each tensor.  The floor keeps parameters with an exactly
    zero true gradient (e.g. a bias cancelled by a following normalization)
    from reporting pure rounding noise as a large relative error.

    ``order`` selects the central stencil (2, 4 or 6).  Higher orders have a
    smaller truncation error, which allows a larger step and so less
    cancellation when gradients are tiny relative to the loss.
    """
    pairs = _fd_pairs(loss_fn, named_params, eps, max_entries, seed, order)
    out = {}
    for name, (auto, fd) in pairs.items():
        scale = max(np.linalg.norm(auto), np.linalg.norm(fd), floor)
        out[name] = float(np.linalg.norm(auto - fd) / scale)
    return out


def fd_relative_error(loss_fn, named_params, eps: float = 1e-4, max_entries: int = 12, seed: int = 0, order: int = 2):
    """One relative error for the whole sampled gradient vector of a network (or head)."""
    pairs = _fd_pairs(loss_fn, named_params, eps, max_entries, seed, order)
    auto = np.concatenate([a for a, _ in pairs.values()])
    fd = np.concatenate([f for _, f in pairs.values()])
    return float(np.linalg.norm(auto - fd) / max(np.linalg.norm(auto), np.linalg.norm(fd)))


def _fd_pairs(loss_fn, named_params, eps, max_entries, seed, order) -> dict:
    """``{name: (autograd entries, finite-difference entries)}`` on sampled coordinates."""
    if order not in _STENCILS:
        raise ValueError(f"order must be one of {sorted(_STENCILS)}")
    coef, den = _STENCILS[order]
    named_params = list(named_params)
    params = [p for _, p in named_params]
    for p in params:
        p.grad = None
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    rng = np.random.default_rng(seed)
    out = {}
    with torch.no_grad():
        for (name, p), g in zip(named_params, grads):
            g = torch.zeros_like(p) if g is None else g
            flat = p.view(-1)
            idx = rng.choice(flat.numel(), size=min(max_entries, flat.numel()), replace=False)
            auto = g.reshape(-1)[idx].numpy()
            fd = np.empty(len(idx))
            for t, i in enumerate(idx):
                old = flat[i].item()

                def at(h):
                    flat[i] = old + h
                    return loss_fn().item()

                fd[t] = sum(c * (at(k * eps) - at(-k * eps)) for k, c in enumerate(coef, 1)) / (den * eps)
                flat[i] = old
            out[name] = (auto, fd)
    return out
