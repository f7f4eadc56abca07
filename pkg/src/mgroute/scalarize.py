"""Preferences, linear and Chebyshev scalarization, rewards, preference grids."""

from __future__ import annotations

from itertools import combinations
from typing import Literal

import numpy as np

from .core import ContractViolation

__all__ = [
    "check_preference",
    "ideal_point",
    "linear_scalarize",
    "chebyshev_scalarize",
    "scalarize",
    "reward",
    "preference_grid",
    "simplex_lattice",
    "sample_preference",
]

Kind = Literal["linear", "chebyshev"]


def check_preference(pref, m: int | None = None, tol: float = 1e-9) -> np.ndarray:
    w = np.asarray(pref, dtype=np.float64).ravel()
    if m is not None and len(w) != m:
        raise ContractViolation(f"preference has {len(w)} weights, expected {m}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > tol:
        raise ContractViolation(f"preference {w.tolist()} is not on the simplex")
    return w


def ideal_point(m: int) -> np.ndarray:
    """Ideal point used throughout: the origin (all generated costs are positive)."""
    return np.zeros(m)


def _pair(cost, pref):
    f = np.asarray(cost, dtype=np.float64)
    w = np.asarray(pref, dtype=np.float64)
    if f.shape[-1] != w.shape[-1]:
        raise ContractViolation(f"dimension mismatch: cost {f.shape[-1]} vs preference {w.shape[-1]}")
    return f, w


def linear_scalarize(cost, pref):
    """Weighted sum ``sum_i w_i f_i``; broadcasts over leading axes of ``cost``."""
    f, w = _pair(cost, pref)
    out = f @ w
    return float(out) if np.ndim(out) == 0 else out


def chebyshev_scalarize(cost, pref, z=None):
    """Weighted Chebyshev distance ``max_i w_i |f_i - z_i|`` to the ideal point."""
    f, w = _pair(cost, pref)
    z = np.zeros(f.shape[-1]) if z is None else np.asarray(z, dtype=np.float64)
    if z.shape[-1] != f.shape[-1]:
        raise ContractViolation("ideal point dimension mismatch")
    out = np.max(w * np.abs(f - z), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def scalarize(cost, pref, z=None, kind: Kind = "chebyshev"):
    if kind == "linear":
        return linear_scalarize(cost, pref)
    if kind == "chebyshev":
        return chebyshev_scalarize(cost, pref, z)
    raise ContractViolation(f"unknown scalarization {kind!r}")


def reward(cost, pref, z=None, kind: Kind = "chebyshev"):
    """Negative scalarized cost."""
    return -scalarize(cost, pref, z, kind)


def simplex_lattice(m: int, divisions: int) -> np.ndarray:
    """All weight vectors with entries ``k / divisions`` summing to one.

    Enumerated by stars and bars; there are ``C(divisions + m - 1, m - 1)`` of them.
    """
    rows = []
    for bars in combinations(range(divisions + m - 1), m - 1):
        edges = (-1, *bars, divisions + m - 1)
        rows.append([edges[k + 1] - edges[k] - 1 for k in range(m)])
    return np.asarray(rows, dtype=np.float64)[::-1] / divisions


def preference_grid(m: int, count: int) -> np.ndarray:
    """Evenly spaced preferences.

    For ``m == 2``: ``count`` points from ``(1, 0)`` to ``(0, 1)``.  For ``m > 2``
    ``count`` must equal the size of a simplex lattice, e.g. 105 or 1035 for m=3.
    """
    if count < 2:
        raise ContractViolation(f"need at least 2 preferences, got {count}")
    if m == 2:
        first = np.arange(count - 1, -1, -1, dtype=np.float64) / (count - 1)
        return np.stack([first, 1.0 - first], axis=1)
    if m < 2:
        raise ContractViolation("preferences need m >= 2")
    h = 1
    while True:
        size = _comb(h + m - 1, m - 1)
        if size == count:
            return simplex_lattice(m, h)
        if size > count:
            raise ContractViolation(f"{count} is not a simplex-lattice size for m={m}")
        h += 1


def _comb(a: int, b: int) -> int:
    from math import comb

    return comb(a, b)


def sample_preference(m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a random preference: ``w_1 ~ U[0, 1]`` for m=2, flat Dirichlet otherwise."""
    if m < 2:
        raise ContractViolation("preferences need m >= 2")
    if m == 2:
        w1 = rng.random()
        return np.array([w1, 1.0 - w1])
    return rng.dirichlet(np.ones(m))
