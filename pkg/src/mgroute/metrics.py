"""Exact hypervolume (2 and 3 objectives), normalized HV, HV gap, reference presets."""

from __future__ import annotations

import warnings

import numpy as np

from .core import ContractViolation, nondominated_mask

__all__ = [
    "hypervolume",
    "normalized_hv",
    "hv_gap",
    "reference_point",
    "REFERENCE_TABLES",
    "clip_count",
]

_clipped = 0


def clip_count(reset: bool = False) -> int:
    """Number of points dropped because they lay beyond the reference point."""
    global _clipped
    value = _clipped
    if reset:
        _clipped = 0
    return value


def _prepare(points, ref) -> tuple[np.ndarray, np.ndarray]:
    global _clipped
    r = np.asarray(ref, dtype=np.float64).ravel()
    P = np.asarray(points, dtype=np.float64)
    if P.size == 0:
        return np.zeros((0, len(r))), r
    P = np.atleast_2d(P)
    if P.shape[1] != len(r):
        raise ContractViolation(f"points have dimension {P.shape[1]} but the reference has {len(r)}")
    inside = np.all(P <= r, axis=1)
    dropped = int((~inside).sum())
    if dropped:
        _clipped += dropped
        warnings.warn(f"{dropped} point(s) beyond the reference were ignored", RuntimeWarning, stacklevel=3)
    P = P[inside]
    if len(P):
        P = P[nondominated_mask(P)]
    return P, r


def _hv2d(P: np.ndarray, r: np.ndarray) -> float:
    if len(P) == 0:
        return 0.0
    order = np.lexsort((P[:, 1], P[:, 0]))
    f1, f2 = P[order, 0], P[order, 1]
    area, prev = 0.0, r[1]
    for a, b in zip(f1, f2):
        if b < prev:
            area += (r[0] - a) * (prev - b)
            prev = b
    return float(area)


def _hv3d(P: np.ndarray, r: np.ndarray) -> float:
    """Slice along the third objective and sum 2-d areas."""
    if len(P) == 0:
        return 0.0
    P = P[np.argsort(P[:, 2], kind="stable")]
    z = np.append(P[:, 2], r[2])
    vol = 0.0
    for k in range(len(P)):
        depth = z[k + 1] - z[k]
        if depth > 0:
            vol += _hv2d(P[: k + 1, :2], r[:2]) * depth
    return float(vol)


def hypervolume(points, ref) -> float:
    """Lebesgue measure of the union of boxes ``[p, ref]`` (minimization)."""
    P, r = _prepare(points, ref)
    m = len(r)
    if m == 2:
        return _hv2d(P, r)
    if m == 3:
        return _hv3d(P, r)
    if m == 1:
        return float(r[0] - P[:, 0].min()) if len(P) else 0.0
    raise ContractViolation(f"exact hypervolume is implemented for m <= 3, got m={m}")


def normalized_hv(points, ref, ideal=None) -> float:
    """Hypervolume divided by the volume of the box between the ideal point and ``ref``."""
    r = np.asarray(ref, dtype=np.float64).ravel()
    z = np.zeros_like(r) if ideal is None else np.asarray(ideal, dtype=np.float64)
    box = float(np.prod(r - z))
    if box <= 0:
        raise ContractViolation("reference must lie beyond the ideal point")
    return hypervolume(points, r) / box


def hv_gap(hv: float, best_hv: float) -> float:
    """Percentage shortfall relative to the best method."""
    if best_hv <= 0:
        raise ContractViolation("best_hv must be positive")
    return 100.0 * (best_hv - hv) / best_hv


# problem size -> per-objective reference value, bi-objective case
REFERENCE_TABLES = {
    "motsp": {20: (15, 15), 50: (30, 30), 100: (60, 60), 150: (90, 90), 200: (120, 120)},
    "mocvrp": {20: (15, 3), 50: (40, 3), 100: (60, 3)},
    "mgmotsp-flex": {20: (15, 15), 50: (30, 30), 100: (60, 60), 150: (90, 90), 200: (120, 120)},
    "mgmocvrp-flex": {20: (15, 15), 50: (40, 40), 100: (60, 60)},
}
FALLBACK_SCALE = 0.75  # untabulated sizes (desk scale): 0.75 * size, the 20-node ratio


def _table(name: str, size: int, m: int) -> np.ndarray:
    table = REFERENCE_TABLES[name]
    if size in table:
        vals = table[size]
    elif name == "mocvrp":
        vals = (FALLBACK_SCALE * size, 3)
    else:
        vals = (FALLBACK_SCALE * size,) * 2
    if m == 3 and name in ("motsp", "mgmotsp-flex"):
        vals = (vals[0],) * 3
    return np.asarray(vals, dtype=np.float64)


def reference_point(preset: str, n: int, m: int = 2) -> np.ndarray:
    """HV reference for a named preset and node count ``n``.

    Presets: ``motsp``, ``mocvrp``, ``flex`` (MGMOTSP), ``fix-n``,
    ``mgmocvrp-flex``, ``mgmocvrp-fix``, ``tsptw-fix``, ``tsptw-flex``, or an
    explicit comma-separated vector such as ``"10,10"``.  CVRP presets use the
    customer count ``n - 1`` as the problem size.
    """
    p = preset.lower()
    if "," in p:
        return np.asarray([float(v) for v in p.split(",")])
    if p in ("motsp", "tmat", "xasy", "euc"):
        return _table("motsp", n, m)
    if p in ("flex", "mgmotsp-flex"):
        return _table("mgmotsp-flex", n, m)
    if p in ("fix-n", "fix", "mgmotsp-fix"):
        return np.full(m, float(n))
    if p == "mocvrp":
        return _table("mocvrp", n - 1, 2)
    if p == "mgmocvrp-flex":
        return _table("mgmocvrp-flex", n - 1, 2)
    if p == "mgmocvrp-fix":
        return np.full(2, float(n - 1))
    if p in ("tsptw-fix", "mgmotsptw-fix"):
        return np.array([n + 5.0, float(n)])
    if p in ("tsptw-flex", "mgmotsptw-flex"):
        return np.array([n + 5.0, _table("mgmotsp-flex", n, 2)[1]])
    raise ContractViolation(f"unknown reference preset {preset!r}")
