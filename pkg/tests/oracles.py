"""Independent reference implementations used as test oracles.

Everything here is plain Python over lists and itertools, sharing no code
with the package under test apart from reading instance arrays.  Running
this file with ``--freeze`` regenerates ``data/frozen_oracles.json``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import sys
from pathlib import Path

FROZEN = Path(__file__).parent / "data" / "frozen_oracles.json"


def dominates(a, b) -> bool:
    le = all(x <= y for x, y in zip(a, b))
    lt = any(x < y for x, y in zip(a, b))
    return le and lt


def pareto(points) -> list:
    pts = [tuple(map(float, p)) for p in points]
    return [p for p in pts if not any(dominates(q, p) for q in pts)]


def hv2d_grid(points, ref) -> float:
    """Exact union area by coordinate compression (no sweep, no sorting tricks)."""
    pts = [p for p in points if p[0] <= ref[0] and p[1] <= ref[1]]
    xs = sorted({p[0] for p in pts} | {ref[0]})
    ys = sorted({p[1] for p in pts} | {ref[1]})
    area = 0.0
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            cx, cy = xs[i], ys[j]
            if any(p[0] <= cx and p[1] <= cy for p in pts):
                area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j])
    return area


def hv_inclusion_exclusion(points, ref) -> float:
    """Sum over non-empty subsets of (-1)^(k+1) times the intersection box volume."""
    pts = [p for p in points if all(a <= r for a, r in zip(p, ref))]
    total = 0.0
    for k in range(1, len(pts) + 1):
        for sub in itertools.combinations(pts, k):
            corner = [max(c) for c in zip(*sub)]
            vol = 1.0
            for c, r in zip(corner, ref):
                vol *= max(0.0, r - c)
            total += (-1) ** (k + 1) * vol
    return total


def slot_costs(inst, i, j) -> list:
    p = i * inst.n + j
    lo, hi = int(inst.pair_ptr[p]), int(inst.pair_ptr[p + 1])
    return [tuple(float(v) for v in inst.costs[e]) for e in range(lo, hi)]


def all_tours(inst):
    """Yield ``(order, slots, cost)`` for every tour with node 0 first."""
    n = inst.n
    for rest in itertools.permutations(range(1, n)):
        order = (0, *rest)
        legs = [(order[t], order[(t + 1) % n]) for t in range(n)]
        choices = [slot_costs(inst, a, b) for a, b in legs]
        for slots in itertools.product(*[range(len(c)) for c in choices]):
            cost = [0.0] * inst.m
            for c, s in zip(choices, slots):
                for k in range(inst.m):
                    cost[k] += c[s][k]
            yield order, slots, tuple(cost)


def tour_cost_tw(inst, order, slots):
    """(violations, distance) of a time-window tour by forward simulation without waiting."""
    t, viol, dist = 0.0, 0, 0.0
    n = len(order)
    for k in range(n):
        a, b = order[k], order[(k + 1) % n]
        c = slot_costs(inst, a, b)[slots[k]]
        t += c[0]
        dist += c[1]
        if b != inst.depot:
            start, end = float(inst.windows[b][0]), float(inst.windows[b][1])
            if t < start or t > end:
                viol += 1
    return float(viol), dist


def min_linear(inst, pref) -> float:
    return min(sum(w * c for w, c in zip(pref, cost)) for _, _, cost in all_tours(inst))


def instance_digest(inst) -> str:
    h = hashlib.sha256()
    for arr in (inst.costs, inst.pair_ptr, inst.demands, inst.windows):
        if arr is not None:
            h.update(arr.tobytes())
    return h.hexdigest()


def _freeze() -> dict:
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    from mgroute.gen import GenSpec, generate

    out = {}
    # instance bytes for fixed specs (generator determinism across versions)
    specs = {
        "fix2-6": GenSpec("fix", 6, x=2, problem="mgmotsp", seed=11),
        "flex3-6": GenSpec("flex", 6, x=3, problem="mgmotsp", seed=12),
        "xasy-7": GenSpec("xasy", 7, problem="motsp", seed=13),
        "tmat-6": GenSpec("tmat", 6, problem="motsp", seed=14),
        "euc-6": GenSpec("euc", 6, problem="motsp", seed=15),
        "cvrp-7": GenSpec("xasy", 7, m=1, problem="mocvrp", seed=16),
        "tw-6": GenSpec("fix", 6, x=2, problem="mgmotsptw", seed=17),
    }
    out["digests"] = {k: [instance_digest(i) for i in generate(s, 3)] for k, s in specs.items()}
    # exact Pareto fronts by plain enumeration
    fronts = {}
    for key in ("fix2-6", "flex3-6", "xasy-7"):
        inst = generate(specs[key], 1)[0]
        front = sorted(set(pareto([c for _, _, c in all_tours(inst)])))
        fronts[key] = [list(p) for p in front]
    tw = generate(specs["tw-6"], 1)[0]
    pts = [tour_cost_tw(tw, o, s) for o, s, _ in all_tours(tw)]
    fronts["tw-6"] = [list(p) for p in sorted(set(pareto(pts)))]
    out["fronts"] = fronts
    # linear optima over an 11-point grid
    inst = generate(specs["fix2-6"], 1)[0]
    grid = [(1 - k / 10, k / 10) for k in range(11)]
    out["linear_optima_fix2-6"] = [min_linear(inst, w) for w in grid]
    # enumeration counts
    out["tour_counts"] = {key: sum(1 for _ in all_tours(generate(specs[key], 1)[0])) for key in ("fix2-6", "flex3-6")}
    # hypervolume of seeded random fronts
    import random

    rnd = random.Random(5)
    hv = []
    for _ in range(5):
        P = [(rnd.random(), rnd.random()) for _ in range(8)]
        hv.append({"points": P, "ref": [1.0, 1.0], "hv": hv2d_grid(P, (1.0, 1.0))})
    out["hv_cases"] = hv
    return out


if __name__ == "__main__":
    if "--freeze" in sys.argv:
        FROZEN.parent.mkdir(exist_ok=True)
        FROZEN.write_text(json.dumps(_freeze(), indent=1, sort_keys=True) + "\n")
        print(f"wrote {FROZEN}")
