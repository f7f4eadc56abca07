"""Seeded instance generators and JSON-lines (de)serialization.

Randomness: every instance gets its own Philox-4x64 counter-based stream keyed
by ``numpy.random.SeedSequence([seed, index])``, so instance ``k`` of a spec is
the same no matter how many instances or workers are involved.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import ContractViolation, InstanceError, MultiGraphInstance

__all__ = [
    "GenSpec",
    "DISTRIBUTIONS",
    "PROBLEMS",
    "TW_PARAMS",
    "instance_rng",
    "gen_euc",
    "gen_tmat",
    "gen_xasy",
    "gen_fix",
    "gen_flex",
    "tmat_closure",
    "attach_cvrp",
    "attach_time_windows",
    "cvrp_capacity",
    "generate_one",
    "generate",
    "save_instances",
    "load_instances",
    "dumps_instance",
    "loads_instance",
    "InstanceFormatError",
]

DISTRIBUTIONS = ("euc", "tmat", "xasy", "fix", "flex")
PROBLEMS = ("motsp", "mocvrp", "mgmotsp", "mgmocvrp", "mgmotsptw")
MAX_SLOTS = 99  # chromosome genes use base 100

# "medium" time windows: horizon in units of the expected leg time (0.5)
TW_PARAMS = {"horizon_per_node": 0.5, "min_width": 0.05, "max_width": 0.2}


def instance_rng(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def _check_n(n):
    if n < 3:
        raise ContractViolation(f"need n >= 3 nodes, got {n}")


def gen_euc(n: int, m: int, rng: np.random.Generator) -> MultiGraphInstance:
    """One coordinate set per objective; costs are Euclidean distances."""
    _check_n(n)
    coords = rng.random((m, n, 2))
    diff = coords[:, :, None, :] - coords[:, None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))  # (m, n, n)
    inst = MultiGraphInstance.from_dense(np.moveaxis(dist, 0, -1))
    inst.meta["coords"] = coords
    return inst


def tmat_closure(d: np.ndarray) -> np.ndarray:
    """Shorten entries ``d_ij <- min(d_ij, d_ik + d_kj)`` until nothing changes."""
    d = np.array(d, dtype=np.float64)
    np.fill_diagonal(d, 0.0)
    while True:
        via = (d[:, :, None] + d[None, :, :]).min(axis=1)
        new = np.minimum(d, via)
        if np.array_equal(new, d):
            return d
        d = new


def gen_tmat(n: int, m: int, rng: np.random.Generator) -> MultiGraphInstance:
    """Asymmetric matrices closed under the triangle inequality."""
    _check_n(n)
    mats = [tmat_closure(rng.random((n, n))) for _ in range(m)]
    return MultiGraphInstance.from_dense(np.stack(mats, axis=-1))


def gen_xasy(n: int, m: int, rng: np.random.Generator) -> MultiGraphInstance:
    _check_n(n)
    return MultiGraphInstance.from_dense(rng.random((n, n, m)))


def _check_x(x):
    if not 1 <= x <= MAX_SLOTS:
        raise ContractViolation(f"parallel-edge budget x must lie in 1..{MAX_SLOTS}, got {x}")


def gen_fix(n: int, x: int, m: int, rng: np.random.Generator) -> MultiGraphInstance:
    """Exactly ``x`` parallel edges; objective 1 ascending and 2 descending over slots."""
    _check_n(n)
    _check_x(x)
    if m not in (2, 3):
        raise ContractViolation(f"FIX supports m in {{2, 3}}, got {m}")
    u = rng.random((n, n, x, m))
    u[..., 0] = np.sort(u[..., 0], axis=2)
    u[..., 1] = -np.sort(-u[..., 1], axis=2)
    return MultiGraphInstance.from_dense(u)


def gen_flex(n: int, x: int, m: int, rng: np.random.Generator) -> MultiGraphInstance:
    """``x`` independent edges per pair, dominated ones removed."""
    _check_n(n)
    _check_x(x)
    u = rng.random((n, n, x, m))
    a, b = u[:, :, :, None, :], u[:, :, None, :, :]
    # dom[i, j, s, t]: slot s dominates slot t
    dom = np.all(a <= b, axis=-1) & np.any(a < b, axis=-1)
    keep = ~dom.any(axis=2)
    off = ~np.eye(n, dtype=bool)
    keep_off = keep[off]  # (n*(n-1), x)
    costs = u[off][keep_off]
    counts = np.zeros((n, n), dtype=np.int64)
    counts[off] = keep_off.sum(axis=1)
    ptr = np.concatenate([[0], np.cumsum(counts.ravel())])
    return MultiGraphInstance(n=n, m=m, costs=costs, pair_ptr=ptr)


def cvrp_capacity(size: int) -> int:
    if size <= 20:
        return 30
    if size <= 50:
        return 40
    return 50


def attach_cvrp(inst: MultiGraphInstance, n: int, rng: np.random.Generator) -> MultiGraphInstance:
    """Make node 0 the depot, draw customer demands from 1..9, set the capacity for size ``n``."""
    if inst.depot is not None or inst.demands is not None or inst.windows is not None:
        raise ContractViolation("instance already carries payloads")
    demands = rng.integers(1, 10, size=inst.n)
    demands[0] = 0
    return inst.replace(depot=0, demands=demands, capacity=cvrp_capacity(n))


def attach_time_windows(inst: MultiGraphInstance, rng: np.random.Generator) -> MultiGraphInstance:
    """Independent uniform windows for every customer; node 0 is the depot (no window)."""
    if inst.m != 2:
        raise ContractViolation("time windows need (time, distance) edge features")
    horizon = TW_PARAMS["horizon_per_node"] * inst.n
    start = rng.uniform(0.0, horizon, size=inst.n)
    width = rng.uniform(TW_PARAMS["min_width"] * horizon, TW_PARAMS["max_width"] * horizon, size=inst.n)
    windows = np.stack([start, start + width], axis=1)
    windows[0] = np.nan
    return inst.replace(depot=0, windows=windows)


@dataclass(frozen=True)
class GenSpec:
    """What to generate.  ``n`` is the node count (depot included for CVRP/TW)."""

    distribution: str
    n: int
    m: int = 2
    x: int = 1
    problem: str = "motsp"
    seed: int = 0

    def __post_init__(self):
        dist, prob = self.distribution.lower(), self.problem.lower()
        object.__setattr__(self, "distribution", dist)
        object.__setattr__(self, "problem", prob)
        if dist not in DISTRIBUTIONS:
            raise ContractViolation(f"unknown distribution {self.distribution!r}")
        if prob not in PROBLEMS:
            raise ContractViolation(f"unknown problem {self.problem!r}")
        if dist in ("fix", "flex"):
            _check_x(self.x)
        elif self.x != 1:
            raise ContractViolation(f"{dist} graphs are simple; x must be 1")
        multigraph = prob.startswith("mg")
        if multigraph != (dist in ("fix", "flex")):
            raise ContractViolation(f"problem {prob} does not use distribution {dist}")
        if prob == "mocvrp" and self.m != 1:
            raise ContractViolation("mocvrp samples a single distance feature (m=1)")
        if prob == "mgmotsptw" and self.m != 2:
            raise ContractViolation("mgmotsptw needs m=2 (time, distance)")

    @property
    def name(self) -> str:
        d = self.distribution.upper() + (str(self.x) if self.distribution in ("fix", "flex") else "")
        return f"{self.problem.upper()}-{d}-{self.n}"

    def to_dict(self) -> dict:
        return asdict(self)


def generate_one(spec: GenSpec, index: int) -> MultiGraphInstance:
    rng = instance_rng(spec.seed, index)
    d = spec.distribution
    if d == "euc":
        inst = gen_euc(spec.n, spec.m, rng)
    elif d == "tmat":
        inst = gen_tmat(spec.n, spec.m, rng)
    elif d == "xasy":
        inst = gen_xasy(spec.n, spec.m, rng)
    elif d == "fix":
        inst = gen_fix(spec.n, spec.x, spec.m, rng)
    else:
        inst = gen_flex(spec.n, spec.x, spec.m, rng)
    if spec.problem in ("mocvrp", "mgmocvrp"):
        inst = attach_cvrp(inst, spec.n - 1, rng)
    elif spec.problem == "mgmotsptw":
        inst = attach_time_windows(inst, rng)
    inst.meta["problem"] = spec.problem
    inst.meta.pop("coords", None)
    return inst


def generate(spec: GenSpec, count: int, start: int = 0) -> list[MultiGraphInstance]:
    return [generate_one(spec, start + k) for k in range(count)]


# serialization --------------------------------------------------------------


class InstanceFormatError(ValueError):
    """A record in an instance file could not be parsed or validated."""


def _num(v: float) -> str:
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def dumps_instance(inst: MultiGraphInstance) -> str:
    """Canonical one-line JSON record (costs with 17 significant digits)."""
    parts = [f'"n": {inst.n}', f'"m": {inst.m}']
    problem = inst.meta.get("problem")
    if problem:
        parts.append(f'"problem": {json.dumps(problem)}')
    if inst.depot is not None:
        parts.append(f'"depot": {inst.depot}')
    if inst.capacity is not None:
        parts.append(f'"capacity": {inst.capacity}')
    if inst.demands is not None:
        parts.append('"demands": [' + ", ".join(str(int(v)) for v in inst.demands) + "]")
    if inst.windows is not None:
        rows = []
        for w in inst.windows:
            rows.append("null" if np.isnan(w).any() else f"[{_num(w[0])}, {_num(w[1])}]")
        parts.append('"windows": [' + ", ".join(rows) + "]")
    parts.append(f'"num_edges": {inst.num_edges}')
    src, dst = inst.src, inst.dst
    edges = ", ".join(
        f"[{src[e]}, {dst[e]}, [" + ", ".join(_num(c) for c in inst.costs[e]) + "]]"
        for e in range(inst.num_edges)
    )
    parts.append(f'"edges": [{edges}]')
    return "{" + ", ".join(parts) + "}"


def loads_instance(line: str, lineno: int = 1) -> MultiGraphInstance:
    def fail(msg):
        raise InstanceFormatError(f"line {lineno}: {msg}")

    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        fail(f"malformed JSON ({exc.msg} at column {exc.colno})")
    if not isinstance(rec, dict):
        fail("record is not a JSON object")
    for key in ("n", "m", "edges"):
        if key not in rec:
            fail(f"missing field '{key}'")
    n, m = rec["n"], rec["m"]
    if not isinstance(n, int) or n < 2:
        fail("field 'n' must be an integer >= 2")
    if not isinstance(m, int) or m < 1:
        fail("field 'm' must be a positive integer")
    edges = rec["edges"]
    if not isinstance(edges, list):
        fail("field 'edges' must be a list")
    if "num_edges" in rec and rec["num_edges"] != len(edges):
        fail(f"field 'edges' has {len(edges)} entries but 'num_edges' says {rec['num_edges']}")
    pair_costs: dict[tuple[int, int], list] = {}
    for k, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 3 and isinstance(e[2], list)):
            fail(f"field 'edges[{k}]' must be [i, j, [cost...]]")
        i, j, c = e
        if not (isinstance(i, int) and isinstance(j, int) and 0 <= i < n and 0 <= j < n):
            fail(f"field 'edges[{k}]' has node indices outside 0..{n - 1}")
        if len(c) != m:
            fail(f"field 'edges[{k}]' has {len(c)} costs, expected m={m}")
        pair_costs.setdefault((i, j), []).append(c)
    payload = {}
    if rec.get("depot") is not None:
        payload["depot"] = rec["depot"]
    if rec.get("capacity") is not None:
        payload["capacity"] = rec["capacity"]
    if rec.get("demands") is not None:
        if len(rec["demands"]) != n:
            fail(f"field 'demands' has {len(rec['demands'])} entries, expected {n}")
        payload["demands"] = np.asarray(rec["demands"], dtype=np.int64)
    if rec.get("windows") is not None:
        if len(rec["windows"]) != n:
            fail(f"field 'windows' has {len(rec['windows'])} entries, expected {n}")
        payload["windows"] = np.asarray(
            [[np.nan, np.nan] if w is None else w for w in rec["windows"]], dtype=np.float64
        )
    try:
        inst = MultiGraphInstance.from_pair_costs(n, pair_costs, **payload)
    except InstanceError as exc:
        fail(f"invalid instance: {exc}")
    if "problem" in rec:
        inst.meta["problem"] = rec["problem"]
    return inst


def save_instances(path, instances: Iterable[MultiGraphInstance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(dumps_instance(inst))
            fh.write("\n")


def load_instances(path) -> list[MultiGraphInstance]:
    text = Path(path).read_text(encoding="utf-8")
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            try:
                out.append(loads_instance(line, lineno))
            except InstanceFormatError as exc:
                raise InstanceFormatError(f"{path}: {exc}") from None
    return out
