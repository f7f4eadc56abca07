"""Solver dispatch by name and the archive record format."""

from __future__ import annotations

import json
import time
from functools import partial

import numpy as np

from ..core import ContractViolation, EdgeRef, ParetoArchive, RouteSet, Tour
from ..heur import scalarized_sweep
from ..moea import MoeaConfig, nsga2_run
from ..problems import check_kind
from ..scalarize import preference_grid
from .parallel import parallel_eval

__all__ = [
    "CLASSICAL_SOLVERS",
    "NEURAL_SOLVERS",
    "SOLVERS",
    "instance_seed",
    "solve_instance",
    "solve_neural",
    "solve_file",
    "archive_record",
    "solution_to_json",
    "solution_from_json",
    "load_archives",
]

CLASSICAL_SOLVERS = ("nn", "ni", "fi", "nn+2opt", "moea")
NEURAL_SOLVERS = ("gms-eb", "gms-dh", "gms-dh-simple")
SOLVERS = CLASSICAL_SOLVERS + NEURAL_SOLVERS


def instance_seed(seed: int, index: int) -> int:
    """Per-instance seed, independent of how instances are spread over workers."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint32)[0])


def solve_instance(inst, solver: str, prefs, kind=None, options: dict | None = None, index: int = 0) -> ParetoArchive:
    opts = dict(options or {})
    kind = check_kind(inst, kind)
    if solver in ("nn", "ni", "fi"):
        return scalarized_sweep(inst, kind, prefs, inner=solver, all_starts=opts.get("all_starts", False))
    if solver == "nn+2opt":
        return scalarized_sweep(inst, kind, prefs, inner="nn", two_opt=True, max_moves=opts.get("max_moves"))
    if solver == "moea":
        cfg = MoeaConfig(
            pop_size=opts.get("pop_size", 20),
            generations=opts.get("generations", 100),
            mutation_rate=opts.get("mutation_rate", 0.2),
            crossover_rate=opts.get("crossover_rate", 0.9),
            ls_moves=opts.get("ls_moves", 5),
            seed=instance_seed(opts.get("seed", 0), index),
        )
        return nsga2_run(inst, kind, cfg)
    raise ContractViolation(f"solver {solver!r} is not a classical solver; choose from {CLASSICAL_SOLVERS}")


def _job(solver, prefs, kind, options, pair):
    index, inst = pair
    return solve_instance(inst, solver, prefs, kind, options, index)


def solve_neural(instances, solver: str, prefs, model, chunk: int = 50) -> list:
    """Batched greedy inference; ``gms-dh-simple`` swaps the selection head for linear pruning."""
    from ..neural.models import GMSDH
    from ..train import solve_prefs

    if solver == "gms-eb" and isinstance(model, GMSDH):
        raise ContractViolation("gms-eb needs an edge-model checkpoint")
    if solver in ("gms-dh", "gms-dh-simple") and not isinstance(model, GMSDH):
        raise ContractViolation(f"{solver} needs a dual-head checkpoint")
    pruning = "simple" if solver == "gms-dh-simple" else "learned"
    out = []
    for i in range(0, len(instances), chunk):
        out.extend(solve_prefs(model, instances[i : i + chunk], prefs, pruning=pruning))
    return out


def solve_file(instances, solver: str, n_prefs: int = 101, kind=None, options=None, workers=1, model=None, timing=None):
    """Archives for every instance, in input order."""
    if solver not in SOLVERS:
        raise ContractViolation(f"unknown solver {solver!r}; choose from {SOLVERS}")
    prefs = preference_grid(2, n_prefs)
    if solver in NEURAL_SOLVERS:
        if model is None:
            raise ContractViolation(f"solver {solver} needs --checkpoint")
        t0 = time.perf_counter()
        res = solve_neural(list(instances), solver, prefs, model)
        if timing is not None:
            timing.update(wall_seconds=time.perf_counter() - t0, workers=1)
        return res
    job = partial(_job, solver, prefs, kind, options)
    return parallel_eval(list(enumerate(instances)), job, workers, timing=timing)


# archive records ---------------------------------------------------------------


def solution_to_json(sol):
    if isinstance(sol, RouteSet):
        return {"routes": [[list(s) for s in r] for r in sol.routes]}
    if isinstance(sol, Tour):
        return {"tour": [list(s) for s in sol.steps]}
    return None


def solution_from_json(obj):
    if obj is None:
        return None
    if "routes" in obj:
        return RouteSet(tuple(tuple(EdgeRef(*s) for s in r) for r in obj["routes"]))
    return Tour(tuple(EdgeRef(*s) for s in obj["tour"]))


def archive_record(index: int, inst, archive: ParetoArchive, solver: str) -> str:
    """One JSON line: instance index and size, cost vectors and solution encodings.

    Entries are sorted by cost so that equal archives produce equal bytes.
    """
    entries = sorted(archive.entries, key=lambda e: tuple(e[0]))
    rec = {
        "index": index,
        "n": inst.n,
        "solver": solver,
        "points": [[float(v) for v in c] for c, _ in entries],
        "solutions": [solution_to_json(s) for _, s in entries],
    }
    return json.dumps(rec, separators=(",", ":"))


def load_archives(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rec["points"] = np.asarray(rec["points"], dtype=np.float64).reshape(len(rec["points"]), -1)
                int(rec["index"]), int(rec["n"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ContractViolation(f"{path}:{lineno}: malformed archive record ({exc})") from None
            out.append(rec)
    return out
