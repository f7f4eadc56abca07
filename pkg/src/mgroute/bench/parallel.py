"""Instance-level process parallelism with results returned in input order."""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor

__all__ = ["WORKERS_ENV", "ParallelJobError", "resolve_workers", "parallel_eval"]

WORKERS_ENV = "MGROUTE_WORKERS"


class ParallelJobError(RuntimeError):
    """A job failed; ``index`` is the position of the offending item."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"job failed on instance {index}: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause


def resolve_workers(workers: int | None) -> int:
    """The environment variable, when set, overrides the requested count."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    workers = 1 if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be at least 1")
    return workers


def _guarded(job, index, item):
    try:
        return job(item), None
    except Exception as exc:  # noqa: BLE001 - reported with the index below
        return None, (index, exc)


def parallel_eval(items, job, workers: int | None = 1, timing: dict | None = None) -> list:
    """``[job(x) for x in items]`` over a process pool.

    ``job`` must be picklable (a module-level function or a partial of one)
    and must derive any randomness from the item itself, which makes the
    output independent of the worker count.  ``timing`` receives the wall
    clock and the process CPU time of the parent.
    """
    items = list(items)
    workers = resolve_workers(workers)
    t0, c0 = time.perf_counter(), time.process_time()
    if workers == 1 or len(items) <= 1:
        out = [_guarded(job, i, x) for i, x in enumerate(items)]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
            out = list(pool.map(_guarded, [job] * len(items), range(len(items)), items))
    if timing is not None:
        timing["wall_seconds"] = time.perf_counter() - t0
        timing["cpu_seconds"] = time.process_time() - c0
        timing["workers"] = workers
    results = []
    for res, err in out:
        if err is not None:
            raise ParallelJobError(*err)
        results.append(res)
    return results
