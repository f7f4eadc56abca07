"""Per-instance normalized HV, gaps against a baseline run, CSV and Markdown tables."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from ..core import ContractViolation
from ..metrics import hv_gap, normalized_hv, reference_point
from .solvers import load_archives

__all__ = ["RunResult", "evaluate_run", "summarize", "to_csv", "to_markdown", "per_instance_csv"]


class RunResult:
    """Normalized HV per instance for one archive file."""

    def __init__(self, name: str, hv: np.ndarray, seconds: float | None):
        self.name, self.hv, self.seconds = name, hv, seconds

    @property
    def mean_hv(self) -> float:
        return float(np.mean(self.hv)) if len(self.hv) else 0.0


def _run_seconds(path: Path):
    man = Path(str(path) + ".manifest.json")
    if man.exists():
        return json.loads(man.read_text()).get("timing", {}).get("wall_seconds")
    return None


def evaluate_run(path, ref: str, name: str | None = None) -> RunResult:
    recs = load_archives(path)
    recs.sort(key=lambda r: r["index"])
    hv = np.array([normalized_hv(r["points"], reference_point(ref, r["n"])) for r in recs])
    return RunResult(name or Path(path).stem, hv, _run_seconds(Path(path)))


def summarize(runs: list[RunResult], baseline: str | None = None) -> list[dict]:
    """One row per run; the gap is taken against ``baseline`` or, if absent, the best mean HV."""
    if not runs:
        return []
    means = {r.name: r.mean_hv for r in runs}
    if baseline is None:
        best = max(means.values())
    elif baseline in means:
        best = means[baseline]
    else:
        raise ContractViolation(f"baseline run {baseline!r} is not among {sorted(means)}")
    rows = []
    for r in runs:
        gap = hv_gap(r.mean_hv, best) if best > 0 else float("nan")
        rows.append(
            {
                "method": r.name,
                "instances": len(r.hv),
                "mean_hv": r.mean_hv,
                "gap_pct": gap,
                "seconds": r.seconds,
            }
        )
    return rows


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["method", "instances", "mean_hv", "gap_pct", "seconds"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "mean_hv": f"{r['mean_hv']:.6f}", "gap_pct": f"{r['gap_pct']:.4f}", "seconds": _fmt_s(r["seconds"])})
    return buf.getvalue()


def per_instance_csv(runs: list[RunResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", *[r.name for r in runs]])
    n = max((len(r.hv) for r in runs), default=0)
    for i in range(n):
        w.writerow([i, *[f"{r.hv[i]:.6f}" if i < len(r.hv) else "" for r in runs]])
    return buf.getvalue()


def _fmt_s(s):
    return "" if s is None else f"{s:.2f}"


def to_markdown(rows: list[dict], title: str = "") -> str:
    lines = []
    if title:
        lines += [f"### {title}", ""]
    lines.append("| Method | HV | Gap | Time |")
    lines.append("|---|---:|---:|---:|")
    for r in rows:
        t = _fmt_s(r["seconds"])
        lines.append(f"| {r['method']} | {r['mean_hv']:.4f} | {r['gap_pct']:.2f}% | {t + 's' if t else '-'} |")
    return "\n".join(lines) + "\n"
