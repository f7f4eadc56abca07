"""Command line entry point: ``mgroute generate | solve | train | eval | bench``."""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from pathlib import Path

from .. import __version__
from ..core import ContractViolation
from ..gen import TW_PARAMS, GenSpec, InstanceFormatError, generate, load_instances, save_instances
from ..problems import EARLY_ARRIVAL_VIOLATES
from .parallel import ParallelJobError, resolve_workers
from .report import evaluate_run, per_instance_csv, summarize, to_csv, to_markdown
from .solvers import NEURAL_SOLVERS, SOLVERS, archive_record, solve_file

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

__all__ = ["main", "build_parser"]


class CliError(Exception):
    """User-facing failure; the message names the flag, file or record at fault."""


def _problem_for(dist: str, problem: str | None) -> str:
    if problem:
        return problem
    return "mgmotsp" if dist in ("fix", "flex") else "motsp"


def _knobs() -> dict:
    return {"time_windows": dict(TW_PARAMS), "early_arrival_violates": EARLY_ARRIVAL_VIOLATES, "ideal_point": "zero"}


def _write_manifest(path: Path, payload: dict) -> None:
    man = {"package_version": __version__, "python": platform.python_version(), "knobs": _knobs(), **payload}
    Path(str(path) + ".manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")


def _load(path) -> list:
    try:
        return load_instances(path)
    except FileNotFoundError:
        raise CliError(f"--instances: file not found: {path}") from None
    except InstanceFormatError as exc:
        raise CliError(f"--instances: {exc}") from None


# generate ------------------------------------------------------------------------


def cmd_generate(a) -> None:
    try:
        spec = GenSpec(a.dist, a.n, m=a.m, x=a.x, problem=_problem_for(a.dist, a.problem), seed=a.seed)
    except ContractViolation as exc:
        raise CliError(f"generate flags: {exc}") from None
    if a.count < 0:
        raise CliError("--count must be non-negative")
    out = Path(a.out)
    save_instances(out, generate(spec, a.count))
    _write_manifest(out, {"command": "generate", "gen_spec": spec.to_dict(), "count": a.count})
    print(f"wrote {a.count} instances ({spec.name}) to {out}")


# solve -----------------------------------------------------------------------------


def _load_model(path):
    from ..neural.checkpoint import load_checkpoint

    if not path:
        raise CliError("--checkpoint is required for neural solvers")
    try:
        return load_checkpoint(path)
    except FileNotFoundError:
        raise CliError(f"--checkpoint: file not found: {path}") from None
    except ContractViolation as exc:
        raise CliError(f"--checkpoint: {exc}") from None


def run_solve(instances, solver, out, n_prefs=101, workers=1, checkpoint=None, options=None, kind=None) -> dict:
    model = _load_model(checkpoint) if solver in NEURAL_SOLVERS else None
    timing: dict = {}
    try:
        archives = solve_file(instances, solver, n_prefs, kind, options, workers, model, timing)
    except ParallelJobError as exc:
        raise CliError(f"solve: {exc}") from None
    except ContractViolation as exc:
        raise CliError(f"solve --solver {solver}: {exc}") from None
    out = Path(out)
    with open(out, "w") as fh:
        for i, (inst, arc) in enumerate(zip(instances, archives)):
            fh.write(archive_record(i, inst, arc, solver) + "\n")
    _write_manifest(
        out,
        {
            "command": "solve",
            "solver": solver,
            "prefs": n_prefs,
            "options": options or {},
            "checkpoint": str(checkpoint) if checkpoint else None,
            "instances": len(instances),
            "timing": timing,
        },
    )
    return timing


def cmd_solve(a) -> None:
    instances = _load(a.instances)
    opts = {
        "seed": a.seed,
        "generations": a.generations,
        "pop_size": a.pop_size,
        "ls_moves": a.ls_moves,
        "max_moves": a.max_moves,
        "all_starts": a.all_starts,
    }
    timing = run_solve(instances, a.solver, a.out, a.prefs, a.workers, a.checkpoint, opts)
    print(f"solved {len(instances)} instances with {a.solver} in {timing.get('wall_seconds', 0):.2f}s -> {a.out}")


# train -----------------------------------------------------------------------------


def _parse_stage(text: str):
    from ..train import Stage

    parts = text.split(":")
    try:
        n = int(parts[0])
        dist = parts[1] if len(parts) > 1 else "xasy"
        x = int(parts[2]) if len(parts) > 2 else 1
        epochs = int(parts[3]) if len(parts) > 3 else 1
    except (ValueError, IndexError):
        raise CliError(f"--stage {text!r}: expected n[:dist[:x[:epochs]]]") from None
    return Stage(n, dist, x, epochs)


def cmd_train(a) -> None:
    import torch

    from ..neural import GMSDH, GMSEB, ModelConfig
    from ..neural.checkpoint import save_checkpoint
    from ..train import TrainConfig, curriculum_run, dumps_manifest, train_manifest

    torch.set_num_threads(a.threads)
    stages = tuple(_parse_stage(s) for s in (a.stage or ["10:xasy:1:1"]))
    try:
        mcfg = ModelConfig(
            problem=a.problem, m=a.m, d=a.d, heads=a.heads, layers=a.layers, l2=a.l2, l3=a.l3,
            norm=a.norm, score_cost=a.score_cost, seed=a.seed,
        )
        tcfg = TrainConfig(
            batch_size=a.batch_size, lr=a.lr, K=a.K, K1=a.K1, K2=a.K2, batches_per_epoch=a.batches_per_epoch,
            stages=stages, seed=a.seed, val_instances=a.val_instances, val_prefs=a.val_prefs,
        )
        model = (GMSDH if a.model == "gms-dh" else GMSEB)(mcfg)
        model, history = curriculum_run(
            model, tcfg, log=lambda r: print(json.dumps(r), flush=True), validate=not a.no_validate
        )
    except ContractViolation as exc:
        raise CliError(f"train: {exc}") from None
    out = Path(a.out)
    save_checkpoint(model, out, extra={"train": train_manifest(model, tcfg, history)})
    Path(str(out) + ".manifest.txt").write_text(dumps_manifest(train_manifest(model, tcfg, history)))
    hist = Path(a.history) if a.history else Path(str(out) + ".history.csv")
    with open(hist, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(history[0]) if history else ["epoch"], lineterminator="\n")
        w.writeheader()
        w.writerows(history)
    print(f"checkpoint {out}, history {hist}")


# eval ------------------------------------------------------------------------------


def run_eval(archives, ref, baseline=None, names=None) -> tuple[list, list]:
    runs = []
    for k, path in enumerate(archives):
        try:
            runs.append(evaluate_run(path, ref, names[k] if names else None))
        except FileNotFoundError:
            raise CliError(f"--archives: file not found: {path}") from None
        except ContractViolation as exc:
            raise CliError(f"--archives {path}: {exc}") from None
    try:
        rows = summarize(runs, baseline)
    except ContractViolation as exc:
        raise CliError(f"--baseline: {exc}") from None
    return runs, rows


def cmd_eval(a) -> None:
    runs, rows = run_eval(a.archives, a.ref, a.baseline, a.names)
    text_csv, text_md = to_csv(rows), to_markdown(rows, a.title or "")
    if a.csv:
        Path(a.csv).write_text(text_csv)
        Path(a.csv).with_suffix(".instances.csv").write_text(per_instance_csv(runs))
    if a.md:
        Path(a.md).write_text(text_md)
    sys.stdout.write(text_md)


# bench -----------------------------------------------------------------------------

BENCH_DEFAULTS = {
    "count": 200,
    "prefs": 101,
    "seed": 0,
    "m": 2,
    "workers": 1,
    "distributions": ["fix2"],
    "sizes": [20],
    "solvers": ["nn", "nn+2opt"],
    "baseline": None,
    "checkpoints": {},
    "options": {},
}


def _split_dist(name: str) -> tuple[str, int]:
    base = name.rstrip("0123456789")
    digits = name[len(base):]
    return base, int(digits) if digits else 1


def _reference_for(problem: str, dist: str) -> str:
    from ..train import default_reference

    return default_reference(problem, dist, 0)


def run_bench(cfg: dict, out_dir) -> str:
    cfg = {**BENCH_DEFAULTS, **cfg}
    unknown = set(cfg) - set(BENCH_DEFAULTS) - {"problem"}
    if unknown:
        raise CliError(f"bench config: unknown keys {sorted(unknown)}")
    bad = [s for s in cfg["solvers"] if s not in SOLVERS]
    if bad:
        raise CliError(f"bench config: unknown solvers {bad}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    md = []
    summary_rows = []
    for dname in cfg["distributions"]:
        dist, x = _split_dist(dname.lower())
        for n in cfg["sizes"]:
            problem = _problem_for(dist, cfg.get("problem"))
            try:
                spec = GenSpec(dist, n, m=cfg["m"] if problem != "mocvrp" else 1, x=x, problem=problem, seed=cfg["seed"])
            except ContractViolation as exc:
                raise CliError(f"bench config ({dname}, n={n}): {exc}") from None
            inst_path = out_dir / f"{spec.name}.jsonl"
            instances = generate(spec, cfg["count"])
            save_instances(inst_path, instances)
            _write_manifest(inst_path, {"command": "generate", "gen_spec": spec.to_dict(), "count": cfg["count"]})
            paths = []
            for solver in cfg["solvers"]:
                path = out_dir / f"{spec.name}.{solver}.jsonl"
                ckpt = cfg["checkpoints"].get(solver) if solver in NEURAL_SOLVERS else None
                opts = {"seed": cfg["seed"], **cfg["options"].get(solver, {})}
                run_solve(instances, solver, path, cfg["prefs"], cfg["workers"], ckpt, opts)
                paths.append(path)
            ref = _reference_for(problem, dist)
            _, rows = run_eval(paths, ref, cfg["baseline"], cfg["solvers"])
            for r in rows:
                summary_rows.append({"problem": spec.name, **r})
            md.append(to_markdown(rows, f"{spec.name} (ref {ref})"))
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        fields = ["problem", "method", "instances", "mean_hv", "gap_pct", "seconds"]
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in summary_rows:
            w.writerow(r)
    text = "\n".join(md)
    (out_dir / "summary.md").write_text(text)
    _write_manifest(out_dir / "bench", {"command": "bench", "config": cfg})
    return text


def cmd_bench(a) -> None:
    cfg = {}
    if a.config:
        try:
            cfg = tomllib.loads(Path(a.config).read_text())
        except FileNotFoundError:
            raise CliError(f"--config: file not found: {a.config}") from None
        except tomllib.TOMLDecodeError as exc:
            raise CliError(f"--config {a.config}: {exc}") from None
        cfg = cfg.get("bench", cfg)
    for key in ("count", "prefs", "seed", "workers"):
        v = getattr(a, key)
        if v is not None:
            cfg[key] = v
    if a.dist:
        cfg["distributions"] = a.dist
    if a.sizes:
        cfg["sizes"] = a.sizes
    if a.solvers:
        cfg["solvers"] = a.solvers
    sys.stdout.write(run_bench(cfg, a.out))


# parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mgroute", description=__doc__)
    p.add_argument("--version", action="version", version=f"mgroute {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a JSON-lines instance file")
    g.add_argument("--dist", required=True, choices=["euc", "tmat", "xasy", "fix", "flex"])
    g.add_argument("--n", type=int, required=True, help="node count (depot included)")
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--x", type=int, default=1, help="parallel-edge budget for fix/flex")
    g.add_argument("--problem", choices=["motsp", "mocvrp", "mgmotsp", "mgmocvrp", "mgmotsptw"])
    g.add_argument("--count", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="instances.jsonl")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve every instance for a preference grid")
    s.add_argument("--instances", required=True)
    s.add_argument("--solver", required=True, choices=SOLVERS)
    s.add_argument("--prefs", type=int, default=101)
    s.add_argument("--out", default="archives.jsonl")
    s.add_argument("--checkpoint")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--generations", type=int, default=100)
    s.add_argument("--pop-size", type=int, default=20)
    s.add_argument("--ls-moves", type=int, default=5)
    s.add_argument("--max-moves", type=int)
    s.add_argument("--all-starts", action="store_true")
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("train", help="train a policy with REINFORCE")
    t.add_argument("--model", choices=["gms-eb", "gms-dh"], default="gms-eb")
    t.add_argument("--problem", default="motsp", choices=["motsp", "mocvrp", "mgmotsp", "mgmocvrp", "mgmotsptw"])
    t.add_argument("--m", type=int, default=2)
    t.add_argument("--stage", action="append", help="n[:dist[:x[:epochs]]], repeatable, ordered by size")
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--batches-per-epoch", type=int, default=100)
    t.add_argument("--K", type=int)
    t.add_argument("--K1", type=int, default=4)
    t.add_argument("--K2", type=int)
    t.add_argument("--d", type=int, default=32)
    t.add_argument("--heads", type=int, default=4)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--l2", type=int, default=1)
    t.add_argument("--l3", type=int, default=1)
    t.add_argument("--norm", default="instance", choices=["instance", "layer", "none"])
    t.add_argument("--score-cost", default="linear", choices=["linear", "chebyshev"])
    t.add_argument("--val-instances", type=int, default=50)
    t.add_argument("--val-prefs", type=int, default=21)
    t.add_argument("--no-validate", action="store_true")
    t.add_argument("--threads", type=int, default=1)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="model.mgck")
    t.add_argument("--history")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="normalized HV tables for archive files")
    e.add_argument("--archives", nargs="+", required=True)
    e.add_argument("--names", nargs="+")
    e.add_argument("--ref", required=True, help="reference preset or explicit vector like 10,10")
    e.add_argument("--baseline", help="run name the gap is measured against (default: best run)")
    e.add_argument("--csv")
    e.add_argument("--md")
    e.add_argument("--title")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="distribution x size x solver matrix")
    b.add_argument("--config", help="TOML file with a [bench] table")
    b.add_argument("--out", default="bench_out")
    b.add_argument("--dist", nargs="+", help="e.g. fix2 flex2 xasy")
    b.add_argument("--sizes", nargs="+", type=int)
    b.add_argument("--solvers", nargs="+")
    b.add_argument("--count", type=int)
    b.add_argument("--prefs", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "names", None) and len(args.names) != len(args.archives):
            raise CliError("--names must match --archives one to one")
        if hasattr(args, "workers") and args.workers is not None:
            resolve_workers(args.workers)
        args.func(args)
    except CliError as exc:
        print(f"mgroute: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"mgroute: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
