import json
import subprocess
import sys

import numpy as np
import pytest

from mgroute.bench import parallel_eval, solve_file
from mgroute.bench.cli import main
from mgroute.bench.parallel import ParallelJobError, resolve_workers
from mgroute.bench.report import RunResult, summarize, to_csv, to_markdown
from mgroute.bench.solvers import archive_record, instance_seed, load_archives, solution_from_json, solution_to_json
from mgroute.core import ContractViolation, RouteSet, Tour
from mgroute.gen import GenSpec, generate, load_instances
from mgroute.neural import GMSEB, ModelConfig
from mgroute.neural.checkpoint import save_checkpoint
from mgroute.problems import evaluate


def _square(x):
    return x * x


def _boom(x):
    if x == 3:
        raise RuntimeError("bad item")
    return x


def test_parallel_eval_order_and_timing():
    timing = {}
    assert parallel_eval(list(range(10)), _square, workers=2, timing=timing) == [i * i for i in range(10)]
    assert timing["workers"] == 2 and timing["wall_seconds"] >= 0


def test_parallel_eval_reports_failing_index():
    with pytest.raises(ParallelJobError) as info:
        parallel_eval(list(range(5)), _boom, workers=2)
    assert info.value.index == 3


def test_worker_env_override(monkeypatch):
    monkeypatch.setenv("MGROUTE_WORKERS", "3")
    assert resolve_workers(1) == 3
    monkeypatch.delenv("MGROUTE_WORKERS")
    assert resolve_workers(2) == 2


def test_instance_seed_stable():
    assert instance_seed(0, 5) == instance_seed(0, 5) != instance_seed(0, 6)


def test_solution_json_roundtrip():
    t = Tour.from_order([0, 2, 1], [1, 0, 0])
    assert solution_from_json(solution_to_json(t)) == t
    r = RouteSet.from_orders(0, [[1, 2], [3]])
    assert solution_from_json(solution_to_json(r)) == r


@pytest.mark.parametrize("solver", ["nn+2opt", "moea"])
def test_workers_do_not_change_results(solver):
    insts = generate(GenSpec("fix", 8, x=2, problem="mgmotsp", seed=2), 6)
    opts = {"generations": 5, "pop_size": 8}
    a = solve_file(insts, solver, 11, options=opts, workers=1)
    b = solve_file(insts, solver, 11, options=opts, workers=8)
    ra = [archive_record(i, x, arc, solver) for i, (x, arc) in enumerate(zip(insts, a))]
    rb = [archive_record(i, x, arc, solver) for i, (x, arc) in enumerate(zip(insts, b))]
    assert ra == rb


def test_cli_generate_solve_eval(tmp_path, capsys):
    inst = tmp_path / "i.jsonl"
    assert main(["generate", "--dist", "fix", "--x", "2", "--n", "7", "--count", "4", "--out", str(inst)]) == 0
    insts = load_instances(inst)
    assert len(insts) == 4 and insts[0].meta["problem"] == "mgmotsp"
    man = json.loads((tmp_path / "i.jsonl.manifest.json").read_text())
    assert man["gen_spec"]["distribution"] == "fix"
    outs = []
    for solver in ("nn", "nn+2opt"):
        out = tmp_path / f"{solver}.jsonl"
        assert main(["solve", "--instances", str(inst), "--solver", solver, "--prefs", "11", "--out", str(out)]) == 0
        recs = load_archives(out)
        assert [r["index"] for r in recs] == [0, 1, 2, 3]
        for r, x in zip(recs, insts):
            for p, s in zip(r["points"], r["solutions"]):
                np.testing.assert_allclose(evaluate(x, solution_from_json(s)), p)
        outs.append(str(out))
    csv_path, md_path = tmp_path / "t.csv", tmp_path / "t.md"
    assert main(["eval", "--archives", *outs, "--ref", "fix-n", "--baseline", "nn+2opt", "--csv", str(csv_path), "--md", str(md_path)]) == 0
    text = csv_path.read_text()
    assert text.startswith("method,instances,mean_hv,gap_pct,seconds")
    assert "| Method | HV | Gap | Time |" in md_path.read_text()
    assert (tmp_path / "t.instances.csv").exists()


def test_cli_neural_solve(tmp_path):
    inst = tmp_path / "i.jsonl"
    main(["generate", "--dist", "xasy", "--n", "6", "--count", "2", "--out", str(inst)])
    ckpt = tmp_path / "m.mgck"
    save_checkpoint(GMSEB(ModelConfig(problem="motsp", d=8, heads=2, layers=1)), ckpt)
    out = tmp_path / "a.jsonl"
    assert main(["solve", "--instances", str(inst), "--solver", "gms-eb", "--checkpoint", str(ckpt), "--prefs", "5", "--out", str(out)]) == 0
    assert len(load_archives(out)) == 2


def test_cli_train_writes_artifacts(tmp_path):
    out = tmp_path / "m.mgck"
    args = ["train", "--model", "gms-dh", "--problem", "mgmotsp", "--stage", "5:xasy", "--stage", "5:fix:2:1",
            "--batch-size", "2", "--batches-per-epoch", "1", "--d", "8", "--heads", "2", "--layers", "1",
            "--val-instances", "2", "--val-prefs", "3", "--out", str(out), "--history", str(tmp_path / "h.csv")]
    assert main(args) == 0
    assert out.exists() and (tmp_path / "m.mgck.json").exists()
    assert len((tmp_path / "h.csv").read_text().strip().splitlines()) == 3


def test_cli_bench(tmp_path):
    cfg = tmp_path / "b.toml"
    cfg.write_text('[bench]\ndistributions = ["fix2"]\nsizes = [6]\nsolvers = ["nn", "nn+2opt"]\ncount = 3\nprefs = 5\n')
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "summary.csv").read_text().splitlines()
    assert len(rows) == 3
    assert (tmp_path / "o" / "summary.md").exists()


@pytest.mark.parametrize(
    "argv,needle",
    [
        (["solve", "--instances", "/nonexistent.jsonl", "--solver", "nn"], "--instances"),
        (["solve", "--instances", "__INST__", "--solver", "gms-eb"], "--checkpoint"),
        (["train", "--stage", "ten"], "--stage"),
        (["eval", "--archives", "/nope.jsonl", "--ref", "fix-n"], "--archives"),
        (["bench", "--config", "/nope.toml"], "--config"),
    ],
)
def test_cli_errors_name_the_culprit(tmp_path, capsys, argv, needle):
    inst = tmp_path / "i.jsonl"
    main(["generate", "--dist", "xasy", "--n", "5", "--count", "1", "--out", str(inst)])
    argv = [str(inst) if a == "__INST__" else a for a in argv]
    assert main(argv) == 2
    assert needle in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "mgroute.bench.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "mgroute" in r.stdout


def test_summary_tables():
    runs = [RunResult("a", np.array([0.5, 0.7]), 1.0), RunResult("b", np.array([0.6, 0.6]), None)]
    rows = summarize(runs, baseline="a")
    assert rows[0]["gap_pct"] == 0.0
    assert "b" in to_csv(rows) and "| a |" in to_markdown(rows)
    with pytest.raises(ContractViolation):
        summarize(runs, baseline="c")


def test_load_archives_reports_line(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text('{"index":0,"n":5,"points":[[1,2]]}\nnot json\n')
    with pytest.raises(ContractViolation, match=":2"):
        load_archives(p)
