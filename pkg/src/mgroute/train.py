"""REINFORCE training with shared POMO baselines, the dual-head estimator and staged curricula."""

from __future__ import annotations

import json
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from . import __version__
from .core import ContractViolation, ParetoArchive
from .gen import GenSpec, generate
from .metrics import normalized_hv, reference_point
from .neural.models import GMSDH, GMSEB, chebyshev_reward, check_finite_grads
from .problems import CVRP_KINDS, EARLY_ARRIVAL_VIOLATES, evaluate, objective_dim
from .scalarize import preference_grid, sample_preference

__all__ = [
    "Stage",
    "TrainConfig",
    "make_optimizers",
    "reinforce_batch_eb",
    "reinforce_batch_dh",
    "eb_surrogate",
    "dh_surrogates",
    "solve_prefs",
    "validation_hv",
    "default_reference",
    "curriculum_run",
    "train_manifest",
    "dumps_manifest",
]


@dataclass(frozen=True)
class Stage:
    """One curriculum stage: instance size, distribution and number of epochs."""

    n: int
    distribution: str = "xasy"
    x: int = 1
    epochs: int = 1

    def spec(self, problem: str, m: int, seed: int) -> GenSpec:
        prob = problem
        if self.distribution in ("euc", "tmat", "xasy") and problem.startswith("mg"):
            # simple-graph warm-up for a multigraph model
            prob = problem[2:]
        return GenSpec(self.distribution, self.n, m=m, x=self.x, problem=prob, seed=seed)


@dataclass
class TrainConfig:
    batch_size: int = 64
    lr: float = 1e-4
    K: int | None = None  # rollouts per instance for the edge model; None = problem size
    K1: int = 4
    K2: int | None = None  # None = problem size
    batches_per_epoch: int = 100
    stages: tuple = (Stage(10),)
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    ideal: str = "zero"
    val_instances: int = 50
    val_prefs: int = 21
    val_seed: int = 10_007
    reference: str | None = None

    def __post_init__(self):
        self.stages = tuple(Stage(**s) if isinstance(s, dict) else s for s in self.stages)
        self.betas = tuple(float(b) for b in self.betas)
        if self.batch_size < 1 or self.K1 < 1 or self.batches_per_epoch < 1:
            raise ContractViolation("batch_size, K1 and batches_per_epoch must be at least 1")
        for name in ("K", "K2"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ContractViolation(f"{name} must be at least 1")
        if not self.lr > 0:
            raise ContractViolation("learning rate must be positive")
        if self.ideal != "zero":
            raise ContractViolation("only the zero ideal point is supported")
        if not self.stages:
            raise ContractViolation("need at least one curriculum stage")
        sizes = [s.n for s in self.stages]
        if sizes != sorted(sizes):
            raise ContractViolation("curriculum stages must be ordered by size")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["stages"] = [asdict(s) for s in self.stages]
        out["betas"] = list(self.betas)
        return out


def make_optimizers(model, cfg: TrainConfig) -> list:
    """One Adam for the edge model; separate ones for selection and routing parameters of the dual head."""
    kw = dict(lr=cfg.lr, betas=cfg.betas, eps=cfg.eps)
    if isinstance(model, GMSDH):
        return [torch.optim.Adam(model.selection_parameters(), **kw), torch.optim.Adam(model.routing_parameters(), **kw)]
    return [torch.optim.Adam(model.parameters(), **kw)]


def _pref_tensor(pref) -> torch.Tensor:
    return torch.as_tensor(np.asarray(pref, dtype=np.float64))


def _grad_norm(params) -> float:
    sq = sum(float((p.grad**2).sum()) for p in params if p.grad is not None)
    return sq**0.5


def _step(model, opts, loss):
    if not torch.isfinite(loss):
        raise ContractViolation(f"non-finite training loss {float(loss)}")
    for opt in opts:
        opt.zero_grad(set_to_none=False)
    if loss.requires_grad:
        loss.backward()
    check_finite_grads(model)
    norm = _grad_norm(model.parameters())
    for opt in opts:
        opt.step()
    return norm


def eb_surrogate(ro, pref, B: int) -> tuple[torch.Tensor, torch.Tensor]:
    """``(loss, rewards (B, K))`` of the POMO estimator for an edge-model rollout."""
    R = chebyshev_reward(ro.objectives, _pref_tensor(pref)).view(B, ro.K)
    adv = R - R.mean(1, keepdim=True)
    loss = -(adv.reshape(-1) * ro.logp).mean()
    return loss, R


def reinforce_batch_eb(model: GMSEB, opts, instances, pref, cfg: TrainConfig, gen=None) -> dict:
    batch = model.batch(instances)
    ro = model.rollout(batch, pref, K=cfg.K, mode="sample", gen=gen)
    loss, R = eb_surrogate(ro, pref, batch.B)
    norm = _step(model, opts, loss)
    return {"loss": float(loss.detach()), "reward": float(R.mean()), "baseline": float(R.mean()), "grad_norm": norm}


def dh_surrogates(ro, pref, B: int) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Selection loss, routing loss and the rewards ``R1 (B, K1)``, ``R2 (B, K1, K2)``.

    A selection is rewarded by the best tour found on it; each baseline is
    the mean over its own rollout group.
    """
    R2 = chebyshev_reward(ro.route.objectives, _pref_tensor(pref)).view(B, ro.K1, ro.K2)
    R1 = R2.max(-1).values
    a1 = R1 - R1.mean(1, keepdim=True)
    a2 = R2 - R2.mean(-1, keepdim=True)
    l_sel = -(a1 * ro.sel_logp).mean()
    l_route = -(a2.reshape(-1) * ro.route.logp).mean()
    return l_sel, l_route, R1, R2


def reinforce_batch_dh(model: GMSDH, opts, instances, pref, cfg: TrainConfig, gen=None) -> dict:
    batch = model.batch(instances)
    ro = model.rollout(batch, pref, K1=cfg.K1, K2=cfg.K2, mode="sample", gen=gen)
    l_sel, l_route, R1, R2 = dh_surrogates(ro, pref, batch.B)
    # the two losses touch disjoint parameter groups, so one backward pass serves both updates
    norm = _step(model, opts, l_sel + l_route)
    return {
        "loss": float(l_route.detach()),
        "sel_loss": float(l_sel.detach()),
        "reward": float(R2.mean()),
        "sel_reward": float(R1.mean()),
        "grad_norm": norm,
    }


# inference -------------------------------------------------------------------


@torch.no_grad()
def solve_prefs(model, instances, prefs, pruning: str = "learned", K=None) -> list:
    """Greedy decoding for every preference; one archive per instance.

    The encoder (shared prefix for the dual head) runs once per call; per
    preference only the hyper-network and decoders run.  Of the POMO
    rollouts the one with the best Chebyshev reward is archived.
    """
    batch = model.batch(instances)
    kind = batch.kind
    archives = [ParetoArchive(m=objective_dim(inst, kind)) for inst in instances]
    prefs = np.atleast_2d(np.asarray(prefs, dtype=np.float64))
    if isinstance(model, GMSDH):
        shared = model.encode_shared(batch)
        sel_emb = model.selection_embeddings(batch, shared) if pruning == "learned" else None
    else:
        emb = model.encode(batch)
    for w in prefs:
        if isinstance(model, GMSDH):
            ro = model.rollout(batch, w, K1=1, K2=K, pruning=pruning, shared=shared, sel_emb=sel_emb)
            obj, k = ro.route.objectives, ro.K2
        else:
            ro = model.rollout(batch, w, K=K, emb=emb)
            obj, k = ro.objectives, ro.K
        R = chebyshev_reward(obj, _pref_tensor(w)).view(batch.B, k)
        best = R.argmax(1)
        rows = np.arange(batch.B) * k + best.numpy()
        sols = model.solutions(batch, _pick(ro, rows))
        for b in range(batch.B):
            # re-evaluate so archived costs match the canonical leg summation
            archives[b].insert(evaluate(instances[b], sols[b], kind), sols[b])
    return archives


class _Picked:
    def __init__(self, edges):
        self.edges = edges


def _pick(ro, rows):
    return _Picked(ro.edges[rows])


def default_reference(problem: str, distribution: str, n: int) -> str:
    """Name of the reference preset matching a problem/distribution pair."""
    if problem == "motsp":
        return "motsp"
    if problem == "mocvrp":
        return "mocvrp"
    if problem == "mgmotsp":
        return "fix-n" if distribution == "fix" else "flex"
    if problem == "mgmocvrp":
        return "mgmocvrp-fix" if distribution == "fix" else "mgmocvrp-flex"
    return "tsptw-fix" if distribution == "fix" else "tsptw-flex"


def validation_hv(model, instances, ref, prefs=None, pruning: str = "learned", chunk: int = 50) -> float:
    prefs = preference_grid(2, 21) if prefs is None else prefs
    hv = []
    for i in range(0, len(instances), chunk):
        for arc in solve_prefs(model, instances[i : i + chunk], prefs, pruning=pruning):
            hv.append(normalized_hv(arc.costs(), ref))
    return float(np.mean(hv))


# curriculum --------------------------------------------------------------------


def _stage_data(model, cfg: TrainConfig, k: int, stage: Stage):
    problem = model.cfg.problem
    spec = stage.spec(problem, model.cfg.m, seed=cfg.seed * 1000 + k)
    val_spec = stage.spec(problem, model.cfg.m, seed=cfg.val_seed + k)
    val = generate(val_spec, cfg.val_instances)
    preset = cfg.reference or default_reference(val_spec.problem, stage.distribution, stage.n)
    return spec, val, reference_point(preset, stage.n)


def curriculum_run(model, cfg: TrainConfig, log=None, validate: bool = True):
    """Train stage after stage; returns ``(model, history)`` with one record per epoch.

    For the dual-head model on multigraph targets, stages on simple-graph
    distributions act as the warm-up (the selection head has nothing to
    choose there, so only routing learns).
    """
    step = reinforce_batch_dh if isinstance(model, GMSDH) else reinforce_batch_eb
    opts = make_optimizers(model, cfg)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    gen = torch.Generator().manual_seed(cfg.seed)
    m = model.cfg.n_obj
    history = []
    for k, stage in enumerate(cfg.stages):
        spec, val, ref = _stage_data(model, cfg, k, stage)
        drawn = 0
        for epoch in range(stage.epochs):
            t0 = time.perf_counter()
            model.train()
            reports = []
            for _ in range(cfg.batches_per_epoch):
                instances = generate(spec, cfg.batch_size, start=drawn)
                drawn += cfg.batch_size
                pref = sample_preference(m, rng)
                reports.append(step(model, opts, instances, pref, cfg, gen=gen))
            model.eval()
            rec = {
                "stage": k,
                "n": stage.n,
                "distribution": stage.distribution,
                "epoch": epoch,
                "mean_reward": float(np.mean([r["reward"] for r in reports])),
                "val_hv": validation_hv(model, val, ref, preference_grid(2, cfg.val_prefs)) if validate else float("nan"),
                "seconds": time.perf_counter() - t0,
            }
            history.append(rec)
            if log is not None:
                log(rec)
    return model, history


def train_manifest(model, cfg: TrainConfig, history=None) -> dict:
    """Everything needed to rerun a training job."""
    problem = model.cfg.problem
    return {
        "scale": "desk-scale",
        "package_version": __version__,
        "torch_version": torch.__version__,
        "python": platform.python_version(),
        "model": "gms-dh" if isinstance(model, GMSDH) else "gms-eb",
        "model_config": model.cfg.to_dict(),
        "train_config": cfg.to_dict(),
        "gen_specs": [s.spec(problem, model.cfg.m, cfg.seed * 1000 + k).to_dict() for k, s in enumerate(cfg.stages)],
        "knobs": {
            "ideal_point": [0.0] * model.cfg.n_obj,
            "reward": "chebyshev",
            "early_arrival_violates": EARLY_ARRIVAL_VIOLATES,
            "optimizer": "adam",
            "threads": torch.get_num_threads(),
            "cvrp": problem in CVRP_KINDS,
        },
        "epochs_recorded": None if history is None else len(history),
    }


def dumps_manifest(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"
