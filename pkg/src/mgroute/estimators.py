"""scikit-learn style wrappers around the solvers.

``X`` is always a sequence of :class:`MultiGraphInstance`.  ``predict``
returns one :class:`ParetoArchive` per instance, ``transform`` the
normalized hypervolume per instance as a column and ``score`` its mean.
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import ContractViolation, MultiGraphInstance
from .heur import INNER_SOLVERS, scalarized_sweep
from .metrics import normalized_hv, reference_point
from .moea import MoeaConfig, nsga2_run
from .problems import check_kind
from .scalarize import check_preference, preference_grid

__all__ = [
    "check_instances",
    "check_preferences",
    "ScalarizedSweep",
    "NSGA2",
    "GMSEBSolver",
    "GMSDHSolver",
]


def check_instances(X, kind: str | None = None, same_size: bool = False) -> tuple[list, str]:
    """Validate ``X`` and return ``(instances, kind)``; every instance must share the kind."""
    if isinstance(X, MultiGraphInstance):
        X = [X]
    if not isinstance(X, Iterable):
        raise TypeError(f"expected a sequence of MultiGraphInstance, got {type(X).__name__}")
    X = list(X)
    if not X:
        raise ValueError("X holds no instances")
    for i, inst in enumerate(X):
        if not isinstance(inst, MultiGraphInstance):
            raise TypeError(f"X[{i}] is a {type(inst).__name__}, not a MultiGraphInstance")
    kinds = {check_kind(inst, kind) for inst in X}
    if len(kinds) != 1:
        raise ValueError(f"X mixes problem kinds {sorted(kinds)}")
    if same_size and len({inst.n for inst in X}) != 1:
        raise ValueError("all instances must have the same node count")
    return X, kinds.pop()


def check_preferences(prefs, m: int = 2) -> np.ndarray:
    """An int is read as a grid size; arrays are checked row by row."""
    if isinstance(prefs, (int, np.integer)):
        return preference_grid(m, int(prefs))
    P = np.atleast_2d(np.asarray(prefs, dtype=np.float64))
    for row in P:
        check_preference(row, m)
    return P


class _ArchiveEstimator(BaseEstimator):
    def _check_fitted(self):
        if not hasattr(self, "kind_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def fit(self, X, y=None):
        X, self.kind_ = check_instances(X, self.kind)
        self.n_features_in_ = X[0].m
        return self

    def predict(self, X) -> list:
        raise NotImplementedError

    def _reference(self, inst):
        if self.reference is None:
            raise ValueError("set reference (a preset name or a vector) to compute hypervolume")
        if isinstance(self.reference, str):
            return reference_point(self.reference, inst.n)
        return np.asarray(self.reference, dtype=np.float64)

    def transform(self, X) -> np.ndarray:
        X, _ = check_instances(X, self.kind)
        archives = self.predict(X)
        return np.array([[normalized_hv(a.costs(), self._reference(i))] for i, a in zip(X, archives)])

    def score(self, X, y=None) -> float:
        return float(self.transform(X).mean())


class ScalarizedSweep(_ArchiveEstimator):
    """Prune, construct and optionally 2-opt once per preference."""

    def __init__(self, inner="nn", two_opt=False, max_moves=None, all_starts=False, prefs=101, kind=None, reference=None):
        self.inner = inner
        self.two_opt = two_opt
        self.max_moves = max_moves
        self.all_starts = all_starts
        self.prefs = prefs
        self.kind = kind
        self.reference = reference

    def fit(self, X, y=None):
        if self.inner not in INNER_SOLVERS:
            raise ValueError(f"inner must be one of {sorted(INNER_SOLVERS)}")
        return super().fit(X, y)

    def predict(self, X) -> list:
        self._check_fitted()
        X, kind = check_instances(X, self.kind_)
        P = check_preferences(self.prefs)
        return [
            scalarized_sweep(i, kind, P, self.inner, self.two_opt, self.max_moves, self.all_starts) for i in X
        ]


class NSGA2(_ArchiveEstimator):
    """The evolutionary solver; instance ``k`` of a ``predict`` call uses seed ``random_state + k``."""

    def __init__(
        self,
        pop_size=20,
        generations=100,
        mutation_rate=0.2,
        crossover_rate=0.9,
        ls_moves=5,
        random_state=0,
        kind=None,
        reference=None,
    ):
        self.pop_size = pop_size
        self.generations = generations
        self.mutation_rate = mutation_rate
        self.crossover_rate = crossover_rate
        self.ls_moves = ls_moves
        self.random_state = random_state
        self.kind = kind
        self.reference = reference

    def _config(self, seed) -> MoeaConfig:
        try:
            return MoeaConfig(
                self.pop_size, self.generations, self.mutation_rate, self.crossover_rate, self.ls_moves, seed=seed
            )
        except ContractViolation as exc:
            raise ValueError(str(exc)) from None

    def fit(self, X, y=None):
        self._config(0)
        return super().fit(X, y)

    def predict(self, X) -> list:
        self._check_fitted()
        X, kind = check_instances(X, self.kind_)
        return [nsga2_run(inst, kind, self._config(self.random_state + k)) for k, inst in enumerate(X)]


class _NeuralSolver(_ArchiveEstimator):
    """Shared logic: ``fit`` trains on freshly generated instances of the size of ``X``."""

    model_name = ""
    pruning = "learned"

    def _model_config(self, kind):
        from .neural import ModelConfig

        m = 1 if kind == "mocvrp" else 2
        return ModelConfig(
            problem=kind, m=m, d=self.d, heads=self.heads, layers=self.layers, l2=getattr(self, "l2", 1),
            l3=getattr(self, "l3", 1), seed=self.random_state,
        )

    def _stages(self, n):
        from .train import Stage

        stages = []
        if self.warmup_epochs:
            stages.append(Stage(n, "xasy", 1, self.warmup_epochs))
        stages.append(Stage(n, self.distribution, self.x, self.epochs))
        return tuple(stages)

    def fit(self, X, y=None):
        from .neural import GMSDH, GMSEB
        from .train import TrainConfig, curriculum_run

        X, kind = check_instances(X, self.kind, same_size=True)
        cfg = TrainConfig(
            batch_size=self.batch_size,
            lr=self.lr,
            K1=getattr(self, "K1", 4),
            batches_per_epoch=self.batches_per_epoch,
            stages=self._stages(X[0].n),
            seed=self.random_state,
            val_instances=self.val_instances,
        )
        cls = GMSDH if self.model_name == "gms-dh" else GMSEB
        model = cls(self._model_config(kind))
        self.model_, self.history_ = curriculum_run(model, cfg, validate=self.val_instances > 0)
        self.kind_ = kind
        self.n_features_in_ = X[0].m
        return self

    @classmethod
    def from_checkpoint(cls, path, **params):
        from .neural.checkpoint import load_checkpoint

        est = cls(**params)
        est.model_ = load_checkpoint(path)
        est.kind_ = est.model_.cfg.problem
        est.history_ = []
        return est

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit or from_checkpoint")

    def predict(self, X) -> list:
        from .train import solve_prefs

        self._check_fitted()
        X, _ = check_instances(X, self.kind_, same_size=True)
        return solve_prefs(self.model_, X, check_preferences(self.prefs), pruning=self.pruning)


class GMSEBSolver(_NeuralSolver):
    model_name = "gms-eb"

    def __init__(
        self,
        d=32,
        heads=4,
        layers=2,
        epochs=1,
        batches_per_epoch=100,
        batch_size=32,
        lr=1e-3,
        distribution="xasy",
        x=1,
        warmup_epochs=0,
        prefs=101,
        val_instances=0,
        random_state=0,
        kind=None,
        reference=None,
    ):
        self.d = d
        self.heads = heads
        self.layers = layers
        self.epochs = epochs
        self.batches_per_epoch = batches_per_epoch
        self.batch_size = batch_size
        self.lr = lr
        self.distribution = distribution
        self.x = x
        self.warmup_epochs = warmup_epochs
        self.prefs = prefs
        self.val_instances = val_instances
        self.random_state = random_state
        self.kind = kind
        self.reference = reference


class GMSDHSolver(_NeuralSolver):
    """Dual-head model; ``pruning='simple'`` routes on linearly pruned graphs instead of learned selections."""

    model_name = "gms-dh"

    def __init__(
        self,
        d=32,
        heads=4,
        layers=2,
        l2=1,
        l3=1,
        K1=4,
        epochs=1,
        batches_per_epoch=100,
        batch_size=32,
        lr=1e-3,
        distribution="fix",
        x=2,
        warmup_epochs=1,
        pruning="learned",
        prefs=101,
        val_instances=0,
        random_state=0,
        kind=None,
        reference=None,
    ):
        self.d = d
        self.heads = heads
        self.layers = layers
        self.l2 = l2
        self.l3 = l3
        self.K1 = K1
        self.epochs = epochs
        self.batches_per_epoch = batches_per_epoch
        self.batch_size = batch_size
        self.lr = lr
        self.distribution = distribution
        self.x = x
        self.warmup_epochs = warmup_epochs
        self.pruning = pruning
        self.prefs = prefs
        self.val_instances = val_instances
        self.random_state = random_state
        self.kind = kind
        self.reference = reference
