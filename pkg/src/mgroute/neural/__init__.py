"""Multigraph policies: GREAT encoder, hyper-network decoders, rollouts and checkpoints."""

from .graph import GraphBatch, context_dim, edge_features, feature_dim
from .hypernet import HyperNet
from .layers import Dense, GreatLayer, GreatPool, Norm, TransformerLayer, segment_mean, segment_softmax
from .models import (
    GMSDH,
    GMSEB,
    DHRollout,
    ModelConfig,
    Rollout,
    RouteState,
    check_finite_grads,
    chebyshev_reward,
    scalar_edge_cost,
)

__all__ = [
    "GraphBatch",
    "context_dim",
    "edge_features",
    "feature_dim",
    "HyperNet",
    "Dense",
    "GreatLayer",
    "GreatPool",
    "Norm",
    "TransformerLayer",
    "segment_mean",
    "segment_softmax",
    "GMSDH",
    "GMSEB",
    "DHRollout",
    "ModelConfig",
    "Rollout",
    "RouteState",
    "check_finite_grads",
    "chebyshev_reward",
    "scalar_edge_cost",
]
