"""Relationship-specific node embeddings for multiplex heterogeneous networks.

The package learns one embedding per (node, relationship) pair by combining
metapath-guided neighbor aggregation with a randomized cross-relationship
exploration flow, fused by a two-level self-attention stack and trained with
a walk-based skip-gram objective.
"""

__version__ = "0.1.0"

from .graph import MetapathScheme, MultiplexGraph, load_graph
from .model import FlowRegistry, ModelDims, ModelParams, init_params
from .sampling import SamplerConfig
from .trainer import TrainConfig

__all__ = [
    "MetapathScheme",
    "MultiplexGraph",
    "load_graph",
    "FlowRegistry",
    "ModelDims",
    "ModelParams",
    "init_params",
    "SamplerConfig",
    "TrainConfig",
]
