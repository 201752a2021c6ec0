"""Stochastic procedures: walks, context pairs, neighbor layers, negatives."""

from .backend import HAS_NUMBA, NUMBA_ENABLED, active_backend
from .layers import (
    RANDOM_FLOW,
    NeighborLayers,
    RandomFlow,
    SchemeFlow,
    metapath_guided_layers,
    randomized_exploration_layers,
)
from .negatives import NegativeSampler, sample_negatives
from .walks import (
    ContextPair,
    SamplerConfig,
    Walk,
    context_pair_arrays,
    context_pairs,
    training_walks,
    walk_matrix,
)

__all__ = [
    "HAS_NUMBA",
    "NUMBA_ENABLED",
    "active_backend",
    "RANDOM_FLOW",
    "NeighborLayers",
    "RandomFlow",
    "SchemeFlow",
    "metapath_guided_layers",
    "randomized_exploration_layers",
    "NegativeSampler",
    "sample_negatives",
    "ContextPair",
    "SamplerConfig",
    "Walk",
    "context_pair_arrays",
    "context_pairs",
    "training_walks",
    "walk_matrix",
]
