"""Metapath-constrained training walks and context-pair extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from ..errors import NoValidStartNodes
from ..graph import MetapathScheme, MultiplexGraph
from ..rng import PURPOSE_WALK, derive_keys_np
from . import kernels


@dataclass
class SamplerConfig:
    """Knobs for every stochastic procedure.

    ``fanout`` gives the per-layer sample width for neighbor layers;
    ``exploration_depth`` the number of randomized-exploration hops.
    """

    num_walks: int = 20
    walk_length: int = 10
    window: int = 5
    fanout: tuple[int, ...] = (10, 10)
    exploration_depth: int = 2
    negatives: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.num_walks < 1 or self.walk_length < 1 or self.window < 1:
            raise ValueError("num_walks, walk_length and window must be positive")
        if self.window >= self.walk_length:
            raise ValueError("window must be smaller than walk_length")
        if self.negatives < 1 or self.exploration_depth < 1:
            raise ValueError("negatives and exploration_depth must be positive")
        if any(f < 1 for f in self.fanout):
            raise ValueError("fanout entries must be positive")


@dataclass(frozen=True)
class Walk:
    relationship: int
    nodes: np.ndarray  # dead ends truncate, so len(nodes) <= walk_length


@dataclass(frozen=True)
class ContextPair:
    center: int
    context: int
    relationship: int


def walk_matrix(
    g: MultiplexGraph,
    r: int,
    scheme: MetapathScheme,
    num_walks: int,
    walk_length: int,
    seed: int,
    salt: int = 0,
    backend: str | None = None,
) -> np.ndarray:
    """All walks for one (relationship, scheme) as a -1 padded int32 matrix.

    Rows are ordered (start node asc, walk index asc); row streams are keyed
    by (seed, salt, relationship, start node, walk index), so the corpus is
    reproducible regardless of how generation is scheduled.
    """
    if not scheme.is_intra or scheme.relationships[0] != r:
        raise ValueError("training walks need an intra-relationship scheme under r")
    starts = g.nodes_of_type(scheme.node_types[0])
    if len(starts) == 0:
        tname = (
            g.type_names[scheme.node_types[0]]
            if scheme.node_types[0] < g.n_types
            else scheme.node_types[0]
        )
        raise NoValidStartNodes(f"no node has type {tname!r}")
    g.validate_scheme(scheme)
    rows_start = np.repeat(starts, num_walks).astype(np.int32)
    widx = np.tile(np.arange(num_walks, dtype=np.int64), len(starts))
    keys = derive_keys_np(
        seed,
        np.full(len(rows_start), PURPOSE_WALK),
        np.full(len(rows_start), salt),
        np.full(len(rows_start), r),
        rows_start.astype(np.int64),
        widx,
    )
    cyc_types = np.asarray(scheme.node_types[:-1], dtype=np.int64)
    return kernels.walks(
        g.nbr_by_type, g.type_ptr[r], cyc_types, rows_start, keys,
        walk_length, backend,
    )


def training_walks(
    g: MultiplexGraph,
    r: int,
    scheme: MetapathScheme,
    cfg: SamplerConfig,
    salt: int = 0,
    backend: str | None = None,
) -> Iterator[Walk]:
    """Walks as a stream, truncated at the first dead end."""
    matrix = walk_matrix(
        g, r, scheme, cfg.num_walks, cfg.walk_length, cfg.seed, salt, backend
    )
    for row in matrix:
        stop = np.argmax(row < 0) if (row < 0).any() else len(row)
        yield Walk(relationship=r, nodes=row[:stop].copy())


def context_pair_arrays(
    walks_matrix: np.ndarray, window: int, backend: str | None = None,
    drop_self: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """(centers, contexts) for all positions within the moving window.

    A node revisited inside its own window would pair with itself; such
    pairs are dropped (a center is never its own context).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    centers, contexts = kernels.context_pairs_arrays(walks_matrix, window, backend)
    if drop_self:
        keep = centers != contexts
        centers, contexts = centers[keep], contexts[keep]
    return centers, contexts


def context_pairs(
    walks: Iterable[Walk], window: int, backend: str | None = None
) -> Iterator[ContextPair]:
    """Expand walks into the pairs allowed by the window definition."""
    for walk in walks:
        row = walk.nodes.reshape(1, -1).astype(np.int32)
        if row.shape[1] < 2:
            continue
        centers, contexts = context_pair_arrays(row, window, backend)
        for c, x in zip(centers, contexts):
            yield ContextPair(int(c), int(x), walk.relationship)
