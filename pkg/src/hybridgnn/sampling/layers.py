"""Neighbor-layer sampling for the two flow kinds.

A scheme flow walks a fixed (type, relationship) template; candidates are
restricted to nodes that can still complete the template, so the sampled
layers stay inside the set of full metapath instances. A random flow draws
a relationship uniformly among those available at the current node, then a
neighbor uniformly under it.

Both produce fixed-width layers (with-replacement sampling) so batches stay
rectangular; an origin with no way forward repeats itself through all layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TypeMismatch
from ..graph import MetapathScheme, MultiplexGraph
from ..rng import PURPOSE_LAYERS, PURPOSE_RANDOM_LAYERS, derive_keys_np
from . import kernels

RANDOM_FLOW = "random"


@dataclass(frozen=True)
class NeighborLayers:
    """Sampled layers around one origin; ``layers[0]`` is the origin itself."""

    origin: int
    scheme_tag: str
    layers: list


def _split(matrix: np.ndarray, offsets: np.ndarray) -> list[np.ndarray]:
    return [matrix[:, offsets[j]: offsets[j + 1]] for j in range(len(offsets) - 1)]


class SchemeFlow:
    """Per-(graph, scheme) sampling plan with completability-filtered steps."""

    def __init__(self, g: MultiplexGraph, scheme: MetapathScheme):
        g.validate_scheme(scheme)
        self.graph = g
        self.scheme = scheme
        self.depth = scheme.length
        self._build_steps()

    def _build_steps(self):
        g, scheme = self.graph, self.scheme
        v = g.n_nodes
        k = scheme.length

        # completable[j]: nodes of type o_j that can still finish the scheme
        completable = np.zeros((k + 1, v), dtype=bool)
        completable[k] = g.node_type == scheme.node_types[k]
        for j in range(k - 1, -1, -1):
            r = scheme.relationships[j]
            tau = scheme.node_types[j + 1]
            mark = completable[j + 1][g.nbr_by_type]
            cum = np.concatenate([[0], np.cumsum(mark)])
            starts = g.type_ptr[r, :, tau]
            ends = g.type_ptr[r, :, tau + 1]
            has_child = (cum[ends] - cum[starts]) > 0
            completable[j] = has_child & (g.node_type == scheme.node_types[j])

        # per-step adjacency restricted to completable targets
        indptr = np.zeros((k, v + 1), dtype=np.int64)
        chunks = []
        base = 0
        nnz = len(g.nbr_by_type)
        for j in range(1, k + 1):
            r = scheme.relationships[j - 1]
            tau = scheme.node_types[j]
            starts = g.type_ptr[r, :, tau]
            ends = g.type_ptr[r, :, tau + 1]
            delta = np.zeros(nnz + 1, dtype=np.int32)
            np.add.at(delta, starts, 1)
            np.add.at(delta, ends, -1)
            in_slice = np.cumsum(delta[:-1]) > 0
            keep = in_slice & completable[j][g.nbr_by_type]
            cum = np.concatenate([[0], np.cumsum(keep)])
            counts = cum[ends] - cum[starts]
            indptr[j - 1, 0] = base
            indptr[j - 1, 1:] = base + np.cumsum(counts)
            chunks.append(g.nbr_by_type[keep])
            base += int(counts.sum())
        self.steps_indptr = indptr
        self.steps_indices = (
            np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
        )
        self.completable = completable

    def sample_batch(
        self,
        starts: np.ndarray,
        fanouts: np.ndarray,
        keys: np.ndarray,
        backend: str | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        fanouts = np.asarray(fanouts[: self.depth], dtype=np.int64)
        if len(fanouts) < self.depth:
            raise ValueError("fanout list shorter than scheme length")
        return kernels.metapath_layers(
            self.steps_indptr, self.steps_indices,
            np.asarray(starts, dtype=np.int32), fanouts,
            np.asarray(keys, dtype=np.uint64), backend,
        )


class RandomFlow:
    """Randomized inter-relationship exploration plan for a graph."""

    def __init__(self, g: MultiplexGraph):
        self.graph = g
        degs = np.diff(g.indptr, axis=1)  # (R, V)
        avail = degs > 0
        self.avail_count = avail.sum(axis=0).astype(np.int32)
        order = np.argsort(~avail, axis=0, kind="stable")  # available rels first, asc
        self.avail_list = np.ascontiguousarray(order.T.astype(np.int32))
        self.avail_list[self.avail_count[:, None] <= np.arange(g.n_rels)[None, :]] = 0

    def sample_batch(
        self,
        starts: np.ndarray,
        depth: int,
        fanouts: np.ndarray,
        keys: np.ndarray,
        backend: str | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        fanouts = np.asarray(fanouts[:depth], dtype=np.int64)
        if len(fanouts) < depth:
            raise ValueError("fanout list shorter than exploration depth")
        return kernels.random_layers(
            self.graph.indptr, self.graph.nbr_sorted,
            self.avail_list, self.avail_count,
            np.asarray(starts, dtype=np.int32), fanouts,
            np.asarray(keys, dtype=np.uint64), backend,
        )


def _layer_keys(seed: int, purpose: int, salt: int, nodes: np.ndarray) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=np.int64)
    return derive_keys_np(
        seed,
        np.full(len(nodes), purpose),
        np.full(len(nodes), salt),
        nodes,
    )


def metapath_guided_layers(
    g: MultiplexGraph,
    v: int,
    scheme: MetapathScheme,
    fanout,
    seed: int = 0,
    salt: int = 0,
    backend: str | None = None,
) -> NeighborLayers:
    """Layers around ``v`` following ``scheme`` with the given per-step widths."""
    if g.node_type[v] != scheme.node_types[0]:
        raise TypeMismatch(
            f"node {v} has type {g.type_names[g.node_type[v]]!r}, scheme starts at "
            f"{g.type_names[scheme.node_types[0]]!r}"
        )
    flow = SchemeFlow(g, scheme)
    keys = _layer_keys(seed, PURPOSE_LAYERS, salt, np.array([v]))
    matrix, offsets = flow.sample_batch(np.array([v]), np.asarray(fanout), keys, backend)
    return NeighborLayers(
        origin=v,
        scheme_tag=scheme.label(g),
        layers=[layer[0] for layer in _split(matrix, offsets)],
    )


def randomized_exploration_layers(
    g: MultiplexGraph,
    v: int,
    depth: int,
    fanout,
    seed: int = 0,
    salt: int = 0,
    backend: str | None = None,
) -> NeighborLayers:
    """Layers around ``v`` from two-phase (relationship, neighbor) draws."""
    flow = RandomFlow(g)
    keys = _layer_keys(seed, PURPOSE_RANDOM_LAYERS, salt, np.array([v]))
    matrix, offsets = flow.sample_batch(
        np.array([v]), depth, np.asarray(fanout), keys, backend
    )
    return NeighborLayers(
        origin=v,
        scheme_tag=RANDOM_FLOW,
        layers=[layer[0] for layer in _split(matrix, offsets)],
    )
