"""Heterogeneous negative sampling.

Negatives share the context node's type and are drawn from the per-type
degree^0.75 unigram distribution (degree summed over all relationships),
rejecting the context itself. Types whose remaining mass is zero fall back
to uniform draws over the other members.
"""

from __future__ import annotations

import numpy as np

from ..errors import TypeExhausted
from ..graph import MultiplexGraph
from ..rng import PURPOSE_NEGATIVES, derive_keys_np
from . import kernels

POWER = 0.75


def build_alias(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker alias table; thresholds are 32-bit fixed point acceptance bounds."""
    m = len(probs)
    alias = np.zeros(m, dtype=np.int32)
    accept = np.ones(m, dtype=np.float64)
    scaled = probs * m
    small = [i for i in range(m) if scaled[i] < 1.0]
    large = [i for i in range(m) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        l = large.pop()
        accept[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    for i in small + large:
        accept[i] = 1.0
    thresh = np.minimum(np.round(accept * 4294967296.0), 4294967296.0)
    return alias, thresh.astype(np.uint64)


class NegativeSampler:
    """Alias tables per node type over degree^0.75 weights."""

    def __init__(self, g: MultiplexGraph):
        self.graph = g
        deg = g.total_degrees().astype(np.float64)
        weights = np.where(deg > 0, deg, 0.0) ** POWER

        members_blocks = []
        alias_blocks = []
        thresh_blocks = []
        weight_blocks = []
        offsets = [0]
        totals = []
        pos_in_type = np.zeros(g.n_nodes, dtype=np.int32)
        for t in range(g.n_types):
            members = g.nodes_of_type(t)
            pos_in_type[members] = np.arange(len(members), dtype=np.int32)
            w = weights[members]
            total = float(w.sum())
            probs = w / total if total > 0 else np.full(len(members), 1.0 / max(len(members), 1))
            alias, thresh = build_alias(probs)
            members_blocks.append(members)
            alias_blocks.append(alias)
            thresh_blocks.append(thresh)
            weight_blocks.append(w)
            totals.append(total)
            offsets.append(offsets[-1] + len(members))

        self.members = np.concatenate(members_blocks).astype(np.int32)
        self.type_off = np.array(offsets, dtype=np.int64)
        self.alias_idx = np.concatenate(alias_blocks).astype(np.int32)
        self.alias_thr = np.concatenate(thresh_blocks).astype(np.uint64)
        self.weights = np.concatenate(weight_blocks).astype(np.float64)
        self.type_total_w = np.array(totals, dtype=np.float64)
        self.pos_in_type = pos_in_type

    def type_population(self, t: int) -> int:
        return int(self.type_off[t + 1] - self.type_off[t])

    def sample_batch(
        self,
        contexts: np.ndarray,
        count: int,
        keys: np.ndarray,
        backend: str | None = None,
    ) -> np.ndarray:
        contexts = np.asarray(contexts, dtype=np.int32)
        pops = np.diff(self.type_off)[self.graph.node_type[contexts]]
        if np.any(pops <= 1):
            bad = int(contexts[np.argmax(pops <= 1)])
            raise TypeExhausted(
                f"node {bad} is the only member of its type; no negatives exist"
            )
        return kernels.negatives(
            self.members, self.type_off, self.alias_idx, self.alias_thr,
            self.weights, self.type_total_w, self.pos_in_type,
            self.graph.node_type, contexts, count,
            np.asarray(keys, dtype=np.uint64), backend,
        )


def _cached_sampler(g: MultiplexGraph) -> NegativeSampler:
    sampler = getattr(g, "_negative_sampler", None)
    if sampler is None:
        sampler = NegativeSampler(g)
        g._negative_sampler = sampler
    return sampler


def sample_negatives(
    g: MultiplexGraph,
    context: int,
    count: int,
    seed: int = 0,
    salt: int = 0,
    backend: str | None = None,
) -> np.ndarray:
    """``count`` negatives for one context node, all of the context's type."""
    if count < 1:
        raise ValueError("count must be >= 1")
    sampler = _cached_sampler(g)
    keys = derive_keys_np(
        seed, [PURPOSE_NEGATIVES], [salt], [int(context)]
    )
    return sampler.sample_batch(np.array([context]), count, keys, backend)[0]


def pair_negative_keys(seed: int, epoch: int, pair_positions: np.ndarray) -> np.ndarray:
    """Stream keys for per-pair negative draws inside the trainer."""
    n = len(pair_positions)
    return derive_keys_np(
        seed,
        np.full(n, PURPOSE_NEGATIVES),
        np.full(n, epoch),
        np.asarray(pair_positions, dtype=np.int64),
    )
