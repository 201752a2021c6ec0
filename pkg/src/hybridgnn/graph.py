"""Immutable in-memory multiplex heterogeneous network.

Nodes carry exactly one type, edges carry a relationship label, and the same
node pair may be linked under several relationships. Edges are undirected:
directed input is symmetrized and duplicates collapse. All identifiers are
dense integers assigned in sorted-label order, so loading is deterministic
for any ordering of the input streams.

Adjacency is stored twice per relationship: once sorted by neighbor id (the
canonical adjacency) and once grouped by neighbor type (what the samplers
index into). Arrays are frozen after construction; readers never synchronize.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateTypeAssignment,
    EmptyGraph,
    ParseError,
    SchemaViolation,
    UnknownLabel,
    UnknownNode,
    UnknownRelationship,
)


@dataclass(frozen=True)
class MetapathScheme:
    """A typed path template ``o_0 -r_1-> o_1 ... -r_n-> o_n``.

    ``node_types`` has one more entry than ``relationships``. The scheme is
    intra-relationship when every step uses the same relationship.
    """

    node_types: tuple[int, ...]
    relationships: tuple[int, ...]

    def __post_init__(self):
        if len(self.node_types) != len(self.relationships) + 1:
            raise ValueError("scheme needs len(node_types) == len(relationships) + 1")
        if len(self.relationships) == 0:
            raise ValueError("scheme must have at least one step")

    @property
    def length(self) -> int:
        return len(self.relationships)

    @property
    def is_intra(self) -> bool:
        return len(set(self.relationships)) == 1

    def label(self, g: "MultiplexGraph") -> str:
        parts = [g.type_names[self.node_types[0]]]
        for r, t in zip(self.relationships, self.node_types[1:]):
            parts.append(f"({g.rel_names[r]})")
            parts.append(g.type_names[t])
        return "-".join(parts)


class MultiplexGraph:
    """Typed nodes plus per-relationship sorted adjacency.

    Construct through :func:`load_graph`; the constructor wires prebuilt
    arrays and freezes them.
    """

    def __init__(
        self,
        node_type: np.ndarray,
        type_names: list[str],
        rel_names: list[str],
        node_labels: list[str],
        indptr: np.ndarray,
        nbr_sorted: np.ndarray,
        nbr_by_type: np.ndarray,
        type_ptr: np.ndarray,
        schema: frozenset[tuple[int, int, int]],
        edge_counts: np.ndarray,
    ):
        self.node_type = node_type
        self.type_names = type_names
        self.rel_names = rel_names
        self.node_labels = node_labels
        self.indptr = indptr              # (R, V+1) offsets into both index arrays
        self.nbr_sorted = nbr_sorted      # neighbors sorted by id within each slice
        self.nbr_by_type = nbr_by_type    # neighbors grouped by (type, id)
        self.type_ptr = type_ptr          # (R, V, T+1) absolute offsets into nbr_by_type
        self.schema = schema
        self.edge_counts = edge_counts    # undirected edge count per relationship
        self.label_to_id = {lab: i for i, lab in enumerate(node_labels)}
        self.rel_to_id = {lab: i for i, lab in enumerate(rel_names)}
        self.type_to_id = {lab: i for i, lab in enumerate(type_names)}
        for arr in (node_type, indptr, nbr_sorted, nbr_by_type, type_ptr):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_type)

    @property
    def n_types(self) -> int:
        return len(self.type_names)

    @property
    def n_rels(self) -> int:
        return len(self.rel_names)

    @property
    def n_edges(self) -> int:
        return int(self.edge_counts.sum())

    def degree(self, v: int, r: int) -> int:
        return int(self.indptr[r, v + 1] - self.indptr[r, v])

    def degrees(self, r: int) -> np.ndarray:
        return np.diff(self.indptr[r])

    def total_degrees(self) -> np.ndarray:
        """Degree summed over all relationships, per node."""
        return np.diff(self.indptr, axis=1).sum(axis=0)

    def neighbors(self, v: int, r: int) -> np.ndarray:
        """Neighbors of ``v`` under relationship ``r``, sorted by id."""
        return self.nbr_sorted[self.indptr[r, v]: self.indptr[r, v + 1]]

    def typed_neighbors(self, v: int, r: int, t: int) -> np.ndarray:
        """Neighbors of ``v`` under ``r`` whose type is ``t``."""
        return self.nbr_by_type[self.type_ptr[r, v, t]: self.type_ptr[r, v, t + 1]]

    def available_relationships(self, v: int) -> set[int]:
        """Relationships with at least one neighbor at ``v``."""
        degs = self.indptr[:, v + 1] - self.indptr[:, v]
        return set(np.nonzero(degs > 0)[0].tolist())

    def nodes_of_type(self, t: int) -> np.ndarray:
        return np.nonzero(self.node_type == t)[0].astype(np.int32)

    def edges(self, r: int) -> np.ndarray:
        """Unique undirected edges under ``r`` as an (E, 2) array with u <= v."""
        degs = np.diff(self.indptr[r])
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), degs)
        dst = self.nbr_sorted[self.indptr[r, 0]: self.indptr[r, -1]].astype(np.int64)
        keep = src <= dst
        return np.column_stack([src[keep], dst[keep]]).astype(np.int32)

    def validate_scheme(self, scheme: MetapathScheme) -> None:
        """Raise SchemaViolation at the first step absent from the schema."""
        for i, r in enumerate(scheme.relationships):
            if r < 0 or r >= self.n_rels:
                raise SchemaViolation(
                    f"step {i + 1}: relationship id {r} out of range", index=i + 1
                )
            triple = (scheme.node_types[i], r, scheme.node_types[i + 1])
            if triple not in self.schema:
                names = (
                    self.type_names[scheme.node_types[i]],
                    self.rel_names[r],
                    self.type_names[scheme.node_types[i + 1]],
                )
                raise SchemaViolation(
                    f"step {i + 1}: no {names[0]}-[{names[1]}]-{names[2]} edges observed",
                    index=i + 1,
                )

    def resolve_scheme(self, type_labels: Sequence[str],
                       rel_labels: Sequence[str]) -> MetapathScheme:
        """Build a scheme from labels, validating them against this graph."""
        try:
            types = tuple(self.type_to_id[t] for t in type_labels)
        except KeyError as e:
            raise UnknownLabel(f"unknown node type label {e.args[0]!r}") from None
        try:
            rels = tuple(self.rel_to_id[r] for r in rel_labels)
        except KeyError as e:
            raise UnknownRelationship(f"unknown relationship label {e.args[0]!r}") from None
        return MetapathScheme(types, rels)


def load_graph(
    edge_records: Iterable[tuple[str, str, str]],
    type_records: Iterable[tuple[str, str]],
) -> MultiplexGraph:
    """Build a :class:`MultiplexGraph` from (src, dst, relationship) edge
    records and (node, type) assignments.

    Ids are assigned in sorted-label order, edges are symmetrized and
    deduplicated, and the (src_type, relationship, dst_type) schema is
    inferred from the data.
    """
    type_of: dict[str, str] = {}
    for node, t in type_records:
        prev = type_of.get(node)
        if prev is not None and prev != t:
            raise DuplicateTypeAssignment(
                f"node {node!r} assigned types {prev!r} and {t!r}"
            )
        type_of[node] = t

    raw_edges = list(edge_records)
    if not raw_edges:
        raise EmptyGraph("no edges in input")

    for src, dst, rel in raw_edges:
        if src not in type_of:
            raise UnknownNode(f"edge endpoint {src!r} has no type assignment")
        if dst not in type_of:
            raise UnknownNode(f"edge endpoint {dst!r} has no type assignment")

    node_labels = sorted(type_of)
    type_names = sorted(set(type_of.values()))
    rel_names = sorted({rel for _, _, rel in raw_edges})
    node_id = {lab: i for i, lab in enumerate(node_labels)}
    type_id = {lab: i for i, lab in enumerate(type_names)}
    rel_id = {lab: i for i, lab in enumerate(rel_names)}

    n = len(node_labels)
    node_type = np.array([type_id[type_of[lab]] for lab in node_labels], dtype=np.int32)

    src = np.array([node_id[s] for s, _, _ in raw_edges], dtype=np.int64)
    dst = np.array([node_id[d] for _, d, _ in raw_edges], dtype=np.int64)
    rel = np.array([rel_id[r] for _, _, r in raw_edges], dtype=np.int64)
    return _assemble(node_type, type_names, rel_names, node_labels, src, dst, rel)


def _assemble(node_type, type_names, rel_names, node_labels, src, dst, rel):
    n = len(node_labels)
    n_rels = len(rel_names)
    n_types = len(type_names)

    # Symmetrize, then deduplicate via a packed (rel, src, dst) key.
    s = np.concatenate([src, dst])
    d = np.concatenate([dst, src])
    r = np.concatenate([rel, rel])
    key = (r * n + s) * n + d
    key = np.unique(key)
    r = key // (n * n)
    s = (key // n) % n
    d = key % n

    edge_counts = np.zeros(n_rels, dtype=np.int64)
    for ri in range(n_rels):
        m = r == ri
        lo = np.minimum(s[m], d[m])
        hi = np.maximum(s[m], d[m])
        edge_counts[ri] = len(np.unique(lo * n + hi))

    # Canonical CSR: slices ordered by (rel, src, dst).
    counts = np.bincount(r * n + s, minlength=n_rels * n).reshape(n_rels, n)
    indptr = np.zeros((n_rels, n + 1), dtype=np.int64)
    np.cumsum(counts, axis=1, out=indptr[:, 1:])
    indptr += np.concatenate([[0], np.cumsum(counts.sum(axis=1))])[:-1, None]
    nbr_sorted = d.astype(np.int32)

    # Type-grouped copy: slices re-sorted by (type of neighbor, neighbor id).
    order = np.lexsort((d, node_type[d], s, r))
    nbr_by_type = d[order].astype(np.int32)

    tcounts = np.bincount(
        (r * n + s) * n_types + node_type[d], minlength=n_rels * n * n_types
    ).reshape(n_rels, n, n_types)
    type_ptr = np.zeros((n_rels, n, n_types + 1), dtype=np.int64)
    type_ptr[:, :, 0] = indptr[:, :-1]
    np.cumsum(tcounts, axis=2, out=type_ptr[:, :, 1:])
    type_ptr[:, :, 1:] += indptr[:, :-1, None]

    schema = set()
    for a, b, c in zip(node_type[s], r, node_type[d]):
        schema.add((int(a), int(b), int(c)))

    return MultiplexGraph(
        node_type=node_type,
        type_names=list(type_names),
        rel_names=list(rel_names),
        node_labels=list(node_labels),
        indptr=indptr,
        nbr_sorted=nbr_sorted,
        nbr_by_type=nbr_by_type,
        type_ptr=type_ptr,
        schema=frozenset(schema),
        edge_counts=edge_counts,
    )


def graph_from_arrays(
    node_type: np.ndarray,
    type_names: list[str],
    rel_names: list[str],
    node_labels: list[str],
    edge_triples: np.ndarray,
) -> MultiplexGraph:
    """Rebuild a graph from id arrays; ``edge_triples`` rows are (rel, u, v)."""
    e = np.asarray(edge_triples, dtype=np.int64)
    if len(e) == 0:
        raise EmptyGraph("no edges in arrays")
    return _assemble(
        np.asarray(node_type, dtype=np.int32), list(type_names),
        list(rel_names), list(node_labels), e[:, 1], e[:, 2], e[:, 0],
    )


def subgraph_with_edges(g: MultiplexGraph, edges_per_rel: dict[int, np.ndarray]) -> MultiplexGraph:
    """Same node set and labels, adjacency restricted to the given edges.

    ``edges_per_rel`` maps relationship id to an (E, 2) node-id array.
    Used to build the training graph after an evaluation split.
    """
    srcs, dsts, rels = [], [], []
    for r, e in edges_per_rel.items():
        if len(e) == 0:
            continue
        srcs.append(e[:, 0].astype(np.int64))
        dsts.append(e[:, 1].astype(np.int64))
        rels.append(np.full(len(e), r, dtype=np.int64))
    if not srcs:
        raise EmptyGraph("no edges left in subgraph")
    return _assemble(
        g.node_type.copy(), g.type_names, g.rel_names, g.node_labels,
        np.concatenate(srcs), np.concatenate(dsts), np.concatenate(rels),
    )


def read_type_file(path) -> list[tuple[str, str]]:
    """Parse a node-type file: ``node_label <TAB> type_label`` per line."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError(f"{path}: line {lineno}: expected 'node<TAB>type'")
            records.append((parts[0], parts[1]))
    return records


def read_edge_file(path) -> list[tuple[str, str, str]]:
    """Parse an edge file: ``relationship <TAB> src <TAB> dst`` per line.

    Returns records in load_graph order, i.e. (src, dst, relationship).
    """
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise ParseError(f"{path}: line {lineno}: expected 'rel<TAB>src<TAB>dst'")
            records.append((parts[1], parts[2], parts[0]))
    return records


def load_graph_files(edge_path, type_path) -> MultiplexGraph:
    return load_graph(read_edge_file(edge_path), read_type_file(type_path))
