"""Deterministic binary containers for checkpoints and graph artifacts.

Layout: ``HGNN`` magic, u32 version, u64 header length, canonical JSON
header, then raw little-endian tensor bytes in the order the header's
manifest lists them. Writing the same content twice yields identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import SchemaMismatch
from .graph import MetapathScheme, MultiplexGraph, graph_from_arrays
from .model import FlowRegistry, ModelDims, ModelParams, TENSOR_FIELDS

MAGIC = b"HGNN"
VERSION = 1


def write_container(path, meta: dict, tensors: list[tuple[str, np.ndarray, str]]):
    """``tensors`` entries are (name, array, dtype-string like '<f4')."""
    manifest = []
    blobs = []
    offset = 0
    for name, arr, dtype in tensors:
        data = np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes()
        manifest.append({
            "name": name,
            "dtype": dtype,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(data),
        })
        blobs.append(data)
        offset += len(data)
    header = json.dumps(
        {"meta": meta, "tensors": manifest},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a container file (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported container version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    tensors = {}
    for entry in header["tensors"]:
        raw = payload[entry["offset"]: entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]))
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return header["meta"], tensors


# ---------------------------------------------------------------------------
# Model checkpoints
# ---------------------------------------------------------------------------

def _scheme_to_dict(s: MetapathScheme) -> dict:
    return {"types": list(s.node_types), "rels": list(s.relationships)}


def _scheme_from_dict(d) -> MetapathScheme:
    return MetapathScheme(tuple(d["types"]), tuple(d["rels"]))


def save_checkpoint(path, params: ModelParams, seed: int, extra: dict | None = None):
    """Tensors as float32; header carries dims, schema, flow layout, labels."""
    g = params.registry.graph
    meta = {
        "kind": "checkpoint",
        "dims": {"d": params.dims.d, "d_h": params.dims.d_h,
                 "d_k": params.dims.d_k},
        "node_labels": g.node_labels,
        "type_names": g.type_names,
        "rel_names": g.rel_names,
        "schema": sorted(list(t) for t in g.schema),
        "schemes_per_rel": {
            str(r): [_scheme_to_dict(s) for s in params.registry.schemes_per_rel[r]]
            for r in range(g.n_rels)
        },
        "exploration_depth": params.registry.exploration_depth,
        "include_random": params.registry.include_random,
        "seed": seed,
        "extra": extra or {},
    }
    tensors = [(name, arr, "<f4") for name, arr in params.tensors()]
    write_container(path, meta, tensors)


def load_checkpoint(path, graph: MultiplexGraph, dtype=np.float32):
    """Rebind a checkpoint to ``graph``; raises SchemaMismatch on drift."""
    meta, tensors = read_container(path)
    if meta.get("kind") != "checkpoint":
        raise ValueError(f"{path}: not a checkpoint container")
    if meta["node_labels"] != graph.node_labels:
        raise SchemaMismatch("checkpoint node labels differ from the graph")
    if meta["rel_names"] != graph.rel_names or meta["type_names"] != graph.type_names:
        raise SchemaMismatch("checkpoint type/relationship labels differ")
    schemes = {
        int(r): [_scheme_from_dict(d) for d in lst]
        for r, lst in meta["schemes_per_rel"].items()
    }
    registry = FlowRegistry(graph, schemes, meta["exploration_depth"],
                            include_random=meta.get("include_random", True))
    dims = ModelDims(**meta["dims"])
    kwargs = {}
    for name in TENSOR_FIELDS:
        if name not in tensors:
            raise SchemaMismatch(f"checkpoint missing tensor {name!r}")
        kwargs[name] = tensors[name].astype(dtype)
    params = ModelParams(dims=dims, registry=registry, **kwargs)
    if params.agg_w.shape[0] != registry.n_weight_slots:
        raise SchemaMismatch("aggregation weight layout differs")
    return params, meta


# ---------------------------------------------------------------------------
# Graph artifacts
# ---------------------------------------------------------------------------

def save_graph_artifact(path, g: MultiplexGraph):
    triples = []
    for r in range(g.n_rels):
        e = g.edges(r)
        triples.append(
            np.column_stack([np.full(len(e), r, dtype=np.int64), e])
        )
    edge_triples = (
        np.concatenate(triples) if triples else np.empty((0, 3), dtype=np.int64)
    )
    meta = {
        "kind": "graph",
        "node_labels": g.node_labels,
        "type_names": g.type_names,
        "rel_names": g.rel_names,
    }
    write_container(path, meta, [
        ("node_type", g.node_type, "<i4"),
        ("edge_triples", edge_triples, "<i8"),
    ])


def load_graph_artifact(path) -> MultiplexGraph:
    meta, tensors = read_container(path)
    if meta.get("kind") != "graph":
        raise ValueError(f"{path}: not a graph container")
    return graph_from_arrays(
        tensors["node_type"], meta["type_names"], meta["rel_names"],
        meta["node_labels"], tensors["edge_triples"],
    )
