"""Forward computation for relationship-specific embeddings.

For every batch node the model runs one aggregation flow per applicable
metapath scheme plus one randomized-exploration flow, re-weights the flow
outputs with scaled dot-product self-attention, mean-pools them into one
vector per relationship, re-weights across relationships with a second
self-attention, and projects the selected relationship's row back to the
embedding width on top of the node's base embedding.

Everything is plain numpy. Forward functions optionally return caches that
:func:`backward_batch` consumes to produce exact gradients; the architecture
is static, so no tape is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .graph import MetapathScheme, MultiplexGraph
from .rng import (
    PURPOSE_INIT,
    PURPOSE_LAYERS,
    PURPOSE_RANDOM_LAYERS,
    derive_key,
    derive_keys_np,
)
from .sampling.kernels import scatter_add
from .sampling.layers import RANDOM_FLOW, RandomFlow, SchemeFlow


@dataclass(frozen=True)
class ModelDims:
    """Embedding widths: final/base ``d``, aggregation ``d_h``, attention ``d_k``."""

    d: int = 128
    d_h: int = 8
    d_k: int = 8

    def __post_init__(self):
        if self.d < 1 or self.d_h < 1 or self.d_k < 1:
            raise ValueError("all dims must be positive")


@dataclass(frozen=True)
class FlowSpec:
    """One registered aggregation flow.

    ``weight_slots[k-1]`` addresses the (W, b) pair used at recursion level
    k; the random flow shares slot 0 at every level.
    """

    flow_id: int
    rel: int | None            # None for the shared random flow
    scheme: MetapathScheme | None
    depth: int
    weight_slots: tuple[int, ...]
    name: str

    @property
    def is_random(self) -> bool:
        return self.scheme is None


class FlowRegistry:
    """Flow layout for a (graph, scheme set) pair.

    Flow order per (relationship, node type) is: the random flow first,
    then the relationship's schemes in configuration order restricted to
    those starting at the node's type. This row order defines the attention
    input and is part of the checkpoint contract.
    """

    def __init__(
        self,
        graph: MultiplexGraph,
        schemes_per_rel: dict[int, list[MetapathScheme]],
        exploration_depth: int = 2,
        include_random: bool = True,
    ):
        self.graph = graph
        self.exploration_depth = exploration_depth
        self.include_random = include_random
        self.schemes_per_rel = {
            r: list(schemes_per_rel.get(r, [])) for r in range(graph.n_rels)
        }
        self.flow_specs: list[FlowSpec] = []
        self.flow_specs.append(
            FlowSpec(
                flow_id=0,
                rel=None,
                scheme=None,
                depth=exploration_depth,
                weight_slots=(0,) * exploration_depth,
                name=RANDOM_FLOW,
            )
        )
        next_slot = 1
        for r in range(graph.n_rels):
            for scheme in self.schemes_per_rel[r]:
                graph.validate_scheme(scheme)
                slots = tuple(range(next_slot, next_slot + scheme.length))
                next_slot += scheme.length
                self.flow_specs.append(
                    FlowSpec(
                        flow_id=len(self.flow_specs),
                        rel=r,
                        scheme=scheme,
                        depth=scheme.length,
                        weight_slots=slots,
                        name=scheme.label(graph),
                    )
                )
        self.n_weight_slots = next_slot
        self._plans: dict[int, object] = {}

    def flows_for(self, rel: int, type_id: int) -> list[FlowSpec]:
        out = [self.flow_specs[0]] if self.include_random else []
        for spec in self.flow_specs[1:]:
            if spec.rel == rel and spec.scheme.node_types[0] == type_id:
                out.append(spec)
        if not out:
            raise ShapeMismatch(
                f"no flow applies to type {type_id} under relationship {rel}; "
                "an ablated registry needs a matching scheme for every type"
            )
        return out

    def plan(self, spec: FlowSpec):
        """Sampling plan for a flow, built on first use and cached."""
        if spec.flow_id not in self._plans:
            if spec.is_random:
                self._plans[spec.flow_id] = RandomFlow(self.graph)
            else:
                self._plans[spec.flow_id] = SchemeFlow(self.graph, spec.scheme)
        return self._plans[spec.flow_id]

    def max_depth(self) -> int:
        return max(spec.depth for spec in self.flow_specs)


TENSOR_FIELDS = (
    "base_emb",
    "leaf_emb",
    "context_emb",
    "agg_w",
    "agg_b",
    "mp_q",
    "mp_k",
    "mp_v",
    "rel_q",
    "rel_k",
    "rel_v",
    "out_proj",
)


@dataclass
class ModelParams:
    """All learnable tensors plus the registry that defines their layout."""

    dims: ModelDims
    registry: FlowRegistry
    base_emb: np.ndarray      # (V, d)
    leaf_emb: np.ndarray      # (V, d_h)
    context_emb: np.ndarray   # (V, d)
    agg_w: np.ndarray         # (slots, d_h, d_h)
    agg_b: np.ndarray         # (slots, d_h)
    mp_q: np.ndarray          # (d_h, d_k)
    mp_k: np.ndarray
    mp_v: np.ndarray
    rel_q: np.ndarray         # (d_k, d_k)
    rel_k: np.ndarray
    rel_v: np.ndarray
    out_proj: np.ndarray      # (T, R, d_k, d)

    @property
    def dtype(self):
        return self.base_emb.dtype

    def tensors(self):
        for name in TENSOR_FIELDS:
            yield name, getattr(self, name)

    def copy(self) -> "ModelParams":
        kwargs = {name: arr.copy() for name, arr in self.tensors()}
        return ModelParams(dims=self.dims, registry=self.registry, **kwargs)

    def astype(self, dtype) -> "ModelParams":
        kwargs = {name: arr.astype(dtype) for name, arr in self.tensors()}
        return ModelParams(dims=self.dims, registry=self.registry, **kwargs)


class GradientSet:
    """One tensor per parameter tensor, same shapes and dtype."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        self.tensors = tensors

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "GradientSet":
        return cls({
            name: np.zeros(arr.shape, dtype=arr.dtype)
            for name, arr in params.tensors()
        })

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray):
        self.tensors[name] = value


def init_params(
    dims: ModelDims,
    registry: FlowRegistry,
    seed: int = 0,
    dtype=np.float32,
) -> ModelParams:
    """Embeddings uniform in (-0.5/width, 0.5/width); weights Xavier-uniform."""
    g = registry.graph
    rng = np.random.default_rng(derive_key(seed, PURPOSE_INIT))

    def emb(n, width):
        return rng.uniform(-0.5 / width, 0.5 / width, size=(n, width))

    def xavier(*shape):
        fan_in, fan_out = shape[-2], shape[-1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    arrays = dict(
        base_emb=emb(g.n_nodes, dims.d),
        leaf_emb=emb(g.n_nodes, dims.d_h),
        context_emb=emb(g.n_nodes, dims.d),
        agg_w=xavier(registry.n_weight_slots, dims.d_h, dims.d_h),
        agg_b=np.zeros((registry.n_weight_slots, dims.d_h)),
        mp_q=xavier(dims.d_h, dims.d_k),
        mp_k=xavier(dims.d_h, dims.d_k),
        mp_v=xavier(dims.d_h, dims.d_k),
        rel_q=xavier(dims.d_k, dims.d_k),
        rel_k=xavier(dims.d_k, dims.d_k),
        rel_v=xavier(dims.d_k, dims.d_k),
        out_proj=xavier(g.n_types, g.n_rels, dims.d_k, dims.d),
    )
    arrays = {k: v.astype(dtype) for k, v in arrays.items()}
    return ModelParams(dims=dims, registry=registry, **arrays)


# ---------------------------------------------------------------------------
# Flow stacks
# ---------------------------------------------------------------------------

_RANDOM_KEY_BASE = 1 << 20


@dataclass
class FlowEntry:
    """Sampled layers of one flow for one type group of the batch."""

    spec: FlowSpec
    matrix: np.ndarray   # (B_g, total_width) node ids
    offsets: np.ndarray  # layer boundaries into matrix columns
    fanouts: np.ndarray  # per-step widths actually used


@dataclass
class FlowStack:
    """Sampled receptive fields for a batch, grouped by node type.

    ``groups[t]`` maps relationship id to the flow entries for rows
    ``rows[t]`` of the batch, ordered as the registry orders flows.
    """

    nodes: np.ndarray
    rows: dict[int, np.ndarray]
    groups: dict[int, dict[int, list[FlowEntry]]]


def sample_flow_stack(
    registry: FlowRegistry,
    nodes: np.ndarray,
    fanout,
    seed: int = 0,
    salt: int = 0,
    backend: str | None = None,
) -> FlowStack:
    """Sample every flow's neighbor layers for a batch of nodes.

    Streams are keyed by (seed, purpose, salt, flow id, node), so the stack
    for a node is stable within one salt regardless of batch composition.
    """
    g = registry.graph
    nodes = np.asarray(nodes, dtype=np.int32)
    fanout = np.asarray(fanout, dtype=np.int64)
    rows: dict[int, np.ndarray] = {}
    groups: dict[int, dict[int, list[FlowEntry]]] = {}
    ntypes = g.node_type[nodes]
    for t in np.unique(ntypes):
        t = int(t)
        rows_t = np.nonzero(ntypes == t)[0]
        rows[t] = rows_t
        sub = nodes[rows_t]
        groups[t] = {}
        for r in range(g.n_rels):
            entries = []
            for spec in registry.flows_for(r, t):
                purpose = PURPOSE_RANDOM_LAYERS if spec.is_random else PURPOSE_LAYERS
                # the shared random flow still gets fresh layers per relationship
                key_field = spec.flow_id if not spec.is_random else _RANDOM_KEY_BASE + r
                keys = derive_keys_np(
                    seed,
                    np.full(len(sub), purpose),
                    np.full(len(sub), salt),
                    np.full(len(sub), key_field),
                    sub.astype(np.int64),
                )
                plan = registry.plan(spec)
                if spec.is_random:
                    matrix, offsets = plan.sample_batch(
                        sub, spec.depth, fanout, keys, backend
                    )
                else:
                    matrix, offsets = plan.sample_batch(
                        sub, fanout, keys, backend
                    )
                entries.append(
                    FlowEntry(
                        spec=spec,
                        matrix=matrix,
                        offsets=offsets,
                        fanouts=fanout[: spec.depth].copy(),
                    )
                )
            groups[t][r] = entries
    return FlowStack(nodes=nodes, rows=rows, groups=groups)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def _aggregate_forward(params: ModelParams, entry: FlowEntry, want_cache: bool):
    """Bottom-up mean aggregation over sampled layers.

    Level k rewrites every remaining depth j <= K-k as
    ``relu(W_k @ mean(self, children) + b_k)``; depth 0 after level K is the
    flow output.
    """
    off = entry.offsets
    k_depth = entry.spec.depth
    hidden = [
        params.leaf_emb[entry.matrix[:, off[j]: off[j + 1]]]
        for j in range(k_depth + 1)
    ]
    cache = {"levels": [], "entry": entry} if want_cache else None
    for k in range(1, k_depth + 1):
        slot = entry.spec.weight_slots[k - 1]
        w = params.agg_w[slot]
        b = params.agg_b[slot]
        new_hidden = []
        level_cache = [] if want_cache else None
        for j in range(k_depth - k + 1):
            f = int(entry.fanouts[j])
            child = hidden[j + 1].reshape(
                hidden[j].shape[0], hidden[j].shape[1], f, -1
            )
            mean = (hidden[j] + child.sum(axis=2)) / (1.0 + f)
            pre = mean @ w + b
            h = np.maximum(pre, 0)
            new_hidden.append(h)
            if want_cache:
                level_cache.append((mean, h))
        hidden = new_hidden
        if want_cache:
            cache["levels"].append(level_cache)
    out = hidden[0][:, 0, :]
    return out, cache


def _aggregate_backward(params: ModelParams, cache, d_out, grads: GradientSet,
                        leaf_sink: list):
    """Mirror of :func:`_aggregate_forward`.

    Leaf-row gradients are appended to ``leaf_sink`` as (ids, values) pairs;
    the caller flushes them with one scatter. Arithmetic stays in the
    parameter dtype throughout.
    """
    entry: FlowEntry = cache["entry"]
    off = entry.offsets
    k_depth = entry.spec.depth
    d_hidden = {0: d_out[:, None, :]}
    for k in range(k_depth, 0, -1):
        slot = entry.spec.weight_slots[k - 1]
        w = params.agg_w[slot]
        level_cache = cache["levels"][k - 1]
        new_d = {}
        for j in range(k_depth - k + 1):
            mean, h = level_cache[j]
            dpre = d_hidden[j] * (h > 0)
            dh = dpre.shape[-1]
            flat_pre = dpre.reshape(-1, dh)
            grads["agg_w"][slot] += mean.reshape(-1, dh).T @ flat_pre
            grads["agg_b"][slot] += flat_pre.sum(axis=0)
            dmean = dpre @ w.T
            f = int(entry.fanouts[j])
            dmean *= 1.0 / (1.0 + f)
            new_d[j] = new_d.get(j, 0) + dmean
            spread = np.repeat(dmean, f, axis=1)
            new_d[j + 1] = new_d.get(j + 1, 0) + spread
        d_hidden = new_d
    # level 0: gradients land on leaf rows
    for j in range(k_depth + 1):
        ids = entry.matrix[:, off[j]: off[j + 1]]
        leaf_sink.append(
            (ids.ravel(), d_hidden[j].reshape(-1, d_hidden[j].shape[-1]))
        )


def _scatter_rows(target: np.ndarray, rows: np.ndarray, values: np.ndarray):
    """target[rows] += values through the accelerated scatter kernel."""
    scatter_add(target, rows, values)


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------

def _attention_forward(h, wq, wk, wv, want_cache: bool):
    """Scaled dot-product self-attention over the rows of ``h``.

    ``h`` is (..., c, in_width); softmax is taken row-wise over the c keys.
    """
    dk = wq.shape[1]
    q = h @ wq
    k = h @ wk
    v = h @ wv
    scores = q @ np.swapaxes(k, -1, -2) * (1.0 / float(np.sqrt(dk)))
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=-1, keepdims=True)
    out = attn @ v
    cache = {"h": h, "q": q, "k": k, "v": v, "attn": attn} if want_cache else None
    return out, attn, cache


def _attention_backward(d_out, cache, wq, wk, wv):
    """Returns (d_h, d_wq, d_wk, d_wv) in the cache dtype."""
    h = cache["h"]
    q = cache["q"]
    k = cache["k"]
    v = cache["v"]
    attn = cache["attn"]
    dk = wq.shape[1]

    d_attn = d_out @ np.swapaxes(v, -1, -2)
    d_v = np.swapaxes(attn, -1, -2) @ d_out
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
    d_scores = d_scores * (1.0 / float(np.sqrt(dk)))
    d_q = d_scores @ k
    d_k = np.swapaxes(d_scores, -1, -2) @ q
    d_h = d_q @ wq.T + d_k @ wk.T + d_v @ wv.T
    flat = lambda a: a.reshape(-1, a.shape[-1])
    d_wq = flat(h).T @ flat(d_q)
    d_wk = flat(h).T @ flat(d_k)
    d_wv = flat(h).T @ flat(d_v)
    return d_h, d_wq, d_wk, d_wv


# ---------------------------------------------------------------------------
# Full forward / backward
# ---------------------------------------------------------------------------

def forward_batch(
    params: ModelParams,
    stack: FlowStack,
    target_rel,
    want_cache: bool = False,
):
    """Relationship-specific embeddings for the stacked batch.

    ``target_rel`` is an int applied to every row or an int array per row.
    Returns (B, d); with ``want_cache`` also the cache for backward_batch.
    """
    g = params.registry.graph
    nodes = stack.nodes
    b_total = len(nodes)
    rel_vec = np.broadcast_to(np.asarray(target_rel, dtype=np.int64), (b_total,))
    out = np.zeros((b_total, params.dims.d), dtype=params.dtype)
    cache = {"groups": {}, "rel_vec": rel_vec, "stack": stack} if want_cache else None

    for t, rows_t in stack.rows.items():
        sub_nodes = nodes[rows_t]
        rel_sub = rel_vec[rows_t]
        per_rel = []
        gcache = {"flows": {}, "mp": {}, "rows": rows_t, "type": t} if want_cache else None
        for r in range(g.n_rels):
            entries = stack.groups[t][r]
            flow_outs = []
            flow_caches = []
            for entry in entries:
                f_out, f_cache = _aggregate_forward(params, entry, want_cache)
                flow_outs.append(f_out)
                flow_caches.append(f_cache)
            h = np.stack(flow_outs, axis=1)  # (B_g, c, d_h)
            if h.shape[-1] != params.dims.d_h:
                raise ShapeMismatch("flow output width != d_h")
            attended, attn, acache = _attention_forward(
                h, params.mp_q, params.mp_k, params.mp_v, want_cache
            )
            pooled = attended.mean(axis=1)  # (B_g, d_k)
            per_rel.append(pooled)
            if want_cache:
                gcache["flows"][r] = flow_caches
                gcache["mp"][r] = (acache, h.shape[1])
        u = np.stack(per_rel, axis=1)  # (B_g, R, d_k)
        u_hat, rel_attn, rcache = _attention_forward(
            u, params.rel_q, params.rel_k, params.rel_v, want_cache
        )
        e_loc = u_hat[np.arange(len(rows_t)), rel_sub]  # (B_g, d_k)
        proj = params.out_proj[t, rel_sub]  # (B_g, d_k, d)
        e_star = params.base_emb[sub_nodes] + np.einsum("bk,bkd->bd", e_loc, proj)
        out[rows_t] = e_star.astype(params.dtype)
        if want_cache:
            gcache["rel_attn"] = rcache
            gcache["e_loc"] = e_loc
            gcache["rel_sub"] = rel_sub
            gcache["sub_nodes"] = sub_nodes
            cache["groups"][t] = gcache

    if want_cache:
        return out, cache
    return out


def backward_batch(
    params: ModelParams,
    cache,
    d_out: np.ndarray,
    grads: GradientSet,
):
    """Accumulate exact gradients of the forward pass into ``grads``."""
    g = params.registry.graph
    dt = params.dtype
    leaf_sink: list = []
    for t, gcache in cache["groups"].items():
        rows_t = gcache["rows"]
        d_estar = np.asarray(d_out[rows_t], dtype=dt)
        sub_nodes = gcache["sub_nodes"]
        rel_sub = gcache["rel_sub"]
        e_loc = gcache["e_loc"]
        proj = params.out_proj[t, rel_sub]

        _scatter_rows(grads["base_emb"], sub_nodes, d_estar)
        d_e_loc = np.einsum("bd,bkd->bk", d_estar, proj)
        for r in np.unique(rel_sub):
            mask = rel_sub == r
            grads["out_proj"][t, r] += e_loc[mask].T @ d_estar[mask]

        d_u_hat = np.zeros(
            (len(rows_t), g.n_rels, params.dims.d_k), dtype=dt
        )
        d_u_hat[np.arange(len(rows_t)), rel_sub] = d_e_loc
        d_u, d_rq, d_rk, d_rv = _attention_backward(
            d_u_hat, gcache["rel_attn"], params.rel_q, params.rel_k, params.rel_v
        )
        grads["rel_q"] += d_rq
        grads["rel_k"] += d_rk
        grads["rel_v"] += d_rv

        for r in range(g.n_rels):
            acache, c = gcache["mp"][r]
            d_pooled = d_u[:, r, :]  # (B_g, d_k)
            d_attended = np.repeat(d_pooled[:, None, :] / c, c, axis=1)
            d_h, d_mq, d_mk, d_mv = _attention_backward(
                d_attended, acache, params.mp_q, params.mp_k, params.mp_v
            )
            grads["mp_q"] += d_mq
            grads["mp_k"] += d_mk
            grads["mp_v"] += d_mv
            for ci, f_cache in enumerate(gcache["flows"][r]):
                _aggregate_backward(params, f_cache, d_h[:, ci, :], grads,
                                    leaf_sink)
    all_ids = np.concatenate([ids for ids, _ in leaf_sink])
    all_vals = np.concatenate([vals for _, vals in leaf_sink])
    _scatter_rows(grads["leaf_emb"], all_ids, all_vals)


# ---------------------------------------------------------------------------
# Spec-level single-sample operations
# ---------------------------------------------------------------------------

def aggregate_flow(params: ModelParams, layers, flow_tag) -> np.ndarray:
    """One flow's output vector for a single node's sampled layers.

    ``layers`` is a :class:`~hybridgnn.sampling.layers.NeighborLayers`;
    ``flow_tag`` is a flow id or the string ``"random"``.
    """
    if flow_tag == RANDOM_FLOW:
        spec = params.registry.flow_specs[0]
    else:
        spec = params.registry.flow_specs[int(flow_tag)]
    widths = [len(layer) for layer in layers.layers]
    if len(widths) != spec.depth + 1:
        raise ShapeMismatch(
            f"flow {spec.name!r} expects {spec.depth + 1} layers, got {len(widths)}"
        )
    fanouts = []
    for j in range(spec.depth):
        if widths[j + 1] % widths[j] != 0:
            raise ShapeMismatch("layer widths must be integer multiples")
        fanouts.append(widths[j + 1] // widths[j])
    matrix = np.concatenate([np.asarray(l) for l in layers.layers])[None, :]
    offsets = np.concatenate([[0], np.cumsum(widths)]).astype(np.int64)
    entry = FlowEntry(
        spec=spec,
        matrix=matrix.astype(np.int32),
        offsets=offsets,
        fanouts=np.asarray(fanouts, dtype=np.int64),
    )
    out, _ = _aggregate_forward(params, entry, want_cache=False)
    return out[0]


def metapath_attention(params: ModelParams, h: np.ndarray) -> np.ndarray:
    """Re-weight flow outputs: softmax(QK^T/sqrt(d_k))V over rows of ``h``."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[1] != params.dims.d_h:
        raise ShapeMismatch(f"expected (m+1, {params.dims.d_h}) input")
    out, _, _ = _attention_forward(
        h[None], params.mp_q, params.mp_k, params.mp_v, want_cache=False
    )
    return out[0]


def pool_relationship(h_hat: np.ndarray) -> np.ndarray:
    """Mean over the flow rows."""
    h_hat = np.asarray(h_hat)
    if h_hat.ndim != 2 or h_hat.shape[0] < 1:
        raise ShapeMismatch("expected a (c, d_k) matrix with c >= 1")
    return h_hat.mean(axis=0)


def relationship_attention(params: ModelParams, u: np.ndarray) -> np.ndarray:
    """Re-weight pooled per-relationship rows with the second attention."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[1] != params.dims.d_k:
        raise ShapeMismatch(f"expected (|R|, {params.dims.d_k}) input")
    out, _, _ = _attention_forward(
        u[None], params.rel_q, params.rel_k, params.rel_v, want_cache=False
    )
    return out[0]


def final_embedding(params: ModelParams, v: int, r: int, e_local: np.ndarray) -> np.ndarray:
    """Base embedding plus the projected local relationship embedding."""
    t = int(params.registry.graph.node_type[v])
    return params.base_emb[v] + np.asarray(e_local) @ params.out_proj[t, r]


def metapath_attention_masses(params: ModelParams, stack: FlowStack):
    """Mean attention mass per flow per relationship, for diagnostics.

    Returns {rel: {flow_name: mass}} averaged over the stacked nodes; masses
    under one relationship sum to 1 for each contributing node type.
    """
    g = params.registry.graph
    masses: dict[int, dict[str, list]] = {r: {} for r in range(g.n_rels)}
    counts: dict[int, int] = {r: 0 for r in range(g.n_rels)}
    for t, rows_t in stack.rows.items():
        for r in range(g.n_rels):
            entries = stack.groups[t][r]
            flow_outs = [
                _aggregate_forward(params, entry, want_cache=False)[0]
                for entry in entries
            ]
            h = np.stack(flow_outs, axis=1)
            _, attn, _ = _attention_forward(
                h, params.mp_q, params.mp_k, params.mp_v, want_cache=False
            )
            col_mass = attn.mean(axis=1)  # (B_g, c): mass assigned to each flow
            for ci, entry in enumerate(entries):
                masses[r].setdefault(entry.spec.name, []).append(
                    col_mass[:, ci].sum()
                )
            counts[r] += len(rows_t)
    out: dict[int, dict[str, float]] = {}
    for r in range(g.n_rels):
        out[r] = {
            name: float(np.sum(vals) / counts[r]) for name, vals in masses[r].items()
        }
    return out
