"""Edge splitting, link scoring, and the metric suite.

Metrics are implemented directly from their rank/sweep definitions so the
frozen test values pin exact behavior: ROC-AUC via average ranks with ties
counted half, PR-AUC as the average-precision sum over a descending sweep,
F1 at the validation-selected threshold, and filtered top-K precision/hit
ratio per source node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoPositives, SingleClass, TooFewEdges
from .graph import MultiplexGraph, subgraph_with_edges
from .model import ModelParams, forward_batch, sample_flow_stack
from .rng import PURPOSE_EVAL, PURPOSE_SPLIT, derive_key, draw_below, permutation


@dataclass
class EdgeSplit:
    """Per-relationship train/valid/test edges plus sampled non-edges."""

    train: dict[int, np.ndarray]
    valid: dict[int, np.ndarray]
    test: dict[int, np.ndarray]
    valid_neg: dict[int, np.ndarray]
    test_neg: dict[int, np.ndarray]
    seed: int
    fractions: tuple[float, float, float]

    def train_graph(self, g: MultiplexGraph) -> MultiplexGraph:
        return subgraph_with_edges(g, self.train)


def split_edges(
    g: MultiplexGraph,
    fractions: tuple[float, float, float] = (0.85, 0.05, 0.10),
    seed: int = 0,
    min_edges: int = 20,
) -> EdgeSplit:
    """Disjoint per-relationship split with equal-count sampled negatives.

    Negatives share the positive edge's endpoint types and are never edges
    of that relationship anywhere in the full graph.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    train: dict[int, np.ndarray] = {}
    valid: dict[int, np.ndarray] = {}
    test: dict[int, np.ndarray] = {}
    valid_neg: dict[int, np.ndarray] = {}
    test_neg: dict[int, np.ndarray] = {}
    for r in range(g.n_rels):
        edges = g.edges(r)
        n = len(edges)
        if n < min_edges:
            raise TooFewEdges(
                f"relationship {g.rel_names[r]!r} has {n} edges (< {min_edges})"
            )
        perm = permutation(derive_key(seed, PURPOSE_SPLIT, r), n)
        edges = edges[perm]
        n_valid = int(round(n * fractions[1]))
        n_test = int(round(n * fractions[2]))
        n_train = n - n_valid - n_test
        train[r] = edges[:n_train]
        valid[r] = edges[n_train: n_train + n_valid]
        test[r] = edges[n_train + n_valid:]
        valid_neg[r] = _sample_negative_edges(g, r, valid[r], seed, salt=1)
        test_neg[r] = _sample_negative_edges(g, r, test[r], seed, salt=2)
    return EdgeSplit(
        train=train, valid=valid, test=test,
        valid_neg=valid_neg, test_neg=test_neg,
        seed=seed, fractions=tuple(fractions),
    )


def _sample_negative_edges(g, r, positives, seed, salt, max_attempts=100_000):
    """One non-edge per positive, endpoint types matching the positive's."""
    n = len(positives)
    out = np.zeros((n, 2), dtype=np.int32)
    edge_keys = _edge_key_set(g, r)
    v_count = g.n_nodes
    for i in range(n):
        u, v = int(positives[i, 0]), int(positives[i, 1])
        tu = g.nodes_of_type(g.node_type[u])
        tv = g.nodes_of_type(g.node_type[v])
        key = derive_key(seed, PURPOSE_SPLIT, salt, r, i)
        counter = 0
        while True:
            if counter >= 2 * max_attempts:
                raise TooFewEdges(
                    f"cannot sample a non-edge under {g.rel_names[r]!r}: "
                    "the type pair's candidate space is (nearly) complete"
                )
            cu = int(tu[draw_below(key, counter, len(tu))])
            cv = int(tv[draw_below(key, counter + 1, len(tv))])
            counter += 2
            if cu == cv:
                continue
            a, b = (cu, cv) if cu < cv else (cv, cu)
            if a * v_count + b not in edge_keys:
                out[i] = (cu, cv)
                break
    return out


def _edge_key_set(g, r):
    cache = getattr(g, "_edge_key_sets", None)
    if cache is None:
        cache = {}
        g._edge_key_sets = cache
    if r not in cache:
        e = g.edges(r).astype(np.int64)
        cache[r] = set((e[:, 0] * g.n_nodes + e[:, 1]).tolist())
    return cache[r]


# ---------------------------------------------------------------------------
# Embeddings and scoring
# ---------------------------------------------------------------------------

def compute_embeddings(
    params: ModelParams,
    nodes: np.ndarray,
    rel: int,
    fanout,
    seed: int = 0,
    salt: int = 0,
    backend: str | None = None,
    batch_size: int = 4096,
) -> np.ndarray:
    """e*_{v,rel} for the given nodes, sampled with evaluation streams."""
    nodes = np.asarray(nodes, dtype=np.int32)
    out = np.zeros((len(nodes), params.dims.d), dtype=params.dtype)
    for lo in range(0, len(nodes), batch_size):
        chunk = nodes[lo: lo + batch_size]
        stack = sample_flow_stack(
            params.registry, chunk, fanout,
            seed=derive_key(seed, PURPOSE_EVAL, salt), backend=backend,
        )
        out[lo: lo + len(chunk)] = forward_batch(params, stack, target_rel=rel)
    return out


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def score_edge(params: ModelParams, u: int, v: int, r: int, fanout,
               seed: int = 0, backend: str | None = None) -> float:
    """sigma(e*_{u,r} . e*_{v,r}), symmetric in (u, v)."""
    emb = compute_embeddings(params, np.array([u, v]), r, fanout, seed,
                             backend=backend)
    return float(sigmoid(np.array([emb[0] @ emb[1]]))[0])


def score_edge_arrays(emb_src: np.ndarray, emb_dst: np.ndarray) -> np.ndarray:
    return sigmoid(np.einsum("nd,nd->n", emb_src.astype(np.float64),
                             emb_dst.astype(np.float64)))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    first = np.concatenate([[True], sx[1:] != sx[:-1]])
    group = np.cumsum(first) - 1
    counts = np.bincount(group)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    avg = (starts + ends) / 2.0
    ranks = np.empty(len(x))
    ranks[order] = avg[group]
    return ranks


def roc_auc(scores, labels) -> float:
    """P(random positive outscores random negative), ties counted half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("roc_auc needs both classes")
    ranks = _average_ranks(scores)
    return float(
        (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    )


def pr_auc(scores, labels) -> float:
    """Average precision over the descending-score sweep."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise NoPositives("pr_auc needs at least one positive")
    order = np.lexsort((np.arange(len(scores)), -scores))
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels == 1)
    precision = tp / np.arange(1, len(scores) + 1)
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def f1_score(scores, labels, threshold) -> float:
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    pred = scores >= threshold
    tp = int((pred & (labels == 1)).sum())
    if tp == 0:
        return 0.0
    precision = tp / pred.sum()
    recall = tp / (labels == 1).sum()
    return float(2 * precision * recall / (precision + recall))


def f1_best_threshold(valid_scores, valid_labels, test_scores, test_labels):
    """Threshold maximizing validation F1 (ties -> higher threshold),
    applied to the test set. Returns (test_f1, threshold)."""
    valid_scores = np.asarray(valid_scores, dtype=np.float64)
    valid_labels = np.asarray(valid_labels)
    for labs in (valid_labels, np.asarray(test_labels)):
        if (labs == 1).sum() == 0 or (labs == 0).sum() == 0:
            raise SingleClass("f1 threshold selection needs both classes")
    best_f1, best_thr = -1.0, None
    for thr in np.unique(valid_scores):  # ascending: later ties win -> higher thr
        f1 = f1_score(valid_scores, valid_labels, thr)
        if f1 >= best_f1:
            best_f1, best_thr = f1, float(thr)
    return f1_score(test_scores, test_labels, best_thr), best_thr


@dataclass
class EvalReport:
    """Per-relationship metrics plus their macro average."""

    per_relationship: dict[str, dict[str, float]]
    macro: dict[str, float]

    def to_dict(self) -> dict:
        return {"relationships": self.per_relationship, "macro": self.macro}


METRIC_KEYS = ("roc_auc", "pr_auc", "f1", "pr_at_10", "hr_at_10")


def evaluate_split(
    params: ModelParams,
    g: MultiplexGraph,
    split: EdgeSplit,
    fanout,
    k: int = 10,
    seed: int = 0,
    backend: str | None = None,
    with_topk: bool = True,
) -> EvalReport:
    """Score valid/test edges and aggregate the full metric suite."""
    per_rel = {}
    for r in range(g.n_rels):
        vs, vl = _edge_scores(params, split.valid[r], split.valid_neg[r], r,
                              fanout, seed, backend)
        ts, tl = _edge_scores(params, split.test[r], split.test_neg[r], r,
                              fanout, seed, backend)
        f1, thr = f1_best_threshold(vs, vl, ts, tl)
        metrics = {
            "roc_auc": roc_auc(ts, tl),
            "pr_auc": pr_auc(ts, tl),
            "f1": f1,
        }
        if with_topk:
            pr_k, hr_k = topk_metrics(params, g, split, r, fanout, k=k,
                                      seed=seed, backend=backend)
            metrics["pr_at_10"] = pr_k
            metrics["hr_at_10"] = hr_k
        metrics["f1_threshold"] = thr
        per_rel[g.rel_names[r]] = metrics
    keys = list(METRIC_KEYS) if with_topk else ["roc_auc", "pr_auc", "f1"]
    macro = {
        key: float(np.mean([m[key] for m in per_rel.values()])) for key in keys
    }
    return EvalReport(per_relationship=per_rel, macro=macro)


def _edge_scores(params, pos, neg, r, fanout, seed, backend):
    nodes = np.unique(np.concatenate([pos.ravel(), neg.ravel()]))
    emb = compute_embeddings(params, nodes, r, fanout, seed, salt=r,
                             backend=backend)
    index = {int(n): i for i, n in enumerate(nodes)}
    def look(e):
        return emb[[index[int(x)] for x in e]]
    scores = np.concatenate([
        score_edge_arrays(look(pos[:, 0]), look(pos[:, 1])),
        score_edge_arrays(look(neg[:, 0]), look(neg[:, 1])),
    ])
    labels = np.concatenate([np.ones(len(pos), dtype=np.int64),
                             np.zeros(len(neg), dtype=np.int64)])
    return scores, labels


def validation_roc_auc(params, g, split, fanout, seed=0, backend=None) -> float:
    """Macro ROC-AUC over the validation edges; the early-stopping signal."""
    vals = []
    for r in range(g.n_rels):
        scores, labels = _edge_scores(
            params, split.valid[r], split.valid_neg[r], r, fanout, seed, backend
        )
        vals.append(roc_auc(scores, labels))
    return float(np.mean(vals))


def _topk_per_source(params, g, split, r, fanout, k, seed, backend):
    """Per-source top-k hits: returns (sources, hits, n_pos per source)."""
    test = split.test[r]
    if len(test) == 0:
        return [], [], []
    pos_of: dict[int, set[int]] = {}
    for u, v in test:
        pos_of.setdefault(int(u), set()).add(int(v))
        pos_of.setdefault(int(v), set()).add(int(u))
    sources = sorted(pos_of)

    target_types: dict[int, np.ndarray] = {}
    for t in range(g.n_types):
        dst = sorted({c for (a, rr, c) in g.schema if rr == r and a == t})
        target_types[t] = np.concatenate(
            [g.nodes_of_type(c) for c in dst]
        ) if dst else np.empty(0, dtype=np.int32)

    all_nodes = np.unique(
        np.concatenate([np.array(sources, dtype=np.int64)]
                       + [t.astype(np.int64) for t in target_types.values()])
    ).astype(np.int32)
    emb = compute_embeddings(params, all_nodes, r, fanout, seed, salt=100 + r,
                             backend=backend)
    pos_index = {int(n): i for i, n in enumerate(all_nodes)}

    train_nbrs: dict[int, list[int]] = {}
    for u, v in split.train[r]:
        train_nbrs.setdefault(int(u), []).append(int(v))
        train_nbrs.setdefault(int(v), []).append(int(u))

    emb_index = np.full(g.n_nodes, -1, dtype=np.int64)
    emb_index[all_nodes] = np.arange(len(all_nodes))

    hits_per_source = []
    pos_per_source = []
    for u in sources:
        cands = target_types[int(g.node_type[u])].astype(np.int64)
        exclude = np.array(train_nbrs.get(u, []) + [u], dtype=np.int64)
        keep = cands[~np.isin(cands, exclude)]
        if len(keep) == 0:
            hits_per_source.append(0)
            pos_per_source.append(len(pos_of[u]))
            continue
        scores = emb[emb_index[keep]] @ emb[pos_index[u]]
        order = np.lexsort((keep, -scores))
        top = set(keep[order[:k]].tolist())
        hits_per_source.append(len(top & pos_of[u]))
        pos_per_source.append(len(pos_of[u]))
    return sources, hits_per_source, pos_per_source


def topk_metrics(
    params: ModelParams,
    g: MultiplexGraph,
    split: EdgeSplit,
    r: int,
    fanout,
    k: int = 10,
    seed: int = 0,
    backend: str | None = None,
) -> tuple[float, float]:
    """Filtered top-k ranking over type-appropriate candidates.

    For each node with held-out edges under ``r``: candidates are all nodes
    of types reachable from the source's type in the schema, minus training
    neighbors and the source; ranking ties break by node id.
    """
    sources, hits, n_pos = _topk_per_source(
        params, g, split, r, fanout, k, seed, backend
    )
    if not sources:
        return 0.0, 0.0
    pr_at_k = float(np.mean([h / k for h in hits]))
    hr_at_k = float(sum(hits) / sum(n_pos)) if sum(n_pos) else 0.0
    return pr_at_k, hr_at_k


def topk_by_degree(
    params: ModelParams,
    g: MultiplexGraph,
    split: EdgeSplit,
    r: int,
    fanout,
    k: int = 10,
    seed: int = 0,
    backend: str | None = None,
    n_buckets: int = 4,
):
    """PR@k per equal-width degree bucket of the test source nodes."""
    sources, hits, _ = _topk_per_source(
        params, g, split, r, fanout, k, seed, backend
    )
    if not sources:
        return []
    degs = np.array([g.degree(u, r) for u in sources], dtype=np.int64)
    lo, hi = int(degs.min()), int(degs.max()) + 1
    width = max((hi - lo + n_buckets - 1) // n_buckets, 1)
    buckets = []
    for i in range(n_buckets):
        a, b = lo + i * width, lo + (i + 1) * width
        mask = (degs >= a) & (degs < b)
        buckets.append({
            "bucket": f"{a}<=d<{b}",
            "sources": int(mask.sum()),
            "pr_at_k": float(np.mean([h / k for h, m in zip(hits, mask) if m]))
            if mask.any() else 0.0,
        })
    return buckets
