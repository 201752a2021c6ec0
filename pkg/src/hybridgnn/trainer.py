"""Skip-gram training with negative sampling over relationship embeddings.

Each epoch regenerates the walk corpus with epoch-keyed streams, expands it
into (center, context, relationship) pairs, shuffles, and runs Adam on exact
analytic gradients of the mean batch loss. Validation ROC-AUC drives early
stopping; the best-validation parameters are returned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrainingSet, NonFiniteLoss
from .evaluation import EdgeSplit, sigmoid, validation_roc_auc
from .graph import MetapathScheme, MultiplexGraph
from .model import (
    FlowRegistry,
    FlowStack,
    GradientSet,
    ModelDims,
    ModelParams,
    backward_batch,
    forward_batch,
    init_params,
    sample_flow_stack,
)
from .rng import PURPOSE_PAIR_SHUFFLE, derive_key, permutation
from .sampling.kernels import scatter_add
from .sampling.negatives import NegativeSampler, pair_negative_keys
from .sampling.walks import SamplerConfig, context_pair_arrays, walk_matrix

SIGMOID_FLOOR = 1e-12  # -log floor engages past |logit| ~ 27.6


@dataclass
class TrainConfig:
    batch_size: int = 2048
    learning_rate: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    negatives: int = 5
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    precision: str = "float32"

    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def pair_loss(e_star: np.ndarray, ctx: int, negatives, params: ModelParams) -> float:
    """-log sig(c_ctx . e*) - sum_k log sig(-c_k . e*), floors at 1e-12."""
    negatives = np.asarray(negatives, dtype=np.int64)
    if len(negatives) == 0 or np.any(negatives == ctx):
        raise ValueError("negatives must be nonempty and exclude the context")
    e = np.asarray(e_star, dtype=np.float64)
    pos = float(params.context_emb[ctx].astype(np.float64) @ e)
    neg = params.context_emb[negatives].astype(np.float64) @ e
    p_pos = max(float(sigmoid(np.array([pos]))[0]), SIGMOID_FLOOR)
    p_negs = np.maximum(sigmoid(-neg), SIGMOID_FLOOR)
    return float(-np.log(p_pos) - np.log(p_negs).sum())


def batch_gradients(
    params: ModelParams,
    pairs,
    stack: FlowStack,
    negatives: np.ndarray,
):
    """Mean loss over the batch and its exact gradients.

    ``pairs`` is (centers, contexts, rels) int arrays; ``negatives`` is
    (B, L) with every entry differing from its row's context. The stack must
    cover the centers in order.
    """
    centers, contexts, rels = (np.asarray(a, dtype=np.int64) for a in pairs)
    b = len(centers)
    dt = params.dtype
    e_star, cache = forward_batch(params, stack, rels, want_cache=True)
    ctx_emb = params.context_emb[contexts]
    neg_emb = params.context_emb[negatives]  # (B, L, d)

    # dots and the loss in float64 (cheap: (B,) and (B, L) only)
    pos_dot = np.einsum("bd,bd->b", ctx_emb, e_star, dtype=np.float64)
    neg_dot = np.einsum("bld,bd->bl", neg_emb, e_star, dtype=np.float64)
    p_pos = sigmoid(pos_dot)
    p_neg = sigmoid(-neg_dot)
    loss = float(
        (-np.log(np.maximum(p_pos, SIGMOID_FLOOR))
         - np.log(np.maximum(p_neg, SIGMOID_FLOOR)).sum(axis=1)).mean()
    )
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"batch loss is {loss}")

    # d loss / d dot, zeroed where the floor clamps the log
    d_pos = (np.where(p_pos > SIGMOID_FLOOR, p_pos - 1.0, 0.0) / b).astype(dt)
    d_neg = (np.where(p_neg > SIGMOID_FLOOR, sigmoid(neg_dot), 0.0) / b).astype(dt)

    grads = GradientSet.zeros_like(params)
    d_e = d_pos[:, None] * ctx_emb + np.einsum("bl,bld->bd", d_neg, neg_emb)
    _scatter_ctx(grads["context_emb"], contexts, d_pos[:, None] * e_star)
    flat_negs = negatives.reshape(-1)
    flat_dneg = (d_neg[:, :, None] * e_star[:, None, :]).reshape(-1, e_star.shape[1])
    _scatter_ctx(grads["context_emb"], flat_negs, flat_dneg)
    backward_batch(params, cache, d_e, grads)
    return loss, grads


def _scatter_ctx(target, rows, values):
    scatter_add(target, np.asarray(rows, dtype=np.int64),
                np.ascontiguousarray(values))


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

class AdamState:
    """First/second moment buffers in the parameter dtype."""

    def __init__(self, params: ModelParams):
        dt = params.dtype
        self.m = {n: np.zeros(a.shape, dtype=dt) for n, a in params.tensors()}
        self.v = {n: np.zeros(a.shape, dtype=dt) for n, a in params.tensors()}
        self.t = 0


def adam_step(params: ModelParams, grads: GradientSet, state: AdamState,
              cfg: TrainConfig) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t
    for name, arr in params.tensors():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * np.square(g)
        update = (m / correction1) / (np.sqrt(v / correction2) + cfg.eps)
        arr -= (cfg.learning_rate * update).astype(arr.dtype)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

class EarlyStopper:
    """Stops after ``patience`` epochs without a new best score."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = -1
        self.stale = 0

    def update(self, score: float, epoch: int) -> bool:
        """Record a score; returns True when this is a new best."""
        if score > self.best:
            self.best = score
            self.best_epoch = epoch
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


def build_pair_corpus(
    g: MultiplexGraph,
    schemes_per_rel: dict[int, list[MetapathScheme]],
    cfg: SamplerConfig,
    epoch: int,
    backend: str | None = None,
):
    """Walk all (relationship, scheme) corpora and expand into pair arrays."""
    centers, contexts, rels = [], [], []
    for r in sorted(schemes_per_rel):
        for si, scheme in enumerate(schemes_per_rel[r]):
            matrix = walk_matrix(
                g, r, scheme, cfg.num_walks, cfg.walk_length, cfg.seed,
                salt=epoch * 1024 + si, backend=backend,
            )
            c, x = context_pair_arrays(matrix, cfg.window, backend=backend)
            centers.append(c)
            contexts.append(x)
            rels.append(np.full(len(c), r, dtype=np.int32))
    if not centers:
        raise EmptyTrainingSet("no schemes configured")
    centers = np.concatenate(centers)
    contexts = np.concatenate(contexts)
    rels = np.concatenate(rels)
    if len(centers) == 0:
        raise EmptyTrainingSet("walk corpus produced no context pairs")
    return centers, contexts, rels


def train(
    graph_train: MultiplexGraph,
    schemes_per_rel: dict[int, list[MetapathScheme]],
    dims: ModelDims,
    train_cfg: TrainConfig,
    sampler_cfg: SamplerConfig,
    split: EdgeSplit,
    backend: str | None = None,
    val_metric_fn=None,
    log_sink=None,
    progress=None,
    include_random: bool = True,
):
    """Full training run; returns (best_params, log_records).

    ``graph_train`` must already exclude validation/test edges. The default
    validation metric is macro ROC-AUC on the split's validation edges;
    tests may inject ``val_metric_fn(params, epoch) -> float``.
    ``include_random=False`` drops the randomized-exploration flow (the
    ablation variant).
    """
    registry = FlowRegistry(
        graph_train, schemes_per_rel, sampler_cfg.exploration_depth,
        include_random=include_random,
    )
    params = init_params(dims, registry, seed=train_cfg.seed,
                         dtype=train_cfg.dtype())
    state = AdamState(params)
    neg_sampler = NegativeSampler(graph_train)
    stopper = EarlyStopper(train_cfg.patience)
    best_params = params.copy()
    log = []

    if val_metric_fn is None:
        def val_metric_fn(p, epoch):
            return validation_roc_auc(
                p, graph_train, split, sampler_cfg.fanout,
                seed=train_cfg.seed, backend=backend,
            )

    for epoch in range(train_cfg.max_epochs):
        tic = time.perf_counter()
        centers, contexts, rels = build_pair_corpus(
            graph_train, schemes_per_rel, sampler_cfg, epoch, backend
        )
        order = permutation(
            derive_key(train_cfg.seed, PURPOSE_PAIR_SHUFFLE, epoch), len(centers)
        )
        centers, contexts, rels = centers[order], contexts[order], rels[order]

        losses = []
        bs = train_cfg.batch_size
        for lo in range(0, len(centers), bs):
            c = centers[lo: lo + bs]
            x = contexts[lo: lo + bs]
            rr = rels[lo: lo + bs]
            stack = sample_flow_stack(
                registry, c, sampler_cfg.fanout,
                seed=train_cfg.seed, salt=epoch, backend=backend,
            )
            neg_keys = pair_negative_keys(
                train_cfg.seed, epoch, np.arange(lo, lo + len(c))
            )
            negs = neg_sampler.sample_batch(
                x, train_cfg.negatives, neg_keys, backend=backend
            )
            loss, grads = batch_gradients(params, (c, x, rr), stack, negs)
            adam_step(params, grads, state, train_cfg)
            losses.append(loss)

        val = float(val_metric_fn(params, epoch))
        is_best = stopper.update(val, epoch)
        if is_best:
            best_params = params.copy()
        record = {
            "epoch": epoch,
            "mean_loss": float(np.mean(losses)),
            "val_roc_auc": val,
            "seconds": time.perf_counter() - tic,
            "best_so_far": stopper.best,
            "seed": train_cfg.seed,
        }
        log.append(record)
        if log_sink is not None:
            log_sink(record)
        if progress is not None:
            progress(record)
        if stopper.should_stop:
            break
    return best_params, log
