"""Command-line interface.

Subcommands: ingest, train, evaluate, export-embeddings, sample-walks,
attention-report. Every command is deterministic given its inputs and seed
and exits nonzero on any error. ``HYBRIDGNN_NO_NUMBA=1`` forces the pure
numpy sampling kernels.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint, save_graph_artifact
from .config import RunConfig, load_config
from .errors import HybridGNNError, UnknownRelationship
from .evaluation import (
    compute_embeddings,
    evaluate_split,
    split_edges,
    topk_by_degree,
)
from .graph import load_graph_files
from .model import metapath_attention_masses, sample_flow_stack
from .rng import PURPOSE_EVAL, derive_key, permutation
from .sampling import active_backend, training_walks
from .trainer import train as run_training


def _global_flags(sub):
    sub.add_argument("--config", help="run configuration JSON")
    sub.add_argument("--seed", type=int, default=None,
                     help="override every configured seed")
    sub.add_argument("--threads", type=int, default=None,
                     help="numba thread count (numba backend only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridgnn",
        description="Relationship-specific embeddings for multiplex networks",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="parse raw files into a binary graph")
    _global_flags(p)
    p.add_argument("--edges", required=True)
    p.add_argument("--types", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("train", help="train and write checkpoint/log/report")
    _global_flags(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("evaluate", help="evaluate a checkpoint on the test split")
    _global_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--by-degree", action="store_true",
                   help="add degree-bucketed PR@k tables")
    p.add_argument("--out", default=None, help="write JSON here (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("export-embeddings", help="write embeddings as text")
    _global_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--relationship", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    p = subs.add_parser("sample-walks", help="export a walk corpus as text")
    _global_flags(p)
    p.add_argument("--relationship", required=True)
    p.add_argument("--scheme-index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_walks)

    p = subs.add_parser("attention-report",
                        help="mean attention mass per flow per relationship")
    _global_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sample-size", type=int, default=256)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_attention_report)
    return parser


def _setup(args) -> RunConfig:
    if not args.config:
        raise HybridGNNError("this command needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.override_seed(args.seed)
    return cfg


def _apply_threads(args):
    if getattr(args, "threads", None):
        try:
            import numba

            numba.set_num_threads(args.threads)
        except ImportError:
            pass


def cmd_ingest(args) -> int:
    g = load_graph_files(args.edges, args.types)
    save_graph_artifact(args.out, g)
    print(
        f"nodes={g.n_nodes} edges={g.n_edges} "
        f"node_types={g.n_types} relationships={g.n_rels}"
    )
    return 0


def cmd_train(args) -> int:
    cfg = _setup(args)
    g = load_graph_files(cfg.edge_file, cfg.type_file)
    schemes_full = cfg.resolve_schemes(g)  # fail fast on bad schemes
    split = split_edges(g, cfg.eval_fractions, seed=cfg.eval_seed)
    g_train = split.train_graph(g)
    schemes = {
        r: [s for s in lst] for r, lst in schemes_full.items()
    }
    for lst in schemes.values():
        for s in lst:
            g_train.validate_scheme(s)

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "training_log.jsonl"
    log_fh = open(log_path, "w", encoding="utf-8")

    def log_sink(record):
        log_fh.write(json.dumps(record, sort_keys=True) + "\n")
        log_fh.flush()

    def progress(record):
        print(
            f"epoch {record['epoch']}: loss={record['mean_loss']:.4f} "
            f"val_roc_auc={record['val_roc_auc']:.4f} "
            f"({record['seconds']:.1f}s)"
        )

    try:
        params, log = run_training(
            g_train, schemes, cfg.dims, cfg.train, cfg.sampler, split,
            log_sink=log_sink, progress=progress,
        )
    finally:
        log_fh.close()

    ckpt_path = out_dir / "checkpoint.bin"
    save_checkpoint(ckpt_path, params, seed=cfg.train.seed,
                    extra={"backend": active_backend()})
    report = evaluate_split(
        params, g_train, split, cfg.sampler.fanout, k=cfg.topk,
        seed=cfg.eval_seed,
    )
    report_path = out_dir / "eval_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"checkpoint: {ckpt_path}")
    print(f"log: {log_path}")
    print(f"report: {report_path}")
    print(f"test macro roc_auc: {report.macro['roc_auc']:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _setup(args)
    g = load_graph_files(cfg.edge_file, cfg.type_file)
    split_seed = args.split_seed if args.split_seed is not None else cfg.eval_seed
    split = split_edges(g, cfg.eval_fractions, seed=split_seed)
    g_train = split.train_graph(g)
    params, _meta = load_checkpoint(args.checkpoint, g_train)
    report = evaluate_split(
        params, g_train, split, cfg.sampler.fanout, k=cfg.topk,
        seed=split_seed,
    )
    payload = report.to_dict()
    if args.by_degree:
        payload["by_degree"] = {
            g_train.rel_names[r]: topk_by_degree(
                params, g_train, split, r, cfg.sampler.fanout,
                k=cfg.topk, seed=split_seed,
            )
            for r in range(g_train.n_rels)
        }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_export_embeddings(args) -> int:
    cfg = _setup(args)
    g = load_graph_files(cfg.edge_file, cfg.type_file)
    params, meta = load_checkpoint(args.checkpoint, g)
    if args.relationship not in g.rel_to_id:
        raise UnknownRelationship(f"unknown relationship {args.relationship!r}")
    r = g.rel_to_id[args.relationship]
    nodes = np.arange(g.n_nodes, dtype=np.int32)
    emb = compute_embeddings(
        params, nodes, r, cfg.sampler.fanout, seed=meta["seed"], salt=r,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n_nodes} {params.dims.d}\n")
        for i in range(g.n_nodes):
            vals = " ".join(f"{x:.6g}" for x in emb[i])
            fh.write(f"{g.node_labels[i]} {vals}\n")
    print(f"wrote {g.n_nodes} embeddings to {args.out}")
    return 0


def cmd_sample_walks(args) -> int:
    cfg = _setup(args)
    g = load_graph_files(cfg.edge_file, cfg.type_file)
    schemes = cfg.resolve_schemes(g)
    if args.relationship not in g.rel_to_id:
        raise UnknownRelationship(f"unknown relationship {args.relationship!r}")
    r = g.rel_to_id[args.relationship]
    if not schemes.get(r):
        raise HybridGNNError(f"no schemes configured for {args.relationship!r}")
    scheme = schemes[r][args.scheme_index]
    with open(args.out, "w", encoding="utf-8") as fh:
        for walk in training_walks(g, r, scheme, cfg.sampler):
            labels = " ".join(g.node_labels[n] for n in walk.nodes)
            fh.write(f"{args.relationship} {labels}\n")
    print(f"wrote walks to {args.out}")
    return 0


def cmd_attention_report(args) -> int:
    cfg = _setup(args)
    g = load_graph_files(cfg.edge_file, cfg.type_file)
    params, meta = load_checkpoint(args.checkpoint, g)
    n = min(args.sample_size, g.n_nodes)
    order = permutation(derive_key(meta["seed"], PURPOSE_EVAL, 777), g.n_nodes)
    nodes = order[:n].astype(np.int32)
    stack = sample_flow_stack(
        params.registry, nodes, cfg.sampler.fanout,
        seed=meta["seed"], salt=999,
    )
    masses = metapath_attention_masses(params, stack)
    payload = {
        g.rel_names[r]: {name: mass for name, mass in sorted(per.items())}
        for r, per in masses.items()
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_threads(args)
    try:
        return args.func(args)
    except HybridGNNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
