"""Shared fixtures: small graphs with known structure."""

import pytest

from hybridgnn.graph import load_graph


@pytest.fixture
def toy_graph():
    """Video/user/author graph where u1-a1 is linked under two relationships.

    like:    v1-u1, v1-u2, u1-a1
    comment: u1-a1, u2-a1
    """
    edges = [
        ("v1", "u1", "like"),
        ("v1", "u2", "like"),
        ("u1", "a1", "like"),
        ("u1", "a1", "comment"),
        ("u2", "a1", "comment"),
    ]
    types = [
        ("v1", "video"),
        ("u1", "user"),
        ("u2", "user"),
        ("a1", "author"),
    ]
    return load_graph(edges, types)


@pytest.fixture
def path_graph():
    """5-node path a-b-c-d-e under a single relationship, one node type."""
    labels = ["a", "b", "c", "d", "e"]
    edges = [(labels[i], labels[i + 1], "r") for i in range(4)]
    types = [(lab, "t") for lab in labels]
    return load_graph(edges, types)


@pytest.fixture
def star_graph():
    """Type-U center with four type-I leaves under one relationship."""
    edges = [("c", f"l{i}", "r") for i in range(4)]
    types = [("c", "U")] + [(f"l{i}", "I") for i in range(4)]
    return load_graph(edges, types)


def random_multiplex(rng, n_nodes=15, n_types=3, n_rels=3, p_edge=0.18):
    """Random small multiplex graph for oracle comparisons."""
    labels = [f"n{i:03d}" for i in range(n_nodes)]
    type_names = [f"t{j}" for j in range(n_types)]
    assignment = rng.integers(0, n_types, size=n_nodes)
    types = [(labels[i], type_names[assignment[i]]) for i in range(n_nodes)]
    edges = []
    for r in range(n_rels):
        for i in range(n_nodes):
            for j in range(i + 1, n_nodes):
                if rng.random() < p_edge:
                    edges.append((labels[i], labels[j], f"r{r}"))
    if not edges:
        edges.append((labels[0], labels[1], "r0"))
    return load_graph(edges, types)


def clustered_bipartite_records(rng, n_users=30, n_items=30, n_clusters=3,
                                p_intra_r1=0.25, p_intra_r2=0.6,
                                p_noise=0.01):
    """User-item records where both relationships follow the same clusters.

    Relationship "beta" densely links same-cluster pairs; "alpha" links them
    sparsely, so beta structure is informative about held-out alpha edges.
    """
    users = [f"u{i:03d}" for i in range(n_users)]
    items = [f"i{i:03d}" for i in range(n_items)]
    cu = rng.integers(0, n_clusters, size=n_users)
    ci = rng.integers(0, n_clusters, size=n_items)
    edges = []
    for a in range(n_users):
        for b in range(n_items):
            same = cu[a] == ci[b]
            if rng.random() < (p_intra_r1 if same else p_noise):
                edges.append((users[a], items[b], "alpha"))
            if rng.random() < (p_intra_r2 if same else p_noise):
                edges.append((users[a], items[b], "beta"))
    types = [(u, "user") for u in users] + [(i, "item") for i in items]
    return edges, types


def write_dataset(tmp_path, edges, types, config_overrides=None):
    """Write edge/type files plus a ready-to-run config; returns paths."""
    import json

    edge_path = tmp_path / "edges.tsv"
    type_path = tmp_path / "types.tsv"
    with open(edge_path, "w", encoding="utf-8") as fh:
        for src, dst, rel in edges:
            fh.write(f"{rel}\t{src}\t{dst}\n")
    with open(type_path, "w", encoding="utf-8") as fh:
        for node, t in types:
            fh.write(f"{node}\t{t}\n")
    config = {
        "edge_file": str(edge_path),
        "type_file": str(type_path),
        "output_dir": str(tmp_path / "out"),
        "schemes": {
            "alpha": [["user", "item", "user"], ["item", "user", "item"]],
            "beta": [["user", "item", "user"], ["item", "user", "item"]],
        },
        "dims": {"d": 8, "d_h": 4, "d_k": 4},
        "train": {"batch_size": 256, "learning_rate": 0.01, "negatives": 3,
                  "max_epochs": 2, "patience": 5, "seed": 7},
        "sampler": {"num_walks": 3, "walk_length": 6, "window": 2,
                    "fanout": [3, 3], "exploration_depth": 2, "seed": 7},
        "eval_fractions": [0.85, 0.05, 0.10],
        "eval_seed": 7,
        "topk": 10,
    }
    if config_overrides:
        for key, val in config_overrides.items():
            if isinstance(val, dict):
                config[key].update(val)
            else:
                config[key] = val
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return edge_path, type_path, config_path
