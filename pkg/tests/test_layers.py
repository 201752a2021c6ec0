"""Neighbor layers: scheme-guided supports and the two-phase exploration law."""

import numpy as np
import pytest

from hybridgnn.errors import TypeMismatch
from hybridgnn.graph import load_graph
from hybridgnn.rng import derive_keys_np
from hybridgnn.sampling import (
    HAS_NUMBA,
    RandomFlow,
    SchemeFlow,
    metapath_guided_layers,
    randomized_exploration_layers,
)

from conftest import random_multiplex
from oracles import enumerate_instance_positions, exploration_step_distribution


def test_toy_graph_layer_supports(toy_graph):
    g = toy_graph
    scheme = g.resolve_scheme(["video", "user", "author"], ["like", "comment"])
    v1 = g.label_to_id["v1"]
    got = metapath_guided_layers(g, v1, scheme, fanout=[64, 64], seed=2)
    assert got.layers[0].tolist() == [v1]
    u_ids = {g.label_to_id["u1"], g.label_to_id["u2"]}
    assert set(got.layers[1].tolist()) == u_ids
    assert set(got.layers[2].tolist()) == {g.label_to_id["a1"]}
    assert got.layers[1].shape == (64,)
    assert got.layers[2].shape == (64 * 64,)


def test_chain_fanout_one(toy_graph):
    g = load_graph(
        [("a", "b", "r1"), ("b", "c", "r2")],
        [("a", "t0"), ("b", "t1"), ("c", "t2")],
    )
    scheme = g.resolve_scheme(["t0", "t1", "t2"], ["r1", "r2"])
    a = g.label_to_id["a"]
    got = metapath_guided_layers(g, a, scheme, fanout=[1, 1], seed=0)
    assert [layer.tolist() for layer in got.layers] == [
        [a], [g.label_to_id["b"]], [g.label_to_id["c"]]
    ]


def test_type_mismatch_raises(toy_graph):
    g = toy_graph
    scheme = g.resolve_scheme(["video", "user", "author"], ["like", "comment"])
    with pytest.raises(TypeMismatch):
        metapath_guided_layers(g, g.label_to_id["a1"], scheme, fanout=[2, 2])


def test_layer_supports_match_enumeration_oracle():
    rng = np.random.default_rng(123)
    checked = 0
    for trial in range(12):
        g = random_multiplex(
            rng, n_nodes=int(rng.integers(6, 16)), n_types=int(rng.integers(1, 4)),
            n_rels=int(rng.integers(1, 4)), p_edge=0.25,
        )
        schemes = _random_valid_schemes(g, rng, max_len=3, count=2)
        for scheme in schemes:
            flow = SchemeFlow(g, scheme)
            starts = g.nodes_of_type(scheme.node_types[0])
            if len(starts) == 0:
                continue
            fanouts = np.array([512, 16, 16][: scheme.length], dtype=np.int64)
            keys = derive_keys_np(7, np.full(len(starts), 1), starts.astype(np.int64))
            matrix, offsets = flow.sample_batch(starts, fanouts, keys)
            for i, v in enumerate(starts):
                expected = enumerate_instance_positions(g, int(v), scheme)
                for k in range(scheme.length + 1):
                    support = set(matrix[i, offsets[k]: offsets[k + 1]].tolist())
                    assert support == expected[k], (
                        f"trial {trial} node {v} level {k}"
                    )
                checked += 1
    assert checked >= 20


def _random_valid_schemes(g, rng, max_len=3, count=2):
    triples = sorted(g.schema)
    out = []
    for _ in range(count * 4):
        if len(out) >= count:
            break
        t0, r1, t1 = triples[rng.integers(0, len(triples))]
        types, rels = [t0, t1], [r1]
        length = int(rng.integers(1, max_len + 1))
        ok = True
        while len(rels) < length:
            cont = [tr for tr in triples if tr[0] == types[-1]]
            if not cont:
                ok = False
                break
            t0b, r2, t2 = cont[rng.integers(0, len(cont))]
            types.append(t2)
            rels.append(r2)
        if ok:
            from hybridgnn.graph import MetapathScheme

            out.append(MetapathScheme(tuple(types), tuple(rels)))
    return out


def test_exploration_two_phase_law():
    # N_r1(u) = {a}, N_r2(u) = {b, c}: P(a)=1/2, P(b)=P(c)=1/4
    g = load_graph(
        [("u", "a", "r1"), ("u", "b", "r2"), ("u", "c", "r2")],
        [(n, "t") for n in "uabc"],
    )
    u = g.label_to_id["u"]
    flow = RandomFlow(g)
    keys = derive_keys_np(11, [3], [u])
    matrix, offsets = flow.sample_batch(
        np.array([u]), depth=1, fanouts=np.array([100_000]), keys=keys
    )
    draws = matrix[0, 1:]
    freqs = np.bincount(draws, minlength=g.n_nodes) / len(draws)
    exact = exploration_step_distribution(g, u)
    for node, p in exact.items():
        assert abs(freqs[node] - p) < 0.02
    assert freqs[u] == 0.0


def test_exploration_single_relationship_prob_one():
    g = load_graph([("u", "a", "r1"), ("b", "c", "r2")],
                   [(n, "t") for n in "uabc"])
    u = g.label_to_id["u"]
    got = randomized_exploration_layers(g, u, depth=2, fanout=[50, 1], seed=4)
    assert set(got.layers[1].tolist()) == {g.label_to_id["a"]}


def test_isolated_node_backfills_itself():
    g = load_graph([("a", "b", "r")], [("a", "t"), ("b", "t"), ("z", "t")])
    z = g.label_to_id["z"]
    got = randomized_exploration_layers(g, z, depth=2, fanout=[4, 4], seed=0)
    assert set(got.layers[1].tolist()) == {z}
    assert set(got.layers[2].tolist()) == {z}


def test_zero_instance_origin_backfills(toy_graph):
    # author nodes start no video-(like)-user instance
    g = load_graph(
        [("v", "u", "like"), ("u", "a", "comment")],
        [("v", "video"), ("u", "user"), ("a", "author"), ("v2", "video")],
    )
    scheme = g.resolve_scheme(["video", "user", "author"], ["like", "comment"])
    v2 = g.label_to_id["v2"]  # isolated video: no instances
    got = metapath_guided_layers(g, v2, scheme, fanout=[3, 3], seed=1)
    assert set(got.layers[1].tolist()) == {v2}
    assert set(got.layers[2].tolist()) == {v2}


def test_layers_deterministic_per_seed(toy_graph):
    g = toy_graph
    scheme = g.resolve_scheme(["video", "user", "author"], ["like", "comment"])
    v1 = g.label_to_id["v1"]
    a = metapath_guided_layers(g, v1, scheme, fanout=[8, 8], seed=3)
    b = metapath_guided_layers(g, v1, scheme, fanout=[8, 8], seed=3)
    c = metapath_guided_layers(g, v1, scheme, fanout=[8, 8], seed=4)
    assert all(np.array_equal(x, y) for x, y in zip(a.layers, b.layers))
    assert any(not np.array_equal(x, y) for x, y in zip(a.layers, c.layers))


@pytest.mark.skipif(not HAS_NUMBA, reason="numba unavailable")
def test_backends_identical_layers():
    rng = np.random.default_rng(9)
    g = random_multiplex(rng, n_nodes=20, n_types=3, n_rels=3, p_edge=0.3)
    schemes = _random_valid_schemes(g, rng, max_len=3, count=2)
    for scheme in schemes:
        flow = SchemeFlow(g, scheme)
        starts = g.nodes_of_type(scheme.node_types[0])
        if len(starts) == 0:
            continue
        fo = np.array([5, 4, 3][: scheme.length], dtype=np.int64)
        keys = derive_keys_np(21, np.full(len(starts), 5), starts.astype(np.int64))
        m_nb, off_nb = flow.sample_batch(starts, fo, keys, backend="numba")
        m_np, off_np = flow.sample_batch(starts, fo, keys, backend="numpy")
        assert np.array_equal(m_nb, m_np)
        assert np.array_equal(off_nb, off_np)
    rf = RandomFlow(g)
    starts = np.arange(g.n_nodes, dtype=np.int32)
    keys = derive_keys_np(33, np.full(g.n_nodes, 6), starts.astype(np.int64))
    m_nb, _ = rf.sample_batch(starts, 2, np.array([6, 5]), keys, backend="numba")
    m_np, _ = rf.sample_batch(starts, 2, np.array([6, 5]), keys, backend="numpy")
    assert np.array_equal(m_nb, m_np)
