"""Graph construction, adjacency invariants, and schema validation."""

import numpy as np
import pytest

from hybridgnn.errors import (
    DuplicateTypeAssignment,
    EmptyGraph,
    ParseError,
    SchemaViolation,
    UnknownNode,
)
from hybridgnn.graph import (
    MetapathScheme,
    load_graph,
    load_graph_files,
    subgraph_with_edges,
)

from conftest import random_multiplex


def test_toy_graph_multiplex_edge(toy_graph):
    g = toy_graph
    u1, a1 = g.label_to_id["u1"], g.label_to_id["a1"]
    like, comment = g.rel_to_id["like"], g.rel_to_id["comment"]
    assert a1 in g.neighbors(u1, like)
    assert a1 in g.neighbors(u1, comment)
    # exactly two relationships link u1 and a1
    n_rels_linking = sum(a1 in g.neighbors(u1, r) for r in range(g.n_rels))
    assert n_rels_linking == 2


def test_toy_graph_neighbors_example(toy_graph):
    g = toy_graph
    v1, like = g.label_to_id["v1"], g.rel_to_id["like"]
    got = {g.node_labels[i] for i in g.neighbors(v1, like)}
    assert got == {"u1", "u2"}


def test_empty_edge_stream_raises():
    with pytest.raises(EmptyGraph):
        load_graph([], [("a", "t")])


def test_single_edge_symmetric():
    g = load_graph([("a", "b", "r")], [("a", "t"), ("b", "t")])
    a, b, r = g.label_to_id["a"], g.label_to_id["b"], 0
    assert b in g.neighbors(a, r)
    assert a in g.neighbors(b, r)


def test_unknown_node_raises():
    with pytest.raises(UnknownNode):
        load_graph([("a", "b", "r")], [("a", "t")])


def test_duplicate_type_conflict_raises():
    with pytest.raises(DuplicateTypeAssignment):
        load_graph([("a", "b", "r")], [("a", "t"), ("a", "s"), ("b", "t")])


def test_duplicate_type_identical_ok():
    g = load_graph([("a", "b", "r")], [("a", "t"), ("a", "t"), ("b", "t")])
    assert g.n_nodes == 2


def test_duplicate_edges_collapse():
    g = load_graph(
        [("a", "b", "r"), ("a", "b", "r"), ("b", "a", "r")],
        [("a", "t"), ("b", "t")],
    )
    assert g.degree(g.label_to_id["a"], 0) == 1
    assert g.edge_counts[0] == 1


def test_path_graph_middle_neighbors(path_graph):
    g = path_graph
    c = g.label_to_id["c"]
    got = {g.node_labels[i] for i in g.neighbors(c, 0)}
    assert got == {"b", "d"}


def test_isolated_node_empty_everything():
    g = load_graph([("a", "b", "r")], [("a", "t"), ("b", "t"), ("z", "t")])
    z = g.label_to_id["z"]
    assert len(g.neighbors(z, 0)) == 0
    assert g.available_relationships(z) == set()


def test_available_relationships_counts():
    # node "x" has edges under 3 of 5 relationships
    edges = [("x", "a", "r0"), ("x", "b", "r1"), ("x", "c", "r3"),
             ("a", "b", "r2"), ("a", "c", "r4")]
    types = [(n, "t") for n in "xabc"]
    g = load_graph(edges, types)
    x = g.label_to_id["x"]
    assert g.available_relationships(x) == {g.rel_to_id[r] for r in ("r0", "r1", "r3")}


def test_toy_available_relationships(toy_graph):
    g = toy_graph
    u1 = g.label_to_id["u1"]
    assert {g.rel_to_id["like"], g.rel_to_id["comment"]} <= g.available_relationships(u1)


def test_symmetry_and_degree_conservation():
    rng = np.random.default_rng(7)
    g = random_multiplex(rng, n_nodes=18, n_types=3, n_rels=3)
    for r in range(g.n_rels):
        total = 0
        selfloops = 0
        for v in range(g.n_nodes):
            for w in g.neighbors(v, r):
                assert v in g.neighbors(int(w), r)
                if w == v:
                    selfloops += 1
            total += g.degree(v, r)
        assert total == 2 * g.edge_counts[r] - selfloops


def test_loading_order_independent():
    edges = [("a", "b", "r"), ("b", "c", "s"), ("a", "c", "r")]
    types = [("a", "t1"), ("b", "t2"), ("c", "t1")]
    g1 = load_graph(edges, types)
    g2 = load_graph(list(reversed(edges)), list(reversed(types)))
    assert g1.node_labels == g2.node_labels
    assert np.array_equal(g1.indptr, g2.indptr)
    assert np.array_equal(g1.nbr_sorted, g2.nbr_sorted)
    assert np.array_equal(g1.nbr_by_type, g2.nbr_by_type)
    assert np.array_equal(g1.type_ptr, g2.type_ptr)


def test_neighbor_lists_sorted_and_unique():
    rng = np.random.default_rng(3)
    g = random_multiplex(rng, n_nodes=16)
    for r in range(g.n_rels):
        for v in range(g.n_nodes):
            nb = g.neighbors(v, r)
            assert np.all(np.diff(nb) > 0) or len(nb) <= 1


def test_typed_neighbors_partition():
    rng = np.random.default_rng(11)
    g = random_multiplex(rng, n_nodes=16)
    for r in range(g.n_rels):
        for v in range(g.n_nodes):
            whole = set(g.neighbors(v, r).tolist())
            parts = []
            for t in range(g.n_types):
                tn = g.typed_neighbors(v, r, t)
                assert all(g.node_type[w] == t for w in tn)
                parts.extend(tn.tolist())
            assert set(parts) == whole and len(parts) == len(whole)


def test_validate_scheme_ok(toy_graph):
    g = toy_graph
    scheme = g.resolve_scheme(["user", "author", "user"], ["like", "like"])
    g.validate_scheme(scheme)  # should not raise


def test_validate_scheme_bad_relationship_id(toy_graph):
    scheme = MetapathScheme((0, 1), (99,))
    with pytest.raises(SchemaViolation):
        toy_graph.validate_scheme(scheme)


def test_validate_scheme_reports_first_bad_index(toy_graph):
    g = toy_graph
    # video-(like)-user exists; user-(like)-video back exists; but
    # video-(comment)-anything does not.
    scheme = g.resolve_scheme(
        ["user", "video", "user"], ["like", "comment"]
    )
    with pytest.raises(SchemaViolation) as exc:
        g.validate_scheme(scheme)
    assert exc.value.index == 2


def test_scheme_intra_classification():
    s1 = MetapathScheme((0, 1, 0), (2, 2))
    s2 = MetapathScheme((0, 1, 0), (2, 1))
    assert s1.is_intra and not s2.is_intra


def test_file_loading_roundtrip(tmp_path):
    epath = tmp_path / "edges.tsv"
    tpath = tmp_path / "types.tsv"
    epath.write_text("# comment\nlike\tv1\tu1\ncomment\tu1\ta1\n", encoding="utf-8")
    tpath.write_text("v1\tvideo\nu1\tuser\na1\tauthor\n", encoding="utf-8")
    g = load_graph_files(epath, tpath)
    assert g.n_nodes == 3
    assert g.n_rels == 2
    assert g.edge_counts.sum() == 2


def test_file_parse_error_names_line(tmp_path):
    epath = tmp_path / "edges.tsv"
    epath.write_text("like\ta\tb\nbroken line without tabs\n", encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        from hybridgnn.graph import read_edge_file
        read_edge_file(epath)
    assert "line 2" in str(exc.value)


def test_subgraph_with_edges(toy_graph):
    g = toy_graph
    like = g.rel_to_id["like"]
    comment = g.rel_to_id["comment"]
    v1, u1 = g.label_to_id["v1"], g.label_to_id["u1"]
    sub = subgraph_with_edges(
        g, {like: np.array([[v1, u1]]), comment: g.edges(comment)}
    )
    assert sub.n_nodes == g.n_nodes
    assert sub.rel_names == g.rel_names
    assert sub.degree(v1, like) == 1
    assert sub.degree(g.label_to_id["u2"], like) == 0
    assert sub.edge_counts[comment] == g.edge_counts[comment]


def test_adjacency_frozen(toy_graph):
    with pytest.raises(ValueError):
        toy_graph.nbr_sorted[0] = 0
