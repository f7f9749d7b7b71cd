"""Graph builders, merging, symmetric normalization, and the file formats."""

import numpy as np
import pytest

from graphzsl.data import LabelCatalog
from graphzsl.errors import ContractError, DimensionError, InputError, ParseError
from graphzsl.labelgraphs import (
    LabelGraph,
    build_cooccurrence_graph,
    build_hierarchy_graph,
    build_similarity_graph,
    load_graph,
    load_taxonomy,
    merge_graphs,
    normalize,
    save_graph,
    save_taxonomy,
    spectral_radius,
)
from graphzsl.numerics import seeded_rng


def _catalog(codes):
    return LabelCatalog(list(codes), [[c] for c in codes])


def _random_graph(rng, n, density=0.3, top=3.0):
    a = rng.random((n, n)) * top * (rng.random((n, n)) < density)
    a = np.triu(a, 1)
    a = a + a.T
    np.fill_diagonal(a, 1.0)
    return LabelGraph("merged", a)


class TestLabelGraphType:
    def test_rejects_asymmetry(self):
        m = np.eye(2)
        m[0, 1] = 0.5
        with pytest.raises(ContractError):
            LabelGraph("hierarchy", m)

    def test_rejects_negative(self):
        m = np.eye(2)
        m[0, 1] = m[1, 0] = -0.5
        with pytest.raises(ContractError):
            LabelGraph("hierarchy", m)

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionError):
            LabelGraph("hierarchy", np.zeros((2, 3)))


class TestHierarchyGraph:
    def test_chain_of_labels(self):
        cat = _catalog(["a", "b", "c"])
        g = build_hierarchy_graph([("a", "b"), ("b", "c")], cat)
        want = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=float)
        np.testing.assert_array_equal(g.adjacency, want)

    def test_empty_taxonomy_is_identity(self):
        g = build_hierarchy_graph([], _catalog(["a", "b", "c"]))
        np.testing.assert_array_equal(g.adjacency, np.eye(3))

    def test_internal_root_collapses_to_clique(self):
        # star: root is not a label; its three children become pairwise adjacent
        cat = _catalog(["a", "b", "c"])
        g = build_hierarchy_graph([("a", "root"), ("b", "root"), ("c", "root")], cat)
        np.testing.assert_array_equal(g.adjacency, np.ones((3, 3)))

    def test_two_level_internal_chain(self):
        # a - x - y - b with x, y internal: elimination still links a to b
        cat = _catalog(["a", "b"])
        g = build_hierarchy_graph([("a", "x"), ("x", "y"), ("y", "b")], cat)
        np.testing.assert_array_equal(g.adjacency, np.ones((2, 2)))

    def test_internal_elimination_matches_reachability_oracle(self):
        # Brute force: labels are adjacent iff some path joins them using
        # only internal nodes in between.
        rng = seeded_rng(4, "hier")
        for trial in range(20):
            codes = [f"l{i}" for i in range(6)]
            internal = [f"n{i}" for i in range(4)]
            nodes = codes + internal
            edges = []
            for _ in range(10):
                a, b = rng.choice(len(nodes), size=2, replace=False)
                edges.append((nodes[a], nodes[b]))
            cat = _catalog(codes)
            g = build_hierarchy_graph(edges, cat)

            neighbors = {n: set() for n in nodes}
            for a, b in edges:
                neighbors[a].add(b)
                neighbors[b].add(a)
            want = np.eye(len(codes))
            for i, src in enumerate(codes):
                # BFS through internal nodes only
                frontier = [src]
                visited = {src}
                reach = set()
                while frontier:
                    cur = frontier.pop()
                    for nxt in neighbors[cur]:
                        if nxt in codes:
                            reach.add(nxt)
                        elif nxt not in visited:
                            visited.add(nxt)
                            frontier.append(nxt)
                for dst in reach - {src}:
                    want[i, cat.code_to_id[dst]] = 1.0
            np.testing.assert_array_equal(g.adjacency, want, err_msg=f"trial {trial}")

    def test_blank_and_self_edges_rejected(self):
        cat = _catalog(["a"])
        with pytest.raises(InputError):
            build_hierarchy_graph([("a", "")], cat)
        with pytest.raises(InputError):
            build_hierarchy_graph([("a", "a")], cat)


class TestSimilarityGraph:
    def test_identical_vectors_edge_weight_one(self):
        v = np.array([[1.0, 0.0], [1.0, 0.0]])
        g = build_similarity_graph(v, k=1, tau=0.0)
        np.testing.assert_allclose(g.adjacency, np.ones((2, 2)), atol=1e-12)

    def test_orthogonal_with_floor_gives_identity(self):
        v = np.eye(3)
        g = build_similarity_graph(v, k=2, tau=0.5)
        np.testing.assert_array_equal(g.adjacency, np.eye(3))

    def test_matches_brute_force_topk(self):
        rng = seeded_rng(5, "sim")
        for trial in range(30):
            v = rng.normal(size=(5, 3))
            k = 2
            g = build_similarity_graph(v, k=k, tau=0.0)
            unit = v / np.linalg.norm(v, axis=1, keepdims=True)
            cos = np.clip(unit @ unit.T, -1.0, 1.0)
            want = np.zeros((5, 5))
            for i in range(5):
                order = sorted((j for j in range(5) if j != i), key=lambda j: (-cos[i, j], j))
                for j in order[:k]:
                    if cos[i, j] >= 0.0:  # tau floor also cuts negative cosines
                        want[i, j] = cos[i, j]
            want = np.maximum(want, want.T)
            np.fill_diagonal(want, 1.0)
            np.testing.assert_allclose(g.adjacency, want, atol=1e-12, err_msg=f"trial {trial}")

    def test_zero_vector_isolated(self):
        v = np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 0.1]])
        g = build_similarity_graph(v, k=2, tau=0.0)
        assert g.adjacency[1, 0] == 0.0 and g.adjacency[1, 2] == 0.0
        assert g.adjacency[1, 1] == 1.0

    def test_k_bounds(self):
        v = np.eye(3)
        with pytest.raises(InputError):
            build_similarity_graph(v, k=0)
        with pytest.raises(InputError):
            build_similarity_graph(v, k=3)


class TestCooccurrenceGraph:
    def test_pair_counts(self):
        cat = _catalog(["0", "1", "2", "3"])
        docs = [{1, 2}, {1, 2}, {1, 3}]
        g = build_cooccurrence_graph(docs, cat)
        assert g.adjacency[1, 2] == 2.0 and g.adjacency[2, 1] == 2.0
        assert g.adjacency[1, 3] == 1.0
        assert g.adjacency[2, 3] == 0.0
        np.testing.assert_array_equal(np.diag(g.adjacency), np.ones(4))

    def test_single_label_docs_give_identity(self):
        cat = _catalog(["a", "b"])
        g = build_cooccurrence_graph([{0}, {1}, {0}], cat)
        np.testing.assert_array_equal(g.adjacency, np.eye(2))

    def test_unseen_rows_self_loop_only(self):
        cat = _catalog(["a", "b", "u"])
        g = build_cooccurrence_graph([{0, 1}], cat, unseen={2})
        np.testing.assert_array_equal(g.adjacency[2], [0.0, 0.0, 1.0])

    def test_declared_unseen_in_train_rejected(self):
        cat = _catalog(["a", "u"])
        with pytest.raises(ContractError):
            build_cooccurrence_graph([{0, 1}], cat, unseen={1})

    def test_out_of_range_label_rejected(self):
        cat = _catalog(["a"])
        with pytest.raises(InputError):
            build_cooccurrence_graph([{3}], cat)


class TestMergeGraphs:
    def test_merge_self_is_rescale(self):
        rng = seeded_rng(6, "merge")
        g = _random_graph(rng, 6, top=4.0)
        merged = merge_graphs(g, g)
        peak = np.max(g.adjacency - np.diag(np.diag(g.adjacency)))
        np.testing.assert_allclose(merged.adjacency, g.adjacency / peak, rtol=1e-15)

    def test_merge_with_identity_keeps_unit_diag(self):
        rng = seeded_rng(7, "merge")
        g = _random_graph(rng, 5, top=3.0)
        ident = LabelGraph("hierarchy", np.eye(5))
        merged = merge_graphs(ident, g)
        assert (np.diag(merged.adjacency) >= 1.0).all()

    def test_union_of_disjoint_edges(self):
        # hierarchy chain 0-1, similarity edge 2-3: merged carries both at
        # peak 1; the similarity rescale (1/0.8) lifts its self-loops too
        h = np.eye(4)
        h[0, 1] = h[1, 0] = 1.0
        s = np.eye(4)
        s[2, 3] = s[3, 2] = 0.8
        merged = merge_graphs(LabelGraph("hierarchy", h), LabelGraph("similarity", s))
        want = np.eye(4) * 1.25
        want[0, 1] = want[1, 0] = 1.0
        want[2, 3] = want[3, 2] = 1.0
        np.testing.assert_allclose(merged.adjacency, want, rtol=1e-15)

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            merge_graphs(LabelGraph("hierarchy", np.eye(2)), LabelGraph("hierarchy", np.eye(3)))


class TestNormalize:
    def test_identity_fixed_point(self):
        g = LabelGraph("hierarchy", np.eye(4))
        np.testing.assert_array_equal(normalize(g).matrix, np.eye(4))

    def test_all_ones_two_labels(self):
        g = LabelGraph("similarity", np.ones((2, 2)))
        np.testing.assert_allclose(normalize(g).matrix, np.full((2, 2), 0.5), rtol=1e-15)

    def test_isolated_label_passes_through(self):
        a = np.eye(3)
        a[0, 1] = a[1, 0] = 1.0
        norm = normalize(LabelGraph("hierarchy", a)).matrix
        assert norm[2, 2] == 1.0

    def test_symmetric_and_contractive_on_random_graphs(self):
        rng = seeded_rng(8, "norm")
        for trial in range(25):
            g = _random_graph(rng, int(rng.integers(2, 12)), top=float(rng.uniform(0.5, 5.0)))
            norm = normalize(g).matrix
            np.testing.assert_allclose(norm, norm.T, atol=1e-14)
            assert spectral_radius(norm) <= 1.0 + 1e-9, f"trial {trial}"

    def test_normalize_of_merged_duplicate_matches_original(self):
        rng = seeded_rng(9, "norm")
        for _ in range(25):
            g = _random_graph(rng, int(rng.integers(2, 10)), top=float(rng.uniform(0.5, 6.0)))
            direct = normalize(g).matrix
            via_merge = normalize(merge_graphs(g, g)).matrix
            assert np.abs(direct - via_merge).max() < 1e-12

    def test_relabeling_equivariance(self):
        rng = seeded_rng(10, "norm")
        g = _random_graph(rng, 7)
        perm = rng.permutation(7)
        permuted = LabelGraph(g.kind, g.adjacency[np.ix_(perm, perm)])
        np.testing.assert_allclose(
            normalize(permuted).matrix,
            normalize(g).matrix[np.ix_(perm, perm)],
            atol=1e-14,
        )

    def test_zero_degree_guarded(self):
        with pytest.raises(ContractError):
            normalize(LabelGraph("hierarchy", np.zeros((2, 2))))


class TestSpectralRadius:
    def test_diagonal_matrix(self):
        assert spectral_radius(np.diag([0.5, -2.0, 1.0])) == pytest.approx(2.0, rel=1e-6)

    def test_power_iteration_matches_eigh(self):
        rng = seeded_rng(11, "spec")
        for _ in range(10):
            a = rng.normal(size=(6, 6))
            a = (a + a.T) / 2.0
            want = np.abs(np.linalg.eigvalsh(a)).max()
            assert spectral_radius(a) == pytest.approx(want, rel=1e-5)


class TestGraphFiles:
    def test_round_trip(self, tmp_path):
        rng = seeded_rng(12, "io")
        g = _random_graph(rng, 6)
        p = tmp_path / "graph.tsv"
        save_graph(p, g)
        loaded = load_graph(p)
        assert loaded.kind == g.kind
        np.testing.assert_array_equal(loaded.adjacency, g.adjacency)

    def test_header_checked(self, tmp_path):
        p = tmp_path / "graph.tsv"
        p.write_text("labls 3 kind hierarchy\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_graph(p)

    def test_bad_index_rejected(self, tmp_path):
        p = tmp_path / "graph.tsv"
        p.write_text("labels 2 kind hierarchy\n0\t5\t1.0\n", encoding="utf-8")
        with pytest.raises(InputError, match="line 2"):
            load_graph(p)

    def test_negative_weight_rejected(self, tmp_path):
        p = tmp_path / "graph.tsv"
        p.write_text("labels 2 kind hierarchy\n0\t1\t-1.0\n", encoding="utf-8")
        with pytest.raises(InputError):
            load_graph(p)


class TestTaxonomyFiles:
    def test_round_trip_with_comments(self, tmp_path):
        p = tmp_path / "tax.tsv"
        edges = [("c1", "p1"), ("c2", "p1")]
        save_taxonomy(p, edges)
        assert load_taxonomy(p) == edges

    def test_bad_field_count(self, tmp_path):
        p = tmp_path / "tax.tsv"
        p.write_text("a\tb\tc\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 1"):
            load_taxonomy(p)

    def test_blank_id_rejected(self, tmp_path):
        p = tmp_path / "tax.tsv"
        p.write_text("a\t \n", encoding="utf-8")
        with pytest.raises(InputError):
            load_taxonomy(p)
