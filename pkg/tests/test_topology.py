import numpy as np
import pytest

from netbound.topology import (
    DistanceModel,
    Topology,
    TopologyError,
    TopologyFormatError,
    all_pairs_graph_distance,
    build_distance_model,
    read_topology,
    write_topology,
)


from helpers import floyd_warshall_oracle, make_topology, random_connected_graph


class TestAllPairsGraphDistance:
    def test_path_graph_hops(self):
        t = make_topology(3, [(0, 1), (1, 2)])
        d = all_pairs_graph_distance(t)
        assert d[0, 2] == 2
        assert d[0, 1] == 1

    def test_star_leaves_at_distance_two(self):
        t = make_topology(4, [(0, 1), (0, 2), (0, 3)])
        d = all_pairs_graph_distance(t)
        for a in (1, 2, 3):
            for b in (1, 2, 3):
                if a != b:
                    assert d[a, b] == 2

    def test_matches_floyd_warshall_on_random_graph(self):
        rng = np.random.default_rng(42)
        edges = random_connected_graph(rng, 12)
        t = make_topology(12, edges)
        d = all_pairs_graph_distance(t)
        expected = floyd_warshall_oracle(12, edges)
        np.testing.assert_array_equal(d, expected)

    def test_weighted_matches_floyd_warshall(self):
        rng = np.random.default_rng(7)
        edges = random_connected_graph(rng, 15)
        weights = rng.uniform(0.5, 3.0, len(edges))
        t = make_topology(15, edges)
        d = all_pairs_graph_distance(t, edge_weights=weights)
        expected = floyd_warshall_oracle(15, edges, weights)
        np.testing.assert_allclose(d, expected, rtol=1e-9)

    def test_symmetric_zero_diagonal(self):
        rng = np.random.default_rng(3)
        edges = random_connected_graph(rng, 10)
        d = all_pairs_graph_distance(make_topology(10, edges))
        np.testing.assert_array_equal(d, d.T)
        assert np.all(np.diag(d) == 0)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            n = int(rng.integers(5, 20))
            edges = random_connected_graph(rng, n)
            weights = rng.uniform(0.1, 5.0, len(edges))
            d = all_pairs_graph_distance(make_topology(n, edges), weights)
            lhs = d[:, :, None]
            rhs = d[:, None, :] + d[None, :, :]
            assert np.all(lhs <= rhs + 1e-9)

    def test_disconnected_raises(self):
        with pytest.raises(TopologyError, match="disconnected"):
            make_topology(4, [(0, 1), (2, 3)])

    def test_nonpositive_weights_rejected(self):
        t = make_topology(3, [(0, 1), (1, 2)])
        with pytest.raises(ValueError):
            all_pairs_graph_distance(t, edge_weights=np.array([1.0, 0.0]))


class TestTopologyInvariants:
    def test_self_loop_rejected(self):
        with pytest.raises(TopologyError, match="self-loop"):
            make_topology(3, [(0, 1), (1, 1), (1, 2)])

    def test_duplicate_edge_rejected(self):
        with pytest.raises(TopologyError, match="duplicate"):
            make_topology(3, [(0, 1), (1, 0), (1, 2)])

    def test_unknown_node_id_rejected(self):
        with pytest.raises(TopologyError, match="unknown node id"):
            make_topology(3, [(0, 1), (1, 5)])

    def test_positions_must_cover_all_nodes(self):
        with pytest.raises(TopologyError, match="cover every node"):
            make_topology(
                3, [(0, 1), (1, 2)], true_positions=np.zeros((2, 2))
            )

    def test_hop_neighborhood(self):
        t = make_topology(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
        assert list(t.hop_neighborhood(0, 2)) == [0, 1, 2]
        assert list(t.hop_neighborhood([0, 5], 1)) == [0, 1, 4, 5]


class TestBuildDistanceModel:
    def test_path_example(self):
        d = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
        m = build_distance_model(d, L0=600, K=1.0)
        assert m.l[0, 1] == pytest.approx(300.0)
        assert m.l[0, 2] == pytest.approx(600.0)
        assert m.k[0, 2] == pytest.approx(0.25)

    def test_uniform_scaling_leaves_l_unchanged_scales_k(self):
        rng = np.random.default_rng(5)
        edges = random_connected_graph(rng, 9)
        d = all_pairs_graph_distance(make_topology(9, edges))
        c = 3.7
        m1 = build_distance_model(d, 600, 1.0)
        m2 = build_distance_model(c * d, 600, 1.0)
        np.testing.assert_allclose(m1.l, m2.l, rtol=1e-12)
        np.testing.assert_allclose(m1.k, c * c * m2.k, rtol=1e-12)

    def test_unit_distance_stiffness_equals_K(self):
        d = np.array([[0.0, 1.0], [1.0, 0.0]])
        m = build_distance_model(d, 100, K=2.5)
        assert m.k[0, 1] == pytest.approx(2.5)

    def test_max_l_equals_L0(self):
        rng = np.random.default_rng(9)
        edges = random_connected_graph(rng, 14)
        d = all_pairs_graph_distance(make_topology(14, edges))
        m = build_distance_model(d, 713.0, 1.0)
        assert m.l.max() == pytest.approx(713.0, rel=1e-9)

    def test_degenerate_single_node(self):
        with pytest.raises(TopologyError, match="degenerate"):
            build_distance_model(np.zeros((1, 1)), 600, 1.0)


class TestTopologyFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(17)
        edges = random_connected_graph(rng, 40)
        t = make_topology(
            40,
            edges,
            rssi=rng.uniform(-90, -30, len(edges)),
            true_positions=rng.uniform(0, 100, (40, 2)),
            boundary_truth=rng.random(40) < 0.3,
        )
        path = tmp_path / "topo.txt"
        write_topology(t, path)
        back = read_topology(path)
        assert back.n == t.n
        np.testing.assert_array_equal(back.edges, t.edges)
        np.testing.assert_allclose(back.rssi, t.rssi, atol=1e-6)
        np.testing.assert_allclose(back.true_positions, t.true_positions, atol=1e-9)
        np.testing.assert_array_equal(back.boundary_truth, t.boundary_truth)

    def test_optional_sections_omitted(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("TOPO 3 2\nEDGE 0 1 -40.0\nEDGE 1 2 -42.5\n")
        t = read_topology(path)
        assert t.true_positions is None
        assert t.boundary_truth is None
        assert t.m == 2

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text(
            "# generated\nTOPO 2 1\n\nEDGE 0 1 -40.0  # link\n"
        )
        assert read_topology(path).m == 1

    def test_unknown_node_id_names_it(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("TOPO 3 2\nEDGE 0 1 -40.0\nEDGE 1 7 -40.0\n")
        with pytest.raises(TopologyFormatError, match="7"):
            read_topology(path)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("TOPO 2 1\nEDGE 0 one -40.0\n")
        with pytest.raises(TopologyFormatError, match="line 2"):
            read_topology(path)

    def test_duplicate_edge_in_file(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("TOPO 3 3\nEDGE 0 1 -40.0\nEDGE 1 0 -41.0\nEDGE 1 2 -40.0\n")
        with pytest.raises(TopologyFormatError, match="duplicate"):
            read_topology(path)

    def test_disconnected_file(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("TOPO 4 2\nEDGE 0 1 -40.0\nEDGE 2 3 -40.0\n")
        with pytest.raises(TopologyFormatError, match="disconnected"):
            read_topology(path)

    def test_edge_count_mismatch(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("TOPO 3 2\nEDGE 0 1 -40.0\n")
        with pytest.raises(TopologyFormatError, match="EDGE"):
            read_topology(path)
