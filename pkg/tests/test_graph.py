import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgcn_ris.channel import RISState
from qgcn_ris.config import SystemConfig
from qgcn_ris.graph import (build_graph, edge_weight, estimated_positions, partition,
                            refresh_weights, stitch)


class TestBuild:
    def test_two_vertices(self):
        g = build_graph([0.0, 0.3], w_decay=2.0)
        assert g.edges == ((0, 1),)
        assert g.weights[0] == pytest.approx(np.exp(-0.6))

    def test_zero_distance_weight_is_one(self):
        assert edge_weight(0.0, 5.0) == 1.0

    def test_path_graph_for_k1(self):
        g = build_graph(np.arange(5.0), 1.0, k_neighbors=1)
        assert g.edges == ((0, 1), (1, 2), (2, 3), (3, 4))

    def test_k2_line_edges(self):
        # nearest two on an even grid: path edges plus the end vertices' second neighbours
        g = build_graph(np.arange(6.0), 1.0, k_neighbors=2)
        assert set(g.edges) == {(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 2), (3, 5)}

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 40), st.integers(1, 4), st.floats(0.1, 200.0))
    def test_linear_edge_count_and_weight_range(self, n, k, decay):
        p = np.arange(n) * 0.005
        g = build_graph(p, decay, k)
        assert len(g.edges) <= n * k
        assert np.all((g.weights > 0) & (g.weights <= 1))
        for (i, j), w in zip(g.edges, g.weights):
            assert i < j
            assert w == np.exp(-decay * abs(p[j] - p[i]))

    @pytest.mark.parametrize("pos,k", [([], 2), ([0.0, 0.0], 2), ([0.0, 1.0], 0)])
    def test_rejects(self, pos, k):
        with pytest.raises(ValueError):
            build_graph(pos, 1.0, k)


class TestPartition:
    @pytest.mark.parametrize("n,cap,sizes", [(10, 5, [5, 5]), (7, 3, [3, 3, 1]), (4, 6, [4])])
    def test_sizes(self, n, cap, sizes):
        blocks = partition(build_graph(np.arange(float(n)), 1.0), cap)
        assert [b.size for b in blocks] == sizes

    def test_single_block_has_no_boundary(self):
        b, = partition(build_graph(np.arange(4.0), 1.0), 6)
        assert b.boundary_vertices == ()
        assert len(b.edges) == 5

    def test_boundary_recorded(self):
        blocks = partition(build_graph(np.arange(6.0), 1.0, 1), 3)
        assert blocks[0].boundary_vertices == (2,)
        assert blocks[1].boundary_vertices == (3,)
        assert blocks[0].n_qubits == 6

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 30), st.integers(1, 8))
    def test_blocks_cover_disjointly(self, n, cap):
        blocks = partition(build_graph(np.arange(float(n)), 1.0), cap)
        ids = [v for b in blocks for v in b.vertex_ids]
        assert ids == list(range(n))
        assert all(b.size <= cap for b in blocks)

    def test_large_cap_warns(self):
        with pytest.warns(RuntimeWarning):
            partition(build_graph(np.arange(3.0), 1.0), 40)

    def test_cap_must_be_positive(self):
        with pytest.raises(ValueError):
            partition(build_graph(np.arange(3.0), 1.0), 0)


class TestRefresh:
    def test_fully_active_restores_grid_weights(self):
        g = build_graph(np.arange(5) * 0.2, 3.0)
        w = refresh_weights(g.edges, np.ones(5), 0.2, 3.0)
        np.testing.assert_allclose(w, g.weights)

    def test_all_off_collapses_to_one(self):
        g = build_graph(np.arange(5) * 0.2, 3.0)
        np.testing.assert_array_equal(refresh_weights(g.edges, np.zeros(5), 0.2, 3.0), 1.0)

    def test_prefix_sum(self):
        np.testing.assert_allclose(estimated_positions([0.5, 1.0, 1.0], 2.0), [0.0, 1.0, 3.0])

    def test_idempotent(self):
        g = build_graph(np.arange(4.0), 1.0)
        m = np.array([0.2, 0.9, 0.4, 0.7])
        np.testing.assert_array_equal(refresh_weights(g.edges, m, 1.0, 1.0),
                                      refresh_weights(g.edges, m, 1.0, 1.0))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 5.0), st.floats(0.01, 5.0))
    def test_weight_strictly_decreasing_in_separation(self, d, extra):
        assert edge_weight(d + extra, 1.3) < edge_weight(d, 1.3)

    def test_out_of_range_mean(self):
        with pytest.raises(ValueError):
            refresh_weights(((0, 1),), [1.2, 0.0], 1.0, 1.0)


class TestStitch:
    def test_single_block_passthrough(self):
        s = RISState([1, 0, 1], [0.1, 0.2, 0.3])
        assert stitch([((0, 1, 2), s)]).state == s

    def test_concatenation(self):
        r = stitch([((0, 1), RISState([1, 0], [0, 0])), ((2, 3), RISState([0, 1], [0, 0]))])
        np.testing.assert_array_equal(r.state.activation, [1, 0, 0, 1])

    def test_infeasible_flagged_not_repaired(self):
        c = SystemConfig.build(n_elements=4, n_min=2)
        r = stitch([((0, 1), RISState([1, 0], [0, 0])), ((2, 3), RISState([0, 0], [0, 0]))],
                   config=c)
        assert not r.feasible
        assert r.n_active == 1

    @pytest.mark.parametrize("ids", [[(0, 1), (1, 2)], [(0,), (2,)]])
    def test_bad_coverage(self, ids):
        with pytest.raises(ValueError):
            stitch([(v, RISState([1] * len(v), [0] * len(v))) for v in ids], n_elements=3)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=14), st.integers(1, 5))
    def test_partition_stitch_round_trip(self, bits, cap):
        n = len(bits)
        phases = np.linspace(0, 6, n)
        full = RISState(bits, phases)
        blocks = partition(build_graph(np.arange(float(n)), 1.0), cap)
        parts = [(b.vertex_ids, RISState(full.activation[list(b.vertex_ids)],
                                         full.phases[list(b.vertex_ids)])) for b in blocks]
        assert stitch(parts, n).state == full
