import itertools

import networkx as nx
import numpy as np
import pytest

from tenspect.tensor import SparseTensor
from tenspect.ingestion import (
    GENERATORS,
    MotifGraph,
    dataset_stats,
    erdos_renyi_graph,
    example_h_eigenvector,
    example_reducible_tensor,
    kofidis_regalia_tensor,
    load_edge_list,
    tensor_A,
    tensor_B,
    tensor_C,
    three_cycle_tensor,
)


def _brute_triangles(g):
    und = {frozenset(e) for e in g.edges}
    return [c for c in itertools.combinations(range(g.n), 3)
            if all(frozenset(pair) in und for pair in itertools.combinations(c, 2))]


class TestThreeCycleTensor:
    def test_single_triangle(self):
        g = MotifGraph(4, frozenset({(0, 1), (1, 2), (2, 0), (2, 3)}))
        t = three_cycle_tensor(g)
        assert t.nnz == 6
        assert {tuple(r) for r in t.indices} == set(itertools.permutations((0, 1, 2)))
        np.testing.assert_array_equal(t.values, 1.0)

    def test_matches_brute_force_and_networkx(self):
        g = erdos_renyi_graph(40, 8, seed=4)
        t = three_cycle_tensor(g)
        tris = _brute_triangles(g)
        assert t.nnz == 6 * len(tris)
        nxg = nx.Graph(list(g.edges))
        assert sum(nx.triangles(nxg).values()) // 3 == len(tris)

    def test_directed_cycle_and_transitive_triple(self):
        cyc = three_cycle_tensor(MotifGraph(3, frozenset({(0, 1), (1, 2), (2, 0)}), directed=True))
        trans = three_cycle_tensor(MotifGraph(3, frozenset({(0, 1), (1, 2), (0, 2)}), directed=True))
        assert cyc.nnz == trans.nnz == 6

    def test_relabel_invariance(self):
        g = erdos_renyi_graph(25, 6, seed=9)
        perm = np.random.default_rng(0).permutation(25)
        assert three_cycle_tensor(g.relabel(perm)).nnz == three_cycle_tensor(g).nnz

    def test_no_triangles(self):
        g = MotifGraph(4, frozenset({(0, 1), (1, 2), (2, 3)}))
        t = three_cycle_tensor(g)
        assert t.nnz == 0 and t.dim == 4


class TestLoaders:
    def test_matrix_market_symmetric(self, tmp_path):
        f = tmp_path / "g.mtx"
        f.write_text("%%MatrixMarket matrix coordinate pattern symmetric\n"
                     "4 4 4\n2 1\n3 1\n3 2\n4 3\n")
        g = load_edge_list(f)
        st = dataset_stats(g)
        assert (st.n, st.nnz_adjacency, st.nnz_tensor) == (4, 8, 6)

    def test_matrix_market_general_directed(self, tmp_path):
        f = tmp_path / "g.mtx"
        f.write_text("%%MatrixMarket matrix coordinate real general\n"
                     "3 3 4\n1 2 1.0\n2 3 2.0\n3 1 1.0\n1 1 5.0\n")
        g = load_edge_list(f, directed=True)
        assert g.directed and len(g.edges) == 3
        assert load_edge_list(f, directed=False).edges == frozenset(
            {(0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2)})

    def test_plain_list(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("# comment\n10 20\n20 30 1.0\n% other comment\n30 10\n30 30\n40 10 0\n")
        g = load_edge_list(f)
        assert g.n == 3  # node 40 only appears on a zero-weight line
        assert dataset_stats(g).nnz_tensor == 6

    def test_plain_list_bad_line(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("1 2\n3\n")
        with pytest.raises(ValueError, match=":2:"):
            load_edge_list(f)

    def test_matrix_market_non_square(self, tmp_path):
        f = tmp_path / "g.mtx"
        f.write_text("%%MatrixMarket matrix coordinate pattern general\n3 4 1\n1 2\n")
        with pytest.raises(ValueError, match="square"):
            load_edge_list(f)


class TestSyntheticTensors:
    def test_example_reducible(self):
        t = example_reducible_tensor()
        np.testing.assert_array_equal(t.apply(np.ones(3)), [3.0, 1.0, 1.0])
        u = example_h_eigenvector()
        np.testing.assert_allclose(t.apply(u), u**2, rtol=1e-14)
        e3 = np.array([0.0, 0.0, 1.0])
        np.testing.assert_array_equal(t.apply(e3), e3)

    def test_tensor_a(self):
        d = tensor_A(5).to_dense()
        assert d[0, 3, 3] == 1 and d[3, 0, 0] == 1 and d.sum() == 8

    def test_tensor_b_values(self):
        d = tensor_B(4).to_dense()
        # 1-based b[i, j, j] = i + j
        assert d[0, 2, 2] == 4.0 and d[3, 1, 1] == 6.0
        assert np.all(np.einsum("ijj->ij", d).diagonal() == 0)

    def test_tensor_c(self):
        d = tensor_C(4).to_dense()
        assert d[0, 3, 3] == 1 and d[2, 0, 0] == 1 and d[3, 1, 1] == 1

    def test_small_n(self):
        with pytest.raises(ValueError):
            tensor_B(1)

    def test_kofidis_regalia(self):
        t = kofidis_regalia_tensor(absolute=False)
        assert t.symmetric and t.order == 4 and t.nnz == 15
        d = t.to_dense()
        assert d[0, 1, 0, 0] == pytest.approx(-0.0031)
        assert d[2, 1, 0, 1] == pytest.approx(0.1862)
        assert kofidis_regalia_tensor().is_nonnegative()

    def test_kofidis_regalia_modes_agree(self):
        t = kofidis_regalia_tensor(absolute=False)
        full = SparseTensor(4, 3, *t.full_entries())
        x = np.random.default_rng(0).normal(size=3)
        for k in (2, 3, 4):
            np.testing.assert_allclose(full.apply_mode(x, k), full.apply_mode(x, 1), rtol=1e-13, atol=1e-15)

    def test_generators(self):
        for name, gen in GENERATORS.items():
            assert gen().is_nonnegative(), name

    def test_erdos_renyi_reproducible(self):
        a = erdos_renyi_graph(30, 6, seed=1)
        assert a.edges == erdos_renyi_graph(30, 6, seed=1).edges
        assert abs(len(a.edges) / 30 - 6) < 3
