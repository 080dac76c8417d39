"""Tests for sparse primitives, graph generators, diffusion and permutations."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_symmetric_graph
from gtcnn.errors import ContractError, ParameterError
from gtcnn.graphs import (
    cyclic_graph,
    degrees,
    diffusion_operators,
    graph_from_edges,
    heat_diffusion,
    laplacian,
    line_graph,
    path_graph,
    permute_graph,
    permute_signal,
    sbm_generate,
)
from gtcnn.linalg import clean, from_triplets, is_symmetric, max_abs_difference, to_dense, to_triplets
from gtcnn.models import Graph, Permutation


class TestSparsePrimitives:
    def test_triplet_round_trip(self, rng):
        rows = rng.integers(0, 6, size=15)
        cols = rng.integers(0, 7, size=15)
        vals = rng.uniform(1.0, 2.0, size=15)
        m = from_triplets(6, 7, rows, cols, vals)
        r, c, v = to_triplets(m)
        dense = np.zeros((6, 7))
        np.add.at(dense, (rows, cols), vals)
        expected_rows, expected_cols = np.nonzero(dense)
        np.testing.assert_array_equal(r, expected_rows)
        np.testing.assert_array_equal(c, expected_cols)
        np.testing.assert_allclose(v, dense[expected_rows, expected_cols], rtol=0, atol=1e-15)

    def test_csr_structure(self, rng):
        m = from_triplets(5, 5, [3, 0, 3, 1], [2, 4, 0, 1], [1.0, 2.0, 3.0, 4.0])
        assert m.indptr.size == 6
        assert np.all(np.diff(m.indptr) >= 0)
        assert m.indptr[-1] == m.data.size
        for row in range(5):
            cols = m.indices[m.indptr[row] : m.indptr[row + 1]]
            assert np.all(np.diff(cols) > 0)

    def test_tiny_entries_are_dropped(self):
        m = from_triplets(2, 2, [0, 1, 1], [0, 1, 1], [1e-16, 1.0, -1.0])
        assert m.nnz == 0

    def test_out_of_range_index(self):
        with pytest.raises(ParameterError):
            from_triplets(2, 2, [2], [0], [1.0])

    def test_matvec_matches_dense(self, rng):
        dense = rng.standard_normal((30, 30)) * (rng.random((30, 30)) < 0.2)
        x = rng.standard_normal(30)
        np.testing.assert_allclose(clean(dense) @ x, dense @ x, atol=1e-12)

    def test_symmetry_check(self):
        assert is_symmetric(clean(np.array([[0.0, 1.0], [1.0, 0.0]])))
        assert not is_symmetric(clean(np.array([[0.0, 1.0], [0.0, 0.0]])))

    def test_max_abs_difference_dense_and_sparse(self):
        a = clean(np.array([[1.0, 0.0], [0.0, 2.0]]))
        assert max_abs_difference(a, a) == 0.0
        assert max_abs_difference(to_dense(a), np.zeros((2, 2))) == 2.0


class TestGraph:
    def test_non_square_gso(self):
        with pytest.raises(ParameterError):
            Graph(sp.csr_array(np.ones((2, 3))))

    def test_false_symmetric_flag(self):
        with pytest.raises(ContractError):
            Graph(clean(np.array([[0.0, 1.0], [0.0, 0.0]])), symmetric=True)

    def test_graph_from_edges_mirrors(self):
        g = graph_from_edges(3, [(0, 1, 2.0)], symmetric=True)
        np.testing.assert_array_equal(g.dense(), [[0, 2, 0], [2, 0, 0], [0, 0, 0]])


class TestSBM:
    def test_deterministic_cliques(self):
        g, labels = sbm_generate(4, 2, 1.0, 0.0, seed=11)
        np.testing.assert_array_equal(labels, [0, 1, 0, 1])
        expected = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]])
        np.testing.assert_array_equal(g.dense(), expected)
        assert g.nnz // 2 == 2

    def test_expected_edge_count(self):
        counts = [sbm_generate(100, 5, 0.8, 0.2, seed=s)[0].nnz // 2 for s in range(1, 21)]
        assert abs(np.mean(counts) - 1560) <= 0.05 * 1560

    def test_replay_of_bernoulli_draws(self):
        g, _ = sbm_generate(3, 3, 0.5, 0.5, seed=7)
        draws = np.random.default_rng(7).random((3, 3))
        dense = g.dense()
        for i in range(3):
            for j in range(i + 1, 3):
                assert dense[i, j] == float(draws[i, j] < 0.5)
                assert dense[j, i] == dense[i, j]

    def test_no_self_loops_and_symmetric(self):
        g, _ = sbm_generate(30, 3, 0.9, 0.3, seed=5)
        assert g.symmetric
        assert np.all(np.diag(g.dense()) == 0)

    @pytest.mark.parametrize(
        "n, c, p_in, p_out",
        [(2, 3, 0.5, 0.1), (4, 0, 0.5, 0.1), (4, 2, 0.2, 0.5), (4, 2, 1.5, 0.1), (4, 2, 0.5, -0.1)],
    )
    def test_invalid_arguments(self, n, c, p_in, p_out):
        with pytest.raises(ParameterError):
            sbm_generate(n, c, p_in, p_out, seed=0)


class TestTemporalGraphs:
    def test_line_single_node(self):
        g = line_graph(1)
        assert g.n == 1 and g.nnz == 0

    def test_line_entries(self, line3):
        r, c, _ = to_triplets(line3.gso)
        assert list(zip(r, c)) == [(1, 0), (2, 1)]
        assert not line3.symmetric

    def test_line_is_nilpotent(self):
        s = line_graph(4).dense()
        np.testing.assert_array_equal(np.linalg.matrix_power(s, 4), np.zeros((4, 4)))

    def test_cycle_single_node(self):
        np.testing.assert_array_equal(cyclic_graph(1).dense(), [[1.0]])

    def test_cycle_roots_of_unity(self):
        g = cyclic_graph(4)
        assert g.nnz == 4
        w = np.linalg.eigvals(g.dense())
        np.testing.assert_allclose(w**4, np.ones(4), atol=1e-12)
        s = g.dense()
        np.testing.assert_allclose(s @ s.T, s.T @ s)

    def test_two_cycle_is_symmetric(self, cycle2):
        np.testing.assert_array_equal(cycle2.dense(), [[0, 1], [1, 0]])
        assert cycle2.symmetric

    @pytest.mark.parametrize("make", [line_graph, cyclic_graph, path_graph])
    def test_zero_length(self, make):
        with pytest.raises(ParameterError):
            make(0)

    def test_path(self, path3):
        np.testing.assert_array_equal(path3.dense(), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])


class TestLaplacian:
    def test_single_edge(self, edge_graph):
        np.testing.assert_array_equal(to_dense(laplacian(edge_graph)), [[1, -1], [-1, 1]])

    def test_triangle(self, triangle):
        lap = to_dense(laplacian(triangle))
        np.testing.assert_array_equal(np.diag(lap), [2, 2, 2])
        assert np.all(lap[~np.eye(3, dtype=bool)] == -1)
        assert abs(np.linalg.eigvalsh(lap)[0]) < 1e-12

    def test_row_sums_vanish(self):
        g, _ = sbm_generate(20, 2, 0.7, 0.2, seed=9)
        np.testing.assert_allclose(laplacian(g) @ np.ones(20), 0.0, atol=1e-12)

    def test_directed_graph_rejected(self, line3):
        with pytest.raises(ContractError):
            laplacian(line3)

    def test_degrees(self, triangle):
        np.testing.assert_array_equal(degrees(triangle), [2, 2, 2])


class TestHeatDiffusion:
    def test_time_zero(self, triangle):
        x0 = np.array([0.3, -1.0, 2.0])
        np.testing.assert_allclose(heat_diffusion(triangle, x0, 0.0), x0, atol=1e-12)

    def test_long_time_is_uniform(self, edge_graph):
        np.testing.assert_allclose(heat_diffusion(edge_graph, [1.0, 0.0], 50.0), [0.5, 0.5], atol=1e-12)

    def test_infinite_time_is_the_component_average(self, edge_graph):
        np.testing.assert_allclose(heat_diffusion(edge_graph, [1.0, 0.0], np.inf), [0.5, 0.5], atol=1e-12)
        split = graph_from_edges(3, [(0, 1, 1.0)], symmetric=True)
        np.testing.assert_allclose(heat_diffusion(split, [1.0, 0.0, 2.0], math.inf), [0.5, 0.5, 2.0], atol=1e-12)

    def test_infinite_time_operator(self, triangle):
        kernels = diffusion_operators(triangle, [0.0, np.inf])
        assert np.all(np.isfinite(kernels))
        np.testing.assert_allclose(kernels[1], np.full((3, 3), 1 / 3), atol=1e-12)

    def test_normalized_times(self, triangle, small_sbm):
        # the triangle Laplacian has eigenvalues 3, 3, 0
        e0 = np.eye(3)[0]
        kernels = diffusion_operators(triangle, [1.5, 6.0], normalized=True)
        for kernel, time in zip(kernels, (0.5, 2.0)):
            np.testing.assert_allclose(kernel @ e0, heat_diffusion(triangle, e0, time), atol=1e-12)
        lam_max = np.linalg.eigvalsh(to_dense(laplacian(small_sbm))).max()
        np.testing.assert_allclose(
            diffusion_operators(small_sbm, [2.0], normalized=True)[0],
            diffusion_operators(small_sbm, [2.0 / lam_max])[0],
            atol=1e-12,
        )

    def test_taylor_series(self, path3):
        lap = to_dense(laplacian(path3))
        x0 = np.array([1.0, 0.0, 0.0])
        expected = sum(
            np.linalg.matrix_power(-lap, k) @ x0 / math.factorial(k) for k in range(31)
        )
        np.testing.assert_allclose(heat_diffusion(path3, x0, 1.0), expected, atol=1e-8)

    def test_mass_conservation(self, rng):
        g = random_symmetric_graph(12, rng)
        x0 = rng.standard_normal(12)
        for time in (0.5, 3.0, 30.0):
            x = heat_diffusion(g, x0, time)
            assert abs(x.sum() - x0.sum()) <= 1e-9 * np.abs(x0).sum()

    def test_operators_match_single_runs(self, small_sbm):
        kernels = diffusion_operators(small_sbm, [0, 2, 5])
        e3 = np.eye(small_sbm.n)[3]
        for kernel, time in zip(kernels, (0, 2, 5)):
            np.testing.assert_allclose(kernel @ e3, heat_diffusion(small_sbm, e3, time), atol=1e-12)

    def test_errors(self, triangle, line3):
        with pytest.raises(ContractError):
            heat_diffusion(line3, np.ones(3), 1.0)
        with pytest.raises(ParameterError):
            heat_diffusion(triangle, np.ones(3), -1.0)
        with pytest.raises(ParameterError):
            heat_diffusion(triangle, np.ones(3), float("nan"))
        with pytest.raises(ParameterError):
            diffusion_operators(triangle, [1.0, -np.inf])
        with pytest.raises(ParameterError):
            heat_diffusion(triangle, np.ones(2), 1.0)


class TestPermutations:
    def test_identity(self, small_sbm):
        permuted = permute_graph(small_sbm, Permutation.identity(small_sbm.n))
        assert max_abs_difference(permuted.gso, small_sbm.gso) == 0.0

    def test_swap_on_symmetric_pair(self, edge_graph):
        permuted = permute_graph(edge_graph, Permutation.swap(2, 0, 1))
        np.testing.assert_array_equal(permuted.dense(), edge_graph.dense())

    def test_degree_multiset_preserved(self):
        g, _ = sbm_generate(10, 2, 0.8, 0.3, seed=4)
        permuted = permute_graph(g, Permutation.random(10, seed=1))
        np.testing.assert_array_equal(np.sort(degrees(permuted)), np.sort(degrees(g)))

    def test_matches_matrix_form(self, rng, small_sbm):
        p = Permutation.random(small_sbm.n, seed=2)
        pm = p.matrix()
        np.testing.assert_allclose(permute_graph(small_sbm, p).dense(), pm.T @ small_sbm.dense() @ pm)
        x = rng.standard_normal(small_sbm.n)
        np.testing.assert_allclose(permute_signal(x, p), pm.T @ x)

    def test_inverse_restores(self, rng, small_sbm):
        p = Permutation.random(small_sbm.n, seed=8)
        back = permute_graph(permute_graph(small_sbm, p), p.inverse())
        assert max_abs_difference(back.gso, small_sbm.gso) == 0.0
        x = rng.standard_normal((small_sbm.n, 3))
        np.testing.assert_array_equal(permute_signal(permute_signal(x, p), p.inverse()), x)

    def test_spectrum_preserved(self, rng):
        g = random_symmetric_graph(9, rng)
        permuted = permute_graph(g, Permutation.random(9, seed=3))
        np.testing.assert_allclose(
            np.linalg.eigvalsh(permuted.dense()), np.linalg.eigvalsh(g.dense()), atol=1e-9
        )

    def test_size_mismatch(self, small_sbm):
        with pytest.raises(ParameterError):
            permute_graph(small_sbm, Permutation.identity(3))
        with pytest.raises(ParameterError):
            permute_signal(np.ones(4), Permutation.identity(3))

    def test_not_a_bijection(self):
        with pytest.raises(ParameterError):
            Permutation(np.array([0, 0, 1]))
