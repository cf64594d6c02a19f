import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import graphlens as gl
from graphlens.models import InteractionMatrix
from graphlens.pagerank import (
    normalize_preference,
    onehot_preference,
    personalized_pagerank,
    uniform_preference,
)


def matrix_from_dense(dense):
    dense = np.asarray(dense, dtype=np.float64)
    dst, src = np.nonzero(dense)
    return InteractionMatrix(
        num_nodes=dense.shape[0], src=src, dst=dst, values=dense[dst, src]
    )


def dense_ppr_oracle(dense, pi, damping):
    """Independent fixed-point solve: (I - d M^T) r = (1 - d) pi."""
    n = dense.shape[0]
    return np.linalg.solve(np.eye(n) - damping * dense.T, (1.0 - damping) * pi)


def random_row_stochastic(rng, n):
    dense = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
    dense[np.arange(n), np.arange(n)] += 0.1  # ensure nonzero rows
    return dense / dense.sum(axis=1, keepdims=True)


class TestPersonalizedPagerank:
    def test_two_cycle_uniform(self):
        m = matrix_from_dense([[0.0, 1.0], [1.0, 0.0]])
        ranks = personalized_pagerank(m, uniform_preference(2))
        np.testing.assert_allclose(ranks.scores, [0.5, 0.5], atol=1e-12)

    def test_three_chain_matches_dense_oracle(self):
        dense = np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]])
        m = matrix_from_dense(dense)
        pi = uniform_preference(3)
        ranks = personalized_pagerank(m, pi, damping=0.85, tol=1e-12)
        np.testing.assert_allclose(ranks.scores, dense_ppr_oracle(dense, pi, 0.85), atol=1e-8)

    def test_onehot_lower_bound(self):
        rng = np.random.default_rng(0)
        dense = random_row_stochastic(rng, 8)
        ranks = personalized_pagerank(matrix_from_dense(dense), onehot_preference(8, 3))
        assert ranks.scores[3] >= (1.0 - 0.85) - 1e-12

    @given(st.integers(min_value=2, max_value=12), st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_scores_nonnegative_and_normalized(self, n, seed):
        rng = np.random.default_rng(seed)
        dense = random_row_stochastic(rng, n)
        pi = normalize_preference(rng.random(n) + 1e-3)
        ranks = personalized_pagerank(matrix_from_dense(dense), pi)
        assert ranks.scores.min() >= 0
        assert abs(ranks.scores.sum() - 1.0) < 1e-6

    def test_identical_input_identical_argsort(self):
        rng = np.random.default_rng(5)
        dense = random_row_stochastic(rng, 10)
        pi = normalize_preference(rng.random(10))
        a = personalized_pagerank(matrix_from_dense(dense), pi)
        b = personalized_pagerank(matrix_from_dense(dense), pi)
        np.testing.assert_array_equal(np.argsort(a.scores), np.argsort(b.scores))
        np.testing.assert_array_equal(a.scores, b.scores)

    def test_direction_flag_changes_flow(self):
        # node 0 sends all mass to node 1
        dense = np.array([[0.0, 1.0], [0.0, 1.0]])
        m = matrix_from_dense(dense)
        incoming = personalized_pagerank(m, uniform_preference(2), follow_incoming=True)
        outgoing = personalized_pagerank(m, uniform_preference(2), follow_incoming=False)
        np.testing.assert_allclose(incoming.scores, [0.075, 0.925], atol=1e-9)
        np.testing.assert_allclose(outgoing.scores, [0.5, 0.5], atol=1e-9)

    def test_non_stochastic_rows_rejected(self):
        bad = InteractionMatrix.__new__(InteractionMatrix)
        bad.num_nodes = 2
        bad.src = np.array([0, 1])
        bad.dst = np.array([0, 1])
        bad.values = np.array([0.7, 1.0])
        with pytest.raises(ValueError, match="stochastic"):
            personalized_pagerank(bad, uniform_preference(2))

    def test_invalid_preference_rejected(self):
        m = matrix_from_dense(np.eye(3))
        with pytest.raises(ValueError):
            personalized_pagerank(m, np.array([0.5, 0.5, 0.5]))
        with pytest.raises(ValueError):
            personalized_pagerank(m, np.array([-0.5, 1.0, 0.5]))

    def test_untrained_gcn_lpa_equals_classic_pagerank(self, citation_fixture):
        """Zero-initialized edge weights make the interaction matrix the
        row-normalized adjacency, so PPR equals classic PageRank."""
        g = citation_fixture
        spec = gl.default_spec("gcn_lpa", g.feature_dim, g.num_classes, hidden=8)
        model = gl.init_model(spec, g, seed=0)
        matrix = gl.extract_interaction_matrix(model, g)
        dense = gl.normalize_adjacency(g, "row").toarray()
        np.testing.assert_allclose(matrix.to_csr().toarray(), dense, atol=1e-12)
        pi = uniform_preference(g.num_nodes)
        ranks = personalized_pagerank(matrix, pi, tol=1e-12)
        np.testing.assert_allclose(ranks.scores, dense_ppr_oracle(dense, pi, 0.85), atol=1e-8)


class TestPreferences:
    def test_normalize_rejects_all_zero(self):
        with pytest.raises(ValueError):
            normalize_preference(np.zeros(4))

    def test_normalize_rejects_negative(self):
        with pytest.raises(ValueError):
            normalize_preference(np.array([0.5, -0.1]))

    def test_onehot_out_of_range(self):
        with pytest.raises(ValueError):
            onehot_preference(3, 5)

    def test_top_breaks_ties_toward_lower_id(self):
        from graphlens.pagerank import NodeRanks

        ranks = NodeRanks(scores=np.array([0.25, 0.25, 0.5]), residual=0.0, iterations=1)
        np.testing.assert_array_equal(ranks.top(2), [2, 0])
