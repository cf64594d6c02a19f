import pickle
import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))

from convert_planetoid import convert_content, convert_planetoid  # noqa: E402


@pytest.fixture()
def planetoid_dir(tmp_path):
    """Tiny 5-node planetoid-style distribution with a shuffled test index."""
    name = "toy"
    allx = sp.csr_matrix(np.array([[1.0, 0, 0, 0], [0, 2.0, 0, 0], [0, 0, 3.0, 0]]))
    tx = sp.csr_matrix(np.array([[4.0, 0, 0, 0], [0, 5.0, 0, 0]]))
    y = np.array([[1, 0], [0, 1]])          # train rows 0-1
    ally = np.array([[1, 0], [0, 1], [1, 0]])
    ty = np.array([[0, 1], [1, 0]])
    graph = {0: [1], 1: [0, 2], 2: [1, 3], 3: [2, 4], 4: [3]}
    for key, obj in [("x", allx[:2]), ("y", y), ("tx", tx), ("ty", ty),
                     ("allx", allx), ("ally", ally), ("graph", graph)]:
        with (tmp_path / f"ind.{name}.{key}").open("wb") as fh:
            pickle.dump(obj, fh)
    (tmp_path / f"ind.{name}.test.index").write_text("4\n3\n")  # shuffled on purpose
    return tmp_path


class TestPlanetoidFormat:
    def test_shapes_and_masks(self, planetoid_dir):
        graph = convert_planetoid(planetoid_dir, "toy", row_normalize=False)
        assert graph.num_nodes == 5
        assert graph.feature_dim == 4
        assert graph.num_classes == 2
        np.testing.assert_array_equal(np.flatnonzero(graph.train_mask), [0, 1])
        np.testing.assert_array_equal(np.flatnonzero(graph.test_mask), [3, 4])

    def test_test_rows_permuted_by_index_file(self, planetoid_dir):
        # test.index [4, 3] assigns tx row 0 to node 4 and tx row 1 to node 3
        graph = convert_planetoid(planetoid_dir, "toy", row_normalize=False)
        np.testing.assert_array_equal(graph.features[4], [4.0, 0, 0, 0])
        np.testing.assert_array_equal(graph.features[3], [0, 5.0, 0, 0])
        assert graph.labels[4] == 1  # ty row 0
        assert graph.labels[3] == 0  # ty row 1

    def test_row_normalization(self, planetoid_dir):
        graph = convert_planetoid(planetoid_dir, "toy", row_normalize=True)
        sums = graph.features.sum(axis=1)
        np.testing.assert_allclose(sums[sums > 0], 1.0)

    def test_edges_symmetrized(self, planetoid_dir):
        graph = convert_planetoid(planetoid_dir, "toy", row_normalize=False)
        assert graph.num_edges == 8  # chain of 4 undirected edges
        assert set(graph.neighbors(1)) == {0, 2}


@pytest.fixture()
def content_dir(tmp_path):
    (tmp_path / "toy.content").write_text(
        "p1 1 0 0 genetics\n"
        "p2 0 1 0 genetics\n"
        "p3 0 0 1 theory\n"
        "p4 1 1 0 theory\n"
    )
    (tmp_path / "toy.cites").write_text("p1 p2\np2 p3\np9 p1\n")  # p9 unknown, dropped
    return tmp_path


class TestContentFormat:
    def test_parses_and_drops_unknown_citations(self, content_dir):
        graph = convert_content(content_dir, "toy", row_normalize=False)
        assert graph.num_nodes == 4
        assert graph.num_edges == 4  # two undirected edges
        assert graph.num_classes == 2
        np.testing.assert_array_equal(graph.labels, [0, 0, 1, 1])

    def test_train_mask_stratified(self, content_dir):
        graph = convert_content(content_dir, "toy", row_normalize=False)
        train_labels = graph.labels[graph.train_mask]
        assert set(train_labels.tolist()) == {0, 1}
