import os

# deterministic BLAS reductions for the bit-reproducibility checks
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np
import pytest

import graphlens as gl


@pytest.fixture(scope="session")
def two_cliques():
    """Two 10-node cliques with a few bridge edges; features separable, so
    every model learns it, while bridge endpoints carry a stable rank signal."""
    spec = gl.SyntheticSpec(
        num_blocks=2, nodes_per_block=10, p_in=1.0, p_out=0.03,
        d_informative=4, d_noise=2, class_separation=2.0, seed=11,
    )
    return gl.generate_synthetic_graph(spec)


@pytest.fixture(scope="session")
def citation_fixture():
    """Homophilous 3-class graph with informative features, desk scale."""
    spec = gl.SyntheticSpec(
        num_blocks=3, nodes_per_block=30, p_in=0.25, p_out=0.02,
        d_informative=6, d_noise=4, class_separation=1.0, seed=7,
    )
    return gl.generate_synthetic_graph(spec)


@pytest.fixture()
def chain_graph():
    """Path a-b-c with distinct features."""
    features = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return gl.graphdata.make_graph(
        num_nodes=3,
        edge_pairs=np.array([[0, 1], [1, 2]]),
        features=features,
        labels=np.array([0, 1, 1]),
        masks=(np.array([1, 1, 0], bool), np.array([0, 0, 0], bool), np.array([0, 0, 1], bool)),
        num_classes=2,
    )


def write_bundle(path, *, meta, edges, features, labels, masks):
    path.mkdir(parents=True, exist_ok=True)
    (path / "meta").write_text(meta)
    (path / "edges").write_text(edges)
    (path / "features").write_text(features)
    (path / "labels").write_text(labels)
    (path / "masks").write_text(masks)
    return path


@pytest.fixture()
def fixture_bundle(tmp_path):
    """Hand-written 5-node bundle: edges 0-1, 1-2, 3-4 plus self-loop 2-2."""
    return write_bundle(
        tmp_path / "bundle",
        meta="num_nodes=5\nnum_classes=2\nfeature_dim=3\nfeature_names=a,b,c\n",
        edges="0 1\n1 2\n3 4\n2 2\n",
        features="\n".join(" ".join(str(v) for v in row) for row in
                           [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [0, 1, 1]]) + "\n",
        labels="0\n0\n1\n1\n0\n",
        masks="train\ntrain\nval\ntest\nnone\n",
    )
