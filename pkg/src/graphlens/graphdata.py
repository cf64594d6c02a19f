"""Graph container, on-disk bundles, synthetic generation, and neighborhood utilities."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

MASK_NAMES = ("train", "val", "test")


class GraphBundleError(ValueError):
    """An on-disk graph bundle is missing pieces or internally inconsistent."""


@dataclass(eq=False)
class Graph:
    """Undirected graph with dense node features, labels, and split masks.

    The adjacency is stored in compressed row form covering the symmetric
    closure of the declared edges; self-loops appear at most once per node.
    Instances are treated as immutable after construction.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.num_nodes <= 0:
            raise ValueError("graph must have at least one node")
        if self.features.shape[0] != self.num_nodes:
            raise ValueError(
                f"feature rows ({self.features.shape[0]}) != num_nodes ({self.num_nodes})"
            )
        if self.labels.shape[0] != self.num_nodes:
            raise ValueError(
                f"label count ({self.labels.shape[0]}) != num_nodes ({self.num_nodes})"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("label index outside [0, num_classes)")
        overlap = (
            (self.train_mask & self.val_mask)
            | (self.train_mask & self.test_mask)
            | (self.val_mask & self.test_mask)
        )
        if overlap.any():
            raise ValueError("train/val/test masks overlap")

    @property
    def num_edges(self) -> int:
        """Directed edge count after symmetric closure (self-loops count once)."""
        return int(self.indices.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def neighbors(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node] : self.indptr[node + 1]]

    def edge_array(self) -> np.ndarray:
        """All directed (src, dst) pairs as an (E, 2) array."""
        src = np.repeat(np.arange(self.num_nodes), np.diff(self.indptr))
        return np.stack([src, self.indices], axis=1)

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.num_edges, dtype=np.float64)
        return sp.csr_matrix(
            (data, self.indices, self.indptr), shape=(self.num_nodes, self.num_nodes)
        )


@dataclass
class SyntheticSpec:
    """Stochastic-block-model recipe for desk-scale benchmark graphs."""

    num_blocks: int
    nodes_per_block: int
    p_in: float
    p_out: float
    d_informative: int
    d_noise: int
    class_separation: float = 1.0
    imbalance_ratio: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_blocks < 1 or self.nodes_per_block < 1:
            raise ValueError("block counts must be positive")
        if not (0.0 <= self.p_in <= 1.0 and 0.0 <= self.p_out <= 1.0):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if self.d_informative < 1 or self.d_noise < 0:
            raise ValueError("feature dimensions must be positive")
        if self.class_separation < 0:
            raise ValueError("class_separation must be >= 0")
        if self.imbalance_ratio is not None and not (0.0 < self.imbalance_ratio <= 1.0):
            raise ValueError("imbalance_ratio must lie in (0, 1]")

    def block_sizes(self) -> list[int]:
        if self.imbalance_ratio is None:
            return [self.nodes_per_block] * self.num_blocks
        return [
            max(1, int(round(self.nodes_per_block * self.imbalance_ratio**k)))
            for k in range(self.num_blocks)
        ]


def _csr_from_pairs(pairs: np.ndarray, num_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric closure + dedup of an (E, 2) pair array, as (indptr, indices)."""
    if pairs.size == 0:
        return np.zeros(num_nodes + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    pairs = pairs.astype(np.int64, copy=False)
    both = np.concatenate([pairs, pairs[:, ::-1]], axis=0)
    keys = np.unique(both[:, 0] * num_nodes + both[:, 1])
    src = keys // num_nodes
    dst = keys % num_nodes
    counts = np.bincount(src, minlength=num_nodes)
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, dst


def make_graph(
    num_nodes: int,
    edge_pairs: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    masks: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    num_classes: int | None = None,
    feature_names: tuple[str, ...] | None = None,
) -> Graph:
    """Build a validated Graph from raw arrays, applying symmetric closure."""
    edge_pairs = np.asarray(edge_pairs, dtype=np.int64).reshape(-1, 2)
    if edge_pairs.size and (edge_pairs.min() < 0 or edge_pairs.max() >= num_nodes):
        raise ValueError("edge endpoint out of range")
    indptr, indices = _csr_from_pairs(edge_pairs, num_nodes)
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 1
    if masks is None:
        train = np.ones(num_nodes, dtype=bool)
        val = np.zeros(num_nodes, dtype=bool)
        test = np.zeros(num_nodes, dtype=bool)
    else:
        train, val, test = (np.asarray(m, dtype=bool) for m in masks)
    return Graph(
        num_nodes=num_nodes,
        indptr=indptr,
        indices=indices,
        features=np.asarray(features, dtype=np.float64),
        labels=labels,
        train_mask=train,
        val_mask=val,
        test_mask=test,
        num_classes=num_classes,
        feature_names=feature_names,
    )


def _read_meta(path: Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise GraphBundleError(f"malformed meta line: {line!r}")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def load_graph_bundle(path: str | Path) -> Graph:
    """Load a graph bundle directory (meta, edges, features, labels, masks)."""
    root = Path(path)
    if not root.is_dir():
        raise GraphBundleError(f"bundle directory not found: {root}")
    files = {}
    for name in ("meta", "edges", "features", "labels", "masks"):
        p = root / name
        if not p.exists():
            raise GraphBundleError(f"missing {name} file: {p}")
        files[name] = p

    meta = _read_meta(files["meta"])
    try:
        num_nodes = int(meta["num_nodes"])
        num_classes = int(meta["num_classes"])
        feature_dim = int(meta["feature_dim"])
    except KeyError as exc:
        raise GraphBundleError(f"meta missing key: {exc}") from exc
    feature_names = None
    if "feature_names" in meta and meta["feature_names"]:
        feature_names = tuple(meta["feature_names"].split(","))
        if len(feature_names) != feature_dim:
            raise GraphBundleError("feature_names length != feature_dim")

    edge_text = files["edges"].read_text().split()
    if len(edge_text) % 2 != 0:
        raise GraphBundleError("edges file must contain an even number of integers")
    try:
        edge_pairs = np.array([int(tok) for tok in edge_text], dtype=np.int64).reshape(-1, 2)
    except ValueError as exc:
        raise GraphBundleError(f"malformed edge endpoint: {exc}") from exc
    if edge_pairs.size and (edge_pairs.min() < 0 or edge_pairs.max() >= num_nodes):
        raise GraphBundleError("malformed edge endpoint: node id out of range")

    features = np.loadtxt(files["features"], dtype=np.float64, ndmin=2)
    if features.shape[0] != num_nodes:
        raise GraphBundleError(
            f"features row count {features.shape[0]} != num_nodes {num_nodes}"
        )
    if features.shape[1] != feature_dim:
        raise GraphBundleError(
            f"features column count {features.shape[1]} != feature_dim {feature_dim}"
        )

    labels = np.loadtxt(files["labels"], dtype=np.int64, ndmin=1)
    if labels.shape[0] != num_nodes:
        raise GraphBundleError(f"labels row count {labels.shape[0]} != num_nodes {num_nodes}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise GraphBundleError("label index >= num_classes")

    mask_rows = [ln.strip() for ln in files["masks"].read_text().splitlines() if ln.strip()]
    if len(mask_rows) != num_nodes:
        raise GraphBundleError(f"masks row count {len(mask_rows)} != num_nodes {num_nodes}")
    masks = {name: np.zeros(num_nodes, dtype=bool) for name in MASK_NAMES}
    for i, row in enumerate(mask_rows):
        if row == "none":
            continue
        if row not in masks:
            raise GraphBundleError(f"unknown mask value {row!r} at line {i + 1}")
        masks[row][i] = True

    return make_graph(
        num_nodes=num_nodes,
        edge_pairs=edge_pairs,
        features=features,
        labels=labels,
        masks=(masks["train"], masks["val"], masks["test"]),
        num_classes=num_classes,
        feature_names=feature_names,
    )


def save_graph_bundle(graph: Graph, path: str | Path) -> Path:
    """Write a graph as a bundle directory; inverse of load_graph_bundle."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta_lines = [
        f"num_nodes={graph.num_nodes}",
        f"num_classes={graph.num_classes}",
        f"feature_dim={graph.feature_dim}",
    ]
    if graph.feature_names:
        meta_lines.append("feature_names=" + ",".join(graph.feature_names))
    (root / "meta").write_text("\n".join(meta_lines) + "\n")

    pairs = graph.edge_array()
    canonical = pairs[pairs[:, 0] <= pairs[:, 1]]
    with (root / "edges").open("w") as fh:
        for u, v in canonical:
            fh.write(f"{u} {v}\n")

    np.savetxt(root / "features", graph.features, fmt="%.17g")
    np.savetxt(root / "labels", graph.labels, fmt="%d")
    with (root / "masks").open("w") as fh:
        for i in range(graph.num_nodes):
            if graph.train_mask[i]:
                fh.write("train\n")
            elif graph.val_mask[i]:
                fh.write("val\n")
            elif graph.test_mask[i]:
                fh.write("test\n")
            else:
                fh.write("none\n")
    return root


def generate_synthetic_graph(spec: SyntheticSpec) -> Graph:
    """Sample a stochastic-block-model graph with class-informative features.

    Nodes in block c share a feature centroid scaled by ``class_separation``
    on the informative dimensions; noise dimensions are standard normal.
    Masks are a stratified 60/20/20 split. Bit-reproducible for a fixed seed.
    """
    sizes = spec.block_sizes()
    num_nodes = sum(sizes)
    if num_nodes == 0:
        raise ValueError("degenerate spec: zero nodes")
    rng = np.random.default_rng(spec.seed)
    labels = np.repeat(np.arange(spec.num_blocks), sizes)
    starts = np.cumsum([0] + sizes)

    pair_chunks: list[np.ndarray] = []
    for a in range(spec.num_blocks):
        for b in range(a, spec.num_blocks):
            p = spec.p_in if a == b else spec.p_out
            ia = np.arange(starts[a], starts[a + 1])
            ib = np.arange(starts[b], starts[b + 1])
            if a == b:
                uu, vv = np.triu_indices(len(ia), k=1)
                uu, vv = ia[uu], ia[vv]
            else:
                uu = np.repeat(ia, len(ib))
                vv = np.tile(ib, len(ia))
            keep = rng.random(len(uu)) < p
            if keep.any():
                pair_chunks.append(np.stack([uu[keep], vv[keep]], axis=1))
    pairs = (
        np.concatenate(pair_chunks, axis=0)
        if pair_chunks
        else np.zeros((0, 2), dtype=np.int64)
    )

    d = spec.d_informative + spec.d_noise
    centroids = rng.normal(size=(spec.num_blocks, spec.d_informative)) * spec.class_separation
    features = rng.normal(size=(num_nodes, d))
    features[:, : spec.d_informative] += centroids[labels]

    train = np.zeros(num_nodes, dtype=bool)
    val = np.zeros(num_nodes, dtype=bool)
    test = np.zeros(num_nodes, dtype=bool)
    for c in range(spec.num_blocks):
        idx = rng.permutation(np.arange(starts[c], starts[c + 1]))
        n_train = max(1, int(round(0.6 * len(idx))))
        n_val = int(round(0.2 * len(idx)))
        train[idx[:n_train]] = True
        val[idx[n_train : n_train + n_val]] = True
        test[idx[n_train + n_val :]] = True

    names = tuple(
        [f"informative_{i}" for i in range(spec.d_informative)]
        + [f"noise_{i}" for i in range(spec.d_noise)]
    )
    return make_graph(
        num_nodes=num_nodes,
        edge_pairs=pairs,
        features=features,
        labels=labels,
        masks=(train, val, test),
        num_classes=spec.num_blocks,
        feature_names=names,
    )


def normalize_adjacency(graph: Graph, mode: str = "sym") -> sp.csr_matrix:
    """Self-loop-augmented normalized adjacency.

    sym: D^{-1/2} (A+I) D^{-1/2}; row: D^{-1} (A+I). The added self-loop
    guarantees every degree is positive.
    """
    a = graph.adjacency() + sp.identity(graph.num_nodes, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    if mode == "sym":
        inv_sqrt = 1.0 / np.sqrt(deg)
        scale = sp.diags(inv_sqrt)
        return (scale @ a @ scale).tocsr()
    if mode == "row":
        return (sp.diags(1.0 / deg) @ a).tocsr()
    raise ValueError(f"unknown normalization mode {mode!r}")


def make_reference_graph(graph: Graph) -> Graph:
    """Neutral structure reference: same nodes/features, self-loop edges only."""
    n = graph.num_nodes
    return Graph(
        num_nodes=n,
        indptr=np.arange(n + 1, dtype=np.int64),
        indices=np.arange(n, dtype=np.int64),
        features=graph.features,
        labels=graph.labels,
        train_mask=graph.train_mask,
        val_mask=graph.val_mask,
        test_mask=graph.test_mask,
        num_classes=graph.num_classes,
        feature_names=graph.feature_names,
    )


def make_reference_features(graph: Graph, mode: str = "ones", value: float | None = None) -> np.ndarray:
    """Neutral feature reference matrix with the same shape as graph.features."""
    shape = graph.features.shape
    if mode == "ones":
        return np.ones(shape, dtype=np.float64)
    if mode == "mean":
        return np.tile(graph.features.mean(axis=0), (shape[0], 1))
    if mode == "constant":
        if value is None:
            raise ValueError("constant mode requires a value")
        return np.full(shape, float(value))
    raise ValueError(f"unknown reference feature mode {mode!r}")


@dataclass
class KhopSubgraph:
    """BFS ball of radius k: member nodes, their hop distance, induced edges."""

    root: int
    k: int
    nodes: np.ndarray
    hops: np.ndarray
    edges: np.ndarray  # (E, 2) directed pairs induced on `nodes`

    def nodes_at_hop(self, h: int) -> np.ndarray:
        return self.nodes[self.hops == h]


def khop_subgraph(graph: Graph, root: int, k: int) -> KhopSubgraph:
    """Nodes within k hops of root, with per-node hop distance and induced edges."""
    if not (0 <= root < graph.num_nodes):
        raise ValueError(f"root {root} out of range")
    if k < 0:
        raise ValueError("k must be >= 0")
    dist = np.full(graph.num_nodes, -1, dtype=np.int64)
    dist[root] = 0
    frontier = [root]
    for hop in range(1, k + 1):
        nxt: list[int] = []
        for u in frontier:
            for v in graph.neighbors(u):
                if dist[v] < 0:
                    dist[v] = hop
                    nxt.append(int(v))
        frontier = nxt
        if not frontier:
            break
    nodes = np.flatnonzero(dist >= 0)
    order = np.lexsort((nodes, dist[nodes]))
    nodes = nodes[order]
    member = np.zeros(graph.num_nodes, dtype=bool)
    member[nodes] = True
    pairs = graph.edge_array()
    keep = member[pairs[:, 0]] & member[pairs[:, 1]]
    return KhopSubgraph(root=root, k=k, nodes=nodes, hops=dist[nodes], edges=pairs[keep])


def oversample_minority(labels: np.ndarray, train_indices: np.ndarray, seed: int = 0) -> np.ndarray:
    """Duplicate minority-class training indices until per-class counts match the majority."""
    train_indices = np.asarray(train_indices, dtype=np.int64)
    if train_indices.size == 0:
        raise ValueError("empty training set")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    present = np.unique(labels[train_indices])
    counts = {int(c): int(np.sum(labels[train_indices] == c)) for c in present}
    majority = max(counts.values())
    extra: list[np.ndarray] = []
    for c in sorted(counts):
        short = majority - counts[c]
        if short > 0:
            pool = train_indices[labels[train_indices] == c]
            extra.append(rng.choice(pool, size=short, replace=True))
    if not extra:
        return train_indices.copy()
    return np.concatenate([train_indices] + extra)
