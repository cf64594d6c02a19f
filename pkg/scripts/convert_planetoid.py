#!/usr/bin/env python3
"""Convert a citation-graph distribution into a graphlens bundle directory.

Two input layouts are supported:

  planetoid   the ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index} pickles;
              reproduces the standard 140/500/1000 split exactly.
  content     <name>.content + <name>.cites text files; masks are synthesized
              (20 per class train, next 500 val, last 1000 test), so accuracy
              targets tied to the standard split are only approximate.

Features are row-normalized by default, matching the preprocessing of the
common GNN training pipelines these accuracy numbers come from.

Usage:
  python scripts/convert_planetoid.py --input data/cora_raw --name cora --out tests/data/cora
"""
from __future__ import annotations

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from graphlens.graphdata import make_graph, save_graph_bundle  # noqa: E402


def _load_pickle(path: Path):
    with path.open("rb") as fh:
        return pickle.load(fh, encoding="latin1")


def convert_planetoid(input_dir: Path, name: str, row_normalize: bool):
    parts = {}
    for key in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        parts[key] = _load_pickle(input_dir / f"ind.{name}.{key}")
    test_idx = np.loadtxt(input_dir / f"ind.{name}.test.index", dtype=np.int64)
    test_range = np.sort(test_idx)

    features = sp.vstack((parts["allx"], parts["tx"])).tolil()
    features[test_idx, :] = features[test_range, :]
    features = np.asarray(features.todense(), dtype=np.float64)
    labels_onehot = np.vstack((parts["ally"], parts["ty"]))
    labels_onehot[test_idx, :] = labels_onehot[test_range, :]
    labels = labels_onehot.argmax(axis=1)

    num_nodes = features.shape[0]
    pairs = []
    for node, neighbors in parts["graph"].items():
        for other in neighbors:
            if node != other:
                pairs.append((node, other))
    pairs = np.array(sorted(set(tuple(sorted(p)) for p in pairs)), dtype=np.int64)

    n_train = parts["y"].shape[0]
    train = np.zeros(num_nodes, bool)
    val = np.zeros(num_nodes, bool)
    test = np.zeros(num_nodes, bool)
    train[:n_train] = True
    val[n_train : n_train + 500] = True
    test[test_range] = True
    val &= ~test  # tiny graphs: the 500-row val window may reach the test block

    if row_normalize:
        sums = features.sum(axis=1, keepdims=True)
        sums[sums == 0] = 1.0
        features = features / sums
    return make_graph(num_nodes, pairs, features, labels, (train, val, test))


def convert_content(input_dir: Path, name: str, row_normalize: bool):
    content = (input_dir / f"{name}.content").read_text().splitlines()
    ids, rows, label_names = [], [], []
    for line in content:
        fields = line.split()
        ids.append(fields[0])
        rows.append([float(v) for v in fields[1:-1]])
        label_names.append(fields[-1])
    id_map = {pid: i for i, pid in enumerate(ids)}
    classes = sorted(set(label_names))
    labels = np.array([classes.index(c) for c in label_names])
    features = np.array(rows, dtype=np.float64)

    pairs = []
    for line in (input_dir / f"{name}.cites").read_text().splitlines():
        a, b = line.split()
        if a in id_map and b in id_map and a != b:
            pairs.append(tuple(sorted((id_map[a], id_map[b]))))
    pairs = np.array(sorted(set(pairs)), dtype=np.int64)

    num_nodes = len(ids)
    rng = np.random.default_rng(0)
    train = np.zeros(num_nodes, bool)
    for c in range(len(classes)):
        members = rng.permutation(np.flatnonzero(labels == c))
        train[members[:20]] = True
    rest = rng.permutation(np.flatnonzero(~train))
    val = np.zeros(num_nodes, bool)
    test = np.zeros(num_nodes, bool)
    val[rest[:500]] = True
    test[rest[500:1500]] = True

    if row_normalize:
        sums = features.sum(axis=1, keepdims=True)
        sums[sums == 0] = 1.0
        features = features / sums
    return make_graph(num_nodes, pairs, features, labels, (train, val, test))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", required=True, help="directory with the raw distribution")
    parser.add_argument("--name", default="cora", help="dataset name (cora/citeseer/pubmed)")
    parser.add_argument("--format", choices=("planetoid", "content"), default="planetoid")
    parser.add_argument("--out", required=True, help="bundle directory to write")
    parser.add_argument("--no-row-normalize", action="store_true",
                        help="keep raw binary bag-of-words features")
    args = parser.parse_args()

    convert = convert_planetoid if args.format == "planetoid" else convert_content
    graph = convert(Path(args.input), args.name, not args.no_row_normalize)
    out = save_graph_bundle(graph, args.out)
    print(f"wrote bundle: {out}")
    print(f"  nodes={graph.num_nodes} directed_edges={graph.num_edges} "
          f"features={graph.feature_dim} classes={graph.num_classes}")
    print(f"  train={int(graph.train_mask.sum())} val={int(graph.val_mask.sum())} "
          f"test={int(graph.test_mask.sum())}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
