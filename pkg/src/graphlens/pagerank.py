"""Personalized PageRank over a row-stochastic interaction matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import InteractionMatrix


@dataclass
class NodeRanks:
    scores: np.ndarray
    residual: float
    iterations: int

    def top(self, k: int) -> np.ndarray:
        """Top-k node ids by score, ties broken toward lower ids."""
        order = np.lexsort((np.arange(self.scores.size), -self.scores))
        return order[:k]


def uniform_preference(num_nodes: int) -> np.ndarray:
    return np.full(num_nodes, 1.0 / num_nodes)


def onehot_preference(num_nodes: int, node: int) -> np.ndarray:
    if not (0 <= node < num_nodes):
        raise ValueError(f"node {node} out of range")
    pi = np.zeros(num_nodes)
    pi[node] = 1.0
    return pi


def normalize_preference(weights: np.ndarray) -> np.ndarray:
    """Scale nonnegative weights into a valid preference vector."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.min() < 0:
        raise ValueError("preference weights must be nonnegative")
    total = weights.sum()
    if total <= 0:
        raise ValueError("preference weights must not all be zero")
    return weights / total


def _validate_preference(pi: np.ndarray, n: int) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (n,):
        raise ValueError(f"preference vector must have length {n}")
    if pi.min() < 0:
        raise ValueError("preference vector must be nonnegative")
    if abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError("preference vector must sum to 1")
    return pi


def personalized_pagerank(
    matrix: InteractionMatrix,
    preference: np.ndarray,
    damping: float = 0.85,
    tol: float = 1e-9,
    max_iter: int = 200,
    follow_incoming: bool = True,
) -> NodeRanks:
    """Power iteration for r = (1-d) pi + d M^T r.

    With ``follow_incoming`` (the default) rank flows along incoming
    attention: nodes that many others attend to score high. Flipping it
    ranks by outgoing influence instead (r = (1-d) pi + d M r).
    """
    if not (0.0 <= damping < 1.0):
        raise ValueError("damping must lie in [0, 1)")
    n = matrix.num_nodes
    pi = _validate_preference(preference, n)
    csr = matrix.to_csr()
    row_sums = np.asarray(csr.sum(axis=1)).ravel()
    if np.abs(row_sums - 1.0).max() > 1e-6:
        raise ValueError("interaction matrix rows must be stochastic")
    op = csr.T.tocsr() if follow_incoming else csr
    ranks = pi.copy()
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        updated = (1.0 - damping) * pi + damping * (op @ ranks)
        residual = float(np.abs(updated - ranks).sum())
        ranks = updated
        if residual < tol:
            break
    return NodeRanks(scores=ranks, residual=residual, iterations=iterations)
