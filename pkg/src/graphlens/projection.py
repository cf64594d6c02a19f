"""2-D projection of node embeddings for the global explorer view."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

TSNE_MAX_NODES = 5000


@dataclass
class ProjectionConfig:
    method: str = "pca"
    perplexity: float = 30.0
    iterations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("pca", "tsne"):
            raise ValueError("projection method must be 'pca' or 'tsne'")
        if self.perplexity <= 0:
            raise ValueError("perplexity must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def _pca_2d(embeddings: np.ndarray) -> np.ndarray:
    centered = embeddings - embeddings.mean(axis=0)
    if not centered.any():
        warnings.warn("degenerate embeddings (zero variance); returning zeros")
        return np.zeros((embeddings.shape[0], 2))
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = np.zeros((2, embeddings.shape[1]))
    take = min(2, vt.shape[0])
    components[:take] = vt[:take]
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return centered @ components.T


def _conditional_probs(distances_sq: np.ndarray, perplexity: float) -> np.ndarray:
    """Per-row Gaussian affinities with bandwidth tuned to the perplexity."""
    n = distances_sq.shape[0]
    target = np.log(perplexity)
    probs = np.zeros((n, n))
    for i in range(n):
        row = np.delete(distances_sq[i], i)
        lo, hi = 1e-20, 1e20
        beta = 1.0
        for _ in range(64):
            weights = np.exp(-row * beta)
            total = weights.sum()
            if total <= 0:
                entropy = 0.0
            else:
                p = weights / total
                entropy = -(p * np.log(np.maximum(p, 1e-300))).sum()
            if entropy > target:
                lo = beta
                beta = beta * 2 if hi >= 1e20 else (beta + hi) / 2
            else:
                hi = beta
                beta = (beta + lo) / 2
            if abs(entropy - target) < 1e-5:
                break
        weights = np.exp(-row * beta)
        p = weights / max(weights.sum(), 1e-300)
        probs[i, np.arange(n) != i] = p
    return probs


def _tsne_2d(embeddings: np.ndarray, cfg: ProjectionConfig) -> np.ndarray:
    n = embeddings.shape[0]
    if n > TSNE_MAX_NODES:
        raise ValueError(f"exact t-SNE is bounded to {TSNE_MAX_NODES} nodes")
    if cfg.perplexity >= (n - 1) / 3:
        raise ValueError("perplexity must be < (N-1)/3")
    sq_norms = (embeddings**2).sum(axis=1)
    d2 = np.maximum(sq_norms[:, None] + sq_norms[None, :] - 2 * embeddings @ embeddings.T, 0.0)
    cond = _conditional_probs(d2, cfg.perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    rng = np.random.default_rng(cfg.seed)
    coords = rng.normal(scale=1e-4, size=(n, 2))
    gains = np.ones_like(coords)
    velocity = np.zeros_like(coords)
    exaggeration_until = min(100, cfg.iterations // 4)
    learning_rate = max(n / 12.0, 50.0)
    for it in range(cfg.iterations):
        p_eff = p * 12.0 if it < exaggeration_until else p
        sq = (coords**2).sum(axis=1)
        num = 1.0 / (1.0 + np.maximum(sq[:, None] + sq[None, :] - 2 * coords @ coords.T, 0.0))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        pq = (p_eff - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ coords)
        momentum = 0.5 if it < 250 else 0.8
        sign_agree = np.sign(grad) == np.sign(velocity)
        gains = np.where(sign_agree, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - learning_rate * gains * grad
        coords = coords + velocity
        coords = coords - coords.mean(axis=0)
    return coords


def project_embeddings(embeddings: np.ndarray, cfg: ProjectionConfig | None = None) -> np.ndarray:
    """Project an N x d embedding matrix to N x 2 coordinates.

    pca: top-2 principal components with a deterministic sign convention
    (largest-magnitude loading positive). tsne: exact O(N^2) Barnes-free
    implementation, seeded.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] < 3:
        raise ValueError("need at least 3 embedding rows")
    if cfg is None:
        cfg = ProjectionConfig()
    if cfg.method == "pca":
        return _pca_2d(embeddings)
    return _tsne_2d(embeddings, cfg)
