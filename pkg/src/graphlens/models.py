"""Forward semantics, initialization, and supervised training for the model zoo.

Teachers: gcn, gat, appnp, graphsage. Students: mlp, sgat, gcn_lpa. The two
graph-based students expose a row-stochastic interaction matrix over the
edge pattern (edges plus self-loops).
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import OptimizerState, Tape, Tensor, adam_step, backward
from .graphdata import Graph, normalize_adjacency, oversample_minority

TEACHER_ARCHS = ("gcn", "gat", "appnp", "graphsage")
STUDENT_ARCHS = ("mlp", "sgat", "gcn_lpa")
ARCHS = TEACHER_ARCHS + STUDENT_ARCHS

LPA_CLAMP = 1e-12


class TrainingDiverged(RuntimeError):
    pass


class NoInteractionStructure(ValueError):
    """Raised when a model has no extractable node-interaction matrix."""


@dataclass
class ModelSpec:
    arch: str
    layer_sizes: tuple[int, ...]
    dropout: float = 0.5
    appnp_steps: int = 10
    appnp_teleport: float = 0.1
    gat_heads: int = 8
    attention_slope: float = 0.2
    lpa_iterations: int = 5
    lpa_weight: float = 1.0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if len(self.layer_sizes) < 2 or any(s <= 0 for s in self.layer_sizes):
            raise ValueError("layer_sizes must be >= 2 positive entries")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must lie in [0, 1)")
        if self.arch == "gat":
            for size in self.layer_sizes[1:-1]:
                if size % self.gat_heads != 0:
                    raise ValueError("gat hidden sizes must be divisible by the head count")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1


def default_spec(arch: str, input_dim: int, num_classes: int, hidden: int = 64, **kw) -> ModelSpec:
    return ModelSpec(arch=arch, layer_sizes=(input_dim, hidden, num_classes), **kw)


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    class_weights: np.ndarray | None = None
    oversample: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be > 0")


@dataclass(eq=False)
class TrainedModel:
    spec: ModelSpec
    params: dict[str, Tensor]
    loss_log: list[float] = field(default_factory=list)
    seed: int = 0

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.params.items()}

    def copy(self) -> "TrainedModel":
        return TrainedModel(
            spec=replace(self.spec),
            params={k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.params.items()},
            loss_log=list(self.loss_log),
            seed=self.seed,
        )


@dataclass(eq=False)
class InteractionMatrix:
    """Row-stochastic node-interaction weights on the edge pattern.

    Entry (dst, src) holds the weight node ``dst`` assigns to in-neighbor
    ``src``; each node's incident weights sum to one.
    """

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    values: np.ndarray
    source_model: str = ""

    def __post_init__(self):
        if self.values.min() < 0:
            raise ValueError("interaction weights must be nonnegative")
        sums = np.bincount(self.dst, weights=self.values, minlength=self.num_nodes)
        if np.abs(sums - 1.0).max() > 1e-9:
            raise ValueError("interaction matrix rows must sum to 1")

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, (self.dst, self.src)), shape=(self.num_nodes, self.num_nodes)
        )


# ---------------------------------------------------------------------------
# cached per-graph operators
# ---------------------------------------------------------------------------

class _GraphOps:
    def __init__(self, graph: Graph):
        n = graph.num_nodes
        self.n = n
        self.a_sym = normalize_adjacency(graph, "sym")
        pairs = graph.edge_array()
        loops = np.stack([np.arange(n), np.arange(n)], axis=1)
        both = np.concatenate([pairs, loops], axis=0).astype(np.int64)
        keys = np.unique(both[:, 0] * n + both[:, 1])
        src = keys // n
        dst = keys % n
        order = np.lexsort((src, dst))
        self.pattern_src = src[order]
        self.pattern_dst = dst[order]
        # neighbor mean over stored edges only (no implicit self-loop)
        adj = graph.adjacency()
        deg = np.asarray(adj.sum(axis=1)).ravel()
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
        self.neighbor_mean = (sp.diags(inv) @ adj).tocsr()

    @property
    def pattern_size(self) -> int:
        return self.pattern_src.shape[0]


_GRAPH_OPS: "weakref.WeakKeyDictionary[Graph, _GraphOps]" = weakref.WeakKeyDictionary()


def graph_ops(graph: Graph) -> _GraphOps:
    ops = _GRAPH_OPS.get(graph)
    if ops is None:
        ops = _GraphOps(graph)
        _GRAPH_OPS[graph] = ops
    return ops


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def init_model(spec: ModelSpec, graph: Graph, seed: int = 0) -> TrainedModel:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    if spec.input_dim != graph.feature_dim:
        raise ValueError(
            f"spec input dim {spec.input_dim} != graph feature dim {graph.feature_dim}"
        )
    if spec.num_classes != graph.num_classes:
        raise ValueError(
            f"spec output dim {spec.num_classes} != graph classes {graph.num_classes}"
        )
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}

    def dense(name: str, fan_in: int, fan_out: int):
        params[f"{name}.weight"] = ad.parameter(ad.glorot_uniform(rng, fan_in, fan_out, (fan_in, fan_out)))
        params[f"{name}.bias"] = ad.parameter(np.zeros(fan_out))

    sizes = spec.layer_sizes
    if spec.arch in ("mlp", "gcn", "appnp", "gcn_lpa"):
        for l in range(spec.num_layers):
            dense(f"layer{l}", sizes[l], sizes[l + 1])
    elif spec.arch == "graphsage":
        for l in range(spec.num_layers):
            dense(f"layer{l}", 2 * sizes[l], sizes[l + 1])
    elif spec.arch == "gat":
        for l in range(spec.num_layers):
            heads = spec.gat_heads if l < spec.num_layers - 1 else 1
            head_dim = sizes[l + 1] // heads
            params[f"layer{l}.weight"] = ad.parameter(
                ad.glorot_uniform(rng, sizes[l], heads * head_dim, (sizes[l], heads * head_dim))
            )
            params[f"layer{l}.att_self"] = ad.parameter(
                ad.glorot_uniform(rng, head_dim, 1, (heads, head_dim))
            )
            params[f"layer{l}.att_neigh"] = ad.parameter(
                ad.glorot_uniform(rng, head_dim, 1, (heads, head_dim))
            )
            params[f"layer{l}.bias"] = ad.parameter(np.zeros(sizes[l + 1] if l < spec.num_layers - 1 else sizes[-1]))
    elif spec.arch == "sgat":
        for l in range(spec.num_layers):
            dense(f"layer{l}", sizes[l], sizes[l + 1])
        params["att_self"] = ad.parameter(ad.glorot_uniform(rng, sizes[1], 1, (sizes[1],)))
        params["att_neigh"] = ad.parameter(ad.glorot_uniform(rng, sizes[1], 1, (sizes[1],)))
    if spec.arch == "gcn_lpa":
        params["edge_weight"] = ad.parameter(np.zeros(graph_ops(graph).pattern_size))
    return TrainedModel(spec=spec, params=params, seed=seed)


# ---------------------------------------------------------------------------
# forward semantics
# ---------------------------------------------------------------------------

def _maybe_dropout(h, spec: ModelSpec, training: bool, rng) -> Tensor:
    if training and spec.dropout > 0.0:
        return ad.dropout(h, spec.dropout, rng)
    return h if isinstance(h, Tensor) else Tensor(h)


def _affine(h, w: Tensor, b: Tensor) -> Tensor:
    return ad.add(ad.matmul(h, w), b)


def _forward_full(model: TrainedModel, graph: Graph, features=None, training: bool = False, rng=None):
    """Returns (logits, hidden, extras). hidden = input to the final affine map."""
    spec = model.spec
    p = model.params
    ops = graph_ops(graph)
    x = Tensor(graph.features if features is None else np.asarray(features, dtype=np.float64))
    if x.data.shape[1] != spec.input_dim:
        raise ValueError("feature dim mismatch")
    act = ad.elu if spec.arch in ("gat", "sgat") else ad.relu
    extras: dict[str, Tensor] = {}
    last = spec.num_layers - 1

    if spec.arch == "mlp":
        h = x
        for l in range(spec.num_layers):
            h = _maybe_dropout(h, spec, training, rng)
            hidden = h
            h = _affine(h, p[f"layer{l}.weight"], p[f"layer{l}.bias"])
            if l < last:
                h = act(h)
                hidden = h
        return h, hidden, extras

    if spec.arch == "gcn":
        h = x
        for l in range(spec.num_layers):
            h = _maybe_dropout(h, spec, training, rng)
            hidden = h
            h = ad.add(ad.spmm(ops.a_sym, ad.matmul(h, p[f"layer{l}.weight"])), p[f"layer{l}.bias"])
            if l < last:
                h = act(h)
                hidden = h
        return h, hidden, extras

    if spec.arch == "appnp":
        h = x
        for l in range(spec.num_layers):
            h = _maybe_dropout(h, spec, training, rng)
            hidden = h
            h = _affine(h, p[f"layer{l}.weight"], p[f"layer{l}.bias"])
            if l < last:
                h = act(h)
                hidden = h
        z = h
        alpha = spec.appnp_teleport
        for _ in range(spec.appnp_steps):
            z = ad.add(ad.scale(ad.spmm(ops.a_sym, z), 1.0 - alpha), ad.scale(h, alpha))
        return z, hidden, extras

    if spec.arch == "graphsage":
        h = x
        for l in range(spec.num_layers):
            h = _maybe_dropout(h, spec, training, rng)
            hidden = h
            neigh = ad.spmm(ops.neighbor_mean, h)
            h = _affine(ad.concat([h, neigh], axis=1), p[f"layer{l}.weight"], p[f"layer{l}.bias"])
            if l < last:
                h = act(h)
                hidden = h
        return h, hidden, extras

    src, dst = ops.pattern_src, ops.pattern_dst

    if spec.arch == "gat":
        h = x
        for l in range(spec.num_layers):
            heads = spec.gat_heads if l < last else 1
            head_dim = spec.layer_sizes[l + 1] // heads
            h = _maybe_dropout(h, spec, training, rng)
            hidden = h
            z = ad.reshape(ad.matmul(h, p[f"layer{l}.weight"]), (ops.n, heads, head_dim))
            s_self = ad.reduce_sum(ad.mul(z, ad.reshape(p[f"layer{l}.att_self"], (1, heads, head_dim))), axis=2)
            s_neigh = ad.reduce_sum(ad.mul(z, ad.reshape(p[f"layer{l}.att_neigh"], (1, heads, head_dim))), axis=2)
            scores = ad.leaky_relu(
                ad.add(ad.gather_rows(s_self, dst), ad.gather_rows(s_neigh, src)),
                spec.attention_slope,
            )
            att = ad.segment_softmax(scores, dst, ops.n)
            mixed = ad.edge_aggregate(att, z, src, dst, ops.n)
            if l < last:
                h = ad.reshape(mixed, (ops.n, heads * head_dim))
            else:
                h = ad.reduce_mean(mixed, axis=1)
            h = ad.add(h, p[f"layer{l}.bias"])
            if l < last:
                h = act(h)
                hidden = h
        return h, hidden, extras

    if spec.arch == "sgat":
        xd = _maybe_dropout(x, spec, training, rng)
        z1 = ad.matmul(xd, p["layer0.weight"])
        s_self = ad.reduce_sum(ad.mul(z1, p["att_self"]), axis=1)
        s_neigh = ad.reduce_sum(ad.mul(z1, p["att_neigh"]), axis=1)
        scores = ad.leaky_relu(
            ad.add(ad.gather_rows(s_self, dst), ad.gather_rows(s_neigh, src)),
            spec.attention_slope,
        )
        att = ad.segment_softmax(scores, dst, ops.n)
        extras["edge_alpha"] = att
        h = ad.add(ad.edge_aggregate(att, z1, src, dst, ops.n), p["layer0.bias"])
        hidden = xd
        if last > 0:
            h = act(h)
            hidden = h
        for l in range(1, spec.num_layers):
            h = _maybe_dropout(h, spec, training, rng)
            hidden = h
            h = ad.add(
                ad.edge_aggregate(att, ad.matmul(h, p[f"layer{l}.weight"]), src, dst, ops.n),
                p[f"layer{l}.bias"],
            )
            if l < last:
                h = act(h)
                hidden = h
        return h, hidden, extras

    if spec.arch == "gcn_lpa":
        att = ad.segment_softmax(p["edge_weight"], dst, ops.n)
        extras["edge_alpha"] = att
        h = x
        for l in range(spec.num_layers):
            h = _maybe_dropout(h, spec, training, rng)
            hidden = h
            h = ad.add(
                ad.edge_aggregate(att, ad.matmul(h, p[f"layer{l}.weight"]), src, dst, ops.n),
                p[f"layer{l}.bias"],
            )
            if l < last:
                h = act(h)
                hidden = h
        return h, hidden, extras

    raise ValueError(f"unknown architecture {spec.arch!r}")


def forward(model: TrainedModel, graph: Graph, features=None, training: bool = False, rng=None) -> Tensor:
    logits, _, _ = _forward_full(model, graph, features, training, rng)
    return logits


def predict_logits(model: TrainedModel, graph: Graph, features=None) -> np.ndarray:
    return forward(model, graph, features).data


def predict_proba(model: TrainedModel, graph: Graph, features=None) -> np.ndarray:
    return ad._softmax_rows(predict_logits(model, graph, features))


def predict_labels(model: TrainedModel, graph: Graph, features=None) -> np.ndarray:
    return predict_logits(model, graph, features).argmax(axis=1)


def node_embeddings(model: TrainedModel, graph: Graph, features=None) -> np.ndarray:
    """Pre-classifier representations (input to the final affine map), eval mode."""
    _, hidden, _ = _forward_full(model, graph, features)
    return hidden.data


def label_propagation_loss(alpha: Tensor, graph: Graph, train_idx: np.ndarray, iterations: int):
    """Cross-entropy of labels propagated from the train set through alpha."""
    ops = graph_ops(graph)
    seed_rows = np.zeros((graph.num_nodes, graph.num_classes))
    seed_rows[train_idx, graph.labels[train_idx]] = 1.0
    y = Tensor(seed_rows)
    for _ in range(iterations):
        y = ad.edge_aggregate(alpha, y, ops.pattern_src, ops.pattern_dst, ops.n)
    picked = ad.take_per_row(ad.gather_rows(y, train_idx), graph.labels[train_idx])
    return ad.scale(ad.reduce_mean(ad.log(ad.clamp_min(picked, LPA_CLAMP))), -1.0)


def supervised_loss(model: TrainedModel, graph: Graph, train_idx: np.ndarray,
                    class_weights=None, training: bool = False, rng=None):
    """Training objective: CE on train rows, plus the LPA term for gcn_lpa.

    Returns (loss, logits).
    """
    logits, _, extras = _forward_full(model, graph, training=training, rng=rng)
    loss = ad.cross_entropy(ad.gather_rows(logits, train_idx), graph.labels[train_idx], class_weights)
    if model.spec.arch == "gcn_lpa":
        lpa = label_propagation_loss(extras["edge_alpha"], graph, train_idx, model.spec.lpa_iterations)
        loss = ad.add(loss, ad.scale(lpa, model.spec.lpa_weight))
    return loss, logits


def _epoch_rng(seed: int, epoch: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, stream])


def fit(model: TrainedModel, graph: Graph, *, epochs: int, learning_rate: float,
        weight_decay: float, seed: int, class_weights=None, oversample: bool = False,
        stream: int = 0, extra_loss=None, trace: list | None = None) -> TrainedModel:
    """Full-batch Adam training loop shared by supervised and distilled runs.

    ``extra_loss``, when given, maps the epoch's logits tensor to an extra
    loss term recorded on the same tape (used for distillation). ``trace``
    collects per-epoch loss components as (supervised, extra) pairs.
    """
    train_idx = np.flatnonzero(graph.train_mask)
    if train_idx.size == 0:
        raise ValueError("empty train mask")
    if oversample:
        train_idx = oversample_minority(graph.labels, train_idx, seed)
    params = list(model.params.values())
    state = OptimizerState(learning_rate=learning_rate, weight_decay=weight_decay)
    for epoch in range(epochs):
        rng = _epoch_rng(seed, epoch, stream)
        with Tape() as tape:
            supervised, logits = supervised_loss(
                model, graph, train_idx, class_weights, training=True, rng=rng
            )
            loss = supervised
            extra_value = 0.0
            if extra_loss is not None:
                extra_term = extra_loss(logits)
                extra_value = float(extra_term.data)
                loss = ad.add(loss, extra_term)
        backward(tape, loss)
        value = float(loss.data)
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite loss {value} at epoch {epoch}")
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
        adam_step(params, grads, state)
        model.loss_log.append(value)
        if trace is not None:
            trace.append((float(supervised.data), extra_value))
    return model


def train_supervised(spec: ModelSpec, graph: Graph, config: TrainConfig) -> TrainedModel:
    model = init_model(spec, graph, config.seed)
    return fit(
        model,
        graph,
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        weight_decay=config.weight_decay,
        seed=config.seed,
        class_weights=config.class_weights,
        oversample=config.oversample,
    )


def extract_interaction_matrix(model: TrainedModel, graph: Graph) -> InteractionMatrix:
    """Row-stochastic interaction weights of a graph-based student (eval mode)."""
    spec = model.spec
    ops = graph_ops(graph)
    src, dst = ops.pattern_src, ops.pattern_dst
    if spec.arch == "sgat":
        z1 = graph.features @ model.params["layer0.weight"].data
        s_self = z1 @ model.params["att_self"].data
        s_neigh = z1 @ model.params["att_neigh"].data
        scores = s_self[dst] + s_neigh[src]
        scores = np.where(scores > 0, scores, spec.attention_slope * scores)
    elif spec.arch == "gcn_lpa":
        scores = model.params["edge_weight"].data
    else:
        raise NoInteractionStructure(
            f"architecture {spec.arch!r} has no interaction structure (need sgat or gcn_lpa)"
        )
    peak = np.full(ops.n, -np.inf)
    np.maximum.at(peak, dst, scores)
    e = np.exp(scores - peak[dst])
    denom = np.bincount(dst, weights=e, minlength=ops.n)
    values = e / denom[dst]
    return InteractionMatrix(
        num_nodes=ops.n, src=src.copy(), dst=dst.copy(), values=values, source_model=spec.arch
    )


def balanced_class_weights(labels: np.ndarray, train_idx: np.ndarray, num_classes: int) -> np.ndarray:
    """Inverse-frequency class weights over the training labels."""
    counts = np.bincount(labels[train_idx], minlength=num_classes).astype(np.float64)
    counts[counts == 0] = 1.0
    weights = train_idx.size / (num_classes * counts)
    return weights
