"""Feature attribution on distilled feature-space students via KernelSHAP,
with global importance summaries and the top-k retrain validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from itertools import combinations

import numpy as np

from .autodiff import _softmax_rows
from .distill import KDConfig, distill_offline, distill_to_targets
from .graphdata import Graph
from .metrics import ClassificationMetrics, classification_metrics
from .models import TrainedModel, default_spec, predict_logits


@dataclass
class ShapConfig:
    background: np.ndarray  # (B, d) reference rows for masked features
    num_samples: int = 2048
    exact_threshold: int = 12
    ridge: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.background = np.atleast_2d(np.asarray(self.background, dtype=np.float64))
        if self.background.shape[0] < 1:
            raise ValueError("background must contain at least one row")


@dataclass
class FeatureAttribution:
    values: np.ndarray
    base_value: float
    prediction: float
    exact: bool
    instance_id: int | None = None

    @property
    def efficiency_gap(self) -> float:
        return abs(self.base_value + self.values.sum() - self.prediction)


def _coalition_values(predict, x: np.ndarray, masks: np.ndarray, background: np.ndarray) -> np.ndarray:
    """v(S) for each coalition row: mean over background rows of predict on
    x with masked-out features replaced by the background row."""
    n_coalitions = masks.shape[0]
    n_background = background.shape[0]
    rows = np.where(
        masks[:, None, :], x[None, None, :], background[None, :, :]
    ).reshape(n_coalitions * n_background, -1)
    out = np.asarray(predict(rows), dtype=np.float64).reshape(n_coalitions, n_background)
    if not np.all(np.isfinite(out)):
        raise ValueError("predict returned non-finite values")
    return out.mean(axis=1)


def _exact_shap(predict, x: np.ndarray, background: np.ndarray) -> tuple[np.ndarray, float]:
    d = x.size
    count = 1 << d
    ids = np.arange(count)
    masks = (ids[:, None] >> np.arange(d)) & 1
    values = _coalition_values(predict, x, masks.astype(bool), background)
    size_weight = np.array(
        [math.factorial(s) * math.factorial(d - 1 - s) / math.factorial(d) for s in range(d)]
    )
    sizes = masks.sum(axis=1)
    phi = np.zeros(d)
    for i in range(d):
        without = (ids >> i) & 1 == 0
        base_ids = ids[without]
        gains = values[base_ids | (1 << i)] - values[base_ids]
        phi[i] = (size_weight[sizes[base_ids]] * gains).sum()
    return phi, float(values[0])


def _sample_coalitions(d: int, budget: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Coalition masks plus regression weights.

    Complete coalition sizes are enumerated with exact kernel weights while
    the budget allows (paired s with d-s); leftover budget is spent sampling
    the remaining sizes proportionally to their kernel mass.
    """
    masks: list[np.ndarray] = []
    weights: list[float] = []
    remaining_sizes = list(range(1, d))
    size_mass = {s: (d - 1) / (s * (d - s)) for s in remaining_sizes}
    budget_left = budget

    for s in range(1, d // 2 + 1):
        pair = sorted({s, d - s})
        needed = sum(math.comb(d, t) for t in pair)
        if needed > budget_left:
            break
        for t in pair:
            kernel = (d - 1) / (math.comb(d, t) * t * (d - t))
            for combo in combinations(range(d), t):
                m = np.zeros(d, dtype=bool)
                m[list(combo)] = True
                masks.append(m)
                weights.append(kernel)
            remaining_sizes.remove(t)
        budget_left -= needed

    if remaining_sizes and budget_left > 0:
        mass = np.array([size_mass[s] for s in remaining_sizes])
        probs = mass / mass.sum()
        picks = rng.choice(len(remaining_sizes), size=budget_left, p=probs)
        sample_weight = mass.sum() / budget_left
        for pick in picks:
            s = remaining_sizes[pick]
            m = np.zeros(d, dtype=bool)
            m[rng.choice(d, size=s, replace=False)] = True
            masks.append(m)
            weights.append(sample_weight)

    return np.array(masks, dtype=bool), np.array(weights)


def _sampled_shap(predict, x: np.ndarray, cfg: ShapConfig, rng: np.random.Generator
                  ) -> tuple[np.ndarray, float]:
    d = x.size
    if cfg.num_samples < d + 2:
        raise ValueError(f"num_samples must be at least d+2 = {d + 2}")
    v_empty = _coalition_values(predict, x, np.zeros((1, d), dtype=bool), cfg.background)[0]
    v_full = _coalition_values(predict, x, np.ones((1, d), dtype=bool), cfg.background)[0]
    masks, weights = _sample_coalitions(d, cfg.num_samples, rng)
    values = _coalition_values(predict, x, masks, cfg.background)

    # efficiency-constrained weighted least squares (last feature eliminated)
    gap = v_full - v_empty
    z = masks.astype(np.float64)
    y = values - v_empty - z[:, -1] * gap
    design = z[:, :-1] - z[:, -1:]
    sw = np.sqrt(weights)
    a = design * sw[:, None]
    b = y * sw
    if cfg.ridge > 0:
        a = np.vstack([a, math.sqrt(cfg.ridge) * np.eye(d - 1)])
        b = np.concatenate([b, np.zeros(d - 1)])
    head, *_ = np.linalg.lstsq(a, b, rcond=None)
    phi = np.concatenate([head, [gap - head.sum()]])
    return phi, float(v_empty)


def kernel_shap(predict, x: np.ndarray, cfg: ShapConfig, instance_id: int | None = None
                ) -> FeatureAttribution:
    """Shapley values for one instance against a background distribution.

    ``predict`` maps a batch of feature rows (n, d) to n probabilities.
    Exact enumeration below ``exact_threshold`` features; otherwise the
    weighted-regression estimate with the efficiency constraint enforced.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    d = x.size
    if cfg.background.shape[1] != d:
        raise ValueError("background feature dim mismatch")
    prediction = float(np.asarray(predict(x[None, :]))[0])
    if not np.isfinite(prediction):
        raise ValueError("predict returned non-finite values")
    if d <= cfg.exact_threshold:
        phi, base = _exact_shap(predict, x, cfg.background)
        exact = True
    else:
        rng = np.random.default_rng(cfg.seed)
        phi, base = _sampled_shap(predict, x, cfg, rng)
        exact = False
    return FeatureAttribution(
        values=phi, base_value=base, prediction=prediction, exact=exact, instance_id=instance_id
    )


@dataclass
class GlobalImportance:
    mean_abs: np.ndarray
    order: np.ndarray  # feature ids, most important first, ties toward lower id

    def top(self, k: int) -> np.ndarray:
        return self.order[:k]


def global_importance(predict, samples: np.ndarray, cfg: ShapConfig) -> GlobalImportance:
    """Mean absolute Shapley value per feature over a set of instances."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    total = np.zeros(samples.shape[1])
    for i, row in enumerate(samples):
        per_instance = dc_replace(cfg, background=cfg.background, seed=int(cfg.seed) + i)
        total += np.abs(kernel_shap(predict, row, per_instance, instance_id=i).values)
    mean_abs = total / samples.shape[0]
    order = np.lexsort((np.arange(mean_abs.size), -mean_abs))
    return GlobalImportance(mean_abs=mean_abs, order=order)


def mlp_predictor(student: TrainedModel, graph: Graph, class_index: int):
    """Vectorized row->probability function for a feature-space student."""
    if student.spec.arch != "mlp":
        raise ValueError("feature attribution expects an mlp student")

    def predict(rows: np.ndarray) -> np.ndarray:
        logits = predict_logits(student, graph, features=np.atleast_2d(rows))
        return _softmax_rows(logits)[:, class_index]

    return predict


def explain_node_features(student: TrainedModel, graph: Graph, node: int, cfg: ShapConfig
                          ) -> FeatureAttribution:
    """Shapley values for one node's features, targeting the student's
    predicted class for that node."""
    if not (0 <= node < graph.num_nodes):
        raise ValueError(f"node {node} out of range")
    x = graph.features[node]
    logits = predict_logits(student, graph, features=x[None, :])
    target = int(logits.argmax(axis=1)[0])
    return kernel_shap(mlp_predictor(student, graph, target), x, cfg, instance_id=node)


def stratified_rows(graph: Graph, size: int, seed: int = 0, mask: np.ndarray | None = None
                    ) -> np.ndarray:
    """Class-stratified node sample (indices) drawn from a mask (train by default)."""
    if mask is None:
        mask = graph.train_mask
    rng = np.random.default_rng(seed)
    pool = np.flatnonzero(mask)
    per_class = max(1, size // graph.num_classes)
    chosen: list[np.ndarray] = []
    for c in range(graph.num_classes):
        members = pool[graph.labels[pool] == c]
        if members.size == 0:
            continue
        take = min(per_class, members.size)
        chosen.append(rng.choice(members, size=take, replace=False))
    return np.sort(np.concatenate(chosen))


@dataclass
class StudentScore:
    accuracy: float
    auc: float
    recall: float
    agreement: float


@dataclass
class TopKRetrainReport:
    selected: np.ndarray           # feature ids kept, ascending
    importance: GlobalImportance
    full: StudentScore
    topk: StudentScore


def _score_student(student: TrainedModel, teacher_logits: np.ndarray, graph: Graph,
                   features: np.ndarray | None) -> StudentScore:
    mask = graph.test_mask
    logits = predict_logits(student, graph, features=features)
    proba = _softmax_rows(logits)
    cls: ClassificationMetrics = classification_metrics(
        proba[mask, 1], graph.labels[mask]
    )
    agreement = float(
        (logits.argmax(axis=1)[mask] == teacher_logits.argmax(axis=1)[mask]).mean() * 100.0
    )
    return StudentScore(
        accuracy=cls.accuracy, auc=cls.auc, recall=cls.recall, agreement=agreement
    )


def topk_retrain(
    teacher: TrainedModel,
    graph: Graph,
    k: int,
    kd: KDConfig,
    cfg: ShapConfig | None = None,
    num_instances: int = 40,
    student_hidden: int = 64,
) -> TopKRetrainReport:
    """Distill an MLP student, rank features globally, retrain on only the
    top-k columns, and score both students on the test mask.

    Binary tasks only (AUC/recall). Selected columns are reported in
    ascending id order, so k == d reproduces the original feature layout.
    """
    d = graph.feature_dim
    if not (1 <= k <= d):
        raise ValueError(f"k must lie in [1, {d}]")
    if graph.num_classes != 2:
        raise ValueError("topk_retrain expects a binary task")

    student_full = distill_offline(
        teacher, default_spec("mlp", d, 2, hidden=student_hidden), graph, kd
    )
    if cfg is None:
        background_idx = stratified_rows(graph, 50, seed=kd.seed)
        cfg = ShapConfig(background=graph.features[background_idx], seed=kd.seed)
    predict = mlp_predictor(student_full, graph, class_index=1)
    instance_idx = stratified_rows(graph, num_instances, seed=kd.seed + 1)
    importance = global_importance(predict, graph.features[instance_idx], cfg)
    selected = np.sort(importance.top(k))

    reduced = dc_replace(
        graph,
        features=graph.features[:, selected],
        feature_names=tuple(graph.feature_names[i] for i in selected)
        if graph.feature_names
        else None,
    )
    teacher_logits = predict_logits(teacher, graph)
    student_topk = distill_to_targets(
        teacher_logits, default_spec("mlp", k, 2, hidden=student_hidden), reduced, kd
    )
    return TopKRetrainReport(
        selected=selected,
        importance=importance,
        full=_score_student(student_full, teacher_logits, graph, None),
        topk=_score_student(student_topk, teacher_logits, reduced, reduced.features),
    )
