"""Fidelity metrics for teacher-student pairs plus binary classification
scores for imbalanced tasks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .autodiff import KL_CLAMP, _softmax_rows
from .graphdata import Graph
from .models import TrainedModel, predict_logits


@dataclass
class FidelityReport:
    accuracy: float      # student vs labels, percent
    agreement: float     # student argmax == teacher argmax, percent
    predictive_kl: float  # mean KL(teacher || student), nats
    count: int
    delta_accuracy: float | None = None


def kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise KL(p || q) with 0 ln 0 = 0 and q clamped at 1e-12."""
    q_safe = np.maximum(q, KL_CLAMP)
    p_safe = np.maximum(p, KL_CLAMP)
    return np.where(p > 0, p * (np.log(p_safe) - np.log(q_safe)), 0.0).sum(axis=-1)


def evaluate_fidelity(
    teacher: TrainedModel,
    student: TrainedModel,
    graph: Graph,
    mask: np.ndarray | None = None,
    student_features: np.ndarray | None = None,
) -> FidelityReport:
    """Accuracy, argmax agreement, and predictive KL on one node mask.

    ``student_features`` lets a student trained on a reduced feature view be
    scored against the same teacher.
    """
    if mask is None:
        mask = graph.test_mask
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask must be nonempty")
    t_logits = predict_logits(teacher, graph)[mask]
    s_logits = predict_logits(student, graph, features=student_features)[mask]
    if t_logits.shape != s_logits.shape:
        raise ValueError("teacher and student output shapes differ")
    labels = graph.labels[mask]
    s_pred = s_logits.argmax(axis=1)
    t_pred = t_logits.argmax(axis=1)
    kl = kl_rows(_softmax_rows(t_logits), _softmax_rows(s_logits)).mean()
    return FidelityReport(
        accuracy=float((s_pred == labels).mean() * 100.0),
        agreement=float((s_pred == t_pred).mean() * 100.0),
        predictive_kl=float(kl),
        count=int(mask.sum()),
    )


@dataclass
class ClassificationMetrics:
    accuracy: float  # percent, 0.5 threshold
    auc: float       # in [0, 1]
    recall: float    # percent, positive class at 0.5


def classification_metrics(scores: np.ndarray, labels: np.ndarray) -> ClassificationMetrics:
    """Threshold metrics plus tie-aware rank AUC for binary labels."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: labels contain a single class")
    ranks = rankdata(scores)  # average ranks handle ties
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    predicted = scores >= 0.5
    accuracy = float((predicted == (labels == 1)).mean() * 100.0)
    recall = float(predicted[labels == 1].mean() * 100.0)
    return ClassificationMetrics(accuracy=accuracy, auc=float(auc), recall=recall)
