"""Teacher-student knowledge distillation: frozen-teacher offline mode and the
mutual-ensemble online mode."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graphdata import Graph
from .models import (
    ModelSpec,
    TrainedModel,
    fit,
    init_model,
    predict_logits,
    supervised_loss,
)

EXPOSURES = ("all_nodes", "train_only")


@dataclass
class KDConfig:
    """Offline distillation settings.

    ``epochs=None`` resolves to 1000 for MLP students and 200 otherwise.
    The distillation term is KL(teacher_soft || student_soft) at the given
    temperature, weighted by ``weight``; optionally rescaled by temperature^2.
    """

    temperature: float = 2.0
    weight: float = 1.0
    epochs: int | None = None
    exposure: str = "all_nodes"
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    class_weights: np.ndarray | None = None
    oversample: bool = False
    tau_squared_rescale: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.weight < 0:
            raise ValueError("distillation weight must be >= 0")
        if self.exposure not in EXPOSURES:
            raise ValueError(f"exposure must be one of {EXPOSURES}")

    def resolve_epochs(self, student_arch: str) -> int:
        if self.epochs is not None:
            return self.epochs
        return 1000 if student_arch == "mlp" else 200


@dataclass
class OnlineKDConfig:
    """Mutual online distillation settings.

    Each participant matches the mean of its peers' soft predictions. MLP
    participants optionally get their total loss scaled by
    ``mlp_loss_factor`` and an extra KL term against every peer.
    """

    temperature: float = 1.0
    epochs: int = 200
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    mlp_loss_factor: float = 1.0
    mlp_peer_kl: bool = False
    ensemble_mode: str = "peers"  # "peers" excludes self; "all" includes it
    oversample: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.mlp_loss_factor <= 0:
            raise ValueError("mlp_loss_factor must be > 0")
        if self.ensemble_mode not in ("peers", "all"):
            raise ValueError("ensemble_mode must be 'peers' or 'all'")


def _exposure_indices(graph: Graph, exposure: str) -> np.ndarray:
    if exposure == "train_only":
        return np.flatnonzero(graph.train_mask)
    return np.arange(graph.num_nodes)


def distill_to_targets(
    teacher_logits: np.ndarray,
    student_spec: ModelSpec,
    graph: Graph,
    kd: KDConfig,
    trace: list | None = None,
) -> TrainedModel:
    """Train a student against frozen teacher logits (hard CE on the train
    mask plus weighted soft-target KL on the exposure set)."""
    if teacher_logits.shape != (graph.num_nodes, graph.num_classes):
        raise ValueError("teacher logits shape mismatch")
    student = init_model(student_spec, graph, kd.seed)
    exposure_idx = _exposure_indices(graph, kd.exposure)
    tau = kd.temperature
    soft_targets = ad._softmax_rows(teacher_logits[exposure_idx] / tau)
    factor = kd.weight * (tau * tau if kd.tau_squared_rescale else 1.0)

    extra_loss = None
    if kd.weight > 0:

        def extra_loss(logits: Tensor):
            student_soft = ad.softmax_with_temperature(ad.gather_rows(logits, exposure_idx), tau)
            return ad.scale(ad.kl_divergence(soft_targets, student_soft), factor)

    return fit(
        student,
        graph,
        epochs=kd.resolve_epochs(student_spec.arch),
        learning_rate=kd.learning_rate,
        weight_decay=kd.weight_decay,
        seed=kd.seed,
        class_weights=kd.class_weights,
        oversample=kd.oversample,
        extra_loss=extra_loss,
        trace=trace,
    )


def distill_offline(
    teacher: TrainedModel,
    student_spec: ModelSpec,
    graph: Graph,
    kd: KDConfig,
    trace: list | None = None,
) -> TrainedModel:
    """Offline KD: teacher logits computed once in eval mode and frozen."""
    if teacher.spec.input_dim != graph.feature_dim:
        raise ValueError("teacher incompatible with graph features")
    if student_spec.num_classes != teacher.spec.num_classes:
        raise ValueError("teacher and student class counts differ")
    teacher_logits = predict_logits(teacher, graph)
    return distill_to_targets(teacher_logits, student_spec, graph, kd, trace=trace)


def distill_online(
    specs: list[ModelSpec],
    graph: Graph,
    cfg: OnlineKDConfig,
) -> list[TrainedModel]:
    """Train all participants simultaneously against ensemble soft targets.

    Participants update strictly in sequence within an epoch; peer targets
    are recomputed from current parameters in eval mode before each update.
    """
    if not specs:
        raise ValueError("online distillation needs at least one participant")
    models = [init_model(spec, graph, cfg.seed) for spec in specs]
    train_idx = np.flatnonzero(graph.train_mask)
    if train_idx.size == 0:
        raise ValueError("empty train mask")
    if cfg.oversample:
        from .graphdata import oversample_minority

        train_idx = oversample_minority(graph.labels, train_idx, cfg.seed)
    from .autodiff import OptimizerState, Tape, adam_step, backward
    from .models import TrainingDiverged

    states = [
        OptimizerState(learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay)
        for _ in models
    ]
    tau = cfg.temperature
    from .models import _epoch_rng

    for epoch in range(cfg.epochs):
        for i, model in enumerate(models):
            peer_soft = [
                ad._softmax_rows(predict_logits(m, graph) / tau)
                for j, m in enumerate(models)
                if j != i or cfg.ensemble_mode == "all"
            ]
            rng = _epoch_rng(cfg.seed, epoch, stream=i)
            with Tape() as tape:
                loss, logits = supervised_loss(model, graph, train_idx, training=True, rng=rng)
                if peer_soft:
                    ensemble = np.mean(peer_soft, axis=0)
                    own_soft = ad.softmax_with_temperature(logits, tau)
                    loss = ad.add(loss, ad.kl_divergence(ensemble, own_soft))
                    if model.spec.arch == "mlp" and cfg.mlp_peer_kl:
                        for target in peer_soft:
                            loss = ad.add(loss, ad.kl_divergence(target, own_soft))
                if model.spec.arch == "mlp" and cfg.mlp_loss_factor != 1.0:
                    loss = ad.scale(loss, cfg.mlp_loss_factor)
            backward(tape, loss)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} for participant {i} at epoch {epoch}"
                )
            params = list(model.params.values())
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
            adam_step(params, grads, states[i])
            model.loss_log.append(value)
    return models
