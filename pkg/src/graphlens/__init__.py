"""graphlens: multi-level explanations for graph neural networks.

Train small GNN teachers, distill them into interpretable students, and
explain them at three levels: component marginal contributions, per-feature
Shapley attributions, and graph-structure rankings via Personalized PageRank.
"""
from .autodiff import (
    OptimizerState,
    Tape,
    Tensor,
    adam_step,
    backward,
    cross_entropy,
    finite_difference_check,
    kl_divergence,
    softmax_with_temperature,
)
from .components import ComponentAttribution, component_report, delta_accuracy, marginal_contribution
from .distill import KDConfig, OnlineKDConfig, distill_offline, distill_online
from .graphdata import (
    Graph,
    GraphBundleError,
    KhopSubgraph,
    SyntheticSpec,
    generate_synthetic_graph,
    khop_subgraph,
    load_graph_bundle,
    make_reference_features,
    make_reference_graph,
    normalize_adjacency,
    oversample_minority,
    save_graph_bundle,
)
from .metrics import ClassificationMetrics, FidelityReport, classification_metrics, evaluate_fidelity
from .models import (
    InteractionMatrix,
    ModelSpec,
    TrainConfig,
    TrainedModel,
    default_spec,
    extract_interaction_matrix,
    forward,
    init_model,
    node_embeddings,
    predict_labels,
    predict_logits,
    predict_proba,
    train_supervised,
)
from .pagerank import NodeRanks, onehot_preference, personalized_pagerank, uniform_preference
from .projection import ProjectionConfig, project_embeddings
from .shapley import (
    FeatureAttribution,
    GlobalImportance,
    ShapConfig,
    explain_node_features,
    global_importance,
    kernel_shap,
    topk_retrain,
)
from .store import ArtifactStore, StoreError, load_model, save_model
from .structure import LocalExplanation, explain_structure, local_explanation, similarity_scores

__version__ = "0.1.0"
