from .classifiers import LinearModel, accuracy, logistic_train, softmax_train
from .metrics import f1_scores, modularity, ndcg_from_scores, nmi
from .operators import EdgeOperator, edge_features, pair_features
from .reports import EvalReport, summarize, to_csv, to_text
from .sweep import (
    ClassificationTask,
    ClusteringTask,
    LinkPredictionTask,
    ReconstructionTask,
    SweepResult,
    default_grid,
    hverse_sweep,
    parse_grid,
)
from .tasks import (
    LabeledNodes,
    classification_eval,
    graph_reconstruction,
    kmeans,
    kmeans_fit,
    link_prediction_eval,
    load_labels,
    ndcg_at_k,
    sample_non_edges,
    split_pairs,
)
