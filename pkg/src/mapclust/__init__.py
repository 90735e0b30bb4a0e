"""Flow-based clustering for embedding sets.

Builds a kNN cosine transition graph over unit-norm feature vectors,
adaptively prunes noisy transitions by ranked-probability outlier
detection, partitions the graph by minimizing a two-level codelength
objective, and scores results with both pair-based and identity-level
clustering metrics.
"""

__version__ = "0.1.0"

from .data import (
    EmbeddingSet,
    LabelSet,
    SynthSpec,
    generate_synthetic,
    load_embeddings,
    load_labels,
    save_embeddings,
    save_labels,
)
from .errors import ConvergenceError, DataError
from .graph import (
    SparseRowGraph,
    build_knn_graph,
    load_edges,
    row_normalize,
    save_edges,
)
from .mapeq import (
    FlowStats,
    Partition,
    SolverConfig,
    compute_flow,
    load_partition,
    map_equation_direct,
    map_equation_fast,
    move_delta,
    save_partition,
    stationary_distribution,
)
from .metrics import (
    MetricsReport,
    bcubed_fscore,
    compute_report,
    identity_fscore,
    pairwise_fscore,
    ratio_metrics,
)
from .optimize import OptimizeResult, optimize_partition, optimize_partition_detailed
from .outliers import (
    ODConfig,
    RankedRow,
    SwitchPointReport,
    adjust_transitions,
    detect_switch_point,
    precision_recall_at,
    rank_row,
)
from .pipeline import (
    GridResult,
    PipelineConfig,
    RunSummary,
    cluster_embeddings,
    run_ablation_grid,
)

__all__ = [
    "__version__",
    "EmbeddingSet",
    "LabelSet",
    "SynthSpec",
    "generate_synthetic",
    "load_embeddings",
    "load_labels",
    "save_embeddings",
    "save_labels",
    "ConvergenceError",
    "DataError",
    "SparseRowGraph",
    "build_knn_graph",
    "load_edges",
    "row_normalize",
    "save_edges",
    "FlowStats",
    "Partition",
    "SolverConfig",
    "compute_flow",
    "load_partition",
    "map_equation_direct",
    "map_equation_fast",
    "move_delta",
    "save_partition",
    "stationary_distribution",
    "MetricsReport",
    "bcubed_fscore",
    "compute_report",
    "identity_fscore",
    "pairwise_fscore",
    "ratio_metrics",
    "OptimizeResult",
    "optimize_partition",
    "optimize_partition_detailed",
    "ODConfig",
    "RankedRow",
    "SwitchPointReport",
    "adjust_transitions",
    "detect_switch_point",
    "precision_recall_at",
    "rank_row",
    "GridResult",
    "PipelineConfig",
    "RunSummary",
    "cluster_embeddings",
    "run_ablation_grid",
]
