"""Discover recurring spatio-temporal activity patterns on graphs.

The pipeline thresholds node signals into bit-packed activation masks,
builds the causal multilayer graph of activity directly from the spatial
graph and the mask, extracts dynamic activated components, clusters them on
static feature vectors, and synthesizes per-cluster average activation
components that support weighted causal walks.
"""

__version__ = "0.1.0"

from .activation import (
    ActivationMask,
    EdgeMask,
    SignalMatrix,
    build_edge_mask,
    read_mask,
    threshold,
    write_mask,
    zscore,
)
from .average import (
    AverageComponent,
    build_aac,
    genre_view,
    sample_walk,
    sparsify,
)
from .builder import (
    CausalActivityGraph,
    build_activity_graph,
    build_activity_graph_dynamic,
    builder_stats,
    verify_against_definition,
)
from .clustering import (
    ClusterModel,
    DynamicFeatureVector,
    StaticFeatureVector,
    adjusted_rand_index,
    dynamic_features,
    kmeans,
    scan_k,
    silhouette,
    static_features,
)
from .components import (
    DynamicComponent,
    ExtractionResult,
    component_summary,
    extract_components,
)
from .errors import PipelineStageError, ValidationError
from .graph import EdgeEvents, SpatialGraph, load_edge_events, load_edge_list
from .pipeline import PipelineConfig, load_config, run_pipeline
from .synth import (
    PatternTemplate,
    SyntheticScenario,
    generate_scenario,
    score_recovery,
)

__all__ = [
    "ActivationMask",
    "AverageComponent",
    "CausalActivityGraph",
    "ClusterModel",
    "DynamicComponent",
    "DynamicFeatureVector",
    "EdgeEvents",
    "EdgeMask",
    "ExtractionResult",
    "PatternTemplate",
    "PipelineConfig",
    "PipelineStageError",
    "SignalMatrix",
    "SpatialGraph",
    "StaticFeatureVector",
    "SyntheticScenario",
    "ValidationError",
    "adjusted_rand_index",
    "build_aac",
    "build_activity_graph",
    "build_activity_graph_dynamic",
    "build_edge_mask",
    "builder_stats",
    "component_summary",
    "dynamic_features",
    "extract_components",
    "generate_scenario",
    "genre_view",
    "kmeans",
    "load_config",
    "load_edge_events",
    "load_edge_list",
    "read_mask",
    "run_pipeline",
    "sample_walk",
    "scan_k",
    "score_recovery",
    "silhouette",
    "sparsify",
    "static_features",
    "threshold",
    "verify_against_definition",
    "write_mask",
    "zscore",
]
