"""Dynamical similarity measures, embeddings and module detection for networks.

The package turns a (possibly directed, weighted, signed) graph plus a linear
dynamics into time-parameterized node similarity and distance matrices, spectral
embeddings and rankings, and multiscale partitions, and ships a small
leaky-integrate-and-fire simulator used to validate functional-module recovery.
"""

from dynembed.graphs import (
    EdgeListError,
    Graph,
    QuotientGraph,
    check_eep,
    combinatorial_laplacian,
    discrete_transition_matrix,
    influence_operator,
    load_edge_list,
    load_tribes,
    random_walk_laplacian,
    signed_laplacian,
    teleportation_laplacian,
)
from dynembed.linsys import (
    LinearSystem,
    ResponseSet,
    diffusion_system,
    discrete_walk_system,
    impulse_response_matrix,
    influence_system,
    propagator,
    random_walk_system,
    signed_system,
    teleported_system,
)
from dynembed.similarity import (
    DiffusionStats,
    DistanceMatrix,
    Gramian,
    NumericalError,
    SimilarityMatrix,
    autocovariance,
    centered_similarity_at,
    diffusion_stats,
    distance_squared,
    eep_block_check,
    integrated_distance,
    integrated_similarity,
    integrated_similarity_discrete,
    lyapunov_residual,
    observability_gramian,
    resistance_distance,
    similarity_at,
)
from dynembed.embedding import (
    EmbeddingCoords,
    SpectralDecomp,
    decompose,
    embed,
    embedding_trajectory,
    rank_by_coordinate,
)
from dynembed.clustering import (
    Partition,
    QualityConfig,
    ScanResult,
    louvain_optimize,
    quality_config_from_system,
    quality_score,
    spectral_partition,
    time_scan,
    variation_of_information,
)
from dynembed.lif import (
    LifParams,
    SpikeTrain,
    assembly_coactivation,
    generate_assembly_network,
    rate_model_system,
    simulate_lif,
    validate_functional_recovery,
)

__version__ = "0.1.0"
