"""One-step efficient estimation of latent positions in random dot product graphs."""

__version__ = "0.1.0"

from .chernoff import (
    ChernoffResult,
    chernoff_gaussian,
    chernoff_ratio_grid,
    rho_star,
    three_block_rank_two,
    two_block_rank_one,
)
from .covariance import (
    ConfidenceIntervals,
    CovarianceReport,
    confidence_intervals,
    covariance_report,
    g_inverse,
    g_lse,
    g_matrix,
    sigma_ase,
    sigma_lse,
)
from .evaluation import Partition, aligned_sse, gmm_cluster, gmm_fit, rand_index
from .model import (
    THREE_BLOCK_SBM,
    Adjacency,
    LatentPositions,
    SbmSpec,
    make_rng,
    sample_rdpg,
    sbm_assignment,
    sbm_to_latent,
    sine_curve_latent,
)
from .harness import ExperimentConfig, simulate, simulate_ci
from .onestep import OneStepConfig, OneStepError, mle_single_vertex, one_step_update, ose_a, ose_l
from .spectral import (
    AlignmentResult,
    Embedding,
    ase,
    degree_scaled_lse,
    lse,
    normalized_laplacian,
    population_lse,
    procrustes_align,
    select_dimension,
)

__all__ = [
    "ExperimentConfig",
    "simulate",
    "simulate_ci",
    "three_block_rank_two",
    "two_block_rank_one",
    "__version__",
    "Adjacency",
    "AlignmentResult",
    "ChernoffResult",
    "ConfidenceIntervals",
    "CovarianceReport",
    "Embedding",
    "LatentPositions",
    "OneStepConfig",
    "OneStepError",
    "Partition",
    "SbmSpec",
    "THREE_BLOCK_SBM",
    "aligned_sse",
    "ase",
    "chernoff_gaussian",
    "chernoff_ratio_grid",
    "confidence_intervals",
    "covariance_report",
    "degree_scaled_lse",
    "g_inverse",
    "g_lse",
    "g_matrix",
    "gmm_cluster",
    "gmm_fit",
    "lse",
    "make_rng",
    "mle_single_vertex",
    "normalized_laplacian",
    "one_step_update",
    "ose_a",
    "ose_l",
    "population_lse",
    "procrustes_align",
    "rand_index",
    "rho_star",
    "sample_rdpg",
    "sbm_assignment",
    "sbm_to_latent",
    "select_dimension",
    "sigma_ase",
    "sigma_lse",
    "sine_curve_latent",
]
