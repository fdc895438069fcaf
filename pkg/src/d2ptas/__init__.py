"""Clustering with cost-weighted sampling: a (1+eps)-approximation engine for
k-means and generalized k-median objectives (quadratic forms and convex-generator
divergences), plus exact small-scale oracles and property-check machinery."""

__version__ = "0.1.0"

from .errors import (
    ClusteringError,
    ConfigError,
    DimensionMismatch,
    DomainError,
    EmptyFile,
    EmptySet,
    InsufficientPoints,
    ParseError,
    RaggedRows,
    TooLarge,
    UnsupportedMeasure,
)
from .divergences import (
    Dataset,
    DivergenceMeasure,
    GenericBregman,
    ItakuraSaito,
    KullbackLeibler,
    Mahalanobis,
    PropertyReport,
    SquaredEuclidean,
    as_points,
    assign,
    centroid,
    centroid_report,
    check_centroid_property,
    check_mu_similarity,
    check_symmetry,
    check_triangle,
    cluster_cost,
    mu_similarity_report,
    symmetry_report,
    triangle_report,
)
from .sampler import (
    CenterSet,
    D2Distribution,
    RngStream,
    add_center,
    d2_distribution,
    d2_sample,
    empirical_distribution_check,
    weighted_draw,
)
from .ptas import (
    ClusteringResult,
    Exhaustive,
    PtasConfig,
    RandomTrials,
    default_eta,
    find_best_over_k,
    find_k_means,
    find_k_median,
    kmeanspp_seed,
    paper_scale_constants,
    parse_strategy,
    run_one_restart,
)
from .oracle import (
    ORACLE_K_CAP,
    ORACLE_N_CAP,
    IrreducibilityReport,
    OracleResult,
    inaba_trial,
    irreducibility,
    lloyd,
    optimal_bruteforce,
    subsample_extrapolation,
)
from .cli import generate_planted, ingest_csv, run_experiment, write_points_csv
