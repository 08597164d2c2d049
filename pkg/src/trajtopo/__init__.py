"""Topology-based generalization indicators for recorded optimizer trajectories.

The package computes alpha-weighted lifetime sums, magnitude and positive
magnitude, and slope-based intrinsic dimension estimates from distance
matrices over trajectory points, and correlates them with generalization
gaps over hyperparameter grids via granulated Kendall coefficients.
"""
from .bundle import (
    BinaryLossTrajectory,
    LossTrajectory,
    RunMeta,
    TrajectoryBundle,
    ValidationReport,
    WeightTrajectory,
    load_bundle,
    validate_bundle,
    write_bundle,
)
from .metrics import (
    DistanceMatrix,
    ProjectionSpec,
    euclidean_distance_matrix,
    loss_pseudometric_matrix,
    subsample_columns,
    zero_one_pseudometric_matrix,
)
from .ph0 import (
    DimFitProtocol,
    MstEdges,
    PhDimEstimate,
    e_alpha,
    estimate_ph_dim,
    kruskal_spanning_edges,
    minimum_spanning_edges,
    ph0_lifetimes,
)
from .magnitudes import (
    MagnitudeResult,
    QuotientSpace,
    SolverConfig,
    WeightingVector,
    canonical_weighting,
    magnitude,
    magnitude_result,
    metric_identification,
    positive_magnitude,
    solve_weighting,
)
from .analysis import (
    ComplexityRecord,
    ComplexitySpec,
    GapRecord,
    GridReport,
    build_grid_report,
    compute_complexities,
    generalization_gap,
    granulated_kendall,
    kendall_tau,
)
from .synth import (
    SynthSpec,
    brute_force_mst_cost,
    greedy_covering_number,
    greedy_packing_number,
    sample_points,
)

__version__ = "0.1.0"
