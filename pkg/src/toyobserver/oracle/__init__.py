"""Brute-force state-space oracle for small configurations."""
from .checks import (
    ComparisonReport,
    ProjectorReport,
    RebaseReport,
    UnitarityReport,
    compare_with_symbolic,
    dense_sparse_agreement,
    projector_family,
    projector_orthogonality_check,
    random_state,
    random_unitary,
    rebase_demo,
    unitarity_check,
    unitarity_suite,
)
from .operators import (
    FACTORS,
    BranchingMatrix,
    DenseOracle,
    SparseOracle,
    apply_factor,
    build_branching_matrix,
    sigma_power,
)
from .space import RingTopology, TreeTopology, TruncatedSpace, canonical_space, tree_space

__all__ = [
    "FACTORS", "BranchingMatrix", "ComparisonReport", "DenseOracle", "ProjectorReport",
    "RebaseReport", "RingTopology", "SparseOracle", "TreeTopology", "TruncatedSpace",
    "UnitarityReport", "apply_factor", "build_branching_matrix", "canonical_space",
    "compare_with_symbolic", "dense_sparse_agreement", "projector_family",
    "projector_orthogonality_check", "random_state", "random_unitary", "rebase_demo",
    "sigma_power", "tree_space", "unitarity_check", "unitarity_suite",
]
