"""Alternating manifold proximal gradient (A-ManPG) for sparse PCA and sparse CCA."""

from .manifold import (
    DimensionError,
    ManifoldDescriptor,
    NumericalError,
    Retraction,
    euclidean,
    generalized_stiefel,
    stiefel,
)
from .penalty import L1, ColumnElasticNet, Penalty, RowL21, Zero
from .problems import (
    SccaConfig,
    SpcaConfig,
    scca_canonical_form,
    scca_init,
    scca_problem,
    spca_init,
    spca_problem,
)
from .solver import Mode, ProblemSpec, SolverOptions, SolverTrace, Status, amanpg

__all__ = [
    "ColumnElasticNet", "DimensionError", "L1", "ManifoldDescriptor", "Mode", "NumericalError",
    "Penalty", "ProblemSpec", "Retraction", "RowL21", "SccaConfig", "SolverOptions", "SolverTrace",
    "SpcaConfig", "Status", "Zero", "amanpg", "euclidean", "generalized_stiefel", "scca_canonical_form", "scca_init",
    "scca_problem", "spca_init", "spca_problem", "stiefel",
]
