"""Factor strength estimation for vector and matrix time-series factor models."""

from .core import (
    GroundTruth,
    LoadingEstimate,
    MatrixPanel,
    StrengthReport,
    VectorPanel,
    realized_strengths,
    validate_panel,
)
from .dgp import (
    MatrixDGPSpec,
    NoiseSpec,
    VectorDGPSpec,
    matrix_setting,
    simulate_matrix,
    simulate_vector,
    vector_setting,
)
from .estimators import (
    CovMatrix,
    ProjectionConfig,
    iterative_projection,
    mode_cov,
    pca_loadings,
    sample_cov_vector,
)
from .harness import MCConfig, MCTable, compare_reference, reference_tables, run_cell, run_grid
from .strength import (
    SMatrix,
    TraceSplit,
    assemble_loading,
    estimate_matrix,
    estimate_vector,
    matrix_strengths,
    matrix_traces,
    project_s,
    vector_strengths,
)

__version__ = "0.1.0"
