"""Correlations, entanglement and local realism for mixtures of W and W-bar states."""

__version__ = "0.1.0"

from .errors import (
    ColumnCapExceeded,
    DenseLimitExceeded,
    DimensionMismatch,
    InvalidDimension,
    InvalidDirection,
    InvalidProbability,
    InvalidState,
    MulticorrError,
    NotHermitian,
    ResourceLimit,
    ScanTooLarge,
    SolverNumericalFailure,
)
from .qstate import (
    DenseOperator,
    LowRankState,
    StateVector,
    density_matrix,
    expectation,
    make_ghz,
    make_purification,
    make_rho,
    make_rho_eps,
    make_v,
    make_w,
    make_wbar,
    partial_trace,
)
from .pauli import (
    CorrelationReport,
    LocalObservable,
    PauliString,
    correlation_tensor,
    correlator,
    covariance,
    parity_predicts_zero,
    weight_projector,
)
from .entanglement import (
    Bipartition,
    EntanglementReport,
    enumerate_bipartitions,
    genuine_entanglement_report,
    negativity,
    seesaw_product_overlap,
    weight_argument_check,
)
