"""Local-realism engine: behaviors, polytope membership by LP, and settings search."""

from .polytope import (
    COLUMN_CAP,
    DEFAULT_TOL,
    V_MAX,
    Certificate,
    LPResult,
    check_certificate,
    decode_strategy,
    deterministic_table,
    encode_strategy,
    is_symmetric_behavior,
    lhv_bound,
    lp_membership,
    lp_membership_symmetric,
    strategy_count,
    strategy_matrix,
    symmetric_lp,
    table_functional_to_correlators,
)
from .scenario import Behavior, Scenario, behavior, mix_with_noise, white_noise
from .search import EpsilonScanReport, ScanPoint, epsilon_scan, is_permutation_invariant, optimize_settings
from .simplex import LPSolution, solve_standard_form

__all__ = [
    "COLUMN_CAP",
    "DEFAULT_TOL",
    "V_MAX",
    "Behavior",
    "Certificate",
    "EpsilonScanReport",
    "LPResult",
    "LPSolution",
    "ScanPoint",
    "Scenario",
    "behavior",
    "check_certificate",
    "decode_strategy",
    "deterministic_table",
    "encode_strategy",
    "epsilon_scan",
    "is_permutation_invariant",
    "is_symmetric_behavior",
    "lhv_bound",
    "lp_membership",
    "lp_membership_symmetric",
    "mix_with_noise",
    "optimize_settings",
    "solve_standard_form",
    "strategy_count",
    "strategy_matrix",
    "symmetric_lp",
    "table_functional_to_correlators",
    "white_noise",
]
