"""Synthetic controls with misspecification bounds.

Fits donor weights for a target unit three ways (pre-period least squares,
Wasserstein distance between cause distributions, or a combination) and
builds intervals around the synthetic series that account for the error a
misspecified convex combination can introduce.
"""

from ._version import __version__
from .causes import (
    CausesSchema,
    GridSamples,
    LipschitzEstimate,
    SurveyMicrodata,
    Variable,
    build_distributions,
    encode_cause_point,
    estimate_lipschitz,
    one_half_hot,
)
from .dgp import (
    DgpConfig,
    dgp_grid_samples,
    dgp_lipschitz,
    f_xt,
    generate_panel,
    unit_distribution,
)
from .errors import (
    InputDataError,
    NumericalFailureError,
    SchemaViolationError,
    ScboundsError,
)
from .estimators import (
    CoverageReport,
    FitResult,
    MisspecInterval,
    PanelData,
    PlaceboResult,
    coverage_report,
    fit_james_bound,
    fit_m_bound,
    fit_standard_sc,
    james_bound_value,
    james_intervals,
    m_bound_value,
    m_intervals,
    placebo_study,
    synthetic_series,
)
from .ot import (
    AtomSet,
    CostMatrix,
    DiscreteDistribution,
    TransportSolution,
    align_to_union,
    l1_cost_matrix,
    mixture,
    w1_entropic,
    w1_exact,
    w1_weight_gradient,
)
from .simplex import PgdConfig, PgdResult, Weights, pgd_minimize, project_simplex

__all__ = [
    "__version__",
    "AtomSet",
    "CausesSchema",
    "CostMatrix",
    "CoverageReport",
    "DgpConfig",
    "DiscreteDistribution",
    "FitResult",
    "GridSamples",
    "InputDataError",
    "LipschitzEstimate",
    "MisspecInterval",
    "NumericalFailureError",
    "PanelData",
    "PgdConfig",
    "PgdResult",
    "PlaceboResult",
    "ScboundsError",
    "SchemaViolationError",
    "SurveyMicrodata",
    "TransportSolution",
    "Variable",
    "Weights",
    "align_to_union",
    "build_distributions",
    "coverage_report",
    "dgp_grid_samples",
    "dgp_lipschitz",
    "encode_cause_point",
    "estimate_lipschitz",
    "f_xt",
    "fit_james_bound",
    "fit_m_bound",
    "fit_standard_sc",
    "generate_panel",
    "james_bound_value",
    "james_intervals",
    "l1_cost_matrix",
    "m_bound_value",
    "m_intervals",
    "mixture",
    "one_half_hot",
    "pgd_minimize",
    "placebo_study",
    "project_simplex",
    "synthetic_series",
    "unit_distribution",
    "w1_entropic",
    "w1_exact",
    "w1_weight_gradient",
]
