"""Robust sparse estimation for partially linear additive models."""

from .loss import (
    MScaleSpec,
    RhoFunction,
    ScaleConvergenceError,
    SquareLoss,
    TukeyBisquare,
    TUKEY_C0_50,
    TUKEY_C1_EFF85,
    m_scale,
    mad_scale,
)
from .penalties import (
    AdaptiveLassoPenalty,
    McpPenalty,
    Penalty,
    ScadPenalty,
    make_penalty,
)
from .preliminary import (
    FitFailureError,
    PlamData,
    PreliminaryFit,
    RidgeSOptions,
    adjusted_response,
    eta_functions,
    initial_residual_scale,
    ls_options,
    ridge_s_fit,
)
from .selection import (
    PenaltyGrid,
    SelectionError,
    SelectionResult,
    make_grid,
    rbic,
    select,
)
from .solver import PenalizedFit, SolverOptions, penalized_fit, pl_objective, predict
from .splines import (
    AdditiveDesign,
    CenteredBasis,
    DomainMap,
    SplineSpec,
    build_design,
    default_internal_knots,
    make_knots,
)

__version__ = "0.1.0"
