"""Calibration diagnostics for finite-outcome forecasts.

Vanilla, distribution, property and decision calibration, swap regret and
Bayes-risk estimation residuals, plus brute-force cross-checks of how these
notions imply one another.
"""

from .errors import CalibError
from .losses import (
    BayesPair,
    IdentificationFn,
    LossFn,
    best_response,
    check_consistency,
    estimate_identification_regularity,
    expected_loss,
    loss_from_identification,
    make_bayes_pair,
    make_identification,
    make_simple_loss,
    pinball_loss,
    squared_loss,
    zero_one_loss,
)
from .metrics import (
    CalibrationReport,
    LevelEntry,
    LevelResidualMap,
    ScalarResidual,
    aggregate,
    bayes_risk_estimation_residual,
    decision_calibration,
    distribution_calibration,
    gamma_calibration,
    group_metric,
    robust_swap_regret,
    swap_regret,
    vanilla_calibration,
)
from .outcomes import (
    ConditionSpec,
    OutcomeSpace,
    Pmf,
    PredictionDataset,
    Record,
    condition,
    mixture,
    pmf_new,
    total_variation,
)
from .properties import (
    Property,
    evaluate,
    level_set_convexity_check,
    make_standard_property,
    refine,
    value_distance,
)

__version__ = "0.1.0"
