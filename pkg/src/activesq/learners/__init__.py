"""Learning algorithms written against the oracle interface."""

from .logconcave import (
    FilteredView,
    LogcConstants,
    active_learn_hs_logc,
    fit_margin_constant,
    passive_sq_averaging,
    wedge_tail,
)
from .noise_rate import (
    NoiseRateTrace,
    abs_correlation,
    active_learn_hs_u_unknown_noise,
    correlation_moments,
    estimate_noise_rate,
    estimator_sizes,
)
from .simple import (
    RectangleHypothesis,
    ThresholdHypothesis,
    learn_rectangle,
    learn_threshold,
    rectangle_query_bound,
)
from .uniform import (
    HalfspaceHypothesis,
    active_learn_hs_u,
    learn_hs_u_passive,
    measure_distance,
    min_tolerance_ratio,
    passive_tolerance,
    stage_count,
)

__all__ = [
    "FilteredView",
    "HalfspaceHypothesis",
    "LogcConstants",
    "NoiseRateTrace",
    "RectangleHypothesis",
    "ThresholdHypothesis",
    "abs_correlation",
    "active_learn_hs_logc",
    "active_learn_hs_u",
    "active_learn_hs_u_unknown_noise",
    "correlation_moments",
    "estimate_noise_rate",
    "estimator_sizes",
    "fit_margin_constant",
    "learn_hs_u_passive",
    "learn_rectangle",
    "learn_threshold",
    "measure_distance",
    "min_tolerance_ratio",
    "passive_sq_averaging",
    "passive_tolerance",
    "rectangle_query_bound",
    "stage_count",
    "wedge_tail",
]
