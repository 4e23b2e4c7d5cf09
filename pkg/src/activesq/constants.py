"""Numerical constants fixed by the implementation.

The sizes below come from Hoeffding's inequality and are referenced by the
tests, so changing them here changes the checked budgets too.
"""

from __future__ import annotations

import math

# -- sampling simulation ----------------------------------------------------
# One attempt averages t filtered labels with t = ceil((2 / tau^2) * ln 6).
# Hoeffding for a [-1, 1] variable: Pr[|mean - E| > tau] <= 2 exp(-t tau^2 / 2) <= 1/3.
SAMPLING_LOG_TERM = math.log(6.0)
SAMPLING_T_FACTOR = 2.0

# Number of median-combined attempts: k = ceil(18 ln(1/delta)).
# With per-attempt failure <= 1/3, the median fails only if k/2 attempts fail;
# Hoeffding on Bin(k, 1/3) gives exp(-2 k (1/6)^2) = exp(-k / 18) <= delta.
MEDIAN_ATTEMPT_FACTOR = 18.0

# Unlabeled cap per attempt: ceil(c3 * t / tau0).
UNLABELED_CAP_FACTOR = 2.0


def labels_per_attempt(tau: float) -> int:
    return math.ceil(SAMPLING_T_FACTOR * SAMPLING_LOG_TERM / (tau * tau))


def attempts_for(delta: float) -> int:
    return max(1, math.ceil(MEDIAN_ATTEMPT_FACTOR * math.log(1.0 / delta)))


def unlabeled_cap(t: int, tau0: float) -> int:
    return math.ceil(UNLABELED_CAP_FACTOR * t / tau0)


# -- differential privacy ---------------------------------------------------
# block = ceil((c / tau0) * max(c_a / (alpha tau), c_b / tau^2) * ln(4 M / delta))
DP_FILTER_FACTOR = 2.0
DP_PRIVACY_FACTOR = 2.0
DP_SAMPLING_FACTOR = 8.0


def dp_block_size(tau0: float, tau: float, alpha: float, max_queries: int, delta: float) -> int:
    core = max(DP_PRIVACY_FACTOR / (alpha * tau), DP_SAMPLING_FACTOR / (tau * tau))
    return math.ceil(DP_FILTER_FACTOR / tau0 * core * math.log(4.0 * max_queries / delta))


def dp_unlabeled_block(tau: float, alpha: float, max_queries: int, delta: float) -> int:
    core = max(DP_PRIVACY_FACTOR / (alpha * tau), DP_SAMPLING_FACTOR / (tau * tau))
    return math.ceil(core * math.log(4.0 * max_queries / delta))


# -- exact oracle -----------------------------------------------------------
EXACT_ACCURACY_FRACTION = 0.1  # certified accuracy tau / 10
MC_SIGMAS = 6.0
MC_BATCH = 200_000
MC_MAX_SAMPLES = 20_000_000

# -- halfspace learners -----------------------------------------------------
ZERO_VECTOR_NORM = 1e-12
