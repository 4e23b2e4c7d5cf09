"""Estimating a uniform label-flip rate from the average correlation with random halfspaces.

For v uniform on the sphere, E_v |E[h_v(x) l]| = (1 - 2 eta) * nu with
nu = E|2 asin(v_1) / pi| a known function of d.  A doubling search finds a
lower bound 2^-i on 1 - 2 eta, then one estimate at tolerance proportional
to that bound gives 1 - 2 eta to relative accuracy tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .. import quadrature
from ..core import BudgetExhausted, NoiseKind, UnitVector, UsageKind
from ..distributions import HalfspaceTarget, LabeledSource, MarginalKind
from .uniform import HalfspaceHypothesis, active_learn_hs_u


def _first_coordinate_moment(d: int, fn) -> float:
    # density of v_1 is proportional to (1 - t^2)^((d-3)/2); substitute t = sin(phi)
    def weight(phi):
        return np.cos(phi) ** (d - 2.0)

    norm = quadrature.integrate(weight, -math.pi / 2, math.pi / 2, tol=1e-14)
    return quadrature.integrate(lambda p: weight(p) * fn(np.sin(p)), -math.pi / 2, math.pi / 2, tol=1e-14) / norm


@lru_cache(maxsize=None)
def correlation_moments(d: int) -> tuple[float, float]:
    """(nu, E[(2 asin(v_1)/pi)^2]) for v uniform on S^{d-1}."""
    nu = _first_coordinate_moment(d, lambda t: np.abs(2.0 * np.arcsin(t) / math.pi))
    second = _first_coordinate_moment(d, lambda t: (2.0 * np.arcsin(t) / math.pi) ** 2)
    return nu, second


@dataclass
class AbsCorrelationEstimate:
    value: float
    directions: int
    labels_per_direction: int


def estimator_sizes(theta: float, delta: float, variance: float) -> tuple[int, int]:
    """(|V|, m) such that the estimate is within theta of its target w.p. >= 1 - delta.

    Half of theta goes to averaging over directions (Bernstein, variance bound
    ``variance``, range 1). The other half goes to the per-direction correlation
    estimates, which must all be accurate (Hoeffding with a union bound over V).
    """
    half = theta / 2.0
    n_dirs = math.ceil((2.0 * variance + 2.0 * half / 3.0) / half**2 * math.log(4.0 / delta))
    m = math.ceil(2.0 / half**2 * math.log(4.0 * n_dirs / delta))
    return n_dirs, m


def _check_source(source: LabeledSource) -> None:
    if source.marginal.kind is not MarginalKind.UNIFORM_SPHERE:
        raise ValueError("noise-rate estimation needs the uniform sphere marginal")
    if not isinstance(source.target, HalfspaceTarget):
        raise ValueError("noise-rate estimation needs a homogeneous halfspace target")


def abs_correlation(source: LabeledSource, theta: float, delta: float, variance: float,
                    fast: bool = True) -> AbsCorrelationEstimate:
    """Estimate E_v |E[h_v(x) l]| with fresh labelled examples for every random direction v.

    The fast path simulates the same experiment through its sufficient statistics.
    <v, w> is drawn from its one-dimensional law, and the number of agreements
    among m fresh examples is binomial. It needs uniform or no noise.
    """
    n_dirs, m = estimator_sizes(theta, delta, variance)
    rng = source.rng
    d = source.d
    if fast and source.noise.kind is not NoiseKind.PER_POINT:
        shrink = 1.0 - 2.0 * source.noise.eta
        total = 0.0
        chunk = 1 << 20
        done = 0
        while done < n_dirs:
            n = min(chunk, n_dirs - done)
            s = np.sqrt(rng.beta(0.5, (d - 1) / 2.0, size=n)) * rng.choice((-1.0, 1.0), size=n)
            corr = shrink * 2.0 * np.arcsin(s) / math.pi
            agree = rng.binomial(m, 0.5 * (1.0 + corr))
            total += float(np.abs(2.0 * agree / m - 1.0).sum())
            done += n
        source.tally.add(UsageKind.UNLABELED, n_dirs * m)
        source.tally.add(UsageKind.LABELS, n_dirs * m)
        return AbsCorrelationEstimate(total / n_dirs, n_dirs, m)
    total = 0.0
    for _ in range(n_dirs):
        v = UnitVector.random(d, rng)
        pts, labels = source.labeled_sample(m)
        total += abs(float(np.mean(np.where(pts @ v.coords >= 0, 1, -1) * labels)))
    return AbsCorrelationEstimate(total / n_dirs, n_dirs, m)


@dataclass
class NoiseRateTrace:
    nu: float = 0.0
    lower_bound_exponent: int = 0
    phase_one: list = field(default_factory=list)
    phase_two: float = 0.0


def estimate_noise_rate(source: LabeledSource, tau: float, delta: float, d: int | None = None,
                        i_max: int = 30, fast: bool = True, trace: NoiseRateTrace | None = None) -> float:
    """eta' with (1 - 2 eta)/(1 - 2 eta') in [1 - tau, 1 + tau] w.p. >= 1 - delta."""
    _check_source(source)
    d = source.d if d is None else d
    if not 0.0 < tau < 1.0 or not 0.0 < delta < 1.0:
        raise ValueError("tau and delta must lie in (0, 1)")
    nu, second = correlation_moments(d)
    trace = trace if trace is not None else NoiseRateTrace()
    trace.nu = nu
    found = None
    for i in range(1, i_max + 1):
        scale = 2.0**-i
        est = abs_correlation(source, nu * scale, delta / 2.0 ** (i + 1), second, fast)
        trace.phase_one.append(est.value)
        if est.value >= 2.0 * nu * scale:
            found = i
            break
    if found is None:
        raise BudgetExhausted(f"no lower bound on 1 - 2 eta above 2^-{i_max}")
    trace.lower_bound_exponent = found
    # 1 - 2 eta < 3 * 2^(1 - i) once the search stops at i (it did not stop at i - 1)
    shrink_cap = min(1.0, 3.0 * 2.0 ** (1 - found))
    est = abs_correlation(source, nu * tau * 2.0**-found / 2.0, delta / 2.0, shrink_cap**2 * second, fast)
    trace.phase_two = est.value
    ratio = est.value / nu
    return max(0.0, min((1.0 - ratio) / 2.0, 0.5 - 1e-12))


# ---------------------------------------------------------------------------
# composition with the active learner

NOISE_TOLERANCE_RATIO = 1.0 / 8.0  # tau_est * sqrt(d)


def active_learn_hs_u_unknown_noise(source: LabeledSource, eps: float, d: int, delta: float,
                                    kappa: float = NOISE_TOLERANCE_RATIO, fast: bool = True) -> HalfspaceHypothesis:
    """Estimate eta at tolerance kappa / sqrt(d), then learn through a uniform-noise oracle."""
    from ..oracles import RcnOracle

    trace = NoiseRateTrace()
    eta_hat = estimate_noise_rate(source, kappa / math.sqrt(d), delta / 2.0, d, fast=fast, trace=trace)
    queries = query_count(eps, d)
    oracle = RcnOracle(source, eta_hat, delta / 2.0 / queries, fast=fast)
    hyp = active_learn_hs_u(oracle, eps, d)
    return HalfspaceHypothesis(hyp.normal, {**hyp.trace, "eta_estimate": eta_hat, "lower_bound_exponent":
                                            trace.lower_bound_exponent})


def query_count(eps: float, d: int) -> int:
    """Active queries issued by the uniform active learner (for splitting delta)."""
    from .uniform import stage_count

    if d < 4:
        return d + 1
    return (d + 1) * (1 + stage_count(eps))
