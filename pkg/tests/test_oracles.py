import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from activesq import constants
from activesq.core import (
    ActiveQuery,
    DatabaseExhausted,
    InsufficientAcceptance,
    NoiseModel,
    TargetIndependentQuery,
    UnitVector,
    ZeroVector,
)
from activesq.distributions import (
    HalfspaceTarget,
    LabeledSource,
    Marginal,
    ThresholdTarget,
    band_probability,
)
from activesq.geometry import CpdContext, cpd_eval
from activesq.oracles import (
    DpOracle,
    ExactOracle,
    PrivateDatabase,
    RcnOracle,
    SamplingOracle,
    UncorrelatedOracle,
    answer_exact,
    answer_target_independent,
    filtered_mean,
    noise_grid,
    noise_grid_wrapper,
    validation_size,
)
from activesq.oracles.sampling import Sampler, median_answer
from activesq.queries import (
    Agreement,
    AllPoints,
    AxisInterval,
    Band,
    Disagreement,
    LabelCoordinate,
    PointFunction,
    PositiveLabel,
)

from conftest import sphere_pair_at_distance


def sphere_source(d=6, noise=None, seed=0, w=None):
    w = w if w is not None else UnitVector.basis(d, 0)
    return LabeledSource(Marginal.sphere(d), HalfspaceTarget(w), noise or NoiseModel.none(), seed)


def label_query(tau=0.1):
    return ActiveQuery(AllPoints(), lambda x, l: np.asarray(l, float), 1.0, tau)


# -- exact ------------------------------------------------------------------


def test_exact_balanced_labels():
    assert abs(answer_exact(label_query(), sphere_source())) <= 0.01


@pytest.mark.parametrize("d, gamma, dist", [(6, 0.1, 0.3), (10, 0.2, 0.5), (16, 0.05, 1.0)])
def test_exact_band_error_matches_cpd(d, gamma, dist):
    v, w = sphere_pair_at_distance(d, dist, np.random.default_rng(d))
    src = sphere_source(d, w=UnitVector(w))
    tau = 0.01
    got = ExactOracle(src).answer(ActiveQuery(Band(UnitVector(v), gamma), Disagreement(UnitVector(v)), 0.01, tau))
    assert abs(got - cpd_eval(CpdContext(d, gamma), dist)) <= tau / 10


@pytest.mark.parametrize("a, b, theta", [(0.0, 1.0, 0.37), (0.25, 0.5, 0.3), (0.1, 0.2, 0.1)])
def test_exact_threshold_interval(a, b, theta):
    src = LabeledSource(Marginal.interval(), ThresholdTarget(theta))
    got = ExactOracle(src).answer(ActiveQuery(AxisInterval(a, b), PositiveLabel(), 0.01, 0.01))
    assert got == pytest.approx((b - theta) / (b - a), abs=1e-12)


def test_exact_low_mass_returns_zero_and_flags():
    src = sphere_source(6)
    oracle = ExactOracle(src)
    q = ActiveQuery(Band(UnitVector.basis(6, 1), 0.001), Agreement(UnitVector.basis(6, 0)), 0.5, 0.1)
    assert oracle.answer(q) == 0.0
    assert oracle.diagnostics[-1].code == "low-mass"


def test_exact_generic_query_against_monte_carlo():
    # unstructured filter and query fall back to certified Monte Carlo
    d = 4
    src = LabeledSource(Marginal.gaussian(d), HalfspaceTarget(UnitVector([1, 1, 0, 0])))
    q = ActiveQuery(lambda x: (x[:, 2] > 0).astype(float), lambda x, l: l * np.tanh(x[:, 0]), 0.1, 0.05)
    got = ExactOracle(src, rng=1).answer(q)
    rng = np.random.default_rng(77)
    x = rng.standard_normal((2_000_000, d))
    keep = x[:, 2] > 0
    vals = np.where(x[keep, 0] + x[keep, 1] >= 0, 1, -1) * np.tanh(x[keep, 0])
    assert abs(got - vals.mean()) <= 0.005 + 4 * vals.std() / math.sqrt(keep.sum())


def test_exact_label_coordinate_is_proportional_to_target(rng):
    d = 5
    w = UnitVector.random(d, rng)
    oracle = ExactOracle(sphere_source(d, w=w))
    g = np.array([oracle.answer(ActiveQuery(AllPoints(), LabelCoordinate(j, 1.0), 1.0, 1e-3)) for j in range(d)])
    assert np.allclose(g / np.linalg.norm(g), w.coords, atol=1e-9)


def test_target_independent_queries():
    src = sphere_source(6)
    oracle = ExactOracle(src, rng=3)
    tau = 0.02
    assert answer_target_independent(TargetIndependentQuery(lambda x: np.ones(len(x)), tau), oracle) == pytest.approx(1.0)
    assert abs(oracle.answer_target_independent(TargetIndependentQuery(lambda x: x[:, 1], tau))) <= tau
    band = Band(UnitVector.basis(6, 2), 0.3)
    got = oracle.answer_target_independent(TargetIndependentQuery(band, tau))
    assert abs(got - band_probability(src.marginal, band.normal, 0.3)) <= 1e-12
    sampled = SamplingOracle(sphere_source(6, seed=4), 0.01).answer_target_independent(TargetIndependentQuery(band, tau))
    assert abs(sampled - band_probability(src.marginal, band.normal, 0.3)) <= tau
    assert oracle.tally.target_independent_queries == 3


# -- sampling ---------------------------------------------------------------


def test_sampling_balanced_labels():
    hits = 0
    for seed in range(50):
        hits += abs(SamplingOracle(sphere_source(6, seed=seed), 0.01).answer(label_query(0.1))) <= 0.1
    assert hits >= 49


def test_sampling_threshold_decisions_match_exact():
    theta = 0.37
    agree = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        a = rng.uniform(0, theta)
        b = rng.uniform(theta, 1)
        q = ActiveQuery(AxisInterval(a, b), PositiveLabel(), b - a, 0.25)
        src = LabeledSource(Marginal.interval(), ThresholdTarget(theta), rng=seed)
        exact = ExactOracle(src).answer(q)
        sampled = SamplingOracle(src, 0.01, fast=False).answer(q)
        agree += (exact >= 0.5) == (sampled >= 0.5)
    assert agree >= 990


@pytest.mark.parametrize("tau, delta", [(0.1, 0.05), (0.05, 0.001)])
def test_sampling_label_budget(tau, delta):
    src = sphere_source(6, seed=2)
    SamplingOracle(src, delta).answer(label_query(tau))
    t = constants.labels_per_attempt(tau)
    k = constants.attempts_for(delta)
    assert src.tally.labels_used == t * k
    # c tau^-2 log(1/delta) with c = 2 ln 6 * 18 plus rounding
    assert src.tally.labels_used <= (2 * math.log(6) / tau**2 + 1) * (18 * math.log(1 / delta) + 1)


class CountingSource(LabeledSource):
    """Counts label accesses independently of the tally."""

    def __post_init__(self):
        super().__post_init__()
        self.accesses = 0

    def request_labels(self, points):
        self.accesses += len(points)
        return super().request_labels(points)


def test_tally_matches_label_accesses():
    src = CountingSource(Marginal.sphere(5), HalfspaceTarget(UnitVector.basis(5, 0)), rng=8)
    oracle = SamplingOracle(src, 0.05, fast=False)
    oracle.answer(ActiveQuery(Band(UnitVector.basis(5, 1), 0.4), PositiveLabel(), 0.3, 0.1))
    oracle.answer(label_query(0.2))
    assert src.tally.labels_used == src.accesses > 0


def test_filter_fidelity_with_stubbed_draws():
    class Scripted:
        """Deterministic stand-in for the generator: fixed points and fixed uniforms."""

        def __init__(self, points, uniforms):
            self.points, self.uniforms = points, uniforms

        def random(self, n):
            out, self.uniforms = self.uniforms[:n], self.uniforms[n:]
            return out

    rng = np.random.default_rng(0)
    pts = Marginal.sphere(3).sample(rng, 1000)
    us = rng.random(1000)
    chi = lambda x: 0.5 * (1 + x[:, 0])
    marginal = Marginal.sphere(3)
    src = LabeledSource(marginal, HalfspaceTarget(UnitVector.basis(3, 0)), rng=0)
    sampler = Sampler(src, fast=False)
    scripted = Scripted(pts, us)
    src.rng = scripted
    src.marginal = type("Fixed", (), {"d": 3, "sample": staticmethod(lambda _rng, n: pts[:n])})()
    expected = np.flatnonzero(us < chi(pts))
    t = 25
    got, used = sampler._collect(chi, t, 1000, 0.5)
    assert np.array_equal(got, pts[expected[:t]])
    assert used == expected[t - 1] + 1


def test_acceptance_frequency_matches_filter_mass():
    src = sphere_source(4, seed=6)
    band = Band(UnitVector.basis(4, 1), 0.3)
    sampler = Sampler(src, fast=False)
    pts, used = sampler._collect(band, 10**6, 10**8, 0.5)
    assert abs(10**6 / used - band_probability(src.marginal, None, 0.3)) <= 0.003


def test_fast_and_generic_paths_agree_in_distribution():
    from scipy import stats

    d = 6
    q = ActiveQuery(Band(UnitVector([1, 1, 0, 0, 0, 0]), 0.3), Agreement(UnitVector([1, 1, 0, 0, 0, 0])), 0.1, 0.1)
    w = UnitVector([1, 0.5, 0, 0, 0.2, 0])
    fast = [SamplingOracle(sphere_source(d, NoiseModel.rcn(0.1), s, w), 0.3).answer(q) for s in range(300)]
    slow = [SamplingOracle(sphere_source(d, NoiseModel.rcn(0.1), 10_000 + s, w), 0.3, fast=False).answer(q)
            for s in range(300)]
    assert stats.ks_2samp(fast, slow).pvalue > 0.001


def test_insufficient_acceptance_when_mass_below_tolerance():
    src = sphere_source(8, seed=1)
    q = ActiveQuery(Band(UnitVector.basis(8, 1), 1e-4), Agreement(UnitVector.basis(8, 1)), 0.5, 0.2)
    for fast in (True, False):
        with pytest.raises(InsufficientAcceptance):
            SamplingOracle(src, 0.1, fast=fast).answer(q)


def test_median_boosting_with_adversarial_attempts():
    delta = 0.01
    k = constants.attempts_for(delta)
    rng = np.random.default_rng(3)
    reps = 20_000
    bad = rng.random((reps, k)) < 1 / 3
    good_values = rng.uniform(-0.1, 0.1, (reps, k))
    values = np.where(bad, 5.0, good_values)  # adversary pushes failed attempts far to one side
    medians = np.median(values, axis=1)
    assert np.mean(np.abs(medians) > 0.1) <= delta
    assert median_answer(np.array([0.0, 1.0, 5.0])) == 1.0


# -- uniform noise ----------------------------------------------------------


def test_rcn_with_zero_rate_is_plain_sampling():
    q = ActiveQuery(Band(UnitVector.basis(6, 1), 0.3), PositiveLabel(), 0.1, 0.1)
    a = RcnOracle(sphere_source(6, seed=11), 0.0, 0.05).answer(q)
    b = SamplingOracle(sphere_source(6, seed=11), 0.05).answer(q)
    assert a == b


def test_rcn_label_free_query_ignores_noise():
    q = ActiveQuery(AllPoints(), PointFunction(lambda x: x[:, 0] ** 2), 1.0, 0.05)
    noisy = [RcnOracle(sphere_source(4, NoiseModel.rcn(0.3), s), 0.3, 0.05, fast=False).answer(q) for s in range(40)]
    clean = [SamplingOracle(sphere_source(4, seed=500 + s), 0.05, fast=False).answer(q) for s in range(40)]
    assert abs(np.mean(noisy) - np.mean(clean)) < 0.01
    assert all(abs(v - 0.25) <= 0.05 for v in noisy)


def test_rcn_rescales_the_correlation(monkeypatch):
    oracle = RcnOracle(sphere_source(6, NoiseModel.rcn(0.3), 1), 0.3, 0.05)
    raw = 0.12
    monkeypatch.setattr(oracle.sampler, "count_attempts", lambda *a, **k: np.full(5, raw))
    monkeypatch.setattr(oracle.sampler, "example_attempts", lambda *a, **k: np.full(5, raw))
    q = ActiveQuery(AllPoints(), Agreement(UnitVector.basis(6, 1)), 1.0, 0.1)
    assert oracle.answer(q) == pytest.approx(raw / 0.4)


def test_rcn_answers_within_tolerance():
    d = 8
    rng = np.random.default_rng(21)
    v, w = sphere_pair_at_distance(d, 0.4, rng)
    q = ActiveQuery(Band(UnitVector(v), 0.1), Agreement(UnitVector(v)), 0.05, 0.05)
    truth = ExactOracle(sphere_source(d, w=UnitVector(w))).answer(q)
    ok = sum(
        abs(RcnOracle(sphere_source(d, NoiseModel.rcn(0.3), s, UnitVector(w)), 0.3, 0.01).answer(q) - truth) <= 0.05
        for s in range(200)
    )
    assert ok >= 196


def test_rcn_label_cost_scales_with_noise():
    q = ActiveQuery(Band(UnitVector.basis(8, 0), 0.2), Agreement(UnitVector.basis(8, 0)), 0.1, 0.05)
    used = {}
    for eta in (0.0, 0.2, 0.4):
        src = sphere_source(8, NoiseModel.rcn(eta), 3)
        RcnOracle(src, eta, 0.01).answer(q)
        used[eta] = src.tally.labels_used
    for eta in (0.2, 0.4):
        ratio = used[eta] / used[0.0] * (1 - 2 * eta) ** 2
        assert 0.5 <= ratio <= 2.0


def test_uncorrelated_with_constant_rate_meets_rcn_contract():
    d = 6
    w = UnitVector.random(d, np.random.default_rng(2))
    q = ActiveQuery(AllPoints(), Agreement(UnitVector.basis(d, 0)), 1.0, 0.1)
    truth = ExactOracle(sphere_source(d, w=w)).answer(q)
    const = NoiseModel.per_point(lambda x: np.full(len(x), 0.2), 0.2)
    ok = sum(abs(UncorrelatedOracle(sphere_source(d, const, s, w), 0.2, 0.05).answer(q) - truth) <= 0.1
             for s in range(40))
    assert ok >= 39


def test_uncorrelated_split():
    o = UncorrelatedOracle(sphere_source(), 0.2, 0.1)
    assert o.split_tolerances(0.1, "odd") == pytest.approx((0.0, 0.6 * 0.075))
    assert o.split_tolerances(0.1, "even") == (0.1, 0.0)
    assert o.split_tolerances(0.1, None) == pytest.approx((0.05, 0.6 * 0.025))


def test_correlated_noise_breaks_the_contract():
    # flip rate eta + s * h_v h_w: its deviation lines up with phi * psi for phi = l h_v
    d, eta, s, tau = 6, 0.2, 0.1, 0.05
    rng = np.random.default_rng(9)
    v, w = sphere_pair_at_distance(d, 0.8, rng)
    rate = lambda x: eta + s * np.where(x @ v >= 0, 1, -1) * np.where(x @ w >= 0, 1, -1)
    src = sphere_source(d, NoiseModel.per_point(rate, eta), 4, UnitVector(w))
    q = ActiveQuery(AllPoints(), Agreement(UnitVector(v)), 1.0, tau)
    truth = ExactOracle(sphere_source(d, w=UnitVector(w))).answer(q)
    got = UncorrelatedOracle(src, eta, 0.01).answer(q)
    # the answer is biased by about -2 s / (1 - 2 eta) = -1/3
    assert got - truth < -tau


# -- unknown rate grid ------------------------------------------------------


@given(st.floats(0.0, 0.45), st.floats(0.01, 0.5))
def test_noise_grid_covers_every_rate(eta0, tau):
    grid = noise_grid(eta0, tau)
    assert grid[-1] == eta0
    for eta in np.linspace(0, eta0, 23):
        best = min(abs((1 - 2 * eta) / (1 - 2 * g) - 1) for g in grid)
        assert best <= tau / 4 + 1e-12


@pytest.mark.parametrize("eta0", [0.1, 0.3, 0.4, 0.49])
@pytest.mark.parametrize("tau", [0.02, 0.1, 0.3])
def test_noise_grid_size(eta0, tau):
    # ln(1 + x) >= x / (1 + x) gives k <= (4/tau + 1) ln(1/(1 - 2 eta0)) + 2
    k = len(noise_grid(eta0, tau))
    assert k <= (4 / tau + 1) * math.log(1 / (1 - 2 * eta0)) + 2


def test_grid_wrapper_selects_a_good_hypothesis():
    from activesq.learners import learn_threshold
    from activesq.learners.simple import ThresholdHypothesis

    eta0, tau, eps = 0.3, 0.5, 0.05
    grid = noise_grid(eta0, tau)
    eta = grid[3]
    theta = 0.37
    make = lambda seed: LabeledSource(Marginal.interval(), ThresholdTarget(theta), NoiseModel.rcn(eta), seed)
    calls = iter(range(100, 200))

    def learn(guess):
        return learn_threshold(RcnOracle(make(next(calls)), guess, 1e-3), eps)

    result = noise_grid_wrapper(learn, eta0, tau, make(7), eps, 0.05)
    assert isinstance(result.hypothesis, ThresholdHypothesis)
    assert abs(result.hypothesis.theta_hat - theta) <= eps
    assert validation_size(eps, 0.05, len(grid)) == math.ceil(8 / eps**2 * math.log(2 * len(grid) / 0.05))


def test_grid_wrapper_reraises_when_every_guess_fails():
    def learn(_):
        raise ZeroVector("nothing")

    src = LabeledSource(Marginal.interval(), ThresholdTarget(0.5))
    with pytest.raises(ZeroVector):
        noise_grid_wrapper(learn, 0.2, 0.5, src, 0.1, 0.1)


def test_grid_wrapper_noiseless():
    from activesq.learners import learn_threshold

    src = lambda seed: LabeledSource(Marginal.interval(), ThresholdTarget(0.6), rng=seed)
    res = noise_grid_wrapper(lambda g: learn_threshold(RcnOracle(src(1), g, 1e-3), 0.05), 0.2, 0.5, src(2), 0.05, 0.05)
    assert abs(res.hypothesis.theta_hat - 0.6) <= 0.05


# -- differential privacy ---------------------------------------------------


def _db(n, seed=0, d=2):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, d))
    return PrivateDatabase(pts, np.where(rng.random(n) < 0.5, 1, -1))


def test_adjacent_databases_move_the_answer_by_at_most_one_over_size():
    rng = np.random.default_rng(1)
    q = ActiveQuery(lambda x: (x[:, 0] > -0.5).astype(float), lambda x, l: l * np.tanh(x[:, 1]), 0.1, 0.1)
    for trial in range(1000):
        n = int(rng.integers(5, 60))
        pts = rng.standard_normal((n, 2))
        labels = np.where(rng.random(n) < 0.5, 1, -1)
        u = np.zeros(n)  # deterministic filtering keeps T identical on both databases
        i = int(rng.integers(n))
        pts2, labels2 = pts.copy(), labels.copy()
        pts2[i] = rng.standard_normal(2)
        labels2[i] = -labels2[i]
        m1, c1 = filtered_mean(q, pts, labels, u)
        m2, c2 = filtered_mean(q, pts2, labels2, u)
        if c1 == c2 and c1 > 0:
            # phi ranges over [-1, 1]: one record moves the mean by at most 2/|T|, and 1/|T| for [0,1]-valued phi
            assert abs(m1 - m2) <= 2.0 / c1 + 1e-12
    q01 = ActiveQuery(lambda x: np.ones(len(x)), PositiveLabel(), 0.1, 0.1)
    for trial in range(1000):
        n = int(rng.integers(5, 60))
        pts = rng.standard_normal((n, 2))
        labels = np.where(rng.random(n) < 0.5, 1, -1)
        labels2 = labels.copy()
        labels2[int(rng.integers(n))] *= -1
        m1, c1 = filtered_mean(q01, pts, labels, np.zeros(n))
        m2, _ = filtered_mean(q01, pts, labels2, np.zeros(n))
        assert abs(m1 - m2) <= 1.0 / c1 + 1e-12


def test_no_privacy_limit_returns_the_empirical_mean():
    db = _db(5000)
    q = ActiveQuery(AllPoints(), PositiveLabel(), 1.0, 0.2)
    oracle = DpOracle(db, 1e15, 0.1, 1, rng=0)
    got = oracle.answer(q)
    block = slice(*db.audit[0][1:])
    assert got == pytest.approx(float(np.mean((db.labels[block] + 1) / 2)), abs=1e-12)


def test_laplace_calibration():
    alpha, size = 0.7, 250
    oracle = DpOracle(_db(10), alpha, 0.1, 1, rng=5)
    scale = oracle.laplace_scale(size)
    draws = oracle.rng.laplace(0.0, scale, 100_000)
    assert abs(draws.var() / (2 * scale**2) - 1) <= 0.05
    assert scale == 1.0 / (alpha * size)


def test_repeated_answers_follow_laplace():
    # chi = 1 keeps every record of the block, so T is the same on every repetition
    q = ActiveQuery(AllPoints(), PositiveLabel(), 1.0, 1.0)
    n = constants.dp_block_size(1.0, 1.0, 2.0, 1, 0.5)
    db = _db(n)
    oracle = DpOracle(db, 2.0, 0.5, 1, rng=0)
    mean = float(np.mean((db.labels + 1) / 2))
    answers = np.empty(100_000)
    for i in range(answers.size):
        db.cursor = 0
        answers[i] = oracle.answer(q)
    scale = oracle.laplace_scale(n)
    assert abs((answers - mean).var() / (2 * scale**2) - 1) <= 0.05
    assert set(oracle.filtered_sizes) == {n}


def test_blocks_are_disjoint_and_exhaustion_is_reported():
    db = _db(2000)
    oracle = DpOracle(db, 1.0, 0.1, 3, rng=1)
    q = ActiveQuery(AllPoints(), PositiveLabel(), 1.0, 0.5)
    used = set()
    with pytest.raises(DatabaseExhausted):
        for _ in range(100):
            oracle.answer(q)
    for _, start, stop in db.audit:
        block = set(range(start, stop))
        assert not block & used
        used |= block
    assert oracle.tally.unlabeled_used == len(used)


def test_block_size_formula():
    assert constants.dp_block_size(0.5, 0.1, 1.0, 10, 0.05) == math.ceil(
        2 / 0.5 * max(2 / (1.0 * 0.1), 8 / 0.01) * math.log(4 * 10 / 0.05))


def test_database_csv_round_trip(tmp_path):
    db = _db(30, d=3)
    path = tmp_path / "db.csv"
    db.to_csv(path)
    back = PrivateDatabase.from_csv(path)
    assert np.array_equal(back.points, db.points)
    assert np.array_equal(back.labels, db.labels)


def test_database_validation():
    with pytest.raises(ValueError):
        PrivateDatabase(np.zeros((3, 2)), np.array([1, 0, -1]))
    with pytest.raises(ValueError):
        PrivateDatabase(np.zeros((3, 2)), np.array([1, -1]))
