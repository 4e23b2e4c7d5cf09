import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from activesq.core import NoiseModel, UnitVector
from activesq.distributions import (
    HalfspaceTarget,
    LabeledSource,
    Marginal,
    RectangleTarget,
    ThresholdTarget,
    band_constant,
    band_probability,
    disagreement_probability,
    plane_radial_cdf,
    projection_density,
    space_radial_cdf,
    space_radial_partial_mean,
)
from activesq import quadrature

SYMMETRIC = [Marginal.sphere(6), Marginal.gaussian(6), Marginal.ball(6)]


def test_sphere_sample_moments(rng):
    x = Marginal.sphere(3).sample(rng, 100_000)
    assert np.all(np.abs(x.mean(axis=0)) < 0.02)
    assert np.all(np.abs(np.linalg.norm(x, axis=1) - 1.0) < 1e-12)


def test_gaussian_sample_covariance(rng):
    x = Marginal.gaussian(2).sample(rng, 100_000)
    assert np.linalg.norm(np.cov(x.T) - np.eye(2)) < 0.05


def test_ball_is_isotropic(rng):
    x = Marginal.ball(5).sample(rng, 200_000)
    assert np.linalg.norm(np.cov(x.T) - np.eye(5)) < 0.05
    assert np.linalg.norm(x, axis=1).max() <= math.sqrt(7) + 1e-12


@given(st.integers(2, 30), st.integers(0, 10_000))
def test_sphere_points_on_sphere(d, seed):
    x = Marginal.sphere(d).sample(np.random.default_rng(seed), 50)
    assert np.all(np.abs(np.linalg.norm(x, axis=1) - 1.0) < 1e-12)


def test_clean_label():
    src = LabeledSource(Marginal.sphere(3), HalfspaceTarget(UnitVector([1, 0, 0])))
    assert src.request_label([0.5, 0.1, 0.0]) == 1
    assert src.request_label([-0.5, 0.1, 0.0]) == -1


def test_rcn_flip_rate():
    eta = 0.3
    src = LabeledSource(Marginal.sphere(3), HalfspaceTarget(UnitVector([1, 0, 0])), NoiseModel.rcn(eta), 3)
    x = np.tile([[0.6, 0.8, 0.0]], (1_000_000, 1))
    flips = np.mean(src.request_labels(x) == -1)
    assert abs(flips - eta) < 0.002
    assert src.tally.labels_used == 1_000_000


def test_zero_per_point_noise_is_clean(rng):
    src = LabeledSource(Marginal.sphere(4), HalfspaceTarget(UnitVector([1, 1, 0, 0])),
                        NoiseModel.per_point(lambda x: np.zeros(len(x)), 0.0), 4)
    x = Marginal.sphere(4).sample(rng, 5000)
    assert np.array_equal(src.request_labels(x), src.clean_labels(x))


def test_tally_counts_every_access():
    src = LabeledSource(Marginal.sphere(3), HalfspaceTarget(UnitVector([0, 0, 1])), rng=1)
    src.labeled_sample(17)
    src.sample_unlabeled(5)
    src.request_labels(np.ones((3, 3)))
    assert (src.tally.unlabeled_used, src.tally.labels_used) == (22, 20)


def test_threshold_and_rectangle_targets():
    assert ThresholdTarget(0.3).label(np.array([[0.2], [0.3], [0.9]])).tolist() == [-1, 1, 1]
    box = RectangleTarget((0.1, 0.2), (0.5, 0.6))
    assert box.label(np.array([[0.3, 0.3], [0.3, 0.7]])).tolist() == [1, -1]
    assert box.axis(1) == RectangleTarget((0.2,), (0.6,))


def test_band_probability_exact_values():
    assert band_probability(Marginal.sphere(7), None, 1.0) == 1.0
    # on S^2 the projection is uniform on [-1, 1]
    assert band_probability(Marginal.sphere(3), None, 0.5) == pytest.approx(0.5, abs=1e-12)
    assert band_probability(Marginal.gaussian(4), None, 1.3) == pytest.approx(math.erf(1.3 / math.sqrt(2)), abs=1e-12)


@pytest.mark.parametrize("marginal", [Marginal.gaussian(5), Marginal.ball(5), Marginal.sphere(8)])
def test_band_probability_against_monte_carlo(marginal):
    rng = np.random.default_rng(99)
    n = 10_000_000
    proj = marginal.sample(rng, n)[:, 0] if marginal.d <= 5 else None
    if proj is None:
        # first coordinate of a uniform sphere point, drawn in chunks to keep memory small
        proj = np.concatenate([marginal.sample(rng, 1_000_000)[:, 0] for _ in range(10)])
    for gamma in (0.05, 0.3, 0.9):
        p = float(np.mean(np.abs(proj) <= gamma))
        se = math.sqrt(p * (1 - p) / n)
        assert abs(band_probability(marginal, None, gamma) - p) <= 3 * se


@pytest.mark.parametrize("marginal", SYMMETRIC)
def test_band_probability_monotone(marginal):
    vals = [band_probability(marginal, None, g) for g in np.linspace(0, 3, 40)]
    assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))


def test_gaussian_band_tends_to_one():
    assert band_probability(Marginal.gaussian(3), None, 8.0) > 1 - 1e-12


@pytest.mark.parametrize("marginal, c_m", [(Marginal.gaussian(5), 0.6827), (Marginal.ball(5), 0.644)])
def test_log_concave_band_bounds(marginal, c_m):
    found = band_constant(marginal)
    assert found == pytest.approx(c_m, abs=1e-3)
    for a in np.linspace(0.01, 1.0, 100):
        p = band_probability(marginal, None, a)
        assert found * a - 1e-12 <= p <= 2 * a


@pytest.mark.parametrize("marginal", SYMMETRIC)
def test_projection_density_integrates_to_one(marginal):
    hi = 12.0 if marginal.kind.value == "gaussian" else math.sqrt(marginal.d + 2.0)
    total = quadrature.integrate(lambda t: projection_density(marginal, t), -hi, hi, tol=1e-12)
    assert total == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("marginal", SYMMETRIC)
def test_radial_laws_against_monte_carlo(marginal):
    rng = np.random.default_rng(5)
    n = 2_000_000
    x = marginal.sample(rng, n)
    r2 = np.linalg.norm(x[:, :2], axis=1)
    r3 = np.linalg.norm(x[:, :3], axis=1)
    for r in (0.3, 0.8, 1.5):
        p2, p3 = np.mean(r2 <= r), np.mean(r3 <= r)
        assert abs(float(plane_radial_cdf(marginal, np.array([r]))[0]) - p2) <= 4 * math.sqrt(p2 * (1 - p2) / n) + 1e-9
        assert abs(float(space_radial_cdf(marginal, np.array([r]))[0]) - p3) <= 4 * math.sqrt(p3 * (1 - p3) / n) + 1e-9
        part = r3 * (r3 <= r)
        se = part.std() / math.sqrt(n)
        assert abs(float(space_radial_partial_mean(marginal, np.array([r]))[0]) - part.mean()) <= 4 * se + 1e-9


@pytest.mark.parametrize("marginal", SYMMETRIC)
def test_disagreement_special_angles(marginal):
    u = UnitVector.basis(6, 0)
    assert disagreement_probability(marginal, u, u) == 0
    assert disagreement_probability(marginal, u, UnitVector.basis(6, 1)) == pytest.approx(0.5)
    assert disagreement_probability(marginal, u, UnitVector(-u.coords)) == pytest.approx(1.0)


@given(st.integers(0, 100_000))
def test_disagreement_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    m = Marginal.gaussian(4)
    a, b, c = (UnitVector.random(4, rng) for _ in range(3))
    dab = disagreement_probability(m, a, b)
    assert dab == pytest.approx(disagreement_probability(m, b, a))
    assert dab <= disagreement_probability(m, a, c) + disagreement_probability(m, c, b) + 1e-12
    assert dab > 0


@given(st.integers(0, 100_000))
def test_error_equals_angle_over_pi(seed):
    rng = np.random.default_rng(seed)
    u, v = UnitVector.random(5, rng), UnitVector.random(5, rng)
    for m in (Marginal.sphere(5), Marginal.ball(5)):
        assert disagreement_probability(m, u, v) == u.angle(v) / math.pi
