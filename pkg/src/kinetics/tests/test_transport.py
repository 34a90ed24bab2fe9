"""Tests for empirical and Gaussian distances"""

import itertools

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from kinetics.equilibrium import equilibrium_quadratic, gibbs_particle_quadratic
from kinetics.exceptions import ModelValidationError
from kinetics.moments import GaussianLaw
from kinetics.potentials import PhaseState, Quadratic, build_model
from kinetics.rates import lsi_eta
from kinetics.transport import (
    EmpiricalCloud,
    kl_gaussian,
    l1_gaussian_grid,
    w2_empirical,
    w2_gaussian,
)


def _random_law(rng, dim):
    A = rng.normal(size=(dim, dim))
    return GaussianLaw(rng.normal(size=dim), A @ A.T + 0.2 * np.eye(dim))


# w2_empirical Tests
def test_single_point_cost():
    plan = w2_empirical(EmpiricalCloud([[0.0, 1.0]]), EmpiricalCloud([[3.0, -3.0]]))
    assert plan.cost == pytest.approx(25.0)


def test_shuffled_cloud_has_zero_cost():
    rng = np.random.default_rng(0)
    points = rng.normal(size=(50, 2))
    order = rng.permutation(50)
    plan = w2_empirical(EmpiricalCloud(points), EmpiricalCloud(points[order]))
    assert plan.cost == 0.0
    assert np.array_equal(order[plan.assignment], np.arange(50))


def test_size_mismatch_rejected():
    with pytest.raises(ModelValidationError):
        w2_empirical(EmpiricalCloud(np.zeros((3, 2))), EmpiricalCloud(np.zeros((4, 2))))


def test_assignment_matches_brute_force():
    rng = np.random.default_rng(1)
    for n in range(1, 7):
        for _ in range(5):
            a, b = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
            best = min(
                np.mean(np.sum((a - b[list(p)]) ** 2, axis=1))
                for p in itertools.permutations(range(n))
            )
            assert w2_empirical(EmpiricalCloud(a), EmpiricalCloud(b)).cost == pytest.approx(best, abs=1e-10)


def test_optimal_plan_never_beats_identity_coupling():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(1, 65))
        a = rng.normal(size=(n, 2))
        b = a + rng.normal(scale=rng.uniform(0.1, 3.0), size=(n, 2))
        identity = float(np.mean(np.sum((a - b) ** 2, axis=1)))
        cost = w2_empirical(EmpiricalCloud(a), EmpiricalCloud(b)).cost
        assert cost <= identity * (1 + 1e-12)


def test_empirical_distance_is_a_metric():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b, c = (EmpiricalCloud(rng.normal(size=(12, 2)) + rng.normal(size=2)) for _ in range(3))
        ab = w2_empirical(a, b).distance
        assert ab == pytest.approx(w2_empirical(b, a).distance, abs=1e-12)
        assert w2_empirical(a, c).distance <= ab + w2_empirical(b, c).distance + 1e-9


def test_cloud_from_states_uses_one_particle():
    states = [PhaseState(x=[[float(k)], [9.0]], y=[[-float(k)], [9.0]]) for k in range(3)]
    cloud = EmpiricalCloud.from_states(states)
    assert cloud.points.tolist() == [[0.0, 0.0], [1.0, -1.0], [2.0, -2.0]]


# w2_gaussian Tests
def test_gaussian_distance_to_itself():
    law = _random_law(np.random.default_rng(4), 3)
    assert w2_gaussian(law, law) == pytest.approx(0.0, abs=1e-6)


def test_gaussian_distance_one_dimensional():
    assert w2_gaussian(GaussianLaw([0.0], [[1.0]]), GaussianLaw([0.0], [[4.0]])) == pytest.approx(1.0)


@pytest.mark.parametrize("g1,g2", [
    (GaussianLaw([0.0], [[1.0]]), GaussianLaw([1.0], [[4.0]])),
    (GaussianLaw([0.0, 0.0], [[1.0, 0.3], [0.3, 0.5]]), GaussianLaw([1.0, 0.5], [[2.0, 0.0], [0.0, 1.0]])),
])
def test_gaussian_distance_matches_sampled_clouds(g1, g2):
    rng = np.random.default_rng(5)
    a = EmpiricalCloud(g1.sample(rng, 4096))
    b = EmpiricalCloud(g2.sample(rng, 4096))
    assert w2_empirical(a, b).distance == pytest.approx(w2_gaussian(g1, g2), rel=0.05)


# kl_gaussian Tests
def test_kl_of_identical_laws_is_zero():
    law = _random_law(np.random.default_rng(6), 4)
    assert kl_gaussian(law, law) == pytest.approx(0.0, abs=1e-10)


def test_kl_one_dimensional_against_quadrature():
    value = kl_gaussian(GaussianLaw([0.0], [[1.0]]), GaussianLaw([0.0], [[2.0]]))
    p, q = norm(0.0, 1.0), norm(0.0, np.sqrt(2.0))
    integral, _ = quad(lambda x: p.pdf(x) * (p.logpdf(x) - q.logpdf(x)), -30, 30, epsabs=1e-12)
    assert value == pytest.approx(0.5 * (0.5 - 1.0 + np.log(2.0)), abs=1e-12)
    assert value == pytest.approx(integral, abs=1e-6)


def test_kl_tensorizes():
    rng = np.random.default_rng(7)
    g1, g2 = _random_law(rng, 2), _random_law(rng, 2)
    assert kl_gaussian(g1.tensor_power(5), g2.tensor_power(5)) == pytest.approx(
        5 * kl_gaussian(g1, g2), rel=1e-10)


def test_kl_is_nonnegative():
    rng = np.random.default_rng(8)
    for _ in range(50):
        assert kl_gaussian(_random_law(rng, 3), _random_law(rng, 3)) >= 0.0


def test_kl_singular_reference_rejected():
    singular = GaussianLaw([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(ModelValidationError):
        kl_gaussian(GaussianLaw([0.0, 0.0], np.eye(2)), singular)


def test_kl_singular_argument_is_infinite():
    singular = GaussianLaw([0.0, 0.0], [[1.0, 0.0], [0.0, 0.0]])
    assert kl_gaussian(singular, GaussianLaw([0.0, 0.0], np.eye(2))) == float('inf')


# l1_gaussian_grid Tests
def test_l1_self_distance():
    law = GaussianLaw([0.2], [[0.7]])
    assert l1_gaussian_grid(law, law) <= 1e-8


def test_l1_disjoint_laws_reach_two():
    assert l1_gaussian_grid(GaussianLaw([0.0], [[1.0]]), GaussianLaw([20.0], [[1.0]])) == pytest.approx(2.0, abs=1e-6)


def test_l1_rejects_high_dimension():
    law = GaussianLaw(np.zeros(3), np.eye(3))
    with pytest.raises(ModelValidationError):
        l1_gaussian_grid(law, law)


def test_pinsker_inequality_on_random_pairs():
    rng = np.random.default_rng(9)
    for _ in range(100):
        g1 = GaussianLaw([rng.normal()], [[rng.uniform(0.2, 3.0)]])
        g2 = GaussianLaw([rng.normal()], [[rng.uniform(0.2, 3.0)]])
        assert l1_gaussian_grid(g1, g2) <= np.sqrt(2 * kl_gaussian(g1, g2)) + 1e-8


def test_pinsker_inequality_in_two_dimensions():
    rng = np.random.default_rng(10)
    g1, g2 = _random_law(rng, 2), _random_law(rng, 2)
    assert l1_gaussian_grid(g1, g2) <= np.sqrt(2 * kl_gaussian(g1, g2)) + 1e-8


# Transport-entropy inequality for the Gibbs fixtures
@pytest.mark.parametrize("a,b,gamma,sigma", [(1.0, 1.0, 1.0, 1.0), (2.0, -0.5, 0.5, 1.5), (0.5, 0.0, 2.0, 1.0)])
def test_talagrand_against_nonlinear_equilibrium(a, b, gamma, sigma):
    model = build_model(1, gamma, sigma, Quadratic(a), Quadratic(b))
    gibbs = equilibrium_quadratic(a, b, gamma, sigma, 1)
    eta = lsi_eta(model)
    rng = np.random.default_rng(11)
    for _ in range(50):
        g = _random_law(rng, 2)
        assert w2_gaussian(g, gibbs) ** 2 <= 4 * eta * kl_gaussian(g, gibbs) + 1e-12


def test_talagrand_against_particle_gibbs_law():
    a, b = 1.0, -0.3
    model = build_model(1, 1.0, 1.0, Quadratic(a), Quadratic(b))
    gibbs = gibbs_particle_quadratic(a, b, 1.0, 1.0, 3, 1)
    rng = np.random.default_rng(12)
    for _ in range(20):
        g = _random_law(rng, 6)
        assert w2_gaussian(g, gibbs) ** 2 <= 4 * lsi_eta(model) * kl_gaussian(g, gibbs) + 1e-12
