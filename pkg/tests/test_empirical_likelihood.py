import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from bvmlab.empirical_likelihood import (
    MomentModel,
    el_smoothness_probe,
    hull_margin,
    profile_q,
    profile_q_batch,
    theta_of_eta,
    theta_of_eta_batch,
)
from bvmlab.exceptions import BoundaryDegenerate, Infeasible

from oracles import el_two_point_bruteforce

TWO_POINT = MomentModel([0.0, 1.0], "mean", 1)


@pytest.mark.parametrize("eta", [0.1, 0.3, 0.5, 0.9])
def test_two_point_closed_form(eta):
    sol = profile_q(TWO_POINT, eta)
    np.testing.assert_allclose(sol.q, [1 - eta, eta], atol=1e-8)
    assert sol.status == "converged"
    assert max(sol.kkt.values()) <= 1e-8


@pytest.mark.parametrize("eta", [0.137, 0.62])
def test_two_point_matches_bruteforce(eta):
    ref = el_two_point_bruteforce(eta, 1e-4)
    np.testing.assert_allclose(profile_q(TWO_POINT, eta).q, ref, atol=1e-4)


def test_symmetric_three_point_is_uniform_with_zero_multiplier():
    sol = profile_q(MomentModel([-1.0, 0.0, 1.0], "mean", 1), 0.0)
    np.testing.assert_allclose(sol.q, np.full(3, 1 / 3), atol=1e-12)
    np.testing.assert_allclose(sol.multiplier, 0.0, atol=1e-12)


@pytest.mark.parametrize("eta", [1.5, -0.2, 1.0])
def test_outside_hull_is_infeasible(eta):
    with pytest.raises(Infeasible):
        profile_q(TWO_POINT, eta)


def test_zero_weight_is_boundary_degenerate():
    with pytest.raises(BoundaryDegenerate):
        profile_q(MomentModel([0.0, 1.0, 2.0], "mean", 1), 1.0, weights=[0.5, 0.0, 0.5])


def test_hull_margin_sign():
    inside = np.array([[-1.0], [1.0]])
    outside = np.array([[0.5], [1.0]])
    assert hull_margin(inside) > 0
    assert hull_margin(outside) <= 0


def test_three_point_mean_matches_exponential_tilt():
    # max sum w log q with a mean restriction has q_j = w_j / (1 + t x_j)
    model = MomentModel([0.0, 1.0, 2.0], "mean", 1)
    sol = profile_q(model, 1.3)
    x = np.array([0.0, 1.0, 2.0])
    assert sol.q @ x == pytest.approx(1.3, abs=1e-12)
    t = sol.multiplier[0]
    np.testing.assert_allclose(sol.q, (1 / 3) / (1 + t * (x - 1.3)), atol=1e-12)


def test_variance_restriction_two_moments():
    model = MomentModel([-2.0, -1.0, 0.0, 1.0, 2.0], "variance", 2)
    sol = profile_q(model, [0.2, 1.5])
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    assert sol.q @ x == pytest.approx(0.2, abs=1e-10)
    assert sol.q @ (x - 0.2) ** 2 == pytest.approx(1.5, abs=1e-10)


def test_batch_agrees_with_scalar_solver():
    etas = np.linspace(0.05, 0.95, 37)[:, None]
    Q = profile_q_batch(TWO_POINT, etas)
    np.testing.assert_allclose(Q, np.column_stack([1 - etas[:, 0], etas[:, 0]]), atol=1e-10)
    model = MomentModel([0.0, 1.0, 3.0], "mean", 1)
    etas = np.array([[0.4], [1.1], [2.7]])
    Q = profile_q_batch(model, etas)
    for row, eta in zip(Q, etas):
        np.testing.assert_allclose(row, profile_q(model, eta).q, atol=1e-10)


def test_theta_of_eta_is_logit():
    assert theta_of_eta(TWO_POINT, 0.3)[0] == pytest.approx(math.log(3 / 7), abs=1e-12)
    np.testing.assert_allclose(theta_of_eta_batch(TWO_POINT, [[0.3], [0.5]])[:, 0], [math.log(3 / 7), 0.0],
                               atol=1e-10)


def test_smoothness_probe_logit_slope():
    rep = el_smoothness_probe(TWO_POINT, [0.5], 0.1)
    assert rep.jacobian_fd[0, 0] == pytest.approx(4.0, rel=1e-6)
    assert rep.max_secant_deviation < 0.01


def test_dimension_check():
    with pytest.raises(ValueError):
        MomentModel([0.0, 1.0], "variance", 3).check_dimensions()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=7, unique=True), st.floats(0.05, 0.95),
       st.integers(0, 2**31))
def test_property_kkt_and_feasibility(points, frac, seed):
    x = np.sort(np.array(points))
    if np.min(np.diff(x)) < 1e-2:
        return
    eta = x[0] + frac * (x[-1] - x[0])
    w = np.random.default_rng(seed).dirichlet(np.ones(x.size)) * 0.9 + 0.1 / x.size
    model = MomentModel(x, "mean", 1, weights=w)
    sol = profile_q(model, eta)
    assert sol.q.min() > 0
    assert sol.q.sum() == pytest.approx(1.0, abs=1e-10)
    assert sol.q @ x == pytest.approx(eta, abs=1e-8 * (1 + np.abs(x).max()))
    assert max(sol.kkt.values()) <= 1e-8
    # moves inside the feasible set (null space of the constraints) cannot improve the objective
    V = null_space(np.vstack([np.ones_like(x), x]))
    base = np.sum(w * np.log(sol.q))
    for v in V.T:
        for eps in (1e-3, -1e-3):
            q = sol.q + eps * sol.q.min() * v
            assert np.sum(w * np.log(q)) <= base + 1e-14
