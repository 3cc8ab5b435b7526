import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bvmlab import curved as cv
from bvmlab.exceptions import (
    DegenerateJacobian,
    DimensionMismatch,
    InvalidPattern,
    InvalidSpec,
    PreconditionViolated,
    RankDeficient,
)
from bvmlab.families import build_multinomial
from bvmlab.local import LocalPosterior, make_frame, summary_from_mean, tv_distance_quadrature

from oracles import bernoulli_posterior_tail_ratio, least_squares_coefficients, logit_local_remainder


def test_el_mean_map_is_logit():
    cmap = cv.el_mean_map()
    assert (cmap.d1, cmap.d) == (1, 1)
    np.testing.assert_allclose(cmap.evaluate([[0.3], [0.7]])[:, 0], [math.log(3 / 7), math.log(7 / 3)],
                               atol=1e-10)


def test_linearization_matches_logit_taylor_oracle():
    lin = cv.linearize(cv.el_mean_map(eta0=0.5), 400, 1.0)
    assert lin.G[0, 0] == pytest.approx(4.0, rel=1e-6)
    assert lin.delta2 == 0.0
    assert lin.delta1 == pytest.approx(logit_local_remainder(0.5, 400, 1.0), rel=1e-6)
    # at eta0 = 1/2 the quadratic term vanishes, so the residual near 0 is tiny
    assert lin.delta1_alt < 1e-9


def test_linearization_whitened_gram_is_identity_for_logit():
    # J = sqrt(eta0 (1 - eta0)) and dtheta/deta = 1 / (eta0 (1 - eta0))
    lin = cv.linearize(cv.el_mean_map(eta0=0.3), 400, 1.0, whiten=True)
    assert lin.G[0, 0] == pytest.approx(1 / math.sqrt(0.21), rel=1e-6)


def test_linearization_preconditions():
    with pytest.raises(PreconditionViolated):
        cv.linearize(cv.el_mean_map(eta0=0.3), 4, 5.0)
    flat = cv.CurvedMap(lambda e: np.zeros(1), 1, 1, cv.Box([-1.0], [1.0]), [0.0],
                        build_multinomial([0.5, 0.5]), jacobian=lambda e: np.zeros((1, 1)))
    with pytest.raises(DegenerateJacobian):
        cv.linearize(flat, 100)


def test_s_statistic_matches_least_squares():
    cmap = cv.sur_toy()
    rng = np.random.default_rng(0)
    x_bar = cmap.base_model.grad(cmap.theta0) + 0.01 * rng.standard_normal(cmap.d)
    post = cv.curved_local_posterior(cmap, x_bar=x_bar, n=400)
    fr = post.frame
    ref = least_squares_coefficients(post.G, math.sqrt(400) * fr.J_inv @ (x_bar - fr.mu))
    np.testing.assert_allclose(post.s, ref, rtol=1e-7, atol=1e-9)
    lin = cv.linearize(cmap, 400, whiten=True, gamma_budget=200)
    np.testing.assert_allclose(cv.s_statistic(lin, x_bar, fr.mu, 400), ref, rtol=1e-5, atol=1e-7)


def test_identity_embed_reduces_to_local_posterior():
    cmap = cv.identity_embed_toy((0.2, 0.5, 0.3))
    base = cmap.base_model
    frame = make_frame(base)
    x_bar = frame.mu + np.array([0.02, -0.01])
    cpost = cv.curved_local_posterior(cmap, x_bar=x_bar, n=300)
    lpost = LocalPosterior(frame, summary_from_mean(frame, x_bar, 300))
    np.testing.assert_allclose(cpost.s, lpost.reference_mean, atol=1e-10)
    U = np.random.default_rng(1).standard_normal((50, 2))
    np.testing.assert_allclose(cpost.log_Z(U), lpost.log_Z(U), atol=1e-10)
    a = cv.curved_tv(cpost, nodes=128)
    b = tv_distance_quadrature(lpost, nodes=128)
    assert a.estimate == pytest.approx(b.estimate, abs=1e-10)


def test_curved_log_Z_equals_local_log_Z_at_mapped_point():
    cmap = cv.sur_toy()
    x_bar = cmap.base_model.grad(cmap.theta0)
    cpost = cv.curved_local_posterior(cmap, x_bar=x_bar, n=500)
    lpost = LocalPosterior(cpost.frame, summary_from_mean(cpost.frame, x_bar, 500))
    G = np.random.default_rng(2).standard_normal((5, cmap.d1)) * 0.3
    np.testing.assert_allclose(cpost.log_Z(G), lpost.log_Z(cpost.u_of_gamma(G)), atol=1e-9)


def test_sur_and_ssem_toys():
    sur = cv.sur_toy()
    assert (sur.d1, sur.d) == (6, 7)
    assert sur.domain.contains(sur.domain.sample(np.random.default_rng(0), 20)).all()
    floor = cv.injectivity_floor(sur, grid_budget=600)
    assert floor > 0.2 / (4 * 2.0)
    ssem = cv.ssem_toy()
    assert ssem.d1 == ssem.d == 7
    assert cv.injectivity_floor(ssem, grid_budget=600) > 0
    for cmap in (sur, ssem):
        lin = cv.linearize(cmap, 10_000, gamma_budget=100, whiten=True)
        assert lin.gram_eigs[0] > 0


def test_sur_pattern_and_spec_errors():
    Sigma = np.eye(2)
    Z = np.random.default_rng(0).standard_normal((30, 2))
    with pytest.raises(InvalidPattern):
        cv.sur_map(cv.SurSpec(0.2, 2.0, [[False, False], [True, True]], Sigma, np.zeros((2, 2)), Z))
    with pytest.raises(InvalidPattern):
        cv.sur_map(cv.SurSpec(0.2, 2.0, [[True, False], [True, True]], Sigma, [[1.0, 1.0], [0, 0]], Z))
    with pytest.raises(InvalidSpec):
        cv.sur_map(cv.SurSpec(2.0, 2.0, [[True, False], [True, True]], Sigma, np.zeros((2, 2)), Z))


def test_ssem_rank_deficiency():
    with pytest.raises(RankDeficient):
        cv.ssem_map(cv.SsemSpec(beta=[0.5], gamma=[0.3], Pi12=[[0.4]], Pi22=[[0.0]],
                                Sigma=np.eye(2), Z=np.random.default_rng(0).standard_normal((30, 2))))


def test_ssem_reduced_form_structure():
    Pi = cv.ssem_reduced_form(np.array([[0.4]]), np.array([[1.2]]), np.array([0.3]), np.array([0.5]))
    np.testing.assert_allclose(Pi, [[0.3 + 0.2, 0.4], [0.6, 1.2]])


@pytest.mark.parametrize("n", [100, 400, 6400])
@pytest.mark.parametrize("k_bar", [2.0, 5.0])
def test_tail_mass_matches_beta_oracle(n, k_bar):
    post = cv.curved_local_posterior(cv.el_mean_map(), x_bar=[0.3], n=n)
    ref = bernoulli_posterior_tail_ratio(0.3, n, k_bar, 0.02, 0.98)
    assert cv.tail_mass_audit(post, k_bar) == pytest.approx(ref, rel=2e-3)


def test_curved_mle_recovers_sample_mean():
    cmap = cv.el_mean_map()
    eta, err = cv.curved_mle(cmap, x_bar=[0.41], n=100, starts=4)
    assert eta[0] == pytest.approx(0.41, abs=1e-5)
    assert err == pytest.approx(0.11, abs=1e-5)


def test_curved_mle_on_sur_moves_toward_truth():
    cmap = cv.sur_toy()
    data = cmap.base_model.sample(cmap.theta0, 4000, seed=0)
    eta, err = cv.curved_mle(cmap, data=data, starts=3, seed=0)
    assert cmap.domain.contains(eta)[0]
    assert err < 0.3


def test_curved_map_validation():
    base = build_multinomial([0.5, 0.5])
    with pytest.raises(InvalidSpec):
        cv.CurvedMap(lambda e: e + 1.0, 1, 1, cv.Box([-1.0], [1.0]), [0.0], base)
    with pytest.raises(DimensionMismatch):
        cv.curved_local_posterior(cv.el_mean_map(), x_bar=[0.3, 0.1], n=10)
    with pytest.raises(InvalidSpec):
        cv.build_curved("nope")


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 0.9), st.integers(0, 2**31))
def test_property_domain_projection_is_idempotent(eta0, seed):
    cmap = cv.sur_toy()
    rng = np.random.default_rng(seed)
    eta = cmap.eta0 + 3 * rng.standard_normal(cmap.d1)
    p = cmap.domain.project(eta)
    np.testing.assert_allclose(cmap.domain.project(p), p, atol=1e-10)
    box = cv.el_mean_map(eta0=eta0).domain
    assert box.contains(box.project(np.array([5.0])))[0]


@settings(max_examples=25, deadline=None)
@given(st.floats(0.15, 0.85), st.sampled_from([100, 400, 1600]))
def test_property_s_is_projection_of_score(eta0, n):
    cmap = cv.el_mean_map(eta0=eta0)
    x_bar = np.array([eta0 + 0.5 / math.sqrt(n)])
    post = cv.curved_local_posterior(cmap, x_bar=x_bar, n=n)
    # in one dimension s is sqrt(n)(x_bar - eta0) since dtheta/deta = F^-1
    assert post.s[0] == pytest.approx(0.5, rel=1e-6)


def test_tail_mass_empty_region_is_zero():
    post = cv.curved_local_posterior(cv.el_mean_map(), x_bar=[0.3], n=400)
    assert cv.tail_mass_audit(post, 1e6) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 6.0), st.floats(0.1, 2.0), st.sampled_from([100, 400, 1600]))
def test_property_tail_mass_nonincreasing_in_k_bar(k_bar, step, n):
    post = cv.curved_local_posterior(cv.el_mean_map(), x_bar=[0.32], n=n)
    assert cv.tail_mass_audit(post, k_bar + step, nodes=2048) <= cv.tail_mass_audit(post, k_bar, nodes=2048)
