import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bvmlab import diagnostics as dg
from bvmlab.exceptions import DimensionTooLarge, PreconditionViolated, UnsupportedMethod
from bvmlab.families import GaussianLocation, build_multinomial
from bvmlab.local import LocalPosterior, make_frame, summary_from_mean

from oracles import binary_a_n, binary_b1n_at_0, binary_b2n, binary_lambda, gaussian_abs_moment


def _binary(p0=0.5):
    m = build_multinomial([p0, 1 - p0])
    return m, make_frame(m)


def _post(model, n, x_bar=None):
    frame = make_frame(model)
    return LocalPosterior(frame, summary_from_mean(frame, frame.mu if x_bar is None else x_bar, n))


@pytest.mark.parametrize("p0", [0.5, 0.3, 0.1])
@pytest.mark.parametrize("n,c", [(100, 1.0), (400, 4.0)])
def test_binary_moment_bounds_match_closed_form(p0, n, c):
    m, fr = _binary(p0)
    b = dg.moment_bounds(m, fr, n, c, "exact-enumeration")
    assert b.b1n_at_0 == pytest.approx(binary_b1n_at_0(p0), rel=1e-12)
    assert b.b2n_at_c == pytest.approx(binary_b2n(p0, n, c), rel=1e-9)


def test_frozen_binary_values():
    m, fr = _binary()
    b = dg.moment_bounds(m, fr, 100, 1.0, "exact-enumeration")
    assert b.b1n_at_0 == pytest.approx(1.0, abs=1e-14)
    assert b.b2n_at_c == pytest.approx(1.0195713825725377, rel=1e-12)


@pytest.mark.parametrize("p0", [0.5, 0.3])
def test_a_n_matches_root_finding_oracle(p0):
    m, fr = _binary(p0)
    a = dg.a_n_bisect(m, fr, 100, 1e4, tol=1e-8, method="exact-enumeration")
    assert a == pytest.approx(binary_a_n(p0, 100), rel=1e-6)


def test_lambda_curve_matches_oracle_and_is_increasing():
    m, fr = _binary()
    grid = [0.25, 1.0, 4.0, 16.0]
    curve = dg.lambda_curve(m, fr, 100, grid, method="exact-enumeration")
    np.testing.assert_allclose(curve.lambda_values, [binary_lambda(0.5, 100, c) for c in grid], rtol=1e-9)
    assert np.all(np.diff(curve.lambda_values) > 0)


def test_trinomial_exact_vs_monte_carlo():
    m = build_multinomial([0.2, 0.5, 0.3])
    fr = make_frame(m)
    exact = dg.moment_bounds(m, fr, 400, 1.0, "exact-enumeration")
    mc = dg.moment_bounds(m, fr, 400, 1.0, "monte-carlo", seed=0)
    assert mc.b1n_at_0 == pytest.approx(exact.b1n_at_0, rel=0.05)
    assert mc.b2n_at_c == pytest.approx(exact.b2n_at_c, rel=0.05)


def test_exact_enumeration_needs_finite_support():
    g = GaussianLocation(np.eye(1))
    with pytest.raises(UnsupportedMethod):
        dg.b1n(g, make_frame(g), 100, 0.0, "exact-enumeration")


def test_gaussian_b1n_near_absolute_moment():
    g = GaussianLocation(np.eye(1))
    val = dg.b1n(g, make_frame(g), 100, 0.0, "monte-carlo", seed=0)
    assert val == pytest.approx(gaussian_abs_moment(3), rel=0.05)


def test_sup_direction_moment_finds_axis():
    V = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    probs = np.full(4, 0.25)
    val = dg.sup_direction_moment(V, probs, 4, rng=np.random.default_rng(0))
    assert val == pytest.approx(0.5 * 81, rel=1e-9)


@pytest.mark.parametrize("k", [3, 4, 6])
def test_lv_reverse_moment_on_normal(k):
    X = np.random.default_rng(k).standard_normal((20_000, 3))
    lhs, rhs, holds = dg.lv_reverse_moment_check(X, k)
    assert holds and lhs < rhs


def test_matrix_map_moment_check():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((500, 3))
    M = rng.standard_normal((2, 3))
    lhs, rhs, holds = dg.matrix_map_moment_check(X, M, 4, seed=1)
    assert holds and lhs <= rhs


def test_h_theta_proximity_zero_at_center_and_small_nearby():
    m, fr = _binary()
    assert dg.h_theta_proximity(m, fr, fr.theta0) == pytest.approx(0.0, abs=1e-12)
    assert dg.h_theta_proximity(m, fr, fr.theta0 + 0.1) < 0.01


@pytest.mark.parametrize("probs", [[0.5, 0.5], [0.2, 0.5, 0.3]])
@pytest.mark.parametrize("n", [100, 400])
def test_lemma1_no_violations(probs, n):
    m = build_multinomial(probs)
    post = _post(m, n)
    rep = dg.lemma1_audit(post, 1.0, u_budget=2000, seed=0)
    assert rep.holds
    assert rep.max_slack <= 1e-10


def test_lemma3_holds_binary():
    m, _ = _binary()
    res = dg.lemma3_audit(_post(m, 100, [0.55]), 1.0)
    assert res.holds and res.lhs < res.rhs


def test_lemma3_dimension_guard():
    m = build_multinomial(np.full(4, 0.25))
    with pytest.raises(DimensionTooLarge):
        dg.lemma3_audit(_post(m, 100), 1.0)


def test_lemma4_preconditions_listed():
    m, _ = _binary()
    post = _post(m, 100, [0.7])
    with pytest.raises(PreconditionViolated) as info:
        dg.lemma4_audit(post, 1.0, 0.5, 0.1)
    text = str(info.value)
    assert "Delta_n" in text and "k = 0.5" in text


def test_lemma4_holds_after_admissible_c():
    m, _ = _binary()
    post = _post(m, 1600)
    c = dg.minimal_admissible_c(post, 0.65)
    assert c > 16 * 4 * 0.65
    res = dg.lemma4_audit(post, c, 1.0, 0.65)
    assert res.holds


def test_growth_check_trends():
    rep = dg.growth_check({"name": "r", "family": "multinomial",
                           "cells": [{"d": 2, "n": 100}, {"d": 3, "n": 1000}, {"d": 4, "n": 10_000}]},
                          {"alpha": 2.0})
    assert rep.verdicts["d^4/n"] == "decreasing"
    assert "d^6/n" in rep.verdicts
    with pytest.raises(ValueError):
        dg.growth_check({"cells": [{"d": 1, "n": 1}]})


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(50, 5000), st.floats(0.01, 20))
def test_property_lambda_monotone_in_c(p0, n, c):
    m, fr = _binary(p0)
    lo = dg.lambda_n(binary_b1n_at_0(p0), binary_b2n(p0, n, c), c, 1, n)
    hi = dg.lambda_n(binary_b1n_at_0(p0), binary_b2n(p0, n, 2 * c), 2 * c, 1, n)
    assert hi > lo > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 0.9), st.sampled_from([100, 400, 1600]), st.integers(0, 1000))
def test_property_lemma1_binary(p0, n, seed):
    m, _ = _binary(p0)
    rep = dg.lemma1_audit(_post(m, n), 1.0, u_budget=500, seed=seed)
    assert rep.violations == 0
