import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bvmlab.exceptions import NotPositiveSemidefinite, SingularUpdate
from bvmlab.linalg import (
    as_symmetric,
    diag_minus_rank_one_inverse,
    eig_extremes,
    operator_norm,
    sym_inv_sqrt,
    sym_sqrt,
    sym_sqrt_and_inverse,
    unvech_iso,
    vech_iso,
)


def _spd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T + d * np.eye(d)


@pytest.mark.parametrize("d", [1, 3, 8])
def test_sqrt_squares_back(d):
    F = _spd(np.random.default_rng(d), d)
    J = sym_sqrt(F)
    np.testing.assert_allclose(J @ J, F, atol=1e-10)
    np.testing.assert_array_equal(J, J.T)


def test_inverse_sqrt_pairs_with_sqrt():
    F = _spd(np.random.default_rng(0), 5)
    J, J_inv = sym_sqrt_and_inverse(F)
    np.testing.assert_allclose(J @ J_inv, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(sym_inv_sqrt(F), J_inv, atol=1e-12)


def test_rejects_indefinite_and_asymmetric():
    with pytest.raises(NotPositiveSemidefinite):
        sym_sqrt(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        as_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NotPositiveSemidefinite):
        sym_inv_sqrt(np.diag([1.0, 0.0]))


def test_rank_one_inverse_matches_dense():
    D = np.array([0.2, 0.3, 0.1])
    p = np.array([0.2, 0.3, 0.1])
    out = diag_minus_rank_one_inverse(D, p)
    F = np.diag(D) - np.outer(p, p)
    np.testing.assert_allclose(out @ F, np.eye(3), atol=1e-12)


def test_rank_one_inverse_singular():
    with pytest.raises(SingularUpdate):
        diag_minus_rank_one_inverse(np.array([0.5, 0.5]), np.array([0.5, 0.5]))


def test_norms_and_extremes():
    A = np.diag([3.0, -5.0])
    assert operator_norm(A) == pytest.approx(5.0)
    assert eig_extremes(np.diag([2.0, 1.0, 4.0])) == (1.0, 4.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_vech_is_isometric(k, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((2, k, k))
    A, B = A + A.T, B + B.T
    assert vech_iso(A) @ vech_iso(B) == pytest.approx(np.trace(A @ B), rel=1e-10, abs=1e-10)
    np.testing.assert_allclose(unvech_iso(vech_iso(A), k), A, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (4, 4), elements=st.floats(-3, 3)))
def test_sqrt_of_gram_is_psd(A):
    F = A @ A.T + 1e-3 * np.eye(4)
    J = sym_sqrt(F)
    assert np.linalg.eigvalsh(J).min() >= -1e-12
    np.testing.assert_allclose(J @ J, F, atol=1e-8 * (1 + np.abs(F).max()))
