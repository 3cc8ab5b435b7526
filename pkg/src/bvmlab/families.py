"""Exponential families ``f(x; theta) = exp(<x, theta> - psi(theta))``.

Concrete instances: the multinomial on ``d + 1`` categories, the Gaussian
multivariate linear model with fixed design, and a Gaussian location family
used as a continuous log-concave reference.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .exceptions import InvalidSimplex, InvalidSpec, OutOfDomain, UnsupportedMethod
from .linalg import (
    diag_minus_rank_one_inverse,
    eig_extremes,
    sym_sqrt,
    sym_sqrt_and_inverse,
    unvech_iso,
    vech_iso,
)


class ExpFamily:
    """Base class for a regular exponential family in natural parameters.

    Subclasses implement :meth:`log_partition`, :meth:`grad`,
    :meth:`hessian`, :meth:`in_domain` and :meth:`sample`. Finite-support
    families additionally implement :meth:`atoms`.
    """

    dim: int
    theta0: np.ndarray
    finite_support = False

    def log_partition(self, theta):
        raise NotImplementedError

    def grad(self, theta):
        raise NotImplementedError

    def hessian(self, theta):
        raise NotImplementedError

    def in_domain(self, theta):
        raise NotImplementedError

    def sample(self, theta, n, seed):
        raise NotImplementedError

    def atoms(self, theta):
        """Support points and their probabilities under ``theta``."""
        raise UnsupportedMethod(f"{type(self).__name__} has continuous support")

    def log_partition_diff(self, theta, H):
        """``psi(theta + h) - psi(theta)`` for every row ``h`` of ``H``.

        Rows leaving the domain give ``+inf``.
        """
        H = np.atleast_2d(H)
        base = self.log_partition(theta)
        out = np.empty(H.shape[0])
        for i, h in enumerate(H):
            t = theta + h
            out[i] = self.log_partition(t) - base if self.in_domain(t) else np.inf
        return out

    def domain_mask(self, thetas):
        return np.array([self.in_domain(t) for t in np.atleast_2d(thetas)])

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape != (self.dim,):
            raise ValueError(f"theta must have length {self.dim}, got {theta.shape}")
        if not self.in_domain(theta):
            raise OutOfDomain("theta lies outside the natural parameter space")
        return theta


def log_density(model, x, theta):
    """``<x, theta> - psi(theta)`` for a single observation ``x``."""
    theta = model._check(theta)
    x = np.asarray(x, dtype=float).ravel()
    return float(x @ theta - model.log_partition(theta))


def sample_sufficient(model, theta, n, seed):
    """``n`` independent draws of the sufficient statistic, shape ``(n, d)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return model.sample(model._check(theta), int(n), seed)


# ---------------------------------------------------------------------------
# multinomial


@dataclass(frozen=True)
class MultinomialSpec:
    """Category probabilities ``p_0, ..., p_d``; category 0 is the reference."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        object.__setattr__(self, "probs", p)

    @property
    def support_size(self):
        return self.probs.size

    @property
    def balance(self):
        """``max_i 1 / p_i``."""
        return float(np.max(1.0 / self.probs))

    def validate(self):
        p = self.probs
        if p.size < 2:
            raise InvalidSimplex("need at least two categories")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise InvalidSimplex("every probability must be strictly positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise InvalidSimplex(f"probabilities sum to {p.sum():.15f}")
        return self


class Multinomial(ExpFamily):
    """Multinomial on ``d + 1`` categories, ``theta_i = log(p_i / p_0)``.

    An observation is the one-hot indicator over categories ``1..d``;
    category 0 is the all-zeros vector.
    """

    finite_support = True

    def __init__(self, spec):
        self.spec = spec.validate()
        p = spec.probs
        self.dim = p.size - 1
        self.theta0 = np.log(p[1:]) - np.log(p[0])

    def probs(self, theta):
        return softmax(np.concatenate(([0.0], theta)))

    def log_partition(self, theta):
        return float(logsumexp(np.concatenate(([0.0], theta))))

    def log_partition_diff(self, theta, H):
        H = np.atleast_2d(H)
        logp = np.log(self.probs(theta))
        full = np.column_stack([np.zeros(H.shape[0]), H]) + logp
        return logsumexp(full, axis=1)

    def grad(self, theta):
        return self.probs(theta)[1:]

    def hessian(self, theta):
        q = self.probs(theta)[1:]
        F = np.diag(q) - np.outer(q, q)
        return 0.5 * (F + F.T)

    def in_domain(self, theta):
        return bool(np.all(np.isfinite(theta)))

    def domain_mask(self, thetas):
        return np.all(np.isfinite(np.atleast_2d(thetas)), axis=1)

    def sample(self, theta, n, seed):
        rng = np.random.default_rng(seed)
        cats = rng.choice(self.dim + 1, size=n, p=self.probs(theta))
        return np.eye(self.dim + 1)[cats, 1:]

    def atoms(self, theta):
        points = np.vstack([np.zeros(self.dim), np.eye(self.dim)])
        return points, self.probs(theta)


def build_multinomial(spec):
    if not isinstance(spec, MultinomialSpec):
        spec = MultinomialSpec(spec)
    return Multinomial(spec)


def multinomial_closed_forms(spec):
    """``F``, ``F^{-1}``, the symmetric root ``J = F^{1/2}`` and ``J^{-1}``.

    With ``P = diag(p_1..p_d)`` and ``1 - p'P^{-1}p = p_0``::

        F     = P - p p'
        F^-1  = P^-1 + e e' / p_0

    ``F^{-1}`` comes from the rank-one inverse update. The symmetric root
    has no rank-one form when ``d > 1``, so ``J`` and ``J^{-1}`` come from
    one eigendecomposition of ``F``; :func:`multinomial_rank_one_factor`
    gives the non-symmetric factor with ``R R' = F``.

    Returns
    -------
    F, F_inv, J, J_inv : ndarray of shape (d, d)
    """
    if not isinstance(spec, MultinomialSpec):
        spec = MultinomialSpec(spec)
    spec.validate()
    p = spec.probs[1:]
    F = np.diag(p) - np.outer(p, p)
    F_inv = diag_minus_rank_one_inverse(p, p)
    J, J_inv = sym_sqrt_and_inverse(F)
    return F, F_inv, J, J_inv


def multinomial_rank_one_factor(spec):
    """Factor ``R`` with ``R R' = F`` and its inverse, both in rank-one form::

        R     = P^{1/2} - p sqrt(p)' / (1 + sqrt(p_0))
        R^-1  = P^{-1/2} + sqrt(p) 1' / (p_0 + sqrt(p_0))

    ``R`` is symmetric only for ``d = 1``, where it equals ``J``.
    """
    if not isinstance(spec, MultinomialSpec):
        spec = MultinomialSpec(spec)
    spec.validate()
    p0, p = spec.probs[0], spec.probs[1:]
    sq = np.sqrt(p)
    R = np.diag(sq) - np.outer(p, sq) / (1.0 + np.sqrt(p0))
    R_inv = np.diag(1.0 / sq) + np.outer(sq, np.ones_like(p)) / (p0 + np.sqrt(p0))
    return R, R_inv


def multinomial_trace_bounds(spec):
    """``trace(F^{-1})`` with the identity-verified and the printed denominator.

    Returns ``(trace, bound_p0, bound_one_minus_p0)`` where
    ``bound_p0 = sum 1/p_i + d/p_0`` and
    ``bound_one_minus_p0 = sum 1/p_i + d/(1 - p_0)``.
    """
    _, F_inv, _, _ = multinomial_closed_forms(spec)
    p0, p = spec.probs[0], spec.probs[1:]
    base = float(np.sum(1.0 / p))
    return float(np.trace(F_inv)), base + p.size / p0, base + p.size / (1.0 - p0)


# ---------------------------------------------------------------------------
# multivariate linear model


@dataclass(frozen=True)
class MvLinearSpec:
    """``Y = Z Pi + U`` with rows of ``U`` iid ``N(0, Sigma)`` and fixed ``Z``."""

    Pi: np.ndarray
    Sigma: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        for name in ("Pi", "Sigma", "Z"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))

    @property
    def d_r(self):
        return self.Sigma.shape[0]

    @property
    def d_c(self):
        return self.Z.shape[1]

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def dim(self):
        """Dimension with ``theta_1`` stored once per symmetric pair."""
        return self.d_r * (self.d_r + 1) // 2 + self.d_c * self.d_r

    @property
    def dim_full(self):
        """Dimension counting every entry of ``theta_1``: ``d_r^2 + d_c d_r``."""
        return self.d_r**2 + self.d_c * self.d_r

    @property
    def max_row_norm(self):
        return float(np.max(np.linalg.norm(self.Z, axis=1)))

    @property
    def gram(self):
        return self.Z.T @ self.Z / self.n

    def validate(self):
        if self.Sigma.shape != (self.d_r, self.d_r):
            raise InvalidSpec("Sigma must be square")
        if self.Pi.shape != (self.d_c, self.d_r):
            raise InvalidSpec(f"Pi must have shape ({self.d_c}, {self.d_r})")
        if not np.allclose(self.Sigma, self.Sigma.T, rtol=0, atol=1e-12):
            raise InvalidSpec("Sigma must be symmetric")
        if eig_extremes(self.Sigma)[0] <= 0:
            raise InvalidSpec("Sigma must be positive definite")
        if eig_extremes(self.gram)[0] <= 1e-8:
            raise InvalidSpec("Z'Z/n is (numerically) singular")
        return self


class MvLinear(ExpFamily):
    """Multivariate linear model as an exponential family.

    Coordinates are ``theta = (vech_iso(theta_1), vec(theta_2))`` with
    ``theta_1 = -Sigma^{-1}/2`` and ``theta_2 = Pi Sigma^{-1}`` (``d_c x d_r``,
    row-major). The isometric half-vectorisation keeps the trace inner
    product equal to the Euclidean one. The per-observation statistic is
    ``(vech_iso(y y'), vec(z' y))``, whose design average has mean
    ``(Sigma + Pi' Q Pi, Q Pi)`` with ``Q = Z'Z/n``.
    """

    def __init__(self, spec):
        self.spec = spec.validate()
        self.d_r, self.d_c = spec.d_r, spec.d_c
        self.n_sym = self.d_r * (self.d_r + 1) // 2
        self.dim = spec.dim
        self.Q = spec.gram
        Sinv = np.linalg.inv(spec.Sigma)
        self.theta0 = self.pack(-0.5 * Sinv, spec.Pi @ Sinv)

    def pack(self, theta1, theta2):
        return np.concatenate([vech_iso(theta1), np.asarray(theta2, dtype=float).ravel()])

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        t1 = unvech_iso(theta[: self.n_sym], self.d_r)
        t2 = theta[self.n_sym :].reshape(self.d_c, self.d_r)
        return t1, t2

    def natural_to_moments(self, theta):
        """``(Sigma, Pi)`` implied by a natural parameter."""
        t1, t2 = self.unpack(theta)
        Sigma = np.linalg.inv(-2.0 * t1)
        Sigma = 0.5 * (Sigma + Sigma.T)
        return Sigma, t2 @ Sigma

    def in_domain(self, theta):
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            return False
        t1, _ = self.unpack(theta)
        return bool(np.linalg.eigvalsh(-2.0 * t1)[0] > 0)

    def log_partition(self, theta):
        t1, B = self.unpack(theta)
        S = -2.0 * t1
        sign, logdet = np.linalg.slogdet(S)
        if sign <= 0:
            return np.inf
        return float(0.5 * np.trace(self.Q @ B @ np.linalg.solve(S, B.T)) - 0.5 * logdet)

    def grad(self, theta):
        Sigma, Pi = self.natural_to_moments(theta)
        return self.pack(Sigma + Pi.T @ self.Q @ Pi, self.Q @ Pi)

    def _fisher_factor(self, theta):
        # columns map a direction to (Q^{1/2}(D2 + 2 Pi D1) Sigma^{1/2}, sqrt(2) Sigma^{1/2} D1 Sigma^{1/2})
        Sigma, Pi = self.natural_to_moments(theta)
        Sh = sym_sqrt(Sigma)
        Qh = sym_sqrt(self.Q)
        cols = []
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = 1.0
            D1, D2 = self.unpack(e)
            a = Qh @ (D2 + 2.0 * Pi @ D1) @ Sh
            b = np.sqrt(2.0) * Sh @ D1 @ Sh
            cols.append(np.concatenate([a.ravel(), b.ravel()]))
        return np.array(cols).T

    def hessian(self, theta):
        L = self._fisher_factor(theta)
        F = L.T @ L
        return 0.5 * (F + F.T)

    def sample(self, theta, n, seed):
        # row i uses design row i mod n_design; full cycles average to grad(theta)
        rng = np.random.default_rng(seed)
        Sigma, Pi = self.natural_to_moments(theta)
        Zr = self.spec.Z[np.arange(n) % self.spec.n]
        Y = Zr @ Pi + rng.multivariate_normal(np.zeros(self.d_r), Sigma, size=n)
        iu = np.triu_indices(self.d_r)
        scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
        yy = (Y[:, :, None] * Y[:, None, :])[:, iu[0], iu[1]] * scale
        zy = (Zr[:, :, None] * Y[:, None, :]).reshape(n, -1)
        return np.hstack([yy, zy])


def build_mv_linear(spec):
    return MvLinear(spec)


def mv_linear_fisher_lower_bound(spec):
    """The closed-form eigenvalue floor for the linear-model Fisher information.

    ``lambda_min(Sigma) * min{lambda_min(Q), 2 lambda_min(Sigma),
    4 lambda_min(Pi' Q Pi)}``. This floor ignores the ``D1``-``D2`` cross term
    of the exact quadratic form and can exceed the true minimum eigenvalue
    when ``Pi`` is large; see the tests.
    """
    ls = eig_extremes(spec.Sigma)[0]
    lq = eig_extremes(spec.gram)[0]
    lp = eig_extremes(spec.Pi.T @ spec.gram @ spec.Pi)[0]
    return ls * min(lq, 2.0 * ls, 4.0 * lp)


# ---------------------------------------------------------------------------
# Gaussian location family


class GaussianLocation(ExpFamily):
    """``X ~ N(Sigma theta, Sigma)`` with known ``Sigma``; ``psi = theta'Sigma theta / 2``."""

    def __init__(self, Sigma, theta0=None):
        self.Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
        if eig_extremes(self.Sigma)[0] <= 0:
            raise InvalidSpec("Sigma must be positive definite")
        self.dim = self.Sigma.shape[0]
        self.theta0 = np.zeros(self.dim) if theta0 is None else np.asarray(theta0, dtype=float)

    def log_partition(self, theta):
        return float(0.5 * theta @ self.Sigma @ theta)

    def log_partition_diff(self, theta, H):
        H = np.atleast_2d(H)
        return H @ (self.Sigma @ theta) + 0.5 * np.einsum("ij,jk,ik->i", H, self.Sigma, H)

    def grad(self, theta):
        return self.Sigma @ theta

    def hessian(self, theta):
        return self.Sigma.copy()

    def in_domain(self, theta):
        return bool(np.all(np.isfinite(theta)))

    def domain_mask(self, thetas):
        return np.all(np.isfinite(np.atleast_2d(thetas)), axis=1)

    def sample(self, theta, n, seed):
        rng = np.random.default_rng(seed)
        return rng.multivariate_normal(self.Sigma @ theta, self.Sigma, size=n)


@dataclass
class Reparametrized(ExpFamily):
    """The family seen through ``theta = A^{-1} phi``, statistic ``x -> A^{-T} x``.

    With ``A = J`` (symmetric) the whitened family has identity Fisher
    information at ``phi_0 = J theta_0``.
    """

    base: ExpFamily
    A: np.ndarray
    A_inv: np.ndarray = field(default=None)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A_inv is None:
            self.A_inv = np.linalg.inv(self.A)
        self.dim = self.base.dim
        self.theta0 = self.A @ self.base.theta0
        self.finite_support = self.base.finite_support

    def _to_base(self, phi):
        return self.A_inv @ phi

    def log_partition(self, phi):
        return self.base.log_partition(self._to_base(phi))

    def log_partition_diff(self, phi, H):
        return self.base.log_partition_diff(self._to_base(phi), np.atleast_2d(H) @ self.A_inv.T)

    def grad(self, phi):
        return self.A_inv.T @ self.base.grad(self._to_base(phi))

    def hessian(self, phi):
        H = self.A_inv.T @ self.base.hessian(self._to_base(phi)) @ self.A_inv
        return 0.5 * (H + H.T)

    def in_domain(self, phi):
        return self.base.in_domain(self._to_base(phi))

    def domain_mask(self, phis):
        return self.base.domain_mask(np.atleast_2d(phis) @ self.A_inv.T)

    def sample(self, phi, n, seed):
        return self.base.sample(self._to_base(phi), n, seed) @ self.A_inv

    def atoms(self, phi):
        pts, pr = self.base.atoms(self._to_base(phi))
        return pts @ self.A_inv, pr
