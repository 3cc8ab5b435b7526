"""Reference computations that share no code with the package.

Each routine recomputes a quantity from first principles with generic
numerical tools (dense linear algebra, adaptive quadrature, brute-force
search) so tests can compare the package against it.
"""

import math

import numpy as np
from scipy import integrate, linalg, optimize, special, stats


# multinomial information by dense algebra ---------------------------------


def multinomial_fisher_dense(p):
    """``Cov(e_j)`` over the non-base categories, built entry by entry."""
    q = np.asarray(p, dtype=float)[1:]
    d = q.size
    F = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            F[i, j] = q[i] * (1.0 - q[i]) if i == j else -q[i] * q[j]
    return F


def dense_inverse_and_sqrt(F):
    return np.linalg.inv(F), np.real(linalg.sqrtm(F))


# binary posterior in local coordinates ------------------------------------


def binary_local_log_density(u, n, x_bar, p0=0.5):
    """Log of ``Z_n(u)`` for the Bernoulli family at ``p0``."""
    theta0 = math.log(p0 / (1 - p0))
    J = math.sqrt(p0 * (1 - p0))
    theta = theta0 + u / (math.sqrt(n) * J)
    log_norm = np.logaddexp(0.0, theta) - np.logaddexp(0.0, theta0)
    return n * (x_bar * (theta - theta0) - log_norm)


def binary_tv_oracle(n, x_bar, p0=0.5, alpha=0.0):
    """``int |u|^alpha |pi*(u) - phi(u - Delta)| du`` by adaptive quadrature."""
    J = math.sqrt(p0 * (1 - p0))
    delta = math.sqrt(n) * (x_bar - p0) / J
    lo, hi = delta - 40.0, delta + 40.0
    shift = binary_local_log_density(delta, n, x_bar, p0)
    mass = integrate.quad(lambda u: math.exp(binary_local_log_density(u, n, x_bar, p0) - shift), lo, hi,
                          limit=400, points=[delta], epsabs=1e-14, epsrel=1e-12)[0]

    def integrand(u):
        post = math.exp(binary_local_log_density(u, n, x_bar, p0) - shift) / mass
        return abs(u) ** alpha * abs(post - stats.norm.pdf(u, loc=delta))

    return integrate.quad(integrand, lo, hi, limit=800, points=[delta, 0.0], epsabs=1e-14, epsrel=1e-10)[0]


# binary moment suprema in closed form --------------------------------------


def binary_b1n_at_0(p0):
    """``E|V|^3`` for ``V = (U - p0) / sqrt(p0 (1 - p0))``."""
    s = p0 * (1 - p0)
    return (p0 * (1 - p0) ** 3 + (1 - p0) * p0**3) / s**1.5


def binary_b2n(p0, n, c):
    """``sup E_theta[(U - p_theta)^4] / J^4`` over ``|J (theta - theta0)| <= sqrt(c / n)``."""
    J = math.sqrt(p0 * (1 - p0))
    theta0 = math.log(p0 / (1 - p0))
    r = math.sqrt(c / n) / J
    thetas = np.linspace(theta0 - r, theta0 + r, 20001)
    p = special.expit(thetas)
    s = p * (1 - p)
    return float(np.max(s * (1 - 3 * s)) / J**4)


def binary_lambda(p0, n, c):
    return (math.sqrt(c / n) * binary_b1n_at_0(p0) + (c / n) * binary_b2n(p0, n, c)) / 6.0


def binary_a_n(p0, n, threshold=1 / 16):
    return optimize.brentq(lambda c: binary_lambda(p0, n, c) - threshold, 1e-6, 1e4, xtol=1e-10)


# moment-restricted multinomial ----------------------------------------------


def el_two_point_bruteforce(eta, resolution=1e-4):
    """Grid search of ``0.5 log q0 + 0.5 log q1`` subject to ``q1 = eta`` (support {0, 1})."""
    q1 = np.arange(resolution, 1.0, resolution)
    q0 = 1.0 - q1
    feasible = np.abs(q0 * (0 - eta) + q1 * (1 - eta)) <= resolution / 2
    obj = np.where(feasible, 0.5 * np.log(q0) + 0.5 * np.log(q1), -np.inf)
    k = int(np.argmax(obj))
    return np.array([q0[k], q1[k]])


def logit_remainder(eta0, radius, points=20001):
    """``max |logit(eta0 + h) - logit(eta0) - logit'(eta0) h|`` over ``|h| <= radius``."""
    h = np.linspace(-radius, radius, points)
    lg = special.logit
    slope = 1.0 / (eta0 * (1 - eta0))
    return float(np.max(np.abs(lg(eta0 + h) - lg(eta0) - slope * h)))


def logit_local_remainder(eta0, n, kappa, points=20001):
    """``max |sqrt(n)(logit(eta0 + g/sqrt(n)) - logit(eta0)) - logit'(eta0) g|`` over ``|g| <= kappa``."""
    return math.sqrt(n) * logit_remainder(eta0, kappa / math.sqrt(n), points)


def bernoulli_posterior_tail_ratio(eta0, n, k_bar, lower, upper):
    """Exact flat-prior posterior mass of ``|gamma| > k_bar`` with ``x_bar = eta0``.

    The posterior of ``eta`` is a Beta distribution truncated to ``[lower, upper]``.
    """
    b = stats.beta(eta0 * n + 1, (1 - eta0) * n + 1)
    r = k_bar / math.sqrt(n)
    total = b.cdf(upper) - b.cdf(lower)
    right = b.sf(min(eta0 + r, upper)) - b.sf(upper)
    left = max(0.0, b.cdf(max(eta0 - r, lower)) - b.cdf(lower))
    return (right + left) / total


# projections and Gaussian moments ------------------------------------------


def least_squares_coefficients(G, v):
    return np.linalg.lstsq(G, v, rcond=None)[0]


def gaussian_abs_moment(k):
    """``E|Z|^k`` for a standard normal ``Z``."""
    return 2 ** (k / 2) * special.gamma((k + 1) / 2) / math.sqrt(math.pi)
