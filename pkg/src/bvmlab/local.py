"""Local-parameter-space machinery.

Coordinates ``u = sqrt(n) J (theta - theta0)`` with ``J = F^{1/2}``. The
posterior in these coordinates is compared with ``N(Delta_n, I)`` through the
weighted L1 distance ``int ||u||^alpha |pi*(u) - phi(u)| du``; ``alpha = 0`` is
the total-variation integral (without the conventional factor 1/2).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import erf, logsumexp

from .exceptions import DegenerateWeights, DimensionMismatch, DimensionTooLarge
from .linalg import sym_sqrt_and_inverse

MAX_QUADRATURE_DIM = 3
DEFAULT_NODES = {1: 2048, 2: 256, 3: 96}
ESS_FLOOR = 0.005
CHUNK = 8192


class Estimate(NamedTuple):
    estimate: float
    error: float


@dataclass(frozen=True)
class LocalFrame:
    model: object
    theta0: np.ndarray
    mu: np.ndarray
    F: np.ndarray
    J: np.ndarray
    J_inv: np.ndarray

    @property
    def dim(self):
        return self.theta0.size


def make_frame(model, theta0=None):
    """Centre ``model`` at ``theta0`` (default: the model's true parameter)."""
    theta0 = model.theta0 if theta0 is None else np.asarray(theta0, dtype=float)
    theta0 = model._check(theta0)
    F = model.hessian(theta0)
    J, J_inv = sym_sqrt_and_inverse(F)
    return LocalFrame(model, theta0, model.grad(theta0), F, J, J_inv)


@dataclass(frozen=True)
class SampleSummary:
    n: int
    x_bar: np.ndarray
    delta_n: np.ndarray


def summary_from_mean(frame, x_bar, n):
    x_bar = np.asarray(x_bar, dtype=float).ravel()
    if x_bar.size != frame.dim:
        raise DimensionMismatch(f"mean has length {x_bar.size}, model dimension is {frame.dim}")
    delta = math.sqrt(n) * (frame.J_inv @ (x_bar - frame.mu))
    return SampleSummary(int(n), x_bar, delta)


def make_summary(frame, data, n=None):
    """Column mean of ``data`` and the normalised score ``Delta_n``."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if n is None:
        n = data.shape[0]
    if data.shape != (n, frame.dim):
        raise DimensionMismatch(f"expected data of shape ({n}, {frame.dim}), got {data.shape}")
    return summary_from_mean(frame, data.mean(axis=0), n)


@dataclass(frozen=True)
class PriorSpec:
    """Prior known up to an additive constant on the log scale.

    ``log_density=None`` is the flat (improper) prior.
    """

    log_density: Optional[Callable] = None
    lipschitz_K: object = 0.0
    sup_log_ratio_bound: object = 0.0

    @property
    def is_flat(self):
        return self.log_density is None

    def __call__(self, thetas):
        thetas = np.atleast_2d(thetas)
        if self.log_density is None:
            return np.zeros(thetas.shape[0])
        return np.array([self.log_density(t) for t in thetas], dtype=float)

    @classmethod
    def flat(cls):
        return cls()

    @classmethod
    def lipschitz(cls, K, center):
        """``log pi(theta) = -K ||theta - center||``."""
        center = np.asarray(center, dtype=float)
        return cls(lambda t: -K * float(np.linalg.norm(t - center)), lambda r: K, 0.0)


FLAT = PriorSpec.flat()


@dataclass(frozen=True)
class LocalPosterior:
    """Unnormalised posterior of ``u`` given a frame and a data summary."""

    frame: LocalFrame
    summary: SampleSummary
    prior: PriorSpec = field(default=FLAT)

    @property
    def dim(self):
        return self.frame.dim

    @property
    def n(self):
        return self.summary.n

    @property
    def reference_mean(self):
        return self.summary.delta_n

    @property
    def reference_cov_factor(self):
        return np.eye(self.dim)

    def theta_of_u(self, U):
        return self.frame.theta0 + np.atleast_2d(U) @ self.frame.J_inv.T / math.sqrt(self.n)

    def log_Z(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        fr, n = self.frame, self.n
        H = U @ fr.J_inv.T / math.sqrt(n)
        lin = math.sqrt(n) * (U @ (fr.J_inv @ self.summary.x_bar))
        with np.errstate(invalid="ignore"):
            out = lin - n * fr.model.log_partition_diff(fr.theta0, H)
        return np.where(np.isfinite(out), out, -np.inf)

    def log_unnormalized(self, U):
        out = self.log_Z(U)
        if self.prior.is_flat:
            return out
        ok = np.isfinite(out)
        prior = np.full(out.shape, -np.inf)
        prior[ok] = self.prior(self.theta_of_u(np.atleast_2d(U)[ok]))
        return out + prior


def make_posterior(model, data, prior=FLAT, theta0=None):
    frame = make_frame(model, theta0)
    return LocalPosterior(frame, make_summary(frame, data), prior)


def log_Z(posterior, u):
    """Log likelihood ratio ``ln Z_n(u)``; ``-inf`` off the parameter space."""
    out = posterior.log_Z(u)
    return float(out[0]) if np.ndim(u) == 1 else out


def log_Z_tilde(summary, u):
    """Gaussian kernel ``<u, Delta_n> - ||u||^2 / 2``."""
    U = np.atleast_2d(np.asarray(u, dtype=float))
    out = U @ summary.delta_n - 0.5 * np.einsum("ij,ij->i", U, U)
    return float(out[0]) if np.ndim(u) == 1 else out


def m_d_alpha(d, alpha):
    """``(d + alpha) (1 + alpha ln(d + alpha) / (d + alpha))``."""
    if d < 1 or alpha < 0:
        raise ValueError("need d >= 1 and alpha >= 0")
    s = d + alpha
    return s * (1.0 + alpha * math.log(s) / s)


# ---------------------------------------------------------------------------
# distance estimators shared with the curved layer


def _weights(X, alpha):
    if alpha == 0:
        return np.ones(X.shape[0])
    return np.linalg.norm(X, axis=1) ** alpha


def _grid(d, nodes, radius):
    h = 2.0 * radius / nodes
    axis = -radius + h * (np.arange(nodes) + 0.5)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    Z = np.column_stack([m.ravel() for m in mesh])
    edge = np.any(np.abs(Z) > radius - h, axis=1)
    return Z, h**d, edge


def _quadrature_once(log_target, mean, L, alpha, nodes, radius):
    d = mean.size
    Z, cell, edge = _grid(d, nodes, radius)
    X = mean + Z @ L.T
    det = abs(np.linalg.det(L))
    vol = cell * det
    lt = log_target(X)
    top = logsumexp(lt)
    if not np.isfinite(top):
        raise DegenerateWeights("target has no mass on the quadrature grid")
    post = np.exp(lt - top)
    post /= post.sum() * vol
    ref = np.exp(-0.5 * np.einsum("ij,ij->i", Z, Z)) / ((2 * np.pi) ** (d / 2) * det)
    w = _weights(X, alpha)
    value = float(np.sum(w * np.abs(post - ref)) * vol)
    edge_mass = float(np.sum(w[edge] * post[edge]) * vol)
    ref_w2 = float(np.sum(w**2 * ref) * vol)
    return value, edge_mass, ref_w2


def weighted_l1_quadrature(log_target, mean, L, alpha=0.0, nodes=None, radius=10.0):
    """Tensor-grid estimate of ``int ||x||^alpha |p(x) - phi(x; mean, L L')| dx``.

    ``p`` is ``exp(log_target)`` normalised on the grid. The grid is a
    midpoint rule over ``mean + L [-radius, radius]^d``. The error bound adds
    the Gaussian mass outside the box (weighted by Cauchy-Schwarz), the
    weighted target mass in the outermost cell layer, and the change under
    grid halving.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    d = mean.size
    if d > MAX_QUADRATURE_DIM:
        raise DimensionTooLarge(f"quadrature supports d <= {MAX_QUADRATURE_DIM}, got {d}")
    nodes = DEFAULT_NODES[d] if nodes is None else int(nodes)
    if nodes < 64:
        raise ValueError("need at least 64 nodes per axis")
    nodes += nodes % 2
    fine, edge, ref_w2 = _quadrature_once(log_target, mean, L, alpha, nodes, radius)
    coarse, _, _ = _quadrature_once(log_target, mean, L, alpha, nodes // 2, radius)
    gauss_out = 1.0 - erf(radius / math.sqrt(2.0)) ** d
    tail = math.sqrt(max(ref_w2, 0.0) * gauss_out) if alpha else gauss_out
    return Estimate(fine, float(tail + edge + abs(fine - coarse)))


def weighted_l1_importance(log_target, mean, L, alpha=0.0, budget=100_000, seed=0):
    """Importance-sampling estimate of the same weighted L1 distance.

    The proposal is ``N(mean, 2 L L')``; the unknown normaliser of the target
    is estimated by self-normalised weighting and the standard error comes
    from the delta method. Draws are generated in fixed-size chunks, each from
    its own spawned seed, so the result does not depend on how the chunks
    are scheduled.

    Raises
    ------
    DegenerateWeights
        If the effective sample size falls below 0.5% of ``budget``.
    """
    if budget < 1000:
        raise ValueError("budget must be at least 1000")
    mean = np.asarray(mean, dtype=float).ravel()
    d = mean.size
    n_chunks = -(-budget // CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    Zs = []
    for k, child in enumerate(children):
        size = min(CHUNK, budget - k * CHUNK)
        Zs.append(np.random.default_rng(child).standard_normal((size, d)))
    Z = np.vstack(Zs)
    X = mean + math.sqrt(2.0) * Z @ L.T
    det = abs(np.linalg.det(L))
    zz = np.einsum("ij,ij->i", Z, Z)
    log_q = -0.5 * zz - 0.5 * d * math.log(4 * np.pi) - math.log(det)
    lw = log_target(X) - log_q
    top = np.max(lw)
    if not np.isfinite(top):
        raise DegenerateWeights("no proposal draw has positive target density")
    w = np.exp(lw - top)
    ess = w.sum() ** 2 / np.sum(w**2)
    if ess < ESS_FLOOR * budget:
        raise DegenerateWeights(f"effective sample size {ess:.1f} below {ESS_FLOOR:.1%} of {budget}")
    r = 2.0 ** (d / 2) * np.exp(-0.5 * zz)
    a = _weights(X, alpha)
    Zhat = w.mean()
    resid = w / Zhat - r
    g = a * np.abs(resid)
    T = g.mean()
    dT_dZ = np.mean(-a * np.sign(resid) * w / Zhat**2)
    infl = g - T + dT_dZ * (w - Zhat)
    return Estimate(float(T), float(infl.std(ddof=1) / math.sqrt(budget)))


def _dispatch(post, alpha, method, nodes, radius, budget, seed):
    L = post.reference_cov_factor
    mean = post.reference_mean
    if method == "auto":
        method = "quadrature" if mean.size <= MAX_QUADRATURE_DIM else "importance"
    if method == "quadrature":
        return weighted_l1_quadrature(post.log_unnormalized, mean, L, alpha, nodes, radius)
    if method == "importance":
        return weighted_l1_importance(post.log_unnormalized, mean, L, alpha, budget, seed)
    raise ValueError(f"unknown method {method!r}")


def tv_distance_quadrature(posterior, nodes=None, radius=10.0):
    """``int |pi*(u) - phi(u; Delta_n, I)| du`` on a tensor grid (d <= 3)."""
    return _dispatch(posterior, 0.0, "quadrature", nodes, radius, None, None)


def tv_distance_importance(posterior, budget=100_000, seed=0):
    return _dispatch(posterior, 0.0, "importance", None, None, budget, seed)


def alpha_moment_distance(posterior, alpha, method="auto", nodes=None, radius=10.0,
                          budget=100_000, seed=0):
    """``int ||u||^alpha |pi*(u) - phi(u; Delta_n, I)| du``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return _dispatch(posterior, float(alpha), method, nodes, radius, budget, seed)
