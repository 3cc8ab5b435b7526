"""Curved exponential families ``theta = theta(eta)``, ``eta`` in a compact set.

Local coordinates are ``gamma = sqrt(n) (eta - eta0)``. Computations that
need an identity Fisher information run in whitened coordinates: the
statistic ``x`` becomes ``J^{-1} x`` and ``theta`` becomes ``J theta``, so
``u_gamma = sqrt(n) J (theta(eta0 + gamma / sqrt(n)) - theta0)``.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .empirical_likelihood import MomentModel, profile_q, theta_of_eta, theta_of_eta_batch
from .exceptions import (
    DegenerateJacobian,
    DimensionMismatch,
    DimensionTooLarge,
    InvalidPattern,
    InvalidSpec,
    NoConvergedStart,
    PreconditionViolated,
    RankDeficient,
)
from .families import MvLinearSpec, build_multinomial, build_mv_linear
from .linalg import eig_extremes, sym_sqrt, unvech_iso, vech_iso
from .local import FLAT, Estimate, _dispatch, make_frame

GRAM_FLOOR = 1e-10
TAIL_NODES = {1: 8192, 2: 512}


# ---------------------------------------------------------------------------
# parameter sets


@dataclass
class Box:
    """Axis-aligned box ``lower <= eta <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or np.any(self.lower >= self.upper):
            raise InvalidSpec("box needs lower < upper componentwise")

    @property
    def dim(self):
        return self.lower.size

    def contains(self, etas):
        E = np.atleast_2d(etas)
        return np.all((E >= self.lower) & (E <= self.upper), axis=1)

    def sample(self, rng, count):
        return self.lower + (self.upper - self.lower) * rng.random((count, self.dim))

    def project(self, eta):
        return np.clip(eta, self.lower, self.upper)

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    @property
    def is_box(self):
        return True


@dataclass
class SpdProductDomain:
    """``(vech_iso(P), v)`` with ``eig(P)`` in ``[eig_low, eig_high]`` and
    ``rest_norm(v) <= rest_bound``."""

    k: int
    eig_low: float
    eig_high: float
    rest_dim: int
    rest_bound: float
    rest_norm: Callable = field(default=np.linalg.norm)

    @property
    def n_sym(self):
        return self.k * (self.k + 1) // 2

    @property
    def dim(self):
        return self.n_sym + self.rest_dim

    @property
    def is_box(self):
        return False

    def _split(self, eta):
        return unvech_iso(eta[: self.n_sym], self.k), eta[self.n_sym :]

    def contains(self, etas):
        out = []
        for eta in np.atleast_2d(etas):
            P, v = self._split(eta)
            w = np.linalg.eigvalsh(P)
            out.append(w[0] >= self.eig_low and w[-1] <= self.eig_high
                       and self.rest_norm(v) <= self.rest_bound)
        return np.array(out, dtype=bool)

    def sample(self, rng, count):
        rows = []
        for _ in range(count):
            Qm, _ = np.linalg.qr(rng.standard_normal((self.k, self.k)))
            w = rng.uniform(self.eig_low, self.eig_high, self.k)
            P = (Qm * w) @ Qm.T
            v = rng.standard_normal(self.rest_dim)
            v *= self.rest_bound * rng.random() ** (1.0 / max(self.rest_dim, 1)) / max(np.linalg.norm(v), 1e-300)
            nv = self.rest_norm(v)
            if nv > self.rest_bound:
                v *= self.rest_bound / nv
            rows.append(np.concatenate([vech_iso(0.5 * (P + P.T)), v]))
        return np.array(rows).reshape(count, self.dim)

    def project(self, eta):
        P, v = self._split(np.asarray(eta, dtype=float))
        w, V = np.linalg.eigh(P)
        P = (V * np.clip(w, self.eig_low, self.eig_high)) @ V.T
        nv = self.rest_norm(v)
        if nv > self.rest_bound:
            v = v * (self.rest_bound / nv)
        return np.concatenate([vech_iso(0.5 * (P + P.T)), v])

    def bounding_box(self):
        iu = np.triu_indices(self.k)
        diag = iu[0] == iu[1]
        lo = np.where(diag, self.eig_low, -math.sqrt(2.0) * self.eig_high)
        hi = np.where(diag, self.eig_high, math.sqrt(2.0) * self.eig_high)
        r = np.full(self.rest_dim, self.rest_bound)
        return np.concatenate([lo, -r]), np.concatenate([hi, r])


# ---------------------------------------------------------------------------
# curved maps


@dataclass
class CurvedMap:
    """A map ``eta -> theta(eta)`` into the natural parameters of ``base_model``.

    Parameters
    ----------
    map : callable
        ``eta -> theta`` for a single ``eta``.
    d1, d : int
        Dimensions of ``eta`` and ``theta``.
    domain : Box or SpdProductDomain
        Compact parameter set containing ``eta0`` in its interior.
    eta0 : array
        True parameter; ``map(eta0)`` must equal ``base_model.theta0``.
    base_model : ExpFamily
    map_batch : callable, optional
        Vectorised map over rows.
    jacobian : callable, optional
        Exact derivative ``eta -> (d, d1)``; finite differences otherwise.
    """

    map: Callable
    d1: int
    d: int
    domain: object
    eta0: np.ndarray
    base_model: object
    map_batch: Optional[Callable] = None
    jacobian: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        self.eta0 = np.atleast_1d(np.asarray(self.eta0, dtype=float))
        if self.d1 > self.d:
            raise InvalidSpec(f"need d1 <= d, got d1={self.d1}, d={self.d}")
        if self.eta0.size != self.d1 or self.domain.dim != self.d1:
            raise DimensionMismatch("eta0 and the domain must have dimension d1")
        if not self.domain.contains(self.eta0)[0]:
            raise InvalidSpec("eta0 must lie in the parameter set")
        theta0 = np.asarray(self.map(self.eta0), dtype=float)
        scale = 1.0 + np.max(np.abs(theta0))
        if theta0.size != self.d or np.max(np.abs(theta0 - self.base_model.theta0)) > 1e-12 * scale:
            raise InvalidSpec("map(eta0) must equal the base model's true parameter")
        self.theta0 = np.asarray(self.base_model.theta0, dtype=float)

    def evaluate(self, etas):
        E = np.atleast_2d(np.asarray(etas, dtype=float))
        if self.map_batch is not None:
            return np.asarray(self.map_batch(E), dtype=float).reshape(E.shape[0], self.d)
        return np.array([self.map(e) for e in E], dtype=float).reshape(E.shape[0], self.d)

    def jacobian_at(self, eta, step=1e-5):
        """``d theta / d eta`` at ``eta``, shape ``(d, d1)``."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        if self.jacobian is not None:
            return np.asarray(self.jacobian(eta), dtype=float).reshape(self.d, self.d1)
        h = step * np.maximum(1.0, np.abs(eta))
        E = np.vstack([eta + np.diag(h), eta - np.diag(h)])
        T = self.evaluate(E)
        return ((T[: self.d1] - T[self.d1 :]) / (2.0 * h[:, None])).T

    def domain_check(self, etas):
        """Whether every image ``theta(eta)`` lies in the natural parameter space."""
        return bool(all(self.base_model.in_domain(t) for t in self.evaluate(etas)))


def _whitener(cmap, whiten):
    if not whiten:
        return np.eye(cmap.d)
    return make_frame(cmap.base_model, cmap.theta0).J


# ---------------------------------------------------------------------------
# linearisation and injectivity


@dataclass(frozen=True)
class Linearization:
    """First-order description of ``sqrt(n)(theta(eta0 + gamma/sqrt(n)) - theta0)``.

    The reported split puts the whole residual into the additive term
    (``delta2 = 0``). ``delta1_alt``/``delta2_alt`` give the other split:
    the additive term is the residual near ``gamma = 0`` and the remainder
    is charged to the multiplicative term.
    """

    G: np.ndarray
    delta1: float
    delta2: float
    kappa: float
    n: int
    gram: np.ndarray
    gram_eigs: tuple
    whitener: np.ndarray
    delta1_alt: float = 0.0
    delta2_alt: float = 0.0

    @property
    def d(self):
        return self.G.shape[0]

    @property
    def d1(self):
        return self.G.shape[1]

    @property
    def delta1_sqrt_d(self):
        return self.delta1 * math.sqrt(self.d)

    @property
    def delta2_d(self):
        return self.delta2 * self.d


def _uniform_ball(rng, count, dim, radius):
    D = rng.standard_normal((count, dim))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    return D * (radius * rng.random(count) ** (1.0 / dim))[:, None]


def linearize(cmap, n, kappa=1.0, gamma_budget=2000, seed=0, whiten=False):
    """Jacobian and empirical remainder sizes on ``||gamma|| <= kappa sqrt(d)``.

    Parameters
    ----------
    cmap : CurvedMap
    n : int
    kappa : float
        Ball scale.
    gamma_budget : int
        Number of sampled ``gamma``; a few points on the boundary sphere are
        always included.
    whiten : bool
        Work in whitened ``theta`` coordinates (``J theta``).

    Raises
    ------
    DegenerateJacobian
        If the Gram matrix ``G'G`` has smallest eigenvalue below ``1e-10``.
    PreconditionViolated
        If the ball leaves the parameter set after scaling by ``1/sqrt(n)``.
    """
    rng = np.random.default_rng(seed)
    d, d1 = cmap.d, cmap.d1
    W = _whitener(cmap, whiten)
    G = W @ cmap.jacobian_at(cmap.eta0)
    gram = G.T @ G
    lo, hi = eig_extremes(gram)
    if lo < GRAM_FLOOR:
        raise DegenerateJacobian(f"min eigenvalue of G'G is {lo:.3e}")
    radius = kappa * math.sqrt(d)
    gammas = _uniform_ball(rng, gamma_budget, d1, radius)
    shell = rng.standard_normal((min(gamma_budget, 8 * d1), d1))
    shell *= radius / np.linalg.norm(shell, axis=1, keepdims=True)
    gammas = np.vstack([gammas, shell])
    etas = cmap.eta0 + gammas / math.sqrt(n)
    if not np.all(cmap.domain.contains(etas)):
        raise PreconditionViolated([f"ball of radius {radius:.3g} leaves the parameter set at n={n}"])
    sqn = math.sqrt(n)
    resid = sqn * (cmap.evaluate(etas) - cmap.theta0) @ W.T - gammas @ G.T
    delta1 = float(np.max(np.linalg.norm(resid, axis=1)))

    # alternative split: additive part probed near gamma = 0
    probe_dirs = rng.standard_normal((4 * d1, d1))
    probe_dirs /= np.linalg.norm(probe_dirs, axis=1, keepdims=True)
    probes = 1e-3 * math.sqrt(d) * probe_dirs
    pres = sqn * (cmap.evaluate(cmap.eta0 + probes / sqn) - cmap.theta0) @ W.T - probes @ G.T
    r1 = pres.mean(axis=0)
    Gg = np.linalg.norm(gammas @ G.T, axis=1)
    ok = Gg > 0
    delta2_alt = float(np.max(np.linalg.norm(resid[ok] - r1, axis=1) / Gg[ok])) if ok.any() else 0.0
    return Linearization(G, delta1, 0.0, float(kappa), int(n), gram, (lo, hi), W,
                         float(np.linalg.norm(r1)), delta2_alt)


def injectivity_floor(cmap, grid_budget=4000, seed=0):
    """Smallest sampled ``||theta(eta) - theta0|| / ||eta - eta0||``.

    Half the points are uniform over the parameter set, half lie on shells
    around ``eta0`` with radii from ``1e-4`` to ``1e-1`` of the set's width.
    A value below ``1e-6`` triggers a ``RuntimeWarning``.
    """
    rng = np.random.default_rng(seed)
    half = grid_budget // 2
    far = cmap.domain.sample(rng, half)
    lo, hi = cmap.domain.bounding_box()
    width = float(np.max(hi - lo))
    dirs = rng.standard_normal((grid_budget - half, cmap.d1))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = width * 10.0 ** rng.uniform(-4, -1, grid_budget - half)
    near = cmap.eta0 + dirs * radii[:, None]
    near = near[cmap.domain.contains(near)]
    etas = np.vstack([far, near])
    step = np.linalg.norm(etas - cmap.eta0, axis=1)
    keep = step > 0
    ratio = np.linalg.norm(cmap.evaluate(etas[keep]) - cmap.theta0, axis=1) / step[keep]
    floor = float(np.min(ratio))
    if floor < 1e-6:
        warnings.warn(f"map looks non-injective: floor {floor:.3e}", RuntimeWarning, stacklevel=2)
    return floor


def s_statistic(lin, x_bar, mu, n):
    """``(G'G)^{-1} G' sqrt(n) W^{-T}(x_bar - mu)``, the Gaussian centre in ``gamma``.

    ``W`` is the whitener stored in ``lin`` (identity when unwhitened), so
    whitened statistics are ``J^{-1} x``.
    """
    if lin.gram_eigs[0] < GRAM_FLOOR:
        raise DegenerateJacobian("G'G is singular")
    diff = math.sqrt(n) * np.linalg.solve(lin.whitener.T, np.asarray(x_bar, dtype=float) - mu)
    return np.linalg.solve(lin.gram, lin.G.T @ diff)


# ---------------------------------------------------------------------------
# curved posterior


@dataclass(frozen=True)
class CurvedLocalPosterior:
    cmap: CurvedMap
    frame: object
    n: int
    x_bar: np.ndarray
    G: np.ndarray
    s: np.ndarray
    gram_inv: np.ndarray
    prior: object = FLAT

    @property
    def dim(self):
        return self.cmap.d1

    @property
    def reference_mean(self):
        return self.s

    @property
    def reference_cov_factor(self):
        return sym_sqrt(self.gram_inv)

    def eta_of_gamma(self, Gam):
        return self.cmap.eta0 + np.atleast_2d(Gam) / math.sqrt(self.n)

    def u_of_gamma(self, Gam):
        """``sqrt(n) J (theta(eta0 + gamma/sqrt(n)) - theta0)``."""
        T = self.cmap.evaluate(self.eta_of_gamma(Gam))
        return math.sqrt(self.n) * (T - self.cmap.theta0) @ self.frame.J.T

    def log_Z(self, Gam):
        """``n <x_bar, theta - theta0> - n (psi(theta) - psi(theta0))``; ``-inf`` outside."""
        Gam = np.atleast_2d(np.asarray(Gam, dtype=float))
        etas = self.eta_of_gamma(Gam)
        inside = self.cmap.domain.contains(etas)
        out = np.full(Gam.shape[0], -np.inf)
        if inside.any():
            H = self.cmap.evaluate(etas[inside]) - self.cmap.theta0
            with np.errstate(invalid="ignore"):
                val = self.n * (H @ self.x_bar) - self.n * self.frame.model.log_partition_diff(self.cmap.theta0, H)
            out[inside] = np.where(np.isfinite(val), val, -np.inf)
        return out

    def log_unnormalized(self, Gam):
        out = self.log_Z(Gam)
        if self.prior.is_flat:
            return out
        ok = np.isfinite(out)
        res = np.full(out.shape, -np.inf)
        thetas = self.cmap.evaluate(self.eta_of_gamma(np.atleast_2d(Gam)[ok]))
        res[ok] = out[ok] + self.prior(thetas)
        return res


def curved_local_posterior(cmap, prior=FLAT, data=None, n=None, x_bar=None):
    """Posterior of ``gamma`` with its Gaussian reference ``N(s, (G'G)^{-1})``.

    ``G = J dtheta/deta(eta0)`` in whitened coordinates. Pass either ``data``
    (rows of sufficient statistics) or ``x_bar`` with ``n``.
    """
    if data is not None:
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if data.shape[1] != cmap.d:
            raise DimensionMismatch(f"data has {data.shape[1]} columns, map has d={cmap.d}")
        n = data.shape[0] if n is None else n
        x_bar = data.mean(axis=0)
    if x_bar is None or n is None:
        raise ValueError("need data, or x_bar together with n")
    x_bar = np.asarray(x_bar, dtype=float).ravel()
    if x_bar.size != cmap.d:
        raise DimensionMismatch(f"mean has length {x_bar.size}, map has d={cmap.d}")
    frame = make_frame(cmap.base_model, cmap.theta0)
    G = frame.J @ cmap.jacobian_at(cmap.eta0)
    gram = G.T @ G
    if eig_extremes(gram)[0] < GRAM_FLOOR:
        raise DegenerateJacobian("G'G is singular")
    gram_inv = np.linalg.inv(gram)
    gram_inv = 0.5 * (gram_inv + gram_inv.T)
    s = gram_inv @ (G.T @ (math.sqrt(n) * (frame.J_inv @ (x_bar - frame.mu))))
    return CurvedLocalPosterior(cmap, frame, int(n), x_bar, G, s, gram_inv, prior)


def curved_tv(cposterior, method="auto", nodes=None, radius=10.0, budget=100_000, seed=0):
    """``int |pi*(gamma) - phi(gamma; s, (G'G)^{-1})| dgamma`` with an error estimate."""
    return _dispatch(cposterior, 0.0, method, nodes, radius, budget, seed)


def tail_mass_audit(cposterior, k_bar, nodes=None):
    """Posterior mass of ``gamma`` outside ``||gamma|| <= k_bar sqrt(d)``.

    Integrates over a grid on the bounding box of the local parameter set,
    on the log scale, so tiny ratios stay representable.
    """
    d1 = cposterior.dim
    if d1 > 2:
        raise DimensionTooLarge(f"tail audit supports d1 <= 2, got {d1}")
    nodes = TAIL_NODES[d1] if nodes is None else int(nodes)
    lo, hi = cposterior.cmap.domain.bounding_box()
    sqn = math.sqrt(cposterior.n)
    lo, hi = sqn * (lo - cposterior.cmap.eta0), sqn * (hi - cposterior.cmap.eta0)
    r = k_bar * math.sqrt(cposterior.cmap.d)
    if d1 == 1:
        # cell edges at +-r so no cell straddles the boundary
        cuts = np.unique(np.clip([lo[0], -r, r, hi[0]], lo[0], hi[0]))
        pieces = [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]
        grid, logw = [], []
        for a, b in pieces:
            h = (b - a) / nodes
            grid.append(a + h * (np.arange(nodes) + 0.5))
            logw.append(np.full(nodes, math.log(h)))
        grid, logw = np.concatenate(grid)[:, None], np.concatenate(logw)
    else:
        axes = [lo[i] + (hi[i] - lo[i]) * (np.arange(nodes) + 0.5) / nodes for i in range(d1)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d1)
        logw = np.zeros(grid.shape[0])
    logv = cposterior.log_unnormalized(grid) + logw
    outside = np.linalg.norm(grid, axis=1) > r
    if not outside.any() or not np.isfinite(logv[outside]).any():
        return 0.0
    return float(min(1.0, math.exp(logsumexp(logv[outside]) - logsumexp(logv))))


# ---------------------------------------------------------------------------
# maximum likelihood


def curved_mle(cmap, data=None, n=None, x_bar=None, starts=10, seed=0):
    """Maximise ``<x_bar, theta(eta)> - psi(theta(eta))`` over the parameter set.

    The first start is next to ``eta0``; the remaining ``starts - 1`` are
    drawn uniformly from the parameter set. Box sets use bounded L-BFGS-B;
    other sets are handled by optimising over the projection with a
    quadratic penalty.

    Returns
    -------
    eta_hat : ndarray
    norm_error : float
        ``||eta_hat - eta0||``.

    Raises
    ------
    NoConvergedStart
        If no start both converges and improves on its initial value.
    """
    if starts < 1:
        raise ValueError("starts must be at least 1")
    if data is not None:
        data = np.atleast_2d(np.asarray(data, dtype=float))
        x_bar = data.mean(axis=0)
    x_bar = np.asarray(x_bar, dtype=float).ravel()
    if x_bar.size != cmap.d:
        raise DimensionMismatch(f"mean has length {x_bar.size}, map has d={cmap.d}")
    model, dom = cmap.base_model, cmap.domain
    rng = np.random.default_rng(seed)

    def raw(eta):
        theta = cmap.evaluate(eta)[0]
        if not model.in_domain(theta):
            return np.inf, None
        return float(model.log_partition(theta) - x_bar @ theta), theta

    def objective(eta):
        eta_p = dom.project(eta)
        val, theta = raw(eta_p)
        if theta is None:
            return 1e300, np.zeros_like(eta)
        grad = cmap.jacobian_at(eta_p).T @ (model.grad(theta) - x_bar)
        if dom.is_box:
            return val, grad
        pen = eta - eta_p
        # gradient of the projection is taken as identity
        return val + 0.5 * PENALTY * pen @ pen, grad + PENALTY * pen

    lo, hi = dom.bounding_box()
    bounds = list(zip(lo, hi)) if dom.is_box else None
    jitter = 1e-3 * (hi - lo) * rng.standard_normal(cmap.d1)
    inits = [dom.project(cmap.eta0 + jitter)]
    if starts > 1:
        inits.extend(dom.sample(rng, starts - 1))
    best = None
    for x0 in inits:
        f0 = objective(x0)[0]
        res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=bounds)
        eta = dom.project(res.x)
        f = raw(eta)[0]
        if not np.isfinite(f) or not (res.success or f < f0):
            continue
        if best is None or f < best[0]:
            best = (f, eta)
    if best is None:
        raise NoConvergedStart(f"all {starts} starts failed")
    return best[1], float(np.linalg.norm(best[1] - cmap.eta0))


PENALTY = 1e4


# ---------------------------------------------------------------------------
# instances


def el_mean_map(support=(0.0, 1.0), eta0=0.3, lower=0.02, upper=0.98, weights=None):
    """Curved multinomial from the mean restriction ``m(x, eta) = x - eta``."""
    S = np.asarray(support, dtype=float)
    d1 = 1 if S.ndim == 1 else S.shape[1]
    model = MomentModel(S, "mean", d1, lower=lower, upper=upper, weights=weights)
    model.check_dimensions()
    eta0 = np.atleast_1d(np.asarray(eta0, dtype=float))
    q0 = profile_q(model, eta0).q
    base = build_multinomial(q0)
    return CurvedMap(
        map=lambda e: theta_of_eta(model, e),
        d1=model.d1,
        d=model.d,
        domain=Box(model.lower, model.upper),
        eta0=eta0,
        base_model=base,
        map_batch=lambda E: theta_of_eta_batch(model, E),
        name="el-mean",
    )


def identity_embed_map(base_model, half_width=10.0):
    """``theta(eta) = J^{-1} eta`` with ``eta0 = J theta0``, so ``gamma = u``."""
    frame = make_frame(base_model)
    J, J_inv = frame.J, frame.J_inv
    eta0 = J @ frame.theta0
    # theta0 itself is used at eta0 to keep map(eta0) exact
    return CurvedMap(
        map=lambda e: frame.theta0 + J_inv @ (np.asarray(e) - eta0),
        d1=frame.dim,
        d=frame.dim,
        domain=Box(eta0 - half_width, eta0 + half_width),
        eta0=eta0,
        base_model=base_model,
        map_batch=lambda E: frame.theta0 + (np.atleast_2d(E) - eta0) @ J_inv.T,
        jacobian=lambda e: J_inv,
        name="identity-embed",
    )


@dataclass
class SurSpec:
    """Zero-restricted multivariate regression.

    ``pattern[i, k]`` marks covariate ``i`` as present in equation ``k``.
    """

    lambda_min: float
    M: float
    pattern: np.ndarray
    Sigma: np.ndarray
    Pi: np.ndarray
    Z: np.ndarray
    sigma_max: Optional[float] = None

    def validate(self):
        self.pattern = np.asarray(self.pattern, dtype=bool)
        self.Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        self.Pi = np.atleast_2d(np.asarray(self.Pi, dtype=float))
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if self.lambda_min <= 0 or self.M <= 1:
            raise InvalidSpec("need lambda_min > 0 and M > 1")
        if self.pattern.shape != self.Pi.shape:
            raise InvalidPattern("pattern must have the shape of Pi")
        if not np.all(self.pattern.any(axis=1)):
            raise InvalidPattern("a covariate is excluded from every equation")
        if np.any(self.Pi[~self.pattern] != 0):
            raise InvalidPattern("Pi has nonzero entries outside the pattern")
        lo, hi = eig_extremes(self.Sigma)
        if lo <= self.lambda_min:
            raise InvalidSpec("lambda_min(Sigma) must exceed lambda_min")
        if np.linalg.norm(self.Pi, 2) >= self.M:
            raise InvalidSpec("operator norm of Pi must be below M")
        if self.sigma_max is None:
            self.sigma_max = 4.0 * hi
        if self.sigma_max <= hi:
            raise InvalidSpec("sigma_max must exceed lambda_max(Sigma)")
        return self


def _sym_block(eta, d_r):
    n_sym = d_r * (d_r + 1) // 2
    return unvech_iso(eta[:n_sym], d_r), eta[n_sym:]


def sur_map(spec):
    """``eta = (vech_iso(Sigma^{-1}), free entries of Pi) -> (-Sigma^{-1}/2, Pi Sigma^{-1})``.

    The parameter set keeps ``eig(Sigma)`` in ``(lambda_min, sigma_max)`` and
    the operator norm of ``Pi`` at most ``M``.

    Raises
    ------
    InvalidPattern
        If the zero pattern removes a covariate from every equation.
    """
    spec.validate()
    base = build_mv_linear(MvLinearSpec(spec.Pi, spec.Sigma, spec.Z))
    mask = spec.pattern
    d_r = spec.Sigma.shape[0]

    def to_pi(v):
        P = np.zeros(mask.shape)
        P[mask] = v
        return P

    def theta(eta):
        P_inv, v = _sym_block(np.asarray(eta, dtype=float), d_r)
        return base.pack(-0.5 * P_inv, to_pi(v) @ P_inv)

    domain = SpdProductDomain(d_r, 1.0 / spec.sigma_max, 1.0 / spec.lambda_min, int(mask.sum()),
                              spec.M, rest_norm=lambda v: float(np.linalg.norm(to_pi(v), 2)))
    eta0 = np.concatenate([vech_iso(np.linalg.inv(spec.Sigma)), spec.Pi[mask]])
    # map(eta0) and theta0 differ only by the rounding of inv(Sigma); use the
    # map's own value as the base model's truth
    base.theta0 = theta(eta0)
    return CurvedMap(theta, domain.dim, base.dim, domain, eta0, base, name="sur")


@dataclass
class SsemSpec:
    """Single structural equation ``y1 = Y2 beta + Z1 gamma + v`` in reduced form.

    ``Pi12`` is ``k1 x (d_r - 1)``, ``Pi22`` is ``k2 x (d_r - 1)``; ``Z`` has
    ``k1 + k2`` columns ordered ``(Z1 : Z2)``.
    """

    beta: np.ndarray
    gamma: np.ndarray
    Pi12: np.ndarray
    Pi22: np.ndarray
    Sigma: np.ndarray
    Z: np.ndarray
    lambda_min: float = 0.05
    sigma_max: Optional[float] = None
    M: Optional[float] = None

    def validate(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        self.Pi12 = np.atleast_2d(np.asarray(self.Pi12, dtype=float))
        self.Pi22 = np.atleast_2d(np.asarray(self.Pi22, dtype=float))
        self.Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        g = self.beta.size
        if self.Sigma.shape != (g + 1, g + 1):
            raise DimensionMismatch("Sigma must be (d_r x d_r) with d_r = len(beta) + 1")
        if self.Pi12.shape != (self.gamma.size, g) or self.Pi22.shape[1] != g:
            raise DimensionMismatch("Pi12 must be k1 x (d_r - 1) and Pi22 k2 x (d_r - 1)")
        if self.Z.shape[1] != self.gamma.size + self.Pi22.shape[0]:
            raise DimensionMismatch("Z must have k1 + k2 columns")
        if np.linalg.matrix_rank(self.Pi22) < g:
            raise RankDeficient(f"rank(Pi22) < d_r - 1 = {g}")
        lo, hi = eig_extremes(self.Sigma)
        if lo <= self.lambda_min:
            raise InvalidSpec("lambda_min(Sigma) must exceed lambda_min")
        if self.sigma_max is None:
            self.sigma_max = 4.0 * hi
        if self.M is None:
            self.M = 4.0 * (1.0 + np.linalg.norm(self._rest()))
        return self

    def _rest(self):
        return np.concatenate([self.Pi12.ravel(), self.Pi22.ravel(), self.gamma, self.beta])


def ssem_reduced_form(Pi12, Pi22, gamma, beta):
    """``[[gamma + Pi12 beta, Pi12], [Pi22 beta, Pi22]]``."""
    top = np.column_stack([gamma + Pi12 @ beta, Pi12])
    bottom = np.column_stack([Pi22 @ beta, Pi22])
    return np.vstack([top, bottom])


def ssem_map(spec):
    """``eta = (vech_iso(Sigma^{-1}), Pi12, Pi22, gamma, beta) -> (-Sigma^{-1}/2, Pi Sigma^{-1})``.

    Raises
    ------
    RankDeficient
        If ``rank(Pi22) < d_r - 1``.
    """
    spec.validate()
    g, k1, k2 = spec.beta.size, spec.gamma.size, spec.Pi22.shape[0]
    d_r = g + 1

    def unpack_rest(v):
        i = 0
        Pi12 = v[i : i + k1 * g].reshape(k1, g); i += k1 * g
        Pi22 = v[i : i + k2 * g].reshape(k2, g); i += k2 * g
        gamma = v[i : i + k1]; i += k1
        return Pi12, Pi22, gamma, v[i : i + g]

    Pi0 = ssem_reduced_form(spec.Pi12, spec.Pi22, spec.gamma, spec.beta)
    base = build_mv_linear(MvLinearSpec(Pi0, spec.Sigma, spec.Z))

    def theta(eta):
        P_inv, v = _sym_block(np.asarray(eta, dtype=float), d_r)
        return base.pack(-0.5 * P_inv, ssem_reduced_form(*unpack_rest(v)) @ P_inv)

    rest = spec._rest()
    domain = SpdProductDomain(d_r, 1.0 / spec.sigma_max, 1.0 / spec.lambda_min, rest.size, spec.M)
    eta0 = np.concatenate([vech_iso(np.linalg.inv(spec.Sigma)), rest])
    base.theta0 = theta(eta0)
    cmap = CurvedMap(theta, domain.dim, base.dim, domain, eta0, base, name="ssem")
    cmap.unpack_rest = unpack_rest
    return cmap


def _toy_design(n_design, d_c, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_design, d_c)) + np.arange(1, d_c + 1)


def sur_toy(n_design=200, seed=7):
    """Two equations, two covariates; each equation drops one covariate."""
    pattern = np.array([[True, False], [True, True]])
    Pi = np.array([[0.8, 0.0], [-0.5, 0.6]])
    Sigma = np.array([[1.0, 0.3], [0.3, 0.8]])
    return sur_map(SurSpec(0.2, 2.0, pattern, Sigma, Pi, _toy_design(n_design, 2, seed)))


def ssem_toy(n_design=200, seed=11):
    """``d_r = 2`` endogenous columns, ``d_c = 2`` instruments."""
    spec = SsemSpec(beta=[0.5], gamma=[0.3], Pi12=[[0.4]], Pi22=[[1.2]],
                    Sigma=[[1.0, 0.2], [0.2, 0.9]], Z=_toy_design(n_design, 2, seed))
    return ssem_map(spec)


def identity_embed_toy(probs=(0.5, 0.5)):
    return identity_embed_map(build_multinomial(np.asarray(probs, dtype=float)))


CURVED_INSTANCES = {
    "el-mean": el_mean_map,
    "sur-toy": sur_toy,
    "ssem-toy": ssem_toy,
    "identity-embed": identity_embed_toy,
}


def build_curved(name, **params):
    """Construct a named curved instance."""
    try:
        factory = CURVED_INSTANCES[name]
    except KeyError:
        raise InvalidSpec(f"unknown curved instance {name!r}; choose from {sorted(CURVED_INSTANCES)}") from None
    return factory(**params)
